use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Tensor1, Tensor2};

/// A named span of the flat parameter buffer. Vectors have `cols == 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered, non-overlapping segments tiling one buffer.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    segments: Vec<Segment>,
    total: usize,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a segment. Names must be unique.
    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<usize> {
        let name = name.into();
        if self.segments.iter().any(|s| s.name == name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter segment {name}")));
        }
        let index = self.segments.len();
        self.segments.push(Segment {
            name,
            offset: self.total,
            rows,
            cols,
        });
        self.total += rows * cols;
        Ok(index)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn find(&self, name: &str) -> Option<(usize, &Segment)> {
        self.segments.iter().enumerate().find(|(_, s)| s.name == name)
    }
}

/// Flat trainable parameters with a named segment layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    layout: Layout,
    pub values: Vec<f64>,
}

/// Gradient buffer sharing a [`ParamVector`]'s layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVector {
    layout: Layout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.len()];
        Self { layout, values }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::shape("ParamVector", layout.len(), values.len()));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.find(name).map(|(_, s)| &self.values[s.range()])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.find(name)?.1.range();
        Some(&mut self.values[range])
    }

    pub fn set_matrix(&mut self, name: &str, m: &Tensor2) -> Result<()> {
        let seg = self
            .layout
            .find(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no segment {name}")))?
            .1
            .clone();
        if (seg.rows, seg.cols) != m.shape() {
            return Err(Error::shape(
                "set_matrix",
                format!("{}x{}", seg.rows, seg.cols),
                format!("{}x{}", m.rows, m.cols),
            ));
        }
        self.values[seg.range()].copy_from_slice(&m.data);
        Ok(())
    }

    pub fn matrix(&self, name: &str) -> Option<Tensor2> {
        let (_, seg) = self.layout.find(name)?;
        Some(Tensor2 {
            rows: seg.rows,
            cols: seg.cols,
            data: self.values[seg.range()].to_vec(),
        })
    }

    pub fn vector(&self, name: &str) -> Option<Tensor1> {
        self.segment(name).map(|s| Tensor1::new(s.to_vec()))
    }

    pub fn zero_grad(&self) -> GradVector {
        GradVector {
            layout: self.layout.clone(),
            values: vec![0.0; self.values.len()],
        }
    }
}

impl GradVector {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::shape("GradVector", layout.len(), values.len()));
        }
        Ok(Self { layout, values })
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.find(name).map(|(_, s)| &self.values[s.range()])
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.values {
            *g *= c;
        }
    }

    pub fn add_assign(&mut self, other: &GradVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::InvalidArgument("gradient layouts differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }
}
