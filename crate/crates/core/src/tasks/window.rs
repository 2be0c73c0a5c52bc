//! Sliding windows for next-step prediction.

use crate::error::{Error, Result};

use super::{SequenceDataset, WindowedSample};

/// Each sequence of `T` steps yields `T - w` samples: steps `s..s+w` as input,
/// the endogenous features at step `s+w` as target.
pub fn window_dataset(ds: &SequenceDataset, w: usize) -> Result<Vec<WindowedSample>> {
    if w == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    let t = ds.steps();
    if t <= w {
        return Err(Error::Data(format!(
            "sequences have {t} steps; window length {w} needs at least {}",
            w + 1
        )));
    }
    let targets = ds.target_indices();
    let mut out = Vec::with_capacity(ds.len() * (t - w));
    for seq in &ds.sequences {
        for s in 0..t - w {
            out.push(WindowedSample {
                window: seq[s..s + w].to_vec(),
                target: targets.iter().map(|&j| seq[s + w][j]).collect(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, t: usize) -> SequenceDataset {
        SequenceDataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..n)
                .map(|i| (0..t).map(|s| vec![(100 * i + s) as f64, -(s as f64)]).collect())
                .collect(),
            vec!["x".into(), "u".into()],
            vec![false, true],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn counts_and_contents() {
        let ds = ramp(3, 8);
        let samples = window_dataset(&ds, 3).unwrap();
        assert_eq!(samples.len(), 3 * 5);
        let s = &samples[6];
        assert_eq!(s.window, vec![vec![101.0, -1.0], vec![102.0, -2.0], vec![103.0, -3.0]]);
        assert_eq!(s.target, vec![104.0]);
    }

    #[test]
    fn too_short_rejected() {
        let ds = ramp(1, 4);
        assert!(window_dataset(&ds, 4).is_err());
        assert!(window_dataset(&ds, 0).is_err());
        assert_eq!(window_dataset(&ds, 3).unwrap().len(), 1);
    }
}
