//! Vector-valued reverse-mode tape.
//!
//! Every node holds a dense `Vec<f64>`; matrices are leaves whose shape is
//! carried by the `MatVec` op that consumes them. Nodes are appended in
//! evaluation order, so a single reverse sweep is a valid topological order.
//! Nodes that never reach the output (for instance a rejected adaptive step)
//! simply receive no gradient.

use crate::numerics::tensor::{matvec_into, sigmoid_scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatVec { m: Var, v: Var, rows: usize, cols: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Recip(Var),
    Concat(Var, Var),
    Slice(Var, usize),
    LinComb(Vec<(Var, f64)>),
    SquaredError(Var, Vec<f64>),
    Sum(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints from one reverse sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for `v`; `None` when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len(), "tape operands differ in length");
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn leaf_slice(&mut self, value: &[f64]) -> Var {
        self.leaf(value.to_vec())
    }

    pub fn constant(&mut self, len: usize, c: f64) -> Var {
        self.leaf(vec![c; len])
    }

    /// `m · v` where `m` is a `rows x cols` row-major leaf.
    pub fn matvec(&mut self, m: Var, rows: usize, cols: usize, v: Var) -> Var {
        let mut out = vec![0.0; rows];
        {
            let mv = &self.nodes[m.0].value;
            let vv = &self.nodes[v.0].value;
            assert_eq!(mv.len(), rows * cols, "matvec: matrix node has wrong size");
            assert_eq!(vv.len(), cols, "matvec: vector node has wrong size");
            matvec_into(mv, rows, cols, vv, &mut out);
        }
        self.push(out, Op::MatVec { m, v, rows, cols })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x / y);
        self.push(v, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).iter().map(|x| c * x).collect();
        self.push(v, Op::Scale(a, c))
    }

    /// `a + c` elementwise.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).iter().map(|x| x + c).collect();
        self.push(v, Op::Offset(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| sigmoid_scalar(x)).collect();
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .iter()
            .map(|&x| crate::numerics::softplus_scalar(x))
            .collect();
        self.push(v, Op::Softplus(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| 1.0 / x).collect();
        self.push(v, Op::Recip(a))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let mut v = Vec::with_capacity(self.value(a).len() + self.value(b).len());
        v.extend_from_slice(self.value(a));
        v.extend_from_slice(self.value(b));
        self.push(v, Op::Concat(a, b))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a)[start..start + len].to_vec();
        self.push(v, Op::Slice(a, start))
    }

    /// `Σ c_i · v_i` over same-length nodes.
    pub fn lincomb(&mut self, terms: &[(Var, f64)]) -> Var {
        assert!(!terms.is_empty(), "lincomb of nothing");
        let len = self.value(terms[0].0).len();
        let mut out = vec![0.0; len];
        for &(v, c) in terms {
            for (o, x) in out.iter_mut().zip(self.value(v)) {
                *o += c * x;
            }
        }
        self.push(out, Op::LinComb(terms.to_vec()))
    }

    /// Scalar `Σ (a_i - target_i)^2`.
    pub fn squared_error(&mut self, a: Var, target: &[f64]) -> Var {
        let s = zip_map(self.value(a), target, |x, y| (x - y) * (x - y))
            .iter()
            .sum();
        self.push(vec![s], Op::SquaredError(a, target.to_vec()))
    }

    /// Elementwise sum of same-length nodes.
    pub fn sum(&mut self, terms: &[Var]) -> Var {
        assert!(!terms.is_empty(), "sum of nothing");
        let len = self.value(terms[0]).len();
        let mut out = vec![0.0; len];
        for &v in terms {
            for (o, x) in out.iter_mut().zip(self.value(v)) {
                *o += x;
            }
        }
        self.push(out, Op::Sum(terms.to_vec()))
    }

    /// Reverse sweep seeded with `d output = 1`. `output` must be a scalar node.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatVec { m, v, rows, cols } => {
                    let (rows, cols) = (*rows, *cols);
                    let mv = &self.nodes[m.0].value;
                    let vv = &self.nodes[v.0].value;
                    {
                        let dm = acc(&mut grads, *m, rows * cols);
                        for (r, &gr) in g.iter().enumerate() {
                            if gr == 0.0 {
                                continue;
                            }
                            let row = &mut dm[r * cols..(r + 1) * cols];
                            for (d, &x) in row.iter_mut().zip(vv) {
                                *d += gr * x;
                            }
                        }
                    }
                    let dv = acc(&mut grads, *v, cols);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        let row = &mv[r * cols..(r + 1) * cols];
                        for (d, &w) in dv.iter_mut().zip(row) {
                            *d += gr * w;
                        }
                    }
                }
                Op::Add(a, b) => {
                    let n = g.len();
                    for (d, x) in acc(&mut grads, *a, n).iter_mut().zip(&g) {
                        *d += x;
                    }
                    for (d, x) in acc(&mut grads, *b, n).iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Sub(a, b) => {
                    let n = g.len();
                    for (d, x) in acc(&mut grads, *a, n).iter_mut().zip(&g) {
                        *d += x;
                    }
                    for (d, x) in acc(&mut grads, *b, n).iter_mut().zip(&g) {
                        *d -= x;
                    }
                }
                Op::Mul(a, b) => {
                    let n = g.len();
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    for ((d, x), y) in acc(&mut grads, *a, n).iter_mut().zip(&g).zip(bv) {
                        *d += x * y;
                    }
                    for ((d, x), y) in acc(&mut grads, *b, n).iter_mut().zip(&g).zip(av) {
                        *d += x * y;
                    }
                }
                Op::Div(a, b) => {
                    let n = g.len();
                    let bv = &self.nodes[b.0].value;
                    let out = &node.value;
                    for ((d, x), y) in acc(&mut grads, *a, n).iter_mut().zip(&g).zip(bv) {
                        *d += x / y;
                    }
                    // d(a/b)/db = -(a/b)/b
                    for (((d, x), y), q) in
                        acc(&mut grads, *b, n).iter_mut().zip(&g).zip(bv).zip(out)
                    {
                        *d -= x * q / y;
                    }
                }
                Op::Scale(a, c) => {
                    for (d, x) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                        *d += c * x;
                    }
                }
                Op::Offset(a) => {
                    for (d, x) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Sigmoid(a) => {
                    let out = &node.value;
                    for ((d, x), s) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(out) {
                        *d += x * s * (1.0 - s);
                    }
                }
                Op::Tanh(a) => {
                    let out = &node.value;
                    for ((d, x), t) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(out) {
                        *d += x * (1.0 - t * t);
                    }
                }
                Op::Softplus(a) => {
                    let inp = &self.nodes[a.0].value;
                    for ((d, x), z) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(inp) {
                        *d += x * sigmoid_scalar(*z);
                    }
                }
                Op::Recip(a) => {
                    let out = &node.value;
                    for ((d, x), y) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(out) {
                        *d -= x * y * y;
                    }
                }
                Op::Concat(a, b) => {
                    let na = self.nodes[a.0].value.len();
                    let nb = self.nodes[b.0].value.len();
                    for (d, x) in acc(&mut grads, *a, na).iter_mut().zip(&g[..na]) {
                        *d += x;
                    }
                    for (d, x) in acc(&mut grads, *b, nb).iter_mut().zip(&g[na..]) {
                        *d += x;
                    }
                }
                Op::Slice(a, start) => {
                    let na = self.nodes[a.0].value.len();
                    let da = acc(&mut grads, *a, na);
                    for (d, x) in da[*start..*start + g.len()].iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::LinComb(terms) => {
                    for &(v, c) in terms {
                        for (d, x) in acc(&mut grads, v, g.len()).iter_mut().zip(&g) {
                            *d += c * x;
                        }
                    }
                }
                Op::SquaredError(a, target) => {
                    let av = &self.nodes[a.0].value;
                    let n = av.len();
                    let da = acc(&mut grads, *a, n);
                    for ((d, x), t) in da.iter_mut().zip(av).zip(target) {
                        *d += 2.0 * g[0] * (x - t);
                    }
                }
                Op::Sum(terms) => {
                    for &v in terms {
                        for (d, x) in acc(&mut grads, v, g.len()).iter_mut().zip(&g) {
                            *d += x;
                        }
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference derivative of a scalar-valued tape builder w.r.t. leaf entry `i`.
    fn fd(build: &dyn Fn(&mut Tape, Vec<f64>) -> Var, x: &[f64], i: usize) -> f64 {
        let h = 1e-6;
        let mut xp = x.to_vec();
        xp[i] += h;
        let mut xm = x.to_vec();
        xm[i] -= h;
        let mut t = Tape::new();
        let out = build(&mut t, xp);
        let fp = t.value(out)[0];
        let mut t = Tape::new();
        let out = build(&mut t, xm);
        let fm = t.value(out)[0];
        (fp - fm) / (2.0 * h)
    }

    fn check(build: &dyn Fn(&mut Tape, Vec<f64>) -> Var, x: &[f64]) {
        let mut t = Tape::new();
        let out = build(&mut t, x.to_vec());
        let grads = t.backward(out);
        let g = grads.get(Var(0)).expect("leaf 0 reaches output").to_vec();
        for i in 0..x.len() {
            let numeric = fd(build, x, i);
            assert!(
                (g[i] - numeric).abs() < 1e-7 * (1.0 + numeric.abs()),
                "entry {i}: tape {} vs fd {numeric}",
                g[i]
            );
        }
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let x = vec![0.3, -0.7, 1.1, 0.5];
        let build = |t: &mut Tape, x: Vec<f64>| {
            let a = t.leaf(x);
            let m = t.leaf(vec![0.2, -0.1, 0.4, 0.3, 0.5, -0.6, 0.7, 0.1]);
            let mv = t.matvec(m, 2, 4, a);
            let s = t.sigmoid(mv);
            let th = t.tanh(a);
            let sp = t.softplus(th);
            let head = t.slice(sp, 1, 2);
            let prod = t.mul(s, head);
            let q = t.div(prod, head);
            let q2 = t.add(q, s);
            let r = t.offset(q2, 2.0);
            let rr = t.recip(r);
            let cat = t.concat(rr, s);
            let sc = t.scale(cat, -1.5);
            let d = t.sub(sc, cat);
            let lc = t.lincomb(&[(d, 0.5), (cat, 2.0)]);
            let sm = t.sum(&[lc, cat]);
            t.squared_error(sm, &[0.1, 0.2, 0.3, 0.4])
        };
        check(&build, &x);
    }

    #[test]
    fn unreachable_nodes_get_no_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(vec![1.0]);
        let dead = t.leaf(vec![2.0]);
        let _unused = t.scale(dead, 3.0);
        let out = t.squared_error(a, &[0.0]);
        let g = t.backward(out);
        assert_eq!(g.get(a), Some(&[2.0][..]));
        assert!(g.get(dead).is_none());
    }
}
