//! Reverse-mode automatic differentiation over a small closed operator
//! set, specialized for distance-featurized networks.
//!
//! Nodes hold vector values and are evaluated eagerly on push, so the tape
//! is always topologically ordered. Two differentiation modes share it:
//!
//! * [`Tape::backward`] — plain numeric reverse sweep; used for inference
//!   forces (adjoints of the distance inputs) and for parameter gradients.
//! * [`Tape::record_grad`] — records the reverse sweep *as tape ops*, so
//!   each adjoint becomes a differentiable node. Force-matching losses are
//!   built on top of recorded force nodes, and one numeric backward over
//!   the combined tape then yields exact parameter gradients through the
//!   force computation (second derivatives of the energy).
//!
//! The operator set is closed under adjoint recording: every op's
//! vector-Jacobian product is expressible with ops from the same set
//! (`Rbf` introduces `RbfDeriv`, whose own numeric VJP uses the closed-form
//! second derivative — recording stops at first-order, which is all the
//! loss needs).

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Radial basis layer shared by all `Rbf`/`RbfDeriv` nodes of a tape:
/// Gaussians on a fixed center grid, truncated by a cosine switch that
/// reaches zero value and zero slope at `r_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfSpec {
    pub centers: Vec<f64>,
    pub gamma: f64,
    pub r_cut: f64,
}

impl RbfSpec {
    /// Evenly spaced centers on [0, r_cut], width tied to the spacing.
    pub fn even(n_rbf: usize, r_cut: f64) -> Self {
        assert!(n_rbf >= 2 && r_cut > 0.0);
        let spacing = r_cut / (n_rbf - 1) as f64;
        RbfSpec {
            centers: (0..n_rbf).map(|k| k as f64 * spacing).collect(),
            gamma: 1.0 / (2.0 * spacing * spacing),
            r_cut,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn switch(&self, r: f64) -> (f64, f64, f64) {
        if r >= self.r_cut {
            return (0.0, 0.0, 0.0);
        }
        let w = std::f64::consts::PI / self.r_cut;
        let s = 0.5 * (1.0 + (w * r).cos());
        let ds = -0.5 * w * (w * r).sin();
        let dds = -0.5 * w * w * (w * r).cos();
        (s, ds, dds)
    }

    /// e_k(r), its first, and its second derivative in r.
    fn eval_all(&self, r: f64, order: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.centers.len();
        let (s, ds, dds) = self.switch(r);
        let mut e = vec![0.0; n];
        let mut de = vec![0.0; if order >= 1 { n } else { 0 }];
        let mut dde = vec![0.0; if order >= 2 { n } else { 0 }];
        if s == 0.0 && ds == 0.0 {
            return (e, de, dde);
        }
        for (k, &mu) in self.centers.iter().enumerate() {
            let d = r - mu;
            let g = (-self.gamma * d * d).exp();
            let dg = -2.0 * self.gamma * d * g;
            e[k] = g * s;
            if order >= 1 {
                de[k] = dg * s + g * ds;
            }
            if order >= 2 {
                let ddg = (-2.0 * self.gamma + 4.0 * self.gamma * self.gamma * d * d) * g;
                dde[k] = ddg * s + 2.0 * dg * ds + g * dds;
            }
        }
        (e, de, dde)
    }

    pub fn expand(&self, r: f64) -> Vec<f64> {
        self.eval_all(r, 0).0
    }

    pub fn expand_deriv(&self, r: f64) -> Vec<f64> {
        self.eval_all(r, 1).1
    }
}

#[derive(Debug, Clone)]
enum Op {
    /// Leaf: external input (a pair distance, a force target, ...).
    Input,
    /// Leaf: a slice of the flat parameter vector starting at `offset`.
    Param { offset: usize },
    /// Leaf: constant.
    Const,
    /// y = W·x (+ b). W row-major with shape rows×cols, x of length cols.
    Affine {
        w: NodeId,
        x: NodeId,
        b: Option<NodeId>,
        rows: usize,
        cols: usize,
    },
    /// y = Wᵀ·x. W row-major rows×cols, x of length rows, y of length cols.
    AffineT {
        w: NodeId,
        x: NodeId,
        rows: usize,
        cols: usize,
    },
    /// y = a ⊗ b, flattened row-major (len(a)·len(b)).
    Outer { a: NodeId, b: NodeId },
    /// Shifted softplus ln(1+eˣ) − ln 2, elementwise.
    Ssp { x: NodeId },
    /// Logistic σ(x), elementwise.
    Sigmoid { x: NodeId },
    /// Elementwise product.
    Mul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    AddN { xs: Vec<NodeId> },
    Sub { a: NodeId, b: NodeId },
    Neg { x: NodeId },
    /// y = c·x for a compile-time-constant scalar c.
    Scale { x: NodeId, c: f64 },
    /// y = s·v for a length-1 node s (scalar broadcast).
    SMul { s: NodeId, v: NodeId },
    /// y = [Σ_k a_k·b_k], a length-1 node.
    Dot { a: NodeId, b: NodeId },
    /// Radial basis expansion of a length-1 distance node.
    Rbf { r: NodeId },
    /// d/dr of the radial basis expansion.
    RbfDeriv { r: NodeId },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param { .. } => "param",
            Op::Const => "const",
            Op::Affine { .. } => "affine",
            Op::AffineT { .. } => "affine_t",
            Op::Outer { .. } => "outer",
            Op::Ssp { .. } => "ssp",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Mul { .. } => "mul",
            Op::Add { .. } => "add",
            Op::AddN { .. } => "add_n",
            Op::Sub { .. } => "sub",
            Op::Neg { .. } => "neg",
            Op::Scale { .. } => "scale",
            Op::SMul { .. } => "smul",
            Op::Dot { .. } => "dot",
            Op::Rbf { .. } => "rbf",
            Op::RbfDeriv { .. } => "rbf_deriv",
        }
    }
}

const LN_2: f64 = std::f64::consts::LN_2;

fn ssp(x: f64) -> f64 {
    // Overflow-safe softplus: ln(1+eˣ) = max(x,0) + ln(1+e^{−|x|}).
    x.max(0.0) + (-x.abs()).exp().ln_1p() - LN_2
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Eagerly evaluated computation tape.
pub struct Tape {
    ops: Vec<Op>,
    vals: Vec<Vec<f64>>,
    rbf: RbfSpec,
    /// First node whose value came out non-finite, with its op name.
    nonfinite: Option<(usize, &'static str)>,
}

impl Tape {
    pub fn new(rbf: RbfSpec) -> Self {
        Tape {
            ops: Vec::new(),
            vals: Vec::new(),
            rbf,
            nonfinite: None,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.vals[id]
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.vals[id].len(), 1);
        self.vals[id][0]
    }

    /// Error if any node evaluated to a non-finite value, identifying the
    /// first offender.
    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        match self.nonfinite {
            None => Ok(()),
            Some((id, name)) => Err(Error::NonFinite {
                op: context,
                detail: Some(format!("tape node {id} ({name})")),
            }),
        }
    }

    fn eval(&self, op: &Op) -> Vec<f64> {
        match *op {
            Op::Input | Op::Param { .. } | Op::Const => unreachable!("leaves carry values"),
            Op::Affine {
                w,
                x,
                b,
                rows,
                cols,
            } => {
                let wv = &self.vals[w];
                let xv = &self.vals[x];
                let mut y = match b {
                    Some(b) => self.vals[b].clone(),
                    None => vec![0.0; rows],
                };
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &wv[i * cols..(i + 1) * cols];
                    let mut acc = 0.0;
                    for (wk, xk) in row.iter().zip(xv.iter()) {
                        acc += wk * xk;
                    }
                    *yi += acc;
                }
                y
            }
            Op::AffineT { w, x, rows, cols } => {
                let wv = &self.vals[w];
                let xv = &self.vals[x];
                let mut y = vec![0.0; cols];
                for i in 0..rows {
                    let row = &wv[i * cols..(i + 1) * cols];
                    let xi = xv[i];
                    for (yk, wk) in y.iter_mut().zip(row.iter()) {
                        *yk += wk * xi;
                    }
                }
                y
            }
            Op::Outer { a, b } => {
                let av = &self.vals[a];
                let bv = &self.vals[b];
                let mut y = Vec::with_capacity(av.len() * bv.len());
                for ai in av {
                    for bj in bv {
                        y.push(ai * bj);
                    }
                }
                y
            }
            Op::Ssp { x } => self.vals[x].iter().map(|&v| ssp(v)).collect(),
            Op::Sigmoid { x } => self.vals[x].iter().map(|&v| sigmoid(v)).collect(),
            Op::Mul { a, b } => self.vals[a]
                .iter()
                .zip(self.vals[b].iter())
                .map(|(x, y)| x * y)
                .collect(),
            Op::Add { a, b } => self.vals[a]
                .iter()
                .zip(self.vals[b].iter())
                .map(|(x, y)| x + y)
                .collect(),
            Op::AddN { ref xs } => {
                let mut y = self.vals[xs[0]].clone();
                for &x in &xs[1..] {
                    for (yi, xi) in y.iter_mut().zip(self.vals[x].iter()) {
                        *yi += xi;
                    }
                }
                y
            }
            Op::Sub { a, b } => self.vals[a]
                .iter()
                .zip(self.vals[b].iter())
                .map(|(x, y)| x - y)
                .collect(),
            Op::Neg { x } => self.vals[x].iter().map(|&v| -v).collect(),
            Op::Scale { x, c } => self.vals[x].iter().map(|&v| c * v).collect(),
            Op::SMul { s, v } => {
                let sv = self.vals[s][0];
                self.vals[v].iter().map(|&x| sv * x).collect()
            }
            Op::Dot { a, b } => {
                let mut acc = 0.0;
                for (x, y) in self.vals[a].iter().zip(self.vals[b].iter()) {
                    acc += x * y;
                }
                vec![acc]
            }
            Op::Rbf { r } => self.rbf.expand(self.vals[r][0]),
            Op::RbfDeriv { r } => self.rbf.expand_deriv(self.vals[r][0]),
        }
    }

    fn push_val(&mut self, op: Op, val: Vec<f64>) -> NodeId {
        if self.nonfinite.is_none() && val.iter().any(|v| !v.is_finite()) {
            self.nonfinite = Some((self.ops.len(), op.name()));
        }
        self.ops.push(op);
        self.vals.push(val);
        self.ops.len() - 1
    }

    fn push(&mut self, op: Op) -> NodeId {
        let val = self.eval(&op);
        self.push_val(op, val)
    }

    // ---- node constructors ----

    pub fn input(&mut self, val: Vec<f64>) -> NodeId {
        self.push_val(Op::Input, val)
    }

    pub fn param(&mut self, offset: usize, val: &[f64]) -> NodeId {
        self.push_val(Op::Param { offset }, val.to_vec())
    }

    pub fn constant(&mut self, val: Vec<f64>) -> NodeId {
        self.push_val(Op::Const, val)
    }

    pub fn affine(&mut self, w: NodeId, x: NodeId, b: Option<NodeId>) -> NodeId {
        let cols = self.vals[x].len();
        assert!(cols > 0 && self.vals[w].len() % cols == 0, "affine shape");
        let rows = self.vals[w].len() / cols;
        if let Some(b) = b {
            assert_eq!(self.vals[b].len(), rows, "affine bias shape");
        }
        self.push(Op::Affine {
            w,
            x,
            b,
            rows,
            cols,
        })
    }

    pub fn affine_t(&mut self, w: NodeId, x: NodeId, cols: usize) -> NodeId {
        let rows = self.vals[x].len();
        assert_eq!(self.vals[w].len(), rows * cols, "affine_t shape");
        self.push(Op::AffineT { w, x, rows, cols })
    }

    pub fn outer(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Outer { a, b })
    }

    pub fn ssp(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Ssp { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Sigmoid { x })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.vals[a].len(), self.vals[b].len(), "mul shape");
        self.push(Op::Mul { a, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.vals[a].len(), self.vals[b].len(), "add shape");
        self.push(Op::Add { a, b })
    }

    pub fn add_n(&mut self, xs: Vec<NodeId>) -> NodeId {
        assert!(!xs.is_empty(), "add_n of nothing");
        if xs.len() == 1 {
            return xs[0];
        }
        let len = self.vals[xs[0]].len();
        assert!(xs.iter().all(|&x| self.vals[x].len() == len), "add_n shape");
        self.push(Op::AddN { xs })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.vals[a].len(), self.vals[b].len(), "sub shape");
        self.push(Op::Sub { a, b })
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Neg { x })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        self.push(Op::Scale { x, c })
    }

    pub fn smul(&mut self, s: NodeId, v: NodeId) -> NodeId {
        assert_eq!(self.vals[s].len(), 1, "smul scalar");
        self.push(Op::SMul { s, v })
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.vals[a].len(), self.vals[b].len(), "dot shape");
        self.push(Op::Dot { a, b })
    }

    pub fn rbf(&mut self, r: NodeId) -> NodeId {
        assert_eq!(self.vals[r].len(), 1, "rbf input scalar");
        self.push(Op::Rbf { r })
    }

    pub fn rbf_deriv(&mut self, r: NodeId) -> NodeId {
        assert_eq!(self.vals[r].len(), 1, "rbf_deriv input scalar");
        self.push(Op::RbfDeriv { r })
    }

    // ---- numeric reverse sweep ----

    /// Adjoints of every node with respect to the scalar node `output`.
    /// Entry is empty for nodes the output does not depend on.
    pub fn backward(&self, output: NodeId) -> Vec<Vec<f64>> {
        assert_eq!(self.vals[output].len(), 1, "backward from a scalar");
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); self.ops.len()];
        adj[output] = vec![1.0];

        // Accumulate `delta` into node k's adjoint, allocating on demand.
        fn bump(adj: &mut [Vec<f64>], lens: &[usize], k: NodeId, delta: &[f64]) {
            if adj[k].is_empty() {
                adj[k] = vec![0.0; lens[k]];
            }
            for (a, d) in adj[k].iter_mut().zip(delta.iter()) {
                *a += d;
            }
        }
        let lens: Vec<usize> = self.vals.iter().map(|v| v.len()).collect();

        for k in (0..=output).rev() {
            if adj[k].is_empty() {
                continue;
            }
            // Take the adjoint out so we can mutate others freely.
            let a = std::mem::take(&mut adj[k]);
            match self.ops[k] {
                Op::Input | Op::Param { .. } | Op::Const => {}
                Op::Affine {
                    w,
                    x,
                    b,
                    rows,
                    cols,
                } => {
                    let xv = &self.vals[x];
                    let wv = &self.vals[w];
                    // w̄ += a ⊗ x
                    if adj[w].is_empty() {
                        adj[w] = vec![0.0; lens[w]];
                    }
                    for i in 0..rows {
                        let ai = a[i];
                        let row = &mut adj[w][i * cols..(i + 1) * cols];
                        for (g, xk) in row.iter_mut().zip(xv.iter()) {
                            *g += ai * xk;
                        }
                    }
                    // x̄ += Wᵀ a
                    if adj[x].is_empty() {
                        adj[x] = vec![0.0; lens[x]];
                    }
                    for i in 0..rows {
                        let ai = a[i];
                        let row = &wv[i * cols..(i + 1) * cols];
                        for (g, wk) in adj[x].iter_mut().zip(row.iter()) {
                            *g += wk * ai;
                        }
                    }
                    if let Some(b) = b {
                        bump(&mut adj, &lens, b, &a);
                    }
                }
                Op::AffineT { w, x, rows, cols } => {
                    let xv = &self.vals[x];
                    let wv = &self.vals[w];
                    // y = Wᵀx: w̄ += x ⊗ a, x̄ += W a.
                    if adj[w].is_empty() {
                        adj[w] = vec![0.0; lens[w]];
                    }
                    for i in 0..rows {
                        let xi = xv[i];
                        let row = &mut adj[w][i * cols..(i + 1) * cols];
                        for (g, ak) in row.iter_mut().zip(a.iter()) {
                            *g += xi * ak;
                        }
                    }
                    if adj[x].is_empty() {
                        adj[x] = vec![0.0; lens[x]];
                    }
                    for i in 0..rows {
                        let row = &wv[i * cols..(i + 1) * cols];
                        let mut acc = 0.0;
                        for (wk, ak) in row.iter().zip(a.iter()) {
                            acc += wk * ak;
                        }
                        adj[x][i] += acc;
                    }
                }
                Op::Outer { a: na, b: nb } => {
                    let av = &self.vals[na];
                    let bv = &self.vals[nb];
                    let cols = bv.len();
                    if adj[na].is_empty() {
                        adj[na] = vec![0.0; lens[na]];
                    }
                    for i in 0..av.len() {
                        let mut acc = 0.0;
                        for (j, bj) in bv.iter().enumerate() {
                            acc += a[i * cols + j] * bj;
                        }
                        adj[na][i] += acc;
                    }
                    if adj[nb].is_empty() {
                        adj[nb] = vec![0.0; lens[nb]];
                    }
                    for (i, ai) in av.iter().enumerate() {
                        for j in 0..cols {
                            adj[nb][j] += a[i * cols + j] * ai;
                        }
                    }
                }
                Op::Ssp { x } => {
                    let delta: Vec<f64> = self.vals[x]
                        .iter()
                        .zip(a.iter())
                        .map(|(&xv, &g)| g * sigmoid(xv))
                        .collect();
                    bump(&mut adj, &lens, x, &delta);
                }
                Op::Sigmoid { x } => {
                    let delta: Vec<f64> = self.vals[k]
                        .iter()
                        .zip(a.iter())
                        .map(|(&s, &g)| g * s * (1.0 - s))
                        .collect();
                    bump(&mut adj, &lens, x, &delta);
                }
                Op::Mul { a: na, b: nb } => {
                    let da: Vec<f64> = a
                        .iter()
                        .zip(self.vals[nb].iter())
                        .map(|(g, v)| g * v)
                        .collect();
                    let db: Vec<f64> = a
                        .iter()
                        .zip(self.vals[na].iter())
                        .map(|(g, v)| g * v)
                        .collect();
                    bump(&mut adj, &lens, na, &da);
                    bump(&mut adj, &lens, nb, &db);
                }
                Op::Add { a: na, b: nb } => {
                    bump(&mut adj, &lens, na, &a);
                    bump(&mut adj, &lens, nb, &a);
                }
                Op::AddN { ref xs } => {
                    for &x in xs {
                        bump(&mut adj, &lens, x, &a);
                    }
                }
                Op::Sub { a: na, b: nb } => {
                    bump(&mut adj, &lens, na, &a);
                    let neg: Vec<f64> = a.iter().map(|g| -g).collect();
                    bump(&mut adj, &lens, nb, &neg);
                }
                Op::Neg { x } => {
                    let neg: Vec<f64> = a.iter().map(|g| -g).collect();
                    bump(&mut adj, &lens, x, &neg);
                }
                Op::Scale { x, c } => {
                    let delta: Vec<f64> = a.iter().map(|g| c * g).collect();
                    bump(&mut adj, &lens, x, &delta);
                }
                Op::SMul { s, v } => {
                    let mut ds = 0.0;
                    for (g, xv) in a.iter().zip(self.vals[v].iter()) {
                        ds += g * xv;
                    }
                    bump(&mut adj, &lens, s, &[ds]);
                    let sv = self.vals[s][0];
                    let dv: Vec<f64> = a.iter().map(|g| sv * g).collect();
                    bump(&mut adj, &lens, v, &dv);
                }
                Op::Dot { a: na, b: nb } => {
                    let g = a[0];
                    let da: Vec<f64> = self.vals[nb].iter().map(|v| g * v).collect();
                    let db: Vec<f64> = self.vals[na].iter().map(|v| g * v).collect();
                    bump(&mut adj, &lens, na, &da);
                    bump(&mut adj, &lens, nb, &db);
                }
                Op::Rbf { r } => {
                    let de = self.rbf.expand_deriv(self.vals[r][0]);
                    let mut dr = 0.0;
                    for (g, d) in a.iter().zip(de.iter()) {
                        dr += g * d;
                    }
                    bump(&mut adj, &lens, r, &[dr]);
                }
                Op::RbfDeriv { r } => {
                    let dde = self.rbf.eval_all(self.vals[r][0], 2).2;
                    let mut dr = 0.0;
                    for (g, d) in a.iter().zip(dde.iter()) {
                        dr += g * d;
                    }
                    bump(&mut adj, &lens, r, &[dr]);
                }
            }
            adj[k] = a;
        }
        adj
    }

    /// Accumulate d(output)/dθ into `grad` (a buffer over the flat
    /// parameter vector) via a numeric reverse sweep.
    pub fn grad_params(&self, output: NodeId, grad: &mut [f64]) {
        let adj = self.backward(output);
        for (k, op) in self.ops.iter().enumerate() {
            if let Op::Param { offset } = *op {
                if !adj[k].is_empty() {
                    for (g, a) in grad[offset..offset + adj[k].len()].iter_mut().zip(&adj[k]) {
                        *g += a;
                    }
                }
            }
        }
    }

    // ---- recorded reverse sweep ----

    /// Append ops computing d(output)/d(node) for every requested node,
    /// returning the adjoint node ids (None where the output does not
    /// depend on the node). The recorded adjoints are themselves
    /// differentiable, which is what force-matching training needs.
    pub fn record_grad(&mut self, output: NodeId, wrt: &[NodeId]) -> Vec<Option<NodeId>> {
        assert_eq!(self.vals[output].len(), 1, "record_grad from a scalar");
        let horizon = output + 1;
        // Pending adjoint contributions per original node.
        let mut pending: Vec<Vec<NodeId>> = vec![Vec::new(); horizon];
        let seed = self.constant(vec![1.0]);
        pending[output].push(seed);
        let mut resolved: Vec<Option<NodeId>> = vec![None; horizon];

        for k in (0..horizon).rev() {
            if pending[k].is_empty() {
                continue;
            }
            let contribs = std::mem::take(&mut pending[k]);
            let a = self.add_n(contribs);
            resolved[k] = Some(a);
            // Clone the op to satisfy the borrow checker; ops are small.
            let op = self.ops[k].clone();
            match op {
                Op::Input | Op::Param { .. } | Op::Const => {}
                Op::Affine {
                    w,
                    x,
                    b,
                    rows: _,
                    cols,
                } => {
                    let dw = self.outer(a, x);
                    pending[w].push(dw);
                    let dx = self.affine_t(w, a, cols);
                    pending[x].push(dx);
                    if let Some(b) = b {
                        pending[b].push(a);
                    }
                }
                Op::AffineT { w, x, rows: _, cols: _ } => {
                    let dw = self.outer(x, a);
                    pending[w].push(dw);
                    let dx = self.affine(w, a, None);
                    pending[x].push(dx);
                }
                Op::Outer { a: na, b: nb } => {
                    // ā = reshape(adj)·b, b̄ = reshape(adj)ᵀ·a.
                    let cols = self.vals[nb].len();
                    let da = self.affine(a, nb, None);
                    pending[na].push(da);
                    let db = self.affine_t(a, na, cols);
                    pending[nb].push(db);
                }
                Op::Ssp { x } => {
                    let s = self.sigmoid(x);
                    let dx = self.mul(a, s);
                    pending[x].push(dx);
                }
                Op::Sigmoid { x } => {
                    // σ' = σ(1−σ); node k already holds σ(x).
                    let ones = self.constant(vec![1.0; self.vals[k].len()]);
                    let one_minus = self.sub(ones, k);
                    let t = self.mul(k, one_minus);
                    let dx = self.mul(a, t);
                    pending[x].push(dx);
                }
                Op::Mul { a: na, b: nb } => {
                    let da = self.mul(a, nb);
                    pending[na].push(da);
                    let db = self.mul(a, na);
                    pending[nb].push(db);
                }
                Op::Add { a: na, b: nb } => {
                    pending[na].push(a);
                    pending[nb].push(a);
                }
                Op::AddN { xs } => {
                    for x in xs {
                        pending[x].push(a);
                    }
                }
                Op::Sub { a: na, b: nb } => {
                    pending[na].push(a);
                    let neg = self.neg(a);
                    pending[nb].push(neg);
                }
                Op::Neg { x } => {
                    let neg = self.neg(a);
                    pending[x].push(neg);
                }
                Op::Scale { x, c } => {
                    let dx = self.scale(a, c);
                    pending[x].push(dx);
                }
                Op::SMul { s, v } => {
                    let ds = self.dot(a, v);
                    pending[s].push(ds);
                    let dv = self.smul(s, a);
                    pending[v].push(dv);
                }
                Op::Dot { a: na, b: nb } => {
                    let da = self.smul(a, nb);
                    pending[na].push(da);
                    let db = self.smul(a, na);
                    pending[nb].push(db);
                }
                Op::Rbf { r } => {
                    let de = self.rbf_deriv(r);
                    let dr = self.dot(a, de);
                    pending[r].push(dr);
                }
                Op::RbfDeriv { .. } => {
                    panic!("record_grad through rbf_deriv is not supported (one recording level)");
                }
            }
        }
        wrt.iter().map(|&n| resolved.get(n).copied().flatten()).collect()
    }
}
