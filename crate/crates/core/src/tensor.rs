//! Dense 2-D tensors on a reverse-mode tape, Adam, and Xavier initialization.
//!
//! A [`Tape`] owns every tensor created during one training step; [`Var`] is a
//! copyable handle into it. Each op records its inputs so that
//! [`Tape::backward`] can accumulate gradients in reverse creation order.

use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{0}: non-finite value")]
    NonFinite(&'static str),
    #[error("{0}: zero-norm row")]
    ZeroNorm(&'static str),
    #[error("backward called twice on the same tape")]
    Consumed,
    #[error("loss must be a 1x1 tensor, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("adam: {0}")]
    Adam(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Handle to a tensor stored on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    /// `a + 1·row` with a `1 x k` row
    AddRow(Var, Var),
    /// `a * s[idx]` for a scalar picked from another tensor
    ScaleByEntry(Var, Var, (usize, usize)),
    Scale(Var, f64),
    AddScalar(Var),
    RowNormalizeL2(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Elu(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Log(Var),
    SoftmaxRows(Var),
    /// per-row `log sum_j exp(a_ij)` over unmasked `j`, shape `n x 1`
    LogSumExpRows(Var, Option<Array2<bool>>),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Transpose(Var),
    /// `c_i + r_j` for an `n x 1` column and `1 x m` row
    OuterSum(Var, Var),
}

/// A value on the tape with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub value: Array2<f64>,
    pub grad: Option<Array2<f64>>,
    pub requires_grad: bool,
    op: Op,
}

impl Tensor {
    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Tensor>,
    consumed: bool,
}

fn check_finite(op: &'static str, v: &Array2<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite(op))
    }
}

fn same_shape(op: &'static str, a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(TensorError::Shape {
            op,
            lhs: a.dim(),
            rhs: b.dim(),
        })
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn softmax_masked(a: &Array2<f64>, mask: Option<&Array2<bool>>) -> Array2<f64> {
    let mut out = Array2::zeros(a.dim());
    for (i, row) in a.rows().into_iter().enumerate() {
        let keep = |j: usize| mask.is_none_or(|m| m[[i, j]]);
        let max = (0..row.len())
            .filter(|&j| keep(j))
            .map(|j| row[j])
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for j in 0..row.len() {
            if keep(j) {
                let e = (row[j] - max).exp();
                out[[i, j]] = e;
                total += e;
            }
        }
        out.row_mut(i).mapv_inplace(|v| v / total);
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op_name: &'static str, value: Array2<f64>, op: Op, requires_grad: bool) -> Result<Var> {
        check_finite(op_name, &value)?;
        self.nodes.push(Tensor {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn record(&mut self, op_name: &'static str, value: Array2<f64>, op: Op, inputs: &[Var]) -> Result<Var> {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(op_name, value, op, rg)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Result<Var> {
        self.push("param", value, Op::Leaf, true)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    pub fn tensor(&self, v: Var) -> &Tensor {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Gradient after [`Tape::backward`]; zeros if the loss does not depend on `v`.
    pub fn grad(&self, v: Var) -> Array2<f64> {
        let t = &self.nodes[v.0];
        t.grad.clone().unwrap_or_else(|| Array2::zeros(t.value.dim()))
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.nrows() {
            return Err(TensorError::Shape {
                op: "matmul",
                lhs: x.dim(),
                rhs: y.dim(),
            });
        }
        let v = x.dot(y);
        self.record("matmul", v, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.ncols() {
            return Err(TensorError::Shape {
                op: "matmul_t",
                lhs: x.dim(),
                rhs: y.dim(),
            });
        }
        let v = x.dot(&y.t());
        self.record("matmul_t", v, Op::MatMulT(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let v = self.value(a) + self.value(b);
        self.record("add", v, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let v = self.value(a) - self.value(b);
        self.record("sub", v, Op::Sub(a, b), &[a, b])
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("hadamard", self.value(a), self.value(b))?;
        let v = self.value(a) * self.value(b);
        self.record("hadamard", v, Op::Hadamard(a, b), &[a, b])
    }

    /// Adds a `1 x k` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.nrows() != 1 || r.ncols() != x.ncols() {
            return Err(TensorError::Shape {
                op: "add_row",
                lhs: x.dim(),
                rhs: r.dim(),
            });
        }
        let v = x + r;
        self.record("add_row", v, Op::AddRow(a, row), &[a, row])
    }

    /// Multiplies `a` by the scalar `s[idx]`.
    pub fn scale_by_entry(&mut self, a: Var, s: Var, idx: (usize, usize)) -> Result<Var> {
        let sd = self.shape(s);
        if idx.0 >= sd.0 || idx.1 >= sd.1 {
            return Err(TensorError::Shape {
                op: "scale_by_entry",
                lhs: sd,
                rhs: idx,
            });
        }
        let v = self.value(a) * self.value(s)[idx];
        self.record("scale_by_entry", v, Op::ScaleByEntry(a, s, idx), &[a, s])
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let v = self.value(a) * k;
        self.record("scale", v, Op::Scale(a, k), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var> {
        let v = self.value(a) + k;
        self.record("add_scalar", v, Op::AddScalar(a), &[a])
    }

    /// Divides each row by its Euclidean norm; zero rows are an error.
    pub fn row_normalize_l2(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut v = x.clone();
        for mut row in v.rows_mut() {
            let n = row.dot(&row).sqrt();
            if n == 0.0 {
                return Err(TensorError::ZeroNorm("row_normalize_l2"));
            }
            row.mapv_inplace(|e| e / n);
        }
        self.record("row_normalize_l2", v, Op::RowNormalizeL2(a), &[a])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::Empty("concat_rows"));
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(0), &views).map_err(|_| TensorError::Shape {
            op: "concat_rows",
            lhs: self.shape(parts[0]),
            rhs: self.shape(*parts.last().unwrap()),
        })?;
        self.record("concat_rows", v, Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::Empty("concat_cols"));
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).map_err(|_| TensorError::Shape {
            op: "concat_cols",
            lhs: self.shape(parts[0]),
            rhs: self.shape(*parts.last().unwrap()),
        })?;
        self.record("concat_cols", v, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn elu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).mapv(elu);
        self.record("elu", v, Op::Elu(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).mapv(f64::tanh);
        self.record("tanh", v, Op::Tanh(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.record("leaky_relu", v, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).mapv(f64::exp);
        self.record("exp", v, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).mapv(f64::ln);
        self.record("log", v, Op::Log(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let v = softmax_masked(self.value(a), None);
        self.record("softmax_rows", v, Op::SoftmaxRows(a), &[a])
    }

    /// Row softmax over entries where `mask` is true; fully masked rows are zero.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: Array2<bool>) -> Result<Var> {
        same_shape("masked_softmax_rows", self.value(a), &mask.mapv(|_| 0.0))?;
        let v = softmax_masked(self.value(a), Some(&mask));
        // masked entries are zero in the output, so the plain softmax rule applies
        self.record("masked_softmax_rows", v, Op::SoftmaxRows(a), &[a])
    }

    /// `log sum_j exp(a_ij)` per row (over unmasked entries), as an `n x 1` column.
    /// A row with no unmasked entry is an error.
    pub fn log_sum_exp_rows(&mut self, a: Var, mask: Option<Array2<bool>>) -> Result<Var> {
        let x = self.value(a);
        if let Some(m) = &mask {
            same_shape("log_sum_exp_rows", x, &m.mapv(|_| 0.0))?;
        }
        let mut v = Array2::zeros((x.nrows(), 1));
        for (i, row) in x.rows().into_iter().enumerate() {
            let keep = |j: usize| mask.as_ref().is_none_or(|m| m[[i, j]]);
            let max = (0..row.len())
                .filter(|&j| keep(j))
                .map(|j| row[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(TensorError::Empty("log_sum_exp_rows"));
            }
            let total: f64 = (0..row.len()).filter(|&j| keep(j)).map(|j| (row[j] - max).exp()).sum();
            v[[i, 0]] = max + total.ln();
        }
        self.record("log_sum_exp_rows", v, Op::LogSumExpRows(a, mask), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.record("sum", v, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(TensorError::Empty("mean"));
        }
        let v = Array2::from_elem((1, 1), x.sum() / x.len() as f64);
        self.record("mean", v, Op::Mean(a), &[a])
    }

    /// Column means as a `1 x k` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.nrows() == 0 {
            return Err(TensorError::Empty("mean_rows"));
        }
        let v = x.mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
        self.record("mean_rows", v, Op::MeanRows(a), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).t().to_owned();
        self.record("transpose", v, Op::Transpose(a), &[a])
    }

    /// `out_ij = col_i + row_j`.
    pub fn outer_sum(&mut self, col: Var, row: Var) -> Result<Var> {
        let (c, r) = (self.value(col), self.value(row));
        if c.ncols() != 1 || r.nrows() != 1 {
            return Err(TensorError::Shape {
                op: "outer_sum",
                lhs: c.dim(),
                rhs: r.dim(),
            });
        }
        let v = Array2::from_shape_fn((c.nrows(), r.ncols()), |(i, j)| c[[i, 0]] + r[[0, j]]);
        self.record("outer_sum", v, Op::OuterSum(col, row), &[col, row])
    }

    /// Populates gradients of `loss` (a `1 x 1` tensor) for every tensor that
    /// requires them. The tape cannot be differentiated again afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(TensorError::Consumed);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NotScalar(shape));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            check_finite("backward", &g)?;
            let contributions = self.local_grads(idx, &g);
            for (v, c) in contributions {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &c,
                    slot => *slot = Some(c),
                }
            }
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn local_grads(&self, idx: usize, g: &Array2<f64>) -> Vec<(Var, Array2<f64>)> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let val = |v: &Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => vec![(*a, g.dot(&val(b).t())), (*b, val(a).t().dot(g))],
            Op::MatMulT(a, b) => vec![(*a, g.dot(val(b))), (*b, g.t().dot(val(a)))],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, -g)],
            Op::Hadamard(a, b) => vec![(*a, g * val(b)), (*b, g * val(a))],
            Op::AddRow(a, r) => vec![(*a, g.clone()), (*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)))],
            Op::ScaleByEntry(a, s, ix) => {
                let k = val(s)[*ix];
                let mut gs = Array2::zeros(val(s).dim());
                gs[*ix] = (g * val(a)).sum();
                vec![(*a, g * k), (*s, gs)]
            }
            Op::Scale(a, k) => vec![(*a, g * *k)],
            Op::AddScalar(a) => vec![(*a, g.clone())],
            Op::RowNormalizeL2(a) => {
                // d(x/|x|) = (g - y (g·y)) / |x|
                let x = val(a);
                let mut ga = Array2::zeros(x.dim());
                for i in 0..x.nrows() {
                    let n = x.row(i).dot(&x.row(i)).sqrt();
                    let y = out.row(i);
                    let gy = g.row(i).dot(&y);
                    let r = (&g.row(i) - &(&y * gy)) / n;
                    ga.row_mut(i).assign(&r);
                }
                vec![(*a, ga)]
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                parts
                    .iter()
                    .map(|p| {
                        let rows = val(p).nrows();
                        let piece = g.slice(s![start..start + rows, ..]).to_owned();
                        start += rows;
                        (*p, piece)
                    })
                    .collect()
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                parts
                    .iter()
                    .map(|p| {
                        let cols = val(p).ncols();
                        let piece = g.slice(s![.., start..start + cols]).to_owned();
                        start += cols;
                        (*p, piece)
                    })
                    .collect()
            }
            Op::Elu(a) => {
                let mut d = g.clone();
                d.zip_mut_with(val(a), |gv, &x| {
                    if x <= 0.0 {
                        *gv *= x.exp();
                    }
                });
                vec![(*a, d)]
            }
            Op::Tanh(a) => vec![(*a, g * &out.mapv(|y| 1.0 - y * y))],
            Op::LeakyRelu(a, slope) => {
                let mut d = g.clone();
                d.zip_mut_with(val(a), |gv, &x| {
                    if x <= 0.0 {
                        *gv *= slope;
                    }
                });
                vec![(*a, d)]
            }
            Op::Exp(a) => vec![(*a, g * out)],
            Op::Log(a) => vec![(*a, g / val(a))],
            Op::SoftmaxRows(a) => {
                // dx_ij = y_ij (g_ij - sum_k g_ik y_ik)
                let mut d = Array2::zeros(out.dim());
                for i in 0..out.nrows() {
                    let dot = g.row(i).dot(&out.row(i));
                    for j in 0..out.ncols() {
                        d[[i, j]] = out[[i, j]] * (g[[i, j]] - dot);
                    }
                }
                vec![(*a, d)]
            }
            Op::LogSumExpRows(a, mask) => {
                let x = val(a);
                let mut d = Array2::zeros(x.dim());
                for i in 0..x.nrows() {
                    let lse = out[[i, 0]];
                    for j in 0..x.ncols() {
                        if mask.as_ref().is_none_or(|m| m[[i, j]]) {
                            d[[i, j]] = g[[i, 0]] * (x[[i, j]] - lse).exp();
                        }
                    }
                }
                vec![(*a, d)]
            }
            Op::Sum(a) => vec![(*a, Array2::from_elem(val(a).dim(), g[[0, 0]]))],
            Op::Mean(a) => {
                let x = val(a);
                vec![(*a, Array2::from_elem(x.dim(), g[[0, 0]] / x.len() as f64))]
            }
            Op::MeanRows(a) => {
                let x = val(a);
                let n = x.nrows() as f64;
                let row = g.row(0).mapv(|v| v / n);
                let d = Array2::from_shape_fn(x.dim(), |(_, j)| row[j]);
                vec![(*a, d)]
            }
            Op::Transpose(a) => vec![(*a, g.t().to_owned())],
            Op::OuterSum(c, r) => vec![
                (*c, g.sum_axis(Axis(1)).insert_axis(Axis(1))),
                (*r, g.sum_axis(Axis(0)).insert_axis(Axis(0))),
            ],
        }
    }
}

/// Uniform `±sqrt(6 / (fan_in + fan_out))` entries, seeded.
pub fn xavier_init(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    /// Descends `params` along `grads` by one Adam step.
    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::Adam(format!(
                "{} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            same_shape("adam", p, g)?;
            check_finite("adam", g)?;
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            same_shape("adam", p, m)?;
            m.zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            v.zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

/// Named parameter matrices in a fixed order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.index(name).map(|i| &self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(|v| v.dim()).collect()
    }

    /// Places every parameter on `tape`, returning handles in store order.
    pub fn load(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.values.iter().map(|v| tape.param(v.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn identity_matmul_softmax_and_normalize() {
        let mut t = Tape::new();
        let i = t.constant(Array2::eye(3)).unwrap();
        let x = t.constant(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
        let z = t.constant(array![[0.0, 0.0]]).unwrap();
        let s = t.softmax_rows(z).unwrap();
        assert_eq!(t.value(s), &array![[0.5, 0.5]]);
        let v = t.constant(array![[3.0, 4.0]]).unwrap();
        let n = t.row_normalize_l2(v).unwrap();
        assert_abs_diff_eq!(t.value(n), &array![[0.6, 0.8]], epsilon = 1e-15);
    }

    #[test]
    fn quadratic_and_linear_gradients() {
        let w0 = array![[1.0, -2.0], [0.5, 3.0]];
        let mut t = Tape::new();
        let w = t.param(w0.clone()).unwrap();
        let sq = t.hadamard(w, w).unwrap();
        let s = t.sum(sq).unwrap();
        let loss = t.scale(s, 0.5).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w), w0);

        let a0 = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let mut t = Tape::new();
        let a = t.constant(a0.clone()).unwrap();
        let w = t.param(w0).unwrap();
        let p = t.matmul(a, w).unwrap();
        let loss = t.sum(p).unwrap();
        t.backward(loss).unwrap();
        let want = a0.t().dot(&Array2::ones((3, 2)));
        assert_eq!(t.grad(w), want);
        assert_eq!(t.tensor(a).grad, None);
    }

    #[test]
    fn backward_twice_fails() {
        let mut t = Tape::new();
        let w = t.param(array![[2.0]]).unwrap();
        let l = t.sum(w).unwrap();
        t.backward(l).unwrap();
        assert_eq!(t.backward(l), Err(TensorError::Consumed));
    }

    #[test]
    fn non_finite_is_reported_with_op_name() {
        let mut t = Tape::new();
        let w = t.param(array![[0.0]]).unwrap();
        assert_eq!(t.log(w), Err(TensorError::NonFinite("log")));
        let z = t.param(array![[0.0, 0.0]]).unwrap();
        assert_eq!(t.row_normalize_l2(z), Err(TensorError::ZeroNorm("row_normalize_l2")));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut t = Tape::new();
        let a = t.param(Array2::zeros((2, 3))).unwrap();
        let b = t.param(Array2::zeros((2, 3))).unwrap();
        assert!(matches!(t.matmul(a, b), Err(TensorError::Shape { op: "matmul", .. })));
        let c = t.param(Array2::zeros((3, 2))).unwrap();
        assert!(matches!(t.add(a, c), Err(TensorError::Shape { op: "add", .. })));
    }

    #[test]
    fn adam_first_step_and_scale_invariance() {
        let mut p = vec![Array2::zeros((2, 2)), Array2::zeros((1, 3))];
        let mut st = AdamState::new(0.001, &[(2, 2), (1, 3)]);
        st.step(&mut p, &[Array2::ones((2, 2)), Array2::from_elem((1, 3), 2.0)]).unwrap();
        let want = -0.001 / (1.0 + 1e-8);
        for v in p.iter().flat_map(|m| m.iter()) {
            assert_abs_diff_eq!(*v, want, epsilon = 1e-11);
        }
        assert_abs_diff_eq!(p[0][[0, 0]], p[1][[0, 0]], epsilon = 1e-11);
        assert_abs_diff_eq!(want, -0.000999999, epsilon = 1e-9);
    }

    #[test]
    fn adam_zero_gradients_leave_params() {
        let start = array![[0.3, -0.7]];
        let mut p = vec![start.clone()];
        let mut st = AdamState::new(0.01, &[(1, 2)]);
        for _ in 0..5 {
            st.step(&mut p, &[Array2::zeros((1, 2))]).unwrap();
        }
        assert_eq!(p[0], start);
        let bad = st.step(&mut p, &[array![[f64::NAN, 0.0]]]);
        assert_eq!(bad, Err(TensorError::NonFinite("adam")));
    }

    #[test]
    fn xavier_is_seeded_and_bounded() {
        let a = xavier_init(64, 64, 7);
        assert_eq!(a, xavier_init(64, 64, 7));
        assert_ne!(a, xavier_init(64, 64, 8));
        let bound = (6.0f64 / 128.0).sqrt();
        assert_abs_diff_eq!(bound, 0.2165, epsilon = 1e-4);
        assert!(a.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn masked_softmax_zeroes_masked_and_empty_rows() {
        let mut t = Tape::new();
        let x = t.param(array![[1.0, 5.0, 1.0], [2.0, 2.0, 2.0]]).unwrap();
        let mask = array![[true, false, true], [false, false, false]];
        let y = t.masked_softmax_rows(x, mask).unwrap();
        assert_eq!(t.value(y), &array![[0.5, 0.0, 0.5], [0.0, 0.0, 0.0]]);
    }
}
