use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{NnError, Result};
use crate::tensor::ParameterStore;

/// Index value that makes [`Graph::gather`] emit a zero.
pub const ZERO_INDEX: usize = usize::MAX;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    /// Broadcast a `1×cols` row over every row of the first operand.
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Reshape(Var),
    Gather(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        /// Per-row reciprocal standard deviation.
        rstd: Vec<f64>,
        /// Normalized input before the affine map.
        xhat: Vec<f64>,
    },
    Gelu(Var),
    Prelu(Var, Var),
    SoftmaxRows(Var),
    /// Left-multiplication by a constant complex matrix on the packed
    /// `[rows, 2k]` layout (real parts in the first k columns).
    ComplexMatMul {
        x: Var,
        re: Vec<f64>,
        im: Vec<f64>,
        out_rows: usize,
        inner: usize,
    },
    ScaleToNorm {
        x: Var,
        target: f64,
        norm: f64,
    },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

/// A single forward-pass recording.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
    param_index: HashMap<String, Var>,
}

fn shape_err(op: &'static str, detail: String) -> NnError {
    NnError::Shape { op, detail }
}

/// Exact (erf-based) GeLU.
pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

fn gelu_derivative(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// A constant leaf. Gradients reaching it are discarded.
    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Result<Var> {
        if rows * cols != value.len() {
            return Err(shape_err(
                "constant",
                format!("{rows}x{cols} from {} values", value.len()),
            ));
        }
        Ok(self.push(rows, cols, value, Op::Leaf))
    }

    /// Leaf bound to a named parameter; repeated lookups return the same node.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.param_index.get(name) {
            return Ok(v);
        }
        let t = store.get(name)?;
        let (rows, cols) = t.matrix_dims();
        let v = self.push(rows, cols, t.values.clone(), Op::Leaf);
        self.params.push((name.to_string(), v));
        self.param_index.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(shape_err("matmul", format!("{m}x{k} · {k2}x{n}")));
        }
        let out = matmul_raw(self.value(a), self.value(b), m, k, n);
        Ok(self.push(m, n, out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        if k != k2 {
            return Err(shape_err("matmul_t", format!("{m}x{k} · ({n}x{k2})ᵀ")));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = (0..k).map(|p| av[i * k + p] * bv[j * k + p]).sum();
            }
        }
        Ok(self.push(m, n, out, Op::MatMulT(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("add", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(r, c, out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("sub", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(r, c, out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(r, c, out, Op::Mul(a, b)))
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let (br, bc) = self.shape(row);
        if br != 1 || bc != c {
            return Err(shape_err("add_row", format!("{r}x{c} + {br}x{bc}")));
        }
        let (xv, bv) = (self.value(x), self.value(row));
        let out = xv
            .iter()
            .enumerate()
            .map(|(i, v)| v + bv[i % c])
            .collect();
        Ok(self.push(r, c, out, Op::AddRow(x, row)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|v| v * factor).collect();
        self.push(r, c, out, Op::Scale(x, factor))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    /// Row-major reinterpretation with the same element count.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if r * c != rows * cols {
            return Err(shape_err("reshape", format!("{r}x{c} -> {rows}x{cols}")));
        }
        let out = self.value(x).to_vec();
        Ok(self.push(rows, cols, out, Op::Reshape(x)))
    }

    /// `out[j] = x[index[j]]` over flat row-major storage; [`ZERO_INDEX`]
    /// entries produce zeros.
    pub fn gather(&mut self, x: Var, index: Vec<usize>, rows: usize, cols: usize) -> Result<Var> {
        let n = self.value(x).len();
        if index.len() != rows * cols {
            return Err(shape_err(
                "gather",
                format!("{} indices for {rows}x{cols}", index.len()),
            ));
        }
        if let Some(bad) = index.iter().find(|&&i| i != ZERO_INDEX && i >= n) {
            return Err(shape_err("gather", format!("index {bad} out of {n}")));
        }
        let xv = self.value(x);
        let out = index
            .iter()
            .map(|&i| if i == ZERO_INDEX { 0.0 } else { xv[i] })
            .collect();
        Ok(self.push(rows, cols, out, Op::Gather(x, index)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(shape_err("concat_cols", "no inputs".into()));
        };
        let rows = self.shape(first).0;
        if let Some(p) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return Err(shape_err(
                "concat_cols",
                format!("row count {} vs {rows}", self.shape(*p).0),
            ));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let pc = self.shape(p).1;
                out.extend_from_slice(&self.value(p)[r * pc..(r + 1) * pc]);
            }
        }
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec())))
    }

    /// Fully connected layer `x·w (+ b)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => self.add_row(y, b),
            None => Ok(y),
        }
    }

    /// Per-row normalization followed by the `gamma`/`beta` affine map.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (r, c) = self.shape(x);
        if self.shape(gamma) != (1, c) || self.shape(beta) != (1, c) {
            return Err(shape_err(
                "layer_norm",
                format!(
                    "x {r}x{c}, gamma {:?}, beta {:?}",
                    self.shape(gamma),
                    self.shape(beta)
                ),
            ));
        }
        let xv = self.value(x);
        let (gv, bv) = (self.value(gamma), self.value(beta));
        let mut xhat = vec![0.0; r * c];
        let mut rstd = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + eps).sqrt();
            rstd[i] = s;
            for j in 0..c {
                let h = (row[j] - mean) * s;
                xhat[i * c + j] = h;
                out[i * c + j] = gv[j] * h + bv[j];
            }
        }
        Ok(self.push(
            r,
            c,
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                rstd,
                xhat,
            },
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|&v| gelu_scalar(v)).collect();
        self.push(r, c, out, Op::Gelu(x))
    }

    /// `max(0,x) + alpha·min(0,x)` with a single learnable `alpha` (1×1).
    pub fn prelu(&mut self, x: Var, alpha: Var) -> Result<Var> {
        if self.shape(alpha) != (1, 1) {
            return Err(shape_err(
                "prelu",
                format!("alpha must be 1x1, got {:?}", self.shape(alpha)),
            ));
        }
        let (r, c) = self.shape(x);
        let a = self.scalar(alpha);
        let out = self
            .value(x)
            .iter()
            .map(|&v| if v > 0.0 { v } else { a * v })
            .collect();
        Ok(self.push(r, c, out, Op::Prelu(x, alpha)))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let xv = self.value(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                out[i * c + j] = e;
                total += e;
            }
            out[i * c..(i + 1) * c].iter_mut().for_each(|v| *v /= total);
        }
        self.push(r, c, out, Op::SoftmaxRows(x))
    }

    /// Multiplies a packed complex block `x = [Re | Im]` of shape
    /// `[inner, 2k]` on the left by the constant complex matrix
    /// `re + i·im` of shape `[out_rows, inner]`.
    pub fn complex_matmul(
        &mut self,
        re: &[f64],
        im: &[f64],
        out_rows: usize,
        inner: usize,
        x: Var,
    ) -> Result<Var> {
        let (xr, xc) = self.shape(x);
        if re.len() != out_rows * inner || im.len() != out_rows * inner {
            return Err(shape_err(
                "complex_matmul",
                format!("matrix storage does not match {out_rows}x{inner}"),
            ));
        }
        if xr != inner || xc % 2 != 0 {
            return Err(shape_err(
                "complex_matmul",
                format!("{out_rows}x{inner} · packed {xr}x{xc}"),
            ));
        }
        let k = xc / 2;
        let xv = self.value(x);
        let mut out = vec![0.0; out_rows * xc];
        for i in 0..out_rows {
            for p in 0..inner {
                let (ar, ai) = (re[i * inner + p], im[i * inner + p]);
                for j in 0..k {
                    let (vr, vi) = (xv[p * xc + j], xv[p * xc + k + j]);
                    out[i * xc + j] += ar * vr - ai * vi;
                    out[i * xc + k + j] += ar * vi + ai * vr;
                }
            }
        }
        Ok(self.push(
            out_rows,
            xc,
            out,
            Op::ComplexMatMul {
                x,
                re: re.to_vec(),
                im: im.to_vec(),
                out_rows,
                inner,
            },
        ))
    }

    /// Rescales `x` to Frobenius norm `target`. A zero input stays zero.
    pub fn scale_to_norm(&mut self, x: Var, target: f64) -> Var {
        let (r, c) = self.shape(x);
        let xv = self.value(x);
        let norm = xv.iter().map(|v| v * v).sum::<f64>().sqrt();
        let out = if norm > 0.0 {
            xv.iter().map(|v| v * target / norm).collect()
        } else {
            vec![0.0; r * c]
        };
        self.push(r, c, out, Op::ScaleToNorm { x, target, norm })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.push(1, 1, vec![m], Op::Mean(x))
    }

    /// Mean of squared differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    /// Gradients of every node with respect to the scalar `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Vec<Vec<f64>>> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(NnError::NonScalarLoss { rows: r, cols: c });
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        grads[loss.0] = vec![1.0];
        for id in (0..=loss.0).rev() {
            if grads[id].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[id]);
            self.backprop_node(id, &g, &mut grads);
            grads[id] = g;
        }
        Ok(grads)
    }

    /// Runs the backward pass and accumulates parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParameterStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        for (name, v) in &self.params {
            let n = self.nodes[v.0].value.len();
            match grads.get(v.0).filter(|g| !g.is_empty()) {
                Some(g) => store.accumulate_grad(name, g)?,
                // Parameter did not influence the loss: its gradient is zero.
                None => store.accumulate_grad(name, &vec![0.0; n])?,
            }
        }
        Ok(())
    }

    fn backprop_node(&self, id: usize, g: &[f64], grads: &mut [Vec<f64>]) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = self.shape(*b).1;
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = vec![0.0; m * k];
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = 0.0;
                        let aip = av[i * k + p];
                        for j in 0..n {
                            let gij = g[i * n + j];
                            acc += gij * bv[p * n + j];
                            gb[p * n + j] += aip * gij;
                        }
                        ga[i * k + p] = acc;
                    }
                }
                accumulate(grads, *a, &ga);
                accumulate(grads, *b, &gb);
            }
            Op::MatMulT(a, b) => {
                let (m, k) = self.shape(*a);
                let n = self.shape(*b).0;
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = vec![0.0; m * k];
                let mut gb = vec![0.0; n * k];
                for i in 0..m {
                    for j in 0..n {
                        let gij = g[i * n + j];
                        for p in 0..k {
                            ga[i * k + p] += gij * bv[j * k + p];
                            gb[j * k + p] += gij * av[i * k + p];
                        }
                    }
                }
                accumulate(grads, *a, &ga);
                accumulate(grads, *b, &gb);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g);
                accumulate(grads, *b, g);
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g);
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                accumulate(grads, *b, &neg);
            }
            Op::AddRow(x, row) => {
                accumulate(grads, *x, g);
                let c = node.cols;
                let mut gr = vec![0.0; c];
                g.iter().enumerate().for_each(|(i, v)| gr[i % c] += v);
                accumulate(grads, *row, &gr);
            }
            Op::Mul(a, b) => {
                let ga = zip_map(g, self.value(*b), |x, y| x * y);
                let gb = zip_map(g, self.value(*a), |x, y| x * y);
                accumulate(grads, *a, &ga);
                accumulate(grads, *b, &gb);
            }
            Op::Scale(x, f) => {
                let gx: Vec<f64> = g.iter().map(|v| v * f).collect();
                accumulate(grads, *x, &gx);
            }
            Op::Reshape(x) => accumulate(grads, *x, g),
            Op::Gather(x, index) => {
                let mut gx = vec![0.0; self.value(*x).len()];
                for (j, &i) in index.iter().enumerate() {
                    if i != ZERO_INDEX {
                        gx[i] += g[j];
                    }
                }
                accumulate(grads, *x, &gx);
            }
            Op::ConcatCols(parts) => {
                let rows = node.rows;
                let cols = node.cols;
                let mut offset = 0;
                for &p in parts {
                    let pc = self.shape(p).1;
                    let mut gp = Vec::with_capacity(rows * pc);
                    for r in 0..rows {
                        gp.extend_from_slice(&g[r * cols + offset..r * cols + offset + pc]);
                    }
                    accumulate(grads, p, &gp);
                    offset += pc;
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                rstd,
                xhat,
            } => {
                let (r, c) = (node.rows, node.cols);
                let gv = self.value(*gamma);
                let mut gx = vec![0.0; r * c];
                let mut gg = vec![0.0; c];
                let mut gb = vec![0.0; c];
                for i in 0..r {
                    let mut mean_dh = 0.0;
                    let mut mean_dh_h = 0.0;
                    for j in 0..c {
                        let idx = i * c + j;
                        gg[j] += g[idx] * xhat[idx];
                        gb[j] += g[idx];
                        let dh = g[idx] * gv[j];
                        mean_dh += dh;
                        mean_dh_h += dh * xhat[idx];
                    }
                    mean_dh /= c as f64;
                    mean_dh_h /= c as f64;
                    for j in 0..c {
                        let idx = i * c + j;
                        let dh = g[idx] * gv[j];
                        gx[idx] = rstd[i] * (dh - mean_dh - xhat[idx] * mean_dh_h);
                    }
                }
                accumulate(grads, *x, &gx);
                accumulate(grads, *gamma, &gg);
                accumulate(grads, *beta, &gb);
            }
            Op::Gelu(x) => {
                let gx = zip_map(g, self.value(*x), |gi, xi| gi * gelu_derivative(xi));
                accumulate(grads, *x, &gx);
            }
            Op::Prelu(x, alpha) => {
                let a = self.scalar(*alpha);
                let xv = self.value(*x);
                let mut ga = 0.0;
                let gx: Vec<f64> = g
                    .iter()
                    .zip(xv)
                    .map(|(&gi, &xi)| {
                        if xi > 0.0 {
                            gi
                        } else {
                            ga += gi * xi;
                            gi * a
                        }
                    })
                    .collect();
                accumulate(grads, *x, &gx);
                accumulate(grads, *alpha, &[ga]);
            }
            Op::SoftmaxRows(x) => {
                let (r, c) = (node.rows, node.cols);
                let y = &node.value;
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    let dot: f64 = (0..c).map(|j| g[i * c + j] * y[i * c + j]).sum();
                    for j in 0..c {
                        gx[i * c + j] = y[i * c + j] * (g[i * c + j] - dot);
                    }
                }
                accumulate(grads, *x, &gx);
            }
            Op::ComplexMatMul {
                x,
                re,
                im,
                out_rows,
                inner,
            } => {
                let xc = node.cols;
                let k = xc / 2;
                let mut gx = vec![0.0; inner * xc];
                for i in 0..*out_rows {
                    for p in 0..*inner {
                        let (ar, ai) = (re[i * inner + p], im[i * inner + p]);
                        for j in 0..k {
                            let (gr, gi) = (g[i * xc + j], g[i * xc + k + j]);
                            gx[p * xc + j] += ar * gr + ai * gi;
                            gx[p * xc + k + j] += -ai * gr + ar * gi;
                        }
                    }
                }
                accumulate(grads, *x, &gx);
            }
            Op::ScaleToNorm { x, target, norm } => {
                if *norm > 0.0 {
                    let xv = self.value(*x);
                    let dot: f64 = xv.iter().zip(g).map(|(a, b)| a * b).sum();
                    let s = target / norm;
                    let n2 = norm * norm;
                    let gx: Vec<f64> = xv
                        .iter()
                        .zip(g)
                        .map(|(xi, gi)| s * (gi - xi * dot / n2))
                        .collect();
                    accumulate(grads, *x, &gx);
                }
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                accumulate(grads, *x, &vec![g[0]; n]);
            }
            Op::Mean(x) => {
                let n = self.value(*x).len();
                accumulate(grads, *x, &vec![g[0] / n as f64; n]);
            }
        }
    }
}

fn accumulate(grads: &mut [Vec<f64>], v: Var, g: &[f64]) {
    let slot = &mut grads[v.0];
    if slot.is_empty() {
        *slot = g.to_vec();
    } else {
        slot.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            row.iter_mut().zip(brow).for_each(|(o, &bv)| *o += aip * bv);
        }
    }
    out
}
