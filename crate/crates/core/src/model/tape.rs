//! Row-major matrices and a reverse-mode tape over them.
//!
//! Every value is a 2-D matrix; vectors are 1×n rows. Operations append a
//! node to the tape and `backward` walks the nodes in reverse, accumulating
//! gradients into per-node buffers and finally into parameter gradients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match {rows}x{cols}");
        Mat { rows, cols, data }
    }

    pub fn row_vec(data: Vec<f64>) -> Self {
        Mat { rows: 1, cols: data.len(), data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// out += a · b
fn gemm_nn(a: &Mat, b: &Mat, out: &mut [f64]) {
    let (n, k, m) = (a.rows, a.cols, b.cols);
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * m..(p + 1) * m];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// out += a · bᵀ
fn gemm_nt(a: &Mat, b: &Mat, out: &mut [f64]) {
    let (n, k, m) = (a.rows, a.cols, b.rows);
    for i in 0..n {
        let arow = &a.data[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b.data[j * k..(j + 1) * k];
            out[i * m + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// out += aᵀ · b
fn gemm_tn(a: &Mat, b: &Mat, out: &mut [f64]) {
    let (k, n, m) = (a.rows, a.cols, b.cols);
    for p in 0..k {
        let brow = &b.data[p * m..(p + 1) * m];
        for i in 0..n {
            let av = a.data[p * n + i];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * m..(i + 1) * m];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "matmul {:?} x {:?}", a.shape(), b.shape());
    let mut out = Mat::zeros(a.rows, b.cols);
    gemm_nn(a, b, &mut out.data);
    out
}

pub fn matmul_t(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols, "matmul_t {:?} x {:?}", a.shape(), b.shape());
    let mut out = Mat::zeros(a.rows, b.rows);
    gemm_nt(a, b, &mut out.data);
    out
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const LN_EPS: f64 = 1e-5;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Row-wise softmax. With `causal`, entry (i, j) is masked when
/// j > i + offset.
pub fn softmax_rows(x: &Mat, causal: Option<usize>) -> Mat {
    let mut out = Mat::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let limit = causal.map_or(x.cols, |off| (i + off + 1).min(x.cols));
        let row = &x.data[i * x.cols..i * x.cols + limit];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let o = &mut out.data[i * x.cols..i * x.cols + limit];
        let mut sum = 0.0;
        for (ov, v) in o.iter_mut().zip(row) {
            *ov = (v - max).exp();
            sum += *ov;
        }
        for ov in o.iter_mut() {
            *ov /= sum;
        }
    }
    out
}

pub fn layer_norm_rows(x: &Mat, gamma: &Mat, beta: &Mat) -> Mat {
    let mut out = Mat::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / x.cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.cols as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for j in 0..x.cols {
            out.data[i * x.cols + j] = (row[j] - mean) * inv * gamma.data[j] + beta.data[j];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    /// a · bᵀ
    MatMulT(Var, Var),
    Add(Var, Var),
    /// Adds a 1×m row to every row.
    AddRow(Var, Var),
    Mul(Var, Var),
    /// Multiplies row i by w[i]; w is n×1.
    ScaleRows(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Gelu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm(Var, Var, Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    Gather(Var, Vec<usize>),
    SumRows(Var),
    Transpose(Var),
    Reshape(Var),
    /// Σ w · a[r, c] over the listed entries.
    PickSum(Var, Vec<(usize, usize, f64)>),
}

struct Node {
    value: Mat,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), param_vars: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1));
        m.data[0]
    }

    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf for parameter `index`; repeated calls return the same node so
    /// gradients from every use accumulate in one place.
    pub fn param(&mut self, index: usize, value: &Mat) -> Var {
        if index >= self.param_vars.len() {
            self.param_vars.resize(index + 1, None);
        }
        if let Some(v) = self.param_vars[index] {
            return v;
        }
        let v = self.push(value.clone(), Op::Param(index));
        self.param_vars[index] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = matmul(self.value(a), self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let out = matmul_t(self.value(a), self.value(b));
        self.push(out, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "add shape mismatch");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p + q).collect();
        let out = Mat::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (x, r) = (self.value(a), self.value(row));
        assert_eq!((1, x.cols), r.shape(), "add_row shape mismatch");
        let mut out = x.clone();
        for chunk in out.data.chunks_mut(x.cols) {
            for (o, b) in chunk.iter_mut().zip(&r.data) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "mul shape mismatch");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let out = Mat::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale_rows(&mut self, a: Var, w: Var) -> Var {
        let (x, wv) = (self.value(a), self.value(w));
        assert_eq!((x.rows, 1), wv.shape(), "scale_rows shape mismatch");
        let mut out = x.clone();
        for (i, chunk) in out.data.chunks_mut(x.cols).enumerate() {
            for o in chunk {
                *o *= wv.data[i];
            }
        }
        self.push(out, Op::ScaleRows(a, w))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let x = self.value(a);
        let out = Mat::from_vec(x.rows, x.cols, x.data.iter().map(|v| v * s).collect());
        self.push(out, Op::Scale(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Mat::from_vec(x.rows, x.cols, x.data.iter().map(|v| v.tanh()).collect());
        self.push(out, Op::Tanh(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Mat::from_vec(x.rows, x.cols, x.data.iter().map(|&v| gelu(v)).collect());
        self.push(out, Op::Gelu(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a), None);
        self.push(out, Op::Softmax(a))
    }

    /// Causal softmax: row i sees columns 0..=i + offset.
    pub fn softmax_causal(&mut self, a: Var, offset: usize) -> Var {
        let out = softmax_rows(self.value(a), Some(offset));
        self.push(out, Op::Softmax(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for chunk in out.data.chunks_mut(x.cols) {
            let max = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + chunk.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for o in chunk {
                *o -= lse;
            }
        }
        self.push(out, Op::LogSoftmax(a))
    }

    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var) -> Var {
        let out = layer_norm_rows(self.value(a), self.value(gamma), self.value(beta));
        self.push(out, Op::LayerNorm(a, gamma, beta))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat_rows width mismatch");
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows, rows, "concat_cols height mismatch");
            for i in 0..rows {
                out.data[i * cols + off..i * cols + off + m.cols].copy_from_slice(m.row(i));
            }
            off += m.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let x = self.value(a);
        assert!(start < end && end <= x.rows, "slice {start}..{end} of {} rows", x.rows);
        let out = Mat::from_vec(end - start, x.cols, x.data[start * x.cols..end * x.cols].to_vec());
        self.push(out, Op::SliceRows(a, start))
    }

    /// Rows of `a` picked by index (embedding lookup).
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Var {
        let x = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * x.cols);
        for &i in idx {
            data.extend_from_slice(x.row(i));
        }
        let out = Mat::from_vec(idx.len(), x.cols, data);
        self.push(out, Op::Gather(a, idx.to_vec()))
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Mat::zeros(1, x.cols);
        for chunk in x.data.chunks(x.cols) {
            for (o, v) in out.data.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        self.push(out, Op::SumRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Mat::zeros(x.cols, x.rows);
        for i in 0..x.rows {
            for j in 0..x.cols {
                out.data[j * x.rows + i] = x.data[i * x.cols + j];
            }
        }
        self.push(out, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.rows * x.cols, rows * cols, "reshape size mismatch");
        let out = Mat::from_vec(rows, cols, x.data.clone());
        self.push(out, Op::Reshape(a))
    }

    pub fn pick_sum(&mut self, a: Var, entries: Vec<(usize, usize, f64)>) -> Var {
        let x = self.value(a);
        let s = entries.iter().map(|&(r, c, w)| w * x.get(r, c)).sum();
        self.push(Mat::row_vec(vec![s]), Op::PickSum(a, entries))
    }

    /// Reverse pass from a scalar root. Parameter gradients are added into
    /// `param_grads[index]`, which must already have the parameter's shape.
    pub fn backward(&self, root: Var, param_grads: &mut [Mat]) {
        assert_eq!(self.value(root).shape(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Mat>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Mat::row_vec(vec![1.0]));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        fn acc_with(grads: &mut [Option<Mat>], v: Var, shape: (usize, usize), f: impl FnOnce(&mut Mat)) {
            let slot = grads[v.0].get_or_insert_with(|| Mat::zeros(shape.0, shape.1));
            f(slot);
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => param_grads[*p].add_assign(&g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc_with(&mut grads, *a, av.shape(), |m| gemm_nt(&g, bv, &mut m.data));
                    acc_with(&mut grads, *b, bv.shape(), |m| gemm_tn(av, &g, &mut m.data));
                }
                Op::MatMulT(a, b) => {
                    // y = a bᵀ: da = g b, db = gᵀ a
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc_with(&mut grads, *a, av.shape(), |m| gemm_nn(&g, bv, &mut m.data));
                    acc_with(&mut grads, *b, bv.shape(), |m| gemm_tn(&g, av, &mut m.data));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, r) => {
                    let mut gr = Mat::zeros(1, g.cols);
                    for chunk in g.data.chunks(g.cols) {
                        for (o, v) in gr.data.iter_mut().zip(chunk) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *r, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = g.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
                    let gb = g.data.iter().zip(&av.data).map(|(x, y)| x * y).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, ga));
                    acc(&mut grads, *b, Mat::from_vec(g.rows, g.cols, gb));
                }
                Op::ScaleRows(a, w) => {
                    let (av, wv) = (self.value(*a), self.value(*w));
                    let mut ga = g.clone();
                    let mut gw = Mat::zeros(wv.rows, 1);
                    for i in 0..g.rows {
                        let grow = &mut ga.data[i * g.cols..(i + 1) * g.cols];
                        gw.data[i] = grow.iter().zip(av.row(i)).map(|(x, y)| x * y).sum();
                        for o in grow {
                            *o *= wv.data[i];
                        }
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *w, gw);
                }
                Op::Scale(a, s) => {
                    let ga = g.data.iter().map(|v| v * s).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, ga));
                }
                Op::Tanh(a) => {
                    let ga = g.data.iter().zip(&y.data).map(|(gv, t)| gv * (1.0 - t * t)).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, ga));
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let ga = g.data.iter().zip(&x.data).map(|(gv, &xv)| gv * gelu_grad(xv)).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, ga));
                }
                Op::Softmax(a) => {
                    let mut ga = Mat::zeros(g.rows, g.cols);
                    for i in 0..g.rows {
                        let (gr, yr) = (g.row(i), y.row(i));
                        let dot: f64 = gr.iter().zip(yr).map(|(p, q)| p * q).sum();
                        for j in 0..g.cols {
                            ga.data[i * g.cols + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LogSoftmax(a) => {
                    let mut ga = Mat::zeros(g.rows, g.cols);
                    for i in 0..g.rows {
                        let (gr, yr) = (g.row(i), y.row(i));
                        let total: f64 = gr.iter().sum();
                        for j in 0..g.cols {
                            ga.data[i * g.cols + j] = gr[j] - yr[j].exp() * total;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm(a, gamma, beta) => {
                    let (x, gm) = (self.value(*a), self.value(*gamma));
                    let n = x.cols as f64;
                    let mut gx = Mat::zeros(x.rows, x.cols);
                    let mut gg = Mat::zeros(1, x.cols);
                    let mut gb = Mat::zeros(1, x.cols);
                    let mut xhat = vec![0.0; x.cols];
                    let mut dxhat = vec![0.0; x.cols];
                    for i in 0..x.rows {
                        let row = x.row(i);
                        let mean = row.iter().sum::<f64>() / n;
                        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        let inv = 1.0 / (var + LN_EPS).sqrt();
                        let gr = g.row(i);
                        for j in 0..x.cols {
                            xhat[j] = (row[j] - mean) * inv;
                            dxhat[j] = gr[j] * gm.data[j];
                            gg.data[j] += gr[j] * xhat[j];
                            gb.data[j] += gr[j];
                        }
                        let m1 = dxhat.iter().sum::<f64>() / n;
                        let m2 = dxhat.iter().zip(&xhat).map(|(p, q)| p * q).sum::<f64>() / n;
                        for j in 0..x.cols {
                            gx.data[i * x.cols + j] = inv * (dxhat[j] - m1 - xhat[j] * m2);
                        }
                    }
                    acc(&mut grads, *a, gx);
                    acc(&mut grads, *gamma, gg);
                    acc(&mut grads, *beta, gb);
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let r = self.value(p).rows;
                        let part = Mat::from_vec(r, g.cols, g.data[off * g.cols..(off + r) * g.cols].to_vec());
                        acc(&mut grads, p, part);
                        off += r;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let c = self.value(p).cols;
                        let mut part = Mat::zeros(g.rows, c);
                        for i in 0..g.rows {
                            part.data[i * c..(i + 1) * c].copy_from_slice(&g.row(i)[off..off + c]);
                        }
                        acc(&mut grads, p, part);
                        off += c;
                    }
                }
                Op::SliceRows(a, start) => {
                    let x = self.value(*a);
                    acc_with(&mut grads, *a, x.shape(), |m| {
                        let base = start * x.cols;
                        for (o, v) in m.data[base..base + g.data.len()].iter_mut().zip(&g.data) {
                            *o += v;
                        }
                    });
                }
                Op::Gather(a, idx) => {
                    let x = self.value(*a);
                    acc_with(&mut grads, *a, x.shape(), |m| {
                        for (k, &i) in idx.iter().enumerate() {
                            for (o, v) in m.data[i * x.cols..(i + 1) * x.cols].iter_mut().zip(g.row(k)) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::SumRows(a) => {
                    let x = self.value(*a);
                    let mut ga = Mat::zeros(x.rows, x.cols);
                    for chunk in ga.data.chunks_mut(x.cols) {
                        chunk.copy_from_slice(&g.data);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Transpose(a) => {
                    let mut ga = Mat::zeros(g.cols, g.rows);
                    for i in 0..g.rows {
                        for j in 0..g.cols {
                            ga.data[j * g.rows + i] = g.data[i * g.cols + j];
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Reshape(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, Mat::from_vec(x.rows, x.cols, g.data));
                }
                Op::PickSum(a, entries) => {
                    let x = self.value(*a);
                    let s = g.data[0];
                    acc_with(&mut grads, *a, x.shape(), |m| {
                        for &(r, c, w) in entries {
                            m.data[r * x.cols + c] += s * w;
                        }
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_mat(seed: u64, rows: usize, cols: usize) -> Mat {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let data = (0..rows * cols)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Mat::from_vec(rows, cols, data)
    }

    /// Central-difference check of d loss / d param for every entry of
    /// every parameter, where `build` maps parameter values to a scalar.
    fn check(params: &[Mat], build: impl Fn(&mut Tape, &[Var]) -> Var) {
        let run = |ps: &[Mat]| {
            let mut t = Tape::new();
            let vars: Vec<Var> = ps.iter().enumerate().map(|(i, m)| t.param(i, m)).collect();
            let root = build(&mut t, &vars);
            (t, root)
        };
        let (tape, root) = run(params);
        let mut grads: Vec<Mat> = params.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect();
        tape.backward(root, &mut grads);
        let h = 1e-5;
        for p in 0..params.len() {
            for k in 0..params[p].data.len() {
                let mut plus = params.to_vec();
                plus[p].data[k] += h;
                let mut minus = params.to_vec();
                minus[p].data[k] -= h;
                let (tp, rp) = run(&plus);
                let (tm, rm) = run(&minus);
                let numeric = (tp.scalar(rp) - tm.scalar(rm)) / (2.0 * h);
                let analytic = grads[p].data[k];
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(err < 1e-6, "param {p}[{k}]: analytic {analytic} numeric {numeric}");
            }
        }
    }

    fn all_weighted(t: &mut Tape, v: Var, seed: u64) -> Var {
        let m = t.value(v).clone();
        let w = rand_mat(seed, m.rows, m.cols);
        let entries =
            (0..m.rows).flat_map(|r| (0..m.cols).map(move |c| (r, c))).map(|(r, c)| (r, c, w.get(r, c))).collect();
        t.pick_sum(v, entries)
    }

    #[test]
    fn matmul_gradients() {
        check(&[rand_mat(1, 3, 4), rand_mat(2, 4, 2), rand_mat(3, 5, 4)], |t, v| {
            let a = t.matmul(v[0], v[1]);
            let b = t.matmul_t(v[2], v[0]);
            let sa = all_weighted(t, a, 7);
            let sb = all_weighted(t, b, 8);
            t.add(sa, sb)
        });
    }

    #[test]
    fn elementwise_gradients() {
        check(&[rand_mat(4, 3, 5), rand_mat(5, 3, 5), rand_mat(6, 1, 5), rand_mat(7, 3, 1)], |t, v| {
            let a = t.mul(v[0], v[1]);
            let b = t.add_row(a, v[2]);
            let c = t.tanh(b);
            let d = t.gelu(c);
            let e = t.scale_rows(d, v[3]);
            let f = t.scale(e, -1.7);
            all_weighted(t, f, 9)
        });
    }

    #[test]
    fn softmax_gradients() {
        check(&[rand_mat(8, 4, 6)], |t, v| {
            let a = t.softmax(v[0]);
            let b = t.softmax_causal(v[0], 1);
            let c = t.log_softmax(v[0]);
            let sa = all_weighted(t, a, 10);
            let sb = all_weighted(t, b, 11);
            let sc = all_weighted(t, c, 12);
            let s = t.add(sa, sb);
            t.add(s, sc)
        });
    }

    #[test]
    fn layer_norm_gradients() {
        check(&[rand_mat(13, 3, 6), rand_mat(14, 1, 6), rand_mat(15, 1, 6)], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2]);
            all_weighted(t, y, 16)
        });
    }

    #[test]
    fn structural_gradients() {
        check(&[rand_mat(17, 5, 3), rand_mat(18, 2, 3), rand_mat(19, 5, 2)], |t, v| {
            let g = t.gather(v[0], &[4, 0, 4, 2]);
            let c = t.concat_rows(&[g, v[1]]);
            let s = t.slice_rows(c, 1, 5);
            let sr = t.sum_rows(s);
            let tr = t.transpose(v[2]);
            let r = t.reshape(tr, 5, 2);
            let cc = t.concat_cols(&[r, v[0]]);
            let a = all_weighted(t, sr, 20);
            let b = all_weighted(t, cc, 21);
            t.add(a, b)
        });
    }

    #[test]
    fn causal_mask_zeroes_future() {
        let x = rand_mat(22, 3, 4);
        let y = softmax_rows(&x, Some(0));
        assert_eq!(y.get(0, 1), 0.0);
        assert_eq!(y.get(1, 2), 0.0);
        assert!((y.get(0, 0) - 1.0).abs() < 1e-15);
        for i in 0..3 {
            assert!((y.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_param_use_accumulates() {
        let w = Mat::row_vec(vec![2.0]);
        let mut t = Tape::new();
        let a = t.param(0, &w);
        let b = t.param(0, &w);
        assert_eq!(a, b);
        let p = t.mul(a, b);
        let root = t.pick_sum(p, vec![(0, 0, 1.0)]);
        let mut g = vec![Mat::zeros(1, 1)];
        t.backward(root, &mut g);
        assert_eq!(g[0].data[0], 4.0);
    }
}
