//! Dense row-major matrices, affine layers and their hand-written backward passes.
//!
//! The networks in this crate are shallow and fixed in shape, so gradients are
//! computed by composing explicit backward functions rather than by a general
//! tape. Every `*_backward` takes the cached forward input and the upstream
//! gradient and returns the gradient with respect to that input plus, for
//! layers, a gradient container shaped exactly like the parameters.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `f64` matrix. Rows are samples throughout the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("Matrix::from_vec", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dim("Matrix::from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so zero-width matrices yield empty rows explicitly
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Horizontal concatenation; all inputs must share a row count.
    pub fn hconcat(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for m in parts {
                if m.rows != rows {
                    return Err(Error::dim("Matrix::hconcat", rows, m.rows));
                }
                out.row_mut(r)[offset..offset + m.cols].copy_from_slice(m.row(r));
                offset += m.cols;
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Errors with `node` named when any entry is NaN or infinite.
    pub fn check_finite(&self, node: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                node: node.to_owned(),
            })
        }
    }
}

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative evaluated at the pre-activation value `x`. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

pub fn activation_forward(kind: Activation, input: &Matrix) -> Matrix {
    input.map(|x| kind.apply(x))
}

/// `pre` is the activation's input from the forward pass.
pub fn activation_backward(kind: Activation, pre: &Matrix, grad_out: &Matrix) -> Matrix {
    debug_assert_eq!(pre.shape(), grad_out.shape());
    let data = pre
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&x, &g)| g * kind.derivative(x))
        .collect();
    Matrix {
        rows: pre.rows,
        cols: pre.cols,
        data,
    }
}

/// Fully connected layer computing `input · Wᵀ + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    /// Shape `(out_dim, in_dim)`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        AffineLayer {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::dim("AffineLayer bias", weights.rows(), bias.len()));
        }
        Ok(AffineLayer { weights, bias })
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
        let data = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        AffineLayer {
            weights: Matrix {
                rows: out_dim,
                cols: in_dim,
                data,
            },
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        affine_forward(self, input)
    }

    /// Returns `(d input, d params)` given the forward input and `d output`.
    pub fn backward(&self, input: &Matrix, grad_out: &Matrix) -> (Matrix, AffineLayer) {
        affine_backward(self, input, grad_out)
    }
}

pub fn affine_forward(layer: &AffineLayer, input: &Matrix) -> Result<Matrix> {
    let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
    if input.cols() != in_dim {
        return Err(Error::dim("affine_forward input", in_dim, input.cols()));
    }
    let mut out = Matrix::zeros(input.rows(), out_dim);
    for r in 0..input.rows() {
        let x = input.row(r);
        let y = out.row_mut(r);
        for (o, y_o) in y.iter_mut().enumerate() {
            let w = layer.weights.row(o);
            let mut acc = layer.bias[o];
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *y_o = acc;
        }
    }
    Ok(out)
}

pub fn affine_backward(
    layer: &AffineLayer,
    input: &Matrix,
    grad_out: &Matrix,
) -> (Matrix, AffineLayer) {
    debug_assert_eq!(input.rows(), grad_out.rows());
    debug_assert_eq!(grad_out.cols(), layer.out_dim());
    let mut grads = AffineLayer::zeros(layer.in_dim(), layer.out_dim());
    let mut grad_in = Matrix::zeros(input.rows(), layer.in_dim());
    for r in 0..input.rows() {
        let x = input.row(r);
        let g = grad_out.row(r);
        for (o, &g_o) in g.iter().enumerate() {
            if g_o == 0.0 {
                continue;
            }
            grads.bias[o] += g_o;
            let gw = grads.weights.row_mut(o);
            for (gw_i, &x_i) in gw.iter_mut().zip(x) {
                *gw_i += g_o * x_i;
            }
            let w = layer.weights.row(o);
            let gi = grad_in.row_mut(r);
            for (gi_i, &w_i) in gi.iter_mut().zip(w) {
                *gi_i += g_o * w_i;
            }
        }
    }
    (grad_in, grads)
}

/// A collection of trainable arrays with a fixed traversal order.
///
/// Gradients use the same type as the parameters they belong to, so the order
/// of [`Parameters::tensors`] is also the pairing between parameters and gradients.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    /// Same shapes, all zeros.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        debug_assert_eq!(offset, flat.len());
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

impl Parameters for AffineLayer {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.weights.data(), &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weights.data.as_mut_slice(), &mut self.bias]
    }
}

/// Two affine layers with a nonlinearity between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerMlp {
    pub hidden: AffineLayer,
    pub output: AffineLayer,
    #[serde(default)]
    pub activation: Activation,
}

/// Forward cache for [`TwoLayerMlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub pre_hidden: Matrix,
    pub hidden: Matrix,
}

impl TwoLayerMlp {
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        TwoLayerMlp {
            hidden: AffineLayer::glorot(in_dim, hidden, rng),
            output: AffineLayer::glorot(hidden, out_dim, rng),
            activation: Activation::Relu,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim()
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpCache)> {
        let pre_hidden = self.hidden.forward(input)?;
        let hidden = activation_forward(self.activation, &pre_hidden);
        let out = self.output.forward(&hidden)?;
        Ok((out, MlpCache { pre_hidden, hidden }))
    }

    pub fn backward(&self, input: &Matrix, cache: &MlpCache, grad_out: &Matrix) -> (Matrix, TwoLayerMlp) {
        let (g_hidden, g_output) = self.output.backward(&cache.hidden, grad_out);
        let g_pre = activation_backward(self.activation, &cache.pre_hidden, &g_hidden);
        let (g_in, g_hidden_layer) = self.hidden.backward(input, &g_pre);
        (
            g_in,
            TwoLayerMlp {
                hidden: g_hidden_layer,
                output: g_output,
                activation: self.activation,
            },
        )
    }
}

impl Parameters for TwoLayerMlp {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.hidden.tensors();
        v.extend(self.output.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.hidden.tensors_mut();
        v.extend(self.output.tensors_mut());
        v
    }
}
