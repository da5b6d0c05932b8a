use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{gemm, View};

/// Row-major matrix of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{rows}x{cols} matrix needs {} values, got {}", rows * cols, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self { rows: self.cols, cols: self.rows, data: transpose(&self.data, self.rows, self.cols) }
    }
}

pub(crate) fn transpose(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Multiresolution 1-D convolution: several filter widths applied over
/// windows of consecutive input rows, outputs stacked row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct MrConvLayer {
    pub(crate) filter_sizes: Vec<usize>,
    pub(crate) filters: usize,
    pub(crate) in_cols: usize,
    /// Per filter size `m`: `(m * in_cols) x filters`, row-major.
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
}

impl MrConvLayer {
    pub fn zeros(filter_sizes: &[usize], filters: usize, in_cols: usize) -> Self {
        Self {
            filter_sizes: filter_sizes.to_vec(),
            filters,
            in_cols,
            weights: filter_sizes.iter().map(|&m| vec![0.0; m * in_cols * filters]).collect(),
            biases: filter_sizes.iter().map(|_| vec![0.0; filters]).collect(),
        }
    }

    pub(crate) fn init<R: Rng + ?Sized>(&mut self, rng: &mut R, unit_sd: bool) {
        for (w, &m) in self.weights.iter_mut().zip(&self.filter_sizes) {
            let sd = if unit_sd { 1.0 } else { 1.0 / ((m * self.in_cols) as f64).sqrt() };
            let normal = Normal::new(0.0, sd).expect("positive sd");
            w.iter_mut().for_each(|x| *x = normal.sample(rng));
        }
    }

    pub fn filter_sizes(&self) -> &[usize] {
        &self.filter_sizes
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    /// Sets the weights of filter size index `s`, laid out as
    /// `(m * in_cols) x filters`.
    pub fn set_weights(&mut self, s: usize, weights: &[f64], bias: &[f64]) -> Result<()> {
        if weights.len() != self.weights[s].len() || bias.len() != self.filters {
            return Err(Error::Shape("filter parameter length mismatch".into()));
        }
        self.weights[s].copy_from_slice(weights);
        self.biases[s].copy_from_slice(bias);
        Ok(())
    }

    pub fn output_rows(&self, in_rows: usize) -> usize {
        self.filter_sizes.iter().map(|&m| in_rows + 1 - m).sum()
    }

    pub(crate) fn check_input(&self, rows: usize, cols: usize) -> Result<()> {
        if cols != self.in_cols {
            return Err(Error::Shape(format!("conv layer expects {} columns, got {cols}", self.in_cols)));
        }
        let widest = self.filter_sizes.iter().copied().max().unwrap_or(0);
        if rows < widest {
            return Err(Error::Shape(format!("input has {rows} rows, widest filter needs {widest}")));
        }
        Ok(())
    }

    /// Forward pass on a row-major `rows x in_cols` input. Returns the
    /// `output_rows(rows) x filters` feature map after tanh.
    pub(crate) fn forward_raw(&self, input: &[f64], rows: usize) -> Vec<f64> {
        let k = self.in_cols;
        let d = self.filters;
        let mut out = vec![0.0; self.output_rows(rows) * d];
        let mut offset = 0;
        for (s, &m) in self.filter_sizes.iter().enumerate() {
            let windows = rows + 1 - m;
            let block = &mut out[offset * d..(offset + windows) * d];
            for row in block.chunks_exact_mut(d) {
                row.copy_from_slice(&self.biases[s]);
            }
            // Window i is the contiguous slice input[i*k .. (i+m)*k].
            let patches = View { data: input, rows: windows, cols: m * k, row_stride: k, col_stride: 1 };
            gemm(1.0, patches, View::row_major(&self.weights[s], m * k, d), 1.0, block);
            offset += windows;
        }
        out.iter_mut().for_each(|x| *x = x.tanh());
        out
    }

    pub fn forward(&self, input: &Matrix2D) -> Result<Matrix2D> {
        self.check_input(input.rows, input.cols)?;
        let data = self.forward_raw(&input.data, input.rows);
        Ok(Matrix2D { rows: self.output_rows(input.rows), cols: self.filters, data })
    }

    /// Accumulates parameter gradients into `grad` and, when requested,
    /// returns the gradient with respect to the input.
    pub(crate) fn backward_raw(
        &self,
        input: &[f64],
        rows: usize,
        output: &[f64],
        d_output: &[f64],
        grad: &mut MrConvLayer,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let k = self.in_cols;
        let d = self.filters;
        let mut d_input = want_input_grad.then(|| vec![0.0; rows * k]);
        let mut offset = 0;
        let mut scratch = Vec::new();
        for (s, &m) in self.filter_sizes.iter().enumerate() {
            let windows = rows + 1 - m;
            let range = offset * d..(offset + windows) * d;
            let d_pre: Vec<f64> = output[range.clone()]
                .iter()
                .zip(&d_output[range])
                .map(|(&o, &g)| g * (1.0 - o * o))
                .collect();
            let patches_t = View { data: input, rows: m * k, cols: windows, row_stride: 1, col_stride: k };
            gemm(1.0, patches_t, View::row_major(&d_pre, windows, d), 1.0, &mut grad.weights[s]);
            for row in d_pre.chunks_exact(d) {
                for (b, &g) in grad.biases[s].iter_mut().zip(row) {
                    *b += g;
                }
            }
            if let Some(dx) = d_input.as_mut() {
                scratch.resize(windows * m * k, 0.0);
                gemm(
                    1.0,
                    View::row_major(&d_pre, windows, d),
                    View::transposed(&self.weights[s], m * k, d),
                    0.0,
                    &mut scratch,
                );
                for (i, patch) in scratch.chunks_exact(m * k).enumerate() {
                    for (x, &g) in dx[i * k..(i + m) * k].iter_mut().zip(patch) {
                        *x += g;
                    }
                }
            }
            offset += windows;
        }
        d_input
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

/// Fully connected layer, `weights` is `inputs x outputs` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    pub(crate) activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub(crate) fn init<R: Rng + ?Sized>(&mut self, rng: &mut R, unit_sd: bool) {
        let sd = if unit_sd { 1.0 } else { 1.0 / (self.inputs as f64).sqrt() };
        let normal = Normal::new(0.0, sd).expect("positive sd");
        self.weights.iter_mut().for_each(|x| *x = normal.sample(rng));
    }

    /// Batched forward: `input` is `batch x inputs`, result `batch x outputs`.
    pub(crate) fn forward_batch(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            out.extend_from_slice(&self.bias);
        }
        gemm(
            1.0,
            View::row_major(input, batch, self.inputs),
            View::row_major(&self.weights, self.inputs, self.outputs),
            1.0,
            &mut out,
        );
        if self.activation == Activation::Tanh {
            out.iter_mut().for_each(|x| *x = x.tanh());
        }
        out
    }

    /// `d_pre` is the gradient at the pre-activation. Accumulates into
    /// `grad` and returns the gradient at the input when requested.
    pub(crate) fn backward_batch(
        &self,
        input: &[f64],
        batch: usize,
        d_pre: &[f64],
        grad: &mut DenseLayer,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        gemm(
            1.0,
            View::transposed(input, batch, self.inputs),
            View::row_major(d_pre, batch, self.outputs),
            1.0,
            &mut grad.weights,
        );
        for row in d_pre.chunks_exact(self.outputs) {
            for (b, &g) in grad.bias.iter_mut().zip(row) {
                *b += g;
            }
        }
        want_input_grad.then(|| {
            let mut d_in = vec![0.0; batch * self.inputs];
            gemm(
                1.0,
                View::row_major(d_pre, batch, self.outputs),
                View::transposed(&self.weights, self.inputs, self.outputs),
                0.0,
                &mut d_in,
            );
            d_in
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_zero_output() {
        let layer = MrConvLayer::zeros(&[2, 3], 4, 5);
        let out = layer.forward(&Matrix2D::zeros(6, 5)).unwrap();
        assert_eq!(out.rows(), 5 + 4);
        assert_eq!(out.cols(), 4);
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_filter_hand_evaluation() {
        let mut layer = MrConvLayer::zeros(&[2], 1, 1);
        layer.set_weights(0, &[0.5, 0.5], &[0.0]).unwrap();
        let input = Matrix2D::from_row_major(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let out = layer.forward(&input).unwrap();
        assert_eq!(out.rows(), 2);
        assert!((out.get(0, 0) - 0.905148).abs() < 1e-6);
        assert!((out.get(1, 0) - 0.986614).abs() < 1e-6);
        assert_eq!(out.get(0, 0), 1.5f64.tanh());
    }

    #[test]
    fn output_shape_arithmetic() {
        let layer = MrConvLayer::zeros(&[1, 2], 3, 2);
        let out = layer.forward(&Matrix2D::zeros(4, 2)).unwrap();
        assert_eq!((out.rows(), out.cols()), (7, 3));
    }

    #[test]
    fn rejects_short_or_wrong_width_input() {
        let layer = MrConvLayer::zeros(&[2, 6], 3, 2);
        assert!(layer.forward(&Matrix2D::zeros(5, 2)).is_err());
        assert!(layer.forward(&Matrix2D::zeros(6, 3)).is_err());
    }

    #[test]
    fn sizes_concatenate_per_filter_column() {
        // Two sizes, two filters with distinct biases; row blocks follow size order.
        let mut layer = MrConvLayer::zeros(&[1, 2], 2, 1);
        layer.set_weights(0, &[1.0, 0.0], &[0.0, 0.1]).unwrap();
        layer.set_weights(1, &[0.0, 0.0, 1.0, 1.0], &[0.2, 0.3]).unwrap();
        let input = Matrix2D::from_row_major(3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        let out = layer.forward(&input).unwrap();
        let want = [
            [0.1f64.tanh(), 0.1f64.tanh()],
            [0.2f64.tanh(), 0.1f64.tanh()],
            [0.3f64.tanh(), 0.1f64.tanh()],
            [(0.2f64 + 0.2).tanh(), (0.2f64 + 0.3).tanh()],
            [(0.3f64 + 0.2).tanh(), (0.3f64 + 0.3).tanh()],
        ];
        for (r, row) in want.iter().enumerate() {
            for (c, &w) in row.iter().enumerate() {
                assert!((out.get(r, c) - w).abs() < 1e-15, "({r}, {c})");
            }
        }
    }
}
