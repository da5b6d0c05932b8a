//! Heat kernel signatures and the histogram graph descriptor.
//!
//! For a graph with normalized-Laplacian eigenpairs `(lambda_k, phi_k)` the
//! heat kernel diagonal at diffusion time `z` is
//! `h_z(i, i) = sum_k exp(-lambda_k z) phi_k(i)^2`. Sampling it at `N`
//! log-spaced times gives a `|V| x N` signature. Each column is then
//! standardized with statistics pooled over the training graphs and
//! histogrammed into `N_B` bins, which yields an `N_B x N` matrix that no
//! longer depends on node order or node count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{gemm, View};
use crate::spectral::{eig_sym, normalized_laplacian, SpectralDecomposition};

/// Floor applied to standard deviations.
pub const SD_EPSILON: f64 = 1e-8;

/// Standardized values below `-CLIP` go to the first bin, values at or
/// above `+CLIP` to the last one.
pub const CLIP: f64 = 1.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorConfig {
    pub z_first: f64,
    pub z_last: f64,
    pub n_steps: usize,
    pub n_bins: usize,
    /// Use only this many of the smallest eigenpairs. `None` keeps all.
    #[serde(default)]
    pub max_eigenpairs: Option<usize>,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self { z_first: 0.1, z_last: 25.0, n_steps: 64, n_bins: 64, max_eigenpairs: None }
    }
}

impl DescriptorConfig {
    pub fn steps(&self) -> Result<DiffusionSteps> {
        DiffusionSteps::new(self.z_first, self.z_last, self.n_steps)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        if self.n_bins < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 bins, got {}", self.n_bins)));
        }
        if self.max_eigenpairs == Some(0) {
            return Err(Error::InvalidArgument("max_eigenpairs must be positive".into()));
        }
        Ok(())
    }
}

/// Geometrically spaced diffusion times.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSteps(Vec<f64>);

impl DiffusionSteps {
    pub fn new(first: f64, last: f64, count: usize) -> Result<Self> {
        if !(first > 0.0 && first < last && last.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "diffusion steps need 0 < first < last, got {first} and {last}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 diffusion steps, got {count}")));
        }
        let ratio = last / first;
        let mut values: Vec<f64> = (0..count)
            .map(|i| first * ratio.powf(i as f64 / (count - 1) as f64))
            .collect();
        values[0] = first;
        values[count - 1] = last;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row-major `|V| x N` heat kernel signature.
#[derive(Clone, Debug, PartialEq)]
pub struct HksMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl HksMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{rows}x{cols} signature needs {} values", rows * cols)));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `H[i][j] = sum_k exp(-lambda_k z_j) phi_k(i)^2` over the retained pairs.
pub fn heat_kernel_diag(dec: &SpectralDecomposition, steps: &DiffusionSteps) -> HksMatrix {
    let n = dec.dim();
    let k = dec.len();
    let z = steps.values();
    let decay: Vec<f64> = dec
        .eigenvalues()
        .iter()
        .flat_map(|&lam| z.iter().map(move |&zj| (-lam * zj).exp()))
        .collect();
    let mut squares = Vec::with_capacity(k * n);
    for e in 0..k {
        squares.extend(dec.eigenvector(e).iter().map(|x| x * x));
    }
    let mut data = vec![0.0; n * z.len()];
    gemm(
        1.0,
        View::transposed(&squares, k, n),
        View::row_major(&decay, k, z.len()),
        0.0,
        &mut data,
    );
    HksMatrix { rows: n, cols: z.len(), data }
}

/// Heat kernel signature of a graph.
pub fn compute_hks(g: &Graph, steps: &DiffusionSteps, max_eigenpairs: Option<usize>) -> Result<HksMatrix> {
    let mut dec = eig_sym(&normalized_laplacian(g))?;
    if let Some(k) = max_eigenpairs {
        dec = dec.truncated(k);
    }
    Ok(heat_kernel_diag(&dec, steps))
}

/// Per-column mean and population standard deviation of training signatures.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorStats {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl DescriptorStats {
    pub fn new(means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if means.len() != sds.len() {
            return Err(Error::Shape("means and sds differ in length".into()));
        }
        if sds.iter().any(|&s| !(s >= SD_EPSILON)) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("descriptor stats need finite means and sds >= 1e-8".into()));
        }
        Ok(Self { means, sds })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

pub fn fit_stats<'a, I>(training: I) -> Result<DescriptorStats>
where
    I: IntoIterator<Item = &'a HksMatrix>,
{
    let mut iter = training.into_iter().peekable();
    let cols = iter
        .peek()
        .map(|h| h.cols)
        .ok_or_else(|| Error::InvalidArgument("cannot fit descriptor stats on no signatures".into()))?;
    let mut count = 0usize;
    let mut sum = vec![0.0; cols];
    let mut sum_sq = vec![0.0; cols];
    let mut all = Vec::new();
    for h in iter {
        if h.cols != cols {
            return Err(Error::Shape(format!("signature has {} columns, expected {cols}", h.cols)));
        }
        count += h.rows;
        for row in h.data.chunks_exact(cols) {
            for (s, &v) in sum.iter_mut().zip(row) {
                *s += v;
            }
        }
        all.push(h);
    }
    if count == 0 {
        return Err(Error::InvalidArgument("training signatures have no rows".into()));
    }
    let means: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    // Second pass on centered values for accuracy.
    for h in all {
        for row in h.data.chunks_exact(cols) {
            for ((s, &v), &m) in sum_sq.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
    }
    let sds = sum_sq
        .iter()
        .map(|s| (s / count as f64).sqrt().max(SD_EPSILON))
        .collect();
    Ok(DescriptorStats { means, sds })
}

/// Bin index for a standardized value with `n_bins` total bins.
pub fn bin_index(standardized: f64, n_bins: usize) -> usize {
    let inner = n_bins - 2;
    if standardized < -CLIP {
        0
    } else if standardized >= CLIP {
        n_bins - 1
    } else {
        let edge = |b: usize| -CLIP + 2.0 * CLIP * b as f64 / inner as f64;
        let width = 2.0 * CLIP / inner as f64;
        let mut idx = (((standardized + CLIP) / width).floor() as usize).min(inner - 1);
        // Rounding in the division can land one bin off an exact edge.
        if idx + 1 < inner && standardized >= edge(idx + 1) {
            idx += 1;
        } else if idx > 0 && standardized < edge(idx) {
            idx -= 1;
        }
        1 + idx
    }
}

/// `N_B x N` histogram matrix; each column is a probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDescriptor {
    n_bins: usize,
    n_steps: usize,
    data: Vec<f64>,
}

impl GraphDescriptor {
    pub fn from_row_major(n_bins: usize, n_steps: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_bins * n_steps {
            return Err(Error::Shape(format!(
                "{n_bins}x{n_steps} descriptor needs {} values, got {}",
                n_bins * n_steps,
                data.len()
            )));
        }
        Ok(Self { n_bins, n_steps, data })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn get(&self, bin: usize, step: usize) -> f64 {
        self.data[bin * self.n_steps + step]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// `N_B` rows by `N` columns, nine significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.data.chunks_exact(self.n_steps) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Binary portable graymap, `N` wide and `N_B` high, scaled so the
    /// largest entry is white.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let max = self.data.iter().copied().fold(0.0, f64::max);
        write!(w, "P5\n{} {}\n255\n", self.n_steps, self.n_bins)?;
        let pixels: Vec<u8> = self
            .data
            .iter()
            .map(|&v| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 })
            .collect();
        w.write_all(&pixels)?;
        Ok(())
    }
}

pub fn histogram_descriptor(h: &HksMatrix, stats: &DescriptorStats, n_bins: usize) -> Result<GraphDescriptor> {
    if n_bins < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 bins, got {n_bins}")));
    }
    if stats.len() != h.cols {
        return Err(Error::Shape(format!(
            "stats cover {} steps, signature has {}",
            stats.len(),
            h.cols
        )));
    }
    let n_steps = h.cols;
    let mut data = vec![0.0; n_bins * n_steps];
    if h.rows == 0 {
        return Err(Error::InvalidArgument("signature has no rows".into()));
    }
    let mass = 1.0 / h.rows as f64;
    for row in h.data.chunks_exact(n_steps) {
        for (j, &v) in row.iter().enumerate() {
            let s = (v - stats.means[j]) / stats.sds[j];
            data[bin_index(s, n_bins) * n_steps + j] += mass;
        }
    }
    Ok(GraphDescriptor { n_bins, n_steps, data })
}

/// Full pipeline from graph to histogram descriptor.
pub fn compute_descriptor(g: &Graph, config: &DescriptorConfig, stats: &DescriptorStats) -> Result<GraphDescriptor> {
    let hks = compute_hks(g, &config.steps()?, config.max_eigenpairs)?;
    histogram_descriptor(&hks, stats, config.n_bins)
}

/// Per-pixel mean and population sd over training descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelStats {
    pub n_bins: usize,
    pub n_steps: usize,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl PixelStats {
    pub fn fit<'a, I>(training: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a GraphDescriptor>,
    {
        let items: Vec<&GraphDescriptor> = training.into_iter().collect();
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot fit pixel stats on no descriptors".into()))?;
        let (n_bins, n_steps) = (first.n_bins, first.n_steps);
        let len = n_bins * n_steps;
        let mut means = vec![0.0; len];
        for d in &items {
            if d.n_bins != n_bins || d.n_steps != n_steps {
                return Err(Error::Shape("training descriptors differ in shape".into()));
            }
            for (m, &v) in means.iter_mut().zip(&d.data) {
                *m += v;
            }
        }
        let count = items.len() as f64;
        means.iter_mut().for_each(|m| *m /= count);
        let mut sds = vec![0.0; len];
        for d in &items {
            for ((s, &v), &m) in sds.iter_mut().zip(&d.data).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        sds.iter_mut().for_each(|s| *s = (*s / count).sqrt());
        Ok(Self { n_bins, n_steps, means, sds })
    }

    /// `(value - mean) / (sd + eps)` per pixel.
    pub fn normalize(&self, d: &GraphDescriptor) -> Result<Vec<f64>> {
        if d.n_bins != self.n_bins || d.n_steps != self.n_steps {
            return Err(Error::Shape(format!(
                "descriptor is {}x{}, stats are {}x{}",
                d.n_bins, d.n_steps, self.n_bins, self.n_steps
            )));
        }
        Ok(d
            .data
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(&v, (&m, &s))| (v - m) / (s + SD_EPSILON))
            .collect())
    }
}

pub fn pixel_normalize(descriptors: &[GraphDescriptor], stats: &PixelStats) -> Result<Vec<Vec<f64>>> {
    descriptors.iter().map(|d| stats.normalize(d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn single_column(values: &[f64]) -> HksMatrix {
        HksMatrix::from_row_major(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn steps_closed_form() {
        assert_eq!(DiffusionSteps::new(0.1, 25.0, 2).unwrap().values(), &[0.1, 25.0]);
        let s = DiffusionSteps::new(1.0, 4.0, 3).unwrap();
        assert!((s.values()[1] - 2.0).abs() < 1e-15);
        let s = DiffusionSteps::new(0.1, 25.0, 64).unwrap();
        assert!((s.values()[1] - 0.109160).abs() < 1e-6);
        let logs: Vec<f64> = s.values().iter().map(|z| z.ln()).collect();
        let gap = logs[1] - logs[0];
        for w in logs.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - gap).abs() < 1e-12);
        }
    }

    #[test]
    fn steps_reject_bad_arguments() {
        assert!(DiffusionSteps::new(0.0, 1.0, 4).is_err());
        assert!(DiffusionSteps::new(2.0, 1.0, 4).is_err());
        assert!(DiffusionSteps::new(1.0, 1.0, 4).is_err());
        assert!(DiffusionSteps::new(0.1, 1.0, 1).is_err());
    }

    #[test]
    fn hks_single_edge() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let steps = DiffusionSteps::new(0.1, 1.0, 2).unwrap();
        let h = compute_hks(&g, &steps, None).unwrap();
        let want = (1.0 + (-0.2f64).exp()) / 2.0;
        assert!((h.get(0, 0) - want).abs() < 1e-12);
        assert!((h.get(0, 0) - 0.9093654).abs() < 1e-7);
    }

    #[test]
    fn hks_triangle() {
        let steps = DiffusionSteps::new(1.0, 2.0, 2).unwrap();
        let h = compute_hks(&k3(), &steps, None).unwrap();
        let want = 1.0 / 3.0 + (2.0 / 3.0) * (-1.5f64).exp();
        for i in 0..3 {
            assert!((h.get(i, 0) - want).abs() < 1e-12);
        }
        assert!((want - 0.4820868).abs() < 1e-7);
    }

    #[test]
    fn hks_small_time_is_identity() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (1, 4)]).unwrap();
        let steps = DiffusionSteps::new(1e-9, 1.0, 2).unwrap();
        let h = compute_hks(&g, &steps, None).unwrap();
        for i in 0..5 {
            assert!((h.get(i, 0) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn stats_examples() {
        let s = fit_stats([&single_column(&[0.0, 2.0])]).unwrap();
        assert_eq!((s.means[0], s.sds[0]), (1.0, 1.0));
        let s = fit_stats([&single_column(&[3.0, 3.0, 3.0])]).unwrap();
        assert_eq!(s.sds[0], SD_EPSILON);
        let s = fit_stats([&single_column(&[1.0, 3.0]), &single_column(&[5.0, 7.0])]).unwrap();
        assert!((s.means[0] - 4.0).abs() < 1e-15);
        assert!((s.sds[0] - 5f64.sqrt()).abs() < 1e-15);
        assert!(fit_stats(std::iter::empty::<&HksMatrix>()).is_err());
    }

    #[test]
    fn histogram_hand_binning() {
        let h = single_column(&[-2.0, 0.0, 0.5, 3.0]);
        let stats = DescriptorStats::new(vec![0.0], vec![1.0]).unwrap();
        let d = histogram_descriptor(&h, &stats, 6).unwrap();
        assert_eq!(d.as_slice(), &[0.25, 0.0, 0.0, 0.5, 0.0, 0.25]);
    }

    #[test]
    fn histogram_boundaries() {
        assert_eq!(bin_index(-1.2, 64), 1);
        assert_eq!(bin_index(-1.2000001, 64), 0);
        assert_eq!(bin_index(1.2, 64), 63);
        assert_eq!(bin_index(1.1999999, 64), 62);
        assert_eq!(bin_index(0.0, 64), 32);
        assert_eq!(bin_index(f64::NEG_INFINITY, 6), 0);
    }

    #[test]
    fn histogram_all_at_mean() {
        let h = single_column(&[5.0; 7]);
        let stats = DescriptorStats::new(vec![5.0], vec![2.0]).unwrap();
        let d = histogram_descriptor(&h, &stats, 64).unwrap();
        assert!((d.get(bin_index(0.0, 64), 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_shape_errors() {
        let h = single_column(&[1.0]);
        let stats = DescriptorStats::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(histogram_descriptor(&h, &stats, 6).is_err());
        let stats = DescriptorStats::new(vec![0.0], vec![1.0]).unwrap();
        assert!(histogram_descriptor(&h, &stats, 2).is_err());
    }

    #[test]
    fn isolated_node_descriptor() {
        let config = DescriptorConfig { n_steps: 4, n_bins: 8, ..Default::default() };
        let stats = DescriptorStats::new(vec![0.5; 4], vec![0.25; 4]).unwrap();
        let d = compute_descriptor(&Graph::empty(1), &config, &stats).unwrap();
        let bin = bin_index((1.0 - 0.5) / 0.25, 8);
        for j in 0..4 {
            assert_eq!(d.get(bin, j), 1.0);
        }
    }

    #[test]
    fn triangle_and_path_differ() {
        let config = DescriptorConfig { n_steps: 8, n_bins: 10, ..Default::default() };
        let steps = config.steps().unwrap();
        let path = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let hk = compute_hks(&k3(), &steps, None).unwrap();
        let hp = compute_hks(&path, &steps, None).unwrap();
        let stats = fit_stats([&hk, &hp]).unwrap();
        let dk = histogram_descriptor(&hk, &stats, 10).unwrap();
        let dp = histogram_descriptor(&hp, &stats, 10).unwrap();
        assert_ne!(dk, dp);
    }

    #[test]
    fn pixel_normalization() {
        let a = GraphDescriptor::from_row_major(1, 1, vec![0.0]).unwrap();
        let b = GraphDescriptor::from_row_major(1, 1, vec![2.0]).unwrap();
        let stats = PixelStats::fit([&a, &b]).unwrap();
        let out = pixel_normalize(&[a.clone(), b.clone()], &stats).unwrap();
        assert!((out[0][0] + 1.0).abs() < 1e-7 && (out[1][0] - 1.0).abs() < 1e-7);

        let same = PixelStats::fit([&a, &a, &a]).unwrap();
        assert_eq!(same.normalize(&a).unwrap(), vec![0.0]);

        // unseen descriptor: pure affine map with the fitted stats
        let c = GraphDescriptor::from_row_major(1, 1, vec![5.0]).unwrap();
        assert!((stats.normalize(&c).unwrap()[0] - 4.0 / (1.0 + SD_EPSILON)).abs() < 1e-15);

        let wrong = GraphDescriptor::from_row_major(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(stats.normalize(&wrong).is_err());
    }

    #[test]
    fn csv_and_pgm_dumps() {
        let d = GraphDescriptor::from_row_major(2, 3, vec![0.5, 0.0, 1.0, 0.5, 1.0, 0.0]).unwrap();
        let mut csv = Vec::new();
        d.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), "5.00000000e-1,0.00000000e0,1.00000000e0");
        let mut pgm = Vec::new();
        d.write_pgm(&mut pgm).unwrap();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[128, 0, 255, 128, 255, 0]);
    }
}
