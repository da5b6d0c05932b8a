//! Normalized graph Laplacian and a dense symmetric eigensolver.
//!
//! The solver is the classic two-phase scheme: Householder reduction to
//! tridiagonal form followed by the implicit-shift QL iteration, after the
//! EISPACK routines `tred2` and `tql2`. Eigenvectors are kept transposed
//! (one contiguous row per eigenvector) so that the Givens rotations in the
//! QL phase touch contiguous memory.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Dense symmetric matrix, row-major. Symmetric by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from the upper triangle of `f(i, j)`, `i <= j`, mirrored.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Accepts a row-major buffer only if it is exactly symmetric and finite.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!("expected {} entries, got {}", n * n, data.len())));
        }
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) is not finite")));
                }
                if v != data[j * n + i] {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) breaks symmetry")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `D^{-1/2} (D - W) D^{-1/2}` for the binary adjacency `W`. Isolated nodes
/// get an all-zero row and column.
pub fn normalized_laplacian(g: &Graph) -> SymmetricMatrix {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = g
        .degree_vector()
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut m = SymmetricMatrix::zeros(n);
    for (i, &s) in inv_sqrt.iter().enumerate() {
        if s > 0.0 {
            m.data[i * n + i] = 1.0;
        }
    }
    for &(a, b) in g.edges() {
        let v = -inv_sqrt[a] * inv_sqrt[b];
        m.data[a * n + b] = v;
        m.data[b * n + a] = v;
    }
    m
}

/// Eigenpairs sorted by ascending eigenvalue.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Row `k` is the unit eigenvector for `eigenvalues[k]`.
    vectors: Vec<f64>,
    n: usize,
}

impl SpectralDecomposition {
    /// Dimension of the decomposed matrix.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of retained eigenpairs.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    /// `phi_k(i)`.
    pub fn component(&self, i: usize, k: usize) -> f64 {
        self.vectors[k * self.n + i]
    }

    /// Keeps only the `k` smallest eigenpairs. Heat-kernel values computed
    /// from a truncated decomposition are approximations.
    pub fn truncated(mut self, k: usize) -> Self {
        let k = k.min(self.len());
        self.eigenvalues.truncate(k);
        self.vectors.truncate(k * self.n);
        self
    }

    /// `sum_k lambda_k phi_k phi_k^T`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvector(k);
            for i in 0..n {
                let s = lam * v[i];
                let row = &mut out[i * n..(i + 1) * n];
                for (o, &vj) in row.iter_mut().zip(v) {
                    *o += s * vj;
                }
            }
        }
        out
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Deterministic for a fixed input. Each eigenvector is signed so that its
/// largest-magnitude component (first one on ties) is non-negative.
pub fn eig_sym(m: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    let n = m.n;
    if let Some(pos) = m.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "matrix entry ({}, {}) is not finite",
            pos / n.max(1),
            pos % n.max(1)
        )));
    }
    if n == 0 {
        return Ok(SpectralDecomposition { eigenvalues: vec![], vectors: vec![], n });
    }
    let mut v = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    let mut vt = transpose(n, &v);
    drop(v);
    tql2(n, &mut vt, &mut d, &mut e)?;

    // Selection sort by eigenvalue keeps ties in QL output order.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        for j in i + 1..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            let (a, b) = vt.split_at_mut(k * n);
            a[i * n..(i + 1) * n].swap_with_slice(&mut b[..n]);
        }
    }
    for row in vt.chunks_mut(n) {
        let mut best = 0;
        for (i, x) in row.iter().enumerate() {
            if x.abs() > row[best].abs() {
                best = i;
            }
        }
        if row[best] < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(SpectralDecomposition { eigenvalues: d, vectors: vt, n })
}

fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Householder tridiagonalization. On return `d` holds the diagonal, `e`
/// the subdiagonal in `e[1..]`, and `v` the accumulated orthogonal transform.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`. `vt` holds eigenvector
/// estimates as rows and is rotated in place.
fn tql2(n: usize, vt: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_iterations = 100 * n;
    let mut iterations = 0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iterations {
                    return Err(Error::NoConvergence { iterations: max_iterations });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = vt.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_next = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("eigenvalue iteration produced a non-finite value".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn laplacian_of_single_edge() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let l = normalized_laplacian(&g);
        assert_eq!(l.as_slice(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_of_triangle() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let l = normalized_laplacian(&g);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { -0.5 };
                assert!((l.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn laplacian_of_isolated_node() {
        let l = normalized_laplacian(&Graph::empty(1));
        assert_eq!(l.as_slice(), &[0.0]);
    }

    #[test]
    fn identity_and_zero() {
        let dec = eig_sym(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(dec.eigenvalues(), &[1.0, 1.0, 1.0]);
        let dec = eig_sym(&SymmetricMatrix::zeros(4)).unwrap();
        assert_eq!(dec.eigenvalues(), &[0.0; 4]);
        let dec = eig_sym(&SymmetricMatrix::zeros(0)).unwrap();
        assert!(dec.is_empty());
    }

    #[test]
    fn single_edge_closed_form() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let dec = eig_sym(&normalized_laplacian(&g)).unwrap();
        assert!(dec.eigenvalues()[0].abs() < 1e-14);
        assert!((dec.eigenvalues()[1] - 2.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(max_abs_diff(dec.eigenvector(0), &[r, r]) < 1e-14);
        let v1 = dec.eigenvector(1);
        assert!((v1[0].abs() - r).abs() < 1e-14 && (v1[0] + v1[1]).abs() < 1e-14);
    }

    #[test]
    fn sign_convention() {
        let m = SymmetricMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let dec = eig_sym(&m).unwrap();
        for k in 0..2 {
            let v = dec.eigenvector(k);
            let big = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
            assert!(big >= 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        assert!(SymmetricMatrix::from_row_major(2, vec![1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(SymmetricMatrix::from_row_major(1, vec![f64::NAN]).is_err());
        assert!(SymmetricMatrix::from_row_major(2, vec![1.0]).is_err());
    }

    #[test]
    fn truncation_keeps_smallest() {
        let m = SymmetricMatrix::from_upper_fn(3, |i, j| if i == j { (3 - i) as f64 } else { 0.0 });
        let dec = eig_sym(&m).unwrap().truncated(2);
        assert_eq!(dec.len(), 2);
        assert_eq!(dec.dim(), 3);
        assert_eq!(dec.eigenvalues(), &[1.0, 2.0]);
    }

    #[test]
    fn diagonal_with_ties_is_deterministic() {
        let m = SymmetricMatrix::from_upper_fn(5, |i, j| if i == j { (i % 2) as f64 } else { 0.0 });
        let a = eig_sym(&m).unwrap();
        let b = eig_sym(&m).unwrap();
        assert_eq!(a.eigenvalues(), b.eigenvalues());
        assert_eq!(a.reconstruct(), b.reconstruct());
        assert!(max_abs_diff(&a.reconstruct(), m.as_slice()) < 1e-14);
    }
}
