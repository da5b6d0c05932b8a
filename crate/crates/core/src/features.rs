//! Hand-crafted structural features and the ridge-regression baseline.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{cholesky_solve, gemm, View};

/// Graphs above this size get sampled 4-node counts.
pub const EXACT_QUAD_LIMIT: usize = 300;
pub const QUAD_SAMPLES: usize = 100_000;
const LABEL_PROP_ROUNDS: usize = 100;

/// Connected 4-node induced subgraph classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quad {
    Path,
    Star,
    Cycle,
    TailedTriangle,
    Diamond,
    Clique,
}

impl Quad {
    pub const ALL: [Quad; 6] = [Quad::Path, Quad::Star, Quad::Cycle, Quad::TailedTriangle, Quad::Diamond, Quad::Clique];

    /// Class of the subgraph induced by four distinct nodes, or `None` if
    /// it is disconnected.
    pub fn classify(g: &Graph, nodes: [usize; 4]) -> Option<Quad> {
        let mut deg = [0usize; 4];
        let mut edges = 0;
        for a in 0..4 {
            for b in a + 1..4 {
                if g.has_edge(nodes[a], nodes[b]) {
                    deg[a] += 1;
                    deg[b] += 1;
                    edges += 1;
                }
            }
        }
        let max = *deg.iter().max().unwrap();
        match (edges, max) {
            (3, 2) if deg.iter().all(|&d| d > 0) => Some(Quad::Path),
            (3, 3) => Some(Quad::Star),
            (4, 2) => Some(Quad::Cycle),
            (4, 3) => Some(Quad::TailedTriangle),
            (5, _) => Some(Quad::Diamond),
            (6, _) => Some(Quad::Clique),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Structural summary of one graph. Quad counts are exact up to
/// [`EXACT_QUAD_LIMIT`] nodes and sampled estimates above.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub n_nodes: f64,
    pub n_edges: f64,
    pub closed_triangles: f64,
    pub open_triangles: f64,
    /// Indexed as [`Quad::ALL`].
    pub quad_counts: [f64; 6],
    pub avg_degree: f64,
    pub avg_shortest_path: f64,
    pub edge_density: f64,
    pub n_leaf_nodes: f64,
    pub n_leaf_edges: f64,
    pub avg_closeness: f64,
    pub clustering_coefficient: f64,
    pub diameter: f64,
    pub n_communities: f64,
}

pub const FEATURE_NAMES: [&str; 19] = [
    "n_nodes",
    "n_edges",
    "closed_triangles",
    "open_triangles",
    "quad_path",
    "quad_star",
    "quad_cycle",
    "quad_tailed_triangle",
    "quad_diamond",
    "quad_clique",
    "avg_degree",
    "avg_shortest_path",
    "edge_density",
    "n_leaf_nodes",
    "n_leaf_edges",
    "avg_closeness",
    "clustering_coefficient",
    "diameter",
    "n_communities",
];

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.n_nodes, self.n_edges, self.closed_triangles, self.open_triangles];
        v.extend_from_slice(&self.quad_counts);
        v.extend_from_slice(&[
            self.avg_degree,
            self.avg_shortest_path,
            self.edge_density,
            self.n_leaf_nodes,
            self.n_leaf_edges,
            self.avg_closeness,
            self.clustering_coefficient,
            self.diameter,
            self.n_communities,
        ]);
        v
    }
}

pub fn write_features_csv<W: Write>(mut w: W, rows: &[(u64, FeatureVector)]) -> Result<()> {
    writeln!(w, "origin_id,{}", FEATURE_NAMES.join(","))?;
    for (id, f) in rows {
        let cells: Vec<String> = f.to_vec().iter().map(|x| x.to_string()).collect();
        writeln!(w, "{id},{}", cells.join(","))?;
    }
    Ok(())
}

/// Number of triangles, each counted once.
pub fn count_triangles(g: &Graph) -> u64 {
    let mut total = 0;
    for &(u, v) in g.edges() {
        // common neighbors w > v, sorted merge
        let (a, b) = (g.neighbors(u), g.neighbors(v));
        let (mut i, mut j) = (a.partition_point(|&x| x <= v), b.partition_point(|&x| x <= v));
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    total += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    total
}

/// Sum over nodes of C(d, 2): paths of length two, closed or not.
pub fn count_wedges(g: &Graph) -> u64 {
    g.degree_vector().iter().map(|&d| (d * d.saturating_sub(1) / 2) as u64).sum()
}

/// Exact counts of connected induced 4-node subgraphs, enumerating each
/// connected 4-set once.
pub fn count_quads_exact(g: &Graph) -> [u64; 6] {
    let mut counts = [0u64; 6];
    let mut sub = Vec::with_capacity(4);
    for v in 0..g.node_count() {
        sub.clear();
        sub.push(v);
        let ext: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| u > v).collect();
        extend(g, &mut sub, ext, v, &mut counts);
    }
    counts
}

fn extend(g: &Graph, sub: &mut Vec<usize>, mut ext: Vec<usize>, root: usize, counts: &mut [u64; 6]) {
    if sub.len() == 4 {
        let q = Quad::classify(g, [sub[0], sub[1], sub[2], sub[3]]).expect("enumerated sets are connected");
        counts[q.index()] += 1;
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in g.neighbors(w) {
            if u > root
                && !sub.contains(&u)
                && !next.contains(&u)
                && u != w
                && !sub.iter().any(|&s| g.has_edge(s, u))
            {
                next.push(u);
            }
        }
        sub.push(w);
        extend(g, sub, next, root, counts);
        sub.pop();
    }
}

/// Estimated counts from uniformly drawn 4-subsets.
pub fn count_quads_sampled(g: &Graph, samples: usize, seed: u64) -> [f64; 6] {
    let n = g.node_count();
    if n < 4 || samples == 0 {
        return [0.0; 6];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = [0u64; 6];
    for _ in 0..samples {
        let mut s = [0usize; 4];
        let mut k = 0;
        while k < 4 {
            let x = rng.random_range(0..n);
            if !s[..k].contains(&x) {
                s[k] = x;
                k += 1;
            }
        }
        if let Some(q) = Quad::classify(g, s) {
            hits[q.index()] += 1;
        }
    }
    let nf = n as f64;
    let subsets = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0) / 24.0;
    hits.map(|h| h as f64 / samples as f64 * subsets)
}

/// Synchronous label propagation: every node takes the most frequent
/// label among its neighbors, ties to the smallest label. Returns the
/// number of distinct labels at the end.
pub fn label_propagation_communities(g: &Graph) -> usize {
    let n = g.node_count();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut freq: HashMap<usize, usize> = HashMap::new();
    for _ in 0..LABEL_PROP_ROUNDS {
        let mut next = labels.clone();
        for v in 0..n {
            if g.degree(v) == 0 {
                continue;
            }
            freq.clear();
            for &u in g.neighbors(v) {
                *freq.entry(labels[u]).or_default() += 1;
            }
            let best = freq.iter().map(|(&l, &c)| (c, std::cmp::Reverse(l))).max().unwrap();
            next[v] = best.1 .0;
        }
        if next == labels {
            break;
        }
        labels = next;
    }
    labels.sort_unstable();
    labels.dedup();
    labels.len()
}

struct PathStats {
    avg_shortest_path: f64,
    avg_closeness: f64,
    diameter: f64,
}

fn path_stats(g: &Graph) -> PathStats {
    let n = g.node_count();
    let mut comp_of = vec![usize::MAX; n];
    let comps = g.connected_components();
    for (c, nodes) in comps.iter().enumerate() {
        for &v in nodes {
            comp_of[v] = c;
        }
    }
    let mut dist_sum = vec![0u64; comps.len()];
    let mut closeness = Vec::with_capacity(n);
    let mut diameter = 0usize;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let size = comps[comp_of[s]].len();
        if size < 2 {
            continue;
        }
        for &v in &comps[comp_of[s]] {
            dist[v] = usize::MAX;
        }
        dist[s] = 0;
        queue.push_back(s);
        let mut total = 0u64;
        while let Some(v) = queue.pop_front() {
            total += dist[v] as u64;
            diameter = diameter.max(dist[v]);
            for &u in g.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist_sum[comp_of[s]] += total;
        closeness.push((size - 1) as f64 / total as f64);
    }
    // sorted so the sum does not depend on node order
    closeness.sort_by(f64::total_cmp);
    let closeness: f64 = closeness.iter().sum();
    // per-component mean over ordered pairs, weighted by component size
    let (mut weighted, mut weight) = (0.0, 0usize);
    for (c, nodes) in comps.iter().enumerate() {
        let k = nodes.len();
        if k >= 2 {
            weighted += k as f64 * dist_sum[c] as f64 / (k * (k - 1)) as f64;
            weight += k;
        }
    }
    PathStats {
        avg_shortest_path: if weight > 0 { weighted / weight as f64 } else { 0.0 },
        avg_closeness: if n > 0 { closeness / n as f64 } else { 0.0 },
        diameter: diameter as f64,
    }
}

/// Features of `g`. `seed` only matters for graphs whose 4-node counts
/// are sampled.
pub fn extract_features(g: &Graph, seed: u64) -> FeatureVector {
    let n = g.node_count();
    let m = g.edge_count();
    let degrees = g.degree_vector();
    let closed = count_triangles(g);
    let wedges = count_wedges(g);
    let quad_counts = if n <= EXACT_QUAD_LIMIT {
        count_quads_exact(g).map(|c| c as f64)
    } else {
        count_quads_sampled(g, QUAD_SAMPLES, seed)
    };
    let paths = path_stats(g);
    let nf = n as f64;
    FeatureVector {
        n_nodes: nf,
        n_edges: m as f64,
        closed_triangles: closed as f64,
        open_triangles: (wedges - 3 * closed) as f64,
        quad_counts,
        avg_degree: if n > 0 { 2.0 * m as f64 / nf } else { 0.0 },
        avg_shortest_path: paths.avg_shortest_path,
        edge_density: if n > 1 { 2.0 * m as f64 / (nf * (nf - 1.0)) } else { 0.0 },
        n_leaf_nodes: degrees.iter().filter(|&&d| d == 1).count() as f64,
        n_leaf_edges: g.edges().iter().filter(|&&(a, b)| degrees[a] == 1 || degrees[b] == 1).count() as f64,
        avg_closeness: paths.avg_closeness,
        clustering_coefficient: if wedges > 0 { 3.0 * closed as f64 / wedges as f64 } else { 0.0 },
        diameter: paths.diameter,
        n_communities: label_propagation_communities(g) as f64,
    }
}

const STANDARDIZE_EPSILON: f64 = 1e-8;

/// Ridge regression on standardized features with an unpenalized
/// intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeModel {
    /// Coefficients on the standardized scale.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl RidgeModel {
    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Shape(format!("ridge model expects {} features, got {}", self.weights.len(), x.len())));
        }
        let mut s = self.intercept;
        for j in 0..x.len() {
            s += self.weights[j] * (x[j] - self.means[j]) / self.sds[j];
        }
        Ok(s)
    }

    pub fn predict_many(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Slope and intercept on the original feature scale.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let slopes: Vec<f64> = self.weights.iter().zip(&self.sds).map(|(w, s)| w / s).collect();
        let shift: f64 = slopes.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        (slopes, self.intercept - shift)
    }
}

/// Standardized design and centered targets, shared across penalties.
pub struct RidgeProblem {
    rows: usize,
    cols: usize,
    z: Vec<f64>,
    yc: Vec<f64>,
    y_mean: f64,
    means: Vec<f64>,
    sds: Vec<f64>,
    gram: Option<Vec<f64>>,
    dual_gram: Option<Vec<f64>>,
}

impl RidgeProblem {
    pub fn new(x: &[&[f64]], y: &[f64]) -> Result<Self> {
        let rows = x.len();
        if rows == 0 || rows != y.len() {
            return Err(Error::InvalidArgument(format!("ridge needs matching non-empty rows, got {} and {}", rows, y.len())));
        }
        let cols = x[0].len();
        if x.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged feature matrix".into()));
        }
        if x.iter().any(|r| r.iter().any(|v| !v.is_finite())) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite value in ridge inputs".into()));
        }
        let mut means = vec![0.0; cols];
        for r in x {
            for (m, v) in means.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= rows as f64);
        let mut sds = vec![0.0; cols];
        for r in x {
            for j in 0..cols {
                let d = r[j] - means[j];
                sds[j] += d * d;
            }
        }
        sds.iter_mut().for_each(|s| *s = (*s / rows as f64).sqrt().max(STANDARDIZE_EPSILON));
        let mut z = Vec::with_capacity(rows * cols);
        for r in x {
            z.extend((0..cols).map(|j| (r[j] - means[j]) / sds[j]));
        }
        let y_mean = y.iter().sum::<f64>() / rows as f64;
        let yc = y.iter().map(|v| v - y_mean).collect();
        Ok(Self { rows, cols, z, yc, y_mean, means, sds, gram: None, dual_gram: None })
    }

    pub fn fit(&mut self, l2: f64) -> Result<RidgeModel> {
        if !(l2 >= 0.0) || !l2.is_finite() {
            return Err(Error::InvalidArgument(format!("l2 must be a finite non-negative number, got {l2}")));
        }
        let (n, p) = (self.rows, self.cols);
        let weights = if p == 0 {
            Vec::new()
        } else if l2 > 0.0 && n < p {
            // w = Z^T (Z Z^T + l2 I)^-1 yc, the same solution in n unknowns
            let gram = self.dual_gram.get_or_insert_with(|| {
                let mut k = vec![0.0; n * n];
                gemm(1.0, View::row_major(&self.z, n, p), View::transposed(&self.z, n, p), 0.0, &mut k);
                k
            });
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] += l2;
            }
            let alpha = cholesky_solve(&a, n, &self.yc).ok_or_else(|| singular(l2))?;
            let mut w = vec![0.0; p];
            gemm(1.0, View::transposed(&self.z, n, p), View::row_major(&alpha, n, 1), 0.0, &mut w);
            w
        } else {
            let gram = self.gram.get_or_insert_with(|| {
                let mut k = vec![0.0; p * p];
                gemm(1.0, View::transposed(&self.z, n, p), View::row_major(&self.z, n, p), 0.0, &mut k);
                k
            });
            let mut a = gram.clone();
            for i in 0..p {
                a[i * p + i] += l2;
            }
            let mut rhs = vec![0.0; p];
            gemm(1.0, View::transposed(&self.z, n, p), View::row_major(&self.yc, n, 1), 0.0, &mut rhs);
            cholesky_solve(&a, p, &rhs).ok_or_else(|| singular(l2))?
        };
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("ridge solve produced non-finite weights".into()));
        }
        Ok(RidgeModel { weights, intercept: self.y_mean, l2, means: self.means.clone(), sds: self.sds.clone() })
    }
}

fn singular(l2: f64) -> Error {
    Error::Singular(format!("ridge normal equations are singular at l2 = {l2}; use a positive l2"))
}

pub fn ridge_fit(x: &[&[f64]], y: &[f64], l2: f64) -> Result<RidgeModel> {
    RidgeProblem::new(x, y)?.fit(l2)
}

/// 1e0, 1e-1, ..., 1e-7.
pub fn default_l2_grid() -> Vec<f64> {
    (0..8).map(|k| 10f64.powi(-k)).collect()
}

/// Fits every penalty in `grid` and keeps the one with the lowest
/// validation MSE (first wins on ties). Penalties whose system is singular
/// are skipped.
pub fn ridge_select(
    train_x: &[&[f64]],
    train_y: &[f64],
    val_x: &[&[f64]],
    val_y: &[f64],
    grid: &[f64],
) -> Result<(RidgeModel, f64)> {
    let mut problem = RidgeProblem::new(train_x, train_y)?;
    let mut best: Option<(RidgeModel, f64)> = None;
    let mut last_err = None;
    for &l2 in grid {
        let model = match problem.fit(l2) {
            Ok(m) => m,
            Err(e @ Error::Singular(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let val = crate::data::mse(&model.predict_many(val_x)?, val_y)?;
        if best.as_ref().is_none_or(|(_, b)| val < *b) {
            best = Some((model, val));
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidArgument("empty l2 grid".into())))
}
