//! Synthetic temporal graphs, labeled ego-net instances, temporal splits
//! and the evaluation metric.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, TemporalEdge};

/// Derives an independent seed for a pipeline stage from the root seed
/// (SplitMix64 over `root + stage`). The result fits in 63 bits so it
/// survives TOML's signed integers.
pub fn stage_seed(root: u64, stage: u64) -> u64 {
    let mut z = root.wrapping_add(stage.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) >> 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    PreferentialAttachment { n_nodes: usize, edges_per_node: usize },
    ErdosRenyi { n_nodes: usize, p: f64 },
    WattsStrogatz { n_nodes: usize, k: usize, beta: f64 },
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<TemporalEdgeList> {
        match *self {
            GeneratorSpec::PreferentialAttachment { n_nodes, edges_per_node } => {
                generate_preferential_attachment(n_nodes, edges_per_node, seed)
            }
            GeneratorSpec::ErdosRenyi { n_nodes, p } => generate_er(n_nodes, p, seed),
            GeneratorSpec::WattsStrogatz { n_nodes, k, beta } => generate_ws(n_nodes, k, beta, seed),
        }
    }
}

/// Edge records in non-decreasing timestamp order, with the generator
/// that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalEdgeList {
    pub edges: Vec<TemporalEdge>,
    pub generator: Option<GeneratorSpec>,
    pub seed: Option<u64>,
}

impl TemporalEdgeList {
    pub fn from_records(mut edges: Vec<TemporalEdge>) -> Self {
        edges.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Self { edges, generator: None, seed: None }
    }

    pub fn is_time_ordered(&self) -> bool {
        self.edges.windows(2).all(|w| w[0].timestamp <= w[1].timestamp)
    }
}

/// Barabasi-Albert growth starting from a single node. Node `v` arrives at
/// time `v` and links to `min(v, m)` distinct earlier nodes picked with
/// probability proportional to their degree.
pub fn generate_preferential_attachment(n_nodes: usize, edges_per_node: usize, seed: u64) -> Result<TemporalEdgeList> {
    if edges_per_node == 0 || n_nodes <= edges_per_node {
        return Err(Error::InvalidArgument(format!(
            "preferential attachment needs edges_per_node >= 1 and n_nodes > edges_per_node, got {n_nodes} and {edges_per_node}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Each node appears once per incident edge.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * n_nodes * edges_per_node);
    let mut edges = Vec::with_capacity(n_nodes * edges_per_node);
    let mut targets = Vec::with_capacity(edges_per_node);
    for v in 1..n_nodes {
        targets.clear();
        if v <= edges_per_node {
            targets.extend(0..v);
        } else {
            while targets.len() < edges_per_node {
                let t = endpoints[rng.random_range(0..endpoints.len())];
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            targets.sort_unstable();
        }
        for &t in &targets {
            edges.push(TemporalEdge::new(v as NodeId, t as NodeId, v as f64));
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    Ok(TemporalEdgeList {
        edges,
        generator: Some(GeneratorSpec::PreferentialAttachment { n_nodes, edges_per_node }),
        seed: Some(seed),
    })
}

/// G(n, p) with pairs visited in lexicographic order; an edge's timestamp
/// is its insertion index.
pub fn generate_er(n_nodes: usize, p: f64, seed: u64) -> Result<TemporalEdgeList> {
    if !(0.0..=1.0).contains(&p) || n_nodes == 0 {
        return Err(Error::InvalidArgument(format!("Erdos-Renyi needs n >= 1 and p in [0, 1], got {n_nodes} and {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n_nodes {
        for j in i + 1..n_nodes {
            if rng.random::<f64>() < p {
                let t = edges.len() as f64;
                edges.push(TemporalEdge::new(i as NodeId, j as NodeId, t));
            }
        }
    }
    Ok(TemporalEdgeList { edges, generator: Some(GeneratorSpec::ErdosRenyi { n_nodes, p }), seed: Some(seed) })
}

/// Watts-Strogatz: a ring lattice where every node links to its `k / 2`
/// nearest neighbors on each side, then each lattice edge `(i, j)` is
/// rewired to `(i, w)` with probability `beta`. Timestamps are lattice
/// positions.
pub fn generate_ws(n_nodes: usize, k: usize, beta: f64, seed: u64) -> Result<TemporalEdgeList> {
    if k == 0 || k % 2 != 0 || k >= n_nodes || !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "Watts-Strogatz needs even 0 < k < n and beta in [0, 1], got n={n_nodes}, k={k}, beta={beta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n_nodes * k / 2);
    for j in 1..=k / 2 {
        for i in 0..n_nodes {
            pairs.push((i, (i + j) % n_nodes));
        }
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut present: BTreeSet<(usize, usize)> = pairs.iter().map(|&(a, b)| key(a, b)).collect();
    for pair in pairs.iter_mut() {
        if rng.random::<f64>() >= beta {
            continue;
        }
        let (i, j) = *pair;
        let degree_i = present.range((i, 0)..=(i, usize::MAX)).count()
            + present.iter().filter(|&&(a, b)| b == i && a < i).count();
        if degree_i >= n_nodes - 1 {
            continue;
        }
        let w = loop {
            let w = rng.random_range(0..n_nodes);
            if w != i && !present.contains(&key(i, w)) {
                break w;
            }
        };
        present.remove(&key(i, j));
        present.insert(key(i, w));
        *pair = (i, w);
    }
    let edges = pairs
        .iter()
        .enumerate()
        .map(|(t, &(a, b))| TemporalEdge::new(a as NodeId, b as NodeId, t as f64))
        .collect();
    Ok(TemporalEdgeList {
        edges,
        generator: Some(GeneratorSpec::WattsStrogatz { n_nodes, k, beta }),
        seed: Some(seed),
    })
}

/// Property whose growth is predicted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthTarget {
    /// Node count of the k-hop ego-net.
    Size,
    /// Number of distinct neighbors of the ego.
    DegreeOfEgo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledInstance {
    pub graph: Graph,
    pub raw_growth: f64,
    pub scaled_label: f64,
    pub graph_time: f64,
    pub growth_time: f64,
    pub origin: NodeId,
}

pub fn scale_label(raw_growth: f64) -> f64 {
    (raw_growth + 1.0).log2()
}

/// Snapshots keyed by time, built once per distinct timestamp.
struct SnapshotCache<'a> {
    edges: &'a [TemporalEdge],
    graphs: HashMap<u64, Option<Graph>>,
}

impl<'a> SnapshotCache<'a> {
    fn new(edges: &'a [TemporalEdge]) -> Self {
        Self { edges, graphs: HashMap::new() }
    }

    fn at(&mut self, time: f64) -> Result<Option<&Graph>> {
        let key = time.to_bits();
        if !self.graphs.contains_key(&key) {
            let g = match Graph::from_edge_list(self.edges, time) {
                Ok(g) => Some(g),
                Err(Error::EmptySnapshot(_)) => None,
                Err(e) => return Err(e),
            };
            self.graphs.insert(key, g);
        }
        Ok(self.graphs[&key].as_ref())
    }
}

fn target_value(g: &Graph, v: usize, k_hop: usize, target: GrowthTarget) -> Result<usize> {
    Ok(match target {
        GrowthTarget::DegreeOfEgo => g.degree(v),
        GrowthTarget::Size => g.k_hop_ego_net(v, k_hop)?.node_count(),
    })
}

fn check_times(graph_time: f64, growth_time: f64) -> Result<()> {
    if !(growth_time > graph_time) {
        return Err(Error::SplitOrder(format!(
            "growth time {growth_time} must be later than graph time {graph_time}"
        )));
    }
    Ok(())
}

/// One instance per node present at `graph_time` (restricted to `origins`
/// when given), ordered by origin id.
pub fn build_instances_for(
    el: &TemporalEdgeList,
    origins: Option<&BTreeSet<NodeId>>,
    graph_time: f64,
    growth_time: f64,
    k_hop: usize,
    target: GrowthTarget,
) -> Result<Vec<LabeledInstance>> {
    check_times(graph_time, growth_time)?;
    let mut cache = SnapshotCache::new(&el.edges);
    let Some(before) = cache.at(graph_time)?.cloned() else {
        return Ok(Vec::new());
    };
    let after = cache.at(growth_time)?.cloned().expect("later snapshot contains the earlier one");
    let labels = before.labels().expect("snapshots carry original ids").to_vec();
    let mut out = Vec::new();
    for (v, &id) in labels.iter().enumerate() {
        if origins.is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let w = after.index_of(id).expect("node persists in later snapshot");
        let then = target_value(&before, v, k_hop, target)?;
        let now = target_value(&after, w, k_hop, target)?;
        let raw_growth = now.saturating_sub(then) as f64;
        out.push(LabeledInstance {
            graph: before.k_hop_ego_net(v, k_hop)?,
            raw_growth,
            scaled_label: scale_label(raw_growth),
            graph_time,
            growth_time,
            origin: id,
        });
    }
    Ok(out)
}

pub fn build_instances(
    el: &TemporalEdgeList,
    graph_time: f64,
    growth_time: f64,
    k_hop: usize,
    target: GrowthTarget,
) -> Result<Vec<LabeledInstance>> {
    build_instances_for(el, None, graph_time, growth_time, k_hop, target)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitTimes {
    pub graph_time: f64,
    pub growth_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    /// Train, validation and test probabilities.
    pub fractions: [f64; 3],
    pub seed: u64,
    pub train: SplitTimes,
    pub val: SplitTimes,
    pub test: SplitTimes,
}

impl SplitSpec {
    pub fn times(&self, split: Split) -> SplitTimes {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split fractions {:?} must be non-negative and sum to 1", self.fractions)));
        }
        for s in Split::ALL {
            let t = self.times(s);
            check_times(t.graph_time, t.growth_time)?;
        }
        for pair in [(Split::Train, Split::Val), (Split::Val, Split::Test)] {
            let (a, b) = (self.times(pair.0), self.times(pair.1));
            if !(a.graph_time < b.graph_time && a.growth_time < b.growth_time) {
                return Err(Error::SplitOrder(format!(
                    "{} times ({}, {}) must both precede {} times ({}, {})",
                    pair.0.name(),
                    a.graph_time,
                    a.growth_time,
                    pair.1.name(),
                    b.graph_time,
                    b.growth_time
                )));
            }
        }
        Ok(())
    }
}

/// Assigns each origin to one split at random with the given probabilities.
/// Origins are visited in ascending order so the result depends only on
/// the origin set and the seed.
pub fn assign_origins(origins: &BTreeSet<NodeId>, fractions: [f64; 3], seed: u64) -> BTreeMap<NodeId, Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    origins
        .iter()
        .map(|&o| {
            let u: f64 = rng.random();
            let split = if u < fractions[0] {
                Split::Train
            } else if u < fractions[0] + fractions[1] {
                Split::Val
            } else {
                Split::Test
            };
            (o, split)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitSet {
    pub train: Vec<LabeledInstance>,
    pub val: Vec<LabeledInstance>,
    pub test: Vec<LabeledInstance>,
}

impl SplitSet {
    pub fn get(&self, s: Split) -> &[LabeledInstance] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, s: Split) -> &mut Vec<LabeledInstance> {
        match s {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assigns every node of the edge list to a split, then builds each split's
/// instances at that split's own times. Nodes not yet present at a split's
/// graph time are dropped.
pub fn temporal_split(el: &TemporalEdgeList, spec: &SplitSpec, k_hop: usize, target: GrowthTarget) -> Result<SplitSet> {
    spec.validate()?;
    let origins: BTreeSet<NodeId> = el.edges.iter().flat_map(|e| [e.src, e.dst]).collect();
    let assignment = assign_origins(&origins, spec.fractions, spec.seed);
    let mut out = SplitSet::default();
    for s in Split::ALL {
        let members: BTreeSet<NodeId> = assignment.iter().filter(|(_, &v)| v == s).map(|(&o, _)| o).collect();
        let t = spec.times(s);
        *out.get_mut(s) = build_instances_for(el, Some(&members), t.graph_time, t.growth_time, k_hop, target)?;
    }
    verify_split(&out)?;
    Ok(out)
}

/// Partitions prebuilt instances by origin, keeping their own times.
pub fn split_instances(instances: Vec<LabeledInstance>, fractions: [f64; 3], seed: u64) -> SplitSet {
    let origins: BTreeSet<NodeId> = instances.iter().map(|i| i.origin).collect();
    let assignment = assign_origins(&origins, fractions, seed);
    let mut out = SplitSet::default();
    for inst in instances {
        out.get_mut(assignment[&inst.origin]).push(inst);
    }
    out
}

/// Checks per-instance time order, the cross-split ordering of graph and
/// growth times, and that no origin appears in two splits.
pub fn verify_split(set: &SplitSet) -> Result<()> {
    for s in Split::ALL {
        for inst in set.get(s) {
            check_times(inst.graph_time, inst.growth_time)?;
            if inst.scaled_label != scale_label(inst.raw_growth) {
                return Err(Error::InvalidArgument(format!("instance {} has an inconsistent label", inst.origin)));
            }
        }
    }
    let bounds = |s: Split, f: fn(&LabeledInstance) -> f64| -> Option<(f64, f64)> {
        let v: Vec<f64> = set.get(s).iter().map(f).collect();
        (!v.is_empty()).then(|| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
    };
    let ordered = [Split::Train, Split::Val, Split::Test];
    for (i, &a) in ordered.iter().enumerate() {
        for &b in &ordered[i + 1..] {
            for (what, f) in [
                ("graph", (|x: &LabeledInstance| x.graph_time) as fn(&LabeledInstance) -> f64),
                ("growth", |x: &LabeledInstance| x.growth_time),
            ] {
                if let (Some((_, max_a)), Some((min_b, _))) = (bounds(a, f), bounds(b, f)) {
                    if !(max_a < min_b) {
                        return Err(Error::SplitOrder(format!(
                            "max {what} time of {} ({max_a}) is not before min of {} ({min_b})",
                            a.name(),
                            b.name()
                        )));
                    }
                }
            }
        }
    }
    let mut owner: HashMap<NodeId, Split> = HashMap::new();
    for s in Split::ALL {
        for inst in set.get(s) {
            if let Some(&prev) = owner.get(&inst.origin) {
                if prev != s {
                    return Err(Error::SplitOrder(format!(
                        "origin {} appears in both {} and {}",
                        inst.origin,
                        prev.name(),
                        s.name()
                    )));
                }
            }
            owner.insert(inst.origin, s);
        }
    }
    Ok(())
}

/// Drops each zero-growth instance independently with probability
/// `fraction`. Nonzero instances are kept.
pub fn downsample_zero_growth(instances: Vec<LabeledInstance>, fraction: f64, seed: u64) -> Result<Vec<LabeledInstance>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("downsampling fraction {fraction} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(instances
        .into_iter()
        .filter(|inst| inst.raw_growth != 0.0 || rng.random::<f64>() >= fraction)
        .collect())
}

pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "mse needs equal non-zero lengths, got {} and {}",
            predictions.len(),
            truths.len()
        )));
    }
    let sum: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / predictions.len() as f64)
}

/// Externally supplied growth label for one origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelRecord {
    pub origin: NodeId,
    pub graph_time: f64,
    pub growth_time: f64,
    pub raw_growth: f64,
}

pub const LABEL_HEADER: &str = "origin_id,graph_time,growth_time,raw_growth";

pub fn write_labels<W: Write>(mut w: W, records: &[LabelRecord]) -> Result<()> {
    writeln!(w, "{LABEL_HEADER}")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.origin, r.graph_time, r.growth_time, r.raw_growth)?;
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<LabelRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if lineno == 0 && trimmed.replace(' ', "") == LABEL_HEADER {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let bad = |m: &str| Error::Parse { line: lineno + 1, message: format!("{m} in {trimmed:?}") };
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let origin = fields[0].parse().map_err(|_| bad("bad origin id"))?;
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("bad number"))?;
        if nums[2] < 0.0 {
            return Err(bad("negative growth"));
        }
        check_times(nums[0], nums[1]).map_err(|_| bad("growth time not after graph time"))?;
        out.push(LabelRecord { origin, graph_time: nums[0], growth_time: nums[1], raw_growth: nums[2] });
    }
    Ok(out)
}

impl From<&LabeledInstance> for LabelRecord {
    fn from(i: &LabeledInstance) -> Self {
        Self { origin: i.origin, graph_time: i.graph_time, growth_time: i.growth_time, raw_growth: i.raw_growth }
    }
}

/// Instances for externally labeled origins: the ego-net comes from the
/// snapshot at each record's graph time, the label from the record.
/// Records whose origin is absent at that time are skipped.
pub fn instances_from_labels(el: &TemporalEdgeList, records: &[LabelRecord], k_hop: usize) -> Result<Vec<LabeledInstance>> {
    let mut cache = SnapshotCache::new(&el.edges);
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        check_times(r.graph_time, r.growth_time)?;
        let Some(g) = cache.at(r.graph_time)? else { continue };
        let Some(v) = g.index_of(r.origin) else { continue };
        out.push(LabeledInstance {
            graph: g.k_hop_ego_net(v, k_hop)?,
            raw_growth: r.raw_growth,
            scaled_label: scale_label(r.raw_growth),
            graph_time: r.graph_time,
            growth_time: r.growth_time,
            origin: r.origin,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(records: &[(u64, u64, f64)]) -> TemporalEdgeList {
        TemporalEdgeList::from_records(records.iter().map(|&(a, b, t)| TemporalEdge::new(a, b, t)).collect())
    }

    #[test]
    fn pa_small_case() {
        for seed in 0..20 {
            let g = generate_preferential_attachment(3, 1, seed).unwrap();
            assert_eq!(g.edges.len(), 2);
            assert_eq!(g.edges[0], TemporalEdge::new(1, 0, 1.0));
            assert!(g.edges[1].src == 2 && g.edges[1].dst < 2);
            assert!(g.is_time_ordered());
        }
    }

    #[test]
    fn pa_is_seeded() {
        let a = generate_preferential_attachment(200, 3, 9).unwrap();
        assert_eq!(a, generate_preferential_attachment(200, 3, 9).unwrap());
        assert_ne!(a.edges, generate_preferential_attachment(200, 3, 10).unwrap().edges);
        assert!(generate_preferential_attachment(3, 3, 0).is_err());
        assert!(generate_preferential_attachment(3, 0, 0).is_err());
    }

    #[test]
    fn er_extremes() {
        assert!(generate_er(10, 0.0, 1).unwrap().edges.is_empty());
        let full = generate_er(6, 1.0, 1).unwrap();
        assert_eq!(full.edges.len(), 15);
        assert!(generate_er(5, 1.5, 0).is_err());
    }

    #[test]
    fn ws_lattice() {
        let ring = generate_ws(10, 4, 0.0, 3).unwrap();
        let g = Graph::from_edge_list(&ring.edges, f64::INFINITY).unwrap();
        assert!(g.degree_vector().iter().all(|&d| d == 4));
        let rewired = generate_ws(30, 4, 0.5, 3).unwrap();
        let g = Graph::from_edge_list(&rewired.edges, f64::INFINITY).unwrap();
        assert_eq!(g.edge_count(), 60);
        assert!(generate_ws(10, 3, 0.1, 0).is_err());
        assert!(generate_ws(4, 4, 0.1, 0).is_err());
    }

    #[test]
    fn no_change_no_growth() {
        let list = el(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 5.0)]);
        let inst = build_instances(&list, 1.0, 2.0, 1, GrowthTarget::DegreeOfEgo).unwrap();
        assert_eq!(inst.len(), 3);
        assert!(inst.iter().all(|i| i.raw_growth == 0.0 && i.scaled_label == 0.0));
    }

    #[test]
    fn degree_growth_recount() {
        // ego 0 has neighbors {1, 2} at t=1 and {1..5} at t=2
        let list = el(&[(0, 1, 0.0), (0, 2, 1.0), (0, 3, 1.5), (4, 0, 2.0), (0, 5, 2.0), (0, 6, 3.0)]);
        let inst = build_instances(&list, 1.0, 2.0, 1, GrowthTarget::DegreeOfEgo).unwrap();
        let ego = inst.iter().find(|i| i.origin == 0).unwrap();
        assert_eq!(ego.raw_growth, 3.0);
        assert_eq!(ego.scaled_label, 2.0);
        assert_eq!(ego.graph.node_count(), 3);
    }

    #[test]
    fn cascade_size_growth() {
        // each edge attaches one new node to the cascade rooted at 0
        let list = el(&[(0, 1, 1.0), (1, 2, 2.0), (0, 3, 3.0), (2, 4, 4.0), (4, 5, 5.0), (3, 6, 6.0)]);
        let inst = build_instances(&list, 2.0, 5.0, 100, GrowthTarget::Size).unwrap();
        let root = inst.iter().find(|i| i.origin == 0).unwrap();
        let added = list.edges.iter().filter(|e| e.timestamp > 2.0 && e.timestamp <= 5.0).count();
        assert_eq!(root.raw_growth, added as f64);
    }

    #[test]
    fn absent_nodes_are_skipped() {
        let list = el(&[(0, 1, 1.0), (2, 3, 4.0)]);
        let inst = build_instances(&list, 1.0, 5.0, 2, GrowthTarget::DegreeOfEgo).unwrap();
        assert_eq!(inst.iter().map(|i| i.origin).collect::<Vec<_>>(), vec![0, 1]);
        assert!(build_instances(&list, 2.0, 2.0, 1, GrowthTarget::Size).is_err());
        assert!(build_instances(&list, 0.5, 0.7, 1, GrowthTarget::Size).unwrap().is_empty());
    }

    fn spec() -> SplitSpec {
        SplitSpec {
            fractions: [0.8, 0.05, 0.15],
            seed: 4,
            train: SplitTimes { graph_time: 100.0, growth_time: 150.0 },
            val: SplitTimes { graph_time: 110.0, growth_time: 160.0 },
            test: SplitTimes { graph_time: 120.0, growth_time: 170.0 },
        }
    }

    #[test]
    fn split_is_disjoint_ordered_and_reproducible() {
        let list = generate_preferential_attachment(300, 2, 1).unwrap();
        let a = temporal_split(&list, &spec(), 1, GrowthTarget::DegreeOfEgo).unwrap();
        let b = temporal_split(&list, &spec(), 1, GrowthTarget::DegreeOfEgo).unwrap();
        assert_eq!(a, b);
        verify_split(&a).unwrap();
        let ids = |s: &[LabeledInstance]| s.iter().map(|i| i.origin).collect::<BTreeSet<_>>();
        assert!(ids(&a.train).is_disjoint(&ids(&a.test)));
        assert!(ids(&a.train).is_disjoint(&ids(&a.val)));
        assert!(ids(&a.val).is_disjoint(&ids(&a.test)));
        assert!(!a.train.is_empty() && !a.test.is_empty());
    }

    #[test]
    fn split_rejects_bad_offsets() {
        let list = generate_preferential_attachment(50, 2, 1).unwrap();
        let mut bad = spec();
        bad.test.graph_time = 105.0;
        assert!(matches!(temporal_split(&list, &bad, 1, GrowthTarget::Size), Err(Error::SplitOrder(_))));
        let mut bad = spec();
        bad.val.growth_time = 150.0;
        assert!(bad.validate().is_err());
        let mut bad = spec();
        bad.fractions = [0.5, 0.5, 0.5];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn verify_catches_overlap() {
        let list = generate_preferential_attachment(60, 2, 1).unwrap();
        let mut set = temporal_split(&list, &spec(), 1, GrowthTarget::Size).unwrap();
        let mut dup = set.train[0].clone();
        dup.graph_time = 120.0;
        dup.growth_time = 170.0;
        set.test.push(dup);
        assert!(verify_split(&set).is_err());
    }

    #[test]
    fn single_origin_lands_in_one_split() {
        let list = el(&[(0, 1, 1.0)]);
        let inst = build_instances(&list, 1.0, 2.0, 1, GrowthTarget::Size).unwrap();
        let only0: Vec<_> = inst.into_iter().filter(|i| i.origin == 0).collect();
        let many: Vec<_> = (0..5).map(|k| LabeledInstance { graph_time: k as f64, growth_time: k as f64 + 1.0, ..only0[0].clone() }).collect();
        let set = split_instances(many, [0.8, 0.05, 0.15], 3);
        assert!(Split::ALL.iter().filter(|&&s| !set.get(s).is_empty()).count() == 1);
    }

    fn zero_instances(n: usize) -> Vec<LabeledInstance> {
        let g = Graph::empty(1);
        (0..n)
            .map(|i| LabeledInstance {
                graph: g.clone(),
                raw_growth: if i % 10 == 0 { 1.0 } else { 0.0 },
                scaled_label: 0.0,
                graph_time: 0.0,
                growth_time: 1.0,
                origin: i as u64,
            })
            .collect()
    }

    #[test]
    fn downsampling_extremes() {
        let inst = zero_instances(50);
        assert_eq!(downsample_zero_growth(inst.clone(), 0.0, 1).unwrap(), inst);
        let kept = downsample_zero_growth(inst, 1.0, 1).unwrap();
        assert!(kept.iter().all(|i| i.raw_growth > 0.0));
        assert_eq!(kept.len(), 5);
        assert!(downsample_zero_growth(vec![], 1.5, 1).is_err());
    }

    #[test]
    fn downsampling_is_binomial() {
        let inst: Vec<_> = zero_instances(10_000).into_iter().map(|mut i| { i.raw_growth = 0.0; i }).collect();
        let kept = downsample_zero_growth(inst, 0.5, 77).unwrap().len() as f64;
        // 3 sigma of Binomial(10000, 0.5) is 150
        assert!((kept - 5000.0).abs() <= 150.0, "{kept}");
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn label_file_round_trip() {
        let recs = vec![
            LabelRecord { origin: 7, graph_time: 1.5, growth_time: 2.0, raw_growth: 3.0 },
            LabelRecord { origin: 9, graph_time: 1.0, growth_time: 4.0, raw_growth: 0.0 },
        ];
        let mut buf = Vec::new();
        write_labels(&mut buf, &recs).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), recs);
        assert!(read_labels("1,2,1,0\n".as_bytes()).is_err());
        assert!(read_labels("1,1,2\n".as_bytes()).is_err());
        assert!(read_labels("1,1,2,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn external_labels_build_instances() {
        let list = el(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 5.0)]);
        let recs = [
            LabelRecord { origin: 1, graph_time: 1.0, growth_time: 2.0, raw_growth: 7.0 },
            LabelRecord { origin: 3, graph_time: 1.0, growth_time: 2.0, raw_growth: 1.0 },
        ];
        let inst = instances_from_labels(&list, &recs, 1).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].graph.node_count(), 3);
        assert_eq!(inst[0].scaled_label, 3.0);
    }

    #[test]
    fn stage_seeds_differ() {
        let s: BTreeSet<u64> = (0..100).map(|i| stage_seed(42, i)).collect();
        assert_eq!(s.len(), 100);
        assert_eq!(stage_seed(42, 3), stage_seed(42, 3));
    }
}
