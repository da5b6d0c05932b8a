//! Undirected simple graphs built from temporal edge lists.
//!
//! A [`Graph`] is immutable once built. Snapshots taken from an edge list
//! keep only the nodes that touch at least one retained edge, re-indexed
//! densely in ascending order of their original ids.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Original (external) node identifier.
pub type NodeId = u64;

/// One timestamped edge record, as read from an edge-list file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: f64,
}

impl TemporalEdge {
    pub fn new(src: NodeId, dst: NodeId, timestamp: f64) -> Self {
        Self { src, dst, timestamp }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Canonical `(lo, hi)` pairs, sorted, no duplicates.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    /// `labels[i]` is the original id of dense node `i`, when known.
    labels: Option<Vec<NodeId>>,
}

impl Graph {
    /// Builds a graph on `n` nodes. Self-loops are dropped, duplicate and
    /// reversed pairs merged. Endpoints must be `< n`.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        Ok(Self::from_canonical(n, set.into_iter().collect(), None))
    }

    fn from_canonical(n: usize, edges: Vec<(usize, usize)>, labels: Option<Vec<NodeId>>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Self { n, edges, adjacency, labels }
    }

    /// Snapshot of every record with `timestamp <= snapshot_time`, symmetrized
    /// and binarized, over the nodes that appear in retained edges.
    pub fn from_edge_list(records: &[TemporalEdge], snapshot_time: f64) -> Result<Self> {
        let retained: Vec<&TemporalEdge> = records
            .iter()
            .filter(|e| e.timestamp <= snapshot_time && e.src != e.dst)
            .collect();
        if retained.is_empty() {
            return Err(Error::EmptySnapshot(snapshot_time));
        }
        let ids: BTreeSet<NodeId> = retained.iter().flat_map(|e| [e.src, e.dst]).collect();
        let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut set = BTreeSet::new();
        for e in retained {
            let (a, b) = (index[&e.src], index[&e.dst]);
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self::from_canonical(
            ids.len(),
            set.into_iter().collect(),
            Some(ids.into_iter().collect()),
        ))
    }

    pub fn empty(n: usize) -> Self {
        Self::from_canonical(n, Vec::new(), None)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degree_vector(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn labels(&self) -> Option<&[NodeId]> {
        self.labels.as_deref()
    }

    /// Dense index of an original node id, if the node is present.
    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        match &self.labels {
            Some(labels) => labels.binary_search(&id).ok(),
            None => usize::try_from(id).ok().filter(|&i| i < self.n),
        }
    }

    /// Hop distance from `source` to every node; `None` when unreachable
    /// or farther than `max_hops`.
    pub fn bfs_distances(&self, source: usize, max_hops: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0);
            if max_hops.is_some_and(|k| d >= k) {
                continue;
            }
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Subgraph induced by `nodes`, re-indexed in ascending node order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let remap: std::collections::HashMap<usize, usize> =
            sorted.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut edges = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            for &w in &self.adjacency[v] {
                if v < w {
                    if let Some(&j) = remap.get(&w) {
                        edges.push((i, j));
                    }
                }
            }
        }
        edges.sort_unstable();
        let labels = self
            .labels
            .as_ref()
            .map(|l| sorted.iter().map(|&v| l[v]).collect());
        Graph::from_canonical(sorted.len(), edges, labels)
    }

    /// Induced subgraph on every node within `k` hops of `center`, the
    /// center included.
    pub fn k_hop_ego_net(&self, center: usize, k: usize) -> Result<Graph> {
        if center >= self.n {
            return Err(Error::InvalidArgument(format!(
                "ego center {center} out of range for {} nodes",
                self.n
            )));
        }
        // Frontier expansion touches only the ball, not all n nodes.
        let mut seen = std::collections::HashSet::from([center]);
        let mut nodes = vec![center];
        let mut frontier = vec![center];
        for _ in 0..k {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &self.adjacency[v] {
                    if seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            nodes.extend_from_slice(&next);
            frontier = next;
        }
        Ok(self.induced_subgraph(&nodes))
    }

    /// Relabels node `i` as `perm[i]`. Original-id labels are carried along.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "permutation has length {}, graph has {} nodes",
                perm.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("permutation is not a bijection".into()));
            }
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (pa, pb) = (perm[a], perm[b]);
                (pa.min(pb), pa.max(pb))
            })
            .collect();
        edges.sort_unstable();
        let labels = self.labels.as_ref().map(|l| {
            let mut out = vec![0; self.n];
            for (i, &p) in perm.iter().enumerate() {
                out[p] = l[i];
            }
            out
        });
        Ok(Graph::from_canonical(self.n, edges, labels))
    }

    /// Same topology with original-id labels discarded.
    pub fn unlabeled(&self) -> Graph {
        Graph { labels: None, ..self.clone() }
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut i = 0;
            while i < members.len() {
                let v = members[i];
                i += 1;
                for &w in &self.adjacency[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Inverse of a bijection on `0..n`.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Parses a whitespace-separated `src dst timestamp` edge list. Lines
/// starting with `#` and blank lines are skipped.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Vec<TemporalEdge>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Parse {
            line: lineno + 1,
            message: format!("{what} in {trimmed:?}"),
        };
        let mut fields = trimmed.split_whitespace();
        let src = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad src"))?;
        let dst = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad dst"))?;
        let timestamp: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad timestamp"))?;
        if fields.next().is_some() {
            return Err(bad("trailing fields"));
        }
        if !timestamp.is_finite() {
            return Err(bad("non-finite timestamp"));
        }
        out.push(TemporalEdge { src, dst, timestamp });
    }
    Ok(out)
}

pub fn read_edge_list_file(path: &Path) -> Result<Vec<TemporalEdge>> {
    let file = std::fs::File::open(path)?;
    read_edge_list(std::io::BufReader::new(file))
}

/// Writes records as `src\tdst\ttimestamp`, one per line.
pub fn write_edge_list<W: std::io::Write>(mut w: W, records: &[TemporalEdge]) -> Result<()> {
    for e in records {
        writeln!(w, "{}\t{}\t{}", e.src, e.dst, e.timestamp)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn reverse_pair_merges() {
        let recs = [TemporalEdge::new(0, 1, 1.0), TemporalEdge::new(1, 0, 2.0)];
        let g = Graph::from_edge_list(&recs, 2.0).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn late_edges_filtered() {
        let recs = [TemporalEdge::new(0, 1, 1.0), TemporalEdge::new(1, 2, 3.0)];
        let g = Graph::from_edge_list(&recs, 2.0).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.labels(), Some(&[0, 1][..]));
    }

    #[test]
    fn self_loops_dropped() {
        let recs = [TemporalEdge::new(0, 0, 1.0), TemporalEdge::new(0, 1, 1.0)];
        let g = Graph::from_edge_list(&recs, 1.0).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn empty_snapshot_is_an_error() {
        let recs = [TemporalEdge::new(0, 1, 5.0), TemporalEdge::new(3, 3, 0.0)];
        assert!(matches!(
            Graph::from_edge_list(&recs, 1.0),
            Err(Error::EmptySnapshot(_))
        ));
    }

    #[test]
    fn sparse_ids_are_reindexed_in_sorted_order() {
        let recs = [TemporalEdge::new(900, 17, 0.0), TemporalEdge::new(17, 42, 0.0)];
        let g = Graph::from_edge_list(&recs, 0.0).unwrap();
        assert_eq!(g.labels(), Some(&[17, 42, 900][..]));
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(g.index_of(900), Some(2));
        assert_eq!(g.index_of(5), None);
    }

    #[test]
    fn degrees() {
        let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(k3.degree_vector(), vec![2, 2, 2]);
        assert_eq!(path3().degree_vector(), vec![1, 2, 1]);
        assert_eq!(Graph::empty(3).degree_vector(), vec![0, 0, 0]);
    }

    #[test]
    fn ego_nets_on_path() {
        let g = path3();
        let e1 = g.k_hop_ego_net(0, 1).unwrap();
        assert_eq!(e1.node_count(), 2);
        assert_eq!(e1.edges(), &[(0, 1)]);
        assert_eq!(g.k_hop_ego_net(0, 2).unwrap(), g);
    }

    #[test]
    fn ego_net_of_star_leaf() {
        let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let e = star.k_hop_ego_net(2, 1).unwrap();
        assert_eq!(e.node_count(), 2);
        assert_eq!(e.edge_count(), 1);
    }

    #[test]
    fn ego_net_of_isolated_center() {
        let g = Graph::from_edges(3, [(1, 2)]).unwrap();
        let e = g.k_hop_ego_net(0, 3).unwrap();
        assert_eq!(e.node_count(), 1);
        assert_eq!(e.edge_count(), 0);
        assert!(g.k_hop_ego_net(3, 1).is_err());
    }

    #[test]
    fn permutations() {
        let g = path3();
        assert_eq!(g.permute(&[0, 1, 2]).unwrap(), g);
        let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(k3.permute(&[2, 0, 1]).unwrap(), k3);
        let swapped = g.permute(&[2, 1, 0]).unwrap();
        assert_eq!(swapped.edges(), &[(0, 1), (1, 2)]);
        assert!(g.permute(&[0, 0, 1]).is_err());
        assert!(g.permute(&[0, 1]).is_err());
        assert!(g.permute(&[0, 1, 3]).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let text = "# comment\n1 2 0.5\n2\t3\t1\n\n  # indented comment\n";
        let recs = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(recs, vec![TemporalEdge::new(1, 2, 0.5), TemporalEdge::new(2, 3, 1.0)]);
        assert!(read_edge_list("1 2\n".as_bytes()).is_err());
        assert!(read_edge_list("1 -2 3\n".as_bytes()).is_err());
        assert!(read_edge_list("1 2 inf\n".as_bytes()).is_err());
    }

    #[test]
    fn components() {
        let g = Graph::from_edges(5, [(0, 3), (1, 2)]).unwrap();
        assert_eq!(g.connected_components(), vec![vec![0, 3], vec![1, 2], vec![4]]);
    }
}
