//! Immutable undirected graphs stored in compressed sparse row form.
//!
//! Neighbourhoods never contain the node itself; the self term of the
//! neighbourhood `N_i = adj(i) ∪ {i}` is applied analytically by consumers
//! (see [`Graph::degrees`]).

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph with dense node ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    edge_count: usize,
}

impl Graph {
    /// Build a graph from an edge iterator. Edges are symmetrized and
    /// deduplicated; self-edges are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::InvalidInput("graph has no nodes".into()));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok(Self::from_adjacency(adj))
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        let edge_count = targets.len() / 2;
        Graph {
            offsets,
            targets,
            edge_count,
        }
    }

    /// Parse the edge-list text format: one `u v` pair per line, `#` comments,
    /// and an optional `n=<count>` line declaring isolated trailing nodes.
    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        let mut max_id: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("n=") {
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(lineno, format!("bad node count {rest:?}: {e}")))?;
                declared = Some(n);
                continue;
            }
            let mut tokens = line.split_whitespace();
            let (Some(a), Some(b)) = (tokens.next(), tokens.next()) else {
                return Err(parse_err(
                    lineno,
                    format!("expected two node ids, got {line:?}"),
                ));
            };
            if tokens.next().is_some() {
                return Err(parse_err(lineno, format!("trailing tokens in {line:?}")));
            }
            let u = a
                .parse::<usize>()
                .map_err(|e| parse_err(lineno, format!("bad node id {a:?}: {e}")))?;
            let v = b
                .parse::<usize>()
                .map_err(|e| parse_err(lineno, format!("bad node id {b:?}: {e}")))?;
            max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
            edges.push((u, v));
        }
        let implied = max_id.map_or(0, |m| m + 1);
        let n = match declared {
            Some(d) if d < implied => {
                return Err(Error::InvalidInput(format!(
                    "{}: header declares n={d} but node id {} appears",
                    origin.display(),
                    implied - 1
                )))
            }
            Some(d) => d,
            None => implied,
        };
        if n == 0 {
            return Err(Error::InvalidInput(format!(
                "{}: edge list describes an empty graph",
                origin.display()
            )));
        }
        Self::from_edges(n, edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }

    /// Render in the edge-list format, with an `n=` header so isolated
    /// nodes survive a round trip.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbours of `i`, excluding `i` itself.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `d_i = |N_i|` with the node itself counted, so an isolated node has degree 1.
    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i] + 1
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|i| self.degree(i)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.n() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node, n: self.n() })
        }
    }

    /// BFS hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        self.bounded_bfs(source, usize::MAX)
    }

    fn bounded_bfs(&self, source: usize, max_hops: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].unwrap_or(0);
            if dv >= max_hops {
                continue;
            }
            for &w in self.neighbors(v) {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// All nodes within `k` hops of `center`, including `center`.
    pub fn hop_ball(&self, center: usize, k: usize) -> Result<NodeSet> {
        self.check_node(center)?;
        let members = self
            .bounded_bfs(center, k)
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|_| i))
            .collect();
        Ok(NodeSet { members })
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Relabel nodes: old node `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::Shape(format!(
                "permutation has length {} for {} nodes",
                perm.len(),
                self.n()
            )));
        }
        Self::from_edges(self.n(), self.edges().map(|(u, v)| (perm[u], perm[v])))
    }
}

/// Sorted set of distinct node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSet {
    members: Vec<usize>,
}

impl NodeSet {
    pub fn empty() -> Self {
        NodeSet::default()
    }

    /// Build a set over a graph of `n` nodes, sorting and rejecting
    /// duplicates or out-of-range ids.
    pub fn new(mut ids: Vec<usize>, n: usize) -> Result<Self> {
        ids.sort_unstable();
        if let Some(&node) = ids.iter().find(|&&id| id >= n) {
            return Err(Error::NodeOutOfRange { node, n });
        }
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate node id in set".into()));
        }
        Ok(NodeSet { members: ids })
    }

    /// Sorts and deduplicates without a range check.
    pub fn from_iter_unchecked<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        let mut members: Vec<usize> = ids.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        NodeSet { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.members
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.members.last() {
            Some(&node) if node >= n => Err(Error::NodeOutOfRange { node, n }),
            _ => Ok(()),
        }
    }
}

impl From<NodeSet> for Vec<usize> {
    fn from(s: NodeSet) -> Self {
        s.members
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Graph;

    pub fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    /// Star with centre 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).unwrap()
    }

    pub fn complete(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn parse(text: &str) -> Result<Graph> {
        Graph::parse_edge_list(text, &PathBuf::from("mem"))
    }

    #[test]
    fn path_from_text() {
        let g = parse("0 1\n1 2").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = parse("0 1\n1 0\n0 1").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn comments_self_loops_and_header() {
        let g = parse("# citation graph\nn=5\n0 0\n0 1 \n\n3 1\n").unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(4), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("0 1\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            parse("0 1\n7\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("0 1 2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_graph_rejected() {
        assert!(parse("# nothing\n").is_err());
        assert!(parse("n=0\n").is_err());
        assert!(Graph::from_edges(0, []).is_err());
    }

    #[test]
    fn header_smaller_than_ids_rejected() {
        assert!(parse("n=2\n0 5\n").is_err());
    }

    #[test]
    fn degrees_include_self() {
        let iso = Graph::from_edges(1, []).unwrap();
        assert_eq!(iso.degrees(), vec![1]);
        assert_eq!(complete(3).degrees(), vec![3, 3, 3]);
        assert_eq!(star(3).degrees(), vec![4, 2, 2, 2]);
    }

    #[test]
    fn hop_balls() {
        let s = star(3);
        assert_eq!(s.hop_ball(2, 0).unwrap().as_slice(), &[2]);
        assert_eq!(s.hop_ball(1, 1).unwrap().as_slice(), &[0, 1]);
        assert_eq!(path(4).hop_ball(0, 2).unwrap().as_slice(), &[0, 1, 2]);
        assert!(matches!(
            s.hop_ball(9, 1),
            Err(Error::NodeOutOfRange { node: 9, n: 4 })
        ));
    }

    #[test]
    fn edge_list_round_trip_keeps_isolated_nodes() {
        let g = Graph::from_edges(6, [(0, 1), (2, 3)]).unwrap();
        let back = parse(&g.to_edge_list()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn node_set_validation() {
        assert_eq!(NodeSet::new(vec![3, 1], 4).unwrap().as_slice(), &[1, 3]);
        assert!(NodeSet::new(vec![1, 1], 4).is_err());
        assert!(NodeSet::new(vec![4], 4).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..40).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..3 * n)
                .prop_map(move |edges| Graph::from_edges(n, edges).unwrap())
        })
    }

    proptest! {
        #[test]
        fn handshake_and_symmetry(g in arb_graph()) {
            let total: usize = g.degrees().iter().map(|d| d - 1).sum();
            prop_assert_eq!(total, 2 * g.edge_count());
            for u in 0..g.n() {
                prop_assert!(!g.has_edge(u, u));
                for &v in g.neighbors(u) {
                    prop_assert!(g.has_edge(v, u));
                }
            }
        }

        #[test]
        fn hop_balls_nest(g in arb_graph(), c in 0usize..40, k in 0usize..5) {
            let c = c % g.n();
            let inner = g.hop_ball(c, k).unwrap();
            let outer = g.hop_ball(c, k + 1).unwrap();
            prop_assert!(inner.contains(c));
            prop_assert!(inner.is_subset(&outer));
        }

        #[test]
        fn degrees_follow_relabeling(g in arb_graph(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut perm: Vec<usize> = (0..g.n()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let h = g.relabel(&perm).unwrap();
            let (dg, dh) = (g.degrees(), h.degrees());
            for i in 0..g.n() {
                prop_assert_eq!(dg[i], dh[perm[i]]);
            }
        }
    }
}
