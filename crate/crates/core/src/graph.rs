//! Directed graphs, the edge-list file format, and residue-class partitioning.
//!
//! Vertices are `0..n`. A vertex `v` viewed under partition parameter `k`
//! is the `lambda`-th member of residue class `r`, where `v = lambda * k + r`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A directed edge `(u, v)`.
pub type Edge = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: malformed header, expected `n m`")]
    MalformedHeader { line: usize },
    #[error("line {line}: expected `u v`, found {found:?}")]
    MalformedEdge { line: usize, found: String },
    #[error("line {line}: {token:?} is not a non-negative integer")]
    NotAnInteger { line: usize, token: String },
    #[error("line {line}: endpoint {vertex} out of range for n = {n}")]
    EndpointOutOfRange {
        line: usize,
        vertex: usize,
        n: usize,
    },
    #[error("header announces {expected} edges but {found} were listed")]
    EdgeCountMismatch { expected: usize, found: usize },
    #[error("missing header line")]
    Empty,
    #[error("graph needs at least one vertex")]
    NoVertices,
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("partition parameter k must be at least 1")]
    ZeroPartition,
}

/// Directed graph on vertices `0..n` with a sorted, duplicate-free edge list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl DirectedGraph {
    /// Builds a graph from arbitrary edges. Duplicates are dropped with a warning.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoVertices);
        }
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for &(u, v) in &edges {
            for vertex in [u, v] {
                if vertex >= n {
                    return Err(GraphError::VertexOutOfRange { vertex, n });
                }
            }
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        if edges.len() != before {
            log::warn!("dropped {} duplicate edge(s)", before - edges.len());
        }
        Ok(Self { n, edges })
    }

    /// Graph with `n` vertices and no edges.
    pub fn empty(n: usize) -> Result<Self, GraphError> {
        Self::new(n, [])
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u, v)).is_ok()
    }

    /// Returns a copy with the self-loop `(t, t)` present.
    pub fn add_self_loop(&self, t: usize) -> Result<Self, GraphError> {
        if t >= self.n {
            return Err(GraphError::VertexOutOfRange {
                vertex: t,
                n: self.n,
            });
        }
        let mut edges = self.edges.clone();
        if let Err(pos) = edges.binary_search(&(t, t)) {
            edges.insert(pos, (t, t));
        }
        Ok(Self { n: self.n, edges })
    }

    /// Graph with every edge reversed.
    pub fn transpose(&self) -> Self {
        let mut edges: Vec<Edge> = self.edges.iter().map(|&(u, v)| (v, u)).collect();
        edges.sort_unstable();
        Self { n: self.n, edges }
    }

    /// Out-neighbours of `u`, in increasing order.
    pub fn successors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.edges.partition_point(|&(a, _)| a < u);
        self.edges[start..]
            .iter()
            .take_while(move |&&(a, _)| a == u)
            .map(|&(_, v)| v)
    }

    /// The edges `(u, v)` with `u ≡ i` and `v ≡ j (mod k)`, in lexicographic
    /// order or its exact reverse.
    ///
    /// Panics if `k == 0`.
    pub fn edges_between_residues(
        &self,
        i: usize,
        j: usize,
        k: usize,
        reversed: bool,
    ) -> Box<dyn Iterator<Item = Edge> + '_> {
        assert!(k >= 1, "partition parameter must be positive");
        let keep = move |&&(u, v): &&Edge| u % k == i && v % k == j;
        if reversed {
            Box::new(self.edges.iter().rev().filter(keep).copied())
        } else {
            Box::new(self.edges.iter().filter(keep).copied())
        }
    }

    /// Serializes to the edge-list format. Parsing the output gives back `self`.
    pub fn to_edge_list(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n, self.edges.len())?;
        for (u, v) in &self.edges {
            writeln!(f, "{u} {v}")?;
        }
        Ok(())
    }
}

impl FromStr for DirectedGraph {
    type Err = GraphError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse_graph(text)
    }
}

fn parse_usize(token: &str, line: usize) -> Result<usize, GraphError> {
    token.parse().map_err(|_| GraphError::NotAnInteger {
        line,
        token: token.to_string(),
    })
}

/// Parses the edge-list format: a `n m` header, then `m` lines `u v`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_graph(text: &str) -> Result<DirectedGraph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(idx, line)| (idx + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(GraphError::Empty)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(GraphError::MalformedHeader { line: header_line });
    }
    let n = parse_usize(fields[0], header_line)?;
    let m = parse_usize(fields[1], header_line)?;
    if n == 0 {
        return Err(GraphError::NoVertices);
    }

    let mut edges = Vec::with_capacity(m);
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(GraphError::MalformedEdge {
                line,
                found: text.to_string(),
            });
        }
        let u = parse_usize(fields[0], line)?;
        let v = parse_usize(fields[1], line)?;
        for vertex in [u, v] {
            if vertex >= n {
                return Err(GraphError::EndpointOutOfRange { line, vertex, n });
            }
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(GraphError::EdgeCountMismatch {
            expected: m,
            found: edges.len(),
        });
    }
    DirectedGraph::new(n, edges)
}

/// Position of a vertex inside its residue class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResidueIndex {
    pub k: usize,
    /// Position within the residue class, `⌊v / k⌋`.
    pub lambda: usize,
    /// Residue class, `v mod k`.
    pub residue: usize,
}

impl ResidueIndex {
    pub fn vertex(&self) -> usize {
        self.lambda * self.k + self.residue
    }
}

pub fn residue_decompose(v: usize, k: usize) -> Result<ResidueIndex, GraphError> {
    if k == 0 {
        return Err(GraphError::ZeroPartition);
    }
    Ok(ResidueIndex {
        k,
        lambda: v / k,
        residue: v % k,
    })
}

/// Number of registers a block needs under partition parameter `k`: `⌈n/k⌉`.
pub fn block_len(n: usize, k: usize) -> usize {
    n.div_ceil(k)
}

/// Edges bucketed by `(u mod k, v mod k)`, preserving lexicographic order
/// inside each bucket. Equivalent to [`DirectedGraph::edges_between_residues`]
/// without rescanning the whole edge list per call.
#[derive(Debug, Clone)]
pub struct ResidueEdgeIndex {
    k: usize,
    offsets: Vec<usize>,
    edges: Vec<Edge>,
}

impl ResidueEdgeIndex {
    pub fn new(graph: &DirectedGraph, k: usize) -> Result<Self, GraphError> {
        if k == 0 {
            return Err(GraphError::ZeroPartition);
        }
        let bucket = |&(u, v): &Edge| (u % k) * k + v % k;
        let mut counts = vec![0usize; k * k + 1];
        for e in graph.edges() {
            counts[bucket(e) + 1] += 1;
        }
        for b in 1..counts.len() {
            counts[b] += counts[b - 1];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut edges = vec![(0, 0); graph.edge_count()];
        // Stable scatter: lexicographic order survives within a bucket.
        for e in graph.edges() {
            let b = bucket(e);
            edges[cursor[b]] = *e;
            cursor[b] += 1;
        }
        Ok(Self { k, offsets, edges })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bucket(&self, i: usize, j: usize) -> &[Edge] {
        let b = i * self.k + j;
        &self.edges[self.offsets[b]..self.offsets[b + 1]]
    }
}

/// Small graphs used by the examples, the CLI `verify` command and the tests.
pub mod corpus {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::DirectedGraph;

    pub fn path(n: usize) -> DirectedGraph {
        DirectedGraph::new(n, (1..n).map(|v| (v - 1, v))).expect("valid path")
    }

    pub fn cycle(n: usize) -> DirectedGraph {
        DirectedGraph::new(n, (0..n).map(|v| (v, (v + 1) % n))).expect("valid cycle")
    }

    /// `0→1, 0→2, 1→3, 2→3`.
    pub fn diamond() -> DirectedGraph {
        DirectedGraph::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).expect("valid diamond")
    }

    pub fn complete(n: usize, self_loops: bool) -> DirectedGraph {
        let edges = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .filter(|&(u, v)| self_loops || u != v);
        DirectedGraph::new(n, edges).expect("valid complete digraph")
    }

    /// Directed Erdős–Rényi graph: each ordered pair `u != v` is an edge
    /// independently with probability `p`.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> DirectedGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        DirectedGraph::new(n, edges).expect("valid random digraph")
    }

    /// `count` Erdős–Rényi graphs with `n` drawn uniformly from `n_range`.
    pub fn erdos_renyi_family(
        count: usize,
        n_range: std::ops::RangeInclusive<usize>,
        p: f64,
        seed: u64,
    ) -> Vec<(String, DirectedGraph)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|idx| {
                let n = rng.gen_range(n_range.clone());
                let graph_seed: u64 = rng.gen();
                (format!("er{idx}-n{n}"), erdos_renyi(n, p, graph_seed))
            })
            .collect()
    }

    /// The handcrafted graphs: path, cycle, diamond, complete with and
    /// without self-loops, plus a disconnected pair.
    pub fn bundled() -> Vec<(String, DirectedGraph)> {
        vec![
            ("path3".into(), path(3)),
            ("path6".into(), path(6)),
            ("cycle3".into(), cycle(3)),
            ("cycle5".into(), cycle(5)),
            ("diamond".into(), diamond()),
            ("complete3".into(), complete(3, false)),
            ("complete3-loops".into(), complete(3, true)),
            ("complete4".into(), complete(4, false)),
            ("complete4-loops".into(), complete(4, true)),
            ("isolated2".into(), DirectedGraph::empty(2).expect("n > 0")),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> DirectedGraph {
        corpus::path(3)
    }

    #[test]
    fn parses_path() {
        let g = parse_graph("3 2\n0 1\n1 2\n").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn parses_single_vertex_without_edges() {
        let g = parse_graph("1 0\n").unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn rejects_out_of_range_endpoint() {
        let err = parse_graph("2 1\n0 5\n").unwrap_err();
        assert_eq!(
            err,
            GraphError::EndpointOutOfRange {
                line: 2,
                vertex: 5,
                n: 2
            }
        );
    }

    #[test]
    fn reports_line_numbers() {
        assert_eq!(
            parse_graph("# comment\n3\n").unwrap_err(),
            GraphError::MalformedHeader { line: 2 }
        );
        assert!(matches!(
            parse_graph("3 2\n0 1\n# skip\n1 x\n").unwrap_err(),
            GraphError::NotAnInteger { line: 4, .. }
        ));
        assert!(matches!(
            parse_graph("3 1\n0 1 2\n").unwrap_err(),
            GraphError::MalformedEdge { line: 2, .. }
        ));
        assert_eq!(
            parse_graph("3 2\n0 1\n").unwrap_err(),
            GraphError::EdgeCountMismatch {
                expected: 2,
                found: 1
            }
        );
        assert_eq!(parse_graph("").unwrap_err(), GraphError::Empty);
    }

    #[test]
    fn normalizes_order_and_duplicates() {
        let g = parse_graph("3 3\n1 2\n0 1\n1 2").unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.to_edge_list(), "3 2\n0 1\n1 2\n");
    }

    #[test]
    fn self_loop_insertion() {
        let g = DirectedGraph::new(2, [(0, 1)]).unwrap();
        assert_eq!(g.add_self_loop(1).unwrap().edges(), &[(0, 1), (1, 1)]);

        let looped = DirectedGraph::new(2, [(1, 1)]).unwrap();
        assert_eq!(looped.add_self_loop(1).unwrap(), looped);

        let single = DirectedGraph::empty(1).unwrap();
        assert_eq!(single.add_self_loop(0).unwrap().edges(), &[(0, 0)]);

        assert!(single.add_self_loop(1).is_err());
    }

    #[test]
    fn decomposes_residues() {
        let r = residue_decompose(7, 3).unwrap();
        assert_eq!((r.lambda, r.residue), (2, 1));
        for k in 1..6 {
            let r = residue_decompose(0, k).unwrap();
            assert_eq!((r.lambda, r.residue), (0, 0));
        }
        let r = residue_decompose(5, 1).unwrap();
        assert_eq!((r.lambda, r.residue), (5, 0));
        assert_eq!(residue_decompose(3, 0), Err(GraphError::ZeroPartition));
    }

    #[test]
    fn filters_edges_by_residue() {
        let g = path3();
        assert_eq!(
            g.edges_between_residues(0, 1, 2, false).collect::<Vec<_>>(),
            vec![(0, 1)]
        );
        assert_eq!(
            g.edges_between_residues(0, 0, 1, false).collect::<Vec<_>>(),
            g.edges().to_vec()
        );
        assert_eq!(g.edges_between_residues(1, 1, 2, false).count(), 0);

        let k4 = corpus::complete(4, true);
        let fwd: Vec<_> = k4.edges_between_residues(1, 0, 2, false).collect();
        let mut rev: Vec<_> = k4.edges_between_residues(1, 0, 2, true).collect();
        rev.reverse();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn edge_index_matches_filter() {
        for (_, g) in corpus::bundled() {
            for k in 1..=g.vertex_count() {
                let index = ResidueEdgeIndex::new(&g, k).unwrap();
                for i in 0..k {
                    for j in 0..k {
                        let filtered: Vec<_> = g.edges_between_residues(i, j, k, false).collect();
                        assert_eq!(index.bucket(i, j), filtered.as_slice());
                    }
                }
            }
        }
    }

    #[test]
    fn successors_and_transpose() {
        let g = corpus::diamond();
        assert_eq!(g.successors(0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(g.successors(3).count(), 0);
        assert_eq!(g.transpose().edges(), &[(1, 0), (2, 0), (3, 1), (3, 2)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn graph_strategy() -> impl Strategy<Value = DirectedGraph> {
            (1usize..12).prop_flat_map(|n| {
                proptest::collection::vec((0..n, 0..n), 0..40)
                    .prop_map(move |edges| DirectedGraph::new(n, edges).unwrap())
            })
        }

        proptest! {
            #[test]
            fn decomposition_reconstructs(v in 0usize..10_000, k in 1usize..100) {
                let r = residue_decompose(v, k).unwrap();
                prop_assert!(r.residue < k);
                prop_assert_eq!(r.lambda * k + r.residue, v);
                prop_assert_eq!(r.vertex(), v);
            }

            #[test]
            fn residue_buckets_partition_edges(g in graph_strategy(), k in 1usize..12) {
                let mut all = Vec::new();
                for i in 0..k {
                    for j in 0..k {
                        all.extend(g.edges_between_residues(i, j, k, false));
                    }
                }
                all.sort_unstable();
                prop_assert_eq!(all.as_slice(), g.edges());
            }

            #[test]
            fn serialization_is_stable(g in graph_strategy()) {
                let text = g.to_edge_list();
                let reparsed = parse_graph(&text).unwrap();
                prop_assert_eq!(&reparsed, &g);
                prop_assert_eq!(reparsed.to_edge_list(), text);
            }
        }
    }
}
