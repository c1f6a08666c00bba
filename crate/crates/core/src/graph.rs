//! Graph construction and Laplacian assembly.
//!
//! The central family is the layered multipartite graph: vertices split into
//! k ordered parts, with every vertex of part i adjacent to every vertex of
//! parts i-1 and i+1 and to nothing else. Vertices are numbered part by part,
//! ascending part index, ascending within each part; the reduction pipeline
//! indexes its transform matrices against exactly this ordering.

use crate::matrix::IntMatrix;
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("a layered spec needs at least 2 parts, got {0}")]
    TooFewParts(usize),
    #[error("part {0} is empty; every part needs at least one vertex")]
    EmptyPart(usize),
    #[error("could not parse spec {input:?}: {reason}")]
    BadSpec { input: String, reason: String },
    #[error("vertex {v} out of range for a graph on {n} vertices")]
    VertexOutOfRange { v: usize, n: usize },
    #[error("self-loop at vertex {0} is not allowed")]
    SelfLoop(usize),
    #[error("a graph needs at least one vertex")]
    NoVertices,
    #[error("a cycle needs at least 3 vertices, got {0}")]
    CycleTooShort(usize),
}

/// Part sizes (n_1, ..., n_k) of a layered multipartite graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayeredSpec {
    parts: Vec<u64>,
}

impl LayeredSpec {
    /// At least two parts, every part nonempty.
    pub fn new(parts: Vec<u64>) -> Result<Self, GraphError> {
        if parts.len() < 2 {
            return Err(GraphError::TooFewParts(parts.len()));
        }
        if let Some(i) = parts.iter().position(|&n| n == 0) {
            return Err(GraphError::EmptyPart(i + 1));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[u64] {
        &self.parts
    }

    /// Number of parts.
    pub fn k(&self) -> usize {
        self.parts.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.parts.iter().map(|&n| n as usize).sum()
    }

    /// Index of the first vertex of part `i` (0-based part index).
    pub fn part_offset(&self, i: usize) -> usize {
        self.parts[..i].iter().map(|&n| n as usize).sum()
    }

    /// Part size as usize, for indexing.
    pub fn part_len(&self, i: usize) -> usize {
        self.parts[i] as usize
    }

    /// Common degree of every vertex in part `i` (0-based): the size of the
    /// neighboring part for the outer parts, the sum of both neighbors'
    /// sizes otherwise.
    pub fn degree_constant(&self, i: usize) -> u64 {
        let k = self.k();
        assert!(i < k, "part index {i} out of range for {k} parts");
        if i == 0 {
            self.parts[1]
        } else if i == k - 1 {
            self.parts[k - 2]
        } else {
            self.parts[i - 1] + self.parts[i + 1]
        }
    }

    /// Parts adjacent to part `i`: i-1 and i+1 where they exist.
    pub fn adjacent_parts(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2);
        if i > 0 {
            out.push(i - 1);
        }
        if i + 1 < self.k() {
            out.push(i + 1);
        }
        out
    }
}

impl fmt::Display for LayeredSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let strs: Vec<String> = self.parts.iter().map(u64::to_string).collect();
        write!(f, "{}", strs.join(","))
    }
}

impl FromStr for LayeredSpec {
    type Err = GraphError;

    /// Comma-separated positive decimals, no whitespace: "2,3,4".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| GraphError::BadSpec {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let mut parts = Vec::new();
        for piece in s.split(',') {
            let n: u64 = piece
                .parse()
                .map_err(|_| bad(&format!("{piece:?} is not a positive integer")))?;
            if n == 0 {
                return Err(bad("part sizes must be at least 1"));
            }
            parts.push(n);
        }
        if parts.len() < 2 {
            return Err(bad("need at least 2 comma-separated part sizes"));
        }
        LayeredSpec::new(parts)
    }
}

/// Simple undirected graph. Edges are stored as ordered pairs (a < b).
/// `part_of` is set for graphs built from a [`LayeredSpec`] and drives
/// DOT clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
    part_of: Option<Vec<usize>>,
}

impl Graph {
    pub fn new(vertex_count: usize) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::NoVertices);
        }
        Ok(Self {
            vertex_count,
            edges: BTreeSet::new(),
            part_of: None,
        })
    }

    pub fn from_edges(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(vertex_count)?;
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    /// Inserts an undirected edge; duplicates are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        for v in [a, b] {
            if v >= self.vertex_count {
                return Err(GraphError::VertexOutOfRange {
                    v,
                    n: self.vertex_count,
                });
            }
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Part index per vertex, when the graph was built from a layered spec.
    pub fn part_of(&self) -> Option<&[usize]> {
        self.part_of.as_deref()
    }

    /// Degree matrix minus adjacency matrix. Symmetric, zero row sums.
    pub fn laplacian(&self) -> IntMatrix {
        let n = self.vertex_count;
        let mut degrees = vec![0i64; n];
        for &(a, b) in &self.edges {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        IntMatrix::from_fn(n, n, |i, j| {
            if i == j {
                BigInt::from(degrees[i])
            } else if self.edges.contains(&(i.min(j), i.max(j))) {
                BigInt::from(-1)
            } else {
                BigInt::from(0)
            }
        })
        .expect("vertex count is positive")
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut found = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    found += 1;
                    stack.push(w);
                }
            }
        }
        found == n
    }

    /// DOT source. Layered graphs render one cluster per part with vertices
    /// named p{part}_v{index} (1-based); plain graphs use v{index}.
    pub fn to_dot(&self) -> String {
        let name = |v: usize| -> String {
            match &self.part_of {
                Some(parts) => {
                    let p = parts[v];
                    let within = parts[..v].iter().filter(|&&q| q == p).count();
                    format!("p{}_v{}", p + 1, within + 1)
                }
                None => format!("v{v}"),
            }
        };
        let mut out = String::from("graph {\n");
        if let Some(parts) = &self.part_of {
            let k = parts.iter().copied().max().unwrap_or(0) + 1;
            for p in 0..k {
                out.push_str(&format!("  subgraph cluster_p{} {{\n", p + 1));
                out.push_str(&format!("    label=\"part {}\";\n", p + 1));
                for (v, &part) in parts.iter().enumerate() {
                    if part == p {
                        out.push_str(&format!("    {};\n", name(v)));
                    }
                }
                out.push_str("  }\n");
            }
        } else {
            for v in 0..self.vertex_count {
                out.push_str(&format!("  {};\n", name(v)));
            }
        }
        for &(a, b) in &self.edges {
            out.push_str(&format!("  {} -- {};\n", name(a), name(b)));
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the layered multipartite graph of a spec: all edges between
/// consecutive parts, none inside a part, none skipping a part.
pub fn layered_kpartite(spec: &LayeredSpec) -> Graph {
    let n = spec.vertex_count();
    let mut g = Graph::new(n).expect("spec has at least two nonempty parts");
    let mut part_of = vec![0usize; n];
    for i in 0..spec.k() {
        let off = spec.part_offset(i);
        part_of[off..off + spec.part_len(i)].fill(i);
    }
    for i in 0..spec.k() - 1 {
        let (a0, a1) = (spec.part_offset(i), spec.part_offset(i) + spec.part_len(i));
        let (b0, b1) = (
            spec.part_offset(i + 1),
            spec.part_offset(i + 1) + spec.part_len(i + 1),
        );
        for a in a0..a1 {
            for b in b0..b1 {
                g.add_edge(a, b).expect("indices in range, distinct parts");
            }
        }
    }
    g.part_of = Some(part_of);
    g
}

/// Assembles the layered Laplacian directly from its block pattern:
/// diagonal blocks are the part's common degree times the identity,
/// blocks between consecutive parts are all -1, all else zero.
/// Equals `layered_kpartite(spec).laplacian()` entrywise.
pub fn layered_laplacian_direct(spec: &LayeredSpec) -> IntMatrix {
    let n = spec.vertex_count();
    let mut part_of = vec![0usize; n];
    for i in 0..spec.k() {
        let off = spec.part_offset(i);
        part_of[off..off + spec.part_len(i)].fill(i);
    }
    IntMatrix::from_fn(n, n, |r, c| {
        let (pi, pj) = (part_of[r], part_of[c]);
        if r == c {
            BigInt::from(spec.degree_constant(pi))
        } else if pi.abs_diff(pj) == 1 {
            BigInt::from(-1)
        } else {
            BigInt::from(0)
        }
    })
    .expect("spec has at least two vertices")
}

/// Fixture families used by the verification oracles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StandardFamily {
    Cycle(usize),
    Complete(usize),
    CompleteBipartite(usize, usize),
    Path(usize),
    /// Uniform random labeled tree, decoded from a seeded random sequence.
    RandomTree {
        vertices: usize,
        seed: u64,
    },
}

pub fn standard_family(family: &StandardFamily) -> Result<Graph, GraphError> {
    match *family {
        StandardFamily::Cycle(n) => {
            if n < 3 {
                return Err(GraphError::CycleTooShort(n));
            }
            Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
        }
        StandardFamily::Complete(n) => {
            let mut g = Graph::new(n)?;
            for a in 0..n {
                for b in a + 1..n {
                    g.add_edge(a, b)?;
                }
            }
            Ok(g)
        }
        StandardFamily::CompleteBipartite(a, b) => {
            let spec = LayeredSpec::new(vec![a as u64, b as u64])?;
            Ok(layered_kpartite(&spec))
        }
        StandardFamily::Path(n) => Graph::from_edges(n, (1..n).map(|i| (i - 1, i))),
        StandardFamily::RandomTree { vertices, seed } => random_tree(vertices, seed),
    }
}

/// Uniform random labeled tree on `vertices` nodes, reproducible per seed.
/// Decodes a random code sequence of length n-2 into a tree edge set.
pub fn random_tree(vertices: usize, seed: u64) -> Result<Graph, GraphError> {
    let n = vertices;
    let mut g = Graph::new(n)?;
    if n == 1 {
        return Ok(g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 2 {
        g.add_edge(0, 1)?;
        return Ok(g);
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    // Walk the code, always attaching the smallest remaining leaf.
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    for &c in &code {
        let leaf = *leaves.iter().next().expect("a leaf always remains");
        leaves.remove(&leaf);
        g.add_edge(leaf, c)?;
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let mut last = leaves.into_iter();
    let (u, v) = (last.next().unwrap(), last.next().unwrap());
    g.add_edge(u, v)?;
    Ok(g)
}

/// Random connected simple graph: a random tree plus `extra_edges` distinct
/// non-tree edges (fewer when the graph saturates). Used by oracle fixtures.
pub fn random_connected_graph(
    vertices: usize,
    extra_edges: usize,
    seed: u64,
) -> Result<Graph, GraphError> {
    let mut g = random_tree(vertices, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut candidates: Vec<(usize, usize)> = (0..vertices)
        .flat_map(|a| (a + 1..vertices).map(move |b| (a, b)))
        .filter(|&(a, b)| !g.has_edge(a, b))
        .collect();
    candidates.shuffle(&mut rng);
    for (a, b) in candidates.into_iter().take(extra_edges) {
        g.add_edge(a, b)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn spec(parts: &[u64]) -> LayeredSpec {
        LayeredSpec::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn spec_validation_and_parsing() {
        assert_eq!(LayeredSpec::new(vec![3]), Err(GraphError::TooFewParts(1)));
        assert_eq!(
            LayeredSpec::new(vec![2, 0, 2]),
            Err(GraphError::EmptyPart(2))
        );
        let s: LayeredSpec = "2,3,4".parse().unwrap();
        assert_eq!(s.parts(), &[2, 3, 4]);
        assert_eq!(s.to_string(), "2,3,4");
        assert!("".parse::<LayeredSpec>().is_err());
        assert!("5".parse::<LayeredSpec>().is_err());
        assert!("2,,3".parse::<LayeredSpec>().is_err());
        assert!("2, 3".parse::<LayeredSpec>().is_err());
        assert!("0,2".parse::<LayeredSpec>().is_err());
        assert!("2,-3".parse::<LayeredSpec>().is_err());
    }

    #[test]
    fn degree_constants() {
        let s = spec(&[6, 4, 5, 3, 4]);
        assert_eq!(s.degree_constant(0), 4);
        assert_eq!(s.degree_constant(2), 7);
        assert_eq!(s.degree_constant(4), 3);
        let t = spec(&[2, 2]);
        assert_eq!(t.degree_constant(0), 2);
        for a in 1..5u64 {
            for b in 1..5u64 {
                assert_eq!(spec(&[a, b]).degree_constant(1), a);
            }
        }
    }

    #[test]
    fn layered_counts() {
        let g = layered_kpartite(&spec(&[2, 2]));
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 4));
        // the 4-cycle in disguise: both degree-2 and connected
        assert!((0..4).all(|v| g.degree(v) == 2));
        assert!(g.is_connected());

        let g = layered_kpartite(&spec(&[6, 4, 5, 3, 4]));
        assert_eq!((g.vertex_count(), g.edge_count()), (22, 71));

        let g = layered_kpartite(&spec(&[3, 3]));
        assert_eq!(g.edge_count(), 9);
    }

    #[test]
    fn layered_edges_respect_layers() {
        let s = spec(&[2, 3, 2, 2]);
        let g = layered_kpartite(&s);
        let parts = g.part_of().unwrap();
        for (a, b) in g.edges() {
            assert_eq!(
                parts[a].abs_diff(parts[b]),
                1,
                "edge {a}-{b} skips or stays"
            );
        }
        // every consecutive-part pair is fully joined
        for i in 0..s.k() - 1 {
            let expect = s.part_len(i) * s.part_len(i + 1);
            let got = g
                .edges()
                .filter(|&(a, b)| parts[a].min(parts[b]) == i)
                .count();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn laplacian_matches_direct_form() {
        let four = layered_kpartite(&spec(&[2, 2])).laplacian();
        let want = IntMatrix::from_i64_rows(&[
            vec![2, 0, -1, -1],
            vec![0, 2, -1, -1],
            vec![-1, -1, 2, 0],
            vec![-1, -1, 0, 2],
        ])
        .unwrap();
        assert_eq!(four, want);
        assert_eq!(layered_laplacian_direct(&spec(&[2, 2])), want);

        let s = spec(&[1, 1]);
        let want = IntMatrix::from_i64_rows(&[vec![1, -1], vec![-1, 1]]).unwrap();
        assert_eq!(layered_laplacian_direct(&s), want);
        assert_eq!(layered_kpartite(&s).laplacian(), want);

        let s = spec(&[2, 3, 2]);
        let direct = layered_laplacian_direct(&s);
        let diag: Vec<i64> = (0..7)
            .map(|i| i64::try_from(direct.at(i, i).clone()).unwrap())
            .collect();
        assert_eq!(diag, vec![3, 3, 4, 4, 4, 3, 3]);
        assert_eq!(direct, layered_kpartite(&s).laplacian());
    }

    #[test]
    fn builders_agree_on_a_sweep() {
        // all specs with k in 2..=4, sizes in 1..=3, plus two taller cases
        let mut specs = Vec::new();
        for a in 1..=3u64 {
            for b in 1..=3u64 {
                specs.push(vec![a, b]);
                for c in 1..=3u64 {
                    specs.push(vec![a, b, c]);
                    for d in 1..=3u64 {
                        specs.push(vec![a, b, c, d]);
                    }
                }
            }
        }
        specs.push(vec![2, 1, 3, 1, 2]);
        specs.push(vec![1, 2, 1, 2, 1, 2]);
        for parts in specs {
            let s = spec(&parts);
            assert_eq!(
                layered_kpartite(&s).laplacian(),
                layered_laplacian_direct(&s),
                "spec {s}"
            );
        }
    }

    #[test]
    fn laplacian_row_sums_vanish() {
        let graphs = vec![
            layered_kpartite(&spec(&[2, 3, 2])),
            standard_family(&StandardFamily::Cycle(5)).unwrap(),
            standard_family(&StandardFamily::Complete(4)).unwrap(),
            random_tree(8, 42).unwrap(),
        ];
        for g in graphs {
            let l = g.laplacian();
            for i in 0..l.rows() {
                let sum: BigInt = (0..l.cols()).map(|j| l.at(i, j).clone()).sum();
                assert!(sum.is_zero());
            }
            // symmetry
            assert_eq!(l, l.transpose());
        }
    }

    #[test]
    fn standard_families() {
        let c4 = standard_family(&StandardFamily::Cycle(4)).unwrap();
        assert_eq!(c4.edge_count(), 4);
        assert!((0..4).all(|v| c4.degree(v) == 2));
        assert_eq!(
            standard_family(&StandardFamily::Cycle(2)),
            Err(GraphError::CycleTooShort(2))
        );

        let k4 = standard_family(&StandardFamily::Complete(4)).unwrap();
        assert_eq!(k4.edge_count(), 6);

        let b = standard_family(&StandardFamily::CompleteBipartite(2, 3)).unwrap();
        assert_eq!(b, layered_kpartite(&spec(&[2, 3])));

        let p = standard_family(&StandardFamily::Path(4)).unwrap();
        assert_eq!(p.edge_count(), 3);
        assert_eq!(p.degree(0), 1);
        assert_eq!(p.degree(1), 2);
    }

    #[test]
    fn random_trees_are_reproducible_trees() {
        for n in [1usize, 2, 3, 8, 15] {
            for seed in [0u64, 1, 42] {
                let t = random_tree(n, seed).unwrap();
                assert_eq!(t.edge_count(), n - 1, "n={n} seed={seed}");
                assert!(t.is_connected());
                assert_eq!(t, random_tree(n, seed).unwrap());
            }
        }
        let a = random_tree(12, 1).unwrap();
        let b = random_tree(12, 2).unwrap();
        assert_ne!(a, b, "different seeds should give different trees");
    }

    #[test]
    fn random_connected_graph_adds_edges() {
        let g = random_connected_graph(8, 5, 7).unwrap();
        assert_eq!(g.edge_count(), 12);
        assert!(g.is_connected());
        // saturates at the complete graph
        let g = random_connected_graph(4, 100, 7).unwrap();
        assert_eq!(g.edge_count(), 6);
    }

    #[test]
    fn edge_validation() {
        let mut g = Graph::new(3).unwrap();
        assert_eq!(g.add_edge(1, 1), Err(GraphError::SelfLoop(1)));
        assert_eq!(
            g.add_edge(0, 3),
            Err(GraphError::VertexOutOfRange { v: 3, n: 3 })
        );
        g.add_edge(2, 0).unwrap();
        g.add_edge(0, 2).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(0, 2) && g.has_edge(2, 0));
        assert_eq!(g.neighbors(0), vec![2]);
        assert!(!g.is_connected());
    }

    #[test]
    fn dot_output_shape() {
        let g = layered_kpartite(&spec(&[2, 2]));
        let dot = g.to_dot();
        assert!(dot.starts_with("graph {"));
        assert!(dot.contains("subgraph cluster_p1"));
        assert!(dot.contains("subgraph cluster_p2"));
        assert!(dot.contains("p1_v1 -- p2_v1;"));
        assert!(dot.contains("p1_v2 -- p2_v2;"));
        assert_eq!(dot.matches(" -- ").count(), 4);

        let path = standard_family(&StandardFamily::Path(3)).unwrap();
        let dot = path.to_dot();
        assert!(dot.contains("v0 -- v1;"));
        assert!(!dot.contains("cluster"));
    }
}
