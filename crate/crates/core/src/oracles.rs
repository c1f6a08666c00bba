//! Independent cross-checks for the main computation.
//!
//! Each oracle reaches the spanning-tree count or the sandpile group by a
//! route that shares no code with the Smith-normal-form engine: exhaustive
//! edge-subset enumeration, a single reduced determinant, floating-point
//! eigenvalues, and a chip-firing simulation. Tests play these against each
//! other and against the exact computation; the eigenvalue route is
//! advisory only (floating point), the rest are exact.

use crate::graph::Graph;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("graph has {edges} edges; exhaustive enumeration is capped at {limit}")]
    TooManyEdges { edges: usize, limit: usize },
    #[error("graph has {vertices} vertices; eigenvalue iteration is capped at {limit}")]
    TooManyVertices { vertices: usize, limit: usize },
    #[error("chip counting needs {want} entries (one per vertex), got {got}")]
    WrongLength { want: usize, got: usize },
    #[error("vertex {vertex} is out of range for a graph on {vertices} vertices")]
    VertexOutOfRange { vertex: usize, vertices: usize },
    #[error("chip firing needs a connected graph")]
    Disconnected,
    #[error("more than {limit} recurrent configurations; the walk is capped there")]
    TooManyRecurrentStates { limit: usize },
}

const EDGE_LIMIT: usize = 24;
const VERTEX_LIMIT: usize = 64;
const RECURRENT_LIMIT: usize = 5000;

// ---------------------------------------------------------------------------
// spanning trees, three independent ways
// ---------------------------------------------------------------------------

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns false when the two were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Counts spanning trees by trying every edge subset of the right size.
/// Exponential; refuses graphs with more than 24 edges.
pub fn spanning_trees_bruteforce(g: &Graph) -> Result<BigInt, OracleError> {
    let n = g.vertex_count();
    let m = g.edge_count();
    if m > EDGE_LIMIT {
        return Err(OracleError::TooManyEdges {
            edges: m,
            limit: EDGE_LIMIT,
        });
    }
    if n == 1 {
        return Ok(BigInt::one());
    }
    let need = n - 1;
    if need > m {
        return Ok(BigInt::zero());
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut count = BigInt::zero();
    // lexicographic combinations of `need` edge indices out of m
    let mut pick: Vec<usize> = (0..need).collect();
    loop {
        let mut uf = UnionFind::new(n);
        let mut acyclic = true;
        for &e in &pick {
            let (a, b) = edges[e];
            if !uf.union(a, b) {
                acyclic = false;
                break;
            }
        }
        // n-1 edges and no cycle means connected, hence a spanning tree
        if acyclic {
            count += 1;
        }
        let mut i = need;
        loop {
            if i == 0 {
                return Ok(count);
            }
            i -= 1;
            if pick[i] != i + m - need {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..need {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Counts spanning trees as the determinant of the Laplacian with one
/// vertex's row and column deleted. Exact; any vertex gives the same count.
pub fn spanning_trees_matrixtree(g: &Graph) -> BigInt {
    spanning_trees_matrixtree_at(g, 0).expect("vertex 0 exists")
}

/// Same count with the deleted vertex chosen explicitly.
pub fn spanning_trees_matrixtree_at(g: &Graph, v: usize) -> Result<BigInt, OracleError> {
    let n = g.vertex_count();
    if v >= n {
        return Err(OracleError::VertexOutOfRange {
            vertex: v,
            vertices: n,
        });
    }
    if n == 1 {
        return Ok(BigInt::one());
    }
    let reduced = g
        .laplacian()
        .delete_row_col(v, v)
        .expect("n >= 2 leaves a nonempty minor");
    Ok(reduced.det().expect("square matrix"))
}

/// Jacobi eigenvalue iteration for a symmetric matrix given as f64 rows.
#[allow(clippy::needless_range_loop)] // plane rotations read clearest with indices
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 1 {
        return vec![a[0][0]];
    }
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|x| x.abs()))
        .fold(1.0_f64, f64::max);
    for _ in 0..200 * n * n {
        let (mut p, mut q, mut biggest) = (0, 1, 0.0_f64);
        for i in 0..n {
            for j in i + 1..n {
                if a[i][j].abs() > biggest {
                    biggest = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if biggest <= 1e-13 * scale {
            break;
        }
        let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for i in 0..n {
            let (aip, aiq) = (a[i][p], a[i][q]);
            a[i][p] = c * aip - s * aiq;
            a[i][q] = s * aip + c * aiq;
        }
        for i in 0..n {
            let (api, aqi) = (a[p][i], a[q][i]);
            a[p][i] = c * api - s * aqi;
            a[q][i] = s * api + c * aqi;
        }
    }
    let mut eigen: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigen.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eigen
}

/// Estimates the spanning-tree count as the product of the nonzero
/// Laplacian eigenvalues divided by the vertex count. Floating point, so
/// advisory: callers compare against an exact count with a relative
/// tolerance. Capped at 64 vertices.
pub fn spectral_tree_estimate(g: &Graph) -> Result<f64, OracleError> {
    let n = g.vertex_count();
    if n > VERTEX_LIMIT {
        return Err(OracleError::TooManyVertices {
            vertices: n,
            limit: VERTEX_LIMIT,
        });
    }
    if n == 1 {
        return Ok(1.0);
    }
    let lap = g.laplacian();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| lap.at(i, j).to_f64().expect("small integer entries"))
                .collect()
        })
        .collect();
    let eigen = jacobi_eigenvalues(rows);
    // the smallest eigenvalue of a Laplacian is 0; skip it
    let product: f64 = eigen.iter().skip(1).product();
    Ok(product / n as f64)
}

// ---------------------------------------------------------------------------
// chip firing
// ---------------------------------------------------------------------------

/// Which way the stabilizer scans for an over-full vertex. The final stable
/// configuration is the same either way; tests rely on that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanOrder {
    Ascending,
    Descending,
}

/// Outcome of firing a chip configuration down to stability: the stable
/// chip counts and how many times each vertex fired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stabilization {
    pub stable: Vec<u64>,
    pub firings: Vec<u64>,
}

fn check_firing_input(g: &Graph, chips: &[u64], sink: usize) -> Result<(), OracleError> {
    let n = g.vertex_count();
    if chips.len() != n {
        return Err(OracleError::WrongLength {
            want: n,
            got: chips.len(),
        });
    }
    if sink >= n {
        return Err(OracleError::VertexOutOfRange {
            vertex: sink,
            vertices: n,
        });
    }
    if !g.is_connected() {
        return Err(OracleError::Disconnected);
    }
    Ok(())
}

/// Fires over-full vertices (chips >= degree) until every non-sink vertex
/// is stable. The sink absorbs chips and never fires; connectivity to the
/// sink guarantees termination.
pub fn stabilize(g: &Graph, chips: &[u64], sink: usize) -> Result<Stabilization, OracleError> {
    stabilize_scanning(g, chips, sink, ScanOrder::Ascending)
}

/// [`stabilize`] with an explicit scan direction.
pub fn stabilize_scanning(
    g: &Graph,
    chips: &[u64],
    sink: usize,
    order: ScanOrder,
) -> Result<Stabilization, OracleError> {
    check_firing_input(g, chips, sink)?;
    let n = g.vertex_count();
    let mut stable = chips.to_vec();
    let mut firings = vec![0u64; n];
    loop {
        let mut any = false;
        let scan: Box<dyn Iterator<Item = usize>> = match order {
            ScanOrder::Ascending => Box::new(0..n),
            ScanOrder::Descending => Box::new((0..n).rev()),
        };
        for v in scan {
            let degree = g.degree(v) as u64;
            if v == sink || degree == 0 {
                continue;
            }
            while stable[v] >= degree {
                stable[v] -= degree;
                firings[v] += 1;
                for u in g.neighbors(v) {
                    stable[u] += 1;
                }
                any = true;
            }
        }
        if !any {
            return Ok(Stabilization { stable, firings });
        }
    }
}

/// Burning test for recurrence: start a fire at the sink and let a vertex
/// catch once its chips plus its burnt neighbors reach its degree (that is,
/// firing every burnt neighbor would topple it). A stable configuration is
/// recurrent exactly when the whole graph burns. Unstable configurations
/// are never recurrent.
pub fn is_recurrent(g: &Graph, chips: &[u64], sink: usize) -> Result<bool, OracleError> {
    check_firing_input(g, chips, sink)?;
    let n = g.vertex_count();
    for (v, &c) in chips.iter().enumerate() {
        if v != sink && c >= g.degree(v) as u64 {
            return Ok(false);
        }
    }
    let mut burnt = vec![false; n];
    burnt[sink] = true;
    loop {
        let mut progress = false;
        for v in 0..n {
            if burnt[v] {
                continue;
            }
            let burnt_neighbors = g.neighbors(v).iter().filter(|&&u| burnt[u]).count() as u64;
            if chips[v] + burnt_neighbors >= g.degree(v) as u64 {
                burnt[v] = true;
                progress = true;
            }
        }
        if !progress {
            return Ok(burnt.iter().all(|&b| b));
        }
    }
}

/// Order of the sandpile group at the given sink. Starts at the maximal
/// stable configuration (always recurrent) and closes the recurrent set
/// under "drop one chip, stabilize" — adding chips keeps a configuration
/// recurrent, and single-chip drops reach every class, so the walk visits
/// each recurrent configuration exactly once. The count is independent of
/// the sink and equals the spanning-tree count. Capped at 5000 states.
pub fn sandpile_group_order(g: &Graph, sink: usize) -> Result<BigInt, OracleError> {
    let n = g.vertex_count();
    if sink >= n {
        return Err(OracleError::VertexOutOfRange {
            vertex: sink,
            vertices: n,
        });
    }
    if !g.is_connected() {
        return Err(OracleError::Disconnected);
    }
    if n == 1 {
        return Ok(BigInt::one());
    }
    let start: Vec<u64> = (0..n)
        .map(|v| if v == sink { 0 } else { g.degree(v) as u64 - 1 })
        .collect();
    debug_assert!(is_recurrent(g, &start, sink) == Ok(true));

    let mut seen = std::collections::BTreeSet::new();
    seen.insert(start.clone());
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(config) = queue.pop_front() {
        for v in 0..n {
            if v == sink {
                continue;
            }
            let mut bumped = config.clone();
            bumped[v] += 1;
            let mut next = stabilize(g, &bumped, sink)?.stable;
            next[sink] = 0;
            debug_assert!(is_recurrent(g, &next, sink) == Ok(true));
            if seen.insert(next.clone()) {
                if seen.len() > RECURRENT_LIMIT {
                    return Err(OracleError::TooManyRecurrentStates {
                        limit: RECURRENT_LIMIT,
                    });
                }
                queue.push_back(next);
            }
        }
    }
    Ok(BigInt::from(seen.len()))
}
