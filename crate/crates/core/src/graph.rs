//! Undirected simple graphs and the Laplacian spectral quantities used for
//! gain design.
//!
//! Edges are stored once, as `(i, j)` with `i < j`. That stored order also
//! fixes the incidence orientation: the lower index is the tail (`+1`), the
//! higher index the head (`-1`). The Laplacian does not depend on this
//! choice.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Neg;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::numerics::{sym_eig, NumericsConfig, NumericsError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected ({components} components); the zero Laplacian eigenvalue is not simple")]
    NotConnected { components: usize },
    #[error("a single-node graph has no nonzero Laplacian eigenvalue")]
    SingleNode,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphSpec", into = "GraphSpec")]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// Wire form: `{"n": 6, "edges": [[0, 1], ...]}`, 0-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSpec {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphSpec> for Graph {
    type Error = GraphError;
    fn try_from(spec: GraphSpec) -> Result<Self, GraphError> {
        Graph::new(spec.n, spec.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<Graph> for GraphSpec {
    fn from(g: Graph) -> Self {
        GraphSpec {
            n: g.n_nodes,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl Graph {
    /// Builds a graph; each edge may be given in either order and is stored
    /// as `(min, max)` in input order.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n_nodes == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = BTreeSet::new();
        let mut stored = Vec::new();
        let mut neighbors = vec![Vec::new(); n_nodes];
        for (a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(GraphError::NodeOutOfRange(a, b, n_nodes));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            stored.push(e);
            neighbors[e.0].push(e.1);
            neighbors[e.1].push(e.0);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self {
            n_nodes,
            edges: stored,
            neighbors,
        })
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("valid path graph")
    }

    /// Cycle on `n ≥ 3` nodes; smaller `n` degrades to a path.
    pub fn ring(n: usize) -> Self {
        if n < 3 {
            return Self::path(n);
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("valid ring graph")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("valid complete graph")
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor set `N_i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `Σ_i |N_i|`, the number of ordered neighbor pairs (twice the edge count).
    pub fn ordered_pair_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// Connected-component count by breadth-first search.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n_nodes];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }
}

/// `|V| x |E|` incidence matrix; column `k` for edge `(i, j)` holds `+1` at
/// row `i` and `-1` at row `j`.
pub fn incidence_matrix<T: Copy + Zero + One + Neg<Output = T>>(g: &Graph) -> Matrix<T> {
    let mut d = Matrix::zeros(g.n_nodes(), g.n_edges());
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        d[(i, k)] = T::one();
        d[(j, k)] = -T::one();
    }
    d
}

/// Degree matrix minus adjacency matrix.
pub fn laplacian<T: Copy + Zero + One + Neg<Output = T>>(g: &Graph) -> Matrix<T> {
    let n = g.n_nodes();
    let mut l = Matrix::zeros(n, n);
    for &(i, j) in g.edges() {
        l[(i, j)] = -T::one();
        l[(j, i)] = -T::one();
        l[(i, i)] = l[(i, i)] + T::one();
        l[(j, j)] = l[(j, j)] + T::one();
    }
    l
}

pub fn adjacency_matrix<T: Copy + Zero + One>(g: &Graph) -> Matrix<T> {
    let n = g.n_nodes();
    let mut a = Matrix::zeros(n, n);
    for &(i, j) in g.edges() {
        a[(i, j)] = T::one();
        a[(j, i)] = T::one();
    }
    a
}

/// Ascending Laplacian spectrum.
pub fn laplacian_spectrum<T: Scalar>(
    g: &Graph,
    cfg: &NumericsConfig,
) -> Result<Vec<T>, GraphError> {
    Ok(sym_eig(&laplacian::<T>(g), cfg)?.values)
}

/// Algebraic connectivity: the smallest nonzero Laplacian eigenvalue of a
/// connected graph.
pub fn lambda2<T: Scalar>(g: &Graph, cfg: &NumericsConfig) -> Result<T, GraphError> {
    let components = g.component_count();
    if components != 1 {
        return Err(GraphError::NotConnected { components });
    }
    if g.n_nodes() == 1 {
        return Err(GraphError::SingleNode);
    }
    Ok(laplacian_spectrum::<T>(g, cfg)?[1])
}

/// Largest Laplacian eigenvalue.
pub fn lambda_max<T: Scalar>(g: &Graph, cfg: &NumericsConfig) -> Result<T, GraphError> {
    let spec = laplacian_spectrum::<T>(g, cfg)?;
    Ok(*spec.last().expect("non-empty graph"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NumericsConfig {
        NumericsConfig::default()
    }

    fn triangle() -> Graph {
        Graph::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap()
    }

    #[test]
    fn incidence_examples() {
        let p2: Matrix<i64> = incidence_matrix(&Graph::path(2));
        assert_eq!(p2.to_rows(), vec![vec![1], vec![-1]]);
        let tri: Matrix<i64> = incidence_matrix(&triangle());
        assert_eq!(
            tri.to_rows(),
            vec![vec![1, 1, 0], vec![-1, 0, 1], vec![0, -1, -1]]
        );
        let empty: Matrix<i64> = incidence_matrix(&Graph::new(3, []).unwrap());
        assert_eq!(empty.shape(), (3, 0));
    }

    #[test]
    fn laplacian_examples() {
        let p2: Matrix<i64> = laplacian(&Graph::path(2));
        assert_eq!(p2.to_rows(), vec![vec![1, -1], vec![-1, 1]]);
        let tri: Matrix<i64> = laplacian(&triangle());
        assert_eq!(
            tri.to_rows(),
            vec![vec![2, -1, -1], vec![-1, 2, -1], vec![-1, -1, 2]]
        );
        let c6: Matrix<i64> = laplacian(&Graph::ring(6));
        for i in 0..6 {
            for j in 0..6 {
                let off = (i as i64 - j as i64).rem_euclid(6);
                let want = match off {
                    0 => 2,
                    1 | 5 => -1,
                    _ => 0,
                };
                assert_eq!(c6[(i, j)], want);
            }
        }
    }

    #[test]
    fn connectivity_examples() {
        assert!(Graph::path(2).is_connected());
        assert!(!Graph::new(3, []).unwrap().is_connected());
        let two_triangles =
            Graph::new(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert!(!two_triangles.is_connected());
        assert_eq!(two_triangles.component_count(), 2);
    }

    #[test]
    fn lambda2_examples() {
        let l: f64 = lambda2(&Graph::path(2), &cfg()).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
        let l: f64 = lambda2(&Graph::complete(3), &cfg()).unwrap();
        assert!((l - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lambda2_ring6_against_characteristic_roots() {
        // brute force: the circulant's eigenvalues are 2 - 2cos(2πk/6); take the
        // second-smallest by sorting all six
        let mut all: Vec<f64> = (0..6)
            .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 6.0).cos())
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let l: f64 = lambda2(&Graph::ring(6), &cfg()).unwrap();
        assert!((l - all[1]).abs() < 1e-12);
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda2_requires_connectivity() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        assert!(matches!(
            lambda2::<f64>(&g, &cfg()),
            Err(GraphError::NotConnected { components: 2 })
        ));
    }

    #[test]
    fn invalid_edges_rejected() {
        assert_eq!(Graph::new(2, [(0, 0)]), Err(GraphError::SelfLoop(0)));
        assert_eq!(
            Graph::new(2, [(0, 2)]),
            Err(GraphError::NodeOutOfRange(0, 2, 2))
        );
        assert_eq!(
            Graph::new(3, [(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
    }

    #[test]
    fn neighbor_sets_symmetric() {
        let g = Graph::new(5, [(3, 1), (0, 4), (1, 2), (2, 4)]).unwrap();
        for i in 0..5 {
            for &j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
            }
        }
        assert_eq!(g.edges()[0], (1, 3));
    }

    #[test]
    fn wire_format_roundtrip() {
        let g: Graph = serde_json::from_str(r#"{"n": 3, "edges": [[0, 1], [2, 1]]}"#).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let bad = serde_json::from_str::<Graph>(r#"{"n": 2, "edges": [[0, 0]]}"#);
        assert!(bad.is_err());
        let unknown = serde_json::from_str::<Graph>(r#"{"n": 2, "edges": [], "w": 1}"#);
        assert!(unknown.is_err());
    }
}
