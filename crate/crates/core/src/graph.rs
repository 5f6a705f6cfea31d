//! Undirected interaction graph between agents.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    NodeOutOfRange { node: usize, count: usize },
    SelfLoop { node: usize },
    Empty,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::NodeOutOfRange { node, count } => {
                write!(f, "edge endpoint {node} out of range for {count} nodes")
            }
            GraphError::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            GraphError::Empty => write!(f, "graph needs at least one node"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GraphError {}

/// Agents sit on the nodes; an edge means the two agents' rewards may read
/// each other's state and action. Every agent's closed neighborhood includes
/// itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighborhoods: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut canonical = BTreeSet::new();
        for &(a, b) in edges {
            if a >= node_count {
                return Err(GraphError::NodeOutOfRange { node: a, count: node_count });
            }
            if b >= node_count {
                return Err(GraphError::NodeOutOfRange { node: b, count: node_count });
            }
            if a == b {
                return Err(GraphError::SelfLoop { node: a });
            }
            canonical.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = canonical.into_iter().collect();
        let mut neighborhoods: Vec<BTreeSet<usize>> =
            (0..node_count).map(|n| BTreeSet::from([n])).collect();
        for &(a, b) in &edges {
            neighborhoods[a].insert(b);
            neighborhoods[b].insert(a);
        }
        Ok(Graph {
            node_count,
            edges,
            neighborhoods: neighborhoods
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        })
    }

    pub fn line(node_count: usize) -> Self {
        let edges: Vec<_> = (1..node_count).map(|i| (i - 1, i)).collect();
        Self::from_edges(node_count, &edges).expect("line edges are valid")
    }

    pub fn cycle(node_count: usize) -> Self {
        let mut edges: Vec<_> = (1..node_count).map(|i| (i - 1, i)).collect();
        if node_count > 2 {
            edges.push((node_count - 1, 0));
        }
        Self::from_edges(node_count, &edges).expect("cycle edges are valid")
    }

    /// Node 0 in the center, all others attached to it.
    pub fn star(node_count: usize) -> Self {
        let edges: Vec<_> = (1..node_count).map(|i| (0, i)).collect();
        Self::from_edges(node_count, &edges).expect("star edges are valid")
    }

    /// rows x cols lattice with horizontal and vertical edges, row-major node
    /// numbering.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = vec![];
        for r in 0..rows {
            for c in 0..cols {
                let n = r * cols + c;
                if c + 1 < cols {
                    edges.push((n, n + 1));
                }
                if r + 1 < rows {
                    edges.push((n, n + cols));
                }
            }
        }
        Self::from_edges(rows * cols, &edges).expect("grid edges are valid")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Closed neighborhood of `n`: the node itself plus its graph neighbors,
    /// ascending.
    pub fn neighborhood(&self, n: usize) -> &[usize] {
        &self.neighborhoods[n]
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighborhoods[a].binary_search(&b).is_ok()
    }
}
