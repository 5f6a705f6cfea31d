//! The one-hop mailbox. All cross-agent reads during training go through
//! here, so the graph is the single authority on who may see what.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalityViolation {
    pub reader: usize,
    pub target: usize,
}

impl fmt::Display for LocalityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent {} tried to read agent {}, which is outside its neighborhood",
            self.reader, self.target
        )
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LocalityViolation {}

/// Per-round message board: each agent posts one payload, and reads are
/// rejected unless the target is in the reader's closed neighborhood.
#[derive(Debug)]
pub struct NeighborExchange<'g> {
    graph: &'g Graph,
    slots: Vec<Vec<f64>>,
}

impl<'g> NeighborExchange<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        NeighborExchange { graph, slots: vec![Vec::new(); graph.node_count()] }
    }

    pub fn post(&mut self, agent: usize, payload: Vec<f64>) {
        self.slots[agent] = payload;
    }

    pub fn read(&self, reader: usize, target: usize) -> Result<&[f64], LocalityViolation> {
        if !self.graph.are_neighbors(reader, target) {
            return Err(LocalityViolation { reader, target });
        }
        Ok(&self.slots[target])
    }

    pub fn clear(&mut self) {
        for slot in &mut self.slots {
            slot.clear();
        }
    }
}
