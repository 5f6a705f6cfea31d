//! Random-access control: each node holds a deadline-indexed queue of
//! packets and chooses, per slot, to stay silent or transmit its
//! earliest-deadline packet to one of its reachable access points. A
//! transmission earns the access point's delivery probability as (expected)
//! reward unless another node in the closed neighborhood targets the same
//! access point in the same slot.
//!
//! Queue state is a bit vector: bit l-1 set means a packet with l slots of
//! remaining lifetime is waiting, so `|S_n| = 2^deadline`. Action 0 is
//! silence; action i >= 1 transmits to the i-th entry of the node's
//! availability list.

use alloc::vec;
use alloc::vec::Vec;

use super::EnvError;
use crate::graph::Graph;
use crate::mdp::{u01, BuildError, LocalMdp, NetworkMdp};
use crate::Rng;

#[derive(Debug, Clone)]
pub struct AccessEnv {
    availability: Vec<Vec<usize>>,
    arrival: Vec<f64>,
    delivery: Vec<f64>,
    deadline: usize,
    graph: Graph,
    contenders: Vec<usize>,
}

impl AccessEnv {
    pub fn new(
        availability: Vec<Vec<usize>>,
        arrival: Vec<f64>,
        delivery: Vec<f64>,
        deadline: usize,
    ) -> Result<Self, EnvError> {
        if deadline == 0 {
            return Err(EnvError::ZeroDeadline);
        }
        let nodes = availability.len();
        let aps = delivery.len();
        if arrival.len() != nodes {
            return Err(EnvError::LengthMismatch {
                what: "arrival probabilities",
                expected: nodes,
                got: arrival.len(),
            });
        }
        for (i, &w) in arrival.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(EnvError::ProbOutOfRange { what: "arrival", index: i, value: w });
            }
        }
        for (m, &q) in delivery.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(EnvError::ProbOutOfRange { what: "delivery", index: m, value: q });
            }
        }
        for (node, avail) in availability.iter().enumerate() {
            if avail.is_empty() {
                return Err(EnvError::EmptyAvailability { node });
            }
            for &ap in avail {
                if ap >= aps {
                    return Err(EnvError::ApOutOfRange { node, ap, ap_count: aps });
                }
            }
        }

        // nodes interact iff they can collide, i.e. share an access point
        let mut edges = vec![];
        for a in 0..nodes {
            for b in a + 1..nodes {
                if availability[a].iter().any(|ap| availability[b].contains(ap)) {
                    edges.push((a, b));
                }
            }
        }
        let graph = Graph::from_edges(nodes, &edges)
            .map_err(|e| EnvError::Invalid(alloc::format!("derived graph: {e}")))?;

        let mut contenders = vec![0; aps];
        for avail in &availability {
            for &ap in avail {
                contenders[ap] += 1;
            }
        }

        Ok(AccessEnv { availability, arrival, delivery, deadline, graph, contenders })
    }

    /// A line of nodes with one access point between each adjacent pair, so
    /// interior nodes can reach two access points and the ends reach one.
    pub fn line(
        nodes: usize,
        arrival: Vec<f64>,
        delivery: Vec<f64>,
        deadline: usize,
    ) -> Result<Self, EnvError> {
        if nodes < 2 {
            return Err(EnvError::Invalid(alloc::format!(
                "line network needs at least 2 nodes, got {nodes}"
            )));
        }
        if delivery.len() != nodes - 1 {
            return Err(EnvError::LengthMismatch {
                what: "delivery probabilities (one per access point)",
                expected: nodes - 1,
                got: delivery.len(),
            });
        }
        let availability: Vec<Vec<usize>> = (0..nodes)
            .map(|n| {
                if n == 0 {
                    vec![0]
                } else if n == nodes - 1 {
                    vec![n - 1]
                } else {
                    vec![n - 1, n]
                }
            })
            .collect();
        Self::new(availability, arrival, delivery, deadline)
    }

    pub fn node_count(&self) -> usize {
        self.availability.len()
    }

    pub fn ap_count(&self) -> usize {
        self.delivery.len()
    }

    pub fn deadline(&self) -> usize {
        self.deadline
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn availability(&self, n: usize) -> &[usize] {
        &self.availability[n]
    }

    pub fn delivery_prob(&self, ap: usize) -> f64 {
        self.delivery[ap]
    }

    pub fn arrival_prob(&self, n: usize) -> f64 {
        self.arrival[n]
    }

    /// Number of nodes that can reach the access point.
    pub fn contenders(&self, ap: usize) -> usize {
        self.contenders[ap]
    }

    pub fn state_count(&self) -> usize {
        1 << self.deadline
    }

    pub fn action_count(&self, n: usize) -> usize {
        1 + self.availability[n].len()
    }

    /// The access point a given action index targets, if it transmits.
    pub fn action_target(&self, n: usize, action: usize) -> Option<usize> {
        if action == 0 {
            None
        } else {
            Some(self.availability[n][action - 1])
        }
    }

    /// Expected throughput of node n given the closed neighborhood's actions
    /// (`members` ascending, as in the reward contract): the target's
    /// delivery probability if nobody else in the neighborhood targets the
    /// same access point, else 0.
    pub fn expected_reward(&self, n: usize, members: &[usize], actions: &[usize]) -> f64 {
        let own = members.iter().position(|&k| k == n).expect("n is in its own neighborhood");
        let Some(ap) = self.action_target(n, actions[own]) else {
            return 0.0;
        };
        for (i, &k) in members.iter().enumerate() {
            if k != n && self.action_target(k, actions[i]) == Some(ap) {
                return 0.0;
            }
        }
        self.delivery[ap]
    }

    /// Bernoulli realization of [`AccessEnv::expected_reward`]: 1 on
    /// successful delivery, 0 on silence, collision, or channel failure.
    pub fn realized_reward(
        &self,
        n: usize,
        members: &[usize],
        actions: &[usize],
        rng: &mut Rng,
    ) -> f64 {
        let p = self.expected_reward(n, members, actions);
        if u01(rng) < p {
            1.0
        } else {
            0.0
        }
    }

    /// One queue update: a transmission removes the earliest-deadline packet
    /// (nothing leaves an empty queue), lifetimes decrement with expired
    /// packets dropped, then an arrival lands in the deadline bucket with the
    /// node's arrival probability.
    pub fn transition(&self, n: usize, queue: usize, action: usize, rng: &mut Rng) -> usize {
        let mut q = queue;
        if action > 0 && q != 0 {
            q &= q - 1; // clear lowest set bit = earliest deadline
        }
        q >>= 1;
        if u01(rng) < self.arrival[n] {
            q |= 1 << (self.deadline - 1);
        }
        q
    }

    fn kernel_for(&self, n: usize) -> LocalMdp {
        let states = self.state_count();
        let actions = self.action_count(n);
        let w = self.arrival[n];
        let mut kernel = vec![0.0; states * actions * states];
        for s in 0..states {
            for a in 0..actions {
                let mut q = s;
                if a > 0 && q != 0 {
                    q &= q - 1;
                }
                q >>= 1;
                let with_arrival = q | 1 << (self.deadline - 1);
                let base = (s * actions + a) * states;
                kernel[base + q] += 1.0 - w;
                kernel[base + with_arrival] += w;
            }
        }
        LocalMdp::new(states, actions, kernel)
    }

    /// Assembles the networked MDP: per-node queue kernels, collision-coupled
    /// expected rewards, uniform initial queues.
    pub fn build_mdp(&self, gamma: f64) -> Result<NetworkMdp, BuildError> {
        let nodes = self.node_count();
        let locals: Vec<LocalMdp> = (0..nodes).map(|n| self.kernel_for(n)).collect();
        let init = vec![vec![1.0 / self.state_count() as f64; self.state_count()]; nodes];
        let graph = self.graph.clone();
        NetworkMdp::new(
            graph.clone(),
            locals,
            |n, _s, a| self.expected_reward(n, graph.neighborhood(n), a),
            gamma,
            init,
        )
    }
}
