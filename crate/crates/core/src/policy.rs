//! Per-agent tabular softmax policies.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::mdp::{sample_index, NetworkMdp};
use crate::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonFiniteLogit {
    pub agent: usize,
}

impl fmt::Display for NonFiniteLogit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {} has a non-finite logit", self.agent)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NonFiniteLogit {}

/// Logit tables, one row of |A_n| entries per local state. The policy is the
/// row-wise softmax; probabilities are computed with the row max subtracted,
/// so shifting a whole row leaves them unchanged (bit-for-bit when the
/// shifted logits are themselves exact) and large logits never overflow exp.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    dims: Vec<(usize, usize)>,
    theta: Vec<Vec<f64>>,
}

impl SoftmaxPolicy {
    /// All-zero logits: every local policy uniform.
    pub fn uniform_for(mdp: &NetworkMdp) -> Self {
        let dims: Vec<(usize, usize)> = (0..mdp.agent_count())
            .map(|n| (mdp.local(n).state_count, mdp.local(n).action_count))
            .collect();
        let theta = dims.iter().map(|&(s, a)| vec![0.0; s * a]).collect();
        SoftmaxPolicy { dims, theta }
    }

    pub fn from_tables(
        dims: Vec<(usize, usize)>,
        theta: Vec<Vec<f64>>,
    ) -> Result<Self, NonFiniteLogit> {
        assert_eq!(dims.len(), theta.len());
        for (n, (table, &(s, a))) in theta.iter().zip(&dims).enumerate() {
            assert_eq!(table.len(), s * a, "agent {n} table shape");
            if table.iter().any(|x| !x.is_finite()) {
                return Err(NonFiniteLogit { agent: n });
            }
        }
        Ok(SoftmaxPolicy { dims, theta })
    }

    pub fn agent_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self, n: usize) -> (usize, usize) {
        self.dims[n]
    }

    pub fn logits(&self, n: usize) -> &[f64] {
        &self.theta[n]
    }

    pub fn logits_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.theta[n]
    }

    pub fn logit_row(&self, n: usize, s: usize) -> &[f64] {
        let a = self.dims[n].1;
        &self.theta[n][s * a..(s + 1) * a]
    }

    pub fn probs_into(&self, n: usize, s: usize, out: &mut [f64]) {
        let row = self.logit_row(n, s);
        let mut max = f64::NEG_INFINITY;
        for &x in row {
            if x > max {
                max = x;
            }
        }
        let mut sum = 0.0;
        for (o, &x) in out.iter_mut().zip(row) {
            let e = math::exp(x - max);
            *o = e;
            sum += e;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    }

    pub fn probs(&self, n: usize, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims[n].1];
        self.probs_into(n, s, &mut out);
        out
    }

    pub fn prob(&self, n: usize, s: usize, a: usize) -> f64 {
        self.probs(n, s)[a]
    }

    /// Product over agents of the local action probabilities.
    pub fn joint_prob(&self, s: &[usize], a: &[usize]) -> f64 {
        let mut p = 1.0;
        for n in 0..self.agent_count() {
            p *= self.prob(n, s[n], a[n]);
        }
        p
    }

    pub fn sample_action(&self, n: usize, s: usize, rng: &mut Rng, scratch: &mut [f64]) -> usize {
        self.probs_into(n, s, scratch);
        sample_index(scratch, rng)
    }

    /// d/dtheta_n(s, a') of log pi_n(a|s): nonzero only in state row s, where
    /// it is 1{a = a'} - pi_n(a'|s).
    pub fn score_row(&self, n: usize, s: usize, a: usize) -> Vec<f64> {
        let mut row = self.probs(n, s);
        for x in row.iter_mut() {
            *x = -*x;
        }
        row[a] += 1.0;
        row
    }
}
