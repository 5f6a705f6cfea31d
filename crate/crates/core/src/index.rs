//! Mixed-radix flattening of joint states and actions.
//!
//! Coordinate 0 is the least-significant digit, so `index` and `decode` are
//! exact inverses and enumeration order is "agent 0 varies fastest".

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    dims: Vec<usize>,
    len: usize,
}

impl MixedRadix {
    pub fn new(dims: &[usize]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "every dimension must be positive");
        let len = dims.iter().product();
        MixedRadix { dims: dims.to_vec(), len }
    }

    /// Total number of joint configurations.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        let mut idx = 0;
        let mut stride = 1;
        for (i, &c) in coords.iter().enumerate() {
            debug_assert!(c < self.dims[i]);
            idx += c * stride;
            stride *= self.dims[i];
        }
        idx
    }

    pub fn decode_into(&self, mut idx: usize, out: &mut [usize]) {
        debug_assert!(idx < self.len);
        for (i, &d) in self.dims.iter().enumerate() {
            out[i] = idx % d;
            idx /= d;
        }
    }

    pub fn decode(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        self.decode_into(idx, &mut out);
        out
    }

    /// Index of the sub-tuple picked out by `positions` (e.g. a neighborhood)
    /// from full joint coordinates, under a radix built from those positions'
    /// dimensions in the same order.
    pub fn project(sub: &MixedRadix, positions: &[usize], full_coords: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (i, &p) in positions.iter().enumerate() {
            idx += full_coords[p] * stride;
            stride *= sub.dims[i];
        }
        idx
    }
}
