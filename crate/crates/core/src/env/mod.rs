//! Concrete networked-MDP instances: random-access queues sharing access
//! points, and interfering radio links choosing power levels.

mod access;
mod power;

pub use access::AccessEnv;
pub use power::{PowerEnv, ACTION_DECREASE, ACTION_INCREASE, ACTION_KEEP};

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvError {
    ProbOutOfRange { what: &'static str, index: usize, value: f64 },
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    EmptyAvailability { node: usize },
    ApOutOfRange { node: usize, ap: usize, ap_count: usize },
    ZeroDeadline,
    ZeroPowerRange,
    NonPositive { what: &'static str, value: f64 },
    CoincidentNeighbors { a: usize, b: usize },
    Invalid(String),
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::ProbOutOfRange { what, index, value } => {
                write!(f, "{what}[{index}] = {value} is not a probability")
            }
            EnvError::LengthMismatch { what, expected, got } => {
                write!(f, "{what}: expected {expected} entries, got {got}")
            }
            EnvError::EmptyAvailability { node } => {
                write!(f, "node {node} can reach no access point")
            }
            EnvError::ApOutOfRange { node, ap, ap_count } => {
                write!(f, "node {node} lists access point {ap}, only {ap_count} exist")
            }
            EnvError::ZeroDeadline => write!(f, "deadline must be at least 1"),
            EnvError::ZeroPowerRange => write!(f, "p_max must be at least 1"),
            EnvError::NonPositive { what, value } => {
                write!(f, "{what} must be positive, got {value}")
            }
            EnvError::CoincidentNeighbors { a, b } => {
                write!(f, "linked nodes {a} and {b} sit at the same position")
            }
            EnvError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EnvError {}
