//! Certification of two-qubit entanglement and QKD key fractions from
//! bipartite measurement statistics, assuming only that both systems are
//! qubits.
//!
//! * [`qmat`]: states, POVMs, concurrence, entropies, purification, Born rule.
//! * [`stats`]: probability tables and the standard statistics families.
//! * [`witness`]: closed-form correlator criteria.
//! * [`certify`]: minimum concurrence compatible with a table.
//! * [`qkd`]: certified secret key fractions.
//! * [`optim`]: the deterministic multi-start minimizer shared by both.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod optim;
pub mod qkd;
pub mod qmat;
pub mod stats;
pub mod witness;

pub use error::{Error, Result};
pub use optim::OptimOptions;
pub use qmat::{Povm, TwoQubitState};
pub use stats::{Family, FamilySpec, ProbTable};
