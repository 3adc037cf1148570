//! Random walk on the discrete cylinder `(Z/NZ)^d x Z`, random interlacements
//! on `Z^{d+1}`, and the machinery connecting them: exact potential theory on
//! finite regions, excursion decompositions, stochastic domination
//! experiments, and disconnection-time estimates. Exact identities are
//! checked by linear algebra; asymptotic statements by seeded Monte Carlo.

pub mod bessel;
pub mod disconnect;
pub mod domination;
pub mod error;
pub mod interlace;
pub mod lattice;
pub mod linalg;
pub mod potential;
pub mod report;
pub mod suite;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{CoreError, Result};
