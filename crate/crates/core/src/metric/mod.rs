//! Bounded-Lipschitz distance between discrete measures.
//!
//! The exact value is obtained from the transport form of the distance by a
//! network simplex ([`transport`]); the dense LP over the witness function
//! ([`simplex`]) is an independent second route for small instances.

pub mod bl;
pub mod simplex;
pub mod transport;

pub use bl::{
    bounded_lipschitz_dense, bounded_lipschitz_distance, bounded_lipschitz_lp,
    bounded_lipschitz_report, coarse_bounded_lipschitz, coarse_signed_bl, coarsen,
    merged_difference, signed_bl, witness_pairing_stderr, total_variation_distance, BlOptions, BlReport, CoarseOptions,
    CoarseReport, Coarsened, LipschitzWitness, WitnessCheck,
};
pub use simplex::{lp_solve, Constraint, LpProblem, LpSolution, LpStatus, Relation};
pub use transport::{solve_transport, TransportSolution};
