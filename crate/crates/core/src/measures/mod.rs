//! Discrete support measures and their exact oracles.

pub mod discrete;
pub mod extract;
pub mod msr;
pub mod oracle;

pub use discrete::{stderr, DiscreteMeasure, SpaceTag, SupportPoint};
pub use extract::{
    empirical_parallel_measure, extract_pair, extract_support_measures, extract_with_plan,
    extraction_coefficients, extraction_radii, family_from_samples, replicate_stream, sample_shells, steiner_fit,
    tries_for, MeasureFamily, SamplingPlan, ShellSamples, ShellSummary, SteinerFit,
    DEFAULT_REPLICATES,
};
pub use oracle::{
    ball_family_exact, ball_support_measure_exact, polytope_intrinsic_volumes,
    polytope_support_measure_exact, psi_family, sphere_marginal, sphere_net, Marginal,
};
pub use msr::{hex_float, parse_hex_float, parse_measure, read_measure, save_measure, write_measure};
