//! Convex bodies and the exact metric operations on them.

pub mod body;
pub mod bodyfile;
pub mod hausdorff;
pub mod project;
pub mod sampling;

pub use body::{BodyKind, ConvexBody, HalfSpace, MAX_DIM, MAX_VERTICES};
pub use hausdorff::{hausdorff_bracket, hausdorff_distance, HausdorffBracket, HausdorffOptions};
pub use project::{distance, project, project_dykstra, ProjectionResult};
pub use sampling::{parallel_shell_sample, SampleStream, SamplingBox, ShellSample};
