//! Tail estimates for rough path functionals of hypoelliptic diffusions.
//!
//! The crate works in the step-`N` nilpotent group realised inside the
//! truncated tensor algebra `T^N(R^d)`, samples Brownian lifts and Markov
//! group-valued diffusions, evaluates greedy-partition counts and the
//! accumulated local p-variation on sampled paths, and fits tail exponents
//! to the resulting samples.

pub mod algebra;
pub mod functionals;
pub mod norms;
pub mod path;
pub mod simulate;
pub mod tails;

pub use algebra::{AlgebraError, AlgebraShape, GroupElement, LieElement, TensorElement};
pub use functionals::{FunctionalError, GreedyPartition, PathAnalysis, Window};
pub use norms::{NormError, NormKind, NormSpec};
pub use path::{DiscretePath, PathError};
pub use simulate::{DiffusionField, DiffusionSpec, SimConfig, SimError};
pub use tails::{SampleSet, TailError, TailFit, TailReport};
