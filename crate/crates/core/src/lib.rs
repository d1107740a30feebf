//! Deterministic tracing of the optimal tradeoff curve between two smooth
//! objectives.
//!
//! The curve `∇F = λ·∇H` is followed from a stationary point of `H`
//! (`μ = 1/λ = 0`) to a stationary point of `F` (`λ = 0`) by integrating the
//! singularity-free arc-length system built on adjugate directions. Turning
//! points of `λ`, `f` and `h` along the way are detected and refined as
//! events, and the traced curve can be reduced to its Pareto-optimal subset.
//!
//! Module map:
//!
//! * [`problem`]: objective pairs, expression parsing, exact derivatives.
//! * [`linalg`]: determinant, adjugate, solve and inertia for small matrices.
//! * [`lagrange`]: bordered quantities and arc-length rates at a point.
//! * [`tracer`]: the continuation engines.
//! * [`analysis`]: Pareto splicing, return classification, stationary points.
//! * [`exec`]: batch execution over independent jobs (rayon or sequential).

pub mod analysis;
pub mod exec;
pub mod lagrange;
pub mod linalg;
pub mod problem;
pub mod tracer;
