//! Numerical laboratory for rotationally symmetric Ricci flow on S³.
//!
//! Metrics are warped products `ds² + ψ(s)² g_can` on `[s₋, s₊] × S²`.

// `!(x > 0.0)` is how NaN is rejected along with the bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod barriers;
pub mod bryant;
pub mod flow;
pub mod geometry;
pub mod numerics;
pub mod spectral;
