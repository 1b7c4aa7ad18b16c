//! Numerical differential geometry for asymptotically flat metrics.
//!
//! The crate evaluates the Gauss-Bonnet-Chern curvature stack (the scalars
//! `L_k`, the divergence-free 4-tensors `P_(k)`, the Lovelock tensors
//! `E^(k)`), builds sphere-adapted orthonormal frames with their connection
//! and curvature forms, and integrates three equivalent mass definitions
//! (flux, intrinsic, Chern-form) over coordinate spheres with extrapolation
//! of the `r -> infinity` limits.
//!
//! Entry points:
//! - [`metric::MetricFamily`] — analytic metric families with exact first and
//!   second derivatives,
//! - [`curvature::CurvatureBundle`] — pointwise curvature stack,
//! - [`frame::AdaptedFrame`] — sphere-adapted orthonormal frame and forms,
//! - [`mass::mass_all`] — the per-radius mass table and extrapolated limits,
//! - [`verify`] — named residual check suites,
//! - [`cli`] — the batch front-end used by the `gbcmass` binary.

pub mod cli;
pub mod config;
pub mod curvature;
pub(crate) mod linalg;
pub mod forms;
pub mod frame;
pub mod mass;
pub mod metric;
pub mod quad;
pub mod report;
pub mod tensor;
pub mod verify;

pub use curvature::CurvatureBundle;
pub use metric::MetricFamily;
pub use tensor::{DenseTensor, IndexTuple, Variance};
