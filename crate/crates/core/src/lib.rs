//! Closed K-magnetic geodesics on the unit sphere.
//!
//! A closed curve on S² whose geodesic curvature equals `ε K` is found by
//! correcting a great circle `ω_R` off the three-dimensional kernel of the
//! linearized geodesic operator, then locating critical points of the reduced
//! energy on the space of great-circle centers. The shooting module solves
//! the same problem as an initial value problem for the Lorentz-type motion
//! law and is used to cross-check every solution.
//!
//! Module map:
//!
//! * [`sphere`]: points, tangent vectors, rotations, stereographic charts.
//! * [`field`]: polynomial magnetic intensities `K`.
//! * [`loops`]: sampled closed curves with spectral calculus.
//! * [`functionals`]: length, area, energy and the operators `J₀`, `J_ε`.
//! * [`reduction`]: the kernel-corrected loops and the reduced energy.
//! * [`melnikov`]: the hemisphere integral of `K` and its critical points.
//! * [`shooting`]: RK4 integration and periodic-orbit shooting.

pub mod error;
pub mod field;
pub mod functionals;
pub mod loops;
pub mod melnikov;
pub mod quadrature;
pub mod reduction;
pub mod shooting;
pub mod spectral;
pub mod sphere;

pub use error::{Error, Result};
pub use field::FieldSpec;
pub use loops::Loop;
pub use sphere::{Rotation3, TangentVec, UnitVec3};
