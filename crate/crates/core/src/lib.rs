//! Numerical toolkit for generalized k-quasi-hyperbolic metrics on convex domains.
//!
//! The toolkit computes, on explicit convex bodies:
//!
//! * the directional boundary distances `δ(p; v)` and their Grassmannian
//!   max-min generalizations `δ^(k)(p; v)` together with the induced
//!   infinitesimal metrics `q^(k)(p; v) = ‖v‖ / δ^(k)(p; v)` ([`metrics`]),
//! * integrated distances `dist^(k)` by polyline descent with certified
//!   hyperplane lower bounds, Hilbert cross-ratio distances, and
//!   quasi-geodesic construction/validation ([`geodesy`]),
//! * boundary expansion profiles, power-law exponent fits, four-point
//!   hyperbolicity estimates, non-slimness witness rectangles, and the
//!   polynomial contact-order machinery ([`hyperbolicity`]),
//! * the isoperimetric curve-surgery machinery on model metrics over
//!   `M × (0,1]` producing filling certificates ([`filling`]).
//!
//! Everything is driven by the geometric oracles in [`domains`]: membership,
//! ray-boundary intersection, and plane-slice distances for polytopes,
//! ellipsoids, p-balls, sublevel sets, and the closed-form half-space.

pub mod config;
pub mod domains;
pub mod error;
pub mod filling;
pub mod frame;
pub mod geodesy;
pub mod hyperbolicity;
pub mod linalg;
pub mod metrics;

pub use config::Tolerances;
pub use domains::{ConvexBody, Ray, ScalarField};
pub use error::{Error, Result};
pub use frame::Frame;

/// Library version string, embedded in every serialized report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
