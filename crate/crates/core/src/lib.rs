//! Dynamics of a point mass on a sphere under a logarithmic vortex potential.
//!
//! The crate covers the full pipeline from geometry to global orbit structure:
//!
//! * [`geometry`] — sphere/plane charts and the metric and potential coefficients;
//! * [`charts`] — state transformations between the four phase-space charts and
//!   the two time reparameterizations;
//! * [`dynamics`] — every vector field (sphere, plane, blown-up τ-flow, on-shell
//!   σ-flow, collision-manifold restriction) and their Hamiltonians;
//! * [`energy`] — energy thresholds, regime classification, level circles, and
//!   the zero-velocity manifold;
//! * [`equilibria`] — restpoint curves on the collision torus, numeric
//!   eigenvalues, and heteroclinic verification;
//! * [`integrate`] — adaptive embedded Runge–Kutta integration with event
//!   detection and conserved-quantity monitors;
//! * [`orbits`] — special orbits (vortex parallels, meridians), the
//!   collision-transmission extension, and the three-regime classification;
//! * [`diagnostics`] — finite-difference cross-checks and consistency reports;
//! * [`export`] — deterministic CSV serialization of trajectories and tables.

pub mod charts;
pub mod diagnostics;
pub mod dynamics;
pub mod energy;
pub mod equilibria;
pub mod error;
pub mod export;
pub mod geometry;
pub mod integrate;
pub mod orbits;

pub use error::{Error, Result};
pub use geometry::Params;
