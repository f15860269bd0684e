//! Typed errors shared across the crate.

use thiserror::Error;

/// Errors raised by chart maps, coefficient functions, and orbit constructions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Stereographic projection is undefined at the north pole (z = 2R).
    #[error("point is at the north pole; stereographic projection undefined")]
    NorthPole,
    /// An embedded point is not on the sphere within tolerance.
    #[error("point is off the sphere (|‖x‖ − r| = {deviation:.3e})")]
    OffSphere { deviation: f64 },
    /// The plane origin is a metric singularity; `a` and `a·l` are undefined there.
    #[error("plane origin (0,0) is a metric singularity; a and a·l undefined")]
    OriginSingular,
    /// The state coincides with the vortex point, where the potential is singular.
    #[error("state coincides with the vortex point")]
    AtVortex,
    /// r = 0 states carry no plane-chart momenta (p = z/r).
    #[error("collision state (r = 0) has no plane-chart momenta")]
    CollisionState,
    /// The McGehee state violates the on-shell energy relation a z_x² + z_y² = Ê.
    #[error("state violates the energy relation (relative residual {residual:.3e})")]
    OffShell { residual: f64 },
    /// The effective energy vanishes, so the velocity angle ψ is undefined.
    #[error("effective energy is zero; velocity angle undefined")]
    ZeroVelocity,
    /// The configuration lies where the effective energy is negative.
    #[error("state lies in the forbidden region (Ê = {e_hat:.3e} < 0)")]
    ForbiddenRegion { e_hat: f64 },
    /// Angular sphere coordinates degenerate at θ ∈ {0, π}.
    #[error("polar coordinate singularity at θ ∈ {{0, π}}")]
    PoleSingular,
    /// u₀ ∈ {0, π} is a restpoint, not a valid heteroclinic start.
    #[error("u0 ∈ {{0, π}} is a restpoint, not a heteroclinic start")]
    DegenerateStart,
    /// No periodic vortex parallel exists at this latitude.
    #[error("no periodic parallel at θ̄ = {theta_bar}; requires θ̄ ∈ (π/2, π)")]
    NoOrbit { theta_bar: f64 },
    /// Transmission requires a trajectory that ends in a collision event.
    #[error("trajectory does not end in a collision event")]
    NotColliding,
    /// Transmission is defined only for zero-angular-momentum (meridian) orbits.
    #[error("transmission requires zero angular momentum; got p_φ = {p_phi:.3e}")]
    NonzeroAngularMomentum { p_phi: f64 },
    /// Generic domain violation (bad argument range, wrong chart, ...).
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
