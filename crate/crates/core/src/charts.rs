//! State transformations among the four phase-space charts and the two time
//! reparameterizations `t → τ → σ`.
//!
//! Blow-up convention: `x = φ₁(r) cosα`, `y = φ₁(r) sinα + 2R`,
//! `p = φ₂(r) z` with `φ₂ = 1/r`, so `z = p·r`. On a fixed energy shell the
//! momenta reduce to the velocity angle ψ via `z_x = √(Ê/a) cosψ`,
//! `z_y = √Ê sinψ`.

use crate::energy::e_hat;
use crate::error::{Error, Result};
use crate::geometry::{phi1, phi1_prime, wrap_angle, Params, PlanePoint, SpherePoint,
    coeffs_mcgehee, sphere_param, stereo_inverse, stereo_project};

/// Chart tags for tagged phase-space states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    SphereAngles,
    Plane,
    McGeheeTau,
    AngularSigma,
}

/// A phase-space state tagged with its chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartState {
    SphereAngles { phi: f64, theta: f64, p_phi: f64, p_theta: f64 },
    Plane { x: f64, y: f64, p_x: f64, p_y: f64 },
    McGeheeTau { r: f64, alpha: f64, z_x: f64, z_y: f64 },
    /// On-shell angular state; `h` is the energy of the shell it lives on.
    AngularSigma { r: f64, alpha: f64, psi: f64, h: f64 },
}

impl ChartState {
    pub fn chart(&self) -> Chart {
        match self {
            ChartState::SphereAngles { .. } => Chart::SphereAngles,
            ChartState::Plane { .. } => Chart::Plane,
            ChartState::McGeheeTau { .. } => Chart::McGeheeTau,
            ChartState::AngularSigma { .. } => Chart::AngularSigma,
        }
    }

    /// Raw coordinates in chart order (3 entries for `AngularSigma`, else 4).
    pub fn coords(&self) -> Vec<f64> {
        match *self {
            ChartState::SphereAngles { phi, theta, p_phi, p_theta } => vec![phi, theta, p_phi, p_theta],
            ChartState::Plane { x, y, p_x, p_y } => vec![x, y, p_x, p_y],
            ChartState::McGeheeTau { r, alpha, z_x, z_y } => vec![r, alpha, z_x, z_y],
            ChartState::AngularSigma { r, alpha, psi, .. } => vec![r, alpha, psi],
        }
    }
}

/// Time-scale tags: physical time `t`, blown-up time `τ`, angular time `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScale {
    PhysicalT,
    TauTime,
    SigmaTime,
}

/// `dτ/dt = φ₂(r)/φ₁(r) = 1/(r² e^{−1/r²})`; diverges as `r → 0⁺`.
pub fn d_tau_d_t(r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::domain(format!("dτ/dt requires r > 0, got {r}")));
    }
    Ok(1.0 / (r * r * (-1.0 / (r * r)).exp()))
}

/// `dt/dτ = φ₁(r)/φ₂(r) = r² e^{−1/r²}`; vanishes as `r → 0⁺`.
pub fn d_t_d_tau(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * (-1.0 / (r * r)).exp()
    }
}

/// `dσ/dτ = Ê^{−1/2}` on the shell of energy `h`.
pub fn d_sigma_d_tau(h: f64, r: f64, alpha: f64, params: &Params) -> Result<f64> {
    let e = e_hat(h, r, alpha, params);
    if e <= 0.0 {
        return Err(Error::ForbiddenRegion { e_hat: e });
    }
    Ok(1.0 / e.sqrt())
}

/// Invert `φ₁(r) = v` for `r ≥ 0` by bracketed bisection followed by Newton
/// polish. `φ₁` is strictly increasing, so the root is unique; the residual
/// satisfies `|φ₁(r) − v| < 1e−12 max(1, v)`.
pub fn phi1_inverse(v: f64) -> Result<f64> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::domain(format!("φ₁ inverse requires v ≥ 0, got {v}")));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    // φ₁(r) < r, so r = v brackets from below; expand the upper end.
    let mut lo = 0.0f64;
    let mut hi = v.max(1.0);
    while phi1(hi) < v {
        hi *= 2.0;
    }
    // Bisection: the function is flat near 0 (essential singularity), where
    // bisection is robust and Newton is not.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if phi1(mid) < v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = phi1_prime(r);
        if d <= 0.0 {
            break;
        }
        let step = (phi1(r) - v) / d;
        let next = r - step;
        if next.is_finite() && next > 0.0 {
            r = next;
        } else {
            break;
        }
    }
    Ok(r)
}

/// Plane chart → blown-up chart: `r = φ₁⁻¹(√(x² + (y−2R)²))`,
/// `α = atan2(y − 2R, x)`, `z = p·r`.
pub fn plane_to_mcgehee(x: f64, y: f64, p_x: f64, p_y: f64, params: &Params) -> Result<(f64, f64, f64, f64)> {
    let dy = y - 2.0 * params.radius();
    let rho = (x * x + dy * dy).sqrt();
    if rho == 0.0 {
        return Err(Error::AtVortex);
    }
    let r = phi1_inverse(rho)?;
    let alpha = wrap_angle(dy.atan2(x));
    Ok((r, alpha, p_x * r, p_y * r))
}

/// Blown-up chart → plane chart; fails at `r = 0` where `p = z/r` is undefined.
pub fn mcgehee_to_plane(r: f64, alpha: f64, z_x: f64, z_y: f64, params: &Params) -> Result<(f64, f64, f64, f64)> {
    if r <= 0.0 {
        return Err(Error::CollisionState);
    }
    let p1 = phi1(r);
    let (s, c) = alpha.sin_cos();
    Ok((p1 * c, p1 * s + 2.0 * params.radius(), z_x / r, z_y / r))
}

/// Relative tolerance for the on-shell check in [`z_to_psi`].
pub const ON_SHELL_REL_TOL: f64 = 1e-8;

/// Effective energy below which the velocity angle is considered undefined.
pub const ZERO_VELOCITY_TOL: f64 = 1e-12;

/// Momenta → velocity angle on the shell of energy `h`: `ψ = atan2(z_y, √a z_x)`.
///
/// The state must satisfy the energy relation `a z_x² + z_y² = Ê(h, r, α)`
/// within [`ON_SHELL_REL_TOL`] (relative).
pub fn z_to_psi(r: f64, alpha: f64, z_x: f64, z_y: f64, h: f64, params: &Params) -> Result<f64> {
    let a = coeffs_mcgehee(r, alpha, params)?.a;
    let e = e_hat(h, r, alpha, params);
    if e <= ZERO_VELOCITY_TOL {
        return Err(Error::ZeroVelocity);
    }
    let kinetic = a * z_x * z_x + z_y * z_y;
    let residual = (kinetic - e).abs() / e.abs().max(1.0);
    if residual > ON_SHELL_REL_TOL {
        return Err(Error::OffShell { residual });
    }
    Ok(wrap_angle(z_y.atan2(a.sqrt() * z_x)))
}

/// Velocity angle → momenta: `z_x = √(Ê/a) cosψ`, `z_y = √Ê sinψ`.
pub fn psi_to_z(r: f64, alpha: f64, psi: f64, h: f64, params: &Params) -> Result<(f64, f64)> {
    let a = coeffs_mcgehee(r, alpha, params)?.a;
    let e = e_hat(h, r, alpha, params);
    if e < 0.0 {
        return Err(Error::ForbiddenRegion { e_hat: e });
    }
    let (s, c) = psi.sin_cos();
    Ok(((e / a).sqrt() * c, e.sqrt() * s))
}

/// Jacobian of the coordinate part of the sphere↔plane chart change,
/// `J = ∂(φ, θ)/∂(x, y)`, in row-major order.
pub fn sphere_plane_jacobian(x: f64, y: f64, params: &Params) -> Result<[[f64; 2]; 2]> {
    let rho_sq = x * x + y * y;
    if rho_sq == 0.0 {
        return Err(Error::PoleSingular);
    }
    let rho = rho_sq.sqrt();
    let r = params.radius();
    let denom = 4.0 * r * r + rho_sq;
    Ok([
        [-y / rho_sq, x / rho_sq],
        [4.0 * r * x / (rho * denom), 4.0 * r * y / (rho * denom)],
    ])
}

/// Cotangent lift of the sphere → plane chart change: positions via the
/// stereographic maps, momenta via the transpose-Jacobian rule
/// `p_plane = Jᵀ p_sphere` with `J = ∂(φ, θ)/∂(x, y)`.
///
/// This is the canonical lift; whether the plane flow of the mechanical system
/// coincides with the lifted sphere flow is reported by the diagnostics, not
/// assumed here.
pub fn sphere_to_plane_lift(phi: f64, theta: f64, p_phi: f64, p_theta: f64, params: &Params) -> Result<(f64, f64, f64, f64)> {
    if theta <= 1e-12 || theta >= std::f64::consts::PI - 1e-12 {
        return Err(Error::PoleSingular);
    }
    let pt = stereo_project(sphere_param(SpherePoint::new(phi, theta)?, params), params)?;
    let j = sphere_plane_jacobian(pt.x, pt.y, params)?;
    let p_x = j[0][0] * p_phi + j[1][0] * p_theta;
    let p_y = j[0][1] * p_phi + j[1][1] * p_theta;
    Ok((pt.x, pt.y, p_x, p_y))
}

/// Inverse cotangent lift (plane → sphere); momenta via the inverse-transpose
/// of the same Jacobian.
pub fn plane_to_sphere_lift(x: f64, y: f64, p_x: f64, p_y: f64, params: &Params) -> Result<(f64, f64, f64, f64)> {
    let sp = stereo_inverse(PlanePoint::new(x, y), params);
    if sp.theta <= 1e-12 || sp.theta >= std::f64::consts::PI - 1e-12 {
        return Err(Error::PoleSingular);
    }
    let j = sphere_plane_jacobian(x, y, params)?;
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == 0.0 {
        return Err(Error::PoleSingular);
    }
    // Solve Jᵀ p_sphere = p_plane.
    let p_phi = (j[1][1] * p_x - j[1][0] * p_y) / det;
    let p_theta = (-j[0][1] * p_x + j[0][0] * p_y) / det;
    Ok((sp.phi, sp.theta, p_phi, p_theta))
}
