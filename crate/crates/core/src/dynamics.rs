//! Every vector field of the model: sphere co-geodesic and vortex flows, the
//! plane flow, the regularized blow-up τ-flow, the on-shell angular σ-flow,
//! and the collision-manifold restriction.
//!
//! All Hamiltonian chart fields are generated canonically from their stated
//! Hamiltonians (`q̇ = ∂H/∂p`, `ṗ = −∂H/∂q`), which guarantees exact energy
//! conservation and cross-chart consistency; [`crate::diagnostics`] reports
//! where alternative printed forms of the same equations differ. The on-shell
//! σ-system is normative in its own right: its r = 0 restriction is the
//! collision-manifold flow `dα/dσ = (Γ/4π) sin(ψ − α)`, `dψ/dσ = 0`, with
//! degenerate-saddle eigenvalues `{0, ∓Γ/4π, 0}` along the two restpoint
//! curves.

use std::f64::consts::PI;

use crate::charts::{psi_to_z, Chart, TimeScale};
use crate::energy::e_hat;
use crate::error::{Error, Result};
use crate::geometry::{chord_sq_to_north, coeff_grads_mcgehee, coeff_grads_xy, coeff_b,
    coeffs_mcgehee, coeffs_xy, log_b_grad, Params, PlanePoint};

/// Where the vortex sits in the sphere chart: at `(φ, θ) = (π/2, π/2)` in the
/// original parameterization, or at the north pole `θ = π` after moving it
/// there (the convention exposing `p_φ` as a first integral).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VortexPosition {
    Equator,
    NorthPole,
}

/// Identity of a flow: fixes the chart, the time variable, and (for the
/// on-shell field) the energy shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    /// Free co-geodesic flow on the sphere, state `(φ, θ, p_φ, p_θ)`.
    SphereGeodesic,
    /// Sphere flow with the vortex potential, state `(φ, θ, p_φ, p_θ)`.
    SphereVortex(VortexPosition),
    /// Stereographic-plane mechanical flow, state `(x, y, p_x, p_y)`.
    Plane,
    /// Regularized blow-up flow in time τ, state `(r, α, z_x, z_y)`.
    McGeheeTau,
    /// On-shell angular flow in time σ, state `(r, α, ψ)` at energy `h`.
    AngularSigma { h: f64 },
    /// Collision-manifold restriction, state `(α, ψ)`.
    CollisionManifold,
    /// Meridian reduction of the north-pole flow, state `(θ, p_θ)` with θ
    /// extended through 0 (the antipodal point).
    MeridianReduced,
}

impl FieldKind {
    pub fn chart(&self) -> Option<Chart> {
        match self {
            FieldKind::SphereGeodesic | FieldKind::SphereVortex(_) => Some(Chart::SphereAngles),
            FieldKind::Plane => Some(Chart::Plane),
            FieldKind::McGeheeTau => Some(Chart::McGeheeTau),
            FieldKind::AngularSigma { .. } => Some(Chart::AngularSigma),
            FieldKind::CollisionManifold | FieldKind::MeridianReduced => None,
        }
    }

    pub fn time_scale(&self) -> TimeScale {
        match self {
            FieldKind::McGeheeTau => TimeScale::TauTime,
            FieldKind::AngularSigma { .. } | FieldKind::CollisionManifold => TimeScale::SigmaTime,
            _ => TimeScale::PhysicalT,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FieldKind::AngularSigma { .. } => 3,
            FieldKind::CollisionManifold | FieldKind::MeridianReduced => 2,
            _ => 4,
        }
    }

    /// Energy shell for the on-shell field.
    pub fn energy_context(&self) -> Option<f64> {
        match self {
            FieldKind::AngularSigma { h } => Some(*h),
            _ => None,
        }
    }
}

/// A vector field bound to its parameters; evaluation dispatches on the kind.
#[derive(Debug, Clone, Copy)]
pub struct VectorField {
    pub kind: FieldKind,
    pub params: Params,
}

impl VectorField {
    pub fn new(kind: FieldKind, params: Params) -> Self {
        VectorField { kind, params }
    }

    pub fn eval4(&self, s: &[f64; 4]) -> Result<[f64; 4]> {
        match self.kind {
            FieldKind::SphereGeodesic => vf_sphere_geodesic(s, &self.params),
            FieldKind::SphereVortex(v) => vf_sphere_vortex(s, &self.params, v),
            FieldKind::Plane => vf_plane(s, &self.params),
            FieldKind::McGeheeTau => vf_mcgehee_tau(s, &self.params),
            _ => Err(Error::domain("field is not four-dimensional")),
        }
    }

    pub fn eval3(&self, s: &[f64; 3]) -> Result<[f64; 3]> {
        match self.kind {
            FieldKind::AngularSigma { h } => vf_angular_sigma(s, h, &self.params),
            _ => Err(Error::domain("field is not three-dimensional")),
        }
    }

    pub fn eval2(&self, s: &[f64; 2]) -> Result<[f64; 2]> {
        match self.kind {
            FieldKind::CollisionManifold => Ok(vf_collision_manifold(s[0], s[1], &self.params)),
            FieldKind::MeridianReduced => Ok(vf_meridian_reduced(s, &self.params)),
            _ => Err(Error::domain("field is not two-dimensional")),
        }
    }
}

const SIN_THETA_TOL: f64 = 1e-9;
const VORTEX_CHORD_TOL: f64 = 1e-12;

/// Free co-geodesic Hamiltonian `H = (p_φ²/sin²θ + p_θ²) / 2R²`.
pub fn h_geodesic(s: &[f64; 4], params: &Params) -> f64 {
    let r_sq = params.radius() * params.radius();
    let sin_theta = s[1].sin();
    (s[2] * s[2] / (sin_theta * sin_theta) + s[3] * s[3]) / (2.0 * r_sq)
}

/// Sphere mechanical Hamiltonian: geodesic part plus `(Γ/8π) log(chord²)` with
/// the chord measured to the vortex in the chosen convention.
pub fn h_sphere_vortex(s: &[f64; 4], params: &Params, vortex: VortexPosition) -> f64 {
    let r = params.radius();
    let chord_sq = match vortex {
        VortexPosition::Equator => 2.0 * r * r * (1.0 - s[1].sin() * s[0].sin()),
        VortexPosition::NorthPole => chord_sq_to_north(s[1], params),
    };
    h_geodesic(s, params) + params.gamma() / (8.0 * PI) * chord_sq.ln()
}

/// Plane co-geodesic Hamiltonian `K = l (a p_x² + p_y²)`.
pub fn k_geodesic(s: &[f64; 4], params: &Params) -> Result<f64> {
    let cb = coeffs_xy(PlanePoint::new(s[0], s[1]), params)?;
    Ok(cb.l * (cb.a * s[2] * s[2] + s[3] * s[3]))
}

/// Plane mechanical Hamiltonian `K_mech = K + (Γ/8π) log b`.
pub fn k_mech(s: &[f64; 4], params: &Params) -> Result<f64> {
    let b = coeff_b(PlanePoint::new(s[0], s[1]), params);
    if b == 0.0 {
        return Err(Error::AtVortex);
    }
    Ok(k_geodesic(s, params)? + params.gamma() / (8.0 * PI) * b.ln())
}

/// Energy (reduced Hamiltonian) of a meridian state `(θ, p_θ)` in the
/// north-pole convention with `p_φ = 0`.
pub fn h_meridian(s: &[f64; 2], params: &Params) -> f64 {
    let r_sq = params.radius() * params.radius();
    s[1] * s[1] / (2.0 * r_sq) + params.gamma() / (8.0 * PI) * chord_sq_to_north(s[0], params).ln()
}

/// Free co-geodesic flow on the sphere.
///
/// `p_φ = 0` meridian states are regular at the poles: the `p_φ²/sin³θ` terms
/// are taken as exact zeros before any division.
pub fn vf_sphere_geodesic(s: &[f64; 4], params: &Params) -> Result<[f64; 4]> {
    let [_, theta, p_phi, p_theta] = *s;
    let r_sq = params.radius() * params.radius();
    let sin_theta = theta.sin();
    let (phi_dot, p_theta_dot) = if p_phi == 0.0 {
        (0.0, 0.0)
    } else {
        if sin_theta.abs() < SIN_THETA_TOL {
            return Err(Error::PoleSingular);
        }
        let s3 = sin_theta * sin_theta * sin_theta;
        (p_phi / (r_sq * sin_theta * sin_theta), theta.cos() / (r_sq * s3) * p_phi * p_phi)
    };
    Ok([phi_dot, p_theta / r_sq, 0.0, p_theta_dot])
}

/// Sphere flow under the vortex potential, generated canonically from the
/// Hamiltonian. With the vortex at the north pole the force term is
/// `(Γ/8π) sinθ/(1 + cosθ)` and `ṗ_φ = 0` identically.
pub fn vf_sphere_vortex(s: &[f64; 4], params: &Params, vortex: VortexPosition) -> Result<[f64; 4]> {
    let mut d = vf_sphere_geodesic(s, params)?;
    let [phi, theta, _, _] = *s;
    let g8 = params.gamma() / (8.0 * PI);
    match vortex {
        VortexPosition::Equator => {
            let w = 1.0 - theta.sin() * phi.sin();
            if w.abs() < VORTEX_CHORD_TOL {
                return Err(Error::AtVortex);
            }
            // ṗ = −∂/∂q of (Γ/8π) log(2R²(1 − sinθ sinφ))
            d[2] += g8 * theta.sin() * phi.cos() / w;
            d[3] += g8 * theta.cos() * phi.sin() / w;
        }
        VortexPosition::NorthPole => {
            let w = 1.0 + theta.cos();
            if w.abs() < VORTEX_CHORD_TOL {
                return Err(Error::AtVortex);
            }
            d[3] += g8 * theta.sin() / w;
        }
    }
    Ok(d)
}

/// Meridian reduction of the north-pole flow: `θ̇ = p_θ/R²`,
/// `ṗ_θ = (Γ/8π) sinθ/(1 + cosθ)`, with θ extended smoothly through 0.
pub fn vf_meridian_reduced(s: &[f64; 2], params: &Params) -> [f64; 2] {
    let r_sq = params.radius() * params.radius();
    let w = 1.0 + s[0].cos();
    [s[1] / r_sq, params.gamma() / (8.0 * PI) * s[0].sin() / w]
}

/// Plane mechanical flow (Hamilton's equations of `K_mech`).
pub fn vf_plane(s: &[f64; 4], params: &Params) -> Result<[f64; 4]> {
    let pt = PlanePoint::new(s[0], s[1]);
    if pt.is_origin() {
        return Err(Error::OriginSingular);
    }
    if pt.is_vortex(params) {
        return Err(Error::AtVortex);
    }
    let cb = coeffs_xy(pt, params)?;
    let gr = coeff_grads_xy(pt, params)?;
    let lb = log_b_grad(pt, params)?;
    let g8 = params.gamma() / (8.0 * PI);
    let px_sq = s[2] * s[2];
    let py_sq = s[3] * s[3];
    Ok([
        2.0 * cb.al * s[2],
        2.0 * cb.l * s[3],
        -(gr.d_al[0] * px_sq + gr.d_l[0] * py_sq + g8 * lb[0]),
        -(gr.d_al[1] * px_sq + gr.d_l[1] * py_sq + g8 * lb[1]),
    ])
}

/// Regularized blow-up flow in time τ, state `(r, α, z_x, z_y)`.
///
/// This is the exact pushforward of the plane flow under the blow-up with
/// `dτ = (φ₂/φ₁) dt`; every singular ratio is evaluated through its closed
/// form (for example `r³e^{−1/r²} ∇b/b`, which vanishes like `r²`), so the
/// field is smooth through `r = 0` and `{r = 0}` is invariant.
pub fn vf_mcgehee_tau(s: &[f64; 4], params: &Params) -> Result<[f64; 4]> {
    let [r, alpha, z_x, z_y] = *s;
    if r < 0.0 {
        return Err(Error::domain(format!("blow-up radius must be ≥ 0, got {r}")));
    }
    let cb = coeffs_mcgehee(r, alpha, params)?;
    let gr = coeff_grads_mcgehee(r, alpha, params)?;
    let (sin_a, cos_a) = alpha.sin_cos();
    let pairing = cb.a * z_x * cos_a + z_y * sin_a; // ⟨z, s(α)⟩_a
    let r_sq = r * r;
    let radial_gain = 2.0 * r_sq / (r_sq + 2.0) * cb.l * pairing;
    let p1 = crate::geometry::phi1(r);
    let g8 = params.gamma() / (8.0 * PI);
    let zx_sq = z_x * z_x;
    let zy_sq = z_y * z_y;
    Ok([
        r * radial_gain,
        2.0 * cb.l * (z_y * cos_a - cb.a * z_x * sin_a),
        -p1 * (gr.d_al[0] * zx_sq + gr.d_l[0] * zy_sq) - g8 * gr.scaled_log_b_grad[0]
            + radial_gain * z_x,
        -p1 * (gr.d_al[1] * zx_sq + gr.d_l[1] * zy_sq) - g8 * gr.scaled_log_b_grad[1]
            + radial_gain * z_y,
    ])
}

/// The two momentum components of the τ-flow and the σ-rate of the velocity
/// angle. All three vanish in the collision limit `r → 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABTriple {
    /// `A₁ = dz_x/dτ`.
    pub a1: f64,
    /// `A₂ = dz_y/dτ`.
    pub a2: f64,
    /// `B = dψ/dσ`.
    pub b: f64,
}

/// Relative on-shell tolerance for [`ab_triple`].
const AB_ON_SHELL_TOL: f64 = 1e-8;

/// `A₁`, `A₂`, and `B` at an on-shell blow-up state.
///
/// `B` is assembled by the chain rule from `ψ = atan2(z_y, √a z_x)`: the
/// `d/dτ(√Ê)` contributions cancel, leaving
/// `B = −√a sinψ A₁ + cosψ A₂ − sinψ cosψ √Ê (da/dτ)/(2a)`
/// with `da/dτ` taken along the τ-flow.
pub fn ab_triple(r: f64, alpha: f64, z_x: f64, z_y: f64, h: f64, params: &Params) -> Result<ABTriple> {
    let cb = coeffs_mcgehee(r, alpha, params)?;
    let e = e_hat(h, r, alpha, params);
    let kinetic = cb.a * z_x * z_x + z_y * z_y;
    let residual = (kinetic - e).abs() / e.abs().max(1.0);
    if residual > AB_ON_SHELL_TOL {
        return Err(Error::OffShell { residual });
    }
    let field = vf_mcgehee_tau(&[r, alpha, z_x, z_y], params)?;
    let (a1, a2) = (field[2], field[3]);
    let sqrt_a = cb.a.sqrt();
    let psi = z_y.atan2(sqrt_a * z_x);
    let (sin_p, cos_p) = psi.sin_cos();
    let gr = coeff_grads_mcgehee(r, alpha, params)?;
    let da_dtau = gr.a_r * field[0] + gr.a_alpha * field[1];
    let b = -sqrt_a * sin_p * a1 + cos_p * a2
        - sin_p * cos_p * e.max(0.0).sqrt() * da_dtau / (2.0 * cb.a);
    Ok(ABTriple { a1, a2, b })
}

/// On-shell angular flow in time σ, state `(r, α, ψ)` on the shell of energy
/// `h`:
///
/// ```text
/// dr/dσ = 2r³ Ê l/(2 + r²) (√a cosψ cosα + sinψ sinα)
/// dα/dσ = Ê l (sinψ cosα − √a cosψ sinα)
/// dψ/dσ = B
/// ```
///
/// At `r = 0` this reduces exactly to the collision-manifold flow.
pub fn vf_angular_sigma(s: &[f64; 3], h: f64, params: &Params) -> Result<[f64; 3]> {
    let [r, alpha, psi] = *s;
    if r < 0.0 {
        return Err(Error::domain(format!("blow-up radius must be ≥ 0, got {r}")));
    }
    let e = e_hat(h, r, alpha, params);
    if e < 0.0 {
        return Err(Error::ForbiddenRegion { e_hat: e });
    }
    let cb = coeffs_mcgehee(r, alpha, params)?;
    let sqrt_a = cb.a.sqrt();
    let (sin_p, cos_p) = psi.sin_cos();
    let (sin_a, cos_a) = alpha.sin_cos();
    let f1 = sqrt_a * cos_p * cos_a + sin_p * sin_a;
    let f2 = sin_p * cos_a - sqrt_a * cos_p * sin_a;
    let r_sq = r * r;
    let (z_x, z_y) = psi_to_z(r, alpha, psi, h, params)?;
    let b = ab_triple(r, alpha, z_x, z_y, h, params)?.b;
    Ok([
        2.0 * r_sq * r * e * cb.l / (2.0 + r_sq) * f1,
        e * cb.l * f2,
        b,
    ])
}

/// Flow restricted to the total collision manifold `{r = 0}`:
/// `dα/dσ = (Γ/4π) sin(ψ − α)`, `dψ/dσ = 0`.
pub fn vf_collision_manifold(alpha: f64, psi: f64, params: &Params) -> [f64; 2] {
    [params.gamma() / (4.0 * PI) * (psi - alpha).sin(), 0.0]
}
