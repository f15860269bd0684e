//! Sphere parameterization, stereographic projection, and the metric/potential
//! coefficient functions `a`, `l`, `b`, `a·l`, `c`, `φ₁`, `φ₂` with their
//! derivatives, in both Cartesian and blown-up (McGehee) arguments.
//!
//! Geometry conventions: the sphere has radius `R` and center `(0, 0, R)`, so it
//! is tangent to the plane `z = 0` at the south pole. The vortex sits at
//! `Q = (0, R, R)`, whose stereographic image is `V = (0, 2R)`. Angles are
//! `φ ∈ [0, 2π)` (polar angle of the projection onto `z = 0`) and `θ ∈ [0, π]`
//! (angle from the negative z-direction measured at the center), so `θ = 0` is
//! the south pole and `θ = π` the north pole.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Global physical context: sphere radius and vortex circulation.
///
/// Both are strictly positive; the repelling case `Γ < 0` is out of scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    radius: f64,
    gamma: f64,
}

impl Params {
    pub fn new(radius: f64, gamma: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::domain(format!("sphere radius must be > 0, got {radius}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::domain(format!("circulation must be > 0, got {gamma}")));
        }
        Ok(Params { radius, gamma })
    }

    /// Sphere radius `R`.
    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Circulation strength `Γ`.
    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for Params {
    /// `R = 1`, `Γ = 1`.
    fn default() -> Self {
        Params { radius: 1.0, gamma: 1.0 }
    }
}

/// Wrap an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can return exactly 2π after rounding when x is a tiny negative.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

const THETA_CLAMP_TOL: f64 = 1e-12;

/// A point on the sphere in the (φ, θ) angular chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub phi: f64,
    pub theta: f64,
}

impl SpherePoint {
    /// Normalizing constructor: wraps `φ` into `[0, 2π)` and clamps `θ` into
    /// `[0, π]` when within `1e-12`; rejects anything further out.
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        if !phi.is_finite() || !theta.is_finite() {
            return Err(Error::domain("sphere angles must be finite"));
        }
        if !(-THETA_CLAMP_TOL..=std::f64::consts::PI + THETA_CLAMP_TOL).contains(&theta) {
            return Err(Error::domain(format!("θ = {theta} out of [0, π]")));
        }
        Ok(SpherePoint {
            phi: wrap_angle(phi),
            theta: theta.clamp(0.0, std::f64::consts::PI),
        })
    }
}

/// A point in the stereographic plane.
///
/// `(0, 0)` is the metric singularity (image of the south pole under the chart
/// functions `a`, `a·l`) and `(0, 2R)` is the vortex image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Self {
        PlanePoint { x, y }
    }

    /// Squared distance to the plane origin.
    #[inline]
    pub fn rho_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Squared distance to the vortex image `(0, 2R)`.
    #[inline]
    pub fn vortex_dist_sq(&self, params: &Params) -> f64 {
        let dy = self.y - 2.0 * params.radius();
        self.x * self.x + dy * dy
    }

    pub fn is_origin(&self) -> bool {
        self.rho_sq() == 0.0
    }

    pub fn is_vortex(&self, params: &Params) -> bool {
        self.vortex_dist_sq(params) == 0.0
    }
}

/// Embed a sphere point: `R (sinθ cosφ, sinθ sinφ, 1 − cosθ)`.
pub fn sphere_param(p: SpherePoint, params: &Params) -> [f64; 3] {
    let r = params.radius();
    let (s_th, c_th) = p.theta.sin_cos();
    let (s_ph, c_ph) = p.phi.sin_cos();
    [r * s_th * c_ph, r * s_th * s_ph, r * (1.0 - c_th)]
}

/// Stereographic projection from the north pole: `(x, y, z) ↦ 2R/(2R − z) (x, y)`.
pub fn stereo_project(p: [f64; 3], params: &Params) -> Result<PlanePoint> {
    let two_r = 2.0 * params.radius();
    let denom = two_r - p[2];
    if denom.abs() <= 1e-12 * two_r {
        return Err(Error::NorthPole);
    }
    let f = two_r / denom;
    Ok(PlanePoint::new(f * p[0], f * p[1]))
}

/// Inverse stereographic projection: `φ = atan2(y, x)`, `θ = 2 atan(√(x²+y²)/2R)`.
///
/// The origin maps to the south pole with `φ = 0` by convention.
pub fn stereo_inverse(p: PlanePoint, params: &Params) -> SpherePoint {
    let rho = p.rho_sq().sqrt();
    let phi = if rho == 0.0 { 0.0 } else { wrap_angle(p.y.atan2(p.x)) };
    let theta = 2.0 * (rho / (2.0 * params.radius())).atan();
    SpherePoint { phi, theta }
}

/// Squared chord distance from a sphere point to the vortex `Q = (0, R, R)`:
/// `2R²(1 − sinθ sinφ)`.
///
/// Computed from the angular formula rather than embedded coordinates so the
/// cancellation at the vortex itself is exact.
pub fn chord_sq(p: SpherePoint, params: &Params) -> f64 {
    let r = params.radius();
    2.0 * r * r * (1.0 - p.theta.sin() * p.phi.sin())
}

/// Squared chord distance to the north pole, `2R²(1 + cosθ)`.
///
/// This is the vortex distance in the convention that places the vortex at the
/// north pole (θ = π); it depends on θ only.
pub fn chord_sq_to_north(theta: f64, params: &Params) -> f64 {
    let r = params.radius();
    2.0 * r * r * (1.0 + theta.cos())
}

/// Geodesic (great-circle) distance between two embedded points on a sphere of
/// radius `r` centered at `(0, 0, r)`: `r arccos(⟨x, y⟩ / r²)` with
/// center-relative vectors.
pub fn geodesic_distance(p1: [f64; 3], p2: [f64; 3], r: f64) -> Result<f64> {
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::domain(format!("sphere radius must be > 0, got {r}")));
    }
    let tol = 1e-9 * r.max(1.0);
    let v1 = [p1[0], p1[1], p1[2] - r];
    let v2 = [p2[0], p2[1], p2[2] - r];
    for v in [&v1, &v2] {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let deviation = (norm - r).abs();
        if deviation > tol {
            return Err(Error::OffSphere { deviation });
        }
    }
    let dot = v1[0] * v2[0] + v1[1] * v2[1] + v1[2] * v2[2];
    Ok(r * (dot / (r * r)).clamp(-1.0, 1.0).acos())
}

/// Metric and potential coefficients at one configuration point.
///
/// `c` is populated only when the bundle was evaluated in blown-up arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffBundle {
    /// Anisotropy factor `a = [(4R² + x² + y²) / (4R √(x² + y²))]²`.
    pub a: f64,
    /// Conformal factor `l = 8R² / (4R² + x² + y²)²`.
    pub l: f64,
    /// Squared chord distance to the vortex, `b = 2R²(x² + (y − 2R)²)/(4R² + x² + y²)`.
    pub b: f64,
    /// The product `a·l = 1 / (2(x² + y²))`.
    pub al: f64,
    /// `c(r, s) = 8R² + φ₁² + 4Rφ₁ sinα` (equals `4R² + x² + y²` at the blown-up point).
    pub c: Option<f64>,
}

/// Conformal factor `l(x, y)`, defined on the whole plane.
pub fn coeff_l(p: PlanePoint, params: &Params) -> f64 {
    let r = params.radius();
    let v = 4.0 * r * r + p.rho_sq();
    8.0 * r * r / (v * v)
}

/// Potential coefficient `b(x, y)`, defined on the whole plane; `b = 0` exactly
/// at the vortex image and `b ≤ 4R²` everywhere.
pub fn coeff_b(p: PlanePoint, params: &Params) -> f64 {
    let r = params.radius();
    let u = p.vortex_dist_sq(params);
    let v = 4.0 * r * r + p.rho_sq();
    2.0 * r * r * u / v
}

/// All coefficients at a plane point. Fails at the origin, where `a` and `a·l`
/// are singular; use [`coeff_l`]/[`coeff_b`] there instead.
pub fn coeffs_xy(p: PlanePoint, params: &Params) -> Result<CoeffBundle> {
    let rho_sq = p.rho_sq();
    if rho_sq == 0.0 {
        return Err(Error::OriginSingular);
    }
    let r = params.radius();
    let v = 4.0 * r * r + rho_sq;
    let a_sqrt = v / (4.0 * r * rho_sq.sqrt());
    Ok(CoeffBundle {
        a: a_sqrt * a_sqrt,
        l: 8.0 * r * r / (v * v),
        b: coeff_b(p, params),
        al: 1.0 / (2.0 * rho_sq),
        c: None,
    })
}

/// Cartesian gradients of `a·l`, `l`, and `b` at a plane point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffGrads {
    pub d_al: [f64; 2],
    pub d_l: [f64; 2],
    pub d_b: [f64; 2],
}

/// Closed-form gradients of the coefficient functions; fails at the origin
/// where `∂(a·l)` is singular.
pub fn coeff_grads_xy(p: PlanePoint, params: &Params) -> Result<CoeffGrads> {
    let rho_sq = p.rho_sq();
    if rho_sq == 0.0 {
        return Err(Error::OriginSingular);
    }
    let r = params.radius();
    let u = p.vortex_dist_sq(params);
    let v = 4.0 * r * r + rho_sq;
    let al_factor = -1.0 / (rho_sq * rho_sq);
    let l_factor = -32.0 * r * r / (v * v * v);
    // v − u = 4Ry, so ∂x b collapses to 16R³ x y / v².
    let b_x = 16.0 * r * r * r * p.x * p.y / (v * v);
    let b_y = 2.0 * r * r * (2.0 * (p.y - 2.0 * r) * v - 2.0 * p.y * u) / (v * v);
    Ok(CoeffGrads {
        d_al: [al_factor * p.x, al_factor * p.y],
        d_l: [l_factor * p.x, l_factor * p.y],
        d_b: [b_x, b_y],
    })
}

/// Logarithmic gradient `∇b / b`, singular only at the vortex image.
pub fn log_b_grad(p: PlanePoint, params: &Params) -> Result<[f64; 2]> {
    let u = p.vortex_dist_sq(params);
    if u == 0.0 {
        return Err(Error::AtVortex);
    }
    let r = params.radius();
    let v = 4.0 * r * r + p.rho_sq();
    Ok([
        2.0 * p.x / u - 2.0 * p.x / v,
        2.0 * (p.y - 2.0 * r) / u - 2.0 * p.y / v,
    ])
}

/// Blow-up radial profile `φ₁(r) = r e^{−1/r²}`, extended by `φ₁(0) = 0`.
///
/// Strictly increasing on `r > 0`; underflows to zero below `r ≈ 0.037`, which
/// coincides with the continuous extension. The formula itself stays finite
/// for negative arguments, which integrator stages may probe; domain checks
/// belong to the callers.
pub fn phi1(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * (-1.0 / (r * r)).exp()
    }
}

/// `φ₁′(r) = e^{−1/r²}(1 + 2/r²)`, extended by `φ₁′(0) = 0`.
pub fn phi1_prime(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        (-1.0 / (r * r)).exp() * (1.0 + 2.0 / (r * r))
    }
}

/// Momentum rescaling profile `φ₂(r) = 1/r`.
pub fn phi2(r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::domain(format!("φ₂ requires r > 0, got {r}")));
    }
    Ok(1.0 / r)
}

/// `c(r, α) = 8R² + φ₁(r)² + 4R φ₁(r) sinα`; tends to `8R²` as `r → 0`.
pub fn coeff_c(r: f64, alpha: f64, params: &Params) -> f64 {
    let rad = params.radius();
    let p1 = phi1(r);
    8.0 * rad * rad + p1 * p1 + 4.0 * rad * p1 * alpha.sin()
}

/// Coefficients at a blown-up configuration `(r, α)`.
///
/// The closed forms in `c` remain finite and smooth through `r = 0`, where they
/// reproduce the limits `a → 1`, `b → 0`, `l → 1/8R²`, `c → 8R²` exactly.
pub fn coeffs_mcgehee(r: f64, alpha: f64, params: &Params) -> Result<CoeffBundle> {
    if r < 0.0 {
        return Err(Error::domain(format!("blow-up radius must be ≥ 0, got {r}")));
    }
    let rad = params.radius();
    let four_r_sq = 4.0 * rad * rad;
    let p1 = phi1(r);
    let c = coeff_c(r, alpha, params);
    // x² + y² at the blown-up point equals c − 4R².
    let rho_sq = c - four_r_sq;
    Ok(CoeffBundle {
        a: c * c / (4.0 * four_r_sq * rho_sq),
        l: 8.0 * rad * rad / (c * c),
        b: 2.0 * rad * rad * p1 * p1 / c,
        al: 1.0 / (2.0 * rho_sq),
        c: Some(c),
    })
}

/// Coefficient derivatives evaluated at blown-up arguments.
///
/// `d_al` and `d_l` are the Cartesian-direction partials evaluated at the
/// blown-up point. The logarithmic gradient of `b` is only provided as the
/// product `r³ e^{−1/r²} ∇b/b`, which is the combination appearing in the
/// regularized field; it is regular through `r = 0` while `∇b/b` alone is not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McGeheeCoeffGrads {
    pub d_al: [f64; 2],
    pub d_l: [f64; 2],
    /// `r³ e^{−1/r²} · (b_x/b, b_y/b)`, i.e. `r² φ₁ ∇b/b`, regular at `r = 0`.
    pub scaled_log_b_grad: [f64; 2],
    /// Partial of `a(r, α)` with respect to `r`.
    pub a_r: f64,
    /// Partial of `a(r, α)` with respect to `α`.
    pub a_alpha: f64,
}

pub fn coeff_grads_mcgehee(r: f64, alpha: f64, params: &Params) -> Result<McGeheeCoeffGrads> {
    if r < 0.0 {
        return Err(Error::domain(format!("blow-up radius must be ≥ 0, got {r}")));
    }
    let rad = params.radius();
    let four_r_sq = 4.0 * rad * rad;
    let (s_a, c_a) = alpha.sin_cos();
    let p1 = phi1(r);
    let c = coeff_c(r, alpha, params);
    let rho_sq = c - four_r_sq;
    let x = p1 * c_a;
    let y_num = p1 * s_a + 2.0 * rad; // the plane y-coordinate

    let al_factor = -1.0 / (rho_sq * rho_sq);
    let l_factor = -32.0 * rad * rad / (c * c * c);

    // r³ e^{−1/r²} b_x/b = 2r² cosα − 2r² φ₁² cosα / c, and likewise in y with
    // the vortex offset; both vanish like r² as r → 0.
    let r_sq = r * r;
    let gbx = 2.0 * r_sq * c_a - 2.0 * r_sq * p1 * p1 * c_a / c;
    let gby = 2.0 * r_sq * s_a - 2.0 * r_sq * p1 * y_num / c;

    // a = c² / (16R²(c − 4R²)) so da/dc = c(c − 8R²) / (16R²(c − 4R²)²).
    let da_dc = c * (c - 8.0 * rad * rad) / (4.0 * four_r_sq * rho_sq * rho_sq);
    let c_r = phi1_prime(r) * (2.0 * p1 + 4.0 * rad * s_a);
    let c_alpha = 4.0 * rad * p1 * c_a;

    Ok(McGeheeCoeffGrads {
        d_al: [al_factor * x, al_factor * y_num],
        d_l: [l_factor * x, l_factor * y_num],
        scaled_log_b_grad: [gbx, gby],
        a_r: da_dc * c_r,
        a_alpha: da_dc * c_alpha,
    })
}
