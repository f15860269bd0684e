//! Energy thresholds, the effective-energy functions `Ẽ_h` and `Ê`, regime
//! classification, level circles of `b`, and the zero-velocity manifold.
//!
//! The dictionary `δ = exp(8πh/Γ)` links level sets of `b` to energy levels:
//! `Ẽ_h = 0 ⇔ b = δ`.

use std::f64::consts::PI;

use crate::charts::phi1_inverse;
use crate::error::{Error, Result};
use crate::geometry::{coeff_c, phi1, phi1_prime, wrap_angle, Params, PlanePoint, coeff_b};

/// Energy thresholds `h₁ = (Γ/8π) log(2R²)` and `h₂ = (Γ/4π) log(2R)`.
///
/// `h₂ − h₁ = (Γ/8π) log 2 > 0` for every admissible `(R, Γ)`.
pub fn thresholds(params: &Params) -> (f64, f64) {
    let r = params.radius();
    let g = params.gamma();
    let h1 = g / (8.0 * PI) * (2.0 * r * r).ln();
    let h2 = g / (4.0 * PI) * (2.0 * r).ln();
    (h1, h2)
}

/// Plane-chart effective energy `Ẽ_h(x, y) = h − (Γ/8π) log b(x, y)`.
///
/// Positive exactly where motion at energy `h` is allowed.
pub fn e_tilde(h: f64, p: PlanePoint, params: &Params) -> Result<f64> {
    let b = coeff_b(p, params);
    if b == 0.0 {
        return Err(Error::AtVortex);
    }
    Ok(h - params.gamma() / (8.0 * PI) * b.ln())
}

/// Blown-up effective energy `Ê(h, r, α) = (r²/l)(h − (Γ/8π) log b)`.
///
/// Evaluated in the algebraically equivalent form
/// `(c²/8R²)·[Γ/4π + r²(h − (Γ/8π)log 2R² − (Γ/4π)log r + (Γ/8π)log c)]`,
/// which stays finite through `r = 0` — the `(Γ/8π)·2/r²` blow-up of the
/// bracket cancels against `r²` exactly, so no `e^{−1/r²}` is ever formed.
/// At `r = 0` this returns the collision-manifold constant `2ΓR²/π`,
/// independent of `h` and `α`.
pub fn e_hat(h: f64, r: f64, alpha: f64, params: &Params) -> f64 {
    let rad = params.radius();
    let g = params.gamma();
    let c = coeff_c(r, alpha, params);
    let front = c * c / (8.0 * rad * rad);
    let constant = g / (4.0 * PI);
    if r == 0.0 {
        return front * constant;
    }
    let bracket = h - g / (8.0 * PI) * (2.0 * rad * rad).ln() - g / (4.0 * PI) * r.ln()
        + g / (8.0 * PI) * c.ln();
    front * (constant + r * r * bracket)
}

/// Partial derivatives `(∂Ê/∂r, ∂Ê/∂α)`; both vanish at `r = 0`.
pub fn e_hat_partials(h: f64, r: f64, alpha: f64, params: &Params) -> (f64, f64) {
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let rad = params.radius();
    let g = params.gamma();
    let p1 = phi1(r);
    let c = coeff_c(r, alpha, params);
    let c_r = phi1_prime(r) * (2.0 * p1 + 4.0 * rad * alpha.sin());
    let c_alpha = 4.0 * rad * p1 * alpha.cos();
    let front = c * c / (8.0 * rad * rad);
    let constant = g / (4.0 * PI);
    let bracket = h - g / (8.0 * PI) * (2.0 * rad * rad).ln() - g / (4.0 * PI) * r.ln()
        + g / (8.0 * PI) * c.ln();
    let inner = constant + r * r * bracket;
    // d/dr[r² bracket] = 2r·bracket + r²·(−Γ/4πr + (Γ/8π) c_r/c)
    let inner_r = 2.0 * r * bracket - g / (4.0 * PI) * r + r * r * g / (8.0 * PI) * c_r / c;
    let front_r = 2.0 * c * c_r / (8.0 * rad * rad);
    let d_r = front_r * inner + front * inner_r;
    let front_a = 2.0 * c * c_alpha / (8.0 * rad * rad);
    let inner_a = r * r * g / (8.0 * PI) * c_alpha / c;
    let d_alpha = front_a * inner + front * inner_a;
    (d_r, d_alpha)
}

/// A disk descriptor in the stereographic plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: (f64, f64),
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        dx * dx + dy * dy < self.radius * self.radius
    }
}

/// Which region of the configuration plane is accessible at energy `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeKind {
    /// `h > h₂`: `Ẽ_h > 0` everywhere.
    AllowedEverywhere,
    /// `h₁ < h < h₂`: motion forbidden inside a disk in the `y < 0` half-plane
    /// containing `(0, −2R)`.
    ForbiddenDisk(Disk),
    /// `h < h₁`: motion allowed only inside a disk containing the vortex image
    /// `(0, 2R)`.
    AllowedDisk(Disk),
    /// `h = h₁` within tolerance: the level set degenerates to the line `y = 0`.
    BoundaryH1,
    /// `h = h₂` within tolerance: the forbidden region degenerates to the
    /// point `(0, −2R)`.
    BoundaryH2,
}

/// Classification of an energy level against the thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRegime {
    pub h: f64,
    pub h1: f64,
    pub h2: f64,
    pub kind: RegimeKind,
}

/// Absolute tolerance for matching `h` to a threshold.
pub const THRESHOLD_TOL: f64 = 1e-9;

/// The `δ`-level set of `b`: a circle for `δ ∈ (0, 2R²) ∪ (2R², 4R²)`, the
/// line `y = 0` at `δ = 2R²`, and single points at the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSet {
    /// `δ = 0` → the vortex image `(0, 2R)`; `δ = 4R²` → `(0, −2R)`.
    Point((f64, f64)),
    /// `δ = 2R²`: the level set is the line `y = 0` (topological transition).
    Line,
    Circle(Disk),
}

/// Level circle `C_δ` of `b`: center `(0, 4R³/(2R² − δ))`, radius
/// `2R/|2R² − δ| √(4δR² − δ²)`.
pub fn level_circle(delta: f64, params: &Params) -> Result<LevelSet> {
    let r = params.radius();
    let r_sq = r * r;
    if !(0.0..=4.0 * r_sq).contains(&delta) {
        return Err(Error::domain(format!(
            "b level must lie in [0, 4R²] = [0, {}], got {delta}",
            4.0 * r_sq
        )));
    }
    let tol = 1e-12 * r_sq;
    if delta <= tol {
        return Ok(LevelSet::Point((0.0, 2.0 * r)));
    }
    if (delta - 4.0 * r_sq).abs() <= tol {
        return Ok(LevelSet::Point((0.0, -2.0 * r)));
    }
    if (delta - 2.0 * r_sq).abs() <= tol {
        return Ok(LevelSet::Line);
    }
    let denom = 2.0 * r_sq - delta;
    let center = (0.0, 4.0 * r_sq * r / denom);
    let radius = 2.0 * r / denom.abs() * (4.0 * delta * r_sq - delta * delta).sqrt();
    Ok(LevelSet::Circle(Disk { center, radius }))
}

/// Classify an energy level `h` into its regime, with the disk descriptor
/// computed from the level circle at `δ = exp(8πh/Γ)`.
pub fn classify(h: f64, params: &Params) -> EnergyRegime {
    let (h1, h2) = thresholds(params);
    let kind = if (h - h1).abs() <= THRESHOLD_TOL {
        RegimeKind::BoundaryH1
    } else if (h - h2).abs() <= THRESHOLD_TOL {
        RegimeKind::BoundaryH2
    } else if h > h2 {
        RegimeKind::AllowedEverywhere
    } else {
        let delta = (8.0 * PI * h / params.gamma()).exp();
        match level_circle(delta, params) {
            Ok(LevelSet::Circle(disk)) => {
                if h > h1 {
                    RegimeKind::ForbiddenDisk(disk)
                } else {
                    RegimeKind::AllowedDisk(disk)
                }
            }
            // δ underflows to 0 for very negative h: the allowed disk has
            // collapsed onto the vortex image.
            _ => RegimeKind::AllowedDisk(Disk { center: (0.0, 2.0 * params.radius()), radius: 0.0 }),
        }
    };
    EnergyRegime { h, h1, h2, kind }
}

/// Topology of the zero-velocity set `{Ê(h, ·, ·) = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZvmTopology {
    /// `h > h₂`: no zero-velocity points.
    Empty,
    /// `h = h₂`: the set degenerates to the single point `(r*, 3π/2)`.
    PointLimit,
    /// `h₁ ≤ h < h₂`: a closed curve not encircling the collision point.
    ClosedCurve,
    /// `h < h₁`: the graph of a single-valued function `α ↦ r(α)`.
    GraphOverAlpha,
}

/// Sampled zero-velocity manifold at energy `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZvmCurve {
    pub h: f64,
    pub topology: ZvmTopology,
    /// Samples in blow-up coordinates `(α, r)`; single-valued in `α` only for
    /// [`ZvmTopology::GraphOverAlpha`].
    pub radial_samples: Vec<(f64, f64)>,
    /// The same samples as a plane polyline `(x, y)`.
    pub plane_samples: Vec<(f64, f64)>,
}

/// Residual bound `|Ê|` required of every zero-velocity sample.
pub const ZVM_RESIDUAL_TOL: f64 = 1e-9;

/// Sample the zero-velocity manifold at energy `h`.
///
/// For `h < h₁` each `r(α)` is found by bracketed bisection of `Ê(h, ·, α)`;
/// for `h₁ ≤ h < h₂` the curve is the image of the level circle `C_δ`,
/// `δ = exp(8πh/Γ)`, under the blow-up.
pub fn zvm_curve(h: f64, params: &Params, n_samples: usize) -> Result<ZvmCurve> {
    let (h1, h2) = thresholds(params);
    let n = n_samples.max(4);
    let rad = params.radius();
    if (h - h2).abs() <= THRESHOLD_TOL {
        let r_star = phi1_inverse(4.0 * rad)?;
        let alpha = 1.5 * PI;
        return Ok(ZvmCurve {
            h,
            topology: ZvmTopology::PointLimit,
            radial_samples: vec![(alpha, r_star)],
            plane_samples: vec![(0.0, -2.0 * rad)],
        });
    }
    if h > h2 {
        return Ok(ZvmCurve {
            h,
            topology: ZvmTopology::Empty,
            radial_samples: Vec::new(),
            plane_samples: Vec::new(),
        });
    }
    let delta = (8.0 * PI * h / params.gamma()).exp();
    if h >= h1 {
        // Closed curve: map the δ-circle into blow-up coordinates.
        let disk = match level_circle(delta, params)? {
            LevelSet::Circle(d) => d,
            other => {
                return Err(Error::domain(format!(
                    "level set degenerate ({other:?}) inside (h₁, h₂)"
                )))
            }
        };
        let mut radial = Vec::with_capacity(n);
        let mut plane = Vec::with_capacity(n);
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            let x = disk.center.0 + disk.radius * t.cos();
            let y = disk.center.1 + disk.radius * t.sin();
            let dy = y - 2.0 * rad;
            let rho = (x * x + dy * dy).sqrt();
            let r = phi1_inverse(rho)?;
            radial.push((wrap_angle(dy.atan2(x)), r));
            plane.push((x, y));
        }
        return Ok(ZvmCurve { h, topology: ZvmTopology::ClosedCurve, radial_samples: radial, plane_samples: plane });
    }
    // h < h₁: r(α) graph around the collision point by bisection of Ê.
    // For very negative h the δ-circle underflows even though the curve itself
    // is representable in the blow-up gauge; a unit bracket then suffices.
    let disk = match level_circle(delta, params)? {
        LevelSet::Circle(d) => Some(d),
        LevelSet::Point(_) => None,
        LevelSet::Line => return Err(Error::domain("degenerate line level set below h₁")),
    };
    let vortex_y = 2.0 * rad;
    let mut radial = Vec::with_capacity(n);
    let mut plane = Vec::with_capacity(n);
    for k in 0..n {
        let alpha = 2.0 * PI * k as f64 / n as f64;
        // Far intersection of the ray from the vortex image with C_δ bounds the
        // bracket: ρ² + 2ρ d·(V−O) + |V−O|² − ρ_c² = 0 with V inside the circle.
        let r_hi = match &disk {
            Some(disk) => {
                let (dx, dy) = (alpha.cos(), alpha.sin());
                let ox = -disk.center.0;
                let oy = vortex_y - disk.center.1;
                let beta = dx * ox + dy * oy;
                let gamma_c = ox * ox + oy * oy - disk.radius * disk.radius;
                let rho_far = -beta + (beta * beta - gamma_c).sqrt();
                phi1_inverse(rho_far)? * 1.2 + 0.1
            }
            None => 1.0,
        };
        let mut lo = 1e-3;
        let mut hi = r_hi;
        let f_lo = e_hat(h, lo, alpha, params);
        let f_hi = e_hat(h, hi, alpha, params);
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return Err(Error::domain(format!(
                "zero-velocity bracket failed at α = {alpha}: Ê({lo}) = {f_lo}, Ê({hi}) = {f_hi}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi || hi - lo < 1e-12 {
                break;
            }
            if e_hat(h, mid, alpha, params) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        radial.push((alpha, r));
        let p1 = phi1(r);
        plane.push((p1 * alpha.cos(), p1 * alpha.sin() + vortex_y));
    }
    Ok(ZvmCurve { h, topology: ZvmTopology::GraphOverAlpha, radial_samples: radial, plane_samples: plane })
}

/// The unique zero-velocity restpoint `(r*, 3π/2)` with `φ₁(r*) = 4R`, present
/// only at `h = h₂` (within [`THRESHOLD_TOL`]).
pub fn zvm_restpoint(h: f64, params: &Params) -> Result<Option<(f64, f64)>> {
    let (_, h2) = thresholds(params);
    if (h - h2).abs() >= THRESHOLD_TOL {
        return Ok(None);
    }
    let r_star = phi1_inverse(4.0 * params.radius())?;
    Ok(Some((r_star, 1.5 * PI)))
}
