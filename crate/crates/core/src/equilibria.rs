//! Restpoint curves 𝒫₁/𝒫₂ on the collision torus, numeric Jacobians and
//! eigenvalues of the on-shell flow, transverse stability signs, and
//! verification of the collision-manifold heteroclinics against their closed
//! form.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::charts::Chart;
use crate::dynamics::{vf_angular_sigma, vf_collision_manifold};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Params};
use crate::integrate::{integrate, IntegratorOptions, RecordMode};

/// The two circles of equilibria on the collision torus, plus the isolated
/// zero-velocity restpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestFamily {
    /// `(0, α, α)`: ejection asymptotics, attracting within the manifold.
    P1,
    /// `(0, α, π + α)`: collision asymptotics, repelling within the manifold.
    P2,
    /// The zero-velocity restpoint present only at `h = h₂`.
    ZvmPoint,
}

/// Local stability classification of a restpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Single nonzero real eigenvalue with the saddle-type local portrait.
    DegenerateSaddle,
    /// Attracting within the collision manifold.
    Attractor,
    /// Repelling within the collision manifold.
    Repeller,
    Other,
}

/// An equilibrium with its numerically computed spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RestPoint {
    pub chart: Chart,
    /// `(r, α, ψ)` coordinates.
    pub location: [f64; 3],
    pub family: RestFamily,
    /// Eigenvalues of the σ-flow Jacobian, sorted by real part.
    pub eigenvalues: Vec<Complex64>,
    pub classification: Classification,
}

/// Eigenvalues with magnitude below this are reported as exact zeros; the
/// variational matrix on the collision manifold has all entries zero except
/// the α-diagonal one.
pub const EIGENVALUE_ZERO_SNAP: f64 = 1e-7;

/// Sample both restpoint curves at `n` values of α, with residual check and
/// numeric spectrum at each point.
pub fn restpoint_curves(params: &Params, n: usize) -> Result<Vec<RestPoint>> {
    if n == 0 {
        return Err(Error::domain("need at least one α sample"));
    }
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let alpha = 2.0 * PI * k as f64 / n as f64;
        for family in [RestFamily::P1, RestFamily::P2] {
            let psi = match family {
                RestFamily::P1 => alpha,
                RestFamily::P2 => wrap_angle(alpha + PI),
                RestFamily::ZvmPoint => unreachable!(),
            };
            let location = [0.0, alpha, psi];
            let field = vf_angular_sigma(&location, 0.0, params)?;
            let residual = field.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if residual > 1e-10 {
                return Err(Error::domain(format!(
                    "restpoint residual {residual} at α = {alpha}"
                )));
            }
            let eigenvalues = jacobian_eigs(&location, params)?;
            out.push(RestPoint {
                chart: Chart::AngularSigma,
                location,
                family,
                classification: Classification::DegenerateSaddle,
                eigenvalues,
            });
        }
    }
    Ok(out)
}

/// Numeric Jacobian of the σ-flow at a collision-manifold point: central
/// differences in α and ψ, one-sided forward differences in r (the domain
/// boundary), using steps `{1e-4, 1e-5}` combined by Richardson extrapolation.
pub fn sigma_flow_jacobian(location: &[f64; 3], params: &Params) -> Result<[[f64; 3]; 3]> {
    // The collision flow is independent of the shell energy; any h works.
    let h_energy = 0.0;
    let f = |s: &[f64; 3]| vf_angular_sigma(s, h_energy, params);
    let base = *location;
    let mut jac = [[0.0; 3]; 3];

    // r column: one-sided with Richardson check (r < 0 is outside the domain).
    let f0 = f(&base)?;
    let (h1, h2) = (1e-4, 1e-5);
    let mut s1 = base;
    s1[0] += h1;
    let mut s2 = base;
    s2[0] += h2;
    let fr1 = f(&s1)?;
    let fr2 = f(&s2)?;
    for i in 0..3 {
        let d1 = (fr1[i] - f0[i]) / h1;
        let d2 = (fr2[i] - f0[i]) / h2;
        jac[i][0] = (h1 * d2 - h2 * d1) / (h1 - h2);
    }

    // α and ψ columns: central differences.
    for col in 1..3 {
        let step = 1e-6;
        let mut hi = base;
        let mut lo = base;
        hi[col] += step;
        lo[col] -= step;
        let fhi = f(&hi)?;
        let flo = f(&lo)?;
        for i in 0..3 {
            jac[i][col] = (fhi[i] - flo[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Eigenvalues of the numeric σ-flow Jacobian at a collision-manifold point,
/// sorted by real part, with near-zero values snapped to exact zeros.
pub fn jacobian_eigs(location: &[f64; 3], params: &Params) -> Result<Vec<Complex64>> {
    let jac = sigma_flow_jacobian(location, params)?;
    let mut eigs = eigenvalues_3x3(&jac).to_vec();
    for e in &mut eigs {
        if e.norm() < EIGENVALUE_ZERO_SNAP {
            *e = Complex64::new(0.0, 0.0);
        }
        if e.im.abs() < EIGENVALUE_ZERO_SNAP {
            *e = Complex64::new(e.re, 0.0);
        }
    }
    eigs.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    Ok(eigs)
}

/// Eigenvector of a 3×3 matrix for an (approximately real) eigenvalue λ,
/// taken as the largest cross product of two rows of `M − λI`.
pub fn real_eigenvector_3x3(m: &[[f64; 3]; 3], lambda: f64) -> [f64; 3] {
    let a = [
        [m[0][0] - lambda, m[0][1], m[0][2]],
        [m[1][0], m[1][1] - lambda, m[1][2]],
        [m[2][0], m[2][1], m[2][2] - lambda],
    ];
    let cross = |u: &[f64; 3], v: &[f64; 3]| {
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    };
    let candidates = [cross(&a[0], &a[1]), cross(&a[0], &a[2]), cross(&a[1], &a[2])];
    let mut best = candidates[0];
    let mut best_norm = 0.0;
    for c in candidates {
        let n = c.iter().map(|x| x * x).sum::<f64>();
        if n > best_norm {
            best_norm = n;
            best = c;
        }
    }
    let n = best_norm.sqrt();
    if n == 0.0 {
        return [0.0, 0.0, 0.0];
    }
    [best[0] / n, best[1] / n, best[2] / n]
}

/// Roots of the monic cubic `λ³ + a2 λ² + a1 λ + a0`.
///
/// Cardano estimates are polished by Newton; the best-converged root is then
/// deflated out and the remaining pair solved as a quadratic. Clustered small
/// roots (the restpoint Jacobians are near-rank-one) would otherwise inherit
/// the √ε conditioning of the closed form.
fn solve_cubic_monic(a2: f64, a1: f64, a0: f64) -> [Complex64; 3] {
    let poly = |z: Complex64| ((z + a2) * z + a1) * z + a0;
    let dpoly = |z: Complex64| (3.0 * z + 2.0 * a2) * z + a1;

    // Depress: λ = t − a2/3 ⇒ t³ + p t + q.
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    let estimates: [Complex64; 3] = if p == 0.0 && q == 0.0 {
        [Complex64::new(-shift, 0.0); 3]
    } else {
        let half_q = Complex64::new(q / 2.0, 0.0);
        let disc = half_q * half_q + Complex64::new(p / 3.0, 0.0).powu(3);
        let sq = disc.sqrt();
        let u3 = if (-half_q + sq).norm() >= (-half_q - sq).norm() {
            -half_q + sq
        } else {
            -half_q - sq
        };
        let u = u3.powf(1.0 / 3.0);
        let v = if u.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            -Complex64::new(p / 3.0, 0.0) / u
        };
        let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
        let omega2 = omega * omega;
        [u + v - shift, omega * u + omega2 * v - shift, omega2 * u + omega * v - shift]
    };

    // Newton-polish each estimate; keep the one with the smallest residual.
    let mut best = estimates[0];
    let mut best_residual = f64::INFINITY;
    for est in estimates {
        let mut z = est;
        for _ in 0..40 {
            let d = dpoly(z);
            if d.norm() < 1e-300 {
                break;
            }
            let step = poly(z) / d;
            z -= step;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        }
        let res = poly(z).norm();
        if res < best_residual {
            best_residual = res;
            best = z;
        }
    }

    // Deflate: λ³ + a2λ² + a1λ + a0 = (λ − z)(λ² + q1 λ + q0) + remainder.
    let q1 = Complex64::new(a2, 0.0) + best;
    let q0 = Complex64::new(a1, 0.0) + best * q1;
    let disc = q1 * q1 - 4.0 * q0;
    let sq = disc.sqrt();
    // Take the larger-magnitude branch first, recover the other via Vieta.
    let big = if (-q1 + sq).norm() >= (-q1 - sq).norm() { (-q1 + sq) / 2.0 } else { (-q1 - sq) / 2.0 };
    let small = if big.norm() > 0.0 { q0 / big } else { big };
    [best, big, small]
}

/// Eigenvalues of a real 3×3 matrix via its characteristic polynomial.
pub fn eigenvalues_3x3(m: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    // char poly: λ³ − tr λ² + minors λ − det
    solve_cubic_monic(-tr, minors, -det)
}

/// A collision-manifold heteroclinic orbit with ψ conserved along it.
#[derive(Debug, Clone)]
pub struct HeteroclinicOrbit {
    pub psi: f64,
    /// `(σ, α)` samples.
    pub samples: Vec<(f64, f64)>,
    /// Source equilibrium on 𝒫₂ (the α-limit).
    pub source: [f64; 3],
    /// Sink equilibrium on 𝒫₁ (the ω-limit).
    pub sink: [f64; 3],
    /// Maximum deviation of the integrated orbit from the closed form
    /// `u(σ) = 2 atan(tan(u₀/2) e^{−Γσ/4π})`.
    pub max_closed_form_deviation: f64,
}

/// Integrate the collision-manifold flow from `α(0) = ψ + u0` and verify it
/// against the closed form; ψ stays bit-exact because its rate is identically
/// zero.
pub fn verify_heteroclinic(psi: f64, u0: f64, params: &Params, sigma_span: f64, n_samples: usize) -> Result<HeteroclinicOrbit> {
    let u0w = wrap_angle(u0);
    if u0w.min((u0w - PI).abs()).min((u0w - 2.0 * PI).abs()) < 1e-12 {
        return Err(Error::DegenerateStart);
    }
    if sigma_span <= 0.0 || !sigma_span.is_finite() {
        return Err(Error::domain("σ span must be positive"));
    }
    let p = *params;
    let gamma = params.gamma();
    let opts = IntegratorOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        record: RecordMode::Interval(sigma_span / n_samples.max(2) as f64),
        ..Default::default()
    };
    let traj = integrate(
        crate::dynamics::FieldKind::CollisionManifold,
        move |_t, s: &[f64; 2]| Ok(vf_collision_manifold(s[0], s[1], &p)),
        0.0,
        [psi + u0w, psi],
        sigma_span,
        &opts,
        vec![],
    )?;
    // tan(u0/2) is continuous and sign-definite on each component (0,π), (π,2π);
    // the closed form lands in (−π, π) and is compared modulo 2π.
    let w0 = (u0w / 2.0).tan();
    let mut max_dev: f64 = 0.0;
    let mut samples = Vec::with_capacity(traj.len());
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if s[1] != psi {
            return Err(Error::domain("ψ drifted along the collision flow"));
        }
        let u_exact = 2.0 * (w0 * (-gamma * t / (4.0 * PI)).exp()).atan();
        let u_num = s[0] - psi;
        let mut diff = (u_num - u_exact).rem_euclid(2.0 * PI);
        if diff > PI {
            diff -= 2.0 * PI;
        }
        max_dev = max_dev.max(diff.abs());
        samples.push((*t, s[0]));
    }
    Ok(HeteroclinicOrbit {
        psi,
        samples,
        source: [0.0, wrap_angle(psi + PI), psi],
        sink: [0.0, wrap_angle(psi), psi],
        max_closed_form_deviation: max_dev,
    })
}

/// Signed transverse radial rate along one restpoint family at small `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseReport {
    pub family: RestFamily,
    pub alpha: f64,
    pub r: f64,
    /// `dr/dσ` evaluated on the family at radius `r`.
    pub dr_dsigma: f64,
}

/// Evaluate `dr/dσ` just off the collision manifold on a restpoint family:
/// positive along 𝒫₁ (ejection), negative along 𝒫₂ (collision).
pub fn stability_transverse(family: RestFamily, alpha: f64, params: &Params) -> Result<TransverseReport> {
    let r = 1e-3;
    let psi = match family {
        RestFamily::P1 => alpha,
        RestFamily::P2 => alpha + PI,
        RestFamily::ZvmPoint => return Err(Error::domain("transverse rate applies to 𝒫₁/𝒫₂")),
    };
    let d = vf_angular_sigma(&[r, wrap_angle(alpha), wrap_angle(psi)], 0.0, params)?;
    Ok(TransverseReport { family, alpha, r, dr_dsigma: d[0] })
}
