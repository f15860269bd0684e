//! Global orbit structure on the sphere with the vortex at the north pole:
//! periodic vortex parallels, invariant meridians, the zero-angular-momentum
//! necessity check for collision/antipodal orbits, the collision-transmission
//! extension, and the three-regime behavior of transmitted meridian orbits.

use std::f64::consts::PI;

use crate::dynamics::{h_meridian, vf_meridian_reduced, vf_sphere_vortex, FieldKind, VortexPosition};
use crate::energy::{thresholds, THRESHOLD_TOL};
use crate::error::{Error, Result};
use crate::geometry::{chord_sq_to_north, wrap_angle, Params};
use crate::integrate::{integrate, Event, EventKind, EventSpec, IntegratorOptions, Outcome,
    RecordMode, Trajectory};

/// A periodic orbit supported on a vortex parallel `θ = θ̄` in the vortex
/// half-sphere, `θ̄ ∈ (π/2, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicParallel {
    pub theta_bar: f64,
    /// The (positive) conserved momentum making `ṗ_θ = 0` on the parallel.
    pub p_phi: f64,
    /// `2πR² sin²θ̄ / p_φ`.
    pub period: f64,
}

/// Root-find the momentum of the relative equilibrium on the parallel `θ̄`.
///
/// `ṗ_θ(θ̄, p_φ) = 0` has a real solution only for `θ̄ ∈ (π/2, π)`: the
/// centrifugal term must oppose the attraction, which requires `cosθ̄ < 0`.
pub fn vortex_parallel(theta_bar: f64, params: &Params) -> Result<PeriodicParallel> {
    if !(theta_bar > 0.0 && theta_bar < PI) {
        return Err(Error::domain(format!("θ̄ = {theta_bar} outside (0, π)")));
    }
    if theta_bar <= PI / 2.0 {
        return Err(Error::NoOrbit { theta_bar });
    }
    let residual = |p_phi: f64| -> Result<f64> {
        let d = vf_sphere_vortex(&[0.0, theta_bar, p_phi, 0.0], params, VortexPosition::NorthPole)?;
        Ok(d[3])
    };
    // The residual is positive at p_φ = 0 and strictly decreasing in p_φ².
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while residual(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::domain("vortex-parallel bracket expansion failed"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if residual(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_phi = 0.5 * (lo + hi);
    let r_sq = params.radius() * params.radius();
    let sin_sq = theta_bar.sin().powi(2);
    Ok(PeriodicParallel { theta_bar, p_phi, period: 2.0 * PI * r_sq * sin_sq / p_phi })
}

/// Standard meridian event set: terminal collision approach, antipodal
/// passage, and the zero-velocity turning point.
fn meridian_events(params: &Params) -> Vec<EventSpec<2>> {
    vec![
        EventSpec::collision_meridian(params),
        EventSpec::antipodal_meridian(),
        EventSpec::zero_velocity_meridian(),
    ]
}

/// Fold an extended-θ meridian state into sphere-chart coordinates: negative
/// θ lives on the opposite meridian `φ₀ + π`.
fn fold_meridian_state(phi0: f64, t: f64, s: &[f64; 2]) -> (f64, [f64; 4]) {
    if s[0] >= 0.0 {
        (t, [phi0, s[0], 0.0, s[1]])
    } else {
        (t, [wrap_angle(phi0 + PI), -s[0], 0.0, -s[1]])
    }
}

/// Integrate a meridian orbit (`p_φ = 0`) of the north-pole system.
///
/// Internally this runs the reduced `(θ, p_θ)` system with θ extended through
/// zero, which is regular at the antipodal point; samples are folded back to
/// sphere coordinates, so after an antipodal passage the orbit continues on
/// the meridian `φ₀ + π`.
pub fn meridian_orbit(
    phi0: f64,
    theta0: f64,
    p_theta0: f64,
    params: &Params,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory<4>> {
    if !(theta0 > 0.0 && theta0 < PI) {
        return Err(Error::domain(format!("θ₀ = {theta0} outside (0, π)")));
    }
    let p = *params;
    let reduced = integrate(
        FieldKind::MeridianReduced,
        move |_t, s: &[f64; 2]| Ok(vf_meridian_reduced(s, &p)),
        0.0,
        [theta0, p_theta0],
        t_end,
        opts,
        meridian_events(params),
    )?;
    let phi0 = wrap_angle(phi0);
    let mut times = Vec::with_capacity(reduced.len());
    let mut states = Vec::with_capacity(reduced.len());
    for (t, s) in reduced.times.iter().zip(&reduced.states) {
        let (t, folded) = fold_meridian_state(phi0, *t, s);
        times.push(t);
        states.push(folded);
    }
    let events = reduced
        .events
        .iter()
        .map(|e| {
            let (time, state) = fold_meridian_state(phi0, e.time, &e.state);
            Event { kind: e.kind, time, state }
        })
        .collect();
    Ok(Trajectory {
        field: FieldKind::SphereVortex(VortexPosition::NorthPole),
        times,
        states,
        events,
        outcome: reduced.outcome,
    })
}

/// Outcome of the zero-angular-momentum necessity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NecessityReport {
    /// The conserved angular momentum `l = p_φ` of the trajectory.
    pub l: f64,
    /// Number of collision-approach or antipodal-passage events seen.
    pub singular_events: usize,
    /// `false` when singular events occur despite `|l|` above tolerance.
    pub consistent: bool,
    /// For `|l|` above tolerance: the minimum over samples of the allowed-θ
    /// residual `2R²h sin²θ − (Γ/4π)R² sin²θ log(2R²(1+cosθ)) − l²`.
    pub min_theta_residual: Option<f64>,
}

const L_ZERO_TOL: f64 = 1e-8;

/// Check the necessity condition: only `l = 0` orbits may collide with the
/// vortex or reach the antipodal point, and every `l ≠ 0` orbit satisfies the
/// allowed-θ residual inequality along its samples.
pub fn collision_necessity_check(traj: &Trajectory<4>, params: &Params) -> Result<NecessityReport> {
    if !matches!(traj.field, FieldKind::SphereVortex(VortexPosition::NorthPole)) {
        return Err(Error::domain("necessity check requires the north-pole sphere chart"));
    }
    let l = traj.states[0][2];
    let singular_events = traj
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::CollisionApproach | EventKind::AntipodalPassage))
        .count();
    let consistent = singular_events == 0 || l.abs() < L_ZERO_TOL;
    let min_theta_residual = if l.abs() > 1e-6 {
        let r_sq = params.radius() * params.radius();
        let h = crate::integrate::hamiltonian_value(traj.field, &traj.states[0], params)?;
        let g = params.gamma();
        let mut min_res = f64::INFINITY;
        for s in &traj.states {
            let sin_sq = s[1].sin().powi(2);
            let res = 2.0 * r_sq * h * sin_sq
                - g / (4.0 * PI) * r_sq * sin_sq * chord_sq_to_north(s[1], params).ln()
                - l * l;
            min_res = min_res.min(res);
        }
        Some(min_res)
    } else {
        None
    };
    Ok(NecessityReport { l, singular_events, consistent, min_theta_residual })
}

/// A collision orbit extended through the singularity by point reflection of
/// its coordinates through the vortex.
///
/// The post segment stores the raw reflected coordinates `(2φ_V − φ,
/// 2θ_V − θ)`, which continue the motion smoothly across the vortex; fold θ
/// into `[0, π]` for display.
#[derive(Debug, Clone)]
pub struct TransmittedPath {
    /// Vortex coordinates `(φ_V, θ_V)` used for the reflection.
    pub vortex: (f64, f64),
    /// The collision time `T_s`: the event time plus the quadrature tail from
    /// the collision threshold to the vortex itself.
    pub t_collision: f64,
    pub pre_times: Vec<f64>,
    pub pre_states: Vec<[f64; 4]>,
    pub post_times: Vec<f64>,
    pub post_states: Vec<[f64; 4]>,
}

impl TransmittedPath {
    /// Total span `2 T_s` of the extended path.
    pub fn total_span(&self) -> f64 {
        2.0 * self.t_collision
    }

    /// θ gap between the last pre sample and the vortex; both one-sided limits
    /// of the path at `T_s` are the vortex point itself.
    pub fn gap_at_collision(&self) -> f64 {
        (self.pre_states.last().unwrap()[1] - self.vortex.1).abs()
    }

    /// Maximum deviation from exact point-reflection symmetry between paired
    /// pre/post samples; zero by construction.
    pub fn reflection_residual(&self) -> f64 {
        let n = self.pre_times.len();
        let mut max = 0.0f64;
        for (i, (t, s)) in self.pre_times.iter().zip(&self.pre_states).enumerate() {
            let j = n - 1 - i;
            let tp = self.post_times[j];
            let sp = self.post_states[j];
            max = max
                .max((tp + t - self.total_span()).abs())
                .max((sp[0] + s[0] - 2.0 * self.vortex.0).abs())
                .max((sp[1] + s[1] - 2.0 * self.vortex.1).abs());
        }
        max
    }
}

/// Simpson quadrature on a uniform grid.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n_half: usize) -> f64 {
    let n = 2 * n_half.max(1);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * k as f64);
    }
    sum * h / 3.0
}

/// Remaining fall time from the collision-event state to the vortex itself,
/// from the energy relation `p_θ(θ) = √(2R²(h − V(θ)))`.
fn collision_tail_time(h: f64, theta_event: f64, params: &Params) -> f64 {
    let r_sq = params.radius() * params.radius();
    let u_e = PI - theta_event;
    let speed = |u: f64| {
        if u == 0.0 {
            return f64::INFINITY;
        }
        let v = params.gamma() / (8.0 * PI) * chord_sq_to_north(PI - u, params).ln();
        (2.0 * r_sq * (h - v)).max(0.0).sqrt()
    };
    simpson(|u| if u == 0.0 { 0.0 } else { r_sq / speed(u) }, 0.0, u_e, 100)
}

/// Extend a meridian collision orbit through the singularity.
///
/// Requires a trajectory that terminated in a collision-approach event with
/// `|p_φ|` below tolerance: colliding orbits are necessarily meridian orbits.
/// The reflected segment satisfies the same equations of motion because the
/// meridian field is odd around the vortex.
pub fn transmit(pre: &Trajectory<4>, params: &Params) -> Result<TransmittedPath> {
    if pre.outcome != Outcome::TerminalEvent(EventKind::CollisionApproach) {
        return Err(Error::NotColliding);
    }
    let p_phi_max = pre.states.iter().map(|s| s[2].abs()).fold(0.0, f64::max);
    if p_phi_max > L_ZERO_TOL {
        return Err(Error::NonzeroAngularMomentum { p_phi: p_phi_max });
    }
    let last = pre.last_state();
    let t_event = pre.last_time();
    // The colliding branch has θ → π on its current meridian.
    let phi_v = last[0];
    let theta_v = PI;
    let h = h_meridian(&[last[1], last[3]], params);
    let t_s = t_event + collision_tail_time(h, last[1], params);

    let n = pre.times.len();
    let mut post_times = Vec::with_capacity(n);
    let mut post_states = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let t = pre.times[i];
        let s = pre.states[i];
        post_times.push(2.0 * t_s - t);
        post_states.push([2.0 * phi_v - s[0], 2.0 * theta_v - s[1], s[2], s[3]]);
    }
    Ok(TransmittedPath {
        vortex: (phi_v, theta_v),
        t_collision: t_s,
        pre_times: pre.times.clone(),
        pre_states: pre.states.clone(),
        post_times,
        post_states,
    })
}

/// Maximum equations-of-motion residual of the reflected segment, measured by
/// five-point finite differences at `n_check` interior samples (the middle 80%
/// of the segment). Requires uniformly spaced samples.
pub fn transmission_residual(path: &TransmittedPath, params: &Params, n_check: usize) -> Result<f64> {
    let times = &path.post_times;
    let states = &path.post_states;
    if times.len() < 16 {
        return Err(Error::domain("too few post samples for a residual check"));
    }
    // The reflected collision-event sample sits off the record grid; restrict
    // to the longest uniformly spaced run.
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dt = sorted[sorted.len() / 2];
    let uniform = |g: f64| (g - dt).abs() <= 1e-9 * dt.abs().max(1.0);
    let mut run_start = 0usize;
    let mut run_end = 0usize;
    let mut cur_start = 0usize;
    for (i, g) in gaps.iter().enumerate() {
        if uniform(*g) {
            if i + 1 - cur_start > run_end - run_start {
                run_start = cur_start;
                run_end = i + 1;
            }
        } else {
            cur_start = i + 1;
        }
    }
    let n_run = run_end - run_start + 1;
    if n_run < 16 {
        return Err(Error::domain("residual check requires uniform sampling"));
    }
    let r_sq = params.radius() * params.radius();
    let g8 = params.gamma() / (8.0 * PI);
    let lo = run_start + n_run / 10;
    let hi = run_end + 1 - n_run / 10;
    let span = hi.saturating_sub(lo + 4).max(1);
    let stride = (span / n_check.max(1)).max(1);
    let mut max_res = 0.0f64;
    let mut idx = lo + 2;
    while idx + 2 < hi {
        let d5 = |get: &dyn Fn(usize) -> f64| {
            (-get(idx + 2) + 8.0 * get(idx + 1) - 8.0 * get(idx - 1) + get(idx - 2)) / (12.0 * dt)
        };
        let s = states[idx];
        // Meridian equations in the smooth extension: φ̇ = 0, θ̇ = p_θ/R²,
        // ṗ_φ = 0, ṗ_θ = (Γ/8π) sinθ/(1 + cosθ).
        let expected = [0.0, s[3] / r_sq, 0.0, g8 * s[1].sin() / (1.0 + s[1].cos())];
        let numeric = [
            d5(&|k| states[k][0]),
            d5(&|k| states[k][1]),
            d5(&|k| states[k][2]),
            d5(&|k| states[k][3]),
        ];
        for i in 0..4 {
            max_res = max_res.max((numeric[i] - expected[i]).abs());
        }
        idx += stride;
    }
    Ok(max_res)
}

/// How a transmitted meridian orbit behaves between collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeBehavior {
    /// `h < h₂`: ejection, turn at the zero-velocity set, fall back.
    BounceBetweenZvmAndVortex,
    /// `h = h₂`: asymptotic approach to the antipodal restpoint.
    AsymptoticToAntipodal,
    /// `h > h₂`: pass through the antipodal point onto the opposite meridian
    /// and fall back into the vortex.
    MeridianThroughAntipodal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeNarrative {
    pub h: f64,
    pub behavior: RegimeBehavior,
}

/// Classify the post-ejection behavior at energy `h`.
pub fn classify_transmission(h: f64, params: &Params) -> RegimeNarrative {
    let (_, h2) = thresholds(params);
    let behavior = if (h - h2).abs() <= THRESHOLD_TOL {
        RegimeBehavior::AsymptoticToAntipodal
    } else if h < h2 {
        RegimeBehavior::BounceBetweenZvmAndVortex
    } else {
        RegimeBehavior::MeridianThroughAntipodal
    };
    RegimeNarrative { h, behavior }
}

/// Produce a demonstration meridian orbit at energy `h`, ejected from just
/// outside the collision threshold, integrated until recollision (or `span`).
///
/// At `h = h₂` exactly, the initial condition is placed a hair (1e−10) below
/// the separatrix energy: the stable manifold of the antipodal restpoint is
/// not representable in floating point, and any positive energy defect would
/// cross the antipodal point in finite time, misrepresenting the asymptotic
/// orbit.
pub fn demonstrate_regime(h: f64, params: &Params, span: f64) -> Result<Trajectory<4>> {
    let (_, h2) = thresholds(params);
    let theta0 = PI - 0.05;
    let h_eff = if (h - h2).abs() <= THRESHOLD_TOL { h2 - 1e-10 } else { h };
    let v0 = params.gamma() / (8.0 * PI) * chord_sq_to_north(theta0, params).ln();
    let r_sq = params.radius() * params.radius();
    let kinetic = 2.0 * r_sq * (h_eff - v0);
    if kinetic <= 0.0 {
        return Err(Error::domain(format!(
            "energy {h} too low to eject from θ₀ = {theta0}"
        )));
    }
    // Ejection: θ decreasing away from the vortex at θ = π.
    let p_theta0 = -kinetic.sqrt();
    let opts = IntegratorOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        record: RecordMode::EveryStep,
        ..Default::default()
    };
    meridian_orbit(0.0, theta0, p_theta0, params, span, &opts)
}
