//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured quantity. Run with `cargo test --test acceptance -- --nocapture`
//! to see every line.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sphere_vortex::charts::psi_to_z;
use sphere_vortex::diagnostics::{collision_limit_table, e_hat_limit_resolution, pushforward_residual};
use sphere_vortex::dynamics::{vf_plane, vf_sphere_vortex, FieldKind, VortexPosition};
use sphere_vortex::energy::{classify, e_hat, e_tilde, thresholds, zvm_curve, zvm_restpoint,
    RegimeKind, ZvmTopology};
use sphere_vortex::equilibria::{eigenvalues_3x3, sigma_flow_jacobian, verify_heteroclinic};
use sphere_vortex::error::Error;
use sphere_vortex::geometry::{coeff_b, log_b_grad, phi1, Params, PlanePoint};
use sphere_vortex::integrate::{integrate, monitor_angular_momentum, monitor_energy, EventDirection,
    EventKind, EventSpec, IntegratorOptions, Outcome, RecordMode};
use sphere_vortex::orbits::{demonstrate_regime, meridian_orbit, transmission_residual, transmit,
    vortex_parallel};

fn unit() -> Params {
    Params::default()
}

#[test]
fn criterion_01_thresholds() {
    let p = unit();
    let (h1, h2) = thresholds(&p);
    let h1_exact = 2f64.ln() / (8.0 * PI);
    let h2_exact = 2f64.ln() / (4.0 * PI);
    assert!((h1 - h1_exact).abs() < 1e-12, "h1 = {h1} vs {h1_exact}");
    assert!((h2 - h2_exact).abs() < 1e-12, "h2 = {h2} vs {h2_exact}");
    println!("[PASS] criterion 01 thresholds: h1 = {h1:.12}, h2 = {h2:.12} (within 1e-12 of log2/8π, log2/4π)");
}

#[test]
fn criterion_02_regime_grid_oracle() {
    let p = unit();
    let (h1, h2) = thresholds(&p);
    let mut total_checked = 0usize;
    for h in [h1 - 0.5, 0.5 * (h1 + h2), h2 + 0.5] {
        let regime = classify(h, &p);
        let expect_positive = |x: f64, y: f64| -> bool {
            match regime.kind {
                RegimeKind::AllowedEverywhere => true,
                RegimeKind::ForbiddenDisk(d) => !d.contains(x, y),
                RegimeKind::AllowedDisk(d) => d.contains(x, y),
                _ => panic!("boundary regime hit in grid oracle"),
            }
        };
        let mut mismatches = 0usize;
        for i in 0..200 {
            for j in 0..200 {
                let x = -6.0 + 12.0 * i as f64 / 199.0;
                let y = -6.0 + 12.0 * j as f64 / 199.0;
                let v = e_tilde(h, PlanePoint::new(x, y), &p).expect("grid avoids the vortex");
                if v.abs() <= 1e-6 {
                    continue; // boundary band
                }
                total_checked += 1;
                if (v > 0.0) != expect_positive(x, y) {
                    mismatches += 1;
                }
            }
        }
        assert_eq!(mismatches, 0, "sign mismatches at h = {h}");
    }
    println!("[PASS] criterion 02 regime grid oracle: 3 × 200×200 grid, {total_checked} non-boundary cells, 100% agreement");
}

#[test]
fn criterion_03_collision_energy_constant() {
    let p = unit();
    let l0 = 2.0 / PI;
    let mut max_dev = 0.0f64;
    for k in 0..64 {
        let alpha = 2.0 * PI * k as f64 / 64.0;
        max_dev = max_dev.max((e_hat(0.3, 1e-3, alpha, &p) - l0).abs());
    }
    assert!(max_dev < 1e-4, "|Ê(1e-3) − 2/π| = {max_dev}");
    let mut max_h_dep = 0.0f64;
    for alpha in [0.0, 1.3, 4.4] {
        let base = e_hat(-1.0, 1e-4, alpha, &p);
        for h in [0.0, 1.0] {
            max_h_dep = max_h_dep.max((e_hat(h, 1e-4, alpha, &p) - base).abs());
        }
    }
    assert!(max_h_dep < 1e-6, "h-dependence at r = 1e-4: {max_h_dep}");
    println!("[PASS] criterion 03 collision energy constant: |Ê − 2ΓR²/π| ≤ {max_dev:.2e} at r=1e-3; h-dependence ≤ {max_h_dep:.2e} at r=1e-4");
}

#[test]
fn criterion_04_restpoint_eigenvalues() {
    let p = unit();
    let lambda = 1.0 / (4.0 * PI);
    let mut worst_nonzero = 0.0f64;
    let mut worst_zero = 0.0f64;
    for k in 0..8 {
        let alpha = 2.0 * PI * k as f64 / 8.0;
        for (psi, expected) in [(alpha, -lambda), (alpha + PI, lambda)] {
            let jac = sigma_flow_jacobian(&[0.0, alpha, psi], &p).unwrap();
            let mut eigs = eigenvalues_3x3(&jac).to_vec();
            eigs.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
            // two (raw, unsnapped) zeros below 1e-7, one eigenvalue at ∓Γ/4π
            worst_zero = worst_zero.max(eigs[0].norm()).max(eigs[1].norm());
            worst_nonzero = worst_nonzero.max((eigs[2].re - expected).abs() + eigs[2].im.abs());
        }
    }
    assert!(worst_zero < 1e-7, "zero eigenvalues up to {worst_zero}");
    assert!(worst_nonzero < 1e-5, "nonzero eigenvalue deviation {worst_nonzero}");
    println!("[PASS] criterion 04 restpoint eigenvalues: {{0, ∓Γ/4π, 0}} with |λ∓0.0795775| ≤ {worst_nonzero:.2e}, zeros ≤ {worst_zero:.2e}");
}

#[test]
fn criterion_05_heteroclinic_closed_form() {
    let p = unit();
    let orbit = verify_heteroclinic(1.3, PI / 2.0, &p, 100.0, 100).unwrap();
    assert!(
        orbit.max_closed_form_deviation < 1e-8,
        "closed-form deviation {}",
        orbit.max_closed_form_deviation
    );
    // ψ drift is exactly zero (bit-exact) — enforced inside verify_heteroclinic,
    // which rejects any drifted sample.
    assert_eq!(orbit.samples.len(), 101);
    println!("[PASS] criterion 05 heteroclinic closed form: max deviation {:.2e} over 100 sample times, ψ drift exactly 0", orbit.max_closed_form_deviation);
}

#[test]
fn criterion_06_conservation() {
    let p = unit();
    let opts = IntegratorOptions { rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() };
    let plane = integrate(
        FieldKind::Plane,
        |_t, s: &[f64; 4]| vf_plane(s, &p),
        0.0,
        [1.5, 0.5, 0.2, -0.1],
        10.0,
        &opts,
        vec![],
    )
    .unwrap();
    assert_eq!(plane.outcome, Outcome::CompletedSpan);
    let k_drift = monitor_energy(&plane, &p)
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    assert!(k_drift < 1e-9, "K_mech drift {k_drift}");

    let sphere = integrate(
        FieldKind::SphereVortex(VortexPosition::NorthPole),
        |_t, s: &[f64; 4]| vf_sphere_vortex(s, &p, VortexPosition::NorthPole),
        0.0,
        [0.3, 2.0, 0.4, -0.2],
        10.0,
        &opts,
        vec![],
    )
    .unwrap();
    let mon = monitor_angular_momentum(&sphere, &p).unwrap();
    let p_phi_drift = mon.p_phi_drift.into_iter().fold(0.0, f64::max);
    let l_mismatch = mon.l_mismatch.into_iter().fold(0.0, f64::max);
    assert!(p_phi_drift < 1e-12, "p_φ drift {p_phi_drift}");
    assert!(l_mismatch < 1e-10, "|l − p_φ| {l_mismatch}");
    println!("[PASS] criterion 06 conservation: K_mech drift ≤ {k_drift:.2e}, p_φ drift ≤ {p_phi_drift:.2e}, |l − p_φ| ≤ {l_mismatch:.2e}");
}

#[test]
fn criterion_07_pushforward_consistency() {
    let p = unit();
    let h = thresholds(&p).1 + 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let r = rng.random_range(0.3..3.0);
        let alpha = rng.random_range(0.0..2.0 * PI);
        let psi = rng.random_range(0.0..2.0 * PI);
        let (zx, zy) = psi_to_z(r, alpha, psi, h, &p).unwrap();
        worst = worst.max(pushforward_residual(r, alpha, zx, zy, &p).unwrap());
    }
    assert!(worst < 1e-8, "pushforward residual {worst}");
    println!("[PASS] criterion 07 pushforward consistency: 100 random states r ∈ [0.3, 3], max relative residual {worst:.2e}");
}

#[test]
fn criterion_08_zvm_restpoint() {
    let p = unit();
    let (_, h2) = thresholds(&p);
    let (r_star, alpha_star) = zvm_restpoint(h2, &p).unwrap().expect("restpoint at h₂");
    let phi1_residual = (phi1(r_star) - 4.0).abs();
    assert!(phi1_residual < 1e-12, "|φ₁(r*) − 4R| = {phi1_residual}");
    assert_eq!(alpha_star, 1.5 * PI);

    // Absence certificates at h₂ ± 0.1: above h₂ the set is empty; below, the
    // log-gradient of b is bounded away from zero along the whole curve.
    assert_eq!(zvm_restpoint(h2 + 0.1, &p).unwrap(), None);
    assert_eq!(zvm_restpoint(h2 - 0.1, &p).unwrap(), None);
    let above = zvm_curve(h2 + 0.1, &p, 256).unwrap();
    assert_eq!(above.topology, ZvmTopology::Empty);
    let below = zvm_curve(h2 - 0.1, &p, 256).unwrap();
    let mut min_grad = f64::INFINITY;
    for &(x, y) in &below.plane_samples {
        let g = log_b_grad(PlanePoint::new(x, y), &p).unwrap();
        min_grad = min_grad.min((g[0] * g[0] + g[1] * g[1]).sqrt());
    }
    assert!(min_grad >= 1e-3, "∇b/b dips to {min_grad} on the h₂ − 0.1 curve");
    println!("[PASS] criterion 08 zvm restpoint: (r*, α*) = ({r_star:.6}, 3π/2), |φ₁(r*) − 4R| = {phi1_residual:.2e}; absence certified at h₂ ± 0.1 (min ‖∇b/b‖ = {min_grad:.3})");
}

#[test]
fn criterion_09_vortex_parallel() {
    let p = unit();
    let theta_bar = 2.0 * PI / 3.0;
    let orbit = vortex_parallel(theta_bar, &p).unwrap();
    let residual = vf_sphere_vortex(&[0.0, theta_bar, orbit.p_phi, 0.0], &p, VortexPosition::NorthPole)
        .unwrap()[3]
        .abs();
    assert!(residual < 1e-10, "ṗ_θ residual {residual}");

    let y0 = [0.0, theta_bar, orbit.p_phi, 0.0];
    let opts = IntegratorOptions { rel_tol: 1e-13, abs_tol: 1e-15, ..Default::default() };
    let phi_advance = EventSpec::new(EventKind::ZeroVelocityTouch, EventDirection::Rising, true, {
        move |_t, s: &[f64; 4]| s[0] - 2.0 * PI
    });
    let traj = integrate(
        FieldKind::SphereVortex(VortexPosition::NorthPole),
        |_t, s: &[f64; 4]| vf_sphere_vortex(s, &p, VortexPosition::NorthPole),
        0.0,
        y0,
        2.0 * orbit.period,
        &opts,
        vec![phi_advance],
    )
    .unwrap();
    let measured_period = match traj.outcome {
        Outcome::TerminalEvent(_) => traj.last_time(),
        other => panic!("no 2π advance detected: {other:?}"),
    };
    let period_dev = (measured_period - orbit.period).abs();
    assert!(period_dev < 1e-8, "period deviation {period_dev}");

    let end = traj.last_state();
    let closing = (end[1] - y0[1])
        .abs()
        .max((end[2] - y0[2]).abs())
        .max((end[3] - y0[3]).abs())
        .max({
            let d = (end[0] - y0[0]).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        });
    assert!(closing < 1e-6, "closing error {closing}");

    assert!(matches!(vortex_parallel(PI / 3.0, &p), Err(Error::NoOrbit { .. })));
    println!("[PASS] criterion 09 vortex parallel: p_φ = {:.6} (residual {residual:.2e}), period = {:.6} (measured dev {period_dev:.2e}), closing error {closing:.2e}, NoOrbit at π/3", orbit.p_phi, orbit.period);
}

#[test]
fn criterion_10_three_regime_demonstrations() {
    let p = unit();
    let (_, h2) = thresholds(&p);

    let bounce = demonstrate_regime(h2 - 0.01, &p, 1000.0).unwrap();
    assert_eq!(
        bounce.event_sequence(),
        vec![EventKind::ZeroVelocityTouch, EventKind::CollisionApproach],
        "h = h₂ − 0.01"
    );

    let through = demonstrate_regime(h2 + 0.01, &p, 1000.0).unwrap();
    assert_eq!(
        through.event_sequence(),
        vec![EventKind::AntipodalPassage, EventKind::CollisionApproach],
        "h = h₂ + 0.01"
    );

    let asymptotic = demonstrate_regime(h2, &p, 1000.0).unwrap();
    assert!(
        asymptotic.events.iter().all(|e| e.kind != EventKind::AntipodalPassage),
        "spurious antipodal passage at h = h₂"
    );
    let reached = asymptotic
        .states
        .iter()
        .any(|s| s[1] < 0.05 && s[3].abs() < 0.05);
    assert!(reached, "h₂ orbit never slowed below (θ, |p_θ|) = (0.05, 0.05)");
    println!("[PASS] criterion 10 three regimes: h₂−0.01 → [zero-velocity-touch, collision]; h₂+0.01 → [antipodal, collision]; h₂ → reaches θ < 0.05 with |p_θ| < 0.05, no passage");
}

#[test]
fn criterion_11_transmission_validity() {
    let p = unit();
    let (_, h2) = thresholds(&p);
    let h = h2 + 0.2;
    let theta0 = PI / 2.0;
    let v0 = p.gamma() / (8.0 * PI) * (2.0 * (1.0 + theta0.cos())).ln();
    let p_theta0 = (2.0 * (h - v0)).sqrt();
    let opts = IntegratorOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        record: RecordMode::Interval(0.002),
        ..Default::default()
    };
    let pre = meridian_orbit(1.0, theta0, p_theta0, &p, 100.0, &opts).unwrap();
    assert_eq!(pre.outcome, Outcome::TerminalEvent(EventKind::CollisionApproach));
    let path = transmit(&pre, &p).unwrap();
    let residual = transmission_residual(&path, &p, 100).unwrap();
    assert!(residual < 1e-6, "EOM residual {residual}");
    // Continuity at T_s: both one-sided segments reach the collision threshold
    // of the vortex and the reflected pairing is exact.
    assert!(path.gap_at_collision() < 2e-4, "gap {}", path.gap_at_collision());
    assert_eq!(path.reflection_residual(), 0.0);
    println!("[PASS] criterion 11 transmission: reflected-segment EOM residual {residual:.2e} at 100 interior samples; continuous at T_s (θ gap {:.2e}, reflection exact)", path.gap_at_collision());
}

#[test]
fn criterion_12_collision_limit_table() {
    let p = unit();
    let report = e_hat_limit_resolution(&p);
    assert!(
        report.resolves_to_low,
        "Ê limit resolved to {} (candidates {} / {})",
        report.numeric, report.candidate_low, report.candidate_high
    );
    let table = collision_limit_table(&p);
    for row in &table {
        assert!(
            row.converged,
            "{}: values {:?} do not converge monotonically to {}",
            row.name, row.values, row.limit
        );
    }
    println!(
        "[PASS] criterion 12 collision limit table: {} rows converge monotonically over r ∈ {{1e-2, 1e-3, 1e-4}}; Ê limit = {:.6} = 2ΓR²/π",
        table.len(),
        report.numeric
    );
}

// Guard used by criterion 02: the b coefficient stays within [0, 4R²] on the
// grid, so the logarithm in Ẽ is always defined away from the vortex.
#[test]
fn grid_b_range_sanity() {
    let p = unit();
    for i in 0..200 {
        for j in 0..200 {
            let x = -6.0 + 12.0 * i as f64 / 199.0;
            let y = -6.0 + 12.0 * j as f64 / 199.0;
            let b = coeff_b(PlanePoint::new(x, y), &p);
            assert!((0.0..=4.0 + 1e-12).contains(&b));
        }
    }
}
