//! Deterministic CSV serialization: identical inputs produce byte-identical
//! output (fixed 17-significant-digit scientific notation).

use crate::dynamics::FieldKind;
use crate::energy::e_hat;
use crate::error::Result;
use crate::geometry::{chord_sq_to_north, Params};
use crate::integrate::{hamiltonian_value, Trajectory};

/// Format a float with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Column names of the chart coordinates for a field kind.
pub fn state_names(kind: FieldKind) -> Vec<&'static str> {
    match kind {
        FieldKind::SphereGeodesic | FieldKind::SphereVortex(_) => {
            vec!["phi", "theta", "p_phi", "p_theta"]
        }
        FieldKind::Plane => vec!["x", "y", "p_x", "p_y"],
        FieldKind::McGeheeTau => vec!["r", "alpha", "z_x", "z_y"],
        FieldKind::AngularSigma { .. } => vec!["r", "alpha", "psi"],
        FieldKind::CollisionManifold => vec!["alpha", "psi"],
        FieldKind::MeridianReduced => vec!["theta", "p_theta"],
    }
}

fn monitor_columns(kind: FieldKind, state: &[f64], params: &Params) -> (f64, f64, f64, f64) {
    let energy = match kind {
        FieldKind::AngularSigma { h } => h,
        _ => hamiltonian_value(kind, state, params).unwrap_or(f64::NAN),
    };
    let p_phi = match kind {
        FieldKind::SphereGeodesic | FieldKind::SphereVortex(_) => state[2],
        _ => f64::NAN,
    };
    let radial = match kind {
        FieldKind::McGeheeTau | FieldKind::AngularSigma { .. } => state[0],
        FieldKind::Plane => {
            let dy = state[1] - 2.0 * params.radius();
            (state[0] * state[0] + dy * dy).sqrt()
        }
        FieldKind::SphereVortex(crate::dynamics::VortexPosition::NorthPole) => {
            chord_sq_to_north(state[1], params).sqrt()
        }
        FieldKind::MeridianReduced => chord_sq_to_north(state[0], params).sqrt(),
        _ => f64::NAN,
    };
    let e_hat_col = match kind {
        FieldKind::AngularSigma { h } => e_hat(h, state[0], state[1], params),
        // On the τ-chart the energy relation gives Ê directly as the kinetic form.
        FieldKind::McGeheeTau => {
            let a = crate::geometry::coeffs_mcgehee(state[0], state[1], params)
                .map(|c| c.a)
                .unwrap_or(f64::NAN);
            a * state[2] * state[2] + state[3] * state[3]
        }
        _ => f64::NAN,
    };
    (energy, p_phi, radial, e_hat_col)
}

/// Named monitor series (`energy`, `p_phi`, `r`, `E_hat`) along a trajectory;
/// entries that do not apply to the chart are NaN.
pub fn monitor_series<const N: usize>(
    traj: &Trajectory<N>,
    params: &Params,
) -> std::collections::BTreeMap<&'static str, Vec<f64>> {
    let mut energy = Vec::with_capacity(traj.len());
    let mut p_phi = Vec::with_capacity(traj.len());
    let mut radial = Vec::with_capacity(traj.len());
    let mut e_hat_series = Vec::with_capacity(traj.len());
    for s in &traj.states {
        let (e, pp, r, eh) = monitor_columns(traj.field, s, params);
        energy.push(e);
        p_phi.push(pp);
        radial.push(r);
        e_hat_series.push(eh);
    }
    let mut map = std::collections::BTreeMap::new();
    map.insert("energy", energy);
    map.insert("p_phi", p_phi);
    map.insert("r", radial);
    map.insert("E_hat", e_hat_series);
    map
}

/// Trajectory CSV with header `time,<state components...>,energy,p_phi,r,E_hat`.
pub fn trajectory_csv<const N: usize>(traj: &Trajectory<N>, params: &Params) -> Result<String> {
    let names = state_names(traj.field);
    let mut out = String::new();
    out.push_str("time");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push_str(",energy,p_phi,r,E_hat\n");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (energy, p_phi, radial, e_hat_col) = monitor_columns(traj.field, s, params);
        out.push_str(&fmt_f64(*t));
        for v in s.iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push_str(&fmt_f64(energy));
        out.push(',');
        out.push_str(&fmt_f64(p_phi));
        out.push(',');
        out.push_str(&fmt_f64(radial));
        out.push(',');
        out.push_str(&fmt_f64(e_hat_col));
        out.push('\n');
    }
    Ok(out)
}

/// Event-stream CSV with header `time,kind,<state components...>`.
pub fn events_csv<const N: usize>(traj: &Trajectory<N>) -> String {
    let names = state_names(traj.field);
    let mut out = String::new();
    out.push_str("time,kind");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for e in &traj.events {
        out.push_str(&fmt_f64(e.time));
        out.push(',');
        out.push_str(&e.kind.to_string());
        for v in e.state.iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Generic numeric table with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
