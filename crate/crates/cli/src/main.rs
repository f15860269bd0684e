//! Command-line frontend: energy-regime classification, simulation in any
//! chart, zero-velocity curves, restpoint spectra, heteroclinics, vortex
//! parallels, collision transmission, and the field consistency checks.
//!
//! Exit codes: 0 success, 1 internal numerical failure, 2 invalid input.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sphere_vortex::diagnostics::field_check;
use sphere_vortex::dynamics::{vf_collision_manifold, vf_mcgehee_tau, vf_plane, vf_sphere_geodesic,
    vf_sphere_vortex, FieldKind, VortexPosition};
use sphere_vortex::energy::{classify, e_hat, thresholds, zvm_curve, zvm_restpoint, LevelSet,
    RegimeKind, ZvmTopology};
use sphere_vortex::equilibria::{restpoint_curves, stability_transverse, verify_heteroclinic,
    RestFamily};
use sphere_vortex::export::{events_csv, fmt_f64, trajectory_csv};
use sphere_vortex::geometry::{chord_sq, Params, SpherePoint};
use sphere_vortex::integrate::{hamiltonian_value, integrate, monitor_energy, EventDirection,
    EventKind, EventSpec, IntegratorOptions, Outcome, RecordMode, Trajectory};
use sphere_vortex::orbits::{classify_transmission, demonstrate_regime, meridian_orbit,
    transmission_residual, transmit, vortex_parallel, RegimeBehavior};

use config::{require, resolve, FileConfig};

#[derive(Parser)]
#[command(
    name = "sphere-vortex",
    version,
    about = "Dynamics of a point mass on a sphere under a logarithmic vortex potential"
)]
struct Cli {
    /// Sphere radius R (default 1)
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Circulation strength Γ (default 1)
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Key=value configuration file; flags override file values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (stdout when omitted); trajectory events go to
    /// `<output>.events.csv`
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChartArg {
    /// Sphere angles with the vortex potential
    Sphere,
    /// Free geodesic flow on the sphere
    SphereGeodesic,
    /// Stereographic plane
    Plane,
    /// Blow-up chart, τ time
    McgeheeTau,
    /// On-shell angular chart, σ time (requires --energy)
    AngularSigma,
    /// Collision-manifold restriction, σ time
    CollisionManifold,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VortexArg {
    North,
    Equator,
}

#[derive(Subcommand)]
enum Command {
    /// Print the energy thresholds h₁ and h₂
    Thresholds,
    /// Classify an energy level against the thresholds
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<f64>,
    },
    /// Integrate a trajectory and export samples plus events
    Simulate {
        #[arg(long, value_enum)]
        chart: Option<ChartArg>,
        /// Comma-separated initial condition in chart order
        #[arg(long)]
        ic: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        t_end: Option<f64>,
        /// Shell energy (angular-sigma chart only)
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<f64>,
        /// Vortex placement for the sphere chart
        #[arg(long, value_enum)]
        vortex: Option<VortexArg>,
        #[arg(long)]
        rel_tol: Option<f64>,
        #[arg(long)]
        abs_tol: Option<f64>,
        /// Record on a uniform grid instead of every accepted step
        #[arg(long)]
        record_every: Option<f64>,
        /// Raise an energy-drift-alarm event when |H − H₀| exceeds this
        #[arg(long)]
        drift_alarm: Option<f64>,
    },
    /// Sample the zero-velocity manifold at an energy level
    Zvm {
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Restpoint curves on the collision torus with numeric spectra
    Restpoints {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Integrate a collision-manifold heteroclinic and compare to closed form
    Heteroclinic {
        #[arg(long, allow_negative_numbers = true)]
        psi: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        u0: Option<f64>,
        #[arg(long)]
        span: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Periodic vortex parallel at latitude θ̄
    Parallel {
        #[arg(long, allow_negative_numbers = true)]
        theta_bar: Option<f64>,
    },
    /// Meridian collision orbit extended through the vortex by reflection
    Transmit {
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        theta0: Option<f64>,
        #[arg(long)]
        record_every: Option<f64>,
    },
    /// Run every field consistency diagnostic and print the limit table
    FieldCheck,
}

struct CliError {
    code: u8,
    message: String,
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

fn numeric_error(message: impl Into<String>) -> CliError {
    CliError { code: 1, message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct Context {
    params: Params,
    file: FileConfig,
    output: Option<PathBuf>,
    format: OutputFormat,
}

impl Context {
    fn emit(&self, text: String) -> Result<(), CliError> {
        match &self.output {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| numeric_error(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_with_events(&self, text: String, events: String) -> Result<(), CliError> {
        match &self.output {
            Some(path) => {
                std::fs::write(path, text)
                    .map_err(|e| numeric_error(format!("cannot write {}: {e}", path.display())))?;
                let ev_path = path.with_extension("events.csv");
                std::fs::write(&ev_path, events)
                    .map_err(|e| numeric_error(format!("cannot write {}: {e}", ev_path.display())))
            }
            None => {
                print!("{text}");
                println!("# events");
                print!("{events}");
                Ok(())
            }
        }
    }

    fn emit_json(&self, command: &str, results: serde_json::Value, diagnostics: serde_json::Value) -> Result<(), CliError> {
        let doc = json!({
            "params": {"radius": self.params.radius(), "gamma": self.params.gamma()},
            "command": command,
            "results": results,
            "diagnostics": diagnostics,
        });
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| numeric_error(format!("JSON serialization failed: {e}")))?;
        text.push('\n');
        self.emit(text)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(input_error)?,
        None => FileConfig::default(),
    };
    let radius = resolve(cli.radius, file.get_f64("radius").map_err(input_error)?, 1.0);
    let gamma = resolve(cli.gamma, file.get_f64("gamma").map_err(input_error)?, 1.0);
    let params = Params::new(radius, gamma).map_err(|e| input_error(e.to_string()))?;
    let format = cli.format.unwrap_or(match file.get("format") {
        Some("json") => OutputFormat::Json,
        _ => OutputFormat::Csv,
    });
    let output = cli.output.clone().or_else(|| file.get("output").map(PathBuf::from));
    let ctx = Context { params, file, output, format };

    match cli.command {
        Command::Thresholds => cmd_thresholds(&ctx),
        Command::Classify { energy } => cmd_classify(&ctx, energy),
        Command::Simulate { chart, ic, t_end, energy, vortex, rel_tol, abs_tol, record_every, drift_alarm } => {
            cmd_simulate(&ctx, chart, ic, t_end, energy, vortex, rel_tol, abs_tol, record_every, drift_alarm)
        }
        Command::Zvm { energy, samples } => cmd_zvm(&ctx, energy, samples),
        Command::Restpoints { samples } => cmd_restpoints(&ctx, samples),
        Command::Heteroclinic { psi, u0, span, samples } => cmd_heteroclinic(&ctx, psi, u0, span, samples),
        Command::Parallel { theta_bar } => cmd_parallel(&ctx, theta_bar),
        Command::Transmit { energy, theta0, record_every } => cmd_transmit(&ctx, energy, theta0, record_every),
        Command::FieldCheck => cmd_field_check(&ctx),
    }
}

fn regime_name(kind: &RegimeKind) -> &'static str {
    match kind {
        RegimeKind::AllowedEverywhere => "AllowedEverywhere",
        RegimeKind::ForbiddenDisk(_) => "ForbiddenDisk",
        RegimeKind::AllowedDisk(_) => "AllowedDisk",
        RegimeKind::BoundaryH1 => "BoundaryH1",
        RegimeKind::BoundaryH2 => "BoundaryH2",
    }
}

fn cmd_thresholds(ctx: &Context) -> Result<(), CliError> {
    let (h1, h2) = thresholds(&ctx.params);
    match ctx.format {
        OutputFormat::Csv => {
            let text = format!("quantity,value\nh1,{}\nh2,{}\n", fmt_f64(h1), fmt_f64(h2));
            ctx.emit(text)
        }
        OutputFormat::Json => ctx.emit_json("thresholds", json!({"h1": h1, "h2": h2}), json!({})),
    }
}

fn cmd_classify(ctx: &Context, energy: Option<f64>) -> Result<(), CliError> {
    let h = require(energy, ctx.file.get_f64("energy").map_err(input_error)?, "energy")
        .map_err(input_error)?;
    let regime = classify(h, &ctx.params);
    let narrative = classify_transmission(h, &ctx.params);
    let behavior = match narrative.behavior {
        RegimeBehavior::BounceBetweenZvmAndVortex => "BounceBetweenZvmAndVortex",
        RegimeBehavior::AsymptoticToAntipodal => "AsymptoticToAntipodal",
        RegimeBehavior::MeridianThroughAntipodal => "MeridianThroughAntipodal",
    };
    let disk = match regime.kind {
        RegimeKind::ForbiddenDisk(d) | RegimeKind::AllowedDisk(d) => Some(d),
        _ => None,
    };
    match ctx.format {
        OutputFormat::Csv => {
            let mut text = String::from("quantity,value\n");
            text.push_str(&format!("h,{}\n", fmt_f64(regime.h)));
            text.push_str(&format!("h1,{}\n", fmt_f64(regime.h1)));
            text.push_str(&format!("h2,{}\n", fmt_f64(regime.h2)));
            text.push_str(&format!("regime,{}\n", regime_name(&regime.kind)));
            text.push_str(&format!("transmission_behavior,{behavior}\n"));
            if let Some(d) = disk {
                text.push_str(&format!("disk_center_x,{}\n", fmt_f64(d.center.0)));
                text.push_str(&format!("disk_center_y,{}\n", fmt_f64(d.center.1)));
                text.push_str(&format!("disk_radius,{}\n", fmt_f64(d.radius)));
            }
            ctx.emit(text)
        }
        OutputFormat::Json => {
            let disk_json = disk
                .map(|d| json!({"center": [d.center.0, d.center.1], "radius": d.radius}))
                .unwrap_or(serde_json::Value::Null);
            ctx.emit_json(
                "classify",
                json!({
                    "h": regime.h,
                    "h1": regime.h1,
                    "h2": regime.h2,
                    "regime": regime_name(&regime.kind),
                    "transmission_behavior": behavior,
                    "disk": disk_json,
                }),
                json!({}),
            )
        }
    }
}

fn parse_ic(text: &str, expected: usize) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| input_error(format!("cannot parse --ic: {e}")))?;
    if values.len() != expected {
        return Err(input_error(format!(
            "--ic needs {expected} components for this chart, got {}",
            values.len()
        )));
    }
    Ok(values)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    ctx: &Context,
    chart: Option<ChartArg>,
    ic: Option<String>,
    t_end: Option<f64>,
    energy: Option<f64>,
    vortex: Option<VortexArg>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    record_every: Option<f64>,
    drift_alarm: Option<f64>,
) -> Result<(), CliError> {
    let params = ctx.params;
    let chart = chart
        .or_else(|| match ctx.file.get("chart") {
            Some("sphere") => Some(ChartArg::Sphere),
            Some("sphere-geodesic") => Some(ChartArg::SphereGeodesic),
            Some("plane") => Some(ChartArg::Plane),
            Some("mcgehee-tau") => Some(ChartArg::McgeheeTau),
            Some("angular-sigma") => Some(ChartArg::AngularSigma),
            Some("collision-manifold") => Some(ChartArg::CollisionManifold),
            _ => None,
        })
        .ok_or_else(|| input_error("missing required option --chart"))?;
    let ic_text = ic
        .or_else(|| ctx.file.get("ic").map(str::to_string))
        .ok_or_else(|| input_error("missing required option --ic"))?;
    let t_end = require(t_end, ctx.file.get_f64("t_end").map_err(input_error)?, "t-end")
        .map_err(input_error)?;
    let rel = resolve(rel_tol, ctx.file.get_f64("rel_tol").map_err(input_error)?, 1e-10);
    let abs = resolve(abs_tol, ctx.file.get_f64("abs_tol").map_err(input_error)?, 1e-12);
    let record = match resolve(record_every, ctx.file.get_f64("record_every").map_err(input_error)?, 0.0) {
        dt if dt > 0.0 => RecordMode::Interval(dt),
        _ => RecordMode::EveryStep,
    };
    let opts = IntegratorOptions { rel_tol: rel, abs_tol: abs, record, ..Default::default() };
    let vortex_pos = match vortex.unwrap_or(VortexArg::North) {
        VortexArg::North => VortexPosition::NorthPole,
        VortexArg::Equator => VortexPosition::Equator,
    };

    match chart {
        ChartArg::Sphere | ChartArg::SphereGeodesic | ChartArg::Plane | ChartArg::McgeheeTau => {
            let values = parse_ic(&ic_text, 4)?;
            let y0 = [values[0], values[1], values[2], values[3]];
            type Field4 = Box<dyn Fn(f64, &[f64; 4]) -> sphere_vortex::Result<[f64; 4]>>;
            let (kind, field): (FieldKind, Field4) = match chart {
                ChartArg::Sphere => (
                    FieldKind::SphereVortex(vortex_pos),
                    Box::new(move |_t, s| vf_sphere_vortex(s, &params, vortex_pos)),
                ),
                ChartArg::SphereGeodesic => (
                    FieldKind::SphereGeodesic,
                    Box::new(move |_t, s| vf_sphere_geodesic(s, &params)),
                ),
                ChartArg::Plane => (FieldKind::Plane, Box::new(move |_t, s| vf_plane(s, &params))),
                ChartArg::McgeheeTau => (
                    FieldKind::McGeheeTau,
                    Box::new(move |_t, s| vf_mcgehee_tau(s, &params)),
                ),
                _ => unreachable!(),
            };
            field(0.0, &y0).map_err(|e| input_error(format!("invalid initial condition: {e}")))?;
            let mut events: Vec<EventSpec<4>> = match kind {
                FieldKind::SphereVortex(VortexPosition::NorthPole) => {
                    vec![
                        EventSpec::collision_sphere_north(&params),
                        // θ crossing zero: only reachable on meridian orbits
                        EventSpec::new(
                            EventKind::AntipodalPassage,
                            EventDirection::Any,
                            false,
                            |_t, s: &[f64; 4]| s[1],
                        ),
                        // kinetic energy touching zero (turning point); inert
                        // for circulating orbits, whose kinetic term is
                        // bounded below by p_φ²
                        EventSpec::new(
                            EventKind::ZeroVelocityTouch,
                            EventDirection::Falling,
                            false,
                            {
                                let r_sq = params.radius() * params.radius();
                                move |_t, s: &[f64; 4]| {
                                    let sin_t = s[1].sin();
                                    let rotational = if s[2] == 0.0 {
                                        0.0
                                    } else {
                                        s[2] * s[2] / (sin_t * sin_t)
                                    };
                                    (rotational + s[3] * s[3]) / (2.0 * r_sq) - 1e-9
                                }
                            },
                        ),
                    ]
                }
                FieldKind::SphereVortex(VortexPosition::Equator) => {
                    vec![EventSpec::new(
                        EventKind::CollisionApproach,
                        EventDirection::Falling,
                        true,
                        move |_t, s: &[f64; 4]| {
                            let pt = SpherePoint { phi: s[0], theta: s[1] };
                            chord_sq(pt, &params) - sphere_vortex::integrate::COLLISION_CHORD_SQ_MIN
                        },
                    )]
                }
                FieldKind::Plane => vec![EventSpec::collision_plane(&params)],
                FieldKind::McGeheeTau => vec![EventSpec::collision_blowup_tau()],
                _ => vec![],
            };
            if let Some(tol) = drift_alarm {
                if let Ok(h0) = hamiltonian_value(kind, &y0, &params) {
                    events.push(EventSpec::new(
                        EventKind::EnergyDriftAlarm,
                        EventDirection::Rising,
                        false,
                        move |_t, s: &[f64; 4]| {
                            (hamiltonian_value(kind, s, &params).unwrap_or(f64::NAN) - h0).abs() - tol
                        },
                    ));
                }
            }
            let traj = integrate(kind, field, 0.0, y0, t_end, &opts, events)
                .map_err(|e| numeric_error(e.to_string()))?;
            emit_trajectory(ctx, &traj)
        }
        ChartArg::AngularSigma => {
            let h = require(energy, ctx.file.get_f64("energy").map_err(input_error)?, "energy")
                .map_err(input_error)?;
            let values = parse_ic(&ic_text, 3)?;
            let y0 = [values[0], values[1], values[2]];
            let kind = FieldKind::AngularSigma { h };
            let field = move |_t: f64, s: &[f64; 3]| sphere_vortex::dynamics::vf_angular_sigma(s, h, &params);
            field(0.0, &y0).map_err(|e| input_error(format!("invalid initial condition: {e}")))?;
            let traj = integrate(kind, field, 0.0, y0, t_end, &opts, vec![EventSpec::collision_blowup_sigma()])
                .map_err(|e| numeric_error(e.to_string()))?;
            emit_trajectory(ctx, &traj)
        }
        ChartArg::CollisionManifold => {
            let values = parse_ic(&ic_text, 2)?;
            let y0 = [values[0], values[1]];
            let traj = integrate(
                FieldKind::CollisionManifold,
                move |_t, s: &[f64; 2]| Ok(vf_collision_manifold(s[0], s[1], &params)),
                0.0,
                y0,
                t_end,
                &opts,
                vec![],
            )
            .map_err(|e| numeric_error(e.to_string()))?;
            emit_trajectory(ctx, &traj)
        }
    }
}

fn outcome_name<const N: usize>(traj: &Trajectory<N>) -> String {
    match traj.outcome {
        Outcome::CompletedSpan => "completed-span".to_string(),
        Outcome::TerminalEvent(kind) => format!("terminal-event:{kind}"),
        Outcome::StepFailure => "step-failure".to_string(),
    }
}

fn emit_trajectory<const N: usize>(ctx: &Context, traj: &Trajectory<N>) -> Result<(), CliError> {
    match ctx.format {
        OutputFormat::Csv => {
            let text = trajectory_csv(traj, &ctx.params).map_err(|e| numeric_error(e.to_string()))?;
            ctx.emit_with_events(text, events_csv(traj))
        }
        OutputFormat::Json => {
            let events: Vec<serde_json::Value> = traj
                .events
                .iter()
                .map(|e| json!({"time": e.time, "kind": e.kind.to_string(), "state": e.state.to_vec()}))
                .collect();
            let drift = monitor_energy(traj, &ctx.params)
                .map(|d| d.into_iter().fold(0.0, f64::max))
                .ok();
            ctx.emit_json(
                "simulate",
                json!({
                    "samples": traj.len(),
                    "t_end": traj.last_time(),
                    "final_state": traj.last_state().to_vec(),
                    "events": events,
                    "outcome": outcome_name(traj),
                }),
                json!({"max_energy_drift": drift}),
            )
        }
    }
}

fn cmd_zvm(ctx: &Context, energy: Option<f64>, samples: Option<usize>) -> Result<(), CliError> {
    let h = require(energy, ctx.file.get_f64("energy").map_err(input_error)?, "energy")
        .map_err(input_error)?;
    let n = samples.unwrap_or(256);
    let curve = zvm_curve(h, &ctx.params, n).map_err(|e| numeric_error(e.to_string()))?;
    let restpoint = zvm_restpoint(h, &ctx.params).map_err(|e| numeric_error(e.to_string()))?;
    let topology = match curve.topology {
        ZvmTopology::Empty => "Empty",
        ZvmTopology::PointLimit => "PointLimit",
        ZvmTopology::ClosedCurve => "ClosedCurve",
        ZvmTopology::GraphOverAlpha => "GraphOverAlpha",
    };
    match ctx.format {
        OutputFormat::Csv => {
            let mut text = String::from("alpha,r,x,y,E_hat_residual\n");
            for ((alpha, r), (x, y)) in curve.radial_samples.iter().zip(&curve.plane_samples) {
                let residual = e_hat(h, *r, *alpha, &ctx.params);
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(*alpha),
                    fmt_f64(*r),
                    fmt_f64(*x),
                    fmt_f64(*y),
                    fmt_f64(residual)
                ));
            }
            eprintln!(
                "zero-velocity manifold at h = {h}: topology {topology}, {} samples",
                curve.radial_samples.len()
            );
            if let Some((r, a)) = restpoint {
                eprintln!("restpoint: (r*, alpha*) = ({r}, {a})");
            }
            ctx.emit(text)
        }
        OutputFormat::Json => {
            let max_residual = curve
                .radial_samples
                .iter()
                .map(|(alpha, r)| e_hat(h, *r, *alpha, &ctx.params).abs())
                .fold(0.0, f64::max);
            ctx.emit_json(
                "zvm",
                json!({
                    "h": h,
                    "topology": topology,
                    "samples": curve.radial_samples.len(),
                    "restpoint": restpoint.map(|(r, a)| vec![r, a]),
                }),
                json!({"max_e_hat_residual": max_residual}),
            )
        }
    }
}

fn cmd_restpoints(ctx: &Context, samples: Option<usize>) -> Result<(), CliError> {
    let n = samples.unwrap_or(8);
    let points = restpoint_curves(&ctx.params, n).map_err(|e| numeric_error(e.to_string()))?;
    match ctx.format {
        OutputFormat::Csv => {
            let mut text = String::from(
                "family,r,alpha,psi,lambda1_re,lambda1_im,lambda2_re,lambda2_im,lambda3_re,lambda3_im,dr_dsigma_transverse\n",
            );
            for pt in &points {
                let family = match pt.family {
                    RestFamily::P1 => "P1",
                    RestFamily::P2 => "P2",
                    RestFamily::ZvmPoint => "ZvmPoint",
                };
                let transverse = stability_transverse(pt.family, pt.location[1], &ctx.params)
                    .map_err(|e| numeric_error(e.to_string()))?;
                text.push_str(&format!(
                    "{family},{},{},{},{},{},{},{},{},{},{}\n",
                    fmt_f64(pt.location[0]),
                    fmt_f64(pt.location[1]),
                    fmt_f64(pt.location[2]),
                    fmt_f64(pt.eigenvalues[0].re),
                    fmt_f64(pt.eigenvalues[0].im),
                    fmt_f64(pt.eigenvalues[1].re),
                    fmt_f64(pt.eigenvalues[1].im),
                    fmt_f64(pt.eigenvalues[2].re),
                    fmt_f64(pt.eigenvalues[2].im),
                    fmt_f64(transverse.dr_dsigma),
                ));
            }
            ctx.emit(text)
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = points
                .iter()
                .map(|pt| {
                    json!({
                        "family": format!("{:?}", pt.family),
                        "location": pt.location.to_vec(),
                        "eigenvalues": pt.eigenvalues.iter().map(|e| vec![e.re, e.im]).collect::<Vec<_>>(),
                        "classification": format!("{:?}", pt.classification),
                    })
                })
                .collect();
            ctx.emit_json("restpoints", json!({"count": points.len(), "points": rows}), json!({}))
        }
    }
}

fn cmd_heteroclinic(
    ctx: &Context,
    psi: Option<f64>,
    u0: Option<f64>,
    span: Option<f64>,
    samples: Option<usize>,
) -> Result<(), CliError> {
    let psi = require(psi, ctx.file.get_f64("psi").map_err(input_error)?, "psi").map_err(input_error)?;
    let u0 = resolve(u0, ctx.file.get_f64("u0").map_err(input_error)?, std::f64::consts::PI / 2.0);
    let span = resolve(span, ctx.file.get_f64("span").map_err(input_error)?, 120.0);
    let n = samples.unwrap_or(200);
    let orbit = verify_heteroclinic(psi, u0, &ctx.params, span, n)
        .map_err(|e| input_error(e.to_string()))?;
    match ctx.format {
        OutputFormat::Csv => {
            let gamma = ctx.params.gamma();
            let w0 = (u0 / 2.0).tan();
            let mut text = String::from("sigma,alpha,psi,alpha_closed_form\n");
            for (sigma, alpha) in &orbit.samples {
                let u = 2.0 * (w0 * (-gamma * sigma / (4.0 * std::f64::consts::PI)).exp()).atan();
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(*sigma),
                    fmt_f64(*alpha),
                    fmt_f64(psi),
                    fmt_f64(psi + u)
                ));
            }
            eprintln!(
                "heteroclinic ψ = {psi}, u0 = {u0}: max closed-form deviation {:.3e}",
                orbit.max_closed_form_deviation
            );
            ctx.emit(text)
        }
        OutputFormat::Json => ctx.emit_json(
            "heteroclinic",
            json!({
                "psi": psi,
                "u0": u0,
                "span": span,
                "source": orbit.source.to_vec(),
                "sink": orbit.sink.to_vec(),
            }),
            json!({"max_closed_form_deviation": orbit.max_closed_form_deviation}),
        ),
    }
}

fn cmd_parallel(ctx: &Context, theta_bar: Option<f64>) -> Result<(), CliError> {
    let theta_bar = require(theta_bar, ctx.file.get_f64("theta_bar").map_err(input_error)?, "theta-bar")
        .map_err(input_error)?;
    let params = ctx.params;
    let orbit = vortex_parallel(theta_bar, &params).map_err(|e| input_error(e.to_string()))?;
    let residual = vf_sphere_vortex(&[0.0, theta_bar, orbit.p_phi, 0.0], &params, VortexPosition::NorthPole)
        .map_err(|e| numeric_error(e.to_string()))?[3]
        .abs();
    // one-period closing error
    let y0 = [0.0, theta_bar, orbit.p_phi, 0.0];
    let opts = IntegratorOptions { rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() };
    let traj = integrate(
        FieldKind::SphereVortex(VortexPosition::NorthPole),
        move |_t, s: &[f64; 4]| vf_sphere_vortex(s, &params, VortexPosition::NorthPole),
        0.0,
        y0,
        orbit.period,
        &opts,
        vec![],
    )
    .map_err(|e| numeric_error(e.to_string()))?;
    let end = traj.last_state();
    let dphi = (end[0] - y0[0]).rem_euclid(2.0 * std::f64::consts::PI);
    let closing = dphi
        .min(2.0 * std::f64::consts::PI - dphi)
        .max((end[1] - y0[1]).abs())
        .max((end[2] - y0[2]).abs())
        .max((end[3] - y0[3]).abs());
    match ctx.format {
        OutputFormat::Csv => {
            let text = format!(
                "quantity,value\ntheta_bar,{}\np_phi,{}\nperiod,{}\np_theta_residual,{}\nclosing_error,{}\n",
                fmt_f64(theta_bar),
                fmt_f64(orbit.p_phi),
                fmt_f64(orbit.period),
                fmt_f64(residual),
                fmt_f64(closing)
            );
            ctx.emit(text)
        }
        OutputFormat::Json => ctx.emit_json(
            "parallel",
            json!({"theta_bar": theta_bar, "p_phi": orbit.p_phi, "period": orbit.period}),
            json!({"p_theta_residual": residual, "closing_error": closing}),
        ),
    }
}

fn cmd_transmit(
    ctx: &Context,
    energy: Option<f64>,
    theta0: Option<f64>,
    record_every: Option<f64>,
) -> Result<(), CliError> {
    let params = ctx.params;
    let (_, h2) = thresholds(&params);
    let h = resolve(energy, ctx.file.get_f64("energy").map_err(input_error)?, h2 + 0.2);
    let theta0 = resolve(theta0, ctx.file.get_f64("theta0").map_err(input_error)?, std::f64::consts::PI / 2.0);
    let dt = resolve(record_every, ctx.file.get_f64("record_every").map_err(input_error)?, 0.002);
    if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
        return Err(input_error(format!("theta0 = {theta0} outside (0, π)")));
    }
    let r_sq = params.radius() * params.radius();
    let v0 = params.gamma() / (8.0 * std::f64::consts::PI)
        * sphere_vortex::geometry::chord_sq_to_north(theta0, &params).ln();
    let kinetic = 2.0 * r_sq * (h - v0);
    if kinetic <= 0.0 {
        return Err(input_error(format!("energy {h} too low to move at θ₀ = {theta0}")));
    }
    let opts = IntegratorOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        record: RecordMode::Interval(dt),
        ..Default::default()
    };
    let pre = meridian_orbit(0.0, theta0, kinetic.sqrt(), &params, 1000.0, &opts)
        .map_err(|e| numeric_error(e.to_string()))?;
    let path = transmit(&pre, &params).map_err(|e| numeric_error(e.to_string()))?;
    let residual = transmission_residual(&path, &params, 100).map_err(|e| numeric_error(e.to_string()))?;
    match ctx.format {
        OutputFormat::Csv => {
            let mut text = String::from("time,phi,theta,p_phi,p_theta,segment\n");
            for (t, s) in path.pre_times.iter().zip(&path.pre_states) {
                text.push_str(&format!(
                    "{},{},{},{},{},pre\n",
                    fmt_f64(*t),
                    fmt_f64(s[0]),
                    fmt_f64(s[1]),
                    fmt_f64(s[2]),
                    fmt_f64(s[3])
                ));
            }
            text.push_str(&format!(
                "{},{},{},nan,nan,vortex\n",
                fmt_f64(path.t_collision),
                fmt_f64(path.vortex.0),
                fmt_f64(path.vortex.1)
            ));
            for (t, s) in path.post_times.iter().zip(&path.post_states) {
                text.push_str(&format!(
                    "{},{},{},{},{},post\n",
                    fmt_f64(*t),
                    fmt_f64(s[0]),
                    fmt_f64(s[1]),
                    fmt_f64(s[2]),
                    fmt_f64(s[3])
                ));
            }
            eprintln!(
                "collision-transmission at h = {h}: T_s = {:.6}, EOM residual {residual:.3e}, θ gap {:.3e}",
                path.t_collision,
                path.gap_at_collision()
            );
            ctx.emit(text)
        }
        OutputFormat::Json => ctx.emit_json(
            "transmit",
            json!({
                "h": h,
                "theta0": theta0,
                "t_collision": path.t_collision,
                "vortex": [path.vortex.0, path.vortex.1],
                "pre_samples": path.pre_times.len(),
                "post_samples": path.post_times.len(),
            }),
            json!({
                "eom_residual": residual,
                "reflection_residual": path.reflection_residual(),
                "theta_gap_at_collision": path.gap_at_collision(),
            }),
        ),
    }
}

fn cmd_field_check(ctx: &Context) -> Result<(), CliError> {
    let report = field_check(&ctx.params).map_err(|e| numeric_error(e.to_string()))?;
    // Exercise the regime demos and level-set machinery as part of the health check.
    let (_, h2) = thresholds(&ctx.params);
    let bounce = demonstrate_regime(h2 - 0.01, &ctx.params, 200.0)
        .map_err(|e| numeric_error(e.to_string()))?;
    let demos_ok = bounce
        .event_sequence()
        .first()
        .is_some_and(|k| *k == EventKind::ZeroVelocityTouch);
    let level_set_probe = matches!(
        sphere_vortex::energy::level_circle(ctx.params.radius() * ctx.params.radius(), &ctx.params),
        Ok(LevelSet::Circle(_))
    );
    let all = report.all_passed && demos_ok && level_set_probe;
    match ctx.format {
        OutputFormat::Csv => {
            let mut text = String::new();
            text.push_str(&format!(
                "symplectic gradient max residual: {:.3e}\n",
                report.symplectic_max_residual
            ));
            text.push_str(&format!(
                "plane-to-blowup pushforward max residual: {:.3e}\n",
                report.pushforward_max_residual
            ));
            text.push_str(&format!(
                "angular-rate chain rule vs displayed form: {:.3e}\n",
                report.b_formula_max_deviation
            ));
            text.push_str(&format!(
                "collision energy limit: {:.9} (2ΓR²/π = {:.9}, alternative 4ΓR⁴/π = {:.9})\n",
                report.e_hat_limit.numeric,
                report.e_hat_limit.candidate_low,
                report.e_hat_limit.candidate_high
            ));
            text.push_str(&format!(
                "printed-form ratios: blow-up α-rate ×{:.1}, north-pole force ×{:.1} (parallel p_φ {:.6} canonical vs {:.6} printed)\n",
                report.discrepancies.alpha_rate_ratio,
                report.discrepancies.north_force_ratio,
                report.discrepancies.parallel_p_phi_canonical,
                report.discrepancies.parallel_p_phi_printed
            ));
            text.push_str(&format!(
                "sphere-lift flow deviation (reported, structural): {:.3e}\n",
                report.lift_deviation_sample
            ));
            text.push_str("collision limit table (r = 1e-2, 1e-3, 1e-4 -> limit):\n");
            for row in &report.limit_table {
                text.push_str(&format!(
                    "  {:<20} {:+.6e} {:+.6e} {:+.6e} -> {:+.6e} [{}]\n",
                    row.name,
                    row.values[0],
                    row.values[1],
                    row.values[2],
                    row.limit,
                    if row.converged { "ok" } else { "FAIL" }
                ));
            }
            text.push_str(if all {
                "field-check: all checks passed\n"
            } else {
                "field-check: FAILURES present\n"
            });
            ctx.emit(text)?;
            if all {
                Ok(())
            } else {
                Err(numeric_error("field-check found inconsistencies"))
            }
        }
        OutputFormat::Json => {
            let table: Vec<serde_json::Value> = report
                .limit_table
                .iter()
                .map(|row| {
                    json!({
                        "name": row.name,
                        "values": row.values.to_vec(),
                        "limit": row.limit,
                        "converged": row.converged,
                    })
                })
                .collect();
            ctx.emit_json(
                "field-check",
                json!({
                    "all_passed": all,
                    "e_hat_limit": {
                        "numeric": report.e_hat_limit.numeric,
                        "resolved": if report.e_hat_limit.resolves_to_low { "2*Gamma*R^2/pi" } else { "4*Gamma*R^4/pi" },
                    },
                    "alpha_rate_ratio": report.discrepancies.alpha_rate_ratio,
                    "north_force_ratio": report.discrepancies.north_force_ratio,
                }),
                json!({
                    "symplectic_max_residual": report.symplectic_max_residual,
                    "pushforward_max_residual": report.pushforward_max_residual,
                    "b_formula_max_deviation": report.b_formula_max_deviation,
                    "lift_deviation_sample": report.lift_deviation_sample,
                    "limit_table": table,
                }),
            )?;
            if all {
                Ok(())
            } else {
                Err(numeric_error("field-check found inconsistencies"))
            }
        }
    }
}
