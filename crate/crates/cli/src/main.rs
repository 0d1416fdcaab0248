//! Command-line front end for the stickslip toolkit: simulate drives, sweep
//! the transport map, solve for the optimal squeeze force, check feasibility
//! bounds, and fit friction parameters to tracked motion traces.
//!
//! Output is machine-readable tables (delimited text) plus structured
//! summaries (plain text or JSON); plotting is left to external tools. Every
//! subcommand is deterministic given its inputs and seed.
//!
//! Exit codes: 0 on success, 2 for validation failures (bad arguments,
//! infeasible parameters, parse errors), 3 for runtime failures (divergence,
//! non-convergence, I/O).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use stickslip::analysis::{
    self, feasibility_report, linspace, optimal_f_n, v_ave_closed_form, NondimensionalPoint,
};
use stickslip::dynamics::{
    simulate_with_options, FrictionPair, IntegratorOptions, SystemState, TransportConfig,
};
use stickslip::error::Error;
use stickslip::fitting::{self, FitBounds, FitOptions, FixedParams};
use stickslip::swarm::SwarmOptions;
use stickslip::waveforms::{
    optimal_waveform_with_margin, read_sampled_waveform, sawtooth_waveform, Waveform,
};

#[derive(Parser)]
#[command(
    name = "stickslip",
    version,
    about = "Vertical vibratory transport: simulation, drive optimization, and fitting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a drive waveform and export the trajectory.
    Simulate(SimulateArgs),
    /// Tabulate normalized transport velocity over an (alpha, f_n) grid.
    Sweep(SweepArgs),
    /// Solve for the squeeze force maximizing transport at each alpha.
    OptimalFn(OptimalFnArgs),
    /// Evaluate every transport feasibility bound at one parameter point.
    Feasibility(FeasibilityArgs),
    /// Fit kinetic friction and per-trial normal force to motion traces.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Physical parameters shared by the model-driven subcommands. Values can
/// also come from a JSON config file; explicit flags win.
#[derive(Args)]
struct PhysicalArgs {
    /// Static friction coefficient.
    #[arg(long)]
    mus: Option<f64>,
    /// Kinetic friction coefficient.
    #[arg(long)]
    muk: Option<f64>,
    /// Normal force per part weight, F_n/(m g).
    #[arg(long = "fn")]
    f_n: Option<f64>,
    /// Actuator acceleration limit per gravity, a_max/g.
    #[arg(long)]
    alpha: Option<f64>,
    /// Part mass, kg.
    #[arg(long)]
    mass: Option<f64>,
    /// Drive period, s.
    #[arg(long)]
    period: Option<f64>,
    /// Gravitational acceleration, m/s².
    #[arg(long)]
    gravity: Option<f64>,
    /// Two synchronized surfaces (halves the effective part mass).
    #[arg(long)]
    dual_surface: bool,
    /// JSON config file with the same keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Config-file form of [`PhysicalArgs`]. Unknown keys are rejected.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mus: Option<f64>,
    muk: Option<f64>,
    f_n: Option<f64>,
    alpha: Option<f64>,
    mass: Option<f64>,
    period: Option<f64>,
    gravity: Option<f64>,
    dual_surface: Option<bool>,
}

/// Fully resolved physical parameters.
struct Params {
    fric: FrictionPair,
    cfg: TransportConfig,
    f_n: f64,
    alpha: f64,
}

impl PhysicalArgs {
    fn resolve(&self) -> Result<Params, Error> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<FileConfig>(&text).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    msg: e.to_string(),
                })?
            }
            None => FileConfig::default(),
        };
        let mus = self.mus.or(file.mus).unwrap_or(0.7);
        let muk = self.muk.or(file.muk).unwrap_or(0.6);
        let f_n = self.f_n.or(file.f_n).unwrap_or(5.0);
        let alpha = self.alpha.or(file.alpha).unwrap_or(10.0);
        let mass = self.mass.or(file.mass).unwrap_or(0.009);
        let period = self.period.or(file.period).unwrap_or(0.1);
        let gravity = self.gravity.or(file.gravity).unwrap_or(9.81);
        let dual = self.dual_surface || file.dual_surface.unwrap_or(false);

        let fric = FrictionPair::new(mus, muk)?;
        // f_n and alpha are defined against the effective mass.
        let eff = if dual { mass / 2.0 } else { mass };
        let cfg = TransportConfig::new(mass, f_n * eff * gravity, gravity, alpha * gravity, period)?
            .with_dual_surface(dual);
        Ok(Params {
            fric,
            cfg,
            f_n,
            alpha,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    physical: PhysicalArgs,
    /// Drive profile: "optimal", "sawtooth", a segment JSON file (.json), or
    /// a sampled acceleration file (header "t,a").
    #[arg(long, default_value = "optimal")]
    waveform: String,
    /// Scale the optimal drive's carry acceleration below the slipping limit.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Sawtooth: fraction of the period spent in the carry phase.
    #[arg(long, default_value_t = 0.8)]
    up_fraction: f64,
    /// Sawtooth: carry-phase acceleration, m/s² (default: 80% of the cone).
    #[arg(long)]
    up_accel: Option<f64>,
    /// Periods to simulate.
    #[arg(long, default_value_t = 25)]
    periods: usize,
    /// Integrator steps per period.
    #[arg(long, default_value_t = 2000)]
    steps_per_period: usize,
    /// Trajectory CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Serialize)]
struct SimulateSummary {
    drive: String,
    segments: usize,
    period_s: f64,
    f_n: f64,
    alpha: f64,
    mu_s: f64,
    mu_k: f64,
    feasible: bool,
    violated_bounds: Vec<String>,
    periods: usize,
    samples: usize,
    v_ave_m_per_s: Option<f64>,
    v_ave_normalized: Option<f64>,
    steady_state: bool,
    sticking_fraction: f64,
    slipping_up_fraction: f64,
    slipping_down_fraction: f64,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let p = args.physical.resolve()?;
    let cfg = &p.cfg;

    let waveform = match args.waveform.as_str() {
        "optimal" => optimal_waveform_with_margin(&p.fric, cfg, args.margin)?,
        "sawtooth" => {
            let cone = (p.fric.mu_s() * p.f_n - 1.0) * cfg.gravity;
            let up = args.up_accel.unwrap_or(0.8 * cone);
            sawtooth_waveform(cfg, args.up_fraction, up)?
        }
        path => load_waveform_file(Path::new(path))?,
    };

    let report = feasibility_report(&NondimensionalPoint::new(p.f_n, p.alpha, p.fric)?);
    let opts = IntegratorOptions {
        steps_per_period: args.steps_per_period,
        ..IntegratorOptions::default()
    };
    let initial = SystemState::stuck_to(&waveform);
    let traj = simulate_with_options(&waveform, &p.fric, cfg, args.periods, &initial, &opts)?;

    let steady = traj.steady_state_velocity();
    let fractions = traj.mode_fractions();
    let summary = SimulateSummary {
        drive: args.waveform.clone(),
        segments: waveform.segments().len(),
        period_s: cfg.period,
        f_n: p.f_n,
        alpha: p.alpha,
        mu_s: p.fric.mu_s(),
        mu_k: p.fric.mu_k(),
        feasible: report.all_satisfied(),
        violated_bounds: report.violations().map(|c| c.name.to_string()).collect(),
        periods: args.periods,
        samples: traj.samples().len(),
        v_ave_m_per_s: steady.as_ref().ok().map(|s| s.v_ave),
        v_ave_normalized: steady
            .as_ref()
            .ok()
            .map(|s| s.v_ave / (cfg.gravity.max(f64::MIN_POSITIVE) * cfg.period)),
        steady_state: steady.is_ok(),
        sticking_fraction: fractions.sticking,
        slipping_up_fraction: fractions.slipping_up,
        slipping_down_fraction: fractions.slipping_down,
    };

    if let Some(out) = &args.out {
        let file = File::create(out)?;
        traj.write_csv(BufWriter::new(file))?;
    }

    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary).unwrap()),
        Format::Text => {
            println!(
                "drive: {} ({} segments, period {} s)",
                summary.drive, summary.segments, summary.period_s
            );
            println!(
                "parameters: f_n = {}, alpha = {}, mu_s = {}, mu_k = {}",
                summary.f_n, summary.alpha, summary.mu_s, summary.mu_k
            );
            if summary.feasible {
                println!("feasibility: all bounds satisfied");
            } else {
                println!(
                    "feasibility: VIOLATED ({})",
                    summary.violated_bounds.join(", ")
                );
            }
            println!("periods: {} ({} samples)", summary.periods, summary.samples);
            match (&summary.v_ave_m_per_s, &summary.v_ave_normalized) {
                (Some(v), Some(vn)) => {
                    println!("steady state: v_ave = {v:.6} m/s, v_ave/(gT) = {vn:.6}")
                }
                _ => println!("steady state: not reached within the simulated span"),
            }
            println!(
                "mode fractions: sticking {:.4}, slipping_up {:.4}, slipping_down {:.4}",
                summary.sticking_fraction,
                summary.slipping_up_fraction,
                summary.slipping_down_fraction
            );
            if let Some(out) = &args.out {
                println!("trajectory written to {}", out.display());
            }
        }
    }
    Ok(())
}

fn load_waveform_file(path: &Path) -> Result<Waveform, Error> {
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "waveform must be \"optimal\", \"sawtooth\", or a file path; '{}' not found",
            path.display()
        )));
    }
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)?;
        Waveform::from_json(&text)
    } else {
        let file = File::open(path)?;
        read_sampled_waveform(BufReader::new(file), &path.display().to_string())
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Static friction coefficient.
    #[arg(long, default_value_t = 0.7)]
    mus: f64,
    /// Kinetic friction coefficient.
    #[arg(long, default_value_t = 0.6)]
    muk: f64,
    /// Comma-separated acceleration ratios a_max/g.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0])]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    fn_min: f64,
    #[arg(long, default_value_t = 40.0)]
    fn_max: f64,
    #[arg(long, default_value_t = 400)]
    fn_points: usize,
    /// Cross-check this many random feasible grid points by full simulation.
    #[arg(long, default_value_t = 0)]
    verify_sim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sweep table CSV output path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let fric = FrictionPair::new(args.mus, args.muk)?;
    if args.fn_points == 0 || args.fn_min >= args.fn_max {
        return Err(Error::InvalidInput(format!(
            "bad f_n grid: [{}, {}] with {} points",
            args.fn_min, args.fn_max, args.fn_points
        )));
    }
    let grid = linspace(args.fn_min, args.fn_max, args.fn_points);
    let result = analysis::sweep(&fric, &args.alphas, &grid)?;

    match &args.out {
        Some(path) => {
            let file = File::create(path)?;
            result.write_csv(BufWriter::new(file))?;
            eprintln!("sweep table written to {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            result.write_csv(stdout.lock())?;
        }
    }
    let stdout = std::io::stdout();
    result.write_summary(stdout.lock())?;

    if args.verify_sim > 0 {
        let checks = analysis::verify_sweep(&result, args.verify_sim, args.seed)?;
        let mut worst = 0.0f64;
        println!("simulation cross-check ({} points):", checks.len());
        for c in &checks {
            println!(
                "  alpha = {:7.3}, f_n = {:8.4}: closed {:.6}, simulated {:.6}, rel err {:.3e}",
                c.alpha, c.f_n, c.v_closed, c.v_sim, c.rel_err
            );
            worst = worst.max(c.rel_err);
        }
        if worst > 0.01 {
            return Err(Error::NotConverged(format!(
                "simulation cross-check exceeded 1%: worst relative error {worst:.3e}"
            )));
        }
        println!("cross-check passed: worst relative error {worst:.3e}");
    }
    Ok(())
}

#[derive(Args)]
struct OptimalFnArgs {
    #[arg(long, default_value_t = 0.7)]
    mus: f64,
    #[arg(long, default_value_t = 0.6)]
    muk: f64,
    /// Comma-separated acceleration ratios a_max/g.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0])]
    alphas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Serialize)]
struct OptimumRow {
    alpha: f64,
    f_n_opt: f64,
    v_opt_normalized: f64,
    band_low: f64,
    band_high: f64,
}

fn cmd_optimal_fn(args: &OptimalFnArgs) -> Result<(), Error> {
    let fric = FrictionPair::new(args.mus, args.muk)?;
    let mut rows = Vec::new();
    for &alpha in &args.alphas {
        let (f_star, v_star) = optimal_f_n(alpha, &fric)?;
        rows.push(OptimumRow {
            alpha,
            f_n_opt: f_star,
            v_opt_normalized: v_star,
            band_low: 1.0 / fric.mu_s(),
            band_high: (alpha - 1.0) / fric.mu_k(),
        });
    }
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&rows).unwrap()),
        Format::Text => {
            println!("alpha,f_n_opt,v_opt_normalized,band_low,band_high");
            for r in rows {
                println!(
                    "{},{},{},{},{}",
                    r.alpha, r.f_n_opt, r.v_opt_normalized, r.band_low, r.band_high
                );
            }
        }
    }
    Ok(())
}

#[derive(Args)]
struct FeasibilityArgs {
    #[command(flatten)]
    physical: PhysicalArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn cmd_feasibility(args: &FeasibilityArgs) -> Result<(), Error> {
    let p = args.physical.resolve()?;
    let point = NondimensionalPoint::new(p.f_n, p.alpha, p.fric)?;
    let report = feasibility_report(&point);
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        Format::Text => {
            print!("{report}");
            println!(
                "predicted v_ave/(gT) under the optimal drive: {:.6}",
                v_ave_closed_form(&point)
            );
        }
    }
    Ok(())
}

#[derive(Args)]
struct FitArgs {
    /// Trace files (delimited text, header t,z_surface,z_part[,z_plate]).
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    /// Fixed (measured) static friction coefficient.
    #[arg(long, default_value_t = 0.72)]
    mus: f64,
    /// Part mass, kg.
    #[arg(long, default_value_t = 0.009)]
    mass: f64,
    #[arg(long, default_value_t = 9.81)]
    gravity: f64,
    #[arg(long, default_value_t = 0.3)]
    muk_min: f64,
    #[arg(long, default_value_t = 0.9)]
    muk_max: f64,
    /// Normal-force search range, N (applied per trial).
    #[arg(long, default_value_t = 0.1)]
    fn_min: f64,
    #[arg(long, default_value_t = 3.0)]
    fn_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Moving-average width (samples) applied before differentiation.
    #[arg(long, default_value_t = 5)]
    smooth_window: usize,
    /// Swarm particles.
    #[arg(long, default_value_t = 60)]
    particles: usize,
    /// Swarm iterations.
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Fit report output path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn cmd_fit(args: &FitArgs) -> Result<(), Error> {
    let traces = args
        .traces
        .iter()
        .map(fitting::load_trace)
        .collect::<Result<Vec<_>, _>>()?;
    let fixed = FixedParams {
        mu_s: args.mus,
        part_mass: args.mass,
        gravity: args.gravity,
    };
    let bounds = FitBounds::uniform(
        (args.muk_min, args.muk_max),
        (args.fn_min, args.fn_max),
        traces.len(),
    );
    let opts = FitOptions {
        smoothing_window: args.smooth_window,
        swarm: SwarmOptions {
            particles: args.particles,
            max_iterations: args.iterations,
            ..SwarmOptions::default()
        },
        ..FitOptions::default()
    };
    let result = fitting::fit(&traces, &bounds, &fixed, args.seed, &opts)?;

    let mut report = String::new();
    match args.format {
        Format::Json => report.push_str(&serde_json::to_string_pretty(&result).unwrap()),
        Format::Text => {
            report.push_str(&format!("fitted mu_k: {:.6}\n", result.mu_k));
            for (i, ((f, e), ne)) in result
                .f_n
                .iter()
                .zip(&result.trial_mean_error_m)
                .zip(&result.normalized_error)
                .enumerate()
            {
                report.push_str(&format!(
                    "trial {i} ({}): F_n = {f:.6} N, mean position error = {e:.6e} m ({:.2}% of peak)\n",
                    args.traces[i].display(),
                    100.0 * ne
                ));
            }
            report.push_str(&format!(
                "total cost: {:.6e} m over {} evaluations, {} iterations{}\n",
                result.total_cost,
                result.evaluations,
                result.iterations,
                if result.stalled { " (stalled)" } else { "" }
            ));
            report.push_str(&format!(
                "mu_k sensitivity: {:.3e}{}\n",
                result.mu_k_sensitivity,
                if result.flat_mu_k {
                    " — FLAT: the traces do not constrain mu_k (no slipping?)"
                } else {
                    ""
                }
            ));
        }
    }
    match &args.out {
        Some(path) => {
            let mut file = File::create(path)?;
            file.write_all(report.as_bytes())?;
            eprintln!("fit report written to {}", path.display());
        }
        None => print!("{report}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::OptimalFn(args) => cmd_optimal_fn(args),
        Command::Feasibility(args) => cmd_feasibility(args),
        Command::Fit(args) => cmd_fit(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
