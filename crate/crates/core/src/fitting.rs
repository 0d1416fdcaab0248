//! Parameter recovery from tracked motion traces.
//!
//! The validation pipeline: ingest position traces of the surface and part,
//! differentiate the surface track to a velocity drive, replay the part
//! dynamics against it for candidate `(μ_k, F_n)`, and minimize the summed
//! per-trial mean part-position error with the seeded swarm optimizer.
//! `μ_s` is measured, fixed, never a decision variable; `μ_k` is shared
//! across trials while `F_n` is fit per trial (measured squeeze forces differ
//! trial to trial).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{
    simulate_from_surface_trace_with_options, ContactMode, FrictionPair, IntegratorOptions,
    SurfaceMotion, SystemState, TransportConfig, VelocityTrace,
};
use crate::error::{Error, Result};
use crate::swarm::{self, SwarmOptions};

/// Optional per-trial metadata carried alongside a trace.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TraceMeta {
    pub drive_frequency_hz: Option<f64>,
    pub amplitude: Option<f64>,
    pub offset: Option<f64>,
    pub measured_normal_force_n: Option<f64>,
}

/// One tracked transport trial: uniformly sampled surface and part positions,
/// optionally the opposing support plate.
#[derive(Debug, Clone)]
pub struct ExperimentTrace {
    rate_hz: f64,
    surface_m: Vec<f64>,
    part_m: Vec<f64>,
    plate_m: Option<Vec<f64>>,
    pub meta: TraceMeta,
}

impl ExperimentTrace {
    pub fn new(rate_hz: f64, surface_m: Vec<f64>, part_m: Vec<f64>) -> Result<ExperimentTrace> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {rate_hz}"
            )));
        }
        if surface_m.len() != part_m.len() {
            return Err(Error::InvalidInput(format!(
                "surface and part series differ in length: {} vs {}",
                surface_m.len(),
                part_m.len()
            )));
        }
        if surface_m.len() < 10 {
            return Err(Error::InvalidInput(format!(
                "trace needs at least 10 samples, got {}",
                surface_m.len()
            )));
        }
        if surface_m.iter().chain(&part_m).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("trace contains non-finite values".into()));
        }
        Ok(ExperimentTrace {
            rate_hz,
            surface_m,
            part_m,
            plate_m: None,
            meta: TraceMeta::default(),
        })
    }

    pub fn with_plate(mut self, plate_m: Vec<f64>) -> Result<ExperimentTrace> {
        if plate_m.len() != self.surface_m.len() {
            return Err(Error::InvalidInput(format!(
                "plate series length {} does not match trace length {}",
                plate_m.len(),
                self.surface_m.len()
            )));
        }
        self.plate_m = Some(plate_m);
        Ok(self)
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.surface_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface_m.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 / self.rate_hz
    }

    pub fn surface_positions(&self) -> &[f64] {
        &self.surface_m
    }

    pub fn part_positions(&self) -> &[f64] {
        &self.part_m
    }

    pub fn plate_positions(&self) -> Option<&[f64]> {
        self.plate_m.as_deref()
    }

    /// Peak measured part excursion, the normalization scale for errors.
    pub fn part_amplitude(&self) -> f64 {
        self.part_m
            .iter()
            .fold(0.0f64, |m, z| m.max(z.abs()))
            .max(f64::MIN_POSITIVE)
    }
}

/// Centered moving average of odd width `w` (`w <= 1` is a no-op); the window
/// shrinks symmetrically at the ends.
pub fn moving_average(series: &[f64], w: usize) -> Vec<f64> {
    if w <= 1 || series.len() < 3 {
        return series.to_vec();
    }
    let half = (w / 2).min((series.len() - 1) / 2);
    (0..series.len())
        .map(|i| {
            let r = half.min(i).min(series.len() - 1 - i);
            let lo = i - r;
            let hi = i + r;
            series[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Differentiate a position series: central differences in the interior,
/// one-sided at the endpoints.
pub fn finite_difference_velocity(positions: &[f64], rate_hz: f64) -> Result<Vec<f64>> {
    if positions.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "finite differences need at least 3 samples, got {}",
            positions.len()
        )));
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sample rate must be positive, got {rate_hz}"
        )));
    }
    let n = positions.len();
    let mut v = Vec::with_capacity(n);
    v.push((positions[1] - positions[0]) * rate_hz);
    for w in positions.windows(3) {
        v.push((w[2] - w[0]) * rate_hz / 2.0);
    }
    v.push((positions[n - 1] - positions[n - 2]) * rate_hz);
    Ok(v)
}

/// Fixed (measured) quantities that are never fit.
#[derive(Debug, Clone, Copy)]
pub struct FixedParams {
    pub mu_s: f64,
    pub part_mass: f64,
    pub gravity: f64,
}

/// Search box for the fit: one shared `mu_k` range and one `F_n` range per
/// trial, in newtons.
#[derive(Debug, Clone)]
pub struct FitBounds {
    pub mu_k: (f64, f64),
    pub f_n: Vec<(f64, f64)>,
}

impl FitBounds {
    /// The same `F_n` range for every trial.
    pub fn uniform(mu_k: (f64, f64), f_n: (f64, f64), n_trials: usize) -> FitBounds {
        FitBounds {
            mu_k,
            f_n: vec![f_n; n_trials],
        }
    }
}

/// Fitting knobs: surface-track smoothing width (samples), the swarm
/// configuration, and the divergence penalty scale.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Moving-average width applied to position tracks before differentiation.
    pub smoothing_window: usize,
    pub swarm: SwarmOptions,
    pub integrator: IntegratorOptions,
    /// Divergent or invalid candidates cost
    /// `penalty_factor · n_samples · part_amplitude` meters instead of
    /// infinity, keeping swarm totals finite.
    pub penalty_factor: f64,
    /// Evaluation budget for the deterministic pattern refinement that
    /// polishes the swarm's best point; 0 disables it.
    pub refine_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            smoothing_window: 5,
            swarm: SwarmOptions::default(),
            integrator: IntegratorOptions::default(),
            penalty_factor: 1e3,
            refine_evals: 3000,
        }
    }
}

/// Recovered parameters with residual statistics and optimizer diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub mu_k: f64,
    /// Fitted normal force per trial, N.
    pub f_n: Vec<f64>,
    /// Mean |z_P,sim − z_P,meas| per trial, m.
    pub trial_mean_error_m: Vec<f64>,
    /// Mean error as a fraction of each trial's peak measured part position.
    pub normalized_error: Vec<f64>,
    pub total_cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub cost_history: Vec<f64>,
    pub stalled: bool,
    /// Relative cost increase when `mu_k` is perturbed by ±2% of its search
    /// range at the optimum; near zero means the data do not constrain `mu_k`
    /// (for example, trials that never slip).
    pub mu_k_sensitivity: f64,
    pub flat_mu_k: bool,
}

/// Threshold on `mu_k_sensitivity` below which the fit reports a flat cost.
pub const FLAT_COST_THRESHOLD: f64 = 1e-6;

/// Replay one trial with candidate `(mu_k, f_n_force)` and return the mean
/// absolute part-position error against the measurement, meters.
///
/// The surface drive is the smoothed, finite-differenced surface track; the
/// initial part state comes from the first samples. A diverging simulation
/// maps to a large finite penalty so optimizer totals stay usable.
pub fn trial_error(
    trace: &ExperimentTrace,
    mu_k: f64,
    f_n_force: f64,
    fixed: &FixedParams,
    opts: &FitOptions,
) -> f64 {
    let penalty = opts.penalty_factor * trace.len() as f64 * trace.part_amplitude();
    match simulate_trial(trace, mu_k, f_n_force, fixed, opts) {
        Ok(sim) => {
            let dt = 1.0 / trace.rate_hz();
            let n = trace.len();
            let mut acc = 0.0;
            for (k, z_meas) in trace.part_positions().iter().enumerate() {
                let z_sim = sim.part_position_at(k as f64 * dt);
                acc += (z_sim - z_meas).abs();
            }
            acc / n as f64
        }
        Err(_) => penalty,
    }
}

/// Simulate one trial's part motion from its measured surface track.
pub fn simulate_trial(
    trace: &ExperimentTrace,
    mu_k: f64,
    f_n_force: f64,
    fixed: &FixedParams,
    opts: &FitOptions,
) -> Result<crate::trajectory::Trajectory> {
    if !(mu_k.is_finite() && mu_k > 0.0 && f_n_force.is_finite() && f_n_force > 0.0) {
        return Err(Error::InvalidInput(format!(
            "candidate parameters out of domain: mu_k = {mu_k}, F_n = {f_n_force}"
        )));
    }
    let fric = FrictionPair::unordered(fixed.mu_s, mu_k)?;
    let cfg = TransportConfig::new(
        fixed.part_mass,
        f_n_force,
        fixed.gravity,
        f64::MAX / 4.0, // actuator limit is irrelevant when replaying a measured drive
        trace.duration(),
    )?;

    let surface_smooth = moving_average(trace.surface_positions(), opts.smoothing_window);
    let v_surface = finite_difference_velocity(&surface_smooth, trace.rate_hz())?;
    let (v_lo, v_hi) = v_surface
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let drive = VelocityTrace::new(v_surface, trace.rate_hz())?
        .with_initial_position(surface_smooth[0]);

    let part_smooth = moving_average(trace.part_positions(), opts.smoothing_window);
    // Initial part velocity: position tracks differentiate too noisily to
    // resolve it below the surface-velocity scale, and capture windows begin
    // with the part carried. Start stuck unless a least-squares slope over
    // the leading samples clearly disagrees with the surface.
    let v_s0 = drive.velocity(0.0);
    let k = (opts.smoothing_window.max(3) + 4).min(part_smooth.len());
    let dt = 1.0 / trace.rate_hz();
    let t_mean = 0.5 * (k - 1) as f64 * dt;
    let z_mean = part_smooth[..k].iter().sum::<f64>() / k as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, z) in part_smooth[..k].iter().enumerate() {
        let tc = i as f64 * dt - t_mean;
        num += tc * (z - z_mean);
        den += tc * tc;
    }
    let v_est = num / den;
    let v_range = (v_hi - v_lo).max(1e-12);
    let v_p0 = if (v_est - v_s0).abs() <= 0.75 * v_range {
        v_s0
    } else {
        v_est
    };
    let initial = SystemState::new(
        0.0,
        surface_smooth[0],
        v_s0,
        part_smooth[0],
        v_p0,
        ContactMode::Sticking,
    );
    simulate_from_surface_trace_with_options(&drive, &fric, &cfg, &initial, &opts.integrator)
}

/// Fit a shared `mu_k` and per-trial `F_n` to a set of traces by swarm search
/// minimizing the summed [`trial_error`]. Deterministic for a given seed.
pub fn fit(
    traces: &[ExperimentTrace],
    bounds: &FitBounds,
    fixed: &FixedParams,
    seed: u64,
    opts: &FitOptions,
) -> Result<FitResult> {
    if traces.is_empty() {
        return Err(Error::InvalidInput("fit needs at least one trace".into()));
    }
    if bounds.f_n.len() != traces.len() {
        return Err(Error::InvalidInput(format!(
            "need one F_n bound per trial: {} bounds for {} traces",
            bounds.f_n.len(),
            traces.len()
        )));
    }
    let mut box_bounds = vec![bounds.mu_k];
    box_bounds.extend_from_slice(&bounds.f_n);

    let objective = |x: &[f64]| -> f64 {
        let mu_k = x[0];
        traces
            .iter()
            .zip(&x[1..])
            .map(|(trace, &f_n)| trial_error(trace, mu_k, f_n, fixed, opts))
            .sum()
    };

    let report = swarm::minimize(objective, &box_bounds, seed, &opts.swarm)?;
    let (best, best_cost, refine_evals) = if opts.refine_evals > 0 {
        // Slipping dynamics depend on μ_k·F_n, so fit costs are nearly
        // degenerate along directions that preserve those products. Refine in
        // (μ_k, p_i = μ_k·F_n,i) coordinates, where that valley is a single
        // axis instead of a curved trench the simplex cannot track.
        let f_bounds = bounds.f_n.clone();
        let to_params = move |y: &[f64]| -> Vec<f64> {
            let mu = y[0];
            let mut x = Vec::with_capacity(y.len());
            x.push(mu);
            for (p, &(lo, hi)) in y[1..].iter().zip(&f_bounds) {
                x.push((p / mu).clamp(lo, hi));
            }
            x
        };
        let obj_y = |y: &[f64]| objective(&to_params(y));
        let mut y_start = vec![report.best_position[0]];
        let mut y_bounds = vec![bounds.mu_k];
        for (f, &(lo, hi)) in report.best_position[1..].iter().zip(&bounds.f_n) {
            y_start.push(report.best_position[0] * f);
            y_bounds.push((bounds.mu_k.0 * lo, bounds.mu_k.1 * hi));
        }
        let (y_best, cost, evals) =
            swarm::refine(obj_y, &y_bounds, &y_start, opts.refine_evals)?;
        (to_params(&y_best), cost, evals)
    } else {
        (report.best_position.clone(), report.best_cost, 0)
    };

    let mu_k = best[0];
    let f_n = best[1..].to_vec();
    let trial_mean_error_m: Vec<f64> = traces
        .iter()
        .zip(&f_n)
        .map(|(trace, &fnf)| trial_error(trace, mu_k, fnf, fixed, opts))
        .collect();
    let normalized_error: Vec<f64> = traces
        .iter()
        .zip(&trial_mean_error_m)
        .map(|(trace, &e)| e / trace.part_amplitude())
        .collect();

    // Flat-cost probe: is mu_k actually constrained by the data?
    let (lo, hi) = bounds.mu_k;
    let delta = 0.02 * (hi - lo);
    let cost_at = |m: f64| -> f64 {
        traces
            .iter()
            .zip(&f_n)
            .map(|(trace, &fnf)| trial_error(trace, m, fnf, fixed, opts))
            .sum()
    };
    let base = best_cost;
    let probe = [
        (mu_k - delta).max(lo),
        (mu_k + delta).min(hi),
    ];
    let scale: f64 = traces
        .iter()
        .map(|t| 1e-12 * t.part_amplitude() * t.len() as f64)
        .sum();
    let mu_k_sensitivity = probe
        .iter()
        .map(|&m| (cost_at(m) - base).abs() / base.abs().max(scale))
        .fold(0.0f64, f64::max);

    let mut cost_history = report.cost_history;
    cost_history.push(best_cost);

    Ok(FitResult {
        mu_k,
        f_n,
        trial_mean_error_m,
        normalized_error,
        total_cost: best_cost,
        iterations: report.iterations,
        evaluations: report.evaluations + refine_evals,
        cost_history,
        stalled: report.stalled,
        mu_k_sensitivity,
        flat_mu_k: mu_k_sensitivity < FLAT_COST_THRESHOLD,
    })
}

/// Load a trace from delimited text.
///
/// Format: optional `# key: value` comment lines (`units` of `m` or `mm`,
/// plus trial metadata), a mandatory header `t,z_surface,z_part[,z_plate]`,
/// then one row per sample with a uniform timestep. Positions are converted
/// to meters.
pub fn load_trace<P: AsRef<Path>>(path: P) -> Result<ExperimentTrace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        msg: format!("cannot open: {e}"),
    })?;
    parse_trace(BufReader::new(file), &path.display().to_string())
}

/// Parse a trace from any reader; `label` names the source in errors.
pub fn parse_trace<R: BufRead>(reader: R, label: &str) -> Result<ExperimentTrace> {
    let err = |msg: String| Error::Parse {
        path: label.to_string(),
        msg,
    };

    let mut unit_scale = 1.0;
    let mut meta = TraceMeta::default();
    let mut columns: Vec<String> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                let key = key.trim().to_ascii_lowercase();
                let value = value.trim();
                match key.as_str() {
                    "units" => {
                        unit_scale = match value.to_ascii_lowercase().as_str() {
                            "m" => 1.0,
                            "mm" => 1e-3,
                            other => {
                                return Err(err(format!("unknown units '{other}' (use m or mm)")))
                            }
                        }
                    }
                    "drive_frequency_hz" => meta.drive_frequency_hz = value.parse().ok(),
                    "amplitude" => meta.amplitude = value.parse().ok(),
                    "offset" => meta.offset = value.parse().ok(),
                    "normal_force_n" => meta.measured_normal_force_n = value.parse().ok(),
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = line
            .split([',', '\t'])
            .map(|f| f.trim())
            .filter(|f| !f.is_empty())
            .collect();
        if columns.is_empty() {
            let names: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
            if names.len() < 3
                || names[0] != "t"
                || names[1] != "z_surface"
                || names[2] != "z_part"
                || (names.len() == 4 && names[3] != "z_plate")
                || names.len() > 4
            {
                return Err(err(format!(
                    "expected header 't,z_surface,z_part[,z_plate]', got '{line}'"
                )));
            }
            columns = names;
            data = vec![Vec::new(); columns.len() - 1];
            continue;
        }
        if fields.len() != columns.len() {
            let missing = if fields.len() < columns.len() {
                &columns[fields.len()]
            } else {
                "extra"
            };
            return Err(err(format!(
                "row {}: expected {} columns, got {} (column '{}')",
                lineno + 1,
                columns.len(),
                fields.len(),
                missing
            )));
        }
        for (i, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                err(format!(
                    "row {}: bad value '{}' in column '{}'",
                    lineno + 1,
                    f,
                    columns[i]
                ))
            })?;
            if !v.is_finite() {
                return Err(err(format!(
                    "row {}: non-finite value in column '{}'",
                    lineno + 1,
                    columns[i]
                )));
            }
            if i == 0 {
                times.push(v);
            } else {
                data[i - 1].push(v * unit_scale);
            }
        }
    }

    if columns.is_empty() {
        return Err(err("missing header 't,z_surface,z_part[,z_plate]'".into()));
    }
    if times.len() < 10 {
        return Err(err(format!("need at least 10 rows, got {}", times.len())));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(err("time column must be strictly increasing".into()));
    }
    for i in 1..times.len() {
        let step = times[i] - times[i - 1];
        if (step - dt).abs() > 1e-6 * dt {
            return Err(err(format!(
                "non-uniform timestep at row {}: {step:.6e} vs {dt:.6e}",
                i + 1
            )));
        }
    }

    let mut trace = ExperimentTrace::new(1.0 / dt, data[0].clone(), data[1].clone())?;
    if data.len() == 3 {
        trace = trace.with_plate(data[2].clone())?;
    }
    trace.meta = meta;
    Ok(trace)
}
