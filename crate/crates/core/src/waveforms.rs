//! Periodic surface-acceleration profiles.
//!
//! A [`Waveform`] is a list of constant-acceleration segments spanning one
//! period `T`. Velocity and position are obtained by exact analytic
//! integration, with the velocity offset chosen so the surface velocity has
//! zero mean; together with a zero net acceleration impulse this makes both
//! `ż_S` and `z_S` T-periodic, which every valid drive must satisfy.
//!
//! Three constructors cover the toolkit's needs: the three-phase profile that
//! maximizes average upward part velocity, a practical two-phase sawtooth
//! (slow carry upward, hard flyback), and piecewise-constant resampling of an
//! arbitrary measured acceleration series.

use serde::{Deserialize, Serialize};

use crate::dynamics::{FrictionPair, SurfaceMotion, TransportConfig};
use crate::error::{Error, Result};

/// One constant-acceleration piece of a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Length of the piece in seconds.
    pub duration: f64,
    /// Surface acceleration over the piece, m/s².
    pub accel: f64,
}

/// Relative tolerance on the net velocity change over one period accepted by
/// [`Waveform::from_segments`] (relative to `max|a|·T`).
pub const CLOSURE_TOL: f64 = 1e-9;

/// Default rejection threshold for [`sampled_waveform`]: the mean acceleration
/// (net velocity change per period) may be corrected away only if it is below
/// this fraction of the peak acceleration.
pub const SAMPLED_CLOSURE_TOL: f64 = 0.01;

/// Periodic piecewise-constant surface acceleration profile.
///
/// Segments are right-open: the profile on `[0, T)` repeats with period `T`,
/// so `accel(T) == accel(0)`. Immutable after construction and safe to share
/// across parallel simulations.
#[derive(Debug, Clone)]
pub struct Waveform {
    period: f64,
    segments: Vec<Segment>,
    /// Segment start times, starts[0] = 0.
    starts: Vec<f64>,
    /// Surface velocity at each segment start (zero-mean offset applied).
    v_starts: Vec<f64>,
    /// Surface position at each segment start, z(0) = 0.
    z_starts: Vec<f64>,
    max_abs_accel: f64,
    label: &'static str,
}

/// Serialized form: period plus segment list.
#[derive(Serialize, Deserialize)]
struct WaveformFile {
    period: f64,
    segments: Vec<Segment>,
}

impl Waveform {
    /// Build a waveform from explicit segments.
    ///
    /// Validates that durations are positive and sum to `period`, and that the
    /// net acceleration impulse is zero (within [`CLOSURE_TOL`]); otherwise the
    /// surface velocity would drift period over period. The velocity offset is
    /// then chosen for zero mean velocity, making the position T-periodic.
    pub fn from_segments(period: f64, segments: Vec<Segment>) -> Result<Waveform> {
        Self::build(period, segments, "custom")
    }

    fn build(period: f64, segments: Vec<Segment>, label: &'static str) -> Result<Waveform> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "waveform period must be positive, got {period}"
            )));
        }
        if segments.is_empty() {
            return Err(Error::InvalidInput("waveform has no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration > 0.0) || !s.accel.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "segment {i} invalid: duration {}, accel {}",
                    s.duration, s.accel
                )));
            }
        }
        let total: f64 = segments.iter().map(|s| s.duration).sum();
        if (total - period).abs() > 1e-9 * period {
            return Err(Error::InvalidInput(format!(
                "segment durations sum to {total}, expected period {period}"
            )));
        }
        let max_abs_accel = segments.iter().fold(0.0f64, |m, s| m.max(s.accel.abs()));
        let dv: f64 = segments.iter().map(|s| s.accel * s.duration).sum();
        if dv.abs() > CLOSURE_TOL * (max_abs_accel * period + f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!(
                "waveform does not close: net velocity change {dv:.3e} m/s over one period \
                 (use sampled_waveform to correct small imbalances)"
            )));
        }

        let n = segments.len();
        let mut starts = Vec::with_capacity(n);
        let mut v_rel = Vec::with_capacity(n);
        let mut t = 0.0;
        let mut v = 0.0;
        for s in &segments {
            starts.push(t);
            v_rel.push(v);
            t += s.duration;
            v += s.accel * s.duration;
        }
        // Mean of the velocity profile with v(0) = 0; subtracting it zeroes
        // the mean and makes the position periodic.
        let mut mean = 0.0;
        for (i, s) in segments.iter().enumerate() {
            mean += v_rel[i] * s.duration + 0.5 * s.accel * s.duration * s.duration;
        }
        mean /= period;
        let v_starts: Vec<f64> = v_rel.iter().map(|v| v - mean).collect();

        let mut z_starts = Vec::with_capacity(n);
        let mut z = 0.0;
        for (i, s) in segments.iter().enumerate() {
            z_starts.push(z);
            z += v_starts[i] * s.duration + 0.5 * s.accel * s.duration * s.duration;
        }

        Ok(Waveform {
            period,
            segments,
            starts,
            v_starts,
            z_starts,
            max_abs_accel,
            label,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn max_abs_accel(&self) -> f64 {
        self.max_abs_accel
    }

    /// Constructor tag: "optimal", "sawtooth", "sampled", or "custom".
    pub fn label(&self) -> &'static str {
        self.label
    }

    /// Net velocity change over one period (analytic; ~0 by construction).
    pub fn velocity_closure(&self) -> f64 {
        self.segments.iter().map(|s| s.accel * s.duration).sum()
    }

    /// Net position change over one period (analytic; ~0 by construction).
    pub fn position_closure(&self) -> f64 {
        let last = self.segments.len() - 1;
        let s = &self.segments[last];
        self.z_starts[last] + self.v_starts[last] * s.duration
            + 0.5 * s.accel * s.duration * s.duration
    }

    /// Mean surface velocity over one period (~0 by construction).
    pub fn mean_velocity(&self) -> f64 {
        let mut mean = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            mean += self.v_starts[i] * s.duration + 0.5 * s.accel * s.duration * s.duration;
        }
        mean / self.period
    }

    /// Segment index and local time for a (wrapped) instant.
    fn locate(&self, t: f64) -> (usize, f64) {
        let mut tm = t.rem_euclid(self.period);
        if tm >= self.period {
            tm = 0.0;
        }
        // Last start <= tm.
        let idx = match self.starts.binary_search_by(|s| s.partial_cmp(&tm).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (idx, tm - self.starts[idx])
    }

    pub fn to_json(&self) -> String {
        let file = WaveformFile {
            period: self.period,
            segments: self.segments.clone(),
        };
        serde_json::to_string_pretty(&file).expect("waveform serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Waveform> {
        let file: WaveformFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<waveform json>".into(),
            msg: e.to_string(),
        })?;
        Self::from_segments(file.period, file.segments)
    }
}

impl SurfaceMotion for Waveform {
    fn accel(&self, t: f64) -> f64 {
        let (i, _) = self.locate(t);
        self.segments[i].accel
    }

    fn velocity(&self, t: f64) -> f64 {
        let (i, tau) = self.locate(t);
        self.v_starts[i] + self.segments[i].accel * tau
    }

    fn position(&self, t: f64) -> f64 {
        let (i, tau) = self.locate(t);
        self.z_starts[i] + self.v_starts[i] * tau + 0.5 * self.segments[i].accel * tau * tau
    }

    fn next_transition_after(&self, t: f64) -> Option<f64> {
        let (i, tau) = self.locate(t);
        let seg_end = if i + 1 < self.starts.len() {
            self.starts[i + 1]
        } else {
            self.period
        };
        let remaining = seg_end - (self.starts[i] + tau);
        // Guard against landing exactly on a boundary: step to the next one.
        if remaining <= 0.0 {
            let next = if i + 2 < self.starts.len() {
                self.starts[i + 2] - (self.starts[i] + tau)
            } else {
                self.period - (self.starts[i] + tau) + self.segments[0].duration
            };
            return Some(t + next);
        }
        Some(t + remaining)
    }
}

/// Three-phase profile that maximizes the average upward part velocity.
///
/// Phase 1 carries the part upward by sticking at the static friction limit,
/// acceleration `(μ_s f_n − 1)·g`; phase 2 drops the surface out from under
/// the part at `−a_max`; phase 3 catches back up at `+a_max`, with the
/// velocities rejoining exactly at the period boundary. Phase durations come
/// from part- and surface-velocity periodicity.
///
/// Requires `μ_s f_n ≥ 1` (the part can be held at all) and
/// `a_max/g ≥ μ_k f_n + 1` (the surface can out-accelerate the part downward);
/// at either boundary the profile degenerates to zero transport.
pub fn optimal_waveform(fric: &FrictionPair, cfg: &TransportConfig) -> Result<Waveform> {
    optimal_waveform_with_margin(fric, cfg, 1.0)
}

/// [`optimal_waveform`] with the phase-1 acceleration scaled by `margin ∈ (0, 1]`.
///
/// Running a little below the static limit trades some average velocity for
/// robustness to timing error; phase durations are rebalanced so the profile
/// still closes.
pub fn optimal_waveform_with_margin(
    fric: &FrictionPair,
    cfg: &TransportConfig,
    margin: f64,
) -> Result<Waveform> {
    if !(margin.is_finite() && margin > 0.0 && margin <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "margin must be in (0, 1], got {margin}"
        )));
    }
    if cfg.gravity <= 0.0 {
        return Err(Error::InvalidInput(
            "optimal waveform requires gravity > 0 (normal force per weight undefined)".into(),
        ));
    }
    let g = cfg.gravity;
    let f_n = cfg.normal_force_per_weight().expect("gravity > 0 checked");
    let alpha = cfg.a_max / g;
    let sigma = fric.mu_s() * f_n;
    let beta = fric.mu_k() * f_n;

    if sigma < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "static_hold: f_n = {f_n:.4} is below 1/mu_s = {:.4}; \
             the part cannot be held against gravity at rest",
            1.0 / fric.mu_s()
        )));
    }
    if alpha < beta + 1.0 - 1e-12 {
        let f_n_max = (alpha - 1.0) / fric.mu_k();
        return Err(Error::Infeasible(format!(
            "max_squeeze: f_n = {f_n:.4} exceeds f_n_max = (alpha - 1)/mu_k = {f_n_max:.4}; \
             kinetic friction is too large for the surface to slip below the part"
        )));
    }

    let t_total = cfg.period;
    let a1 = margin * (sigma - 1.0); // phase-1 acceleration in units of g
    if a1 * g < 1e-12 {
        // Degenerate zero-transport profile at the static-hold boundary.
        return Waveform::build(
            t_total,
            vec![Segment {
                duration: t_total,
                accel: 0.0,
            }],
            "optimal",
        );
    }

    let tau1 = (beta + 1.0) / (a1 + beta + 1.0);
    let tau2 = 0.5 * (1.0 + tau1) + a1 * tau1 / (2.0 * alpha);
    let d1 = tau1 * t_total;
    let d2 = (tau2 - tau1) * t_total;
    let d3 = t_total - d1 - d2;

    let mut segments = vec![Segment {
        duration: d1,
        accel: a1 * g,
    }];
    if d2 > 1e-15 * t_total {
        segments.push(Segment {
            duration: d2,
            accel: -cfg.a_max,
        });
    }
    if d3 > 1e-15 * t_total {
        segments.push(Segment {
            duration: d3,
            accel: cfg.a_max,
        });
    }
    // At alpha == beta + 1 the catch-up phase vanishes and the remaining
    // imbalance must be folded back into the drop phase.
    if segments.len() == 2 {
        segments[1].duration = t_total - segments[0].duration;
    }
    Waveform::build(t_total, segments, "optimal")
}

/// Two-phase sawtooth-style profile: constant `up_accel` for `up_fraction`
/// of the period, then the constant down-phase acceleration that closes the
/// velocity profile (`-up_accel·f/(1-f)`).
pub fn sawtooth_waveform(
    cfg: &TransportConfig,
    up_fraction: f64,
    up_accel: f64,
) -> Result<Waveform> {
    if !(up_fraction.is_finite() && up_fraction > 0.0 && up_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "up_fraction must be in (0, 1), got {up_fraction}"
        )));
    }
    if !up_accel.is_finite() {
        return Err(Error::InvalidInput("up_accel must be finite".into()));
    }
    if up_accel.abs() > cfg.a_max * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "up-phase acceleration {up_accel:.4} m/s^2 exceeds a_max = {:.4} m/s^2",
            cfg.a_max
        )));
    }
    let down_accel = -up_accel * up_fraction / (1.0 - up_fraction);
    if down_accel.abs() > cfg.a_max * (1.0 + 1e-9) {
        return Err(Error::Infeasible(format!(
            "derived down-phase acceleration {down_accel:.4} m/s^2 exceeds a_max = {:.4} m/s^2",
            cfg.a_max
        )));
    }
    let d1 = up_fraction * cfg.period;
    Waveform::build(
        cfg.period,
        vec![
            Segment {
                duration: d1,
                accel: up_accel,
            },
            Segment {
                duration: cfg.period - d1,
                accel: down_accel,
            },
        ],
        "sawtooth",
    )
}

/// Piecewise-constant waveform from a uniformly sampled acceleration series
/// covering one period.
///
/// A small net impulse (mean acceleration below `tol` × peak) is corrected by
/// subtracting the mean; a larger one is rejected as a non-periodic drive.
pub fn sampled_waveform_with_tolerance(
    samples: &[f64],
    period: f64,
    tol: f64,
) -> Result<Waveform> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "sampled waveform needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput(
            "sampled waveform contains non-finite accelerations".into(),
        ));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let peak = samples.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if mean.abs() > tol * (peak + f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "sampled series does not close: net velocity change is {:.2}% of peak \
             acceleration over one period (threshold {:.2}%)",
            100.0 * mean.abs() / (peak + f64::MIN_POSITIVE),
            100.0 * tol
        )));
    }

    let dt = period / n;
    let mut segments: Vec<Segment> = Vec::new();
    for &a in samples {
        let a = a - mean;
        match segments.last_mut() {
            Some(last) if last.accel == a => last.duration += dt,
            _ => segments.push(Segment {
                duration: dt,
                accel: a,
            }),
        }
    }
    // Absorb rounding from the duration accumulation into the last segment.
    let total: f64 = segments.iter().map(|s| s.duration).sum();
    if let Some(last) = segments.last_mut() {
        last.duration += period - total;
    }
    Waveform::build(period, segments, "sampled")
}

/// [`sampled_waveform_with_tolerance`] with the default threshold.
pub fn sampled_waveform(samples: &[f64], period: f64) -> Result<Waveform> {
    sampled_waveform_with_tolerance(samples, period, SAMPLED_CLOSURE_TOL)
}

/// Read a sampled acceleration series from delimited text with header `t,a`
/// and build the corresponding waveform. The time column must be uniform;
/// the period is taken as `n·dt`.
pub fn read_sampled_waveform<R: std::io::BufRead>(reader: R, path: &str) -> Result<Waveform> {
    let mut times: Vec<f64> = Vec::new();
    let mut accels: Vec<f64> = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', '\t', ' ']).filter(|f| !f.is_empty()).collect();
        if !saw_header {
            if fields.len() < 2 || !fields[0].eq_ignore_ascii_case("t")
                || !fields[1].eq_ignore_ascii_case("a")
            {
                return Err(Error::Parse {
                    path: path.into(),
                    msg: format!("expected header 't,a', got '{line}'"),
                });
            }
            saw_header = true;
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: path.into(),
                msg: format!("line {}: expected 2 columns, got {}", lineno + 1, fields.len()),
            });
        }
        let parse = |s: &str, col: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.into(),
                msg: format!("line {}: bad {col} value '{s}'", lineno + 1),
            })
        };
        times.push(parse(fields[0], "t")?);
        accels.push(parse(fields[1], "a")?);
    }
    if !saw_header {
        return Err(Error::Parse {
            path: path.into(),
            msg: "missing header 't,a'".into(),
        });
    }
    if times.len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            msg: format!("need at least 2 samples, got {}", times.len()),
        });
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::Parse {
            path: path.into(),
            msg: "time column must be strictly increasing".into(),
        });
    }
    for i in 1..times.len() {
        let step = times[i] - times[i - 1];
        if (step - dt).abs() > 1e-6 * dt {
            return Err(Error::Parse {
                path: path.into(),
                msg: format!(
                    "non-uniform sampling at row {}: step {step:.6e} vs {dt:.6e}",
                    i + 1
                ),
            });
        }
    }
    sampled_waveform(&accels, times.len() as f64 * dt)
}
