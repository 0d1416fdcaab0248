//! Recorded simulation output and the metrics computed from it.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{ContactMode, TransportConfig};
use crate::error::{Error, Result};

/// One integrator output row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Sample {
    pub t: f64,
    pub z_s: f64,
    pub v_s: f64,
    pub a_s: f64,
    pub z_p: f64,
    pub v_p: f64,
    pub mode: ContactMode,
}

/// A contact-mode transition located by the integrator.
#[derive(Debug, Clone, Copy)]
pub struct ModeSwitch {
    pub t: f64,
    pub from: ContactMode,
    pub to: ContactMode,
}

/// Time fractions spent in each contact mode.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeFractions {
    pub sticking: f64,
    pub slipping_up: f64,
    pub slipping_down: f64,
}

/// Steady-state transport extracted from a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SteadyState {
    /// Average part velocity, m/s.
    pub v_ave: f64,
    /// Warmup periods discarded before agreement was found.
    pub detected_after_periods: usize,
    /// Trailing periods averaged into `v_ave`.
    pub periods_averaged: usize,
}

/// Periods discarded before steady-state detection begins.
pub const STEADY_WARMUP_PERIODS: usize = 10;
/// Relative agreement required between consecutive per-period displacements.
pub const STEADY_REL_TOL: f64 = 1e-3;
/// Trailing periods averaged for the reported velocity.
pub const STEADY_AVERAGE_PERIODS: usize = 3;

/// Time series of system states with the located mode switches and the
/// configuration it was produced under.
#[derive(Debug, Clone)]
pub struct Trajectory {
    samples: Vec<Sample>,
    switches: Vec<ModeSwitch>,
    period: Option<f64>,
    label: String,
    config: TransportConfig,
}

impl Trajectory {
    pub(crate) fn new(
        samples: Vec<Sample>,
        switches: Vec<ModeSwitch>,
        period: Option<f64>,
        label: String,
        config: TransportConfig,
    ) -> Trajectory {
        debug_assert!(samples.windows(2).all(|w| w[0].t < w[1].t));
        Trajectory {
            samples,
            switches,
            period,
            label,
            config,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn switches(&self) -> &[ModeSwitch] {
        &self.switches
    }

    /// Drive period, when the trajectory came from a periodic waveform.
    pub fn period(&self) -> Option<f64> {
        self.period
    }

    /// Identifier of the drive that produced this trajectory.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn config(&self) -> &TransportConfig {
        &self.config
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn span(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn final_sample(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    fn bracket(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(self.start_time(), self.end_time());
        let idx = self
            .samples
            .partition_point(|s| s.t <= t)
            .saturating_sub(1)
            .min(self.samples.len() - 2);
        let s0 = &self.samples[idx];
        let s1 = &self.samples[idx + 1];
        let w = if s1.t > s0.t {
            (t - s0.t) / (s1.t - s0.t)
        } else {
            0.0
        };
        (idx, w)
    }

    /// Part position at `t`, linearly interpolated between samples.
    pub fn part_position_at(&self, t: f64) -> f64 {
        let (i, w) = self.bracket(t);
        self.samples[i].z_p * (1.0 - w) + self.samples[i + 1].z_p * w
    }

    pub fn part_velocity_at(&self, t: f64) -> f64 {
        let (i, w) = self.bracket(t);
        self.samples[i].v_p * (1.0 - w) + self.samples[i + 1].v_p * w
    }

    pub fn surface_position_at(&self, t: f64) -> f64 {
        let (i, w) = self.bracket(t);
        self.samples[i].z_s * (1.0 - w) + self.samples[i + 1].z_s * w
    }

    /// Net relative displacement ∫(ż_P − ż_S) dt over `[t0, t1]` by
    /// trapezoidal accumulation, the quantity transport maximizes.
    pub fn net_slip(&self, t0: f64, t1: f64) -> Result<f64> {
        let eps = 1e-9 * self.span().max(1e-30);
        let nonempty = t1 > t0; // also rejects NaN endpoints
        if !nonempty {
            return Err(Error::InvalidInput(format!(
                "empty net_slip window [{t0}, {t1}]"
            )));
        }
        if t0 < self.start_time() - eps || t1 > self.end_time() + eps {
            return Err(Error::InvalidInput(format!(
                "net_slip window [{t0}, {t1}] outside trajectory span [{}, {}]",
                self.start_time(),
                self.end_time()
            )));
        }
        let rel = |s: &Sample| s.v_p - s.v_s;
        let rel_at = |t: f64| {
            let (i, w) = self.bracket(t);
            rel(&self.samples[i]) * (1.0 - w) + rel(&self.samples[i + 1]) * w
        };
        let first = self.samples.partition_point(|s| s.t <= t0);
        let last = self.samples.partition_point(|s| s.t < t1);
        let mut total = 0.0;
        let mut prev_t = t0;
        let mut prev_v = rel_at(t0);
        for s in &self.samples[first..last] {
            total += 0.5 * (prev_v + rel(s)) * (s.t - prev_t);
            prev_t = s.t;
            prev_v = rel(s);
        }
        total += 0.5 * (prev_v + rel_at(t1)) * (t1 - prev_t);
        Ok(total)
    }

    /// Part displacement over each full drive period.
    pub fn per_period_displacements(&self) -> Result<Vec<f64>> {
        let period = self.period.ok_or_else(|| {
            Error::InvalidInput("trajectory has no drive period (trace-driven)".into())
        })?;
        let n = (self.span() / period + 1e-9).floor() as usize;
        let t0 = self.start_time();
        Ok((0..n)
            .map(|k| {
                self.part_position_at(t0 + (k + 1) as f64 * period)
                    - self.part_position_at(t0 + k as f64 * period)
            })
            .collect())
    }

    /// Steady-state average part velocity `(z_P(t+T) − z_P(t))/T`.
    ///
    /// Discards a warmup, then requires three consecutive per-period
    /// displacements agreeing to 0.1% (both after warmup and at the end of the
    /// run); reports the mean over the trailing periods. Non-convergence is an
    /// error, never a silent value.
    pub fn steady_state_velocity(&self) -> Result<SteadyState> {
        let period = self.period.ok_or_else(|| {
            Error::InvalidInput("trajectory has no drive period (trace-driven)".into())
        })?;
        let d = self.per_period_displacements()?;
        let needed = STEADY_WARMUP_PERIODS + STEADY_AVERAGE_PERIODS;
        if d.len() < needed {
            return Err(Error::InvalidInput(format!(
                "steady-state detection needs >= {needed} full periods, trajectory has {}",
                d.len()
            )));
        }
        let agree = |a: f64, b: f64| (a - b).abs() <= (STEADY_REL_TOL * a.abs().max(b.abs())).max(1e-12);

        let mut detected = None;
        for k in STEADY_WARMUP_PERIODS..=(d.len() - 3) {
            if agree(d[k], d[k + 1]) && agree(d[k + 1], d[k + 2]) {
                detected = Some(k);
                break;
            }
        }
        let detected = detected.ok_or_else(|| {
            let tail: Vec<String> = d
                .iter()
                .rev()
                .take(4)
                .rev()
                .map(|x| format!("{x:.3e}"))
                .collect();
            Error::NotConverged(format!(
                "per-period displacement has not settled to {STEADY_REL_TOL:.1e} relative \
                 (last periods: {} m)",
                tail.join(", ")
            ))
        })?;
        // The run must still be settled at its end.
        let n = d.len();
        if !(agree(d[n - 3], d[n - 2]) && agree(d[n - 2], d[n - 1])) {
            return Err(Error::NotConverged(format!(
                "displacement settled transiently after period {detected} but drifts again \
                 by the end of the run"
            )));
        }
        let tail = &d[n - STEADY_AVERAGE_PERIODS..];
        let v_ave = tail.iter().sum::<f64>() / (STEADY_AVERAGE_PERIODS as f64 * period);
        Ok(SteadyState {
            v_ave,
            detected_after_periods: detected,
            periods_averaged: STEADY_AVERAGE_PERIODS,
        })
    }

    /// Contact-mode intervals reconstructed from the initial mode and the
    /// located switches.
    pub fn mode_intervals(&self) -> Vec<(f64, f64, ContactMode)> {
        let mut out = Vec::with_capacity(self.switches.len() + 1);
        let mut t = self.start_time();
        let mut mode = self.samples[0].mode;
        for sw in &self.switches {
            if sw.t > t {
                out.push((t, sw.t, mode));
            }
            t = sw.t.max(t);
            mode = sw.to;
        }
        if self.end_time() > t {
            out.push((t, self.end_time(), mode));
        }
        out
    }

    /// Time-weighted fraction of the trajectory spent in each mode.
    pub fn mode_fractions(&self) -> ModeFractions {
        let mut acc = [0.0f64; 3];
        for (a, b, mode) in self.mode_intervals() {
            let idx = match mode {
                ContactMode::Sticking => 0,
                ContactMode::SlippingUp => 1,
                ContactMode::SlippingDown => 2,
            };
            acc[idx] += b - a;
        }
        let total = self.span().max(f64::MIN_POSITIVE);
        ModeFractions {
            sticking: acc[0] / total,
            slipping_up: acc[1] / total,
            slipping_down: acc[2] / total,
        }
    }

    /// Write the trajectory as delimited text: one row per sample, SI units,
    /// mandatory header `t,z_s,v_s,a_s,z_p,v_p,mode`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,z_s,v_s,a_s,z_p,v_p,mode")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.t,
                s.z_s,
                s.v_s,
                s.a_s,
                s.z_p,
                s.v_p,
                s.mode.as_str()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{
        simulate, FrictionPair, SystemState, TransportConfig,
    };
    use crate::waveforms::{optimal_waveform, sampled_waveform};

    const G: f64 = 9.81;

    fn fig_run() -> Trajectory {
        let fric = FrictionPair::new(0.7, 0.6).unwrap();
        let cfg = TransportConfig::from_nondimensional(5.0, 10.0, 1.0, 0.1, G).unwrap();
        let w = optimal_waveform(&fric, &cfg).unwrap();
        simulate(&w, &fric, &cfg, 20, &SystemState::stuck_to(&w)).unwrap()
    }

    #[test]
    fn net_slip_of_sticking_trajectory_is_zero() {
        let fric = FrictionPair::new(0.7, 0.6).unwrap();
        let cfg = TransportConfig::from_nondimensional(5.0, 10.0, 1.0, 0.1, G).unwrap();
        let w = sampled_waveform(&[0.0; 4], cfg.period).unwrap();
        let traj = simulate(&w, &fric, &cfg, 14, &SystemState::at_rest()).unwrap();
        let slip = traj.net_slip(0.0, traj.end_time()).unwrap();
        assert!(slip.abs() < 1e-12);
    }

    #[test]
    fn net_slip_rejects_bad_windows() {
        let traj = fig_run();
        assert!(traj.net_slip(0.5, 0.5).is_err());
        assert!(traj.net_slip(0.0, traj.end_time() * 2.0).is_err());
    }

    #[test]
    fn net_slip_over_steady_period_equals_transport() {
        // The surface has zero net travel per period, so the net slip over a
        // steady-state period equals v_ave * T.
        let traj = fig_run();
        let steady = traj.steady_state_velocity().unwrap();
        let period = traj.period().unwrap();
        let t1 = traj.end_time();
        let slip = traj.net_slip(t1 - period, t1).unwrap();
        // The trapezoidal slip integral is exact on piecewise-linear
        // velocities; the position route carries the semi-implicit dt bias
        // ((dt/2)·|velocity swing| per period, ~0.12% here), so the two agree
        // to that bias rather than machine precision.
        assert!(
            (slip - steady.v_ave * period).abs() < 5e-3 * steady.v_ave.abs() * period + 1e-12,
            "slip {slip} vs v_ave*T {}",
            steady.v_ave * period
        );
    }

    #[test]
    fn steady_state_requires_enough_periods() {
        let fric = FrictionPair::new(0.7, 0.6).unwrap();
        let cfg = TransportConfig::from_nondimensional(5.0, 10.0, 1.0, 0.1, G).unwrap();
        let w = optimal_waveform(&fric, &cfg).unwrap();
        let traj = simulate(&w, &fric, &cfg, 5, &SystemState::stuck_to(&w)).unwrap();
        assert!(traj.steady_state_velocity().is_err());
    }

    #[test]
    fn steady_state_periodicity_within_tolerance() {
        let traj = fig_run();
        let d = traj.per_period_displacements().unwrap();
        for k in STEADY_WARMUP_PERIODS..d.len() - 1 {
            let rel = (d[k + 1] - d[k]).abs() / d[k].abs();
            assert!(rel < 1e-3, "period {k}: displacement varies by {rel}");
        }
    }

    #[test]
    fn csv_export_has_header_and_mode_strings() {
        let traj = fig_run();
        let csv = traj.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,z_s,v_s,a_s,z_p,v_p,mode");
        let first = lines.next().unwrap();
        assert!(first.ends_with("sticking"), "{first}");
        assert_eq!(csv.lines().count(), traj.samples().len() + 1);
        assert!(csv.contains("slipping_up"));
    }

    #[test]
    fn mode_fractions_sum_to_one() {
        let traj = fig_run();
        let f = traj.mode_fractions();
        assert!((f.sticking + f.slipping_up + f.slipping_down - 1.0).abs() < 1e-9);
        assert!(f.slipping_down == 0.0, "optimal drive never slips the part down");
    }
}
