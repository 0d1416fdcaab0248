//! Event-driven hybrid integrator for a part held by friction against a
//! kinematically prescribed vibrating surface.
//!
//! The part sticks to the surface while the demanded friction force stays
//! inside the static cone, `|m(z̈_S + g)| ≤ μ_s F_n`, and otherwise slips with
//! kinetic friction opposing the relative motion:
//!
//! ```text
//! sticking:  ż_P = ż_S
//! slipping:  z̈_P = (μ_k F_n / m)·sgn(ż_S − ż_P) − g
//! ```
//!
//! Within a contact mode the part integrates with semi-implicit Euler; mode
//! switches are localized inside a step (stick→slip at acceleration
//! discontinuities of the drive, slip→stick by bisecting the relative-velocity
//! crossing to ε_t) and applied at the event time. Surface kinematics are
//! evaluated analytically from the drive, never integrated, so the surface
//! follows its profile exactly.
//!
//! Integrator instances share no mutable state; running many simulations in
//! parallel over read-only configs is safe. A single simulation is sequential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{ModeSwitch, Sample, Trajectory};
use crate::waveforms::Waveform;

/// Static/kinetic Coulomb friction coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionPair {
    mu_s: f64,
    mu_k: f64,
}

impl FrictionPair {
    /// A physical pair: `mu_s >= mu_k > 0`. Equal coefficients are allowed.
    pub fn new(mu_s: f64, mu_k: f64) -> Result<FrictionPair> {
        if !(mu_s.is_finite() && mu_k.is_finite() && mu_k > 0.0 && mu_s >= mu_k) {
            return Err(Error::InvalidInput(format!(
                "friction coefficients must satisfy mu_s >= mu_k > 0, got mu_s = {mu_s}, mu_k = {mu_k}"
            )));
        }
        Ok(FrictionPair { mu_s, mu_k })
    }

    /// A pair without the `mu_s >= mu_k` ordering requirement.
    ///
    /// Remapped coefficient sets (the zero-gravity equivalents of a vertical
    /// problem) legitimately have `mu_s < mu_k`, and a fitting candidate may
    /// explore `mu_k` above the fixed `mu_s`. Positivity is still required.
    pub fn unordered(mu_s: f64, mu_k: f64) -> Result<FrictionPair> {
        if !(mu_s.is_finite() && mu_k.is_finite() && mu_s > 0.0 && mu_k > 0.0) {
            return Err(Error::InvalidInput(format!(
                "friction coefficients must be positive, got mu_s = {mu_s}, mu_k = {mu_k}"
            )));
        }
        Ok(FrictionPair { mu_s, mu_k })
    }

    pub fn mu_s(&self) -> f64 {
        self.mu_s
    }

    pub fn mu_k(&self) -> f64 {
        self.mu_k
    }
}

/// Physical configuration of one transport setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    /// Part mass, kg.
    pub part_mass: f64,
    /// Squeeze (normal) force pressing the part against the surface, N.
    pub normal_force: f64,
    /// Gravitational acceleration, m/s². Zero is allowed for runs that map a
    /// vertical problem onto its gravity-free equivalent.
    pub gravity: f64,
    /// Peak surface acceleration the actuator can deliver, m/s².
    pub a_max: f64,
    /// Drive period, s.
    pub period: f64,
    /// Two synchronized surfaces squeeze the part from both sides; the
    /// dynamics are those of a single surface with half the part mass.
    pub dual_surface: bool,
}

pub const STANDARD_GRAVITY: f64 = 9.81;

impl TransportConfig {
    pub fn new(
        part_mass: f64,
        normal_force: f64,
        gravity: f64,
        a_max: f64,
        period: f64,
    ) -> Result<TransportConfig> {
        let positive = [
            ("part_mass", part_mass),
            ("normal_force", normal_force),
            ("a_max", a_max),
            ("period", period),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(gravity.is_finite() && gravity >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "gravity must be finite and >= 0, got {gravity}"
            )));
        }
        Ok(TransportConfig {
            part_mass,
            normal_force,
            gravity,
            a_max,
            period,
            dual_surface: false,
        })
    }

    /// Build from the nondimensional pair `f_n = F_n/(m g)`, `alpha = a_max/g`.
    pub fn from_nondimensional(
        f_n: f64,
        alpha: f64,
        part_mass: f64,
        period: f64,
        gravity: f64,
    ) -> Result<TransportConfig> {
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(Error::InvalidInput(format!(
                "nondimensional construction requires gravity > 0, got {gravity}"
            )));
        }
        TransportConfig::new(
            part_mass,
            f_n * part_mass * gravity,
            gravity,
            alpha * gravity,
            period,
        )
    }

    pub fn with_dual_surface(mut self, dual: bool) -> TransportConfig {
        self.dual_surface = dual;
        self
    }

    /// Mass seen by the contact equations: `m/2` when two synchronized
    /// surfaces share the load.
    pub fn effective_mass(&self) -> f64 {
        if self.dual_surface {
            self.part_mass / 2.0
        } else {
            self.part_mass
        }
    }

    /// Normal force per effective part weight, `None` when gravity is zero.
    pub fn normal_force_per_weight(&self) -> Option<f64> {
        if self.gravity > 0.0 {
            Some(self.normal_force / (self.effective_mass() * self.gravity))
        } else {
            None
        }
    }

    /// Actuator limit per gravity, `None` when gravity is zero.
    pub fn accel_ratio(&self) -> Option<f64> {
        if self.gravity > 0.0 {
            Some(self.a_max / self.gravity)
        } else {
            None
        }
    }
}

/// Contact regime between part and surface.
///
/// `SlippingUp` means the part moves up relative to the surface
/// (`ż_P > ż_S`); `SlippingDown` the opposite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactMode {
    Sticking,
    SlippingUp,
    SlippingDown,
}

impl ContactMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContactMode::Sticking => "sticking",
            ContactMode::SlippingUp => "slipping_up",
            ContactMode::SlippingDown => "slipping_down",
        }
    }
}

impl std::fmt::Display for ContactMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Instantaneous state of the surface-part system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub z_s: f64,
    pub v_s: f64,
    pub z_p: f64,
    pub v_p: f64,
    pub mode: ContactMode,
}

impl SystemState {
    pub fn new(t: f64, z_s: f64, v_s: f64, z_p: f64, v_p: f64, mode: ContactMode) -> SystemState {
        SystemState {
            t,
            z_s,
            v_s,
            z_p,
            v_p,
            mode,
        }
    }

    /// Part at rest at the origin at `t = 0`; surface fields are normalized
    /// from the drive when a simulation starts.
    pub fn at_rest() -> SystemState {
        SystemState::new(0.0, 0.0, 0.0, 0.0, 0.0, ContactMode::Sticking)
    }

    /// Part stuck to the surface at `t = 0`, matching the drive's initial
    /// velocity so steady state is reached without an artificial jolt.
    pub fn stuck_to<M: SurfaceMotion + ?Sized>(motion: &M) -> SystemState {
        let v = motion.velocity(0.0);
        SystemState::new(0.0, motion.position(0.0), v, 0.0, v, ContactMode::Sticking)
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.z_s.is_finite()
            && self.v_s.is_finite()
            && self.z_p.is_finite()
            && self.v_p.is_finite()
    }
}

/// Kinematically prescribed surface motion with piecewise-constant
/// acceleration. Implementors evaluate exactly; the integrator never
/// accumulates surface state.
pub trait SurfaceMotion {
    fn accel(&self, t: f64) -> f64;
    fn velocity(&self, t: f64) -> f64;
    fn position(&self, t: f64) -> f64;
    /// Next acceleration discontinuity strictly after `t`, if any.
    fn next_transition_after(&self, t: f64) -> Option<f64>;
}

/// Measured surface velocity, sampled uniformly and interpolated linearly
/// (so acceleration is piecewise constant and position piecewise quadratic).
#[derive(Debug, Clone)]
pub struct VelocityTrace {
    rate_hz: f64,
    samples: Vec<f64>,
    z0: f64,
    /// Position at each sample time, from exact integration of the interpolant.
    z_at: Vec<f64>,
}

impl VelocityTrace {
    pub fn new(samples: Vec<f64>, rate_hz: f64) -> Result<VelocityTrace> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "velocity trace needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {rate_hz}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "velocity trace contains non-finite samples".into(),
            ));
        }
        let mut trace = VelocityTrace {
            rate_hz,
            samples,
            z0: 0.0,
            z_at: Vec::new(),
        };
        trace.rebuild_positions();
        Ok(trace)
    }

    /// Build from explicit timestamps, which must be uniform.
    pub fn from_timed_samples(times: &[f64], values: &[f64]) -> Result<VelocityTrace> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "time and value columns differ in length: {} vs {}",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput("need at least 2 samples".into()));
        }
        let dt = times[1] - times[0];
        if dt <= 0.0 {
            return Err(Error::InvalidInput(
                "time column must be strictly increasing".into(),
            ));
        }
        for i in 1..times.len() {
            let step = times[i] - times[i - 1];
            if (step - dt).abs() > 1e-6 * dt {
                return Err(Error::InvalidInput(format!(
                    "non-uniform sampling at index {i}: step {step:.6e} vs {dt:.6e}"
                )));
            }
        }
        VelocityTrace::new(values.to_vec(), 1.0 / dt)
    }

    pub fn with_initial_position(mut self, z0: f64) -> VelocityTrace {
        self.z0 = z0;
        self.rebuild_positions();
        self
    }

    fn rebuild_positions(&mut self) {
        let dt = 1.0 / self.rate_hz;
        let mut z = self.z0;
        self.z_at = Vec::with_capacity(self.samples.len());
        self.z_at.push(z);
        for i in 1..self.samples.len() {
            z += 0.5 * (self.samples[i - 1] + self.samples[i]) * dt;
            self.z_at.push(z);
        }
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration covered by the trace.
    pub fn span(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.rate_hz
    }

    /// Interval index and local offset for an instant, clamped to the span.
    fn locate(&self, t: f64) -> (usize, f64) {
        let dt = 1.0 / self.rate_hz;
        let t = t.clamp(0.0, self.span());
        let mut i = (t * self.rate_hz).floor() as usize;
        if i >= self.samples.len() - 1 {
            i = self.samples.len() - 2;
        }
        (i, t - i as f64 * dt)
    }
}

impl SurfaceMotion for VelocityTrace {
    fn accel(&self, t: f64) -> f64 {
        let (i, _) = self.locate(t);
        (self.samples[i + 1] - self.samples[i]) * self.rate_hz
    }

    fn velocity(&self, t: f64) -> f64 {
        let (i, tau) = self.locate(t);
        self.samples[i] + (self.samples[i + 1] - self.samples[i]) * self.rate_hz * tau
    }

    fn position(&self, t: f64) -> f64 {
        let (i, tau) = self.locate(t);
        let a = (self.samples[i + 1] - self.samples[i]) * self.rate_hz;
        self.z_at[i] + self.samples[i] * tau + 0.5 * a * tau * tau
    }

    fn next_transition_after(&self, t: f64) -> Option<f64> {
        let dt = 1.0 / self.rate_hz;
        let next = (t / dt).floor() + 1.0;
        let tn = next * dt;
        if tn >= self.span() {
            None
        } else if tn > t {
            Some(tn)
        } else {
            Some(tn + dt)
        }
    }
}

/// Integrator tuning knobs. Defaults follow the toolkit-wide conventions:
/// `dt = T/2000`, event tolerance `dt·1e-6`, stick classification tolerances
/// of 1e-9 (m/s and N), and a divergence guard of `1000·max(g, a_max)·T`.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    /// Steps per drive period for waveform-driven simulation.
    pub steps_per_period: usize,
    /// Sub-steps per sample interval for trace-driven simulation.
    pub trace_substeps: usize,
    /// Event time tolerance as a fraction of the step size.
    pub event_tol_factor: f64,
    /// Velocities closer than this count as matched (stick candidates), m/s.
    pub stick_velocity_tol: f64,
    /// Slack on the static-cone test at mode switches, N.
    pub stick_force_tol: f64,
    /// Part speed treated as divergence; `None` picks the default guard.
    pub divergence_velocity: Option<f64>,
    /// Mode switches tolerated within one step before the chattering guard
    /// pins the slip direction from `sgn(z̈_S + g)`.
    pub max_switches_per_step: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            steps_per_period: 2000,
            trace_substeps: 4,
            event_tol_factor: 1e-6,
            stick_velocity_tol: 1e-9,
            stick_force_tol: 1e-9,
            divergence_velocity: None,
            max_switches_per_step: 8,
        }
    }
}

/// Precomputed contact constants.
#[derive(Debug, Clone, Copy)]
struct Contact {
    m_eff: f64,
    /// μ_s F_n, N.
    static_limit: f64,
    /// μ_k F_n, N.
    kinetic_force: f64,
    gravity: f64,
}

impl Contact {
    fn new(fric: &FrictionPair, cfg: &TransportConfig) -> Contact {
        Contact {
            m_eff: cfg.effective_mass(),
            static_limit: fric.mu_s * cfg.normal_force,
            kinetic_force: fric.mu_k * cfg.normal_force,
            gravity: cfg.gravity,
        }
    }

    /// Can sticking persist under this surface acceleration?
    fn cone_holds(&self, surface_accel: f64, force_tol: f64) -> bool {
        (self.m_eff * (surface_accel + self.gravity)).abs() <= self.static_limit + force_tol
    }

    /// Slip direction taken when the static cone breaks: friction acts along
    /// `sgn(z̈_S + g)`, so the part lags a surface driven up (slips down
    /// relative) and vice versa. Exactly zero drive holds sticking.
    fn onset_mode(&self, surface_accel: f64) -> ContactMode {
        let drive = surface_accel + self.gravity;
        if drive > 0.0 {
            ContactMode::SlippingDown
        } else if drive < 0.0 {
            ContactMode::SlippingUp
        } else {
            ContactMode::Sticking
        }
    }

    /// Part acceleration while slipping in the given direction.
    fn slip_accel(&self, mode: ContactMode) -> f64 {
        match mode {
            ContactMode::SlippingUp => -self.kinetic_force / self.m_eff - self.gravity,
            ContactMode::SlippingDown => self.kinetic_force / self.m_eff - self.gravity,
            ContactMode::Sticking => unreachable!("slip_accel called in sticking mode"),
        }
    }

    fn classify(&self, dv: f64, surface_accel: f64, vel_tol: f64, force_tol: f64) -> ContactMode {
        if dv.abs() <= vel_tol {
            if self.cone_holds(surface_accel, force_tol) {
                ContactMode::Sticking
            } else {
                self.onset_mode(surface_accel)
            }
        } else if dv > 0.0 {
            ContactMode::SlippingUp
        } else {
            ContactMode::SlippingDown
        }
    }
}

/// Friction force on the part, N, positive upward.
///
/// Sticking: the force that maintains the constraint, `m(z̈_S + g)`, valid
/// while inside the static cone; past the cone the slip-onset value
/// `μ_k F_n·sgn(z̈_S + g)`. Slipping: `μ_k F_n·sgn(ż_S − ż_P)`.
pub fn friction_force(
    state: &SystemState,
    surface_accel: f64,
    fric: &FrictionPair,
    cfg: &TransportConfig,
) -> f64 {
    let c = Contact::new(fric, cfg);
    match state.mode {
        ContactMode::Sticking => {
            let demand = c.m_eff * (surface_accel + c.gravity);
            if demand.abs() <= c.static_limit + STICK_FORCE_TOL_DEFAULT {
                demand
            } else {
                c.kinetic_force * (surface_accel + c.gravity).signum()
            }
        }
        ContactMode::SlippingUp | ContactMode::SlippingDown => {
            let rel = state.v_s - state.v_p;
            if rel != 0.0 {
                c.kinetic_force * rel.signum()
            } else {
                // Degenerate: fall back to the mode's direction.
                match state.mode {
                    ContactMode::SlippingUp => -c.kinetic_force,
                    _ => c.kinetic_force,
                }
            }
        }
    }
}

const STICK_FORCE_TOL_DEFAULT: f64 = 1e-9;

/// Advance `state` to `t_target`, handling mode switches along the way.
/// Switches are appended to `switches`. `eps_t` is the event-time tolerance.
fn advance<M: SurfaceMotion + ?Sized>(
    state: &mut SystemState,
    motion: &M,
    c: &Contact,
    opts: &IntegratorOptions,
    eps_t: f64,
    t_target: f64,
    switches: &mut Vec<ModeSwitch>,
) {
    let mut n_switches = 0usize;
    // Set once the chattering guard trips; suppresses further event handling
    // within this step.
    let mut locked = false;
    // Acceleration governing [t, t+): sampled a quarter event-tolerance ahead
    // so that times sitting a rounding error before a segment jump (period
    // wraparound is inexact in floating point) read the incoming value.
    let look = 0.25 * eps_t;

    while state.t < t_target - 0.25 * eps_t {
        let seg_end = motion
            .next_transition_after(state.t)
            .map_or(t_target, |s| s.min(t_target))
            .max(state.t + 0.25 * eps_t)
            .min(t_target);
        let a_s = motion.accel(state.t + look);

        match state.mode {
            ContactMode::Sticking => {
                if !locked && !c.cone_holds(a_s, opts.stick_force_tol) {
                    let new_mode = c.onset_mode(a_s);
                    if new_mode == ContactMode::Sticking {
                        // z̈_S + g == 0 exactly: hold sticking.
                        advance_stick(state, motion, seg_end);
                        continue;
                    }
                    switches.push(ModeSwitch {
                        t: state.t,
                        from: state.mode,
                        to: new_mode,
                    });
                    state.mode = new_mode;
                    n_switches += 1;
                    if n_switches > opts.max_switches_per_step {
                        locked = true;
                    }
                    continue;
                }
                advance_stick(state, motion, seg_end);
            }
            mode => {
                let a_p = c.slip_accel(mode);
                // Relative velocity, positive while the mode is consistent.
                let sign = if mode == ContactMode::SlippingUp {
                    1.0
                } else {
                    -1.0
                };
                let h = seg_end - state.t;
                let v_p_end = state.v_p + a_p * h;
                let rel_end = sign * (v_p_end - motion.velocity(seg_end));

                if !locked && rel_end <= opts.stick_velocity_tol {
                    // Crossing inside (t, seg_end]: bisect it down to eps_t.
                    let t0 = state.t;
                    let v_p0 = state.v_p;
                    let rel_at = |tau: f64| sign * (v_p0 + a_p * (tau - t0) - motion.velocity(tau));
                    let mut lo = t0;
                    let mut hi = seg_end;
                    if rel_at(lo) > 0.0 {
                        for _ in 0..80 {
                            if hi - lo <= eps_t {
                                break;
                            }
                            let mid = 0.5 * (lo + hi);
                            if rel_at(mid) > 0.0 {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                    }
                    // A crossing within eps_t of an acceleration jump is the
                    // jump itself: land exactly on it so the stick test sees
                    // the incoming acceleration, not the outgoing one.
                    let t_star = if seg_end - hi <= eps_t { seg_end } else { hi };
                    advance_slip(state, motion, a_p, t_star);

                    let a_star = motion.accel(t_star + look);
                    let new_mode = if c.cone_holds(a_star, opts.stick_force_tol) {
                        ContactMode::Sticking
                    } else {
                        c.onset_mode(a_star)
                    };
                    if new_mode == ContactMode::Sticking {
                        state.v_p = motion.velocity(t_star);
                    }
                    if new_mode != state.mode {
                        switches.push(ModeSwitch {
                            t: t_star,
                            from: state.mode,
                            to: new_mode,
                        });
                        state.mode = new_mode;
                    } else {
                        // Same slip direction re-established through the
                        // touch point; nudge time forward to avoid stalling.
                        state.t = state.t.max(t_star);
                    }
                    n_switches += 1;
                    if n_switches > opts.max_switches_per_step {
                        let a_now = motion.accel(state.t + look);
                        let forced = c.onset_mode(a_now);
                        if forced != ContactMode::Sticking && forced != state.mode {
                            switches.push(ModeSwitch {
                                t: state.t,
                                from: state.mode,
                                to: forced,
                            });
                            state.mode = forced;
                        }
                        locked = true;
                    }
                    continue;
                }
                advance_slip(state, motion, a_p, seg_end);
            }
        }
    }
    state.t = t_target;
}

/// Sticking: the part tracks the surface exactly, preserving its offset.
fn advance_stick<M: SurfaceMotion + ?Sized>(state: &mut SystemState, motion: &M, to: f64) {
    state.z_p += motion.position(to) - motion.position(state.t);
    state.v_p = motion.velocity(to);
    state.z_s = motion.position(to);
    state.v_s = motion.velocity(to);
    state.t = to;
}

/// Slipping: semi-implicit Euler on the part (velocity first, then position
/// with the updated velocity). Exact in velocity for the constant in-mode
/// acceleration.
fn advance_slip<M: SurfaceMotion + ?Sized>(
    state: &mut SystemState,
    motion: &M,
    a_p: f64,
    to: f64,
) {
    let h = to - state.t;
    state.v_p += a_p * h;
    state.z_p += state.v_p * h;
    state.z_s = motion.position(to);
    state.v_s = motion.velocity(to);
    state.t = to;
}

/// Advance one step of size `dt` under a periodic waveform drive.
///
/// Detects stick→slip transitions when the drive leaves the static cone and
/// slip→stick transitions when the part velocity crosses the surface
/// velocity; events are located within the step and modes switch at the event
/// time. Rejects non-finite states.
pub fn step(
    state: &SystemState,
    waveform: &Waveform,
    fric: &FrictionPair,
    cfg: &TransportConfig,
    dt: f64,
) -> Result<SystemState> {
    if !state.is_finite() {
        return Err(Error::InvalidInput("non-finite system state".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let opts = IntegratorOptions::default();
    let c = Contact::new(fric, cfg);
    let look = 0.25 * dt * opts.event_tol_factor;
    let mut s = *state;
    // Surface fields are prescribed, not integrated.
    s.z_s = waveform.position(s.t);
    s.v_s = waveform.velocity(s.t);
    s.mode = c.classify(
        s.v_p - s.v_s,
        waveform.accel(s.t + look),
        opts.stick_velocity_tol,
        opts.stick_force_tol,
    );
    if s.mode == ContactMode::Sticking {
        s.v_p = s.v_s;
    }
    let mut switches = Vec::new();
    advance(
        &mut s,
        waveform,
        &c,
        &opts,
        dt * opts.event_tol_factor,
        state.t + dt,
        &mut switches,
    );
    Ok(s)
}

#[allow(clippy::too_many_arguments)]
fn run_simulation<M: SurfaceMotion + ?Sized>(
    motion: &M,
    fric: &FrictionPair,
    cfg: &TransportConfig,
    initial: &SystemState,
    n_steps: usize,
    dt: f64,
    opts: &IntegratorOptions,
    period: Option<f64>,
    label: String,
) -> Result<Trajectory> {
    if !initial.is_finite() {
        return Err(Error::InvalidInput("non-finite initial state".into()));
    }
    let c = Contact::new(fric, cfg);
    let eps_t = dt * opts.event_tol_factor;
    let look = 0.25 * eps_t;
    let bound = opts
        .divergence_velocity
        .unwrap_or(1e3 * cfg.gravity.max(cfg.a_max) * cfg.period);

    let mut state = *initial;
    state.z_s = motion.position(state.t);
    state.v_s = motion.velocity(state.t);
    state.mode = c.classify(
        state.v_p - state.v_s,
        motion.accel(state.t + look),
        opts.stick_velocity_tol,
        opts.stick_force_tol,
    );
    if state.mode == ContactMode::Sticking {
        state.v_p = state.v_s;
    }

    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut switches = Vec::new();
    let push = |samples: &mut Vec<Sample>, s: &SystemState, a_s: f64| {
        samples.push(Sample {
            t: s.t,
            z_s: s.z_s,
            v_s: s.v_s,
            a_s,
            z_p: s.z_p,
            v_p: s.v_p,
            mode: s.mode,
        });
    };
    push(&mut samples, &state, motion.accel(state.t + look));

    let t0 = state.t;
    for i in 0..n_steps {
        let t_target = t0 + dt * (i + 1) as f64;
        advance(&mut state, motion, &c, opts, eps_t, t_target, &mut switches);
        if state.v_p.abs() > bound {
            return Err(Error::Diverged {
                t: state.t,
                v_p: state.v_p,
                bound,
            });
        }
        push(&mut samples, &state, motion.accel(state.t + look));
    }

    Ok(Trajectory::new(samples, switches, period, label, *cfg))
}

/// Simulate `n_periods` of drive under `waveform`, recording every step.
///
/// The surface follows the waveform exactly (kinematic prescription); the
/// initial surface fields are normalized from the waveform and the initial
/// mode is re-classified from the relative velocity and static cone.
pub fn simulate(
    waveform: &Waveform,
    fric: &FrictionPair,
    cfg: &TransportConfig,
    n_periods: usize,
    initial: &SystemState,
) -> Result<Trajectory> {
    simulate_with_options(
        waveform,
        fric,
        cfg,
        n_periods,
        initial,
        &IntegratorOptions::default(),
    )
}

pub fn simulate_with_options(
    waveform: &Waveform,
    fric: &FrictionPair,
    cfg: &TransportConfig,
    n_periods: usize,
    initial: &SystemState,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if n_periods == 0 {
        return Err(Error::InvalidInput("n_periods must be >= 1".into()));
    }
    if (waveform.period() - cfg.period).abs() > 1e-9 * cfg.period {
        return Err(Error::InvalidInput(format!(
            "waveform period {} does not match config period {}",
            waveform.period(),
            cfg.period
        )));
    }
    if opts.steps_per_period == 0 {
        return Err(Error::InvalidInput("steps_per_period must be >= 1".into()));
    }
    let dt = cfg.period / opts.steps_per_period as f64;
    run_simulation(
        waveform,
        fric,
        cfg,
        initial,
        n_periods * opts.steps_per_period,
        dt,
        opts,
        Some(cfg.period),
        waveform.label().to_string(),
    )
}

/// Simulate the part against a measured surface velocity trace, using the
/// same mode-switch logic as waveform-driven stepping. The trace's linear
/// velocity interpolation makes the surface acceleration piecewise constant.
pub fn simulate_from_surface_trace(
    trace: &VelocityTrace,
    fric: &FrictionPair,
    cfg: &TransportConfig,
    initial: &SystemState,
) -> Result<Trajectory> {
    simulate_from_surface_trace_with_options(
        trace,
        fric,
        cfg,
        initial,
        &IntegratorOptions::default(),
    )
}

pub fn simulate_from_surface_trace_with_options(
    trace: &VelocityTrace,
    fric: &FrictionPair,
    cfg: &TransportConfig,
    initial: &SystemState,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if opts.trace_substeps == 0 {
        return Err(Error::InvalidInput("trace_substeps must be >= 1".into()));
    }
    let n_steps = (trace.len() - 1) * opts.trace_substeps;
    let dt = trace.span() / n_steps as f64;
    run_simulation(
        trace,
        fric,
        cfg,
        initial,
        n_steps,
        dt,
        opts,
        None,
        "trace".to_string(),
    )
}
