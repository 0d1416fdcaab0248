//! Simulation and optimization toolkit for vertical vibratory transport of a
//! part held by friction against a vibrating surface.
//!
//! A part squeezed against a vertically oscillating surface can be carried
//! upward against gravity by periodic stick-slip: carry it up while sticking,
//! drop the surface out from under it faster than kinetic friction can drag
//! it down, then catch back up. This crate provides:
//!
//! - [`dynamics`] — an event-driven hybrid integrator for the stick-slip
//!   system, driven by analytic waveforms or measured surface-velocity traces;
//! - [`waveforms`] — periodic piecewise-constant acceleration profiles,
//!   including the three-phase profile that maximizes average part velocity;
//! - [`analysis`] — closed-form transport metrics, feasibility bounds, the
//!   optimal squeeze force, and grid sweeps cross-validated by simulation;
//! - [`fitting`] — recovery of `(μ_k, F_n)` from tracked motion traces with a
//!   seeded particle-swarm search;
//! - [`swarm`] and [`solve`] — the optimizer and root-finder behind them.
//!
//! Heavy batch work (sweeps, cross-validation, swarm evaluations) runs on
//! rayon when the default `parallel` feature is enabled and sequentially
//! otherwise; results are identical either way.
//!
//! ```
//! use stickslip::{optimal_waveform, simulate, FrictionPair, SystemState, TransportConfig};
//!
//! // A part squeezed at 5x its weight, driven at up to 10 g, 10 Hz.
//! let fric = FrictionPair::new(0.7, 0.6)?;
//! let cfg = TransportConfig::from_nondimensional(5.0, 10.0, 0.009, 0.1, 9.81)?;
//! let drive = optimal_waveform(&fric, &cfg)?;
//! let traj = simulate(&drive, &fric, &cfg, 25, &SystemState::stuck_to(&drive))?;
//! let steady = traj.steady_state_velocity()?;
//! // Matches the closed-form prediction v_ave/(gT) = 525/1690 to ~0.1%.
//! assert!((steady.v_ave / (9.81 * 0.1) - 0.3107).abs() < 2e-3);
//! # Ok::<(), stickslip::Error>(())
//! ```

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fitting;
pub mod solve;
pub mod swarm;
pub mod trajectory;
pub mod waveforms;

pub use dynamics::{
    friction_force, simulate, simulate_from_surface_trace, step, ContactMode, FrictionPair,
    IntegratorOptions, SurfaceMotion, SystemState, TransportConfig, VelocityTrace,
};
pub use error::{Error, Result};
pub use trajectory::{ModeFractions, ModeSwitch, Sample, SteadyState, Trajectory};
pub use waveforms::{optimal_waveform, sampled_waveform, sawtooth_waveform, Segment, Waveform};
