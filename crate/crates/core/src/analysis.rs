//! Closed-form transport metrics, feasibility bounds, optimal squeeze-force
//! solving, and parameter sweeps.
//!
//! Everything here is expressed in the nondimensional pair
//! `f_n = F_n/(m g)` (normal force per part weight) and `α = a_max/g`.
//! The central quantity is the normalized average part velocity under the
//! optimal drive,
//!
//! ```text
//! v_ave/(gT) = (μ_s f_n − 1)²·(α² − (μ_k f_n + 1)²) / (4α (μ_s + μ_k)² f_n²)
//! ```
//!
//! which is positive exactly on the band `1/μ_s < f_n < f_n_max = (α−1)/μ_k`:
//! squeeze too little and the part cannot be carried, squeeze too hard and the
//! surface can no longer slip out from under it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    simulate_with_options, FrictionPair, IntegratorOptions, SystemState, TransportConfig,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::solve::brent_root;
use crate::waveforms::optimal_waveform;

/// A point in the nondimensional parameter space.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NondimensionalPoint {
    pub f_n: f64,
    pub alpha: f64,
    pub friction: FrictionPair,
}

impl NondimensionalPoint {
    pub fn new(f_n: f64, alpha: f64, friction: FrictionPair) -> Result<NondimensionalPoint> {
        if !(f_n.is_finite() && f_n > 0.0 && alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "nondimensional point requires f_n > 0 and alpha > 0, got f_n = {f_n}, alpha = {alpha}"
            )));
        }
        Ok(NondimensionalPoint {
            f_n,
            alpha,
            friction,
        })
    }
}

/// Maximum squeeze force (per part weight) beyond which upward motion is
/// impossible: at `(α − 1)/μ_k` the part's slip deceleration reaches `a_max`
/// and the surface can never fall below it.
pub fn f_n_max(alpha: f64, mu_k: f64) -> Result<f64> {
    if !(mu_k.is_finite() && mu_k > 0.0) {
        return Err(Error::InvalidInput(format!("mu_k must be positive, got {mu_k}")));
    }
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::InvalidInput(format!(
            "f_n_max requires alpha > 1 (the surface must out-accelerate gravity), got {alpha}"
        )));
    }
    Ok((alpha - 1.0) / mu_k)
}

/// The open band of squeeze forces with positive transport, if any.
pub fn feasible_band(fric: &FrictionPair, alpha: f64) -> Option<(f64, f64)> {
    if alpha <= 1.0 {
        return None;
    }
    let lo = 1.0 / fric.mu_s();
    let hi = (alpha - 1.0) / fric.mu_k();
    (hi > lo).then_some((lo, hi))
}

/// Normalized average part velocity `v_ave/(gT)` under the optimal drive.
///
/// Evaluates the closed form on the feasible band and returns 0 on and
/// outside its boundary (a value, not an error, so sweeps render cleanly).
pub fn v_ave_closed_form(p: &NondimensionalPoint) -> f64 {
    let mu_s = p.friction.mu_s();
    let mu_k = p.friction.mu_k();
    let u = mu_s * p.f_n - 1.0;
    let b1 = mu_k * p.f_n + 1.0;
    if u <= 0.0 || p.alpha <= b1 {
        return 0.0;
    }
    let num = u * u * (p.alpha * p.alpha - b1 * b1);
    let den = 4.0 * p.alpha * (mu_s + mu_k) * (mu_s + mu_k) * p.f_n * p.f_n;
    (num / den).max(0.0)
}

/// Sign-carrying derivative factor of the closed form with respect to `f_n`.
///
/// `d/df [u²w/f²] = (u/f³)·(2 μ_s w f + u w' f − 2 u w)` with
/// `u = μ_s f − 1`, `w = α² − (μ_k f + 1)²`, `w' = −2 μ_k (μ_k f + 1)`;
/// on the interior of the band `u > 0`, so the bracket carries the sign.
fn v_derivative_factor(f: f64, alpha: f64, mu_s: f64, mu_k: f64) -> f64 {
    let u = mu_s * f - 1.0;
    let b1 = mu_k * f + 1.0;
    let w = alpha * alpha - b1 * b1;
    let wp = -2.0 * mu_k * b1;
    2.0 * mu_s * w * f + u * wp * f - 2.0 * u * w
}

/// The squeeze force maximizing `v_ave/(gT)` for a given `α`, and the peak
/// value, by safeguarded root finding on the analytic derivative.
///
/// The derivative factor is positive at the lower band edge and negative at
/// the upper edge, so the maximizer is bracketed; uniqueness on the band is
/// checked numerically in tests rather than assumed.
///
/// ```
/// use stickslip::analysis::optimal_f_n;
/// use stickslip::FrictionPair;
///
/// let fric = FrictionPair::new(0.7, 0.6)?;
/// let (f_star, v_star) = optimal_f_n(10.0, &fric)?;
/// assert!((f_star - 6.7083).abs() < 1e-3);
/// assert!((v_star - 0.33563).abs() < 1e-4);
/// # Ok::<(), stickslip::Error>(())
/// ```
pub fn optimal_f_n(alpha: f64, fric: &FrictionPair) -> Result<(f64, f64)> {
    let (lo, hi) = feasible_band(fric, alpha).ok_or_else(|| {
        Error::Infeasible(format!(
            "empty feasible band: needs alpha > 1 + mu_k/mu_s = {:.4}, got alpha = {alpha:.4}",
            1.0 + fric.mu_k() / fric.mu_s()
        ))
    })?;
    let mu_s = fric.mu_s();
    let mu_k = fric.mu_k();
    let width = hi - lo;
    let mut a = lo + 1e-12 * width;
    let mut b = hi - 1e-12 * width;
    let g = |f: f64| v_derivative_factor(f, alpha, mu_s, mu_k);

    // The analytic signs can be lost to rounding within a few ulps of the
    // edges; walk inward until the bracket is clean.
    let mut ga = g(a);
    let mut gb = g(b);
    let mut shrink = 1e-9;
    while ga <= 0.0 && shrink < 0.1 {
        a = lo + shrink * width;
        ga = g(a);
        shrink *= 10.0;
    }
    shrink = 1e-9;
    while gb >= 0.0 && shrink < 0.1 {
        b = hi - shrink * width;
        gb = g(b);
        shrink *= 10.0;
    }
    if ga <= 0.0 || gb >= 0.0 {
        return Err(Error::NotConverged(format!(
            "could not bracket the derivative sign change on ({lo}, {hi})"
        )));
    }

    let f_star = brent_root(g, a, b, 1e-13 * hi.max(1.0), 200)?;
    let v_star = v_ave_closed_form(&NondimensionalPoint {
        f_n: f_star,
        alpha,
        friction: *fric,
    });
    Ok((f_star, v_star))
}

/// Remapped friction coefficients under which the vertical problem obeys the
/// gravity-free (horizontal) equations, valid for sticking and slipping-up
/// only: `μ̃_s = μ_s f_n − 1`, `μ̃_k = μ_k f_n + 1`.
///
/// Note the inversion `μ̃_s < μ̃_k` whenever `(μ_s − μ_k)·f_n < 2`.
pub fn equivalent_horizontal_coefficients(fric: &FrictionPair, f_n: f64) -> (f64, f64) {
    (fric.mu_s() * f_n - 1.0, fric.mu_k() * f_n + 1.0)
}

/// One evaluated feasibility bound.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub satisfied: bool,
    pub detail: String,
}

/// Result of checking every transport bound at one parameter point.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub point: NondimensionalPoint,
    pub checks: Vec<BoundCheck>,
}

impl FeasibilityReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn violations(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| !c.satisfied)
    }
}

impl std::fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "feasibility at f_n = {:.4}, alpha = {:.4}, mu_s = {:.3}, mu_k = {:.3}:",
            self.point.f_n,
            self.point.alpha,
            self.point.friction.mu_s(),
            self.point.friction.mu_k()
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {}: {}",
                if c.satisfied { "ok" } else { "VIOLATED" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Evaluate every transport bound and name each violated one:
/// the static hold (`f_n > 1/μ_s`), slip arrest (`f_n > 1/μ_k`),
/// acceleration headroom (`α > μ_s f_n + 1`, hence `α > 2`), and
/// the maximum squeeze (`f_n < (α−1)/μ_k`).
pub fn feasibility_report(p: &NondimensionalPoint) -> FeasibilityReport {
    let mu_s = p.friction.mu_s();
    let mu_k = p.friction.mu_k();
    let checks = vec![
        BoundCheck {
            name: "static_hold",
            satisfied: p.f_n > 1.0 / mu_s,
            detail: format!(
                "f_n = {:.4} must exceed 1/mu_s = {:.4} to hold the part at rest",
                p.f_n,
                1.0 / mu_s
            ),
        },
        BoundCheck {
            name: "slip_arrest",
            satisfied: p.f_n > 1.0 / mu_k,
            detail: format!(
                "f_n = {:.4} must exceed 1/mu_k = {:.4} or the part falls indefinitely once slipping",
                p.f_n,
                1.0 / mu_k
            ),
        },
        BoundCheck {
            name: "accel_headroom",
            satisfied: p.alpha > mu_s * p.f_n + 1.0,
            detail: format!(
                "alpha = {:.4} must exceed mu_s*f_n + 1 = {:.4} (> 2) to break sticking downward",
                p.alpha,
                mu_s * p.f_n + 1.0
            ),
        },
        BoundCheck {
            name: "max_squeeze",
            satisfied: p.alpha > 1.0 && p.f_n < (p.alpha - 1.0) / mu_k,
            detail: if p.alpha > 1.0 {
                format!(
                    "f_n = {:.4} must stay below f_n_max = (alpha-1)/mu_k = {:.4}",
                    p.f_n,
                    (p.alpha - 1.0) / mu_k
                )
            } else {
                format!("alpha = {:.4} <= 1: f_n_max is undefined, no squeeze permits transport", p.alpha)
            },
        },
    ];
    FeasibilityReport { point: *p, checks }
}

/// One grid cell of a sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub f_n: f64,
    pub v_norm: f64,
    /// Inside the open band `(1/μ_s, f_n_max)`.
    pub feasible: bool,
}

/// Per-`α` maximizer of the sweep's closed form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub f_n_opt: f64,
    pub v_opt: f64,
}

/// Tabulated `v_ave/(gT)` over an (α, f_n) grid with per-α optima.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub friction: FrictionPair,
    pub rows: Vec<SweepRow>,
    pub optima: Vec<AlphaOptimum>,
}

impl SweepResult {
    /// Delimited text: columns `alpha,f_n,v_norm,feasible`, header mandatory.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha,f_n,v_norm,feasible")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.alpha, r.f_n, r.v_norm, r.feasible)?;
        }
        Ok(())
    }

    /// Human-readable per-α optimum lines.
    pub fn write_summary<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "per-alpha optima (mu_s = {}, mu_k = {}):",
            self.friction.mu_s(),
            self.friction.mu_k()
        )?;
        for o in &self.optima {
            writeln!(
                w,
                "  alpha = {:8.3}: f_n_opt = {:9.4}, v_opt/(gT) = {:.6}, band = ({:.4}, {:.4})",
                o.alpha,
                o.f_n_opt,
                o.v_opt,
                1.0 / self.friction.mu_s(),
                (o.alpha - 1.0) / self.friction.mu_k(),
            )?;
        }
        Ok(())
    }
}

/// Default reproduction grid: `f_n ∈ [1, 40]` at 400 points.
pub fn default_f_n_grid() -> Vec<f64> {
    linspace(1.0, 40.0, 400)
}

/// Default acceleration ratios for sweep output.
pub fn default_alphas() -> Vec<f64> {
    vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0]
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Tabulate the closed form over the grid, mark band feasibility, and record
/// the per-α optimum where the band is nonempty. Grid cells evaluate in
/// parallel; every cell is a pure function of its inputs.
pub fn sweep(fric: &FrictionPair, alphas: &[f64], f_n_grid: &[f64]) -> Result<SweepResult> {
    if alphas.is_empty() || f_n_grid.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be nonempty".into()));
    }
    for g in [alphas, f_n_grid] {
        if g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("sweep grids must be sorted ascending".into()));
        }
        if g.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidInput("sweep grids must be positive and finite".into()));
        }
    }

    let cells: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| f_n_grid.iter().map(move |&f| (a, f)))
        .collect();
    let fric_copy = *fric;
    let rows = exec::map_slice(&cells, move |&(alpha, f_n)| {
        let p = NondimensionalPoint {
            f_n,
            alpha,
            friction: fric_copy,
        };
        let feasible = feasible_band(&fric_copy, alpha)
            .map(|(lo, hi)| f_n > lo && f_n < hi)
            .unwrap_or(false);
        SweepRow {
            alpha,
            f_n,
            v_norm: v_ave_closed_form(&p),
            feasible,
        }
    });

    let optima = alphas
        .iter()
        .filter(|&&a| feasible_band(fric, a).is_some())
        .map(|&alpha| {
            optimal_f_n(alpha, fric).map(|(f_n_opt, v_opt)| AlphaOptimum {
                alpha,
                f_n_opt,
                v_opt,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        friction: *fric,
        rows,
        optima,
    })
}

/// Closed-form-vs-simulation check at one grid point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimCheck {
    pub alpha: f64,
    pub f_n: f64,
    pub v_closed: f64,
    pub v_sim: f64,
    pub rel_err: f64,
}

/// Steady-state `v_ave/(gT)` by full simulation under the optimal drive.
///
/// The normalized velocity is invariant to mass, period, and gravity, so a
/// unit-mass, 0.1 s, standard-gravity rig is used.
pub fn simulated_v_norm(
    fric: &FrictionPair,
    f_n: f64,
    alpha: f64,
    n_periods: usize,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let g = crate::dynamics::STANDARD_GRAVITY;
    let cfg = TransportConfig::from_nondimensional(f_n, alpha, 1.0, 0.1, g)?;
    let w = optimal_waveform(fric, &cfg)?;
    let traj = simulate_with_options(&w, fric, &cfg, n_periods, &SystemState::stuck_to(&w), opts)?;
    let steady = traj.steady_state_velocity()?;
    Ok(steady.v_ave / (g * cfg.period))
}

/// Cross-check `n` randomly chosen fully feasible grid points of a sweep
/// against full simulation. Points must pass every bound in
/// [`feasibility_report`], since only there does the closed form describe a
/// realizable motion. Checks run in parallel.
pub fn verify_sweep(result: &SweepResult, n: usize, seed: u64) -> Result<Vec<SimCheck>> {
    let candidates: Vec<&SweepRow> = result
        .rows
        .iter()
        .filter(|r| {
            let p = NondimensionalPoint {
                f_n: r.f_n,
                alpha: r.alpha,
                friction: result.friction,
            };
            feasibility_report(&p).all_satisfied()
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Infeasible(
            "sweep contains no fully feasible grid points to verify".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            let r = candidates[rng.random_range(0..candidates.len())];
            (r.alpha, r.f_n, r.v_norm)
        })
        .collect();

    let fric = result.friction;
    let checks = exec::map_slice(&picks, move |&(alpha, f_n, v_closed)| {
        simulated_v_norm(&fric, f_n, alpha, 30, &IntegratorOptions::default()).map(|v_sim| {
            SimCheck {
                alpha,
                f_n,
                v_closed,
                v_sim,
                rel_err: (v_sim - v_closed).abs() / v_closed.abs().max(1e-12),
            }
        })
    });
    checks.into_iter().collect()
}
