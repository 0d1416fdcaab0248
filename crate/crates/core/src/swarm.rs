//! Seeded, bounded particle-swarm minimizer.
//!
//! Synchronous constriction-style PSO: every generation evaluates all
//! particles (in parallel when the `parallel` feature is on), then updates
//! personal and global bests at a sequential barrier. Each particle draws
//! from its own counter-based RNG stream derived from the seed, so results
//! are bit-identical regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;

/// Swarm hyperparameters. Defaults are the standard constriction values:
/// 60 particles, inertia 0.729, cognitive/social 1.494, 200 iterations with a
/// 30-iteration stall window.
#[derive(Debug, Clone, Copy)]
pub struct SwarmOptions {
    pub particles: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub max_iterations: usize,
    /// Stop after this many consecutive iterations without meaningful
    /// improvement; 0 disables the stall check.
    pub stall_iterations: usize,
    /// Improvement below `stall_tolerance·max(1, |best|)` counts as a stall.
    pub stall_tolerance: f64,
}

impl Default for SwarmOptions {
    fn default() -> Self {
        SwarmOptions {
            particles: 60,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            max_iterations: 200,
            stall_iterations: 30,
            stall_tolerance: 1e-10,
        }
    }
}

/// Outcome of a swarm run.
#[derive(Debug, Clone, Serialize)]
pub struct SwarmReport {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best cost after each generation (index 0 is the initial population).
    pub cost_history: Vec<f64>,
    pub stalled: bool,
}

/// Minimize `objective` over the box `bounds`, deterministically for a given
/// seed. Non-finite objective values are treated as `+inf`; if no particle
/// ever produces a finite cost the run fails.
pub fn minimize<F>(
    objective: F,
    bounds: &[(f64, f64)],
    seed: u64,
    opts: &SwarmOptions,
) -> Result<SwarmReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if bounds.is_empty() {
        return Err(Error::InvalidInput("swarm needs at least one dimension".into()));
    }
    for (i, (lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!(
                "bad bound for dimension {i}: [{lo}, {hi}]"
            )));
        }
    }
    if opts.particles < 2 {
        return Err(Error::InvalidInput("swarm needs at least 2 particles".into()));
    }
    let dims = bounds.len();

    // One independent stream per particle: initialization and velocity draws
    // never cross particles, so evaluation order cannot change the result.
    let mut rngs: Vec<ChaCha8Rng> = (0..opts.particles)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect();

    let mut positions: Vec<Vec<f64>> = rngs
        .iter_mut()
        .map(|rng| {
            bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect()
        })
        .collect();
    let mut velocities: Vec<Vec<f64>> = rngs
        .iter_mut()
        .map(|rng| {
            bounds
                .iter()
                .map(|&(lo, hi)| {
                    let span = hi - lo;
                    rng.random_range(-span..span)
                })
                .collect()
        })
        .collect();

    let sanitize = |c: f64| if c.is_finite() { c } else { f64::INFINITY };
    let eval = |positions: &[Vec<f64>]| -> Vec<f64> {
        exec::map_slice(positions, |p| sanitize(objective(p)))
    };

    let mut costs = eval(&positions);
    let mut evaluations = positions.len();
    let mut best_positions = positions.clone();
    let mut best_costs = costs.clone();
    let (mut g_idx, _) = best_costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("nonempty swarm");
    let mut g_best = best_positions[g_idx].clone();
    let mut g_cost = best_costs[g_idx];
    let mut history = vec![g_cost];

    let mut stall = 0usize;
    let mut stalled = false;
    let mut iterations = 0usize;

    for _ in 0..opts.max_iterations {
        iterations += 1;
        for (i, rng) in rngs.iter_mut().enumerate() {
            for d in 0..dims {
                let r1: f64 = rng.random_range(0.0..1.0);
                let r2: f64 = rng.random_range(0.0..1.0);
                velocities[i][d] = opts.inertia * velocities[i][d]
                    + opts.cognitive * r1 * (best_positions[i][d] - positions[i][d])
                    + opts.social * r2 * (g_best[d] - positions[i][d]);
                positions[i][d] += velocities[i][d];
                let (lo, hi) = bounds[d];
                if positions[i][d] < lo {
                    positions[i][d] = lo;
                    velocities[i][d] = 0.0;
                } else if positions[i][d] > hi {
                    positions[i][d] = hi;
                    velocities[i][d] = 0.0;
                }
            }
        }

        costs = eval(&positions);
        evaluations += positions.len();

        let prev_best = g_cost;
        for i in 0..positions.len() {
            if costs[i] < best_costs[i] {
                best_costs[i] = costs[i];
                best_positions[i].clone_from(&positions[i]);
                if costs[i] < g_cost {
                    g_cost = costs[i];
                    g_idx = i;
                    g_best.clone_from(&positions[i]);
                }
            }
        }
        let _ = g_idx;
        history.push(g_cost);

        if opts.stall_iterations > 0 {
            let improved = prev_best - g_cost > opts.stall_tolerance * prev_best.abs().max(1.0);
            if improved {
                stall = 0;
            } else {
                stall += 1;
                if stall >= opts.stall_iterations {
                    stalled = true;
                    break;
                }
            }
        }
    }

    if !g_cost.is_finite() {
        return Err(Error::NotConverged(
            "objective never returned a finite cost".into(),
        ));
    }

    Ok(SwarmReport {
        best_position: g_best,
        best_cost: g_cost,
        iterations,
        evaluations,
        cost_history: history,
        stalled,
    })
}

/// Deterministic Nelder-Mead refinement from a start point, clamped to the
/// bounds.
///
/// The swarm is good at locating the right basin and poor at polishing into a
/// narrow curved valley (fit costs are nearly degenerate along the
/// `μ_k·F_n = const` direction); a simplex tracks such valleys where
/// coordinate probing stalls. This is the standard hybrid second stage after
/// a stochastic global search. Stops at the evaluation budget or when the
/// simplex has shrunk below 1e-10 of the bound ranges.
pub fn refine<F>(
    objective: F,
    bounds: &[(f64, f64)],
    start: &[f64],
    max_evals: usize,
) -> Result<(Vec<f64>, f64, usize)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if start.len() != bounds.len() {
        return Err(Error::InvalidInput(format!(
            "start point has {} dims, bounds have {}",
            start.len(),
            bounds.len()
        )));
    }
    let dims = bounds.len();
    let clamp = |x: &mut Vec<f64>| {
        for d in 0..dims {
            x[d] = x[d].clamp(bounds[d].0, bounds[d].1);
        }
    };

    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let c = objective(x);
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    };

    // Initial simplex: start plus a 5%-of-range displacement per dimension,
    // flipped inward when it would leave the box.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dims + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for d in 0..dims {
        let (lo, hi) = bounds[d];
        let step = 0.05 * (hi - lo);
        let mut x = x0.clone();
        x[d] = if x[d] + step <= hi { x[d] + step } else { x[d] - step };
        let f = eval(&x, &mut evals);
        simplex.push((x, f));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    order(&mut simplex);

    while evals + 2 < max_evals {
        // Converged when the simplex is tiny relative to the box.
        let spread = (0..dims)
            .map(|d| {
                let lo = simplex.iter().map(|(x, _)| x[d]).fold(f64::MAX, f64::min);
                let hi = simplex.iter().map(|(x, _)| x[d]).fold(f64::MIN, f64::max);
                (hi - lo) / (bounds[d].1 - bounds[d].0)
            })
            .fold(0.0f64, f64::max);
        if spread < 1e-10 {
            break;
        }

        let worst = simplex.len() - 1;
        let centroid: Vec<f64> = (0..dims)
            .map(|d| simplex[..worst].iter().map(|(x, _)| x[d]).sum::<f64>() / worst as f64)
            .collect();
        let shifted = |coef: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clamp(&mut x);
            x
        };

        let reflected = shifted(1.0);
        let f_r = eval(&reflected, &mut evals);
        if f_r < simplex[0].1 {
            let expanded = shifted(2.0);
            let f_e = eval(&expanded, &mut evals);
            simplex[worst] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < simplex[worst - 1].1 {
            simplex[worst] = (reflected, f_r);
        } else {
            let contracted = if f_r < simplex[worst].1 {
                shifted(0.5)
            } else {
                shifted(-0.5)
            };
            let f_c = eval(&contracted, &mut evals);
            if f_c < simplex[worst].1.min(f_r) {
                simplex[worst] = (contracted, f_c);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (x, b) in v.0.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    v.1 = eval(&v.0, &mut evals);
                    if evals >= max_evals {
                        break;
                    }
                }
            }
        }
        order(&mut simplex);
    }

    let (best, f_best) = simplex.swap_remove(0);
    Ok((best, f_best, evals))
}
