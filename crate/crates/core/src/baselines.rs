//! Comparison algorithms: continuous multiplicative-weights growth (MWA),
//! the half-scaled expert-shifted growth of the Anand baseline, and
//! the plain average of the experts' final solutions.
//!
//! Both growth processes follow `dx_i/dτ = (a_i / c_i)(x_i + shift_i)`, whose
//! closed form `x_i(τ) = (x_i(0) + shift_i)·exp(a_i τ / c_i) - shift_i` is
//! evaluated directly; the stopping time is found by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::dot;

/// Tolerance on the row value at the end of a growth phase.
pub const GROWTH_TOL: f64 = 1e-9;

/// Grows `x` along the exponential dynamics until `row·x >= target`.
/// Coordinates freeze at `cap`. The returned point always satisfies the
/// target (the upper end of the bisection bracket is kept).
pub(crate) fn grow_to_target(
    x: &mut [f64],
    row: &[f64],
    costs: &[f64],
    shift: &[f64],
    cap: f64,
    target: f64,
) -> std::result::Result<(), ()> {
    if dot(row, x) >= target {
        return Ok(());
    }
    let start = x.to_vec();
    let growable: Vec<usize> = (0..x.len())
        .filter(|&i| row[i] > 0.0 && start[i] + shift[i] > 0.0 && start[i] < cap)
        .collect();
    let value_at = |tau: f64| -> f64 {
        let mut v = 0.0;
        for i in 0..start.len() {
            let xi = if growable.binary_search(&i).is_ok() {
                ((start[i] + shift[i]) * (row[i] * tau / costs[i]).exp() - shift[i]).min(cap)
            } else {
                start[i]
            };
            v += row[i] * xi;
        }
        v
    };
    // Supremum of the reachable row value.
    let sup = if cap.is_finite() {
        (0..start.len())
            .map(|i| {
                if growable.binary_search(&i).is_ok() {
                    row[i] * cap
                } else {
                    row[i] * start[i]
                }
            })
            .sum::<f64>()
    } else if growable.is_empty() {
        dot(row, &start)
    } else {
        f64::INFINITY
    };
    if sup < target - GROWTH_TOL {
        return Err(());
    }

    let mut hi = 1.0;
    let mut guard = 0;
    while value_at(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(());
        }
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        let v = value_at(hi);
        if v - target <= GROWTH_TOL * 1e-3 || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if value_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for i in 0..x.len() {
        if growable.binary_search(&i).is_ok() {
            x[i] = ((start[i] + shift[i]) * (row[i] * hi / costs[i]).exp() - shift[i]).min(cap);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwaState {
    pub x: Vec<f64>,
    pub steps: usize,
    /// Number of steps on which the row was unsatisfied and `x` grew.
    pub growth_steps: usize,
}

impl MwaState {
    pub fn new(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            steps: 0,
            growth_steps: 0,
        }
    }

    pub fn cost(&self, costs: &[f64]) -> f64 {
        dot(costs, &self.x)
    }
}

/// One MWA step: if `row·x < 1`, every variable in the row grows at rate
/// `(a_i / c_i)(x_i + 1/n)` until the row is tight.
pub fn mwa_step(state: &mut MwaState, row: &[f64], costs: &[f64]) {
    state.steps += 1;
    if dot(row, &state.x) >= 1.0 {
        return;
    }
    let n = state.x.len();
    let shift = vec![1.0 / n as f64; n];
    // The row has a positive coefficient and the shift is positive, so the
    // growth is unbounded and the target is always reached.
    grow_to_target(&mut state.x, row, costs, &shift, f64::INFINITY, 1.0)
        .expect("valid covering row is reachable");
    state.growth_steps += 1;
}

/// Runs MWA over every row of the instance.
pub fn run_mwa(instance: &crate::instance::CoveringInstance) -> Vec<MwaState> {
    let mut state = MwaState::new(instance.n);
    let mut trace = Vec::with_capacity(instance.rows.len());
    for row in &instance.rows {
        mwa_step(&mut state, row, &instance.costs);
        trace.push(state.clone());
    }
    trace
}

/// State of the half-scaled algorithm; `x` is the pre-doubling solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnandState {
    pub x: Vec<f64>,
    /// Shift `δ_ij` used on the most recent step.
    pub delta: Vec<f64>,
    pub steps: usize,
}

/// Row value each step is satisfied to before the final doubling; also the
/// per-variable cap.
pub const ANAND_TARGET: f64 = 0.5;

impl AnandState {
    pub fn new(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            delta: vec![0.0; n],
            steps: 0,
        }
    }
}

/// One step: with `δ_i` the experts' average on this step, grow
/// `dx_i/dτ = (a_i/c_i)(x_i + δ_i)` until the row reaches 0.5, freezing any
/// variable at 0.5.
pub fn anand_step(
    state: &mut AnandState,
    row: &[f64],
    costs: &[f64],
    experts: &[Vec<f64>],
) -> Result<()> {
    let n = state.x.len();
    let k = experts.len().max(1) as f64;
    state.delta = (0..n)
        .map(|i| experts.iter().map(|s| s[i]).sum::<f64>() / k)
        .collect();
    let step = state.steps;
    state.steps += 1;
    grow_to_target(
        &mut state.x,
        row,
        costs,
        &state.delta,
        ANAND_TARGET,
        ANAND_TARGET,
    )
    .map_err(|_| Error::Unreachable {
        step,
        target: ANAND_TARGET,
    })
}

/// Final solution: the half-scaled solution doubled.
pub fn anand_finalize(state: &AnandState) -> Vec<f64> {
    state.x.iter().map(|v| 2.0 * v).collect()
}

/// Cost of `x_i = (1/K) Σ_k s_{i,k}` over the final predictions.
pub fn average_of_experts(final_predictions: &[Vec<f64>], costs: &[f64]) -> f64 {
    if final_predictions.is_empty() {
        return 0.0;
    }
    let k = final_predictions.len() as f64;
    costs
        .iter()
        .enumerate()
        .map(|(i, c)| c * final_predictions.iter().map(|s| s[i]).sum::<f64>() / k)
        .sum()
}
