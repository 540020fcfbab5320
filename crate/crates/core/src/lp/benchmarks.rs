//! Benchmark programs over a covering instance and expert predictions.
//!
//! Predictions are read from a [`PredictionMatrix`] restricted to the experts
//! that survive validation; dropped experts take no part in any benchmark.

use super::{solve_lp, LinearProgram, LpError, LpSolution, Relation, Sense};
use crate::experts::PredictionMatrix;
use crate::instance::CoveringInstance;

/// Column layout of the LIN-COMB program.
#[derive(Debug, Clone, Copy)]
pub struct LincombLayout {
    pub n: usize,
    pub steps: usize,
    pub experts: usize,
}

impl LincombLayout {
    /// Column of `w_k^t`.
    pub fn w(&self, t: usize, k: usize) -> usize {
        t * self.experts + k
    }

    /// Column of `x_i^t`.
    pub fn x(&self, t: usize, i: usize) -> usize {
        self.steps * self.experts + t * self.n + i
    }

    pub fn num_vars(&self) -> usize {
        self.steps * (self.experts + self.n)
    }
}

/// Column layout of the relaxation (`w_k^t`, then `y_i^t`) and of its dual
/// (`α^t`, then `β_i^t`).
#[derive(Debug, Clone, Copy)]
pub struct RelaxationLayout {
    pub n: usize,
    pub steps: usize,
    pub experts: usize,
}

impl RelaxationLayout {
    pub fn w(&self, t: usize, k: usize) -> usize {
        t * self.experts + k
    }

    pub fn y(&self, t: usize, i: usize) -> usize {
        self.steps * self.experts + t * self.n + i
    }

    pub fn alpha(&self, t: usize) -> usize {
        t
    }

    pub fn beta(&self, t: usize, i: usize) -> usize {
        self.steps + t * self.n + i
    }
}

fn surviving(predictions: &PredictionMatrix) -> PredictionMatrix {
    predictions.select(&predictions.surviving())
}

/// The LIN-COMB program:
///
/// ```text
/// min Σ_i c_i x_i^T
///   Σ_k w_k^t = 1                    ∀ t
///   x_i^t >= Σ_k w_k^t s_{i,k}^t     ∀ i, t
///   x_i^t >= x_i^{t-1}               ∀ i, t
///   w >= 0
/// ```
///
/// `x` columns carry a zero lower bound (`x^0 = 0`); rows that reduce to
/// `x_i^t >= 0` are implied by it and omitted.
pub fn build_lincomb_lp(
    instance: &CoveringInstance,
    predictions: &PredictionMatrix,
) -> (LinearProgram, LincombLayout) {
    let pm = surviving(predictions);
    let lay = LincombLayout {
        n: instance.n,
        steps: pm.len(),
        experts: pm.num_experts,
    };
    let mut obj = vec![0.0; lay.num_vars()];
    if lay.steps > 0 {
        for i in 0..lay.n {
            obj[lay.x(lay.steps - 1, i)] = instance.costs[i];
        }
    }
    let mut p = LinearProgram::new(Sense::Minimize, obj);
    for t in 0..lay.steps {
        p.add_row(
            (0..lay.experts).map(|k| (lay.w(t, k), 1.0)).collect(),
            Relation::Eq,
            1.0,
        );
    }
    for t in 0..lay.steps {
        for i in 0..lay.n {
            let mut coeffs = vec![(lay.x(t, i), 1.0)];
            for k in 0..lay.experts {
                let s = pm.get(t, k)[i];
                if s != 0.0 {
                    coeffs.push((lay.w(t, k), -s));
                }
            }
            if coeffs.len() > 1 {
                p.add_row(coeffs, Relation::Ge, 0.0);
            }
            if t > 0 {
                p.add_row(
                    vec![(lay.x(t, i), 1.0), (lay.x(t - 1, i), -1.0)],
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }
    p.names = (0..lay.num_vars())
        .map(|j| {
            if j < lay.steps * lay.experts {
                format!("w_{}_{}", j / lay.experts + 1, j % lay.experts + 1)
            } else {
                let r = j - lay.steps * lay.experts;
                format!("x_{}_{}", r % lay.n + 1, r / lay.n + 1)
            }
        })
        .collect();
    (p, lay)
}

/// The relaxation of LIN-COMB:
///
/// ```text
/// min Σ_t Σ_i c_i y_i^t
///   Σ_k w_k^t >= 1                                          ∀ t   (α^t)
///   Σ_k (w_k^t s_{i,k}^t - w_k^{t-1} s_{i,k}^{t-1}) <= y_i^t  ∀ i,t (β_i^t)
///   w, y >= 0
/// ```
///
/// with `w^0 = 0`. Rows whose expert terms all vanish reduce to `y >= 0`
/// and are omitted.
pub fn build_relaxation_lp(
    instance: &CoveringInstance,
    predictions: &PredictionMatrix,
) -> (LinearProgram, RelaxationLayout) {
    let pm = surviving(predictions);
    let lay = RelaxationLayout {
        n: instance.n,
        steps: pm.len(),
        experts: pm.num_experts,
    };
    let nw = lay.steps * lay.experts;
    let mut obj = vec![0.0; nw + lay.steps * lay.n];
    for t in 0..lay.steps {
        for i in 0..lay.n {
            obj[lay.y(t, i)] = instance.costs[i];
        }
    }
    let mut p = LinearProgram::new(Sense::Minimize, obj);
    for t in 0..lay.steps {
        p.add_row(
            (0..lay.experts).map(|k| (lay.w(t, k), 1.0)).collect(),
            Relation::Ge,
            1.0,
        );
    }
    for t in 0..lay.steps {
        for i in 0..lay.n {
            let mut coeffs = vec![(lay.y(t, i), 1.0)];
            for k in 0..lay.experts {
                let s = pm.get(t, k)[i];
                if s != 0.0 {
                    coeffs.push((lay.w(t, k), -s));
                }
                if t > 0 {
                    let sp = pm.get(t - 1, k)[i];
                    if sp != 0.0 {
                        coeffs.push((lay.w(t - 1, k), sp));
                    }
                }
            }
            if coeffs.len() > 1 {
                p.add_row(coeffs, Relation::Ge, 0.0);
            }
        }
    }
    (p, lay)
}

/// Dual of the relaxation:
///
/// ```text
/// max Σ_t α^t
///   α^t + Σ_i s_{i,k}^t (β_i^{t+1} - β_i^t) <= 0   ∀ k, t
///   0 <= β_i^t <= c_i,  α^t >= 0
/// ```
///
/// with `β^{T+1} = 0`.
pub fn build_dual_lp(
    instance: &CoveringInstance,
    predictions: &PredictionMatrix,
) -> (LinearProgram, RelaxationLayout) {
    let pm = surviving(predictions);
    let lay = RelaxationLayout {
        n: instance.n,
        steps: pm.len(),
        experts: pm.num_experts,
    };
    let mut obj = vec![0.0; lay.steps + lay.steps * lay.n];
    for t in 0..lay.steps {
        obj[lay.alpha(t)] = 1.0;
    }
    let mut p = LinearProgram::new(Sense::Maximize, obj);
    for t in 0..lay.steps {
        for i in 0..lay.n {
            p.set_bounds(lay.beta(t, i), 0.0, instance.costs[i]);
        }
    }
    for t in 0..lay.steps {
        for k in 0..lay.experts {
            let s = pm.get(t, k);
            let mut coeffs = vec![(lay.alpha(t), 1.0)];
            for i in 0..lay.n {
                if s[i] != 0.0 {
                    coeffs.push((lay.beta(t, i), -s[i]));
                    if t + 1 < lay.steps {
                        coeffs.push((lay.beta(t + 1, i), s[i]));
                    }
                }
            }
            p.add_row(coeffs, Relation::Le, 0.0);
        }
    }
    (p, lay)
}

/// `min c·x` subject to every covering row, `x >= 0`.
pub fn build_offline_lp(instance: &CoveringInstance) -> LinearProgram {
    let mut p = LinearProgram::new(Sense::Minimize, instance.costs.clone());
    for row in &instance.rows {
        p.add_row(
            row.iter()
                .enumerate()
                .filter(|(_, &a)| a != 0.0)
                .map(|(i, &a)| (i, a))
                .collect(),
            Relation::Ge,
            1.0,
        );
    }
    p
}

pub fn solve_offline_opt(instance: &CoveringInstance) -> Result<LpSolution, LpError> {
    solve_lp(&build_offline_lp(instance))
}

/// DYNAMIC benchmark: the cheapest `x̂` that, for every resource and step,
/// dominates at least one surviving expert (`x̂_i >= max_t min_k s_{i,k}^t`)
/// and satisfies every covering row.
pub fn solve_dynamic(
    instance: &CoveringInstance,
    predictions: &PredictionMatrix,
) -> Result<LpSolution, LpError> {
    let pm = surviving(predictions);
    let mut p = build_offline_lp(instance);
    for i in 0..instance.n {
        let floor = (0..pm.len())
            .map(|t| {
                (0..pm.num_experts)
                    .map(|k| pm.get(t, k)[i])
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        let floor = if floor.is_finite() { floor } else { 0.0 };
        p.set_bounds(i, floor, f64::INFINITY);
    }
    solve_lp(&p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::EXPERT_TOL;
    use crate::instance::{gen_anand_counterexample, gen_mwa_worst_case, ScriptedPredictions};
    use approx::assert_abs_diff_eq;

    fn matrix(inst: &CoveringInstance, steps: Vec<Vec<Vec<f64>>>) -> PredictionMatrix {
        let k = steps[0].len();
        PredictionMatrix::from_scripted(inst, &ScriptedPredictions { experts: k, steps }, EXPERT_TOL)
            .unwrap()
    }

    #[test]
    fn offline_opt_small_cases() {
        let inst = gen_mwa_worst_case(3).unwrap();
        let s = solve_offline_opt(&inst).unwrap();
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[2], 1.0, epsilon = 1e-9);

        let inst = CoveringInstance::new(vec![1.0, 2.0], vec![vec![1.0, 1.0]]);
        assert_abs_diff_eq!(solve_offline_opt(&inst).unwrap().objective, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn single_expert_lincomb_is_its_cost() {
        let inst = CoveringInstance::new(vec![1.0, 3.0], vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
        let pm = matrix(&inst, vec![vec![vec![1.0, 0.0]], vec![vec![1.0, 1.0]]]);
        let (p, _) = build_lincomb_lp(&inst, &pm);
        assert_abs_diff_eq!(solve_lp(&p).unwrap().objective, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn identical_experts_lincomb() {
        let inst = gen_mwa_worst_case(3).unwrap();
        let e = vec![0.0, 0.0, 1.0];
        let pm = matrix(&inst, vec![vec![e.clone(), e.clone()]; 3]);
        let (p, _) = build_lincomb_lp(&inst, &pm);
        assert_abs_diff_eq!(solve_lp(&p).unwrap().objective, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn anand_benchmarks() {
        for (k, l) in [(3, 1), (3, 2), (4, 3)] {
            let (inst, preds) = gen_anand_counterexample(k, l).unwrap();
            let pm = PredictionMatrix::from_scripted(&inst, &preds, EXPERT_TOL).unwrap();
            let (p, _) = build_lincomb_lp(&inst, &pm);
            assert_abs_diff_eq!(solve_lp(&p).unwrap().objective, l as f64, epsilon = 1e-6);
            assert_abs_diff_eq!(solve_dynamic(&inst, &pm).unwrap().objective, 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(solve_offline_opt(&inst).unwrap().objective, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn relaxation_equals_dual() {
        let (inst, preds) = gen_anand_counterexample(3, 2).unwrap();
        let pm = PredictionMatrix::from_scripted(&inst, &preds, EXPERT_TOL).unwrap();
        let (rel, _) = build_relaxation_lp(&inst, &pm);
        let (dual, _) = build_dual_lp(&inst, &pm);
        let a = solve_lp(&rel).unwrap().objective;
        let b = solve_lp(&dual).unwrap().objective;
        assert_abs_diff_eq!(a, b, epsilon = 1e-7);
    }

    #[test]
    fn dropped_experts_are_ignored() {
        let inst = CoveringInstance::new(vec![1.0, 1.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        // Expert 0 shrinks at t = 2 and is dropped; only expert 1 remains.
        let pm = matrix(
            &inst,
            vec![
                vec![vec![1.0, 0.0], vec![1.0, 1.0]],
                vec![vec![0.5, 0.5], vec![1.0, 1.0]],
            ],
        );
        let (p, lay) = build_lincomb_lp(&inst, &pm);
        assert_eq!(lay.experts, 1);
        assert_abs_diff_eq!(solve_lp(&p).unwrap().objective, 2.0, epsilon = 1e-9);
    }
}
