//! Step-program checks replayed from a trace: the program of every step is
//! rebuilt from the recorded preprocessing output and the previous step's
//! denominators, then probed at the recorded weights.

use crate::algo::{
    build_program, linear_minimizer, objective_and_gradient, solve_step_program, AlgoRun, AlgoState, ConvexProgram,
    FwOptions,
};
use crate::error::Result;
use crate::instance::CoveringInstance;

use super::CheckOutcome;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    pub gap: f64,
    pub constraints: f64,
    /// Relative to `max(‖∇f‖∞, 1)`.
    pub gradient: f64,
    pub duplication: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            constraints: 1e-8,
            gradient: 1e-5,
            duplication: 1e-6,
        }
    }
}

/// One rebuilt step: its program and the weights the run used.
pub struct ReplayedStep {
    pub program: ConvexProgram,
    pub w: Vec<f64>,
    pub objective: f64,
}

/// Rebuilds every step program of `run` on `instance`.
pub fn replay_steps(instance: &CoveringInstance, run: &AlgoRun, fw: &FwOptions) -> Vec<ReplayedStep> {
    let n = instance.n;
    let mut state = AlgoState::new(n, run.predictions.num_experts);
    run.trace
        .iter()
        .enumerate()
        .map(|(t, rec)| {
            state.t = t;
            state.denominators = if t == 0 { vec![0.0; n] } else { run.trace[t - 1].d.clone() };
            let cp = build_program(&state, &instance.rows[t], &instance.costs, &rec.preprocess, fw);
            let k = cp.experts;
            let mut w = vec![0.0; cp.dim()];
            for (r, &i) in cp.resources.iter().enumerate() {
                for (j, &e) in rec.preprocess.experts.iter().enumerate() {
                    w[r * k + j] = rec.w[i][e];
                }
            }
            ReplayedStep {
                program: cp,
                w,
                objective: rec.objective,
            }
        })
        .collect()
}

/// `cp` with expert `j` listed twice; `δ` and the denominators are kept.
pub fn duplicate_expert(cp: &ConvexProgram, j: usize) -> ConvexProgram {
    let mut out = cp.clone();
    for r in 0..cp.resources.len() {
        out.s[r].push(cp.s[r][j]);
        out.s_hat[r].push(cp.s_hat[r][j]);
    }
    out.experts += 1;
    out
}

/// Frank-Wolfe gap at `w`.
pub fn fw_gap(cp: &ConvexProgram, w: &[f64], fw: &FwOptions) -> Result<f64> {
    let (_, g) = objective_and_gradient(cp, w)?;
    let v = linear_minimizer(cp, &g, fw.lmo)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    Ok(dot(&g, w) - dot(&g, &v))
}

/// Largest `|fd_j - g_j| / max(‖g‖∞, 1)` over coordinates, central
/// differences with step `h`.
pub fn gradient_error(cp: &ConvexProgram, w: &[f64], h: f64) -> Result<f64> {
    let (_, g) = objective_and_gradient(cp, w)?;
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut probe = w.to_vec();
    let mut worst = 0.0f64;
    for j in 0..w.len() {
        probe[j] = w[j] + h;
        let (fp, _) = objective_and_gradient(cp, &probe)?;
        probe[j] = w[j] - h;
        let (fm, _) = objective_and_gradient(cp, &probe)?;
        probe[j] = w[j];
        worst = worst.max(((fp - fm) / (2.0 * h) - g[j]).abs() / scale);
    }
    Ok(worst)
}

/// Gap, constraint, gradient and duplication checks over every step.
pub fn check_step_programs(
    prefix: &str,
    instance: &CoveringInstance,
    run: &AlgoRun,
    fw: &FwOptions,
    tol: &SolverTolerances,
) -> Result<Vec<CheckOutcome>> {
    let steps = replay_steps(instance, run, fw);
    let (mut gap, mut viol, mut grad, mut dup) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for st in &steps {
        let cp = &st.program;
        gap = gap.max(fw_gap(cp, &st.w, fw)?);
        viol = viol.max(cp.max_violation(&st.w));
        grad = grad.max(gradient_error(cp, &st.w, 1e-6)?);
        let twin = solve_step_program(&duplicate_expert(cp, 0), fw)?;
        dup = dup.max((twin.objective - st.objective).abs());
    }
    let name = |s: &str| format!("{prefix}/{s}");
    let count = steps.len();
    Ok(vec![
        CheckOutcome::new(
            &name("replayed-gap"),
            gap <= tol.gap,
            (gap - tol.gap).max(0.0),
            format!("{count} steps; max gap {gap:.3e} (tol {:e})", tol.gap),
        ),
        CheckOutcome::new(
            &name("program-constraints"),
            viol <= tol.constraints,
            viol,
            format!("max violation {viol:.3e} (tol {:e})", tol.constraints),
        ),
        CheckOutcome::new(
            &name("gradient-fd"),
            grad <= tol.gradient,
            grad,
            format!("max relative error {grad:.3e} (tol {:e})", tol.gradient),
        ),
        CheckOutcome::new(
            &name("duplication"),
            dup <= tol.duplication,
            dup,
            format!("max objective change {dup:.3e} with expert 0 duplicated (tol {:e})", tol.duplication),
        ),
    ])
}
