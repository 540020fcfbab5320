//! The online algorithm.
//!
//! On each row: collect and validate expert predictions, preprocess them,
//! solve the step program for weights `w`, then raise each `x_i` to
//! `Σ_k w_{i,k} s_{i,k}` if that exceeds its current value.

mod combine;
mod program;

pub use combine::{combine, AlgorithmExpert};
pub use program::{
    linear_minimizer, objective_and_gradient, solve_step_program, ConvexProgram, FwOptions,
    FwResult, FwVariant, Lmo, WeightDomain,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experts::{DummyExpert, Expert, PredictionMatrix, EXPERT_TOL};
use crate::instance::CoveringInstance;
use crate::preprocess::{Preprocessor, TightenedPredictions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub fw: FwOptions,
    /// Append a dummy expert to the roster.
    pub dummy: bool,
    pub expert_tol: f64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            fw: FwOptions::default(),
            dummy: true,
            expert_tol: EXPERT_TOL,
        }
    }
}

/// Solution and bookkeeping carried between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoState {
    pub t: usize,
    pub x: Vec<f64>,
    /// `w[i][k]` of the last step over all experts (0 for excluded pairs).
    pub w: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    /// `D_i = Σ_k s_{i,k} w_{i,k} + δ_i` of the last step; 0 for resources
    /// left out of the program.
    pub denominators: Vec<f64>,
}

impl AlgoState {
    pub fn new(n: usize, num_experts: usize) -> Self {
        Self {
            t: 0,
            x: vec![0.0; n],
            w: vec![vec![0.0; num_experts]; n],
            delta: vec![0.0; n],
            denominators: vec![0.0; n],
        }
    }
}

/// One step of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub w: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub delta: Vec<f64>,
    /// Denominators used in this step's program.
    pub d_prev: Vec<f64>,
    /// Denominators produced by this step.
    pub d: Vec<f64>,
    pub fw_gap: f64,
    pub fw_iters: usize,
    pub cap_active: bool,
    pub objective: f64,
    /// Preprocessing output: scaled `s`, auxiliary `ŝ` and `I` per active
    /// expert.
    pub preprocess: TightenedPredictions,
}

impl StepRecord {
    /// `Σ_k s_{i,k}` over the active experts' scaled predictions.
    pub fn prediction_sums(&self) -> Vec<f64> {
        let n = self.x.len();
        (0..n)
            .map(|i| self.preprocess.scaled.iter().map(|s| s[i]).sum())
            .collect()
    }
}

/// Builds the step program from the preprocessed predictions.
pub fn build_program(
    state: &AlgoState,
    row: &[f64],
    costs: &[f64],
    tightened: &TightenedPredictions,
    fw: &FwOptions,
) -> ConvexProgram {
    let n = costs.len();
    let k = tightened.experts.len();
    let resources: Vec<usize> = (0..n)
        .filter(|&i| tightened.scaled.iter().any(|s| s[i] > 0.0))
        .collect();
    let col = |m: &Vec<Vec<f64>>, i: usize| -> Vec<f64> { m.iter().map(|s| s[i]).collect() };
    let s: Vec<Vec<f64>> = resources.iter().map(|&i| col(&tightened.scaled, i)).collect();
    ConvexProgram {
        costs: resources.iter().map(|&i| costs[i]).collect(),
        a: resources.iter().map(|&i| row[i]).collect(),
        s_hat: resources.iter().map(|&i| col(&tightened.aux, i)).collect(),
        delta: s.iter().map(|c| c.iter().sum::<f64>() / k as f64).collect(),
        d_prev: resources
            .iter()
            .map(|&i| {
                let d = state.denominators[i];
                if state.t == 0 || d <= 0.0 {
                    1.0
                } else {
                    d
                }
            })
            .collect(),
        s,
        resources,
        experts: k,
        w_max: match fw.domain {
            WeightDomain::Convex => 1.0,
            WeightDomain::Capped => fw.w_max.unwrap_or(k as f64),
        },
        w_sum_max: match fw.domain {
            WeightDomain::Convex => 1.0,
            WeightDomain::Capped => f64::INFINITY,
        },
    }
}

/// Solves the step program and applies the `x` update.
pub fn algorithm_step(
    state: &mut AlgoState,
    row: &[f64],
    costs: &[f64],
    tightened: TightenedPredictions,
    fw: &FwOptions,
) -> Result<StepRecord> {
    let n = costs.len();
    let num_experts = state.w.first().map_or(0, |w| w.len());
    let cp = build_program(state, row, costs, &tightened, fw);
    let res = solve_step_program(&cp, fw)?;
    let k = cp.experts;
    let u = cp.usage(&res.w);

    let mut w = vec![vec![0.0; num_experts]; n];
    let mut d = vec![0.0; n];
    let mut d_prev = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for (r, &i) in cp.resources.iter().enumerate() {
        for (j, &e) in tightened.experts.iter().enumerate() {
            w[i][e] = res.w[r * k + j];
        }
        delta[i] = cp.delta[r];
        d_prev[i] = cp.d_prev[r];
        d[i] = u[r] + cp.delta[r];
        if u[r] > state.x[i] {
            state.x[i] = u[r];
        }
    }
    state.t += 1;
    state.w = w.clone();
    state.delta = delta.clone();
    state.denominators = d.clone();
    Ok(StepRecord {
        t: state.t,
        w,
        x: state.x.clone(),
        delta,
        d_prev,
        d,
        fw_gap: res.gap,
        fw_iters: res.iterations,
        cap_active: res.cap_active,
        objective: res.objective,
        preprocess: tightened,
    })
}

/// `ρ`: over resources, the largest ratio between two positive per-step
/// prediction sums. `None` when no resource ever has a positive sum.
pub fn compute_rho(sums: &[Vec<f64>]) -> Option<f64> {
    let n = sums.first()?.len();
    let mut rho: Option<f64> = None;
    for i in 0..n {
        let pos = sums.iter().map(|s| s[i]).filter(|&v| v > 0.0);
        let (lo, hi) = pos.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi > 0.0 {
            let r = hi / lo;
            rho = Some(rho.map_or(r, |p| p.max(r)));
        }
    }
    rho
}

/// A running instance of the algorithm with its experts.
pub struct OnlineAlgorithm {
    revealed: CoveringInstance,
    experts: Vec<Box<dyn Expert>>,
    labels: Vec<String>,
    predictions: PredictionMatrix,
    pre: Preprocessor,
    state: AlgoState,
    trace: Vec<StepRecord>,
    config: AlgoConfig,
    cost: f64,
}

/// Outcome of a complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoRun {
    pub x: Vec<f64>,
    /// Cost accumulated step by step.
    pub cost: f64,
    pub labels: Vec<String>,
    /// Raw predictions of every expert, dummy included (last column).
    pub predictions: PredictionMatrix,
    pub trace: Vec<StepRecord>,
    pub dummy: bool,
}

impl AlgoRun {
    /// `ρ` of the scaled predictions the algorithm worked with.
    pub fn rho(&self) -> Option<f64> {
        let sums: Vec<Vec<f64>> = self.trace.iter().map(StepRecord::prediction_sums).collect();
        compute_rho(&sums)
    }

    /// Number of experts active at the end, dummy included.
    pub fn effective_k(&self) -> usize {
        self.trace.last().map_or(0, |r| r.preprocess.experts.len())
    }
}

impl OnlineAlgorithm {
    pub fn new(costs: &[f64], mut experts: Vec<Box<dyn Expert>>, config: AlgoConfig) -> Self {
        if config.dummy {
            experts.push(Box::new(DummyExpert::new(costs)));
        }
        let n = costs.len();
        let k = experts.len();
        Self {
            revealed: CoveringInstance::new(costs.to_vec(), Vec::new()),
            labels: experts.iter().map(|e| e.label()).collect(),
            experts,
            predictions: PredictionMatrix::new(n, k),
            pre: Preprocessor::new(n, k),
            state: AlgoState::new(n, k),
            trace: Vec::new(),
            config,
            cost: 0.0,
        }
    }

    pub fn state(&self) -> &AlgoState {
        &self.state
    }

    pub fn trace(&self) -> &[StepRecord] {
        &self.trace
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Processes the next row and returns the updated solution.
    pub fn step(&mut self, row: &[f64]) -> Result<&[f64]> {
        let t = self.revealed.rows.len();
        self.revealed.rows.push(row.to_vec());
        let raw: Vec<Vec<f64>> = self.experts.iter_mut().map(|e| e.predict(t, row)).collect();
        let mask = self
            .predictions
            .push_and_validate(&self.revealed, raw, self.config.expert_tol)?;
        let tightened = self.pre.step(row, &self.predictions.steps[t], &mask)?;
        let before = self.state.x.clone();
        let record = algorithm_step(
            &mut self.state,
            row,
            &self.revealed.costs,
            tightened,
            &self.config.fw,
        )?;
        self.cost += self
            .revealed
            .costs
            .iter()
            .zip(record.x.iter().zip(&before))
            .map(|(c, (now, was))| c * (now - was))
            .sum::<f64>();
        self.trace.push(record);
        Ok(&self.state.x)
    }

    pub fn finish(self) -> AlgoRun {
        AlgoRun {
            x: self.state.x,
            cost: self.cost,
            labels: self.labels,
            predictions: self.predictions,
            trace: self.trace,
            dummy: self.config.dummy,
        }
    }

    /// Runs over every row of `instance`.
    pub fn run(
        instance: &CoveringInstance,
        experts: Vec<Box<dyn Expert>>,
        config: AlgoConfig,
    ) -> Result<AlgoRun> {
        let mut alg = Self::new(&instance.costs, experts, config);
        for row in &instance.rows {
            alg.step(row)?;
        }
        Ok(alg.finish())
    }
}
