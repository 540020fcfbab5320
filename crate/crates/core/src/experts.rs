//! Experts: online sources of feasible, monotone covering solutions.
//!
//! Every strategy implements [`Expert`]. [`validate_stream`] checks the two
//! expert properties (prefix feasibility and monotonicity) step by step and
//! permanently drops violators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::baselines::{mwa_step, MwaState};
use crate::error::{Error, Result};
use crate::instance::{dot, CoveringInstance, GeneratorParams, ScriptedPredictions};
use crate::lp;

/// Relative tolerance when checking expert feasibility and monotonicity.
pub const EXPERT_TOL: f64 = 1e-7;

pub trait Expert: Send {
    fn label(&self) -> String;

    /// Prediction for step `t` (0-based) after `row` has been revealed. The
    /// vector covers all resources.
    fn predict(&mut self, t: usize, row: &[f64]) -> Vec<f64>;
}

/// Outputs a fixed offline optimum at every step.
pub struct PerfectExpert {
    solution: Vec<f64>,
}

impl PerfectExpert {
    pub fn new(instance: &CoveringInstance) -> Result<Self> {
        let sol = lp::solve_offline_opt(instance)?;
        Ok(Self {
            solution: sol.x.iter().map(|v| v.max(0.0)).collect(),
        })
    }

    pub fn from_solution(solution: Vec<f64>) -> Self {
        Self { solution }
    }
}

impl Expert for PerfectExpert {
    fn label(&self) -> String {
        "perfect".into()
    }

    fn predict(&mut self, _t: usize, _row: &[f64]) -> Vec<f64> {
        self.solution.clone()
    }
}

/// Suggests every variable at 1.
pub struct AdversarialExpert {
    n: usize,
}

impl AdversarialExpert {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl Expert for AdversarialExpert {
    fn label(&self) -> String {
        "adversarial".into()
    }

    fn predict(&mut self, _t: usize, _row: &[f64]) -> Vec<f64> {
        vec![1.0; self.n]
    }
}

/// Raises `s[i]` until `row·s = 1`.
fn raise_until_tight(s: &mut [f64], row: &[f64], i: usize) {
    let v = dot(row, s);
    if v < 1.0 {
        s[i] += (1.0 - v) / row[i];
    }
}

/// Starts every variable at `1/n`, then greedily raises the cheapest
/// variable per unit of coverage (`min c_i / a_i`, lowest index on ties) on
/// each unsatisfied row. Keeps every resource's prediction positive.
pub struct DummyExpert {
    costs: Vec<f64>,
    current: Vec<f64>,
}

impl DummyExpert {
    pub fn new(costs: &[f64]) -> Self {
        let n = costs.len();
        Self {
            costs: costs.to_vec(),
            current: vec![1.0 / n as f64; n],
        }
    }
}

impl Expert for DummyExpert {
    fn label(&self) -> String {
        "dummy".into()
    }

    fn predict(&mut self, _t: usize, row: &[f64]) -> Vec<f64> {
        if dot(row, &self.current) < 1.0 {
            let best = (0..row.len())
                .filter(|&i| row[i] > 0.0)
                .min_by(|&a, &b| {
                    (self.costs[a] / row[a]).total_cmp(&(self.costs[b] / row[b]))
                })
                .expect("row has a positive coefficient");
            raise_until_tight(&mut self.current, row, best);
        }
        self.current.clone()
    }
}

/// On each unsatisfied row, raises one uniformly drawn variable of the row
/// until the row is tight.
pub struct RandomExpert {
    rng: ChaCha8Rng,
    current: Vec<f64>,
    seed: u64,
}

impl RandomExpert {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            current: vec![0.0; n],
            seed,
        }
    }
}

impl Expert for RandomExpert {
    fn label(&self) -> String {
        format!("random(seed={})", self.seed)
    }

    fn predict(&mut self, _t: usize, row: &[f64]) -> Vec<f64> {
        if dot(row, &self.current) < 1.0 {
            let support: Vec<usize> = (0..row.len()).filter(|&i| row[i] > 0.0).collect();
            let i = support[self.rng.gen_range(0..support.len())];
            raise_until_tight(&mut self.current, row, i);
        }
        self.current.clone()
    }
}

/// A private MWA run used as an expert.
pub struct OnlineExpert {
    costs: Vec<f64>,
    state: MwaState,
}

impl OnlineExpert {
    pub fn new(costs: &[f64]) -> Self {
        Self {
            costs: costs.to_vec(),
            state: MwaState::new(costs.len()),
        }
    }
}

impl Expert for OnlineExpert {
    fn label(&self) -> String {
        "online".into()
    }

    fn predict(&mut self, _t: usize, row: &[f64]) -> Vec<f64> {
        mwa_step(&mut self.state, row, &self.costs);
        self.state.x.clone()
    }
}

/// Replays a recorded stream; steps past the end repeat the last vector.
pub struct ScriptedExpert {
    steps: Vec<Vec<f64>>,
    label: String,
}

impl ScriptedExpert {
    pub fn new(steps: Vec<Vec<f64>>, label: impl Into<String>) -> Self {
        Self {
            steps,
            label: label.into(),
        }
    }
}

impl Expert for ScriptedExpert {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn predict(&mut self, t: usize, _row: &[f64]) -> Vec<f64> {
        let t = t.min(self.steps.len().saturating_sub(1));
        self.steps.get(t).cloned().unwrap_or_default()
    }
}

/// One entry of an expert roster file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ExpertSpec {
    Perfect,
    Online,
    Random {
        #[serde(default)]
        seed: u64,
    },
    Adversarial,
    Dummy,
    Scripted {
        /// Prediction file; when absent the caller supplies the predictions.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        expert: usize,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub experts: Vec<ExpertSpec>,
    /// Append a dummy expert after the listed ones.
    #[serde(default = "yes")]
    pub dummy: bool,
}

impl Roster {
    pub fn new(experts: Vec<ExpertSpec>) -> Self {
        Self {
            experts,
            dummy: true,
        }
    }

    pub fn without_dummy(mut self) -> Self {
        self.dummy = false;
        self
    }

    /// Roster described by the expert counts of generator parameters.
    /// Random experts get seeds `params.seed * 1000 + j`.
    pub fn from_params(params: &GeneratorParams) -> Self {
        let mut experts = Vec::new();
        experts.extend(std::iter::repeat_n(ExpertSpec::Perfect, params.perfect_experts));
        experts.extend(std::iter::repeat_n(ExpertSpec::Online, params.online_experts));
        for j in 0..params.random_experts {
            experts.push(ExpertSpec::Random {
                seed: params.seed.wrapping_mul(1000).wrapping_add(j as u64),
            });
        }
        experts.extend(std::iter::repeat_n(ExpertSpec::Adversarial, params.adversarial_experts));
        Self::new(experts)
    }

    /// Every expert of `scripted`, in order.
    pub fn scripted(scripted: &ScriptedPredictions) -> Self {
        Self::new(
            (0..scripted.experts)
                .map(|k| ExpertSpec::Scripted { path: None, expert: k })
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(serde_json::from_str(&s)?)
    }

    /// Instantiates the listed experts (without the dummy). `scripted`
    /// supplies predictions for entries with no path; relative paths are
    /// resolved against `base_dir`.
    pub fn build(
        &self,
        instance: &CoveringInstance,
        scripted: Option<&ScriptedPredictions>,
        base_dir: Option<&Path>,
    ) -> Result<Vec<Box<dyn Expert>>> {
        let mut files: HashMap<PathBuf, ScriptedPredictions> = HashMap::new();
        let mut perfect: Option<Vec<f64>> = None;
        let mut out: Vec<Box<dyn Expert>> = Vec::with_capacity(self.experts.len());
        for spec in &self.experts {
            let e: Box<dyn Expert> = match spec {
                ExpertSpec::Perfect => {
                    if perfect.is_none() {
                        let sol = lp::solve_offline_opt(instance)?;
                        perfect = Some(sol.x.iter().map(|v| v.max(0.0)).collect());
                    }
                    Box::new(PerfectExpert::from_solution(perfect.clone().unwrap()))
                }
                ExpertSpec::Online => Box::new(OnlineExpert::new(&instance.costs)),
                ExpertSpec::Random { seed } => Box::new(RandomExpert::new(instance.n, *seed)),
                ExpertSpec::Adversarial => Box::new(AdversarialExpert::new(instance.n)),
                ExpertSpec::Dummy => Box::new(DummyExpert::new(&instance.costs)),
                ExpertSpec::Scripted { path, expert } => {
                    let preds = match path {
                        Some(p) => {
                            let full = match base_dir {
                                Some(d) if p.is_relative() => d.join(p),
                                _ => p.clone(),
                            };
                            if !files.contains_key(&full) {
                                let loaded = ScriptedPredictions::load(&full)?;
                                files.insert(full.clone(), loaded);
                            }
                            &files[&full]
                        }
                        None => scripted.ok_or_else(|| {
                            Error::Config("scripted expert without a prediction file".into())
                        })?,
                    };
                    if *expert >= preds.experts {
                        return Err(Error::Config(format!(
                            "scripted expert {} out of range ({} experts)",
                            expert, preds.experts
                        )));
                    }
                    Box::new(ScriptedExpert::new(
                        preds.expert_stream(*expert),
                        format!("scripted#{expert}"),
                    ))
                }
            };
            out.push(e);
        }
        Ok(out)
    }
}

/// Raw expert predictions over time, `steps[t][k][i]`, with the set of
/// experts still trusted at each step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionMatrix {
    pub n: usize,
    pub num_experts: usize,
    pub steps: Vec<Vec<Vec<f64>>>,
    pub active: Vec<Vec<bool>>,
}

impl PredictionMatrix {
    pub fn new(n: usize, num_experts: usize) -> Self {
        Self {
            n,
            num_experts,
            steps: Vec::new(),
            active: Vec::new(),
        }
    }

    /// All experts of a scripted stream, validated against `instance`.
    pub fn from_scripted(
        instance: &CoveringInstance,
        scripted: &ScriptedPredictions,
        tol: f64,
    ) -> Result<Self> {
        let mut pm = Self::new(instance.n, scripted.experts);
        for t in 0..instance.rows.len() {
            pm.push_and_validate(instance, scripted.steps[t].clone(), tol)?;
        }
        Ok(pm)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn get(&self, t: usize, k: usize) -> &[f64] {
        &self.steps[t][k]
    }

    /// Appends step `t = self.len()` and computes its active mask.
    pub fn push_and_validate(
        &mut self,
        instance: &CoveringInstance,
        predictions: Vec<Vec<f64>>,
        tol: f64,
    ) -> Result<Vec<bool>> {
        assert_eq!(predictions.len(), self.num_experts, "one prediction per expert");
        self.steps.push(predictions);
        let t = self.steps.len() - 1;
        match validate_stream(self, instance, t, tol) {
            Ok(mask) => {
                self.active.push(mask.clone());
                Ok(mask)
            }
            Err(e) => {
                self.active.push(vec![false; self.num_experts]);
                Err(e)
            }
        }
    }

    /// Experts still active after the last step.
    pub fn surviving(&self) -> Vec<usize> {
        match self.active.last() {
            Some(mask) => (0..self.num_experts).filter(|&k| mask[k]).collect(),
            None => (0..self.num_experts).collect(),
        }
    }

    /// Restriction to the given experts (all steps), keeping their masks.
    pub fn select(&self, experts: &[usize]) -> Self {
        Self {
            n: self.n,
            num_experts: experts.len(),
            steps: self
                .steps
                .iter()
                .map(|m| experts.iter().map(|&k| m[k].clone()).collect())
                .collect(),
            active: self
                .active
                .iter()
                .map(|m| experts.iter().map(|&k| m[k]).collect())
                .collect(),
        }
    }

    /// Final-step predictions of the surviving experts.
    pub fn final_predictions(&self) -> Vec<Vec<f64>> {
        match self.steps.last() {
            Some(last) => self.surviving().into_iter().map(|k| last[k].clone()).collect(),
            None => Vec::new(),
        }
    }
}

fn step_is_valid(
    pm: &PredictionMatrix,
    instance: &CoveringInstance,
    t: usize,
    k: usize,
    tol: f64,
) -> bool {
    let s = &pm.steps[t][k];
    if s.len() != instance.n || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return false;
    }
    if !instance.prefix_feasible(s, t, tol) {
        return false;
    }
    if t > 0 {
        let prev = &pm.steps[t - 1][k];
        if prev.len() == s.len()
            && s.iter()
                .zip(prev)
                .any(|(now, before)| *now < before - tol * before.abs().max(1.0))
        {
            return false;
        }
    }
    true
}

/// Active mask at step `t`: experts active at `t - 1` (all, at `t = 0`)
/// whose step-`t` prediction satisfies rows `0..=t` and dominates their
/// step `t - 1` prediction, both within relative tolerance `tol`.
pub fn validate_stream(
    pm: &PredictionMatrix,
    instance: &CoveringInstance,
    t: usize,
    tol: f64,
) -> Result<Vec<bool>> {
    let previous = if t == 0 {
        vec![true; pm.num_experts]
    } else {
        pm.active
            .get(t - 1)
            .cloned()
            .unwrap_or_else(|| vec![true; pm.num_experts])
    };
    let mask: Vec<bool> = (0..pm.num_experts)
        .map(|k| previous[k] && step_is_valid(pm, instance, t, k, tol))
        .collect();
    if !mask.iter().any(|&a| a) {
        return Err(Error::NoValidExperts { step: t });
    }
    Ok(mask)
}

/// Runs a set of experts over an instance without any algorithm attached.
pub fn collect_predictions(
    instance: &CoveringInstance,
    experts: &mut [Box<dyn Expert>],
    tol: f64,
) -> Result<PredictionMatrix> {
    let mut pm = PredictionMatrix::new(instance.n, experts.len());
    for (t, row) in instance.rows.iter().enumerate() {
        let preds = experts.iter_mut().map(|e| e.predict(t, row)).collect();
        pm.push_and_validate(instance, preds, tol)?;
    }
    Ok(pm)
}
