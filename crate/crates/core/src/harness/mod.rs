//! Experiment orchestration and end-to-end checks.
//!
//! [`run_experiment`] runs the requested algorithms on one instance, solves
//! the benchmark programs over the real experts (the dummy is excluded) and
//! collects [`CheckOutcome`]s into a [`RunReport`].

pub mod certificate;
pub mod report;
pub mod solver;
pub mod suite;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::algo::{combine, AlgoConfig, AlgoRun, AlgorithmExpert, OnlineAlgorithm};
use crate::baselines::{anand_finalize, anand_step, average_of_experts, run_mwa, AnandState};
use crate::error::{Error, Result};
use crate::experts::{collect_predictions, ExpertSpec, OnlineExpert, PredictionMatrix, Roster};
use crate::instance::{CoveringInstance, GeneratorParams, ScriptedPredictions};
use crate::lp;

pub use certificate::{check_beta, check_ratio, CheckOutcome, CheckStatus, DualCertificate};
pub use report::{emit_table, Table};

/// Tolerances and constants of the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub algo: AlgoConfig,
    /// Constant `C` of the ratio check.
    pub ratio_c: f64,
    pub cert_tol: f64,
    pub prefix_tol: f64,
    pub cost_tol: f64,
    pub sandwich_tol: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            algo: AlgoConfig::default(),
            ratio_c: 4.0,
            cert_tol: 1e-7,
            prefix_tol: 1e-7,
            cost_tol: 1e-9,
            sandwich_tol: 1e-6,
        }
    }
}

/// Environment variables read by [`HarnessConfig::from_env`].
pub const ENV_OVERRIDES: [&str; 5] = [
    "COVERING_GAP_TOL",
    "COVERING_MAX_FW_ITERS",
    "COVERING_EXPERT_TOL",
    "COVERING_RATIO_C",
    "COVERING_CERT_TOL",
];

impl HarnessConfig {
    /// Defaults with any of [`ENV_OVERRIDES`] applied.
    pub fn from_env() -> Result<Self> {
        Self::with_overrides(|k| std::env::var(k).ok())
    }

    pub fn with_overrides(lookup: impl Fn(&str) -> Option<String>) -> Result<Self> {
        fn parse<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        let mut cfg = Self::default();
        if let Some(v) = lookup("COVERING_GAP_TOL") {
            cfg.algo.fw.gap_tol = parse("COVERING_GAP_TOL", v)?;
        }
        if let Some(v) = lookup("COVERING_MAX_FW_ITERS") {
            cfg.algo.fw.max_iters = parse("COVERING_MAX_FW_ITERS", v)?;
        }
        if let Some(v) = lookup("COVERING_EXPERT_TOL") {
            cfg.algo.expert_tol = parse("COVERING_EXPERT_TOL", v)?;
        }
        if let Some(v) = lookup("COVERING_RATIO_C") {
            cfg.ratio_c = parse("COVERING_RATIO_C", v)?;
        }
        if let Some(v) = lookup("COVERING_CERT_TOL") {
            cfg.cert_tol = parse("COVERING_CERT_TOL", v)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    Alg,
    Mwa,
    Anand,
    Combined,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 4] = [AlgoKind::Alg, AlgoKind::Mwa, AlgoKind::Anand, AlgoKind::Combined];

    pub fn name(self) -> &'static str {
        match self {
            AlgoKind::Alg => "alg",
            AlgoKind::Mwa => "mwa",
            AlgoKind::Anand => "anand",
            AlgoKind::Combined => "combined",
        }
    }
}

impl std::str::FromStr for AlgoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgoKind::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?} (expected alg, mwa, anand or combined)")))
    }
}

/// Parses a comma-separated algorithm list; an empty string gives an empty
/// list.
pub fn parse_algos(s: &str) -> Result<Vec<AlgoKind>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Roster used when none is given: the instance's own expert mix for random
/// instances, one perfect expert plus `n - 1` adversaries for the MWA worst
/// case, and the scripted experts for the Anand construction.
pub fn default_roster(instance: &CoveringInstance, scripted: Option<&ScriptedPredictions>) -> Roster {
    if let Some(s) = scripted {
        return Roster::scripted(s);
    }
    let meta = instance.meta.as_ref();
    match meta.map(|m| m.generator.as_str()) {
        Some("random") => {
            let params: Option<GeneratorParams> = meta.and_then(|m| serde_json::from_value(m.params.clone()).ok());
            match params {
                Some(p) => Roster::from_params(&p),
                None => Roster::new(vec![ExpertSpec::Perfect]),
            }
        }
        Some("mwa-worst") => {
            let mut experts = vec![ExpertSpec::Perfect];
            experts.extend(std::iter::repeat_n(ExpertSpec::Adversarial, instance.n.saturating_sub(1)));
            Roster::new(experts)
        }
        _ => Roster::new(vec![ExpertSpec::Perfect]),
    }
}

/// One experiment: an instance, its experts and the algorithms to run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub id: String,
    pub instance: CoveringInstance,
    pub roster: Roster,
    pub scripted: Option<ScriptedPredictions>,
    /// Resolves relative prediction paths in the roster.
    pub base_dir: Option<PathBuf>,
    pub algos: Vec<AlgoKind>,
    /// Solve the benchmark programs.
    pub benchmarks: bool,
}

impl ExperimentConfig {
    pub fn new(id: impl Into<String>, instance: CoveringInstance, scripted: Option<ScriptedPredictions>) -> Self {
        let roster = default_roster(&instance, scripted.as_ref());
        Self {
            id: id.into(),
            instance,
            roster,
            scripted,
            base_dir: None,
            algos: AlgoKind::ALL.to_vec(),
            benchmarks: true,
        }
    }

    pub fn with_algos(mut self, algos: Vec<AlgoKind>) -> Self {
        self.algos = algos;
        self
    }

    pub fn with_roster(mut self, roster: Roster) -> Self {
        self.roster = roster;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlgoCosts {
    pub alg: Option<f64>,
    pub mwa: Option<f64>,
    pub anand: Option<f64>,
    pub combined: Option<f64>,
    pub avg_experts: Option<f64>,
    pub best_expert: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkValues {
    pub offline_opt: Option<f64>,
    pub lincomb: Option<f64>,
    pub relaxation: Option<f64>,
    pub dual: Option<f64>,
    pub dynamic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertCost {
    pub label: String,
    pub cost: f64,
    /// Still active after the last step.
    pub survived: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub id: String,
    pub generator: Option<String>,
    pub n: usize,
    pub rows: usize,
    /// Active experts at the end of the algorithm run, dummy included.
    pub k_effective: Option<usize>,
    pub rho: Option<f64>,
    pub costs: AlgoCosts,
    pub benchmarks: BenchmarkValues,
    pub expert_costs: Vec<ExpertCost>,
    pub ratio_constant: f64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| c.failed())
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Re-derives the checks that depend only on reported numbers (sandwich,
    /// ratio) and confirms the stored outcome flags agree with `passed`.
    pub fn verify(&self, cfg: &HarnessConfig) -> Vec<CheckOutcome> {
        let mut out = vec![check_sandwich(&self.benchmarks, self.costs.best_expert, cfg.sandwich_tol)];
        if let (Some(alg), Some(lc), Some(k)) = (self.costs.alg, self.benchmarks.lincomb, self.k_effective) {
            out.push(check_ratio(alg, lc, k, self.rho.unwrap_or(1.0), self.ratio_constant));
        }
        let stored = !self.checks.iter().any(CheckOutcome::failed);
        out.push(CheckOutcome::new(
            "report-consistency",
            stored == self.passed,
            0.0,
            format!("passed = {}, stored checks say {}", self.passed, stored),
        ));
        out
    }
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: RunReport,
    pub alg: Option<AlgoRun>,
    pub combined: Option<AlgoRun>,
    /// Per-step MWA solutions.
    pub mwa: Option<Vec<Vec<f64>>>,
    /// Per-step Anand solutions, doubled.
    pub anand: Option<Vec<Vec<f64>>>,
}

pub fn run_experiment(config: &ExperimentConfig, harness: &HarnessConfig) -> Result<RunReport> {
    execute(config, harness).map(|o| o.report)
}

/// Monotonicity, prefix feasibility after every step and agreement of
/// `reported_cost` with `Σ c_i x_i^T`, for the per-step solutions `xs`.
pub fn check_online(
    name: &str,
    instance: &CoveringInstance,
    xs: &[Vec<f64>],
    reported_cost: f64,
    harness: &HarnessConfig,
) -> CheckOutcome {
    let mut monotone = 0.0f64;
    let mut infeasible = 0.0f64;
    let mut first_bad: Option<String> = None;
    for (t, x) in xs.iter().enumerate() {
        if t > 0 {
            for (now, was) in x.iter().zip(&xs[t - 1]) {
                monotone = monotone.max(was - now);
            }
        }
        for (r, row) in instance.rows.iter().take(t + 1).enumerate() {
            let v: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
            let short = 1.0 - v;
            if short > harness.prefix_tol && first_bad.is_none() {
                first_bad = Some(format!("row {r} short by {short:.3e} after step {t}"));
            }
            infeasible = infeasible.max(short);
        }
    }
    let recomputed = xs.last().map_or(0.0, |x| instance.cost_of(x));
    let drift = (recomputed - reported_cost).abs();
    let pass = monotone <= 0.0 && infeasible <= harness.prefix_tol && drift <= harness.cost_tol;
    let mut detail = format!(
        "{} steps; max decrease {monotone:.3e}, max shortfall {:.3e}, cost drift {drift:.3e}",
        xs.len(),
        infeasible.max(0.0)
    );
    if let Some(b) = first_bad {
        detail.push_str(&format!("; {b}"));
    }
    CheckOutcome::new(name, pass, monotone.max(infeasible).max(drift).max(0.0), detail)
}

/// `OPT <= relaxation = dual <= LIN-COMB <= best expert` and
/// `DYNAMIC <= LIN-COMB`, each within `tol` (relative to the larger side,
/// floored at 1).
pub fn check_sandwich(b: &BenchmarkValues, best_expert: Option<f64>, tol: f64) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let mut le = |label: &str, lo: Option<f64>, hi: Option<f64>| {
        if let (Some(lo), Some(hi)) = (lo, hi) {
            let v = (lo - hi) / hi.abs().max(lo.abs()).max(1.0);
            worst = worst.max(v);
            if v > tol {
                failed.push(format!("{label}: {lo:.9} > {hi:.9}"));
            }
        }
    };
    le("opt <= relaxation", b.offline_opt, b.relaxation);
    le("relaxation <= dual", b.relaxation, b.dual);
    le("dual <= relaxation", b.dual, b.relaxation);
    le("relaxation <= lincomb", b.relaxation, b.lincomb);
    le("lincomb <= best expert", b.lincomb, best_expert);
    le("dynamic <= lincomb", b.dynamic, b.lincomb);
    le("opt <= dynamic", b.offline_opt, b.dynamic);
    let detail = if failed.is_empty() {
        format!("all orderings hold (worst relative excess {worst:.3e})")
    } else {
        failed.join("; ")
    };
    CheckOutcome::new("sandwich", failed.is_empty(), worst.max(0.0), detail)
}

/// Lower bounds `(variable, bound)` on the doubled Anand solution of the
/// `K`-expert, `L`-batch construction: within each batch the `j`-th
/// variable (0-based) is at least `1/(K - j)` for `j < K - 1` and the last
/// one at least `1/K`.
pub fn anand_batch_bounds(experts: usize, batches: usize) -> Vec<(usize, f64)> {
    let k = experts;
    (0..batches)
        .flat_map(|l| {
            (0..k).map(move |j| {
                let b = if j + 1 < k { 1.0 / (k - j) as f64 } else { 1.0 / k as f64 };
                (l * k + j, b)
            })
        })
        .collect()
}

/// Checks the batch bounds on the doubled solution and, separately, the
/// halved bounds on the solution before doubling.
pub fn check_anand_bounds(doubled: &[f64], experts: usize, batches: usize, slack: f64) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut at = None;
    for (i, b) in anand_batch_bounds(experts, batches) {
        let post = b - doubled[i];
        let pre = b / 2.0 - doubled[i] / 2.0;
        let v = post.max(pre);
        if v > worst {
            worst = v;
            at = Some((i, b));
        }
    }
    let pass = worst <= slack;
    let detail = match at {
        Some((i, b)) if !pass => format!("x[{i}] = {:.6} below bound {b:.6}", doubled[i]),
        _ => format!("all {} bounds hold (K = {experts}, L = {batches})", experts * batches),
    };
    CheckOutcome::new("anand-bounds", pass, worst, detail)
}

fn real_experts(run: &AlgoRun) -> Vec<usize> {
    let real = run.predictions.num_experts - usize::from(run.dummy);
    run.predictions.surviving().into_iter().filter(|&k| k < real).collect()
}

fn fw_check(name: &str, run: &AlgoRun, tol: f64) -> CheckOutcome {
    let worst = run.trace.iter().map(|r| r.fw_gap).fold(0.0, f64::max);
    let iters = run.trace.iter().map(|r| r.fw_iters).max().unwrap_or(0);
    CheckOutcome::new(
        name,
        worst <= tol,
        (worst - tol).max(0.0),
        format!("max gap {worst:.3e} (tol {tol:.0e}), max iterations {iters}"),
    )
}

/// Runs everything requested by `config`.
pub fn execute(config: &ExperimentConfig, harness: &HarnessConfig) -> Result<ExperimentOutput> {
    let inst = &config.instance;
    inst.check()?;
    let scripted = config.scripted.as_ref();
    let base = config.base_dir.as_deref();
    let wants = |a: AlgoKind| config.algos.contains(&a);
    let algo_cfg = AlgoConfig {
        dummy: config.roster.dummy,
        ..harness.algo
    };

    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut costs = AlgoCosts::default();
    let mut benchmarks = BenchmarkValues::default();

    // Real experts alone, for the benchmarks and the expert-based baselines.
    let mut experts = config.roster.build(inst, scripted, base)?;
    let labels: Vec<String> = experts.iter().map(|e| e.label()).collect();
    let needs_experts = config.benchmarks || wants(AlgoKind::Anand) || !config.algos.is_empty();
    let pm: Option<PredictionMatrix> = if needs_experts && !experts.is_empty() {
        Some(collect_predictions(inst, &mut experts, harness.algo.expert_tol)?)
    } else {
        None
    };
    let mut expert_costs = Vec::new();
    if let Some(pm) = &pm {
        let surviving = pm.surviving();
        if surviving.len() < pm.num_experts {
            notes.push(format!(
                "{} of {} experts dropped by validation",
                pm.num_experts - surviving.len(),
                pm.num_experts
            ));
        }
        if let Some(last) = pm.steps.last() {
            for (k, s) in last.iter().enumerate() {
                expert_costs.push(ExpertCost {
                    label: labels[k].clone(),
                    cost: inst.cost_of(s),
                    survived: surviving.contains(&k),
                });
            }
        }
        let finals = pm.final_predictions();
        if !finals.is_empty() {
            costs.avg_experts = Some(average_of_experts(&finals, &inst.costs));
        }
        costs.best_expert = expert_costs
            .iter()
            .filter(|e| e.survived)
            .map(|e| e.cost)
            .min_by(f64::total_cmp);
    }

    let mut out = ExperimentOutput {
        report: RunReport {
            id: config.id.clone(),
            generator: inst.meta.as_ref().map(|m| m.generator.clone()),
            n: inst.n,
            rows: inst.rows.len(),
            k_effective: None,
            rho: None,
            costs: AlgoCosts::default(),
            benchmarks: BenchmarkValues::default(),
            expert_costs,
            ratio_constant: harness.ratio_c,
            checks: Vec::new(),
            passed: false,
            notes: Vec::new(),
        },
        alg: None,
        combined: None,
        mwa: None,
        anand: None,
    };

    if config.benchmarks {
        benchmarks.offline_opt = Some(lp::solve_offline_opt(inst)?.value()?);
        if let Some(pm) = &pm {
            let (p, _) = lp::build_lincomb_lp(inst, pm);
            benchmarks.lincomb = Some(lp::solve_lp(&p)?.value()?);
            let (p, _) = lp::build_relaxation_lp(inst, pm);
            benchmarks.relaxation = Some(lp::solve_lp(&p)?.value()?);
            let (p, _) = lp::build_dual_lp(inst, pm);
            benchmarks.dual = Some(lp::solve_lp(&p)?.value()?);
            benchmarks.dynamic = Some(lp::solve_dynamic(inst, pm)?.value()?);
        }
        checks.push(check_sandwich(&benchmarks, costs.best_expert, harness.sandwich_tol));
    }

    if wants(AlgoKind::Alg) {
        let run = OnlineAlgorithm::run(inst, config.roster.build(inst, scripted, base)?, algo_cfg)?;
        let xs: Vec<Vec<f64>> = run.trace.iter().map(|r| r.x.clone()).collect();
        checks.push(check_online("online/alg", inst, &xs, run.cost, harness));
        checks.push(fw_check("fw-gap/alg", &run, harness.algo.fw.gap_tol));
        checks.extend(solver::check_step_programs(
            "alg",
            inst,
            &run,
            &harness.algo.fw,
            &solver::SolverTolerances {
                gap: harness.algo.fw.gap_tol,
                ..Default::default()
            },
        )?);
        let capped = run.trace.iter().filter(|r| r.cap_active).count();
        if capped > 0 {
            notes.push(format!("weight cap active on {capped} step(s)"));
        }
        let real = real_experts(&run);
        if real.len() + usize::from(run.dummy) < run.predictions.num_experts {
            notes.push(format!(
                "algorithm ended with {} of {} real experts",
                real.len(),
                run.predictions.num_experts - usize::from(run.dummy)
            ));
        }
        let k = run.effective_k();
        let rho = run.rho();
        checks.push(check_beta(&run, &inst.costs, harness.cert_tol));
        if let Some(lc) = benchmarks.lincomb {
            checks.push(check_ratio(run.cost, lc, k, rho.unwrap_or(1.0), harness.ratio_c));
        }
        costs.alg = Some(run.cost);
        out.report.k_effective = Some(k);
        out.report.rho = rho;
        out.alg = Some(run);
    }

    if wants(AlgoKind::Mwa) {
        let trace = run_mwa(inst);
        let xs: Vec<Vec<f64>> = trace.iter().map(|s| s.x.clone()).collect();
        let cost = trace.last().map_or(0.0, |s| s.cost(&inst.costs));
        checks.push(check_online("online/mwa", inst, &xs, cost, harness));
        costs.mwa = Some(cost);
        out.mwa = Some(xs);
    }

    if wants(AlgoKind::Anand) {
        match &pm {
            Some(pm) => {
                let mut state = AnandState::new(inst.n);
                let mut xs = Vec::with_capacity(inst.rows.len());
                for (t, row) in inst.rows.iter().enumerate() {
                    let active: Vec<Vec<f64>> = (0..pm.num_experts)
                        .filter(|&k| pm.active[t][k])
                        .map(|k| pm.get(t, k).to_vec())
                        .collect();
                    anand_step(&mut state, row, &inst.costs, &active)?;
                    xs.push(anand_finalize(&state));
                }
                let cost = xs.last().map_or(0.0, |x| inst.cost_of(x));
                checks.push(check_online("online/anand", inst, &xs, cost, harness));
                if let Some(m) = inst.meta.as_ref().filter(|m| m.generator == "anand") {
                    let k = m.params.get("experts").and_then(|v| v.as_u64());
                    let l = m.params.get("batches").and_then(|v| v.as_u64());
                    if let (Some(k), Some(l), Some(x)) = (k, l, xs.last()) {
                        checks.push(check_anand_bounds(x, k as usize, l as usize, 1e-6));
                    }
                }
                costs.anand = Some(cost);
                out.anand = Some(xs);
            }
            None => notes.push("anand skipped: no experts".into()),
        }
    }

    if wants(AlgoKind::Combined) {
        let inner = OnlineAlgorithm::new(&inst.costs, config.roster.build(inst, scripted, base)?, algo_cfg);
        let run = combine(
            inst,
            Box::new(AlgorithmExpert::new(inner, "alg")),
            Box::new(OnlineExpert::new(&inst.costs)),
            harness.algo,
        )?;
        let xs: Vec<Vec<f64>> = run.trace.iter().map(|r| r.x.clone()).collect();
        checks.push(check_online("online/combined", inst, &xs, run.cost, harness));
        checks.push(fw_check("fw-gap/combined", &run, harness.algo.fw.gap_tol));
        if real_experts(&run).len() < 2 {
            notes.push("combined run lost one of its two experts".into());
        }
        costs.combined = Some(run.cost);
        out.combined = Some(run);
    }

    out.report.passed = !checks.iter().any(CheckOutcome::failed);
    out.report.costs = costs;
    out.report.benchmarks = benchmarks;
    out.report.checks = checks;
    out.report.notes = notes;
    Ok(out)
}
