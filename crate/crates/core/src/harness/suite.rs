//! Experiment suites: a JSON list of runs executed concurrently.
//!
//! ```json
//! { "runs": [
//!     { "id": "worst-10", "family": "mwa-worst", "n": 10 },
//!     { "family": "random", "preset": 1, "seed": 3, "algos": ["alg", "mwa"] },
//!     { "family": "anand", "experts": 5, "batches": 4 },
//!     { "family": "file", "instance": "inst.json", "roster": "roster.json" }
//! ] }
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AlgoKind, ExperimentConfig, HarnessConfig, RunReport};
use crate::error::{Error, Result};
use crate::experts::Roster;
use crate::instance::{
    gen_anand_counterexample, gen_mwa_worst_case, gen_random, CoveringInstance, GeneratorParams,
    ScriptedPredictions,
};

/// Where a run's instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Source {
    /// Random instance from explicit parameters or a numbered preset; `seed`
    /// overrides the parameters' seed.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<GeneratorParams>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    MwaWorst { n: usize },
    Anand { experts: usize, batches: usize },
    File {
        instance: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        predictions: Option<PathBuf>,
    },
}

impl Source {
    /// Builds the instance (and scripted predictions, if any); relative
    /// paths are resolved against `base_dir`.
    pub fn generate(&self, base_dir: &Path) -> Result<(CoveringInstance, Option<ScriptedPredictions>)> {
        match self {
            Source::Random { preset, params, seed } => {
                let mut p = match (params, preset) {
                    (Some(p), _) => p.clone(),
                    (None, Some(i)) => GeneratorParams::preset(*i)
                        .ok_or_else(|| Error::Config(format!("no preset {i} (expected 1 to 4)")))?,
                    (None, None) => return Err(Error::Config("random run needs `params` or `preset`".into())),
                };
                if let Some(s) = seed {
                    p.seed = *s;
                }
                Ok((gen_random(&p)?, None))
            }
            Source::MwaWorst { n } => Ok((gen_mwa_worst_case(*n)?, None)),
            Source::Anand { experts, batches } => {
                let (inst, preds) = gen_anand_counterexample(*experts, *batches)?;
                Ok((inst, Some(preds)))
            }
            Source::File { instance, predictions } => {
                let inst = CoveringInstance::load(base_dir.join(instance))?;
                let preds = predictions
                    .as_ref()
                    .map(|p| ScriptedPredictions::load(base_dir.join(p)))
                    .transpose()?;
                Ok((inst, preds))
            }
        }
    }

    fn default_id(&self) -> String {
        match self {
            Source::Random { preset, params, seed } => {
                let seed = seed.or(params.as_ref().map(|p| p.seed)).unwrap_or(0);
                match preset {
                    Some(i) if params.is_none() => format!("random-p{i}-s{seed}"),
                    _ => format!("random-s{seed}"),
                }
            }
            Source::MwaWorst { n } => format!("mwa-worst-{n}"),
            Source::Anand { experts, batches } => format!("anand-k{experts}-l{batches}"),
            Source::File { instance, .. } => instance
                .file_stem()
                .map_or_else(|| "file".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

/// A roster file or an inline roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RosterRef {
    Path(PathBuf),
    Inline(Roster),
}

fn all_algos() -> Vec<AlgoKind> {
    AlgoKind::ALL.to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roster: Option<RosterRef>,
    #[serde(default = "all_algos")]
    pub algos: Vec<AlgoKind>,
    #[serde(default = "yes")]
    pub benchmarks: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Suite {
    pub runs: Vec<SuiteRun>,
}

impl Suite {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn experiments(&self, base_dir: &Path) -> Result<Vec<ExperimentConfig>> {
        self.runs
            .iter()
            .map(|run| {
                let (inst, preds) = run.source.generate(base_dir)?;
                let id = run.id.clone().unwrap_or_else(|| run.source.default_id());
                let mut cfg = ExperimentConfig::new(id, inst, preds).with_algos(run.algos.clone());
                cfg.benchmarks = run.benchmarks;
                cfg.base_dir = Some(base_dir.to_path_buf());
                match &run.roster {
                    Some(RosterRef::Path(p)) => cfg.roster = Roster::load(base_dir.join(p))?,
                    Some(RosterRef::Inline(r)) => cfg.roster = r.clone(),
                    None => {}
                }
                Ok(cfg)
            })
            .collect()
    }
}

/// Runs the experiments in parallel; results keep the input order.
pub fn run_all(experiments: &[ExperimentConfig], harness: &HarnessConfig) -> Vec<Result<RunReport>> {
    experiments
        .par_iter()
        .map(|e| super::run_experiment(e, harness))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_suite() {
        let s: Suite = serde_json::from_str(
            r#"{ "runs": [
                { "id": "w", "family": "mwa-worst", "n": 3 },
                { "family": "random", "preset": 1, "seed": 3, "algos": ["alg", "mwa"] },
                { "family": "anand", "experts": 3, "batches": 1, "roster": { "experts": [{"type": "scripted", "expert": 0}] } }
            ] }"#,
        )
        .unwrap();
        assert_eq!(s.runs.len(), 3);
        assert_eq!(s.runs[0].algos, AlgoKind::ALL.to_vec());
        assert_eq!(s.runs[1].source.default_id(), "random-p1-s3");
        assert!(matches!(s.runs[2].roster, Some(RosterRef::Inline(_))));
        let exps = s.experiments(Path::new(".")).unwrap();
        assert_eq!(exps[0].id, "w");
        assert_eq!(exps[2].roster.experts.len(), 1);
    }

    #[test]
    fn random_needs_params() {
        let src = Source::Random { preset: None, params: None, seed: None };
        assert!(src.generate(Path::new(".")).is_err());
    }
}
