//! Online covering instances: `min c·x` subject to rows `a^t·x >= 1`
//! revealed one at a time, plus the generators used by the experiments.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Identifier of the PRNG stream behind [`gen_random`], stored in instance
/// metadata so a file records how it was produced.
pub const PRNG_ID: &str = "chacha8-rand0.8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringInstance {
    pub n: usize,
    pub costs: Vec<f64>,
    /// Constraint rows in arrival order.
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<InstanceMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub generator: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prng: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DimensionMismatch { row: Option<usize>, len: usize },
    NonpositiveCost { index: usize, value: f64 },
    InvalidCoefficient { row: usize, index: usize, value: f64 },
    AllZeroRow { row: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DimensionMismatch { row: None, len } => {
                write!(f, "cost vector has length {len}, expected n")
            }
            Violation::DimensionMismatch { row: Some(r), len } => {
                write!(f, "row {r} has length {len}, expected n")
            }
            Violation::NonpositiveCost { index, value } => {
                write!(f, "nonpositive cost c[{index}] = {value}")
            }
            Violation::InvalidCoefficient { row, index, value } => {
                write!(f, "invalid coefficient a[{row}][{index}] = {value}")
            }
            Violation::AllZeroRow { row } => write!(f, "all-zero row {row}"),
        }
    }
}

/// Outcome of [`CoveringInstance::validate`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

impl CoveringInstance {
    pub fn new(costs: Vec<f64>, rows: Vec<Vec<f64>>) -> Self {
        Self {
            n: costs.len(),
            costs,
            rows,
            meta: None,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cost_of(&self, x: &[f64]) -> f64 {
        self.costs.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> ValidityReport {
        let mut violations = Vec::new();
        if self.costs.len() != self.n {
            violations.push(Violation::DimensionMismatch {
                row: None,
                len: self.costs.len(),
            });
        }
        for (i, &c) in self.costs.iter().enumerate() {
            if !(c > 0.0 && c.is_finite()) {
                violations.push(Violation::NonpositiveCost { index: i, value: c });
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.n {
                violations.push(Violation::DimensionMismatch {
                    row: Some(r),
                    len: row.len(),
                });
                continue;
            }
            for (i, &a) in row.iter().enumerate() {
                if !(a >= 0.0 && a.is_finite()) {
                    violations.push(Violation::InvalidCoefficient {
                        row: r,
                        index: i,
                        value: a,
                    });
                }
            }
            if !row.iter().any(|&a| a > 0.0) {
                violations.push(Violation::AllZeroRow { row: r });
            }
        }
        ValidityReport { violations }
    }

    /// Validates and converts the first violation into an error.
    pub fn check(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidInstance(v.to_string())),
        }
    }

    /// `true` when `x` satisfies rows `0..=t` within relative tolerance `tol`.
    pub fn prefix_feasible(&self, x: &[f64], t: usize, tol: f64) -> bool {
        self.rows[..=t].iter().all(|a| dot(a, x) >= 1.0 - tol)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        inst.check()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?).map_err(|e| Error::io(path.as_ref(), e))
    }
}

pub(crate) fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a * x).sum()
}

/// Knobs of the random instance generator, one per column of the
/// experiment parameter table, plus the seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub variables: usize,
    pub constraints: usize,
    pub min_cost: u32,
    pub max_cost: u32,
    pub min_coeff: u32,
    pub max_coeff: u32,
    pub min_zeros: usize,
    pub max_zeros: usize,
    #[serde(default)]
    pub perfect_experts: usize,
    #[serde(default)]
    pub online_experts: usize,
    #[serde(default)]
    pub random_experts: usize,
    #[serde(default)]
    pub adversarial_experts: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorParams {
    /// Parameter sets of the four generated experiment instances (1-based).
    pub fn preset(instance: usize) -> Option<Self> {
        let p = |v, c, cmin, cmax, amin, amax, zmin, zmax, pe, oe, re, ae| GeneratorParams {
            variables: v,
            constraints: c,
            min_cost: cmin,
            max_cost: cmax,
            min_coeff: amin,
            max_coeff: amax,
            min_zeros: zmin,
            max_zeros: zmax,
            perfect_experts: pe,
            online_experts: oe,
            random_experts: re,
            adversarial_experts: ae,
            seed: 0,
        };
        match instance {
            1 => Some(p(10, 10, 1, 10, 1, 10, 0, 5, 1, 2, 1, 1)),
            2 => Some(p(10, 25, 10, 25, 10, 25, 1, 5, 0, 1, 1, 1)),
            3 => Some(p(44, 2, 1, 100, 1, 1, 11, 22, 0, 1, 11, 0)),
            4 => Some(p(30, 15, 1, 100, 1, 1, 5, 20, 2, 2, 0, 0)),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.variables == 0 || self.constraints == 0 {
            return bad("variable and constraint counts must be positive");
        }
        if self.min_cost == 0 {
            return bad("costs must be positive (min_cost >= 1)");
        }
        if self.min_cost > self.max_cost {
            return bad("min_cost > max_cost");
        }
        if self.min_coeff > self.max_coeff {
            return bad("min_coeff > max_coeff");
        }
        if self.max_coeff == 0 {
            return bad("max_coeff must be positive");
        }
        if self.min_zeros > self.max_zeros {
            return bad("min_zeros > max_zeros");
        }
        if self.max_zeros >= self.variables {
            return bad("max_zeros must be below the variable count");
        }
        Ok(())
    }

    pub fn num_experts(&self) -> usize {
        self.perfect_experts + self.online_experts + self.random_experts + self.adversarial_experts
    }
}

/// Random instance: integer costs and coefficients drawn uniformly from the
/// declared ranges, then a uniformly drawn number of positions per row
/// zeroed out. All-zero rows (possible only when `min_coeff == 0`) are
/// redrawn.
pub fn gen_random(params: &GeneratorParams) -> Result<CoveringInstance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.variables;
    let costs: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(params.min_cost..=params.max_cost) as f64)
        .collect();
    let mut rows = Vec::with_capacity(params.constraints);
    for _ in 0..params.constraints {
        let mut attempts = 0;
        let row = loop {
            let mut row: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(params.min_coeff..=params.max_coeff) as f64)
                .collect();
            let zeros = rng.gen_range(params.min_zeros..=params.max_zeros);
            for i in sample(&mut rng, n, zeros) {
                row[i] = 0.0;
            }
            if row.iter().any(|&a| a > 0.0) {
                break row;
            }
            attempts += 1;
            if attempts >= 1000 {
                return Err(Error::InvalidParams(
                    "could not draw a row with a positive coefficient".into(),
                ));
            }
        };
        rows.push(row);
    }
    let mut inst = CoveringInstance::new(costs, rows);
    inst.meta = Some(InstanceMeta {
        generator: "random".into(),
        params: serde_json::to_value(params)?,
        seed: Some(params.seed),
        prng: Some(PRNG_ID.into()),
    });
    Ok(inst)
}

/// Pathological family for multiplicative weights: unit costs, row `t`
/// (1-based) is `x_t + ... + x_n >= 1`.
pub fn gen_mwa_worst_case(n: usize) -> Result<CoveringInstance> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    let rows = (0..n)
        .map(|t| (0..n).map(|i| if i >= t { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut inst = CoveringInstance::new(vec![1.0; n], rows);
    inst.meta = Some(InstanceMeta {
        generator: "mwa-worst".into(),
        params: serde_json::json!({ "n": n }),
        seed: None,
        prng: None,
    });
    Ok(inst)
}

/// Per-step predictions of a fixed set of experts, indexed `[t][k][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPredictions {
    pub experts: usize,
    pub steps: Vec<Vec<Vec<f64>>>,
}

impl ScriptedPredictions {
    pub fn expert_stream(&self, k: usize) -> Vec<Vec<f64>> {
        self.steps.iter().map(|m| m[k].clone()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = serde_json::to_string(self)?;
        std::fs::write(path.as_ref(), s).map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Counterexample with `batches` batches of `experts - 1` constraints over
/// `batches * experts + 1` unit-cost variables.
///
/// Row `j` of batch `l` (both 0-based) covers variables
/// `l*K + j ..= l*K + K - 1` and the shared last variable `L*K`. Expert `e`
/// starts each batch on variable `l*K + e`; when its variable leaves the row
/// it moves to the smallest index still present. Previously used variables
/// stay at 1, and the shared variable is never suggested.
pub fn gen_anand_counterexample(
    experts: usize,
    batches: usize,
) -> Result<(CoveringInstance, ScriptedPredictions)> {
    if experts < 2 {
        return Err(Error::InvalidParams("expert count K must be at least 2".into()));
    }
    if batches == 0 {
        return Err(Error::InvalidParams("batch count L must be at least 1".into()));
    }
    let k = experts;
    let n = batches * k + 1;
    let shared = n - 1;
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    let mut current = vec![vec![0.0; n]; k];
    for l in 0..batches {
        let base = l * k;
        for j in 0..k - 1 {
            let mut row = vec![0.0; n];
            for a in row.iter_mut().take(base + k).skip(base + j) {
                *a = 1.0;
            }
            row[shared] = 1.0;
            rows.push(row);
            for (e, s) in current.iter_mut().enumerate() {
                s[base + e.max(j)] = 1.0;
            }
            steps.push(current.clone());
        }
    }
    let mut inst = CoveringInstance::new(vec![1.0; n], rows);
    inst.meta = Some(InstanceMeta {
        generator: "anand".into(),
        params: serde_json::json!({ "experts": experts, "batches": batches }),
        seed: None,
        prng: None,
    });
    Ok((inst, ScriptedPredictions { experts: k, steps }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_instance_is_valid() {
        let inst = CoveringInstance::new(vec![1.0], vec![vec![1.0]]);
        assert!(inst.validate().is_ok());
    }

    #[test]
    fn zero_row_and_cost_flagged() {
        let inst = CoveringInstance::new(vec![1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(inst.validate().first(), Some(&Violation::AllZeroRow { row: 1 }));
        assert_eq!(
            inst.validate().first().unwrap().to_string(),
            "all-zero row 1"
        );

        let inst = CoveringInstance::new(vec![0.0, 1.0], vec![vec![1.0, 1.0]]);
        assert!(matches!(
            inst.validate().first(),
            Some(Violation::NonpositiveCost { index: 0, .. })
        ));
    }

    #[test]
    fn negative_and_ragged_rows_flagged() {
        let inst = CoveringInstance::new(vec![1.0, 1.0], vec![vec![1.0, -1.0], vec![1.0]]);
        let r = inst.validate();
        assert_eq!(r.violations.len(), 2);
        assert!(matches!(r.violations[1], Violation::DimensionMismatch { row: Some(1), .. }));
    }

    #[test]
    fn preset_one_ranges() {
        let p = GeneratorParams::preset(1).unwrap();
        let inst = gen_random(&p).unwrap();
        assert_eq!(inst.n, 10);
        assert_eq!(inst.rows.len(), 10);
        assert!(inst.validate().is_ok());
        assert!(inst.costs.iter().all(|&c| (1.0..=10.0).contains(&c)));
        for row in &inst.rows {
            let zeros = row.iter().filter(|&&a| a == 0.0).count();
            assert!(zeros <= 5);
            assert!(row.iter().all(|&a| a == 0.0 || (1.0..=10.0).contains(&a)));
        }
    }

    #[test]
    fn degenerate_ranges() {
        let p = GeneratorParams {
            variables: 1,
            constraints: 1,
            min_cost: 1,
            max_cost: 1,
            min_coeff: 1,
            max_coeff: 1,
            min_zeros: 0,
            max_zeros: 0,
            perfect_experts: 0,
            online_experts: 0,
            random_experts: 0,
            adversarial_experts: 0,
            seed: 9,
        };
        let inst = gen_random(&p).unwrap();
        assert_eq!(inst.costs, vec![1.0]);
        assert_eq!(inst.rows, vec![vec![1.0]]);
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = GeneratorParams::preset(2).unwrap().with_seed(17);
        let a = gen_random(&p).unwrap().to_json().unwrap();
        let b = gen_random(&p).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let c = gen_random(&p.clone().with_seed(18)).unwrap().to_json().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = GeneratorParams::preset(1).unwrap();
        p.max_zeros = 10;
        assert!(gen_random(&p).is_err());
        let mut p = GeneratorParams::preset(1).unwrap();
        p.min_cost = 11;
        assert!(gen_random(&p).is_err());
    }

    #[test]
    fn mwa_worst_case_shape() {
        let inst = gen_mwa_worst_case(3).unwrap();
        assert_eq!(
            inst.rows,
            vec![vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0]]
        );
        assert_eq!(inst.costs, vec![1.0; 3]);
        assert_eq!(gen_mwa_worst_case(1).unwrap().rows, vec![vec![1.0]]);
        assert!(gen_mwa_worst_case(0).is_err());
    }

    #[test]
    fn anand_small_cases() {
        let (inst, preds) = gen_anand_counterexample(3, 1).unwrap();
        assert_eq!(inst.n, 4);
        assert_eq!(
            inst.rows,
            vec![vec![1.0, 1.0, 1.0, 1.0], vec![0.0, 1.0, 1.0, 1.0]]
        );
        let first = &preds.steps[0];
        for (k, s) in first.iter().enumerate() {
            let expect: Vec<f64> = (0..4).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
            assert_eq!(s, &expect);
        }

        let (inst, preds) = gen_anand_counterexample(3, 2).unwrap();
        assert_eq!(inst.n, 7);
        assert_eq!(inst.rows.len(), 4);
        assert_eq!(inst.rows[2], vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(preds.steps.len(), 4);
        assert!(gen_anand_counterexample(1, 3).is_err());
    }

    #[test]
    fn anand_last_expert_and_shared_variable() {
        for (k, l) in [(2, 1), (3, 2), (5, 4)] {
            let (inst, preds) = gen_anand_counterexample(k, l).unwrap();
            let last = &preds.steps.last().unwrap()[k - 1];
            for (i, &v) in last.iter().enumerate() {
                let is_batch_end = i < l * k && (i + 1) % k == 0;
                assert_eq!(v, if is_batch_end { 1.0 } else { 0.0 }, "K={k} L={l} i={i}");
            }
            for step in &preds.steps {
                for s in step {
                    assert_eq!(s[inst.n - 1], 0.0);
                }
            }
        }
    }
}
