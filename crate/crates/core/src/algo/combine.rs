//! Two-layer combination: the online algorithm run over two online
//! algorithms used as experts.

use super::{AlgoConfig, AlgoRun, OnlineAlgorithm};
use crate::error::Result;
use crate::experts::Expert;
use crate::instance::CoveringInstance;

/// Exposes a running [`OnlineAlgorithm`] through the expert interface. If a
/// step fails the expert emits NaN from then on, so validation drops it.
pub struct AlgorithmExpert {
    inner: OnlineAlgorithm,
    failed: bool,
    label: String,
}

impl AlgorithmExpert {
    pub fn new(inner: OnlineAlgorithm, label: impl Into<String>) -> Self {
        Self {
            inner,
            failed: false,
            label: label.into(),
        }
    }

    pub fn inner(&self) -> &OnlineAlgorithm {
        &self.inner
    }
}

impl Expert for AlgorithmExpert {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn predict(&mut self, _t: usize, row: &[f64]) -> Vec<f64> {
        let n = row.len();
        if !self.failed {
            match self.inner.step(row) {
                Ok(x) => return x.to_vec(),
                Err(_) => self.failed = true,
            }
        }
        vec![f64::NAN; n]
    }
}

/// Runs the algorithm with `first` and `second` as its two experts.
pub fn combine(
    instance: &CoveringInstance,
    first: Box<dyn Expert>,
    second: Box<dyn Expert>,
    config: AlgoConfig,
) -> Result<AlgoRun> {
    OnlineAlgorithm::run(instance, vec![first, second], config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::{OnlineExpert, PerfectExpert};
    use crate::instance::gen_mwa_worst_case;

    #[test]
    fn combined_with_itself() {
        let inst = gen_mwa_worst_case(4).unwrap();
        let make = || {
            let experts: Vec<Box<dyn Expert>> = vec![Box::new(PerfectExpert::new(&inst).unwrap())];
            OnlineAlgorithm::new(&inst.costs, experts, AlgoConfig::default())
        };
        let base = OnlineAlgorithm::run(
            &inst,
            vec![Box::new(PerfectExpert::new(&inst).unwrap())],
            AlgoConfig::default(),
        )
        .unwrap();
        let run = combine(
            &inst,
            Box::new(AlgorithmExpert::new(make(), "alg-a")),
            Box::new(AlgorithmExpert::new(make(), "alg-b")),
            AlgoConfig::default(),
        )
        .unwrap();
        assert!(run.predictions.surviving().len() == 3);
        assert!(run.cost <= 4.0 * base.cost);
    }

    #[test]
    fn failing_inner_algorithm_is_dropped() {
        let inst = gen_mwa_worst_case(3).unwrap();
        // An inner run with no experts at all fails on its first step.
        let broken = OnlineAlgorithm::new(
            &inst.costs,
            Vec::new(),
            AlgoConfig {
                dummy: false,
                ..Default::default()
            },
        );
        let run = combine(
            &inst,
            Box::new(AlgorithmExpert::new(broken, "broken")),
            Box::new(OnlineExpert::new(&inst.costs)),
            AlgoConfig::default(),
        )
        .unwrap();
        assert_eq!(run.predictions.surviving(), vec![1, 2]);
    }
}
