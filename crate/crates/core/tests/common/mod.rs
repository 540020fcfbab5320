#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use online_covering::instance::CoveringInstance;
use online_covering::lp::{LinearProgram, Relation, Sense};
use online_covering::preprocess::Preprocessor;

/// Optimum of a bounded LP by enumerating every basic solution: all choices
/// of `n` linearly independent tight hyperplanes (rows or bounds).
/// `None` when no vertex is feasible.
pub fn brute_force(p: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = p.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &p.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        planes.push((a, r.rhs));
    }
    for j in 0..n {
        for b in [p.lower[j], p.upper[j]] {
            assert!(b.is_finite(), "brute force needs finite bounds");
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a, b));
        }
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-9;
        (0..n).all(|j| x[j] >= p.lower[j] - tol && x[j] <= p.upper[j] + tol)
            && p.rows.iter().all(|r| {
                let v = r.activity(x);
                let t = tol * (1.0 + r.rhs.abs());
                match r.relation {
                    Relation::Le => v <= r.rhs + t,
                    Relation::Ge => v >= r.rhs - t,
                    Relation::Eq => (v - r.rhs).abs() <= t,
                }
            })
    };

    let all: Vec<usize> = (0..planes.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = Vec::with_capacity(n);
    let mut visit = |set: &[usize]| {
        let m = DMatrix::from_fn(n, n, |r, c| planes[set[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[set[r]].1);
        let Some(x) = m.clone().lu().solve(&b) else { return };
        if (&m * &x - &b).amax() > 1e-9 {
            return;
        }
        let x: Vec<f64> = x.iter().copied().collect();
        if !feasible(&x) {
            return;
        }
        let v = p.objective_value(&x);
        let better = match (&best, p.sense) {
            (None, _) => true,
            (Some((b, _)), Sense::Minimize) => v < *b,
            (Some((b, _)), Sense::Maximize) => v > *b,
        };
        if better {
            best = Some((v, x));
        }
    };
    combinations(&all, n, 0, &mut pick, &mut visit);
    best
}

fn combinations(items: &[usize], k: usize, from: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in from..items.len() {
        if items.len() - i < k - pick.len() {
            break;
        }
        pick.push(items[i]);
        combinations(items, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Small LP with integer data and finite bounds. Half of them are built
/// around a point that satisfies every row.
pub fn random_small_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=6);
    let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let mut p = LinearProgram::new(sense, (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect());
    for j in 0..n {
        let lo = rng.gen_range(-3..=0) as f64;
        p.set_bounds(j, lo, lo + rng.gen_range(1..=5) as f64);
    }
    let anchor: Option<Vec<f64>> = rng
        .gen_bool(0.5)
        .then(|| (0..n).map(|j| rng.gen_range(p.lower[j]..=p.upper[j])).collect());
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            let v = rng.gen_range(-4..=4) as f64;
            if v != 0.0 && rng.gen_bool(0.7) {
                coeffs.push((j, v));
            }
        }
        let relation = match rng.gen_range(0..5) {
            0 => Relation::Eq,
            1 | 2 => Relation::Le,
            _ => Relation::Ge,
        };
        let rhs = match &anchor {
            Some(x) => {
                let v: f64 = coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                match relation {
                    Relation::Eq => v,
                    Relation::Le => v + rng.gen_range(0.0..2.0),
                    Relation::Ge => v - rng.gen_range(0.0..2.0),
                }
            }
            None => rng.gen_range(-5..=5) as f64,
        };
        p.add_row(coeffs, relation, rhs);
    }
    p
}

/// Covering LP `min c·x, Ax >= 1, x >= 0` and its dual
/// `max Σy, Aᵀy <= c, y >= 0`, built independently of the benchmark code.
pub fn covering_pair(inst: &CoveringInstance) -> (LinearProgram, LinearProgram) {
    let mut primal = LinearProgram::new(Sense::Minimize, inst.costs.clone());
    for row in &inst.rows {
        let coeffs = row.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(i, &a)| (i, a)).collect();
        primal.add_row(coeffs, Relation::Ge, 1.0);
    }
    let mut dual = LinearProgram::new(Sense::Maximize, vec![1.0; inst.rows.len()]);
    for i in 0..inst.n {
        let coeffs = inst
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r[i] != 0.0)
            .map(|(t, r)| (t, r[i]))
            .collect();
        dual.add_row(coeffs, Relation::Le, inst.costs[i]);
    }
    (primal, dual)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst deviations seen over a randomized preprocessing run.
#[derive(Debug, Default, Clone, Copy)]
pub struct PreprocessWorst {
    pub steps: usize,
    /// `|a·ŝ - 1|`.
    pub tightness: f64,
    /// `max(ŝ - s)`.
    pub above_scaled: f64,
    /// `max(scaled - raw)`.
    pub above_raw: f64,
    /// Distance of `ŝ_i` outside `[L_i, s_i]` for `i ∈ I`.
    pub interval: f64,
    /// `max(previous scaled - scaled)`.
    pub below_floor: f64,
}

impl PreprocessWorst {
    pub fn holds(&self, tol: f64) -> bool {
        self.tightness <= tol
            && self.above_scaled <= tol
            && self.above_raw <= tol
            && self.interval <= tol
            && self.below_floor <= tol
    }
}

/// Drives a [`Preprocessor`] through `total` random steps, split into
/// sequences of random length, with monotone raw predictions covering each
/// row. Returns the worst deviations.
pub fn preprocess_suite(seed: u64, total: usize) -> PreprocessWorst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = PreprocessWorst::default();
    while w.steps < total {
        let n = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=4);
        let len = rng.gen_range(1..=20).min(total - w.steps);
        let mut pre = Preprocessor::new(n, k);
        let mut raw_prev = vec![vec![0.0; n]; k];
        let mut prev: Option<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
        for _ in 0..len {
            let mut row: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.1..5.0) })
                .collect();
            if row.iter().all(|&a| a == 0.0) {
                let i = rng.gen_range(0..n);
                row[i] = rng.gen_range(0.1..5.0);
            }
            let raw: Vec<Vec<f64>> = raw_prev
                .iter()
                .map(|before| {
                    let mut v: Vec<f64> = (0..n)
                        .map(|i| if row[i] > 0.0 && rng.gen_bool(0.7) { rng.gen_range(0.0..1.0) } else { 0.0 })
                        .collect();
                    if dot(&row, &v) <= 0.0 {
                        let i = (0..n).find(|&i| row[i] > 0.0).unwrap();
                        v[i] = 1.0;
                    }
                    let scale: f64 = rng.gen_range(1.0..3.0) / dot(&row, &v);
                    before.iter().zip(&v).map(|(b, x): (&f64, &f64)| b.max(x * scale)).collect()
                })
                .collect();
            let out = pre.step(&row, &raw, &vec![true; k]).expect("covering predictions");
            for j in 0..k {
                let (s, aux) = (&out.scaled[j], &out.aux[j]);
                w.tightness = w.tightness.max((dot(&row, aux) - 1.0).abs());
                for i in 0..n {
                    w.above_scaled = w.above_scaled.max(aux[i] - s[i]);
                    w.above_raw = w.above_raw.max(s[i] - raw[j][i]);
                }
                if let Some((prow, pscaled, paux)) = &prev {
                    for i in 0..n {
                        w.below_floor = w.below_floor.max(pscaled[j][i] - s[i]);
                    }
                    for &i in &out.index_sets[j] {
                        let lo = paux[j][i] * prow[i] / row[i];
                        w.interval = w.interval.max(lo - aux[i]).max(aux[i] - s[i]);
                    }
                }
            }
            w.steps += 1;
            raw_prev = raw;
            prev = Some((row, out.scaled, out.aux));
        }
    }
    w
}
