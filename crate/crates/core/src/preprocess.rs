//! Per-step preprocessing of expert predictions.
//!
//! Each prediction is first scaled down as far as the current row allows
//! while staying above the expert's previous scaled prediction
//! ([`downscale`]). An auxiliary solution tight on the current row is then
//! derived from it ([`tighten`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::dot;

/// Tolerance on `a·ŝ = 1`.
pub const TIGHT_TOL: f64 = 1e-9;

/// Largest accepted scale factor above 1, absorbing predictions that are
/// feasible only within the expert tolerance.
const THETA_SLACK: f64 = 1e-7;

/// Returns `v_i = max(θ s_i, floor_i)` for the least `θ` with `a·v >= 1`.
///
/// `θ` is located exactly by walking the sorted breakpoints `floor_i / s_i`
/// of the piecewise-linear map `θ ↦ a·max(θ s, floor)`. When the floor alone
/// covers the row the floor is returned.
pub fn downscale(s: &[f64], floor: &[f64], a: &[f64], expert: usize, step: usize) -> Result<Vec<f64>> {
    let at_floor: f64 = dot(a, floor);
    if at_floor >= 1.0 {
        return Ok(floor.to_vec());
    }
    let mut bps: Vec<(f64, usize)> = (0..s.len())
        .filter(|&i| s[i] > 0.0 && a[i] > 0.0)
        .map(|i| (floor[i] / s[i], i))
        .collect();
    bps.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    // On the current segment, a·v = base + slope·θ.
    let mut base = at_floor;
    let mut slope = 0.0;
    let mut theta = f64::INFINITY;
    for &(b, i) in &bps {
        if slope > 0.0 && base + slope * b >= 1.0 {
            theta = (1.0 - base) / slope;
            break;
        }
        base -= a[i] * floor[i];
        slope += a[i] * s[i];
    }
    if theta.is_infinite() && slope > 0.0 {
        theta = (1.0 - base) / slope;
    }
    if !(theta <= 1.0 + THETA_SLACK) {
        return Err(Error::ExpertNotFeasible {
            expert,
            step,
            value: dot(a, s),
        });
    }
    Ok(s.iter()
        .zip(floor)
        .map(|(&si, &fi)| (theta * si).max(fi))
        .collect())
}

/// Previous auxiliary solution and the row it is tight on.
#[derive(Debug, Clone, Copy)]
pub struct PreviousAux<'a> {
    pub aux: &'a [f64],
    pub row: &'a [f64],
}

/// Builds `ŝ <= s` with `a·ŝ = 1`.
///
/// Already-tight input is returned unchanged. Without a previous auxiliary
/// solution `s` is scaled uniformly. Otherwise every `i` with `a_i > 0` and
/// `s_i > L_i = ŝ_prev_i a_prev_i / a_i` forms `I`, and `ŝ_i` is lowered
/// from `s_i` towards `L_i` in increasing index order until the row is
/// tight. Returns `ŝ` and `I`.
pub fn tighten(s: &[f64], prev: Option<PreviousAux<'_>>, a: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let total = dot(a, s);
    if (total - 1.0).abs() <= 1e-12 || total <= 1.0 {
        return (s.to_vec(), Vec::new());
    }
    let Some(prev) = prev else {
        return (s.iter().map(|v| v / total).collect(), Vec::new());
    };
    let lower = |i: usize| prev.aux[i] * prev.row[i] / a[i];
    let set: Vec<usize> = (0..s.len()).filter(|&i| a[i] > 0.0 && s[i] > lower(i)).collect();

    let mut hat = s.to_vec();
    let mut excess = total - 1.0;
    for &i in &set {
        if excess <= 0.0 {
            break;
        }
        let room = a[i] * (s[i] - lower(i));
        let take = room.min(excess);
        hat[i] = if take == room { lower(i) } else { s[i] - take / a[i] };
        excess -= take;
    }
    // Only reachable through rounding: the interval endpoints always leave
    // enough room.
    for i in 0..s.len() {
        if excess <= 0.0 {
            break;
        }
        if a[i] > 0.0 && hat[i] > 0.0 {
            let take = (a[i] * hat[i]).min(excess);
            hat[i] -= take / a[i];
            excess -= take;
        }
    }
    (hat, set)
}

/// Result of preprocessing one step, for the experts listed in `experts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightenedPredictions {
    pub experts: Vec<usize>,
    /// Scaled predictions, one vector per listed expert.
    pub scaled: Vec<Vec<f64>>,
    /// Auxiliary solutions `ŝ`, one vector per listed expert.
    pub aux: Vec<Vec<f64>>,
    /// Index sets `I`, one per listed expert.
    pub index_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Default)]
struct ExpertHistory {
    scaled: Option<Vec<f64>>,
    aux: Option<Vec<f64>>,
}

/// Preprocessing state across steps: each expert's last scaled prediction
/// and auxiliary solution, plus the previous row.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    n: usize,
    history: Vec<ExpertHistory>,
    prev_row: Option<Vec<f64>>,
    step: usize,
}

impl Preprocessor {
    pub fn new(n: usize, num_experts: usize) -> Self {
        Self {
            n,
            history: vec![ExpertHistory::default(); num_experts],
            prev_row: None,
            step: 0,
        }
    }

    /// Processes the raw predictions of the active experts for `row`.
    pub fn step(&mut self, row: &[f64], raw: &[Vec<f64>], active: &[bool]) -> Result<TightenedPredictions> {
        let zeros = vec![0.0; self.n];
        let mut out = TightenedPredictions {
            experts: Vec::new(),
            scaled: Vec::new(),
            aux: Vec::new(),
            index_sets: Vec::new(),
        };
        for (k, s) in raw.iter().enumerate() {
            if !active[k] {
                continue;
            }
            let h = &self.history[k];
            let floor = h.scaled.as_deref().unwrap_or(&zeros);
            let scaled = downscale(s, floor, row, k, self.step)?;
            let prev = match (&h.aux, &self.prev_row) {
                (Some(aux), Some(prow)) => Some(PreviousAux { aux, row: prow }),
                _ => None,
            };
            let (aux, set) = tighten(&scaled, prev, row);
            out.experts.push(k);
            out.scaled.push(scaled);
            out.aux.push(aux);
            out.index_sets.push(set);
        }
        for (j, &k) in out.experts.iter().enumerate() {
            self.history[k].scaled = Some(out.scaled[j].clone());
            self.history[k].aux = Some(out.aux[j].clone());
        }
        self.prev_row = Some(row.to_vec());
        self.step += 1;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn downscale_halves() {
        let v = downscale(&[2.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 0, 0).unwrap();
        assert_eq!(v, vec![1.0, 0.0]);
    }

    #[test]
    fn downscale_tight_unchanged() {
        let s = [0.25, 0.75];
        let v = downscale(&s, &[0.0, 0.0], &[1.0, 1.0], 0, 0).unwrap();
        assert_abs_diff_eq!(v[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn downscale_floor_binds() {
        let v = downscale(&[2.0, 2.0], &[0.0, 2.0], &[1.0, 1.0], 0, 0).unwrap();
        assert_eq!(v, vec![0.0, 2.0]);
    }

    #[test]
    fn downscale_crosses_breakpoints() {
        // a·v = max(4θ, 1)·½ + 4θ: the first segment has base ½, slope 4,
        // giving θ = 1/8 < 1/4 = breakpoint of resource 0.
        let v = downscale(&[4.0, 4.0], &[1.0, 0.0], &[0.5, 1.0], 0, 0).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dot(&[0.5, 1.0], &v), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn downscale_rejects_infeasible() {
        assert!(matches!(
            downscale(&[0.5], &[0.0], &[1.0], 3, 7),
            Err(Error::ExpertNotFeasible { expert: 3, step: 7, .. })
        ));
    }

    #[test]
    fn tighten_first_step_scales_uniformly() {
        let (hat, set) = tighten(&[2.0, 2.0], None, &[1.0, 1.0]);
        assert_eq!(hat, vec![0.5, 0.5]);
        assert!(set.is_empty());
    }

    #[test]
    fn tighten_keeps_tight_input() {
        let prev = PreviousAux { aux: &[1.0, 0.0], row: &[1.0, 1.0] };
        let (hat, _) = tighten(&[0.5, 0.5], Some(prev), &[1.0, 1.0]);
        assert_eq!(hat, vec![0.5, 0.5]);
    }

    #[test]
    fn tighten_tight_counterexample_second_expert() {
        let prev = PreviousAux { aux: &[0.0, 2.0], row: &[1.0, 0.5] };
        let (hat, set) = tighten(&[0.0, 2.0], Some(prev), &[0.0, 1.0]);
        assert_eq!(set, vec![1]);
        assert_abs_diff_eq!(hat[0], 0.0);
        assert_abs_diff_eq!(hat[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tighten_water_fills_in_index_order() {
        // Lower endpoints (0, 0, 0); excess 1 comes entirely off resource 0.
        let prev = PreviousAux { aux: &[0.0, 0.0, 1.0], row: &[0.0, 0.0, 1.0] };
        let (hat, set) = tighten(&[1.0, 1.0, 1.0], Some(prev), &[1.0, 1.0, 0.0]);
        assert_eq!(set, vec![0, 1]);
        assert_eq!(hat, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn preprocessor_tracks_history() {
        let mut p = Preprocessor::new(2, 2);
        let r1 = [1.0, 0.5];
        let out = p
            .step(&r1, &[vec![1.0, 0.0], vec![0.0, 2.0]], &[true, true])
            .unwrap();
        assert_eq!(out.aux, vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        let r2 = [0.0, 1.0];
        let out = p
            .step(&r2, &[vec![1.0, 1.0], vec![0.0, 2.0]], &[false, true])
            .unwrap();
        assert_eq!(out.experts, vec![1]);
        // Floor (0, 2) already covers row 2, so the scaled prediction stays.
        assert_eq!(out.scaled[0], vec![0.0, 2.0]);
        assert_abs_diff_eq!(out.aux[0][1], 1.0, epsilon = 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn downscale_then_tighten(
            cols in proptest::collection::vec((0.0f64..4.0, 0.0f64..1.0, 0.0f64..1.0, 0.5f64..2.0), 1..8),
            lift in 1.0f64..3.0,
        ) {
            let a: Vec<f64> = cols.iter().map(|c| c.0).collect();
            proptest::prop_assume!(dot(&a, &a) > 0.1);
            let floor: Vec<f64> = cols.iter().map(|c| c.1 * 0.2).collect();
            // s covers the row and dominates the floor.
            let raw: Vec<f64> = cols.iter().map(|c| c.2 + c.1 * 0.2).collect();
            let scale = (lift / dot(&a, &raw).max(1e-3)).max(1.0);
            let s: Vec<f64> = raw.iter().map(|v| v * scale).collect();
            proptest::prop_assume!(dot(&a, &s) >= 1.0);

            let v = downscale(&s, &floor, &a, 0, 0).unwrap();
            for i in 0..v.len() {
                proptest::prop_assert!(v[i] >= floor[i] && v[i] <= s[i] + 1e-12);
            }
            let av = dot(&a, &v);
            proptest::prop_assert!(av >= 1.0 - 1e-9);
            if dot(&a, &floor) < 1.0 {
                proptest::prop_assert!((av - 1.0).abs() <= 1e-9);
            }

            // The previous auxiliary solution sits below the floor and is
            // tight on the previous row.
            let shape: Vec<f64> = cols.iter().map(|c| c.3).collect();
            let fs = dot(&floor, &shape);
            proptest::prop_assume!(fs > 1e-3);
            let kappa = 1.0f64.min(1.0 / fs);
            let prev_aux: Vec<f64> = floor.iter().map(|f| f * kappa).collect();
            let prev_row: Vec<f64> = shape.iter().map(|r| r / (fs * kappa)).collect();
            let prev = PreviousAux { aux: &prev_aux, row: &prev_row };
            let (hat, set) = tighten(&v, Some(prev), &a);
            proptest::prop_assert!((dot(&a, &hat) - 1.0).abs() <= 1e-9);
            for i in 0..hat.len() {
                proptest::prop_assert!(hat[i] >= 0.0 && hat[i] <= v[i]);
            }
            for &i in &set {
                proptest::prop_assert!(hat[i] >= prev_aux[i] * prev_row[i] / a[i] - 1e-12);
            }
        }
    }
}
