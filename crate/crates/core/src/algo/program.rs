//! The per-step convex program and its Frank-Wolfe solver.
//!
//! Variables are `w_{r,k}` for every included resource `r` (some positive
//! prediction) and every active expert `k`, stored row-major as `r * K + k`.
//! With `u_r = Σ_k s_{r,k} w_{r,k}` the objective is
//!
//! ```text
//! f(w) = Σ_r c_r [ (u_r + δ_r) ln((u_r + δ_r) / D_r) - u_r ]
//! ```
//!
//! over the polytope
//!
//! ```text
//! Σ_r a_r Σ_k ŝ_{r,k} w_{r,k} >= 1,   1 <= Σ_k w_{r,k} <= S ∀ r,   0 <= w <= W_max.
//! ```
//!
//! [`WeightDomain::Convex`] takes `S = W_max = 1`, so every resource mixes
//! its experts' predictions convexly. [`WeightDomain::Capped`] takes
//! `S = ∞` and a finite `W_max`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, Relation, Sense};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexProgram {
    /// Original index of each included resource.
    pub resources: Vec<usize>,
    pub costs: Vec<f64>,
    /// Row coefficient of each included resource.
    pub a: Vec<f64>,
    /// `s[r][k]`.
    pub s: Vec<Vec<f64>>,
    /// `ŝ[r][k]`.
    pub s_hat: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    pub d_prev: Vec<f64>,
    pub experts: usize,
    pub w_max: f64,
    /// Upper bound `S` on each `Σ_k w_{r,k}`; infinite when absent.
    pub w_sum_max: f64,
}

impl ConvexProgram {
    pub fn dim(&self) -> usize {
        self.resources.len() * self.experts
    }

    /// `u_r = Σ_k s_{r,k} w_{r,k}`.
    pub fn usage(&self, w: &[f64]) -> Vec<f64> {
        let k = self.experts;
        (0..self.resources.len())
            .map(|r| (0..k).map(|j| self.s[r][j] * w[r * k + j]).sum())
            .collect()
    }

    /// Coupling row coefficients `a_r ŝ_{r,k}`.
    fn coupling(&self) -> Vec<f64> {
        let k = self.experts;
        let mut b = vec![0.0; self.dim()];
        for r in 0..self.resources.len() {
            for j in 0..k {
                b[r * k + j] = self.a[r] * self.s_hat[r][j];
            }
        }
        b
    }

    /// The point `w_{r,k} = 1/K`.
    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.experts as f64; self.dim()]
    }

    /// Largest violation of the program's constraints at `w`.
    pub fn max_violation(&self, w: &[f64]) -> f64 {
        let k = self.experts;
        let b = self.coupling();
        let cover: f64 = b.iter().zip(w).map(|(b, w)| b * w).sum();
        let mut worst = (1.0 - cover).max(0.0);
        for r in 0..self.resources.len() {
            let total: f64 = w[r * k..(r + 1) * k].iter().sum();
            worst = worst.max(1.0 - total).max(total - self.w_sum_max);
        }
        for &v in w {
            worst = worst.max(-v).max(v - self.w_max);
        }
        worst
    }
}

/// Objective value and gradient at `w`.
pub fn objective_and_gradient(cp: &ConvexProgram, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = cp.experts;
    let u = cp.usage(w);
    let mut value = 0.0;
    let mut grad = vec![0.0; cp.dim()];
    for r in 0..cp.resources.len() {
        let arg = u[r] + cp.delta[r];
        if !(arg > 0.0) || !(cp.d_prev[r] > 0.0) {
            return Err(Error::Domain {
                resource: cp.resources[r],
                value: if arg > 0.0 { cp.d_prev[r] } else { arg },
            });
        }
        let log = (arg / cp.d_prev[r]).ln();
        value += cp.costs[r] * (arg * log - u[r]);
        for j in 0..k {
            grad[r * k + j] = cp.costs[r] * cp.s[r][j] * log;
        }
    }
    Ok((value, grad))
}

/// Linear minimization oracle used by Frank-Wolfe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Lmo {
    /// Lagrangian search over the single coupling row.
    #[default]
    Lagrangian,
    /// General simplex solve.
    Simplex,
}

/// Per-resource minimizer of `Σ_k h_k v_k` over
/// `{1 <= Σ_k v_k <= S, 0 <= v <= W}` with `h_k = g_k - λ b_k`, evaluated
/// just above (`side = 1`) or just below (`side = -1`) `λ` so ties resolve
/// consistently. Coordinates are filled to `W` in increasing `h` while `h`
/// is negative and the sum is below `S`, or while the sum is below 1.
fn block_minimizer(
    g: &[f64],
    b: &[f64],
    lambda: f64,
    side: f64,
    w_max: f64,
    sum_max: f64,
    out: &mut [f64],
) {
    let key = |j: usize| (g[j] - lambda * b[j], -side * b[j]);
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&x, &y| {
        let (hx, dx) = key(x);
        let (hy, dy) = key(y);
        hx.total_cmp(&hy).then(dx.total_cmp(&dy)).then(x.cmp(&y))
    });
    out.fill(0.0);
    let mut total = 0.0;
    for j in order {
        let (h, d) = key(j);
        let wanted = h < 0.0 || (h == 0.0 && d < 0.0);
        let limit = if wanted { sum_max } else { 1.0 };
        if total >= limit {
            break;
        }
        let take = w_max.min(limit - total);
        out[j] = take;
        total += take;
    }
}

/// Coverage shortfall accepted by the Lagrangian oracle, absorbing rounding
/// in `a·ŝ = 1`.
const COVER_SLACK: f64 = 1e-12;

fn lmo_lagrangian(cp: &ConvexProgram, grad: &[f64]) -> Vec<f64> {
    let k = cp.experts;
    let m = cp.resources.len();
    let b = cp.coupling();
    let eval = |lambda: f64, side: f64| -> (Vec<f64>, f64) {
        let mut v = vec![0.0; cp.dim()];
        for r in 0..m {
            let rng = r * k..(r + 1) * k;
            block_minimizer(
                &grad[rng.clone()],
                &b[rng.clone()],
                lambda,
                side,
                cp.w_max,
                cp.w_sum_max,
                &mut v[rng],
            );
        }
        let cover = b.iter().zip(&v).map(|(b, v)| b * v).sum::<f64>();
        (v, cover)
    };

    let (v0, c0) = eval(0.0, 1.0);
    if c0 + COVER_SLACK >= 1.0 {
        return v0;
    }
    // Coverage is nondecreasing in λ; grow λ until it suffices.
    let scale = grad
        .iter()
        .zip(&b)
        .filter(|(_, &b)| b > 0.0)
        .map(|(g, b)| (g / b).abs())
        .fold(0.0, f64::max);
    let mut hi = scale * (1.0 + 1e-12) + 1.0;
    let mut lo = 0.0;
    for _ in 0..200 {
        if eval(hi, 1.0).1 + COVER_SLACK >= 1.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid, 1.0).1 + COVER_SLACK >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (mut v, mut cover) = eval(lo, -1.0);
    let (upper, _) = eval(hi, 1.0);
    if cover + COVER_SLACK >= 1.0 {
        return v;
    }
    // Walk from the lower minimizer to the upper one resource by resource,
    // stopping part-way through the block that reaches coverage 1.
    for r in 0..m {
        let rng = r * k..(r + 1) * k;
        if v[rng.clone()] == upper[rng.clone()] {
            continue;
        }
        let before: f64 = rng.clone().map(|j| b[j] * v[j]).sum();
        let after: f64 = rng.clone().map(|j| b[j] * upper[j]).sum();
        if cover - before + after + COVER_SLACK >= 1.0 {
            let frac = ((1.0 - cover) / (after - before)).clamp(0.0, 1.0);
            for j in rng {
                v[j] += frac * (upper[j] - v[j]);
            }
            return v;
        }
        cover += after - before;
        v[rng.clone()].copy_from_slice(&upper[rng]);
    }
    upper
}

fn lmo_simplex(cp: &ConvexProgram, grad: &[f64]) -> Result<Vec<f64>> {
    let k = cp.experts;
    let mut p = LinearProgram::new(Sense::Minimize, grad.to_vec());
    for j in 0..cp.dim() {
        p.set_bounds(j, 0.0, cp.w_max);
    }
    let b = cp.coupling();
    p.add_row(
        b.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect(),
        Relation::Ge,
        1.0,
    );
    for r in 0..cp.resources.len() {
        p.add_row((r * k..(r + 1) * k).map(|j| (j, 1.0)).collect(), Relation::Ge, 1.0);
        if cp.w_sum_max.is_finite() {
            p.add_row((r * k..(r + 1) * k).map(|j| (j, 1.0)).collect(), Relation::Le, cp.w_sum_max);
        }
    }
    let sol = solve_lp(&p)?;
    sol.value()?;
    Ok(sol.x)
}

/// Minimizer of `⟨grad, v⟩` over the program's polytope.
pub fn linear_minimizer(cp: &ConvexProgram, grad: &[f64], lmo: Lmo) -> Result<Vec<f64>> {
    match lmo {
        Lmo::Lagrangian => Ok(lmo_lagrangian(cp, grad)),
        Lmo::Simplex => lmo_simplex(cp, grad),
    }
}

/// How each Frank-Wolfe iteration moves after the LMO call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FwVariant {
    /// Step towards the LMO vertex with exact line search.
    Vanilla,
    /// Vanilla steps plus away steps from the worst active atom.
    AwayStep,
    /// The LMO vertex joins the active atoms and the objective is minimized
    /// over their convex hull.
    #[default]
    FullyCorrective,
}

/// Feasible weights per resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightDomain {
    /// `Σ_k w_{r,k} = 1`.
    #[default]
    Convex,
    /// `Σ_k w_{r,k} >= 1` and `0 <= w <= W_max`.
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwOptions {
    pub gap_tol: f64,
    pub max_iters: usize,
    pub domain: WeightDomain,
    /// Cap on each weight under [`WeightDomain::Capped`]; `None` means the
    /// number of active experts.
    pub w_max: Option<f64>,
    pub lmo: Lmo,
    pub variant: FwVariant,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            max_iters: 10_000,
            domain: WeightDomain::Convex,
            w_max: None,
            lmo: Lmo::Lagrangian,
            variant: FwVariant::FullyCorrective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwResult {
    pub w: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    /// Number of LMO-driven iterations.
    pub iterations: usize,
    /// Some weight sits at a finite `W_max` that is not implied by the sum
    /// bound.
    pub cap_active: bool,
}

/// Exact minimizer of `f(w + γ d)` over `γ ∈ [0, γ_max]`, given `u = S w`
/// and `du = S d`.
fn line_search(cp: &ConvexProgram, u: &[f64], du: &[f64], gamma_max: f64) -> f64 {
    let deriv = |g: f64| -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for r in 0..u.len() {
            if du[r] == 0.0 {
                continue;
            }
            let arg = u[r] + g * du[r] + cp.delta[r];
            d1 += cp.costs[r] * (arg / cp.d_prev[r]).ln() * du[r];
            d2 += cp.costs[r] * du[r] * du[r] / arg;
        }
        (d1, d2)
    };
    if deriv(gamma_max).0 <= 0.0 {
        return gamma_max;
    }
    let (mut lo, mut hi) = (0.0, gamma_max);
    let mut g = 0.5 * gamma_max;
    for _ in 0..100 {
        let (d1, d2) = deriv(g);
        if d1 > 0.0 {
            hi = g;
        } else {
            lo = g;
        }
        if d1 == 0.0 || hi - lo <= 1e-16 * gamma_max.max(1.0) {
            break;
        }
        let newton = g - d1 / d2;
        g = if d2 > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    g.clamp(0.0, gamma_max)
}

struct Atom {
    point: Vec<f64>,
    weight: f64,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn hull_point(atoms: &[Atom], dim: usize) -> Vec<f64> {
    let mut w = vec![0.0; dim];
    for a in atoms {
        for (x, p) in w.iter_mut().zip(&a.point) {
            *x += a.weight * p;
        }
    }
    w
}

/// Solves `min gᵀz + ½ zᵀHz` subject to `α + z >= 0`, `Σ z = 0` by a primal
/// active-set method started at `z = 0`.
fn simplex_qp(h: &DMatrix<f64>, g: &[f64], alpha: &[f64]) -> Vec<f64> {
    let n = g.len();
    let ridge = 1e-12 * (1.0 + (0..n).map(|j| h[(j, j)]).fold(0.0, f64::max));
    let mut z = vec![0.0; n];
    let mut free: Vec<bool> = alpha.iter().map(|&a| a > 0.0).collect();
    for _ in 0..10 * n + 10 {
        let q: Vec<f64> = (0..n)
            .map(|i| g[i] + (0..n).map(|j| h[(i, j)] * z[j]).sum::<f64>())
            .collect();
        let idx: Vec<usize> = (0..n).filter(|&j| free[j]).collect();
        let m = idx.len();
        let mut kkt = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut rhs = DVector::<f64>::zeros(m + 1);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                kkt[(a, b)] = h[(i, j)];
            }
            kkt[(a, a)] += ridge;
            kkt[(a, m)] = 1.0;
            kkt[(m, a)] = 1.0;
            rhs[a] = -q[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return z;
        };
        let nu = sol[m];
        let step_norm = (0..m).map(|a| sol[a].abs()).fold(0.0, f64::max);
        if step_norm <= 1e-14 {
            // Stationary on the free set: release the bound with the most
            // negative multiplier, if any.
            let release = (0..n)
                .filter(|&j| !free[j])
                .map(|j| (j, q[j] + nu))
                .filter(|&(_, mu)| mu < -1e-14)
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match release {
                Some((j, _)) => free[j] = true,
                None => return z,
            }
            continue;
        }
        let mut tau = 1.0;
        let mut block = None;
        for (a, &i) in idx.iter().enumerate() {
            if sol[a] < 0.0 {
                let room = (alpha[i] + z[i]) / -sol[a];
                if room < tau {
                    tau = room;
                    block = Some(i);
                }
            }
        }
        for (a, &i) in idx.iter().enumerate() {
            z[i] += tau * sol[a];
        }
        if let Some(i) = block {
            z[i] = -alpha[i];
            free[i] = false;
        }
    }
    z
}

/// Minimizes the objective over the convex hull of `atoms` by projected
/// Newton steps on the atom weights.
fn correct(cp: &ConvexProgram, atoms: &mut Vec<Atom>, tol: f64) -> Result<()> {
    let na = atoms.len();
    let m = cp.resources.len();
    let cols: Vec<Vec<f64>> = atoms.iter().map(|a| cp.usage(&a.point)).collect();
    for _ in 0..100 {
        let w = hull_point(atoms, cp.dim());
        let u = cp.usage(&w);
        let (_, grad) = objective_and_gradient(cp, &w)?;
        let g: Vec<f64> = atoms.iter().map(|a| dot(&grad, &a.point)).collect();
        let alpha: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        let inner_gap = dot(&g, &alpha) - g.iter().copied().fold(f64::INFINITY, f64::min);
        if inner_gap <= tol {
            break;
        }
        let curv: Vec<f64> = (0..m).map(|r| cp.costs[r] / (u[r] + cp.delta[r])).collect();
        let h = DMatrix::from_fn(na, na, |i, j| {
            (0..m).map(|r| cols[i][r] * curv[r] * cols[j][r]).sum::<f64>()
        });
        let mut z = simplex_qp(&h, &g, &alpha);
        let mut du: Vec<f64> = (0..m).map(|r| (0..na).map(|j| cols[j][r] * z[j]).sum()).collect();
        let mut gamma = line_search(cp, &u, &du, 1.0);
        if gamma * z.iter().map(|v| v.abs()).fold(0.0, f64::max) <= 1e-12 {
            // The Newton model stalled (near-singular Hessian): move weight
            // from the worst active atom to the best one.
            let best = (0..na).min_by(|&x, &y| g[x].total_cmp(&g[y])).expect("atoms");
            let worst = (0..na)
                .filter(|&j| alpha[j] > 0.0)
                .max_by(|&x, &y| g[x].total_cmp(&g[y]))
                .expect("positive weight");
            z = vec![0.0; na];
            z[best] = 1.0;
            z[worst] = -1.0;
            du = (0..m).map(|r| cols[best][r] - cols[worst][r]).collect();
            gamma = line_search(cp, &u, &du, alpha[worst]);
        }
        if gamma * z.iter().map(|v| v.abs()).fold(0.0, f64::max) <= 1e-16 {
            break;
        }
        let mut total = 0.0;
        for (a, dz) in atoms.iter_mut().zip(&z) {
            a.weight = (a.weight + gamma * dz).max(0.0);
            total += a.weight;
        }
        for a in atoms.iter_mut() {
            a.weight /= total;
        }
    }
    atoms.retain(|a| a.weight > 0.0);
    Ok(())
}

/// Frank-Wolfe from the uniform point. Stops once the gap
/// `⟨∇f(w), w - v⟩` with `v` the LMO answer is at most `gap_tol`.
pub fn solve_step_program(cp: &ConvexProgram, opts: &FwOptions) -> Result<FwResult> {
    let dim = cp.dim();
    if dim == 0 {
        return Ok(FwResult {
            w: Vec::new(),
            objective: 0.0,
            gap: 0.0,
            iterations: 0,
            cap_active: false,
        });
    }
    let mut w = cp.uniform();
    let mut atoms = vec![Atom { point: w.clone(), weight: 1.0 }];
    let mut iterations = 0;
    let mut gap;
    loop {
        let (_, grad) = objective_and_gradient(cp, &w)?;
        let v = linear_minimizer(cp, &grad, opts.lmo)?;
        let gw = dot(&grad, &w);
        gap = gw - dot(&grad, &v);
        if gap <= opts.gap_tol {
            break;
        }
        if iterations >= opts.max_iters {
            return Err(Error::GapNotReached {
                iterations,
                gap,
                tol: opts.gap_tol,
            });
        }
        iterations += 1;

        match opts.variant {
            FwVariant::Vanilla => {
                let d: Vec<f64> = v.iter().zip(&w).map(|(x, y)| x - y).collect();
                let gamma = line_search(cp, &cp.usage(&w), &cp.usage(&d), 1.0);
                for (x, d) in w.iter_mut().zip(&d) {
                    *x += gamma * d;
                }
            }
            FwVariant::AwayStep => {
                away_step(cp, &mut w, &mut atoms, &grad, v, gw, gap);
            }
            FwVariant::FullyCorrective => {
                if !atoms.iter().any(|a| a.point == v) {
                    atoms.push(Atom { point: v, weight: 0.0 });
                }
                correct(cp, &mut atoms, 0.1 * opts.gap_tol)?;
                w = hull_point(&atoms, dim);
            }
        }
    }
    let (objective, _) = objective_and_gradient(cp, &w)?;
    let cap_active = cp.w_max < cp.w_sum_max && w.iter().any(|&x| x >= cp.w_max - 1e-9);
    Ok(FwResult {
        w,
        objective,
        gap,
        iterations,
        cap_active,
    })
}

fn away_step(
    cp: &ConvexProgram,
    w: &mut [f64],
    atoms: &mut Vec<Atom>,
    grad: &[f64],
    v: Vec<f64>,
    gw: f64,
    gap: f64,
) {
    let away = atoms
        .iter()
        .enumerate()
        .map(|(j, a)| (j, dot(grad, &a.point)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .filter(|&(j, ga)| ga - gw > gap && atoms[j].weight < 1.0);
    let (dir, gamma_max) = match away {
        Some((j, _)) => {
            let a = &atoms[j];
            let d: Vec<f64> = w.iter().zip(&a.point).map(|(x, y)| x - y).collect();
            (d, a.weight / (1.0 - a.weight))
        }
        None => (v.iter().zip(w.iter()).map(|(x, y)| x - y).collect(), 1.0),
    };
    let gamma = line_search(cp, &cp.usage(w), &cp.usage(&dir), gamma_max);
    for (x, d) in w.iter_mut().zip(&dir) {
        *x += gamma * d;
    }
    match away {
        Some((j, _)) => {
            for a in atoms.iter_mut() {
                a.weight *= 1.0 + gamma;
            }
            atoms[j].weight -= gamma;
            if gamma >= gamma_max {
                atoms[j].weight = 0.0;
            }
        }
        None => {
            for a in atoms.iter_mut() {
                a.weight = if gamma >= 1.0 { 0.0 } else { a.weight * (1.0 - gamma) };
            }
            match atoms.iter_mut().find(|a| a.point == v) {
                Some(a) => a.weight += gamma,
                None => atoms.push(Atom { point: v, weight: gamma }),
            }
        }
    }
    atoms.retain(|a| a.weight > 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single() -> ConvexProgram {
        ConvexProgram {
            resources: vec![0],
            costs: vec![1.0],
            a: vec![1.0],
            s: vec![vec![1.0]],
            s_hat: vec![vec![1.0]],
            delta: vec![1.0],
            d_prev: vec![1.0],
            experts: 1,
            w_max: 1.0,
            w_sum_max: f64::INFINITY,
        }
    }

    fn random_program(rng: &mut ChaCha8Rng, m: usize, k: usize, convex: bool) -> ConvexProgram {
        let a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..2.0)).collect();
        let mut s = vec![vec![0.0; k]; m];
        let mut s_hat = vec![vec![0.0; k]; m];
        for j in 0..k {
            let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let cover: f64 = raw.iter().zip(&a).map(|(x, y)| x * y).sum();
            for r in 0..m {
                s[r][j] = raw[r] / cover * rng.gen_range(1.0..2.0);
                s_hat[r][j] = raw[r] / cover;
            }
        }
        let delta: Vec<f64> = s.iter().map(|row| row.iter().sum::<f64>() / k as f64).collect();
        ConvexProgram {
            resources: (0..m).collect(),
            costs: (0..m).map(|_| rng.gen_range(1.0..10.0)).collect(),
            a,
            s,
            s_hat,
            d_prev: delta.iter().map(|d| d * rng.gen_range(0.5..3.0)).collect(),
            delta,
            experts: k,
            w_max: if convex { 1.0 } else { k as f64 },
            w_sum_max: if convex { 1.0 } else { f64::INFINITY },
        }
    }

    #[test]
    fn objective_single_point() {
        let (v, g) = objective_and_gradient(&single(), &[1.0]).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 2f64.ln() - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_denominator() {
        let mut cp = single();
        cp.d_prev = vec![1.5];
        let (_, g) = objective_and_gradient(&cp, &[0.5]).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn domain_error_on_nonpositive_denominator() {
        let mut cp = single();
        cp.d_prev = vec![0.0];
        assert!(matches!(objective_and_gradient(&cp, &[1.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn single_variable_optimum_on_boundary() {
        let mut cp = single();
        cp.w_max = 3.0;
        let res = solve_step_program(&cp, &FwOptions::default()).unwrap();
        assert_abs_diff_eq!(res.w[0], 1.0, epsilon = 1e-12);
        assert!(res.gap <= 1e-6);
    }

    #[test]
    fn lagrangian_lmo_matches_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..400 {
            let m = rng.gen_range(1..6);
            let k = rng.gen_range(1..5);
            let cp = random_program(&mut rng, m, k, case % 2 == 0);
            let grad: Vec<f64> = (0..cp.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let a = lmo_lagrangian(&cp, &grad);
            let b = lmo_simplex(&cp, &grad).unwrap();
            assert!(cp.max_violation(&a) <= 1e-9, "violation {}", cp.max_violation(&a));
            let (va, vb) = (dot(&grad, &a), dot(&grad, &b));
            assert!((va - vb).abs() <= 1e-8 * (1.0 + vb.abs()), "{va} vs {vb}");
        }
    }

    #[test]
    fn random_programs_reach_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..100 {
            let m = rng.gen_range(1..8);
            let k = rng.gen_range(1..6);
            let cp = random_program(&mut rng, m, k, case % 2 == 0);
            assert!(cp.max_violation(&cp.uniform()) <= 1e-12);
            let res = solve_step_program(&cp, &FwOptions::default()).unwrap();
            assert!(res.gap <= 1e-6);
            assert!(cp.max_violation(&res.w) <= 1e-8);
            let (f0, _) = objective_and_gradient(&cp, &cp.uniform()).unwrap();
            assert!(res.objective <= f0 + 1e-12);
        }
    }

    #[test]
    fn plain_and_away_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cp = random_program(&mut rng, 3, 2, false);
        let away = solve_step_program(&cp, &FwOptions::default()).unwrap();
        let plain = solve_step_program(
            &cp,
            &FwOptions {
                variant: FwVariant::Vanilla,
                gap_tol: 1e-4,
                max_iters: 100_000,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((away.objective - plain.objective).abs() <= 1e-4);
    }
}
