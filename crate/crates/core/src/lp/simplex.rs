//! Two-phase, bounded-variable primal simplex on a dense tableau.
//!
//! Columns are shifted so every working variable lives in `[0, ub]`.
//! Nonbasic columns sit at either bound; bound flips are taken without a
//! pivot. Phase one minimises the sum of artificial columns, phase two the
//! real objective with artificials barred from entering.

use nalgebra::{DMatrix, DVector};

use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation, Sense, ROW_TOL};

const PIVOT_EPS: f64 = 1e-7;
const COST_EPS: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
/// Degenerate pivots in a row before the exact Bland leaving rule is used.
const STRICT_AFTER: usize = 100;
const INVERSE_TOL: f64 = 1e-10;
/// Pivots between reinversions.
const REFACTOR_EVERY: usize = 100;
/// Smallest pivot, relative to the largest tied one, Bland's rule may take.
const TIE_PIVOT_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest eligible index enters; smallest basic index leaves on ties.
    #[default]
    Bland,
    /// Most negative reduced cost enters; falls back to Bland after a run of
    /// degenerate pivots and returns to Dantzig once the objective moves.
    Dantzig,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub rule: PivotRule,
    /// Hard cap on pivots (both phases). `None` derives one from the size.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            rule: PivotRule::Bland,
            max_pivots: None,
        }
    }
}

/// Solves `p` with Bland's rule.
pub fn solve_lp(p: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(p, SimplexOptions::default())
}

pub fn solve_lp_with(p: &LinearProgram, opts: SimplexOptions) -> Result<LpSolution, LpError> {
    p.validate()?;
    let std = StandardForm::build(p);
    let limit = opts
        .max_pivots
        .unwrap_or(50_000 + 50 * (std.m + std.ncols));
    let mut tab = Tableau::new(&std);
    let mut pivots = 0usize;

    // Phase one.
    if std.num_artificial > 0 {
        let mut cost = vec![0.0; std.ncols];
        for c in std.first_artificial..std.ncols {
            cost[c] = 1.0;
        }
        tab.set_costs(&cost);
        match tab.run(opts.rule, &mut pivots, limit, std.ncols)? {
            Outcome::Optimal => {}
            // Impossible in exact arithmetic: the objective is bounded below by zero.
            Outcome::Unbounded => return Err(LpError::Numerical(f64::INFINITY)),
        }
        let infeas: f64 = tab.objective_value(&cost);
        let scale = 1.0 + std.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if infeas > 1e-8 * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                pivots,
            });
        }
        tab.drive_out_artificials(std.first_artificial);
        tab.refactor();
    }

    // Phase two.
    tab.set_costs(&std.cost);
    match tab.run(opts.rule, &mut pivots, limit, std.first_artificial)? {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NAN,
                pivots,
            })
        }
    }

    let work = tab.values();
    let x = std.recover(&work);
    let viol = p.max_violation(&x);
    if viol > ROW_TOL {
        return Err(LpError::Numerical(viol));
    }
    let objective = p.objective_value(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots,
    })
}

/// How an original variable maps onto working columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + col`
    Shift { col: usize, lower: f64 },
    /// `x = upper - col`
    Mirror { col: usize, upper: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    m: usize,
    ncols: usize,
    /// Dense row-major constraint matrix, `m x ncols`, with slack and
    /// artificial identity columns already appended.
    a: Vec<f64>,
    rhs: Vec<f64>,
    upper: Vec<f64>,
    /// Minimisation costs on working columns.
    cost: Vec<f64>,
    /// Initial basic column for each row.
    basis: Vec<usize>,
    first_artificial: usize,
    num_artificial: usize,
    maps: Vec<VarMap>,
}

impl StandardForm {
    fn build(p: &LinearProgram) -> Self {
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut maps = Vec::with_capacity(p.num_vars());
        let mut upper = Vec::new();
        let mut cost = Vec::new();
        for j in 0..p.num_vars() {
            let (l, u, c) = (p.lower[j], p.upper[j], sign * p.objective[j]);
            if l.is_finite() {
                maps.push(VarMap::Shift { col: upper.len(), lower: l });
                upper.push(u - l);
                cost.push(c);
            } else if u.is_finite() {
                maps.push(VarMap::Mirror { col: upper.len(), upper: u });
                upper.push(f64::INFINITY);
                cost.push(-c);
            } else {
                maps.push(VarMap::Split { pos: upper.len(), neg: upper.len() + 1 });
                upper.extend([f64::INFINITY, f64::INFINITY]);
                cost.extend([c, -c]);
            }
        }
        let nstruct = upper.len();

        // Rewrite every row over working columns and normalise rhs >= 0.
        struct Normal {
            coeffs: Vec<(usize, f64)>,
            rel: Relation,
            rhs: f64,
        }
        let mut normal = Vec::with_capacity(p.rows.len());
        for row in &p.rows {
            let mut rhs = row.rhs;
            let mut coeffs = Vec::with_capacity(row.coeffs.len() + 1);
            for &(j, a) in &row.coeffs {
                match maps[j] {
                    VarMap::Shift { col, lower } => {
                        rhs -= a * lower;
                        coeffs.push((col, a));
                    }
                    VarMap::Mirror { col, upper } => {
                        rhs -= a * upper;
                        coeffs.push((col, -a));
                    }
                    VarMap::Split { pos, neg } => {
                        coeffs.push((pos, a));
                        coeffs.push((neg, -a));
                    }
                }
            }
            let mut rel = row.relation;
            let flip = rhs < 0.0 || (rhs == 0.0 && rel == Relation::Ge);
            if flip {
                rhs = -rhs;
                for c in coeffs.iter_mut() {
                    c.1 = -c.1;
                }
                rel = match rel {
                    Relation::Ge => Relation::Le,
                    Relation::Le => Relation::Ge,
                    Relation::Eq => Relation::Eq,
                };
            }
            normal.push(Normal { coeffs, rel, rhs });
        }

        let m = normal.len();
        let num_slack = normal.iter().filter(|r| r.rel != Relation::Eq).count();
        let num_artificial = normal.iter().filter(|r| r.rel != Relation::Le).count();
        let first_artificial = nstruct + num_slack;
        let ncols = first_artificial + num_artificial;
        upper.resize(ncols, f64::INFINITY);
        cost.resize(ncols, 0.0);

        let mut a = vec![0.0; m * ncols];
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (nstruct, first_artificial);
        for (r, row) in normal.iter().enumerate() {
            let base = r * ncols;
            for &(c, v) in &row.coeffs {
                a[base + c] += v;
            }
            rhs.push(row.rhs);
            match row.rel {
                Relation::Le => {
                    a[base + next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    a[base + next_slack] = -1.0;
                    next_slack += 1;
                    a[base + next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    a[base + next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
        }

        Self {
            m,
            ncols,
            a,
            rhs,
            upper,
            cost,
            basis,
            first_artificial,
            num_artificial,
            maps,
        }
    }

    fn recover(&self, work: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, lower } => lower + work[col],
                VarMap::Mirror { col, upper } => upper - work[col],
                VarMap::Split { pos, neg } => work[pos] - work[neg],
            })
            .collect()
    }
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    a: Vec<f64>,
    /// Value of the basic variable of each row.
    beta: Vec<f64>,
    basis: Vec<usize>,
    /// Row holding each column when basic.
    row_of: Vec<Option<usize>>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    /// Reduced costs for the current phase.
    d: Vec<f64>,
    /// Costs of the current phase.
    cost: Vec<f64>,
    cost_eps: f64,
    /// Original matrix by sparse columns, and right-hand side, for reinversion.
    a0: Vec<Vec<(usize, f64)>>,
    rhs0: Vec<f64>,
    /// Initial basis; its columns of the current tableau hold `B^{-1}`.
    basis0: Vec<usize>,
    since_refactor: usize,
    refactor_every: usize,
}

impl Tableau {
    fn new(s: &StandardForm) -> Self {
        let mut row_of = vec![None; s.ncols];
        for (r, &b) in s.basis.iter().enumerate() {
            row_of[b] = Some(r);
        }
        Self {
            m: s.m,
            ncols: s.ncols,
            a: s.a.clone(),
            beta: s.rhs.clone(),
            basis: s.basis.clone(),
            row_of,
            upper: s.upper.clone(),
            at_upper: vec![false; s.ncols],
            d: vec![0.0; s.ncols],
            cost: vec![0.0; s.ncols],
            cost_eps: COST_EPS,
            a0: (0..s.ncols)
                .map(|c| {
                    (0..s.m)
                        .filter_map(|r| {
                            let v = s.a[r * s.ncols + c];
                            (v != 0.0).then_some((r, v))
                        })
                        .collect()
                })
                .collect(),
            rhs0: s.rhs.clone(),
            basis0: s.basis.clone(),
            since_refactor: 0,
            refactor_every: REFACTOR_EVERY,
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.ncols..(r + 1) * self.ncols]
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        self.cost_eps = COST_EPS * cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        self.d.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let base = r * self.ncols;
                for j in 0..self.ncols {
                    self.d[j] -= cb * self.a[base + j];
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for j in 0..self.ncols {
            if self.row_of[j].is_none() && self.at_upper[j] {
                x[j] = self.upper[j];
            }
        }
        for (r, &b) in self.basis.iter().enumerate() {
            x[b] = self.beta[r];
        }
        x
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.values().iter().zip(cost).map(|(x, c)| x * c).sum()
    }

    fn eligible(&self, j: usize) -> bool {
        if self.row_of[j].is_some() {
            return false;
        }
        if self.at_upper[j] {
            self.d[j] > self.cost_eps
        } else {
            self.d[j] < -self.cost_eps && self.upper[j] > 0.0
        }
    }

    fn choose_entering(&self, bland: bool, allowed: usize) -> Option<usize> {
        if bland {
            (0..allowed).find(|&j| self.eligible(j))
        } else {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..allowed {
                if self.eligible(j) {
                    let score = self.d[j].abs();
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((j, score));
                    }
                }
            }
            best.map(|(j, _)| j)
        }
    }

    /// Runs simplex iterations with columns `>= allowed` barred from entering.
    fn run(
        &mut self,
        rule: PivotRule,
        pivots: &mut usize,
        limit: usize,
        allowed: usize,
    ) -> Result<Outcome, LpError> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = match rule {
                PivotRule::Bland => true,
                PivotRule::Dantzig => degenerate_run > 50,
            };
            if self.since_refactor >= self.refactor_every {
                self.reinvert()?;
            }
            let Some(j) = self.choose_entering(bland, allowed) else {
                // Confirm on a freshly reinverted tableau.
                if self.since_refactor > 0 {
                    self.reinvert()?;
                    if self.choose_entering(bland, allowed).is_some() {
                        continue;
                    }
                }
                return Ok(Outcome::Optimal);
            };
            if *pivots >= limit {
                return Err(LpError::PivotLimit(limit));
            }
            *pivots += 1;

            let increasing = !self.at_upper[j];
            let sigma = if increasing { 1.0 } else { -1.0 };

            let (theta, leave) = self.ratio_test(j, sigma, degenerate_run > STRICT_AFTER);
            if theta.is_infinite() {
                if self.since_refactor > 0 {
                    self.reinvert()?;
                    continue;
                }
                return Ok(Outcome::Unbounded);
            }
            if theta > 1e-12 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }

            // Move basic values along the edge.
            if theta != 0.0 {
                for r in 0..self.m {
                    let alpha = self.a[r * self.ncols + j];
                    if alpha != 0.0 {
                        self.beta[r] -= sigma * theta * alpha;
                    }
                }
            }

            match leave {
                None => {
                    // Bound flip.
                    self.at_upper[j] = increasing;
                }
                Some((r, to_upper)) => {
                    let entering_value = if increasing {
                        theta
                    } else {
                        self.upper[j] - theta
                    };
                    let old = self.basis[r];
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                    self.row_of[old] = None;
                    self.at_upper[old] = to_upper;
                    self.at_upper[j] = false;
                }
            }
        }
    }

    /// Step length along column `j` (moving in direction `sigma`) and the
    /// leaving row, `None` for a bound flip.
    ///
    /// Normally a Harris two-pass test: bounds are relaxed by `FEAS_TOL` to
    /// find the admissible step, and the largest pivot within it leaves.
    /// In `strict` mode (long degenerate runs) the exact minimum ratio with
    /// the smallest basic index leaves, which keeps Bland's rule finite.
    fn ratio_test(&self, j: usize, sigma: f64, strict: bool) -> (f64, Option<(usize, bool)>) {
        let nc = self.ncols;
        let col_max = (0..self.m).fold(0.0f64, |mx, r| mx.max(self.a[r * nc + j].abs()));
        let piv_tol = PIVOT_EPS * col_max.max(1.0);
        // (row, |alpha|, exact ratio, relaxed ratio, leaves at upper)
        let candidates = (0..self.m).filter_map(|r| {
            let alpha = sigma * self.a[r * nc + j];
            let b = self.basis[r];
            if alpha > piv_tol {
                let dist = self.beta[r].max(0.0);
                Some((r, alpha, dist / alpha, (dist + FEAS_TOL) / alpha, false))
            } else if alpha < -piv_tol && self.upper[b].is_finite() {
                let dist = (self.upper[b] - self.beta[r]).max(0.0);
                Some((r, -alpha, dist / -alpha, (dist + FEAS_TOL) / -alpha, true))
            } else {
                None
            }
        });

        let cands: Vec<_> = candidates.collect();
        if strict {
            // Exact minimum ratio; among ties the smallest basic index whose
            // pivot is not tiny next to the largest tied pivot.
            let min_ratio = cands.iter().fold(f64::INFINITY, |m, c| m.min(c.2));
            if self.upper[j] <= min_ratio + 1e-12 {
                return (self.upper[j], None);
            }
            let tied = || cands.iter().filter(|c| c.2 <= min_ratio + 1e-12);
            let biggest = tied().fold(0.0f64, |m, c| m.max(c.1));
            let pick = tied()
                .filter(|c| c.1 >= TIE_PIVOT_RATIO * biggest)
                .min_by_key(|c| self.basis[c.0]);
            return match pick {
                Some(&(r, _, ratio, _, to_upper)) => (ratio, Some((r, to_upper))),
                None => (f64::INFINITY, None),
            };
        }

        let relaxed = cands.iter().fold(f64::INFINITY, |m, c| m.min(c.3));
        if self.upper[j] <= relaxed {
            return (self.upper[j], None);
        }
        let mut best: Option<(usize, f64, f64, bool)> = None;
        for &(r, alpha, ratio, _, to_upper) in &cands {
            if ratio <= relaxed && best.is_none_or(|(_, a, _, _)| alpha > a) {
                best = Some((r, alpha, ratio, to_upper));
            }
        }
        match best {
            Some((r, _, ratio, to_upper)) => (ratio, Some((r, to_upper))),
            None => (f64::INFINITY, None),
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let piv = self.a[r * nc + j];
        {
            let row = &mut self.a[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[j] = 1.0;
        }
        let nz: Vec<usize> = (0..nc).filter(|&c| self.a[r * nc + c] != 0.0).collect();
        let prow: Vec<f64> = nz.iter().map(|&c| self.a[r * nc + c]).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * nc + j];
            if f == 0.0 {
                continue;
            }
            let base = i * nc;
            for (&c, &v) in nz.iter().zip(&prow) {
                self.a[base + c] -= f * v;
            }
            self.a[base + j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for (&c, &v) in nz.iter().zip(&prow) {
                self.d[c] -= f * v;
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
        self.row_of[j] = Some(r);
        self.since_refactor += 1;
    }

    /// `B^{-1}` read off the tableau's initial-basis columns, if it still
    /// inverts the basis to within `INVERSE_TOL`.
    fn tracked_inverse(&self) -> Option<DMatrix<f64>> {
        let (m, nc) = (self.m, self.ncols);
        let x = DMatrix::from_fn(m, m, |r, c| self.a[r * nc + self.basis0[c]]);
        // Residual B X - I, accumulated row by row through B's sparse columns.
        let mut bx = DMatrix::<f64>::zeros(m, m);
        for (c, &bc) in self.basis.iter().enumerate() {
            for &(i, v) in &self.a0[bc] {
                for k in 0..m {
                    bx[(i, k)] += v * x[(c, k)];
                }
            }
        }
        for k in 0..m {
            bx[(k, k)] -= 1.0;
        }
        let worst = bx.iter().fold(0.0f64, |w, v| w.max(v.abs()));
        (worst <= INVERSE_TOL).then_some(x)
    }

    fn reinvert(&mut self) -> Result<(), LpError> {
        if self.refactor() {
            Ok(())
        } else {
            Err(LpError::SingularBasis)
        }
    }

    /// Recomputes the tableau, basic values and reduced costs from the
    /// original data and the current basis. Returns false (leaving the
    /// tableau untouched) when the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        let (m, nc) = (self.m, self.ncols);
        let binv = match self.tracked_inverse() {
            Some(x) => x,
            None => {
                let mut b = DMatrix::zeros(m, m);
                for (c, &bc) in self.basis.iter().enumerate() {
                    for &(r, v) in &self.a0[bc] {
                        b[(r, c)] = v;
                    }
                }
                match b.lu().try_inverse() {
                    Some(x) => x,
                    None => return false,
                }
            }
        };
        self.a.fill(0.0);
        for (c, col) in self.a0.iter().enumerate() {
            for &(k, v) in col {
                for r in 0..m {
                    self.a[r * nc + c] += binv[(r, k)] * v;
                }
            }
        }
        let mut rhs = DVector::from_column_slice(&self.rhs0);
        for j in 0..nc {
            if self.row_of[j].is_none() && self.at_upper[j] {
                for &(r, v) in &self.a0[j] {
                    rhs[r] -= v * self.upper[j];
                }
            }
        }
        let beta = &binv * rhs;
        self.beta.copy_from_slice(beta.as_slice());
        for (r, &bc) in self.basis.iter().enumerate() {
            for c in 0..m {
                self.a[c * nc + bc] = if c == r { 1.0 } else { 0.0 };
            }
        }
        self.d.copy_from_slice(&self.cost);
        for (r, &bc) in self.basis.iter().enumerate() {
            let cb = self.cost[bc];
            if cb != 0.0 {
                for j in 0..nc {
                    self.d[j] -= cb * self.a[r * nc + j];
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
        self.since_refactor = 0;
        true
    }

    /// After phase one, swap zero-valued basic artificials for structural or
    /// slack columns where the row allows it. Rows with no such column are
    /// redundant; their artificial stays basic at zero.
    fn drive_out_artificials(&mut self, first_artificial: usize) {
        for r in 0..self.m {
            if self.basis[r] < first_artificial {
                continue;
            }
            let row = self.row(r);
            let mut best: Option<(usize, f64)> = None;
            for (c, &v) in row.iter().enumerate().take(first_artificial) {
                if self.row_of[c].is_none() && v.abs() > PIVOT_EPS
                    && best.is_none_or(|(_, bv)| v.abs() > bv) {
                        best = Some((c, v.abs()));
                    }
            }
            if let Some((c, _)) = best {
                let value = if self.at_upper[c] { self.upper[c] } else { 0.0 };
                let old = self.basis[r];
                // Degenerate pivot: the artificial is (numerically) zero.
                self.pivot(r, c);
                self.beta[r] = value;
                self.row_of[old] = None;
                self.at_upper[old] = false;
                self.at_upper[c] = false;
            }
        }
    }
}
