//! Primal revised simplex over general variable bounds.
//!
//! Every row `lo <= a.x <= hi` gets a logical variable `r = a.x` carrying the
//! row interval as its bounds, so the working system is `A x - r = 0` with
//! all limits expressed as variable bounds. Phase one adds an artificial to
//! each row that the starting point violates and minimizes their sum.

use super::audit;
use super::factor::BasisFactor;
use super::lp::{LinearProgram, LpError, LpSolution, LpStatus, Sense, FEASIBILITY_TOL, OPTIMALITY_TOL};

const PRIMAL_TOL: f64 = 1e-9;
/// Column entries below this (absolute, and relative to the largest entry)
/// never block a step.
const BLOCK_TOL: f64 = 1e-9;
const BLOCK_TOL_REL: f64 = 1e-11;
/// Pivots below this are used only when no larger tied pivot exists.
const PIVOT_TOL: f64 = 1e-7;
const PIVOT_TOL_REL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const REFACTOR_EVERY: usize = 64;
const STALL_LIMIT: usize = 50;
const MAX_PIVOTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

/// Nonbasic/basic states of the structural and logical columns at an
/// optimum, used to start a closely related LP.
#[derive(Clone, Debug)]
pub(crate) struct StartBasis(Vec<State>);

pub(crate) fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_from(lp, None).map(|(sol, _)| sol)
}

/// Solves `lp`, starting from `start` when it still gives a usable basis and
/// cold otherwise. Also returns the final basis when one exists.
pub(crate) fn solve_from(
    lp: &LinearProgram,
    start: Option<&StartBasis>,
) -> Result<(LpSolution, Option<StartBasis>), LpError> {
    let crossed_rows = lp.constraints().iter().any(|c| {
        let (lo, hi) = c.relation.interval();
        lo > hi
    });
    if lp.crossed_bounds().is_some() || crossed_rows {
        return Ok((LpSolution::without_point(LpStatus::Infeasible, 0), None));
    }
    for (j, &c) in lp.objective().iter().enumerate() {
        if !c.is_finite() {
            return Err(LpError::NonFinite(format!("objective coefficient {j}")));
        }
    }
    let warm = match start {
        Some(b) => Simplex::warm(lp, b),
        None => None,
    };
    let mut s = match warm {
        Some(s) => s,
        None => {
            let mut s = Simplex::new(lp)?;
            if !s.phase_one()? {
                return Ok((LpSolution::without_point(LpStatus::Infeasible, s.pivots), None));
            }
            s
        }
    };
    if s.phase_two(lp)? == Outcome::Unbounded {
        return Ok((LpSolution::without_point(LpStatus::Unbounded, s.pivots), None));
    }
    let sol = s.extract(lp)?;
    let residual = sol.primal_residual(lp);
    audit::record(residual, sol.relative_duality_gap());
    if residual > FEASIBILITY_TOL {
        return Err(LpError::SolverFailure(format!(
            "primal residual {residual:e} exceeds tolerance"
        )));
    }
    Ok((sol, Some(StartBasis(s.state[..s.n + s.m].to_vec()))))
}

struct Simplex {
    m: usize,
    n: usize,
    col_ptr: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    art_sign: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    factor: BasisFactor,
    pivots: usize,
    degenerate_run: usize,
    bland: bool,
    y: Vec<f64>,
    alpha: Vec<f64>,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Result<Self, LpError> {
        let n = lp.num_vars();
        let m = lp.num_constraints();
        let total = n + 2 * m;

        let mut counts = vec![0usize; n + 1];
        for c in lp.constraints() {
            for &(v, _) in &c.terms {
                counts[v.0 + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts;
        let mut fill = col_ptr.clone();
        let nnz = col_ptr[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, c) in lp.constraints().iter().enumerate() {
            for &(v, a) in &c.terms {
                let k = fill[v.0];
                col_row[k] = i;
                col_val[k] = a;
                fill[v.0] += 1;
            }
        }

        let mut lo = vec![0.0; total];
        let mut hi = vec![0.0; total];
        let mut x = vec![0.0; total];
        let mut state = vec![State::AtLower; total];
        for (j, v) in lp.variables().iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(LpError::NonFinite(format!("bounds of `{}`", v.name)));
            }
            lo[j] = v.lower;
            hi[j] = v.upper;
            if v.lower.is_finite() {
                x[j] = v.lower;
                state[j] = State::AtLower;
            } else if v.upper.is_finite() {
                x[j] = v.upper;
                state[j] = State::AtUpper;
            } else {
                x[j] = 0.0;
                state[j] = State::Free;
            }
        }

        let mut activity = vec![0.0; m];
        for j in 0..n {
            if x[j] != 0.0 {
                for k in col_ptr[j]..col_ptr[j + 1] {
                    activity[col_row[k]] += col_val[k] * x[j];
                }
            }
        }

        let mut basis = vec![0usize; m];
        let mut art_sign = vec![1.0; m];
        for (i, c) in lp.constraints().iter().enumerate() {
            let (rlo, rhi) = c.relation.interval();
            let r = n + i;
            let a = n + m + i;
            lo[r] = rlo;
            hi[r] = rhi;
            let act = activity[i];
            if act >= rlo - PRIMAL_TOL && act <= rhi + PRIMAL_TOL {
                basis[i] = r;
                state[r] = State::Basic;
                x[r] = act;
            } else {
                let (val, st) = if act < rlo {
                    (rlo, State::AtLower)
                } else {
                    (rhi, State::AtUpper)
                };
                x[r] = val;
                state[r] = st;
                // A x - r + sign * art = 0
                let need = val - act;
                art_sign[i] = need.signum();
                hi[a] = f64::INFINITY;
                x[a] = need.abs();
                basis[i] = a;
                state[a] = State::Basic;
            }
        }

        let mut s = Simplex {
            m,
            n,
            col_ptr,
            col_row,
            col_val,
            art_sign,
            lo,
            hi,
            cost: vec![0.0; total],
            x,
            state,
            basis,
            factor: BasisFactor::default(),
            pivots: 0,
            degenerate_run: 0,
            bland: false,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
        };
        s.refactor()?;
        Ok(s)
    }

    /// Starts from a previous basis. A basis made primal infeasible by
    /// tightened bounds is repaired by minimizing the infeasibility with the
    /// offending bounds loosened to the current values. Returns `None` when
    /// the basis is unusable or the repair fails; the caller then starts cold.
    fn warm(lp: &LinearProgram, start: &StartBasis) -> Option<Self> {
        let mut s = Simplex::new(lp).ok()?;
        let (n, m) = (s.n, s.m);
        if start.0.len() != n + m || start.0.iter().filter(|&&st| st == State::Basic).count() != m {
            return None;
        }
        for j in n + m..s.x.len() {
            s.hi[j] = 0.0;
            s.x[j] = 0.0;
            s.state[j] = State::AtLower;
        }
        let mut basis = Vec::with_capacity(m);
        for (j, &st) in start.0.iter().enumerate() {
            if st == State::Basic {
                basis.push(j);
                s.state[j] = State::Basic;
            } else {
                s.rest_at_bound(j, st);
            }
        }
        s.basis = basis;
        s.refactor().ok()?;

        let (lo, hi) = (s.lo.clone(), s.hi.clone());
        let mut repair = false;
        for p in 0..m {
            let b = s.basis[p];
            if s.x[b] < s.lo[b] - PRIMAL_TOL {
                s.lo[b] = s.x[b];
                s.cost[b] = -1.0;
                repair = true;
            } else if s.x[b] > s.hi[b] + PRIMAL_TOL {
                s.hi[b] = s.x[b];
                s.cost[b] = 1.0;
                repair = true;
            }
        }
        if repair {
            if s.iterate().ok()? != Outcome::Optimal {
                return None;
            }
            s.lo = lo;
            s.hi = hi;
            s.cost.iter_mut().for_each(|c| *c = 0.0);
            for j in 0..n + m {
                let st = s.state[j];
                if st != State::Basic {
                    s.rest_at_bound(j, st);
                }
            }
            s.refactor().ok()?;
            s.degenerate_run = 0;
            s.bland = false;
        }
        let feasible = s
            .basis
            .iter()
            .all(|&b| s.x[b] >= s.lo[b] - PRIMAL_TOL && s.x[b] <= s.hi[b] + PRIMAL_TOL);
        feasible.then_some(s)
    }

    /// Places nonbasic `j` on the bound its state names, or the nearest
    /// finite one.
    fn rest_at_bound(&mut self, j: usize, st: State) {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        let (x, st) = match st {
            State::AtUpper if hi.is_finite() => (hi, State::AtUpper),
            _ if lo.is_finite() => (lo, State::AtLower),
            _ if hi.is_finite() => (hi, State::AtUpper),
            _ => (0.0, State::Free),
        };
        self.x[j] = x;
        self.state[j] = st;
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        let (n, m) = (self.n, self.m);
        if j < n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else if j < n + m {
            f(j - n, -1.0);
        } else {
            f(j - n - m, self.art_sign[j - n - m]);
        }
    }

    fn column_dot_y(&self, j: usize) -> f64 {
        let (n, m) = (self.n, self.m);
        if j < n {
            (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(|k| self.col_val[k] * self.y[self.col_row[k]])
                .sum()
        } else if j < n + m {
            -self.y[j - n]
        } else {
            self.art_sign[j - n - m] * self.y[j - n - m]
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let basis = &self.basis;
        let this = &*self;
        let factor = BasisFactor::factor(self.m, |p, sink| {
            this.for_column(basis[p], |r, v| sink(r, v));
        })?;
        self.factor = factor;
        self.recompute_basic_values();
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.x.len() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |r, a| rhs[r] -= a * xj);
            }
        }
        self.factor.ftran(&mut rhs);
        for (p, &b) in self.basis.iter().enumerate() {
            self.x[b] = rhs[p];
        }
    }

    fn compute_duals(&mut self) {
        for (p, &b) in self.basis.iter().enumerate() {
            self.y[p] = self.cost[b];
        }
        self.factor.btran(&mut self.y);
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.column_dot_y(j)
    }

    /// Picks an improving nonbasic variable, or `None` at optimality.
    fn price(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.x.len() {
            let st = self.state[j];
            if st == State::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let improving = match st {
                State::AtLower => d < -OPTIMALITY_TOL,
                State::AtUpper => d > OPTIMALITY_TOL,
                State::Free => d.abs() > OPTIMALITY_TOL,
                State::Basic => false,
            };
            if !improving {
                continue;
            }
            if self.bland {
                return Some((j, d));
            }
            if best.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<Outcome, LpError> {
        let mut verified = false;
        loop {
            if self.factor.num_updates() >= REFACTOR_EVERY {
                self.refactor()?;
            }
            self.compute_duals();
            let Some((q, d)) = self.price() else {
                if verified || self.factor.num_updates() == 0 {
                    return Ok(Outcome::Optimal);
                }
                self.refactor()?;
                verified = true;
                continue;
            };
            verified = false;
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::SolverFailure(format!(
                    "no convergence after {MAX_PIVOTS} pivots"
                )));
            }
            self.pivots += 1;

            self.alpha.iter_mut().for_each(|a| *a = 0.0);
            let mut alpha = std::mem::take(&mut self.alpha);
            self.for_column(q, |r, a| alpha[r] += a);
            self.factor.ftran(&mut alpha);
            self.alpha = alpha;

            // Entering moves by dir * t; basic values move by -dir * t * alpha.
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let step = self.ratio_test(q, dir);
            let (t, leave) = match step {
                None => return Ok(Outcome::Unbounded),
                Some(s) => s,
            };

            if t <= DEGENERATE_STEP {
                self.degenerate_run += 1;
                if self.degenerate_run > STALL_LIMIT {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            self.x[q] += dir * t;
            if t != 0.0 {
                for p in 0..self.m {
                    let a = self.alpha[p];
                    if a != 0.0 {
                        self.x[self.basis[p]] -= dir * t * a;
                    }
                }
            }
            match leave {
                // Values are kept where the step leaves them rather than snapped
                // onto the bound; snapping a slightly infeasible leaving value
                // would be amplified by a small pivot into the entering variable.
                None => {
                    self.state[q] = if self.state[q] == State::AtLower {
                        State::AtUpper
                    } else {
                        State::AtLower
                    };
                }
                Some((p, to_lower)) => {
                    let b = self.basis[p];
                    self.state[b] = if to_lower { State::AtLower } else { State::AtUpper };
                    self.basis[p] = q;
                    self.state[q] = State::Basic;
                    self.factor.update(p, &self.alpha);
                }
            }
        }
    }

    /// Returns the step length and the leaving position (with the bound it
    /// reaches), `None` for the position when the entering variable flips
    /// bounds, or `None` overall when the ray is unbounded.
    #[allow(clippy::type_complexity)]
    fn ratio_test(&self, q: usize, dir: f64) -> Option<(f64, Option<(usize, bool)>)> {
        let flip = if self.lo[q].is_finite() && self.hi[q].is_finite() {
            self.hi[q] - self.lo[q]
        } else {
            f64::INFINITY
        };
        let amax = self.alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let block_tol = BLOCK_TOL.max(BLOCK_TOL_REL * amax);
        let pivot_tol = PIVOT_TOL.max(PIVOT_TOL_REL * amax);
        let exact = |p: usize| -> Option<(f64, f64, bool)> {
            let a = self.alpha[p];
            if a.abs() <= block_tol {
                return None;
            }
            let b = self.basis[p];
            let rate = dir * a; // basic value decreases at this rate
            if rate > 0.0 {
                self.lo[b]
                    .is_finite()
                    .then(|| ((self.x[b] - self.lo[b]) / rate, PRIMAL_TOL / rate, true))
            } else {
                self.hi[b]
                    .is_finite()
                    .then(|| ((self.hi[b] - self.x[b]) / -rate, PRIMAL_TOL / -rate, false))
            }
        };

        if self.bland {
            let mut tmin = flip;
            for p in 0..self.m {
                if let Some((r, _, _)) = exact(p) {
                    tmin = tmin.min(r.max(0.0));
                }
            }
            if tmin == f64::INFINITY {
                return None;
            }
            if flip <= tmin {
                return Some((flip, None));
            }
            // smallest basic index among acceptable tied pivots, else the largest tied pivot
            let mut pick: Option<(usize, bool)> = None;
            let mut fallback: Option<(usize, bool)> = None;
            for p in 0..self.m {
                if let Some((r, _, to_lower)) = exact(p) {
                    if r.max(0.0) > tmin + DEGENERATE_STEP {
                        continue;
                    }
                    if self.alpha[p].abs() >= pivot_tol {
                        if pick.map_or(true, |(pp, _)| self.basis[p] < self.basis[pp]) {
                            pick = Some((p, to_lower));
                        }
                    } else if fallback.map_or(true, |(pp, _)| self.alpha[p].abs() > self.alpha[pp].abs()) {
                        fallback = Some((p, to_lower));
                    }
                }
            }
            return pick.or(fallback).map(|leave| (tmin, Some(leave)));
        }

        // Harris two-pass: bound the step with relaxed limits, then take the
        // largest pivot among the rows that block within that bound.
        let mut tmax = f64::INFINITY;
        for p in 0..self.m {
            if let Some((r, slack, _)) = exact(p) {
                tmax = tmax.min(r + slack);
            }
        }
        if flip == f64::INFINITY && tmax == f64::INFINITY {
            return None;
        }
        if flip <= tmax {
            return Some((flip, None));
        }
        let mut pick: Option<(usize, f64, bool)> = None;
        for p in 0..self.m {
            if let Some((r, _, to_lower)) = exact(p) {
                if r <= tmax && pick.map_or(true, |(pp, _, _)| self.alpha[p].abs() > self.alpha[pp].abs()) {
                    pick = Some((p, r, to_lower));
                }
            }
        }
        pick.map(|(p, r, to_lower)| (r.max(0.0), Some((p, to_lower))))
    }

    fn phase_one(&mut self) -> Result<bool, LpError> {
        let first_art = self.n + self.m;
        let mut any = false;
        for j in first_art..self.x.len() {
            if self.hi[j] > 0.0 {
                self.cost[j] = 1.0;
                any = true;
            }
        }
        if !any {
            return Ok(true);
        }
        self.iterate()?;
        let worst = (first_art..self.x.len()).map(|j| self.x[j]).fold(0.0, f64::max);
        if worst > PRIMAL_TOL {
            return Ok(false);
        }
        for j in first_art..self.x.len() {
            self.cost[j] = 0.0;
            self.hi[j] = 0.0;
            if self.state[j] != State::Basic {
                self.x[j] = 0.0;
                self.state[j] = State::AtLower;
            }
        }
        self.degenerate_run = 0;
        self.bland = false;
        Ok(true)
    }

    fn phase_two(&mut self, lp: &LinearProgram) -> Result<Outcome, LpError> {
        let sign = match lp.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        for (j, &c) in lp.objective().iter().enumerate() {
            self.cost[j] = sign * c;
        }
        self.iterate()
    }

    fn extract(&mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        if self.factor.num_updates() > 0 {
            self.refactor()?;
        }
        self.compute_duals();
        let sign = match lp.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let primal_min: f64 = (0..self.n).map(|j| self.cost[j] * x[j]).sum();

        let mut dual_min = 0.0;
        for j in 0..self.n + self.m {
            if self.state[j] == State::Basic {
                continue;
            }
            let d = self.reduced_cost(j);
            let bound = if d > 0.0 {
                self.lo[j]
            } else if d < 0.0 {
                self.hi[j]
            } else {
                0.0
            };
            if bound.is_finite() {
                dual_min += d * bound;
            } else if d.abs() > OPTIMALITY_TOL {
                dual_min = f64::NEG_INFINITY;
            }
        }

        let duals = self.y.iter().map(|&y| sign * y).collect();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: sign * primal_min + lp.offset(),
            dual_objective: sign * dual_min + lp.offset(),
            duals,
            x,
            iterations: self.pivots,
        })
    }
}
