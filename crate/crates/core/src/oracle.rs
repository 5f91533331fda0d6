//! Independent checks of the screening LPs and of branch-and-bound.
//!
//! The grid oracle never builds the joint screening LP. For a fixed load it
//! solves the injection-space (PTDF) dispatch problem that pushes one branch
//! flow to its extreme, and searches the load box for the best such value.
//! Every value it finds is attained by an actual load, so the grid extreme is
//! a lower bound on the true extreme (upper bounds) and the LP extreme must
//! not fall below it. The extreme as a function of load is concave, so box
//! vertices are not enough; the search uses a coordinate grid, then pattern,
//! pair and random-direction moves with shrinking steps.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caseio::{FlowBound, Network, Side};
use crate::dcmodel::{build_dc, build_ptdf, DcSystem, PtdfMatrix};
use crate::lpcore::{solve_lp, LinearProgram, LpError, Relation, Sense, VarId};
use crate::opfsolve::{Form, OpfError, OpfModel};
use crate::screening::{screen_bound, LoadSet, ScreenConfig, ScreenError};

/// Largest network the grid oracle accepts.
pub const GRID_MAX_BUSES: usize = 30;
/// Largest generator count for the commitment oracle.
pub const UC_MAX_GENS: usize = 12;
/// One-sided soundness tolerance: LP extreme >= grid extreme - this.
pub const SOUNDNESS_TOL: f64 = 1e-6;
/// Closeness tolerance after refinement, per-unit.
pub const CLOSENESS_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Grid points per load dimension.
    pub resolution: usize,
    /// Random directions tried per refinement round.
    pub random_directions: usize,
    /// Refinement stops once the step is below this fraction of the box width.
    pub min_step: f64,
    pub seed: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            resolution: 9,
            random_directions: 32,
            min_step: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("grid oracle is limited to {GRID_MAX_BUSES} buses (case has {0})")]
    TooManyBuses(usize),
    #[error("commitment oracle is limited to {UC_MAX_GENS} generators (case has {0})")]
    TooManyGenerators(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error(transparent)]
    Opf(#[from] OpfError),
    #[error(transparent)]
    Dc(#[from] crate::dcmodel::DcError),
}

/// Flow extreme of one branch at a fixed load, in injection space.
struct FixedLoadProblem<'a> {
    lp: LinearProgram,
    ptdf: &'a PtdfMatrix,
    /// `(row, branch position, f_max)` of every flow row.
    flow_rows: Vec<(usize, usize, f64)>,
    balance_row: usize,
    branch: usize,
    sign: f64,
}

impl<'a> FixedLoadProblem<'a> {
    fn new(dc: &'a DcSystem, ptdf: &'a PtdfMatrix, branch: usize, side: Side, relax_pmin: bool) -> Result<Self, LpError> {
        let sense = match side {
            Side::Upper => Sense::Maximize,
            Side::Lower => Sense::Minimize,
        };
        let mut lp = LinearProgram::new(sense);
        let row = |k: usize| ptdf.entries.row(k);
        let p: Vec<VarId> = (0..dc.gen_bus.len())
            .map(|g| {
                let lo = if relax_pmin { 0.0 } else { dc.p_min[g] };
                lp.add_var(format!("p{g}"), lo, dc.p_max[g], row(branch)[dc.gen_bus[g]])
            })
            .collect();
        let balance_row = lp.add_constraint("balance", p.iter().map(|&v| (v, 1.0)), Relation::Eq(0.0))?;
        let mut flow_rows = Vec::new();
        for k in 0..dc.num_branches() {
            let Some(f) = dc.f_max[k] else { continue };
            let terms = p.iter().enumerate().map(|(g, &v)| (v, row(k)[dc.gen_bus[g]]));
            let r = lp.add_constraint(format!("flow{k}"), terms, Relation::Range(-f, f))?;
            flow_rows.push((r, k, f));
        }
        Ok(FixedLoadProblem {
            lp,
            ptdf,
            flow_rows,
            balance_row,
            branch,
            sign: if side == Side::Upper { 1.0 } else { -1.0 },
        })
    }

    /// `sign * extreme flow` at load `d`, or `-inf` if `d` cannot be served.
    fn value(&mut self, d: &[f64]) -> Result<f64, LpError> {
        let md = |k: usize| -> f64 { self.ptdf.entries.row(k).iter().zip(d).map(|(m, x)| m * x).sum() };
        self.lp.set_relation(self.balance_row, Relation::Eq(d.iter().sum()));
        for i in 0..self.flow_rows.len() {
            let (r, k, f) = self.flow_rows[i];
            let s = md(k);
            self.lp.set_relation(r, Relation::Range(s - f, s + f));
        }
        let offset = -md(self.branch);
        self.lp.set_offset(offset);
        let sol = solve_lp(&self.lp)?;
        Ok(if sol.is_optimal() {
            self.sign * sol.objective
        } else {
            f64::NEG_INFINITY
        })
    }
}

/// Best value of a function over a box found by grid search plus refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub best: f64,
    pub point: Vec<f64>,
    pub evaluations: usize,
}

/// Maximizes `f` over `[lower, upper]`. Dimensions with zero width stay fixed.
pub fn search_box(
    lower: &[f64],
    upper: &[f64],
    opts: &GridOptions,
    mut f: impl FnMut(&[f64]) -> Result<f64, LpError>,
) -> Result<SearchResult, LpError> {
    let n = lower.len();
    let free: Vec<usize> = (0..n).filter(|&i| upper[i] > lower[i]).collect();
    let r = opts.resolution.max(2);
    let level = |i: usize, k: usize| lower[i] + (upper[i] - lower[i]) * k as f64 / (r - 1) as f64;
    let mut evaluations = 0usize;
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut eval_grid = |idx: &[usize], f: &mut dyn FnMut(&[f64]) -> Result<f64, LpError>, evaluations: &mut usize| {
        if let Some(&v) = cache.get(idx) {
            return Ok(v);
        }
        let mut d = lower.to_vec();
        for (slot, &i) in free.iter().enumerate() {
            d[i] = level(i, idx[slot]);
        }
        *evaluations += 1;
        let v = f(&d)?;
        cache.insert(idx.to_vec(), v);
        Ok::<f64, LpError>(v)
    };

    // grid stage: best of a few starts, then coordinate sweeps
    let m = free.len();
    let mut best_idx = vec![(r - 1) / 2; m];
    let mut best = eval_grid(&best_idx, &mut f, &mut evaluations)?;
    for start in [vec![0; m], vec![r - 1; m]] {
        let v = eval_grid(&start, &mut f, &mut evaluations)?;
        if v > best {
            best = v;
            best_idx = start;
        }
    }
    loop {
        let mut improved = false;
        for slot in 0..m {
            for k in 0..r {
                let mut trial = best_idx.clone();
                trial[slot] = k;
                let v = eval_grid(&trial, &mut f, &mut evaluations)?;
                if v > best + 1e-12 {
                    best = v;
                    best_idx = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mut point = lower.to_vec();
    for (slot, &i) in free.iter().enumerate() {
        point[i] = level(i, best_idx[slot]);
    }
    if m == 0 {
        return Ok(SearchResult {
            best,
            point,
            evaluations,
        });
    }

    // continuous refinement
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let width: Vec<f64> = (0..n).map(|i| upper[i] - lower[i]).collect();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut try_move = |dir: &[f64], h: f64, point: &mut Vec<f64>, best: &mut f64, evaluations: &mut usize| -> Result<bool, LpError> {
        let mut cand = point.clone();
        for &i in &free {
            cand[i] += h * dir[i] * width[i];
        }
        clamp(&mut cand);
        if cand == *point {
            return Ok(false);
        }
        *evaluations += 1;
        let v = f(&cand)?;
        if v > *best + 1e-12 {
            *best = v;
            *point = cand;
            return Ok(true);
        }
        Ok(false)
    };
    let mut h = 0.5 / (r - 1) as f64;
    while h >= opts.min_step {
        let mut improved = false;
        let mut dir = vec![0.0; n];
        for &i in &free {
            for s in [1.0, -1.0] {
                dir[i] = s;
                improved |= try_move(&dir, h, &mut point, &mut best, &mut evaluations)?;
                dir[i] = 0.0;
            }
        }
        for (a, &i) in free.iter().enumerate() {
            for &j in &free[a + 1..] {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    dir[i] = si;
                    dir[j] = sj;
                    improved |= try_move(&dir, h, &mut point, &mut best, &mut evaluations)?;
                    dir[i] = 0.0;
                    dir[j] = 0.0;
                }
            }
        }
        for _ in 0..opts.random_directions {
            for &i in &free {
                dir[i] = rng.gen_range(-1.0..=1.0);
            }
            improved |= try_move(&dir, h, &mut point, &mut best, &mut evaluations)?;
        }
        for &i in &free {
            dir[i] = 0.0;
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(SearchResult {
        best,
        point,
        evaluations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub bound: FlowBound,
    pub lp_extreme: f64,
    pub grid_extreme: f64,
    pub evaluations: usize,
    /// LP extreme is not beaten by any load the search found.
    pub sound: bool,
    /// LP and search agree within `CLOSENESS_TOL`.
    pub close: bool,
}

impl GridCheck {
    pub fn passed(&self) -> bool {
        self.sound && self.close
    }
}

/// Compares the screening LP extreme of every bound with the grid search.
pub fn grid_oracle(
    network: &Network,
    loadset: &LoadSet,
    config: &ScreenConfig,
    bounds: &[FlowBound],
    opts: &GridOptions,
) -> Result<Vec<GridCheck>, OracleError> {
    if network.buses.len() > GRID_MAX_BUSES {
        return Err(OracleError::TooManyBuses(network.buses.len()));
    }
    let dc = build_dc(network);
    let ptdf = build_ptdf(&dc)?;
    let mut out = Vec::with_capacity(bounds.len());
    for &bound in bounds {
        let cert = screen_bound(&dc, loadset, bound, config, &BTreeSet::new())?;
        let lp_extreme = cert.extreme_flow.expect("optimization verdict");
        let k = dc.branch_position(bound.branch_id).expect("bound of this network");
        let mut prob = FixedLoadProblem::new(&dc, &ptdf, k, bound.side, config.relax_pmin)?;
        let res = search_box(&loadset.lower, &loadset.upper, opts, |d| prob.value(d))?;
        let sign = if bound.side == Side::Upper { 1.0 } else { -1.0 };
        let grid_extreme = sign * res.best;
        // both in the maximizing direction
        let (lp_dir, grid_dir) = (sign * lp_extreme, res.best);
        out.push(GridCheck {
            bound,
            lp_extreme,
            grid_extreme,
            evaluations: res.evaluations,
            sound: lp_dir >= grid_dir - SOUNDNESS_TOL,
            close: lp_dir - grid_dir <= CLOSENESS_TOL,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcCheck {
    pub sample: usize,
    pub milp_objective: f64,
    pub brute_force_objective: f64,
    pub passed: bool,
}

/// Branch-and-bound against enumeration on each load.
pub fn uc_oracle(
    network: &Network,
    loads: &[Vec<f64>],
    redundant: &BTreeSet<FlowBound>,
    segments: usize,
    tol: f64,
) -> Result<Vec<UcCheck>, OracleError> {
    if network.generators.len() > UC_MAX_GENS {
        return Err(OracleError::TooManyGenerators(network.generators.len()));
    }
    let model = OpfModel::new(network, segments)?;
    let mut out = Vec::new();
    for (sample, load) in loads.iter().enumerate() {
        let bb = model.commit(load, redundant, Form::Theta)?;
        let bf = model.brute_force(load, redundant)?;
        let passed = match (bb.status == bf.status, bb.objective, bf.objective) {
            (false, _, _) => false,
            (true, a, b) if a.is_nan() && b.is_nan() => true,
            (true, a, b) => (a - b).abs() <= tol * b.abs().max(1.0),
        };
        out.push(UcCheck {
            sample,
            milp_objective: bb.objective,
            brute_force_objective: bf.objective,
            passed,
        });
    }
    Ok(out)
}
