//! Full and reduced DC OPF and single-period unit commitment.
//!
//! Quadratic costs enter through secant segments: `p = p_min + sum s_k`
//! with `0 <= s_k <= width_k` and cost `cost(p_min) + sum slope_k s_k`. The
//! slopes increase, so the LP fills segments in order. In the commitment
//! model `p = p_min z + sum s_k` and `sum s_k <= (p_max - p_min) z`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caseio::{FlowBound, Network, Side};
use crate::dcmodel::{build_dc, build_ptdf, line_flows, AngleSolver, DcError, DcSystem, PtdfMatrix};
use crate::lpcore::{
    piecewise_linearize, solve_lp, solve_milp, LinearProgram, LpError, LpStatus, MilpStatus, PiecewiseCost,
    Relation, Sense, VarId,
};
use crate::screening::add_theta_network;

pub const DEFAULT_SEGMENTS: usize = 10;
/// A flow within this distance of its limit is reported as binding.
pub const BINDING_TOL: f64 = 1e-6;
/// Largest generator count `brute_force_uc` will enumerate.
pub const BRUTE_FORCE_MAX_GENS: usize = 20;

#[derive(Debug, Error)]
pub enum OpfError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Dc(#[from] DcError),
    #[error("load vector has {got} entries, network has {expected} buses")]
    Dimension { expected: usize, got: usize },
    #[error("brute force over {0} generators refused (limit {BRUTE_FORCE_MAX_GENS})")]
    TooManyGenerators(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Theta,
    Ptdf,
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Theta => "theta",
            Form::Ptdf => "ptdf",
        })
    }
}

impl FromStr for Form {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "theta" => Ok(Form::Theta),
            "ptdf" => Ok(Form::Ptdf),
            _ => Err(format!("unknown form `{s}` (expected theta or ptdf)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub status: LpStatus,
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub flows: Vec<f64>,
    pub objective: f64,
    /// Rated bounds whose flow is within `BINDING_TOL` of the limit.
    pub binding: Vec<FlowBound>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitmentSolution {
    pub status: MilpStatus,
    pub z: Vec<bool>,
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Branch-and-bound nodes, or LPs solved by enumeration.
    pub nodes: usize,
}

/// Variable handles of a dispatch or commitment LP.
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub p: Vec<VarId>,
    pub z: Vec<VarId>,
    pub theta: Vec<VarId>,
}

/// Network data prepared once and reused across many loads.
pub struct OpfModel {
    pub dc: DcSystem,
    pub ptdf: PtdfMatrix,
    angles: AngleSolver,
    costs: Vec<PiecewiseCost>,
}

impl OpfModel {
    pub fn new(network: &Network, segments: usize) -> Result<Self, OpfError> {
        let dc = build_dc(network);
        let ptdf = build_ptdf(&dc)?;
        let angles = AngleSolver::new(&dc)?;
        let costs = network
            .generators
            .iter()
            .map(|g| piecewise_linearize(g.c0, g.c1, g.c2, g.p_min, g.p_max, segments))
            .collect::<Result<_, _>>()?;
        Ok(OpfModel {
            dc,
            ptdf,
            angles,
            costs,
        })
    }

    pub fn num_generators(&self) -> usize {
        self.costs.len()
    }

    fn check_load(&self, load: &[f64]) -> Result<(), OpfError> {
        if load.len() != self.dc.num_buses() {
            return Err(OpfError::Dimension {
                expected: self.dc.num_buses(),
                got: load.len(),
            });
        }
        Ok(())
    }

    /// Builds the dispatch LP (`commit = false`) or the commitment model with
    /// binary `z` (`commit = true`). Only bounds outside `redundant` are enforced.
    pub fn build(
        &self,
        load: &[f64],
        redundant: &BTreeSet<FlowBound>,
        form: Form,
        commit: bool,
    ) -> Result<(LinearProgram, ModelVars), OpfError> {
        self.check_load(load)?;
        let dc = &self.dc;
        let mut lp = LinearProgram::new(Sense::Minimize);
        let mut offset = 0.0;
        let mut p = Vec::new();
        let mut z = Vec::new();
        for (g, cost) in self.costs.iter().enumerate() {
            let (lo, hi) = (dc.p_min[g], dc.p_max[g]);
            let pg = if commit {
                lp.add_var(format!("p{}", g + 1), 0.0_f64.min(lo), hi, 0.0)
            } else {
                lp.add_var(format!("p{}", g + 1), lo, hi, 0.0)
            };
            let mut link = vec![(pg, 1.0)];
            let mut cap = Vec::new();
            for (k, (width, slope)) in cost.segments().enumerate() {
                let s = lp.add_var(format!("s{}_{}", g + 1, k + 1), 0.0, width, slope);
                link.push((s, -1.0));
                cap.push((s, 1.0));
            }
            if commit {
                let zg = lp.add_var(format!("z{}", g + 1), 0.0, 1.0, cost.base_cost());
                link.push((zg, -lo));
                lp.add_constraint(format!("segments_{}", g + 1), link, Relation::Eq(0.0))?;
                cap.push((zg, -(hi - lo)));
                lp.add_constraint(format!("capacity_{}", g + 1), cap, Relation::Le(0.0))?;
                z.push(zg);
            } else {
                offset += cost.base_cost();
                lp.add_constraint(format!("segments_{}", g + 1), link, Relation::Eq(lo))?;
            }
            p.push(pg);
        }
        lp.set_offset(offset);
        let enforced = |id: usize, side: Side| !redundant.contains(&FlowBound { branch_id: id, side });

        let theta = match form {
            Form::Theta => {
                let theta: Vec<VarId> = (0..dc.num_buses())
                    .map(|i| {
                        let (lo, hi) = if i == dc.slack {
                            (0.0, 0.0)
                        } else {
                            (f64::NEG_INFINITY, f64::INFINITY)
                        };
                        lp.add_var(format!("theta_{}", dc.bus_ids[i]), lo, hi, 0.0)
                    })
                    .collect();
                add_theta_network(&mut lp, dc, &p, &theta, None, Some(load), &enforced)?;
                theta
            }
            Form::Ptdf => {
                let total: f64 = load.iter().sum();
                lp.add_constraint("balance", p.iter().map(|&v| (v, 1.0)), Relation::Eq(total))?;
                for k in 0..dc.num_branches() {
                    let Some(fmax) = dc.f_max[k] else { continue };
                    let id = dc.branch_ids[k];
                    let row = self.ptdf.entries.row(k);
                    let md: f64 = load.iter().enumerate().map(|(i, d)| row[i] * d).sum();
                    let rel = match (enforced(id, Side::Upper), enforced(id, Side::Lower)) {
                        (true, true) => Relation::Range(md - fmax, md + fmax),
                        (true, false) => Relation::Le(md + fmax),
                        (false, true) => Relation::Ge(md - fmax),
                        (false, false) => continue,
                    };
                    let terms = p.iter().enumerate().map(|(g, &v)| (v, row[dc.gen_bus[g]]));
                    lp.add_constraint(format!("flow_{id}"), terms, rel)?;
                }
                Vec::new()
            }
        };
        Ok((lp, ModelVars { p, z, theta }))
    }

    /// Angles for a dispatch: read from the LP in theta form, solved otherwise.
    fn angles_for(&self, x: &[f64], vars: &ModelVars, p: &[f64], load: &[f64]) -> Result<Vec<f64>, OpfError> {
        if vars.theta.is_empty() {
            Ok(self.angles.solve(&self.dc.injections(p, load))?)
        } else {
            Ok(vars.theta.iter().map(|v| x[v.0]).collect())
        }
    }

    fn binding(&self, flows: &[f64]) -> Vec<FlowBound> {
        let mut out = Vec::new();
        for (k, &f) in flows.iter().enumerate() {
            let Some(fmax) = self.dc.f_max[k] else { continue };
            let branch_id = self.dc.branch_ids[k];
            if f >= fmax - BINDING_TOL {
                out.push(FlowBound {
                    branch_id,
                    side: Side::Upper,
                });
            }
            if f <= -fmax + BINDING_TOL {
                out.push(FlowBound {
                    branch_id,
                    side: Side::Lower,
                });
            }
        }
        out
    }

    pub fn dispatch(
        &self,
        load: &[f64],
        redundant: &BTreeSet<FlowBound>,
        form: Form,
    ) -> Result<DispatchSolution, OpfError> {
        let (lp, vars) = self.build(load, redundant, form, false)?;
        let sol = solve_lp(&lp)?;
        if !sol.is_optimal() {
            return Ok(DispatchSolution {
                status: sol.status,
                p: Vec::new(),
                theta: Vec::new(),
                flows: Vec::new(),
                objective: f64::NAN,
                binding: Vec::new(),
                iterations: sol.iterations,
            });
        }
        let p: Vec<f64> = vars.p.iter().map(|&v| sol.value(v)).collect();
        let theta = self.angles_for(&sol.x, &vars, &p, load)?;
        let flows = line_flows(&self.dc, &theta)?;
        Ok(DispatchSolution {
            status: LpStatus::Optimal,
            binding: self.binding(&flows),
            p,
            theta,
            flows,
            objective: sol.objective,
            iterations: sol.iterations,
        })
    }

    pub fn commit(
        &self,
        load: &[f64],
        redundant: &BTreeSet<FlowBound>,
        form: Form,
    ) -> Result<CommitmentSolution, OpfError> {
        let (lp, vars) = self.build(load, redundant, form, true)?;
        let sol = solve_milp(&lp, &vars.z)?;
        if sol.status != MilpStatus::Optimal {
            return Ok(infeasible_commitment(sol.nodes));
        }
        let p: Vec<f64> = vars.p.iter().map(|v| sol.x[v.0]).collect();
        Ok(CommitmentSolution {
            status: MilpStatus::Optimal,
            z: sol.assignment,
            theta: self.angles_for(&sol.x, &vars, &p, load)?,
            p,
            objective: sol.objective,
            nodes: sol.nodes,
        })
    }

    /// Solves the commitment LP for every `z` in lexicographic order and keeps
    /// the first strictly cheapest one.
    pub fn brute_force(&self, load: &[f64], redundant: &BTreeSet<FlowBound>) -> Result<CommitmentSolution, OpfError> {
        let g = self.num_generators();
        if g > BRUTE_FORCE_MAX_GENS {
            return Err(OpfError::TooManyGenerators(g));
        }
        let (mut lp, vars) = self.build(load, redundant, Form::Theta, true)?;
        let mut best: Option<(f64, Vec<bool>, Vec<f64>)> = None;
        let count = 1usize << g;
        for mask in 0..count {
            // z_1 is the most significant digit
            let z: Vec<bool> = (0..g).map(|i| (mask >> (g - 1 - i)) & 1 == 1).collect();
            for (&v, &on) in vars.z.iter().zip(&z) {
                let val = if on { 1.0 } else { 0.0 };
                lp.set_bounds(v, val, val);
            }
            let sol = solve_lp(&lp)?;
            if sol.is_optimal() && best.as_ref().map_or(true, |b| sol.objective < b.0) {
                best = Some((sol.objective, z, sol.x));
            }
        }
        let Some((objective, z, x)) = best else {
            return Ok(infeasible_commitment(count));
        };
        let p: Vec<f64> = vars.p.iter().map(|v| x[v.0]).collect();
        Ok(CommitmentSolution {
            status: MilpStatus::Optimal,
            z,
            theta: self.angles_for(&x, &vars, &p, load)?,
            p,
            objective,
            nodes: count,
        })
    }
}

fn infeasible_commitment(nodes: usize) -> CommitmentSolution {
    CommitmentSolution {
        status: MilpStatus::Infeasible,
        z: Vec::new(),
        p: Vec::new(),
        theta: Vec::new(),
        objective: f64::NAN,
        nodes,
    }
}

pub fn solve_dcopf(
    network: &Network,
    load: &[f64],
    redundant: &BTreeSet<FlowBound>,
    form: Form,
    segments: usize,
) -> Result<DispatchSolution, OpfError> {
    OpfModel::new(network, segments)?.dispatch(load, redundant, form)
}

pub fn solve_uc(
    network: &Network,
    load: &[f64],
    redundant: &BTreeSet<FlowBound>,
    form: Form,
    segments: usize,
) -> Result<CommitmentSolution, OpfError> {
    OpfModel::new(network, segments)?.commit(load, redundant, form)
}

pub fn brute_force_uc(
    network: &Network,
    load: &[f64],
    redundant: &BTreeSet<FlowBound>,
    segments: usize,
) -> Result<CommitmentSolution, OpfError> {
    OpfModel::new(network, segments)?.brute_force(load, redundant)
}

/// Largest violation of each constraint class, plus every violated flow bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub balance: f64,
    pub generation: f64,
    pub flow: f64,
    pub bounds: Vec<(FlowBound, f64)>,
}

impl ViolationReport {
    pub fn max(&self) -> f64 {
        self.balance.max(self.generation).max(self.flow)
    }

    pub fn on(&self, bound: FlowBound) -> f64 {
        self.bounds.iter().find(|b| b.0 == bound).map_or(0.0, |b| b.1)
    }
}

/// Checks a point against every original constraint, screened or not.
/// With `z`, generator limits are `p_min z <= p <= p_max z`.
pub fn check_point(network: &Network, p: &[f64], theta: &[f64], load: &[f64], z: Option<&[bool]>) -> ViolationReport {
    let dc = build_dc(network);
    let mut rep = ViolationReport::default();
    for (g, gen) in network.generators.iter().enumerate() {
        let on = z.map_or(1.0, |z| if z[g] { 1.0 } else { 0.0 });
        let (lo, hi) = (gen.p_min * on, gen.p_max * on);
        let v = (lo - p[g]).max(p[g] - hi).max(0.0);
        rep.generation = rep.generation.max(v);
    }
    let mut residual = dc.injections(p, load);
    let flows = line_flows(&dc, theta).expect("theta has one entry per bus");
    for (k, &f) in flows.iter().enumerate() {
        residual[dc.from[k]] -= f;
        residual[dc.to[k]] += f;
        let Some(fmax) = dc.f_max[k] else { continue };
        let branch_id = dc.branch_ids[k];
        for (side, v) in [(Side::Upper, f - fmax), (Side::Lower, -fmax - f)] {
            if v > 0.0 {
                rep.bounds.push((FlowBound { branch_id, side }, v));
                rep.flow = rep.flow.max(v);
            }
        }
    }
    rep.balance = residual.iter().fold(0.0, |m, r| m.max(r.abs()));
    rep
}

pub fn verify_dispatch(network: &Network, solution: &DispatchSolution, load: &[f64]) -> ViolationReport {
    check_point(network, &solution.p, &solution.theta, load, None)
}

pub fn verify_commitment(network: &Network, solution: &CommitmentSolution, load: &[f64]) -> ViolationReport {
    check_point(network, &solution.p, &solution.theta, load, Some(&solution.z))
}
