//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::fmt;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpError, LpSolution, LpStatus, Sense, VarId, INTEGRALITY_TOL};
use super::simplex::{solve_from, StartBasis};

/// Nodes whose bound is within this of the incumbent are pruned.
const PRUNE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
}

impl fmt::Display for MilpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MilpStatus::Optimal => "OPTIMAL",
            MilpStatus::Infeasible => "INFEASIBLE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// One entry per requested binary, in the order given.
    pub assignment: Vec<bool>,
    pub x: Vec<f64>,
    pub objective: f64,
    /// LP relaxations solved, including the root and the final polish.
    pub nodes: usize,
}

struct Node {
    /// Minimization-sense LP bound.
    bound: f64,
    seq: u64,
    fixings: Vec<(usize, f64)>,
    x: Vec<f64>,
    basis: Option<StartBasis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smaller bound (then older node) ranks higher.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn with_fixings(base: &LinearProgram, binaries: &[VarId], fixings: &[(usize, f64)]) -> LinearProgram {
    let mut lp = base.clone();
    for &(k, v) in fixings {
        lp.set_bounds(binaries[k], v, v);
    }
    lp
}

/// Most fractional binary, lowest index on ties.
fn branching_candidate(x: &[f64], binaries: &[VarId]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in binaries.iter().enumerate() {
        let val = x[v.0];
        let frac = (val - val.floor()).min(val.ceil() - val);
        if frac > INTEGRALITY_TOL && best.map_or(true, |(_, f)| frac > f) {
            best = Some((k, frac));
        }
    }
    best.map(|(k, _)| k)
}

pub fn solve_milp(lp: &LinearProgram, binaries: &[VarId]) -> Result<MilpSolution, LpError> {
    for v in binaries {
        let var = lp
            .variables()
            .get(v.0)
            .ok_or(LpError::NotBinary(v.0))?;
        if var.lower < 0.0 || var.upper > 1.0 {
            return Err(LpError::NotBinary(v.0));
        }
    }
    let sign = match lp.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut nodes = 0usize;
    let mut seq = 0u64;
    let mut heap = BinaryHeap::new();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;

    // Node LPs start from the parent's final basis; fixing one more binary
    // usually needs only a few pivots from there.
    let solve_node = |fixings: &[(usize, f64)],
                      start: Option<&StartBasis>,
                      nodes: &mut usize|
     -> Result<(LpSolution, Option<StartBasis>), LpError> {
        *nodes += 1;
        solve_from(&with_fixings(lp, binaries, fixings), start)
    };

    let (root, root_basis) = solve_node(&[], None, &mut nodes)?;
    match root.status {
        LpStatus::Infeasible => {
            return Ok(MilpSolution {
                status: MilpStatus::Infeasible,
                assignment: Vec::new(),
                x: Vec::new(),
                objective: f64::NAN,
                nodes,
            })
        }
        LpStatus::Unbounded => return Err(LpError::UnboundedRelaxation),
        LpStatus::Optimal => {}
    }
    heap.push(Node {
        bound: sign * root.objective,
        seq,
        fixings: Vec::new(),
        x: root.x,
        basis: root_basis,
    });

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - PRUNE_TOL {
                break;
            }
        }
        match branching_candidate(&node.x, binaries) {
            None => {
                // Integral within tolerance: re-solve with the rounded binaries
                // fixed so the continuous part is exactly consistent.
                let fixings: Vec<(usize, f64)> = binaries
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (k, node.x[v.0].round()))
                    .collect();
                let (polished, _) = solve_node(&fixings, node.basis.as_ref(), &mut nodes)?;
                if polished.is_optimal() {
                    let obj = sign * polished.objective;
                    if incumbent.as_ref().map_or(true, |(best, _)| obj < best - PRUNE_TOL) {
                        incumbent = Some((obj, polished.x));
                    }
                }
            }
            Some(k) => {
                for value in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((k, value));
                    let (child, basis) = solve_node(&fixings, node.basis.as_ref(), &mut nodes)?;
                    if !child.is_optimal() {
                        continue;
                    }
                    let bound = sign * child.objective;
                    if incumbent.as_ref().map_or(false, |(best, _)| bound >= best - PRUNE_TOL) {
                        continue;
                    }
                    seq += 1;
                    heap.push(Node {
                        bound,
                        seq,
                        fixings,
                        x: child.x,
                        basis,
                    });
                }
            }
        }
    }

    Ok(match incumbent {
        Some((obj, x)) => MilpSolution {
            status: MilpStatus::Optimal,
            assignment: binaries.iter().map(|v| x[v.0] > 0.5).collect(),
            objective: sign * obj,
            x,
            nodes,
        },
        None => MilpSolution {
            status: MilpStatus::Infeasible,
            assignment: Vec::new(),
            x: Vec::new(),
            objective: f64::NAN,
            nodes,
        },
    })
}
