//! Two-step redundancy screening of branch flow limits over a box of loads.
//!
//! Step 1 compares parallel branches analytically: branches sharing a bus
//! pair see the same angle difference, so the one with the largest `b/f_max`
//! reaches its limit first and the others can never bind. Step 2 solves, for
//! every remaining bound, an LP that pushes the branch flow as far as the
//! network, generator limits, all flow limits and the load box allow.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caseio::{enumerate_flow_bounds, FlowBound, Network, Side};
use crate::dcmodel::{build_dc, DcSystem};
use crate::lpcore::{solve_lp, LinearProgram, LpError, LpStatus, Relation, Sense, VarId};

/// Default relative redundancy margin: a bound is redundant when its extreme
/// flow stays at least `MARGIN_SCALE * max(1, f_max)` inside the limit.
pub const MARGIN_SCALE: f64 = 1e-6;
/// Relative tolerance under which two `b/f_max` ratios count as equal.
pub const RATIO_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("{bound}: {source}")]
    Solver { bound: FlowBound, source: LpError },
    #[error("INFEASIBLE_SCREEN: {0}: no dispatch serves every load in the box with all limits on")]
    InfeasibleScreen(FlowBound),
    #[error("{0}: screening LP is unbounded")]
    Unbounded(FlowBound),
    #[error("unknown branch in {0}")]
    UnknownBranch(FlowBound),
    #[error("load set has {got} buses, network has {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Per-bus demand box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Variation fraction the box was built from, if any.
    pub v: Option<f64>,
}

impl LoadSet {
    /// `[(1-v) d, (1+v) d]`, ordered per bus so negative loads work.
    pub fn from_variation(d_nom: &[f64], v: f64) -> Self {
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        for &d in d_nom {
            let (a, b) = ((1.0 - v) * d, (1.0 + v) * d);
            lower.push(a.min(b));
            upper.push(a.max(b));
        }
        LoadSet {
            lower,
            upper,
            v: Some(v),
        }
    }

    pub fn fixed(d: &[f64]) -> Self {
        LoadSet {
            lower: d.to_vec(),
            upper: d.to_vec(),
            v: None,
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, d: &[f64], tol: f64) -> bool {
        d.len() == self.len()
            && d
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo - tol && x <= hi + tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    RedundantParallel,
    RedundantOpt,
    NonRedundant,
}

impl Verdict {
    pub fn is_redundant(self) -> bool {
        self != Verdict::NonRedundant
    }
}

/// A point attaining the extreme flow of a non-redundant bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningCertificate {
    pub bound: FlowBound,
    pub verdict: Verdict,
    /// Optimal flow of the screening LP; `None` for parallel verdicts.
    pub extreme_flow: Option<f64>,
    /// Distance of the extreme flow from the limit in the bound's direction.
    pub margin: Option<f64>,
    pub witness: Option<Witness>,
}

/// Options shared by every screening LP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    /// Relax generator lower limits to zero (commitment-compatible screening).
    pub relax_pmin: bool,
    pub margin_scale: f64,
    /// Drop already-certified bounds from later LPs. Runs sequentially.
    pub cascade: bool,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            relax_pmin: true,
            margin_scale: MARGIN_SCALE,
            cascade: false,
        }
    }
}

impl ScreenConfig {
    pub fn epsilon(&self, f_max: f64) -> f64 {
        self.margin_scale * f_max.max(1.0)
    }
}

/// Result of the analytic step for one dominated branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dominance {
    pub branch_id: usize,
    pub kept_by: usize,
    /// `false` when the ratio ties with the kept branch.
    pub strict: bool,
}

/// Dominated branches of every parallel group, ordered by branch id.
pub fn parallel_dominance(network: &Network) -> Vec<Dominance> {
    let mut groups: BTreeMap<(u32, u32), Vec<(usize, f64)>> = BTreeMap::new();
    for br in &network.branches {
        let Some(f) = br.f_max else { continue };
        if br.b <= 0.0 {
            continue;
        }
        let key = (br.from_bus.min(br.to_bus), br.from_bus.max(br.to_bus));
        groups.entry(key).or_default().push((br.id, br.b / f));
    }
    let mut out = Vec::new();
    for members in groups.values().filter(|g| g.len() > 1) {
        let best = members.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
        let ties = |r: f64| r >= best * (1.0 - RATIO_TIE_TOL);
        let kept = members
            .iter()
            .filter(|m| ties(m.1))
            .map(|m| m.0)
            .min()
            .expect("group has a maximum");
        for &(id, r) in members {
            if id != kept {
                out.push(Dominance {
                    branch_id: id,
                    kept_by: kept,
                    strict: !ties(r),
                });
            }
        }
    }
    out.sort_by_key(|d| d.branch_id);
    out
}

/// Step 1: both bounds of every dominated parallel branch.
pub fn screen_parallel(network: &Network) -> Vec<ScreeningCertificate> {
    parallel_dominance(network)
        .into_iter()
        .flat_map(|d| {
            [Side::Upper, Side::Lower].map(|side| ScreeningCertificate {
                bound: FlowBound {
                    branch_id: d.branch_id,
                    side,
                },
                verdict: Verdict::RedundantParallel,
                extreme_flow: None,
                margin: None,
                witness: None,
            })
        })
        .collect()
}

/// Variable handles of a screening LP.
#[derive(Clone, Debug)]
pub struct ScreeningVars {
    pub p: Vec<VarId>,
    pub theta: Vec<VarId>,
    pub d: Vec<VarId>,
}

/// Balance rows `G p - d = B theta` and flow limits shared by screening and dispatch LPs.
pub(crate) fn add_theta_network(
    lp: &mut LinearProgram,
    dc: &DcSystem,
    p: &[VarId],
    theta: &[VarId],
    d: Option<&[VarId]>,
    fixed_load: Option<&[f64]>,
    enforced: &dyn Fn(usize, Side) -> bool,
) -> Result<(), LpError> {
    let nb = dc.num_buses();
    let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nb];
    for (g, &v) in p.iter().enumerate() {
        rows[dc.gen_bus[g]].push((v, 1.0));
    }
    if let Some(d) = d {
        for (k, &v) in d.iter().enumerate() {
            rows[k].push((v, -1.0));
        }
    }
    for k in 0..dc.num_branches() {
        let (f, t, b) = (dc.from[k], dc.to[k], dc.susceptances[k]);
        rows[f].extend([(theta[f], -b), (theta[t], b)]);
        rows[t].extend([(theta[t], -b), (theta[f], b)]);
    }
    for (k, terms) in rows.into_iter().enumerate() {
        let rhs = fixed_load.map_or(0.0, |load| load[k]);
        lp.add_constraint(format!("balance_{}", dc.bus_ids[k]), terms, Relation::Eq(rhs))?;
    }
    for k in 0..dc.num_branches() {
        let Some(fmax) = dc.f_max[k] else { continue };
        let id = dc.branch_ids[k];
        let rel = match (enforced(id, Side::Upper), enforced(id, Side::Lower)) {
            (true, true) => Relation::Range(-fmax, fmax),
            (true, false) => Relation::Le(fmax),
            (false, true) => Relation::Ge(-fmax),
            (false, false) => continue,
        };
        let b = dc.susceptances[k];
        lp.add_constraint(
            format!("flow_{id}"),
            [(theta[dc.from[k]], b), (theta[dc.to[k]], -b)],
            rel,
        )?;
    }
    Ok(())
}

/// Maximize (upper) or minimize (lower) the flow of `bound` over generator
/// limits, all non-excluded flow limits and the load box.
pub fn build_screening_lp(
    dc: &DcSystem,
    loadset: &LoadSet,
    bound: FlowBound,
    relax_pmin: bool,
    exclusions: &BTreeSet<FlowBound>,
) -> Result<(LinearProgram, ScreeningVars), ScreenError> {
    if loadset.len() != dc.num_buses() {
        return Err(ScreenError::Dimension {
            expected: dc.num_buses(),
            got: loadset.len(),
        });
    }
    let k = dc
        .branch_position(bound.branch_id)
        .ok_or(ScreenError::UnknownBranch(bound))?;
    let sense = match bound.side {
        Side::Upper => Sense::Maximize,
        Side::Lower => Sense::Minimize,
    };
    let mut lp = LinearProgram::new(sense);
    let p: Vec<VarId> = (0..dc.gen_bus.len())
        .map(|g| {
            let lo = if relax_pmin { 0.0 } else { dc.p_min[g] };
            lp.add_var(format!("p{}", g + 1), lo, dc.p_max[g], 0.0)
        })
        .collect();
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
    let d: Vec<VarId> = (0..dc.num_buses())
        .map(|i| lp.add_var(format!("d_{}", dc.bus_ids[i]), loadset.lower[i], loadset.upper[i], 0.0))
        .collect();
    let b = dc.susceptances[k];
    lp.set_cost(theta[dc.from[k]], b);
    lp.set_cost(theta[dc.to[k]], -b);
    let enforced = |id: usize, side: Side| !exclusions.contains(&FlowBound { branch_id: id, side });
    add_theta_network(&mut lp, dc, &p, &theta, Some(&d), None, &enforced)
        .map_err(|source| ScreenError::Solver { bound, source })?;
    Ok((lp, ScreeningVars { p, theta, d }))
}

pub fn screen_bound(
    dc: &DcSystem,
    loadset: &LoadSet,
    bound: FlowBound,
    config: &ScreenConfig,
    exclusions: &BTreeSet<FlowBound>,
) -> Result<ScreeningCertificate, ScreenError> {
    let (lp, vars) = build_screening_lp(dc, loadset, bound, config.relax_pmin, exclusions)?;
    let k = dc.branch_position(bound.branch_id).expect("checked by build");
    let f_max = dc.f_max[k].ok_or(ScreenError::UnknownBranch(bound))?;
    let sol = solve_lp(&lp).map_err(|source| ScreenError::Solver { bound, source })?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(ScreenError::InfeasibleScreen(bound)),
        LpStatus::Unbounded => return Err(ScreenError::Unbounded(bound)),
    }
    let flow = sol.objective;
    let margin = match bound.side {
        Side::Upper => f_max - flow,
        Side::Lower => f_max + flow,
    };
    let redundant = margin >= config.epsilon(f_max);
    let witness = (!redundant).then(|| {
        let pick = |vs: &[VarId]| vs.iter().map(|&v| sol.value(v)).collect();
        Witness {
            p: pick(&vars.p),
            theta: pick(&vars.theta),
            d: pick(&vars.d),
        }
    });
    debug!("{bound}: extreme {flow:.6} margin {margin:.3e}");
    Ok(ScreeningCertificate {
        bound,
        verdict: if redundant {
            Verdict::RedundantOpt
        } else {
            Verdict::NonRedundant
        },
        extreme_flow: Some(flow),
        margin: Some(margin),
        witness,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub parallel: usize,
    pub optimization: usize,
    pub remaining: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub step1_ms: f64,
    pub step2_ms: f64,
}

#[derive(Clone, Debug)]
pub struct ScreeningReport {
    pub v: Option<f64>,
    pub config: ScreenConfig,
    pub certificates: Vec<ScreeningCertificate>,
    pub counts: Counts,
    pub timings: Timings,
}

impl ScreeningReport {
    /// Bounds certified redundant by either step, in bound order.
    pub fn redundant(&self) -> BTreeSet<FlowBound> {
        self.certificates
            .iter()
            .filter(|c| c.verdict.is_redundant())
            .map(|c| c.bound)
            .collect()
    }

    pub fn pct_eliminated(&self) -> f64 {
        if self.counts.total == 0 {
            0.0
        } else {
            100.0 * (self.counts.parallel + self.counts.optimization) as f64 / self.counts.total as f64
        }
    }

    pub fn to_file(&self, case: &str) -> ReportFile {
        ReportFile {
            case: case.to_string(),
            v: self.v,
            config: self.config,
            tolerances: Tolerances::default(),
            counts: self.counts,
            redundant: self.redundant().into_iter().collect(),
            bounds: self
                .certificates
                .iter()
                .map(|c| BoundRecord {
                    branch: c.bound.branch_id,
                    side: c.bound.side,
                    verdict: c.verdict,
                    extreme_flow: c.extreme_flow,
                    margin: c.margin,
                })
                .collect(),
            timings_ms: self.timings,
        }
    }

    /// `case,v,total_bounds,parallel_redundant,opt_redundant,remaining,pct_eliminated,step1_ms,step2_ms`
    pub fn summary_row(&self, case: &str) -> String {
        format!(
            "{case},{},{},{},{},{},{:.4},{:.3},{:.3}",
            self.v.map_or(String::new(), |v| v.to_string()),
            self.counts.total,
            self.counts.parallel,
            self.counts.optimization,
            self.counts.remaining,
            self.pct_eliminated(),
            self.timings.step1_ms,
            self.timings.step2_ms
        )
    }
}

pub const SUMMARY_HEADER: &str =
    "case,v,total_bounds,parallel_redundant,opt_redundant,remaining,pct_eliminated,step1_ms,step2_ms";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
    pub ratio_tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: crate::lpcore::FEASIBILITY_TOL,
            optimality: crate::lpcore::OPTIMALITY_TOL,
            ratio_tie: RATIO_TIE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub branch: usize,
    pub side: Side,
    pub verdict: Verdict,
    pub extreme_flow: Option<f64>,
    pub margin: Option<f64>,
}

/// JSON form of a screening report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub case: String,
    pub v: Option<f64>,
    pub config: ScreenConfig,
    pub tolerances: Tolerances,
    pub counts: Counts,
    pub redundant: Vec<FlowBound>,
    pub bounds: Vec<BoundRecord>,
    pub timings_ms: Timings,
}

/// Runs both steps. Results do not depend on `workers`.
pub fn screen_all(
    network: &Network,
    loadset: &LoadSet,
    config: &ScreenConfig,
    workers: usize,
) -> Result<ScreeningReport, ScreenError> {
    let dc = build_dc(network);
    let bounds = enumerate_flow_bounds(network);

    let t1 = Instant::now();
    let parallel = screen_parallel(network);
    let step1_ms = t1.elapsed().as_secs_f64() * 1e3;

    let flagged: BTreeSet<FlowBound> = parallel.iter().map(|c| c.bound).collect();
    let todo: Vec<FlowBound> = bounds.iter().copied().filter(|b| !flagged.contains(b)).collect();

    let t2 = Instant::now();
    let optimized = if config.cascade {
        let mut excluded = flagged.clone();
        let mut out = Vec::with_capacity(todo.len());
        for &b in &todo {
            let cert = screen_bound(&dc, loadset, b, config, &excluded)?;
            if cert.verdict.is_redundant() {
                excluded.insert(b);
            }
            out.push(cert);
        }
        out
    } else {
        run_parallel(&todo, workers, |b| screen_bound(&dc, loadset, b, config, &BTreeSet::new()))?
    };
    let step2_ms = t2.elapsed().as_secs_f64() * 1e3;

    let mut certificates: Vec<ScreeningCertificate> = parallel.into_iter().chain(optimized).collect();
    certificates.sort_by_key(|c| c.bound);
    let count = |v: Verdict| certificates.iter().filter(|c| c.verdict == v).count();
    let counts = Counts {
        total: bounds.len(),
        parallel: count(Verdict::RedundantParallel),
        optimization: count(Verdict::RedundantOpt),
        remaining: count(Verdict::NonRedundant),
    };
    Ok(ScreeningReport {
        v: loadset.v,
        config: *config,
        certificates,
        counts,
        timings: Timings { step1_ms, step2_ms },
    })
}

/// Applies `task` to every item on `workers` threads; output keeps input order.
/// On failure, reports the error of the earliest failing item.
pub fn run_parallel<T, R, E>(
    items: &[T],
    workers: usize,
    task: impl Fn(T) -> Result<R, E> + Sync,
) -> Result<Vec<R>, E>
where
    T: Copy + Sync,
    R: Send,
    E: Send,
{
    let workers = workers.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R, E>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = task(items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseio::{Branch, Bus, Generator};

    /// Generator p in [0, 1] at bus 1, load at bus 2, one branch b = 10.
    fn two_bus(f_max: f64) -> Network {
        Network {
            base_mva: 100.0,
            buses: vec![Bus { id: 1, d_nom: 0.0 }, Bus { id: 2, d_nom: 1.0 }],
            generators: vec![Generator {
                bus: 1,
                p_min: 0.0,
                p_max: 1.0,
                c0: 0.0,
                c1: 10.0,
                c2: 0.0,
            }],
            branches: vec![Branch {
                id: 1,
                from_bus: 1,
                to_bus: 2,
                b: 10.0,
                f_max: Some(f_max),
            }],
            slack_bus: 1,
        }
    }

    fn box_05_15() -> LoadSet {
        LoadSet {
            lower: vec![0.0, 0.5],
            upper: vec![0.0, 1.5],
            v: None,
        }
    }

    const UP: FlowBound = FlowBound {
        branch_id: 1,
        side: Side::Upper,
    };
    const LO: FlowBound = FlowBound {
        branch_id: 1,
        side: Side::Lower,
    };

    #[test]
    fn load_set_orders_negative_loads() {
        let s = LoadSet::from_variation(&[1.0, -2.0, 0.0], 0.5);
        assert_eq!(s.lower, vec![0.5, -3.0, 0.0]);
        assert_eq!(s.upper, vec![1.5, -1.0, 0.0]);
    }

    #[test]
    fn screening_lp_shape_and_optimum() {
        let dc = build_dc(&two_bus(2.0));
        let (lp, _) = build_screening_lp(&dc, &box_05_15(), UP, true, &BTreeSet::new()).unwrap();
        // p, theta_1 (pinned), theta_2, d_1 (fixed at 0), d_2
        assert_eq!(lp.num_vars(), 5);
        let cfg = ScreenConfig::default();
        let up = screen_bound(&dc, &box_05_15(), UP, &cfg, &BTreeSet::new()).unwrap();
        assert!((up.extreme_flow.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(up.verdict, Verdict::RedundantOpt);
        assert!((up.margin.unwrap() - 1.0).abs() < 1e-9);
        let lo = screen_bound(&dc, &box_05_15(), LO, &cfg, &BTreeSet::new()).unwrap();
        assert!((lo.extreme_flow.unwrap() - 0.5).abs() < 1e-9);
        let fixed = LoadSet::fixed(&[0.0, 0.5]);
        let up = screen_bound(&dc, &fixed, UP, &cfg, &BTreeSet::new()).unwrap();
        assert!((up.extreme_flow.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn attainable_bound_carries_witness() {
        let dc = build_dc(&two_bus(0.8));
        let cert = screen_bound(&dc, &box_05_15(), UP, &ScreenConfig::default(), &BTreeSet::new()).unwrap();
        assert_eq!(cert.verdict, Verdict::NonRedundant);
        assert!((cert.extreme_flow.unwrap() - 0.8).abs() < 1e-9);
        let w = cert.witness.unwrap();
        assert!(w.d[1] >= 0.8 - 1e-9 && w.d[1] <= 1.5 + 1e-9);
        let flow = 10.0 * (w.theta[0] - w.theta[1]);
        assert!((flow - 0.8).abs() < 1e-7);
    }

    fn parallel_pair(a: (f64, f64), b: (f64, f64)) -> Network {
        let mut net = two_bus(1.0);
        net.branches = vec![
            Branch {
                id: 1,
                from_bus: 1,
                to_bus: 2,
                b: a.0,
                f_max: Some(a.1),
            },
            Branch {
                id: 2,
                from_bus: 2,
                to_bus: 1,
                b: b.0,
                f_max: Some(b.1),
            },
        ];
        net
    }

    #[test]
    fn parallel_step_keeps_largest_ratio() {
        let net = parallel_pair((10.0, 5.0), (5.0, 1.0));
        let certs = screen_parallel(&net);
        assert_eq!(certs.len(), 2);
        assert!(certs.iter().all(|c| c.bound.branch_id == 1));
        assert!(parallel_dominance(&net)[0].strict);

        let twins = parallel_pair((10.0, 5.0), (10.0, 5.0));
        let d = parallel_dominance(&twins);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].branch_id, d[0].kept_by, d[0].strict), (2, 1, false));

        assert!(screen_parallel(&two_bus(1.0)).is_empty());
    }

    #[test]
    fn parallel_step_skips_negative_and_unlimited() {
        let mut net = parallel_pair((10.0, 5.0), (-5.0, 1.0));
        assert!(screen_parallel(&net).is_empty());
        net.branches[1].b = 5.0;
        net.branches[1].f_max = None;
        assert!(screen_parallel(&net).is_empty());
    }

    #[test]
    fn report_counts_and_worker_independence() {
        let net = parallel_pair((10.0, 5.0), (5.0, 1.0));
        let set = LoadSet::from_variation(&net.nominal_load(), 0.5);
        let cfg = ScreenConfig::default();
        let one = screen_all(&net, &set, &cfg, 1).unwrap();
        let four = screen_all(&net, &set, &cfg, 4).unwrap();
        assert_eq!(one.redundant(), four.redundant());
        let c = one.counts;
        assert_eq!(c.total, 4);
        assert_eq!(c.parallel + c.optimization + c.remaining, 4);
        assert_eq!(c.parallel, 2);
        let file = one.to_file("pair");
        let back: ReportFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(back, file);
        assert_eq!(one.summary_row("pair").split(',').count(), SUMMARY_HEADER.split(',').count());
    }

    #[test]
    fn infeasible_box_is_diagnosed() {
        let dc = build_dc(&two_bus(2.0));
        let set = LoadSet::fixed(&[0.0, 3.0]);
        let err = screen_bound(&dc, &set, UP, &ScreenConfig::default(), &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, ScreenError::InfeasibleScreen(_)));
    }
}
