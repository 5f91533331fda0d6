//! Seeded load sampling and full-versus-reduced solve comparisons.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caseio::{enumerate_flow_bounds, FlowBound, Network};
use crate::opfsolve::{check_point, Form, OpfError, OpfModel};
use crate::screening::{run_parallel, LoadSet};

pub const BENCH_HEADER: &str = "case,v,sample,form,constraints_enforced,objective,solve_ms,status";
pub const AGGREGATE_HEADER: &str =
    "case,v,mode,samples,feasible,mean_full_ms,mean_reduced_ms,time_ratio,max_rel_discrepancy,max_screened_violation";

/// `n` loads drawn independently and uniformly per bus from the box.
pub fn sample_loads(set: &LoadSet, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            set.lower
                .iter()
                .zip(&set.upper)
                .map(|(&lo, &hi)| if lo < hi { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Opf,
    Uc,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Opf => "opf",
            Mode::Uc => "uc",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "opf" => Ok(Mode::Opf),
            "uc" => Ok(Mode::Uc),
            _ => Err(format!("unknown mode `{s}` (expected opf or uc)")),
        }
    }
}

/// One solve of one sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Run {
    pub status: String,
    /// NaN unless optimal.
    pub objective: f64,
    pub solve_ms: f64,
    pub constraints_enforced: usize,
    pub p: Vec<f64>,
    pub z: Option<Vec<bool>>,
    /// Largest violation of any original constraint, screened ones included.
    pub max_violation: f64,
    /// Largest violation among the bounds left out of the model.
    pub screened_violation: f64,
}

impl Run {
    pub fn is_optimal(&self) -> bool {
        self.status == "OPTIMAL"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleResult {
    pub sample: usize,
    pub load: Vec<f64>,
    pub full: Run,
    pub reduced: Option<Run>,
}

impl SampleResult {
    /// `|reduced - full| / max(1, |full|)`; infinite when only one is feasible.
    pub fn discrepancy(&self) -> Option<f64> {
        let r = self.reduced.as_ref()?;
        Some(match (self.full.is_optimal(), r.is_optimal()) {
            (true, true) => (r.objective - self.full.objective).abs() / self.full.objective.abs().max(1.0),
            (false, false) => 0.0,
            _ => f64::INFINITY,
        })
    }
}

fn solve_one(
    network: &Network,
    model: &OpfModel,
    load: &[f64],
    redundant: &BTreeSet<FlowBound>,
    mode: Mode,
    form: Form,
    total_bounds: usize,
) -> Result<Run, OpfError> {
    let t = Instant::now();
    let (status, objective, p, theta, z) = match mode {
        Mode::Opf => {
            let s = model.dispatch(load, redundant, form)?;
            (s.status.to_string(), s.objective, s.p, s.theta, None)
        }
        Mode::Uc => {
            let s = model.commit(load, redundant, form)?;
            (s.status.to_string(), s.objective, s.p, s.theta, Some(s.z))
        }
    };
    let solve_ms = t.elapsed().as_secs_f64() * 1e3;
    let (max_violation, screened_violation) = if p.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let rep = check_point(network, &p, &theta, load, z.as_deref());
        let screened = redundant.iter().map(|&b| rep.on(b)).fold(0.0, f64::max);
        (rep.max(), screened)
    };
    Ok(Run {
        status,
        objective,
        solve_ms,
        constraints_enforced: total_bounds - redundant.len(),
        p,
        z,
        max_violation,
        screened_violation,
    })
}

/// Solves every load in full and, when `redundant` is given, reduced.
/// Results are in sample order and independent of `workers`.
pub fn run_samples(
    network: &Network,
    model: &OpfModel,
    loads: &[Vec<f64>],
    redundant: Option<&BTreeSet<FlowBound>>,
    mode: Mode,
    form: Form,
    workers: usize,
) -> Result<Vec<SampleResult>, OpfError> {
    let total = enumerate_flow_bounds(network).len();
    let none = BTreeSet::new();
    let indices: Vec<usize> = (0..loads.len()).collect();
    run_parallel(&indices, workers, |i| {
        let load = &loads[i];
        let full = solve_one(network, model, load, &none, mode, form, total)?;
        let reduced = redundant
            .map(|r| solve_one(network, model, load, r, mode, form, total))
            .transpose()?;
        Ok(SampleResult {
            sample: i,
            load: load.clone(),
            full,
            reduced,
        })
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub case: String,
    pub v: f64,
    pub sample: usize,
    /// `full` or `reduced`.
    pub form: String,
    pub constraints_enforced: usize,
    /// NaN when the sample is infeasible.
    pub objective: f64,
    pub solve_ms: f64,
    pub status: String,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        let objective = if self.objective.is_finite() {
            self.objective.to_string()
        } else {
            String::new()
        };
        format!(
            "{},{},{},{},{},{},{:.3},{}",
            self.case, self.v, self.sample, self.form, self.constraints_enforced, objective, self.solve_ms, self.status
        )
    }
}

/// Per-sample rows, full before reduced.
pub fn bench_rows(case: &str, v: f64, results: &[SampleResult]) -> Vec<BenchRow> {
    let mut out = Vec::new();
    for r in results {
        let runs = std::iter::once(("full", &r.full)).chain(r.reduced.as_ref().map(|x| ("reduced", x)));
        for (form, run) in runs {
            out.push(BenchRow {
                case: case.to_string(),
                v,
                sample: r.sample,
                form: form.to_string(),
                constraints_enforced: run.constraints_enforced,
                objective: run.objective,
                solve_ms: run.solve_ms,
                status: run.status.clone(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub case: String,
    pub v: f64,
    pub mode: Mode,
    pub samples: usize,
    /// Samples whose full problem is feasible.
    pub feasible: usize,
    pub mean_full_ms: f64,
    /// NaN without reduced solves.
    pub mean_reduced_ms: f64,
    pub max_rel_discrepancy: f64,
    pub max_screened_violation: f64,
}

impl Aggregate {
    pub fn new(case: &str, v: f64, mode: Mode, results: &[SampleResult]) -> Self {
        let mean = |xs: Vec<f64>| {
            if xs.is_empty() {
                f64::NAN
            } else {
                xs.iter().sum::<f64>() / xs.len() as f64
            }
        };
        let reduced: Vec<&Run> = results.iter().filter_map(|r| r.reduced.as_ref()).collect();
        Aggregate {
            case: case.to_string(),
            v,
            mode,
            samples: results.len(),
            feasible: results.iter().filter(|r| r.full.is_optimal()).count(),
            mean_full_ms: mean(results.iter().map(|r| r.full.solve_ms).collect()),
            mean_reduced_ms: mean(reduced.iter().map(|r| r.solve_ms).collect()),
            max_rel_discrepancy: results.iter().filter_map(|r| r.discrepancy()).fold(0.0, f64::max),
            max_screened_violation: reduced
                .iter()
                .filter(|r| r.is_optimal())
                .map(|r| r.screened_violation)
                .fold(0.0, f64::max),
        }
    }

    pub fn time_ratio(&self) -> f64 {
        self.mean_reduced_ms / self.mean_full_ms
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3},{:.3},{:.4},{:e},{:e}",
            self.case,
            self.v,
            self.mode,
            self.samples,
            self.feasible,
            self.mean_full_ms,
            self.mean_reduced_ms,
            self.time_ratio(),
            self.max_rel_discrepancy,
            self.max_screened_violation
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_reproducible_and_inside_the_box() {
        let set = LoadSet::from_variation(&[1.0, 0.0, 2.5], 0.5);
        let a = sample_loads(&set, 50, 7);
        assert_eq!(a, sample_loads(&set, 50, 7));
        assert_ne!(a, sample_loads(&set, 50, 8));
        for d in &a {
            assert!(set.contains(d, 0.0));
            assert_eq!(d[1], 0.0);
        }
    }

    #[test]
    fn infeasible_row_leaves_objective_empty() {
        let row = BenchRow {
            case: "c".into(),
            v: 0.25,
            sample: 3,
            form: "full".into(),
            constraints_enforced: 10,
            objective: f64::NAN,
            solve_ms: 1.23456,
            status: "INFEASIBLE".into(),
        };
        assert_eq!(row.to_csv(), "c,0.25,3,full,10,,1.235,INFEASIBLE");
    }
}
