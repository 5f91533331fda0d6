use std::collections::BTreeSet;
use std::fmt::{self, Display};
use std::fs;
use std::path::{Path, PathBuf};

use gridscreen::bench::{
    bench_rows, run_samples, sample_loads, Aggregate, Mode, AGGREGATE_HEADER, BENCH_HEADER,
};
use gridscreen::caseio::{apply_pmin_floor, enumerate_flow_bounds, parse_matpower, FlowBound, Network};
use gridscreen::dcmodel::{build_dc, build_ptdf};
use gridscreen::lpcore::{write_fixed_width, LinearProgram};
use gridscreen::opfsolve::{Form, OpfModel};
use gridscreen::oracle::{grid_oracle, uc_oracle, GridOptions, GRID_MAX_BUSES, UC_MAX_GENS};
use gridscreen::screening::{build_screening_lp, screen_all, LoadSet, ReportFile, ScreenConfig, SUMMARY_HEADER};
use log::{info, warn};

use crate::args::{OracleArgs, RunArgs, SolveArgs, Switch};

pub const ORACLE_HEADER: &str = "case,v,check,item,lp_value,reference_value,evaluations,passed";

/// Commitment oracle agreement tolerance, relative.
const UC_ORACLE_TOL: f64 = 1e-7;

#[derive(Debug)]
pub enum Failure {
    /// Bad input, missing files, infeasible screening data.
    User(String),
    /// Solver breakdown or an oracle disagreement.
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::User(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

type Res<T> = Result<T, Failure>;

fn user(msg: impl Display) -> Failure {
    Failure::User(msg.to_string())
}

fn internal(msg: impl Display) -> Failure {
    Failure::Internal(msg.to_string())
}

struct Case {
    name: String,
    network: Network,
}

fn load_case(a: &RunArgs) -> Res<Case> {
    let path = &a.case;
    let text = fs::read_to_string(path).map_err(|e| user(format!("cannot read {}: {e}", path.display())))?;
    let network = parse_matpower(&text).map_err(|e| user(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "case".into());
    info!(
        "{name}: {} buses, {} generators, {} branches",
        network.buses.len(),
        network.generators.len(),
        network.branches.len()
    );
    Ok(Case {
        name,
        network: apply_pmin_floor(&network, a.pmin_floor),
    })
}

fn screen_config(a: &RunArgs) -> ScreenConfig {
    let mut cfg = ScreenConfig {
        relax_pmin: a.relax_pmin == Switch::On,
        ..ScreenConfig::default()
    };
    if let Some(m) = a.margin {
        cfg.margin_scale = m;
    }
    cfg
}

fn write_file(path: &Path, contents: &str) -> Res<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| user(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| user(format!("cannot write {}: {e}", path.display())))
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Res<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    write_file(path, &text)
}

fn write_lp(path: &Path, lp: &LinearProgram) -> Res<()> {
    let mut buf = Vec::new();
    write_fixed_width(lp, &mut buf).map_err(internal)?;
    write_file(path, &String::from_utf8_lossy(&buf))
}

pub fn report_path(out: &Path, case: &str, v: f64) -> PathBuf {
    out.join(format!("{case}_v{v}.screen.json"))
}

fn dump_ptdf(case: &Case, out: &Path) -> Res<()> {
    let ptdf = build_ptdf(&build_dc(&case.network)).map_err(|e| user(format!("{}: {e}", case.name)))?;
    let mut buf = Vec::new();
    ptdf.write_csv(&mut buf).map_err(internal)?;
    write_file(&out.join(format!("{}_ptdf.csv", case.name)), &String::from_utf8_lossy(&buf))
}

pub fn screen(a: &RunArgs) -> Res<()> {
    let case = load_case(a)?;
    let cfg = screen_config(a);
    if a.dump_ptdf {
        dump_ptdf(&case, &a.out)?;
    }
    let nominal = case.network.nominal_load();
    let mut rows = Vec::new();
    println!("{SUMMARY_HEADER}");
    for &v in &a.v {
        let set = LoadSet::from_variation(&nominal, v);
        let report = screen_all(&case.network, &set, &cfg, a.workers as usize)
            .map_err(|e| user(format!("{}: screening at v={v} failed: {e}", case.name)))?;
        let json = serde_json::to_string_pretty(&report.to_file(&case.name)).map_err(internal)?;
        write_file(&report_path(&a.out, &case.name, v), &json)?;
        let row = report.summary_row(&case.name);
        println!("{row}");
        rows.push(row);

        if a.dump_lp {
            let dc = build_dc(&case.network);
            for bound in enumerate_flow_bounds(&case.network) {
                let (lp, _) = build_screening_lp(&dc, &set, bound, cfg.relax_pmin, &BTreeSet::new())
                    .map_err(internal)?;
                let name = format!("{}_v{v}_b{}_{}.lp", case.name, bound.branch_id, bound.side);
                write_lp(&a.out.join("lp").join(name), &lp)?;
            }
        }
    }
    write_csv(&a.out.join(format!("{}_screening.csv", case.name)), SUMMARY_HEADER, &rows)
}

fn read_report(a: &RunArgs, case: &str, v: f64) -> Res<BTreeSet<FlowBound>> {
    let path = report_path(&a.out, case, v);
    let rerun = format!("run `gridscreen screen --case {} --v {v} --out {}` first", a.case.display(), a.out.display());
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(_) => return Err(user(format!("no screening report at {}; {rerun}", path.display()))),
    };
    let file: ReportFile =
        serde_json::from_str(&text).map_err(|e| user(format!("{}: unreadable report ({e}); {rerun}", path.display())))?;
    if file.case != case || file.v != Some(v) {
        return Err(user(format!("{} does not belong to {case} at v={v}; {rerun}", path.display())));
    }
    let relax = a.relax_pmin == Switch::On;
    if file.config.relax_pmin != relax {
        return Err(user(format!(
            "{} was screened with relax_pmin={}, this run asks for {relax}; {rerun}",
            path.display(),
            file.config.relax_pmin
        )));
    }
    Ok(file.redundant.into_iter().collect())
}

pub fn solve(s: &SolveArgs) -> Res<()> {
    let a = &s.run;
    if s.sample == Some(0) {
        return Err(user("sample count must be >= 1"));
    }
    let mode: Mode = s.mode.into();
    let form: Form = a.form.into();
    let case = load_case(a)?;
    if mode == Mode::Uc && s.reduced && a.relax_pmin == Switch::Off {
        warn!("screening without relaxed p_min is not guaranteed to be sound for commitment");
    }
    if a.dump_ptdf {
        dump_ptdf(&case, &a.out)?;
    }
    let model =
        OpfModel::new(&case.network, a.segments as usize).map_err(|e| user(format!("{}: {e}", case.name)))?;
    let nominal = case.network.nominal_load();

    let mut sample_rows = Vec::new();
    let mut summary_rows = Vec::new();
    println!("{AGGREGATE_HEADER}");
    for &v in &a.v {
        let redundant = if s.reduced {
            Some(read_report(a, &case.name, v)?)
        } else {
            None
        };
        let set = LoadSet::from_variation(&nominal, v);
        let loads = match s.sample {
            None => vec![nominal.clone()],
            Some(n) => sample_loads(&set, n, a.seed),
        };

        if a.dump_lp {
            let none = BTreeSet::new();
            for (i, load) in loads.iter().enumerate() {
                let variants = std::iter::once(("full", &none)).chain(redundant.as_ref().map(|r| ("reduced", r)));
                for (label, r) in variants {
                    let (lp, _) = model.build(load, r, form, mode == Mode::Uc).map_err(internal)?;
                    let name = format!("{}_{mode}_v{v}_s{i}_{label}.lp", case.name);
                    write_lp(&a.out.join("lp").join(name), &lp)?;
                }
            }
        }

        let results = run_samples(&case.network, &model, &loads, redundant.as_ref(), mode, form, a.workers as usize)
            .map_err(|e| internal(format!("{}: solve at v={v} failed: {e}", case.name)))?;
        let json = serde_json::to_string_pretty(&results).map_err(internal)?;
        write_file(&a.out.join(format!("{}_{mode}_v{v}.solutions.json", case.name)), &json)?;

        sample_rows.extend(bench_rows(&case.name, v, &results).iter().map(|r| r.to_csv()));
        let agg = Aggregate::new(&case.name, v, mode, &results);
        println!("{}", agg.to_csv());
        summary_rows.push(agg.to_csv());
    }
    write_csv(&a.out.join(format!("{}_{mode}_samples.csv", case.name)), BENCH_HEADER, &sample_rows)?;
    write_csv(&a.out.join(format!("{}_{mode}_summary.csv", case.name)), AGGREGATE_HEADER, &summary_rows)
}

/// Returns whether every check passed.
pub fn oracle(o: &OracleArgs) -> Res<bool> {
    let a = &o.run;
    let case = load_case(a)?;
    let net = &case.network;
    let grid_ok = net.buses.len() <= GRID_MAX_BUSES;
    let uc_ok = net.generators.len() <= UC_MAX_GENS;
    if !grid_ok && !uc_ok {
        return Err(user(format!(
            "{}: {} buses and {} generators exceed both oracle limits ({GRID_MAX_BUSES} buses for the grid \
             search, {UC_MAX_GENS} generators for commitment enumeration)",
            case.name,
            net.buses.len(),
            net.generators.len()
        )));
    }
    if !grid_ok {
        warn!("{}: skipping grid oracle, more than {GRID_MAX_BUSES} buses", case.name);
    }
    if !uc_ok {
        warn!("{}: skipping commitment oracle, more than {UC_MAX_GENS} generators", case.name);
    }

    let cfg = screen_config(a);
    let opts = GridOptions {
        resolution: o.resolution as usize,
        seed: a.seed,
        ..GridOptions::default()
    };
    let nominal = net.nominal_load();
    let bounds = enumerate_flow_bounds(net);
    let mut rows = Vec::new();
    let mut all_passed = true;
    for &v in &a.v {
        let set = LoadSet::from_variation(&nominal, v);
        if grid_ok {
            let checks = grid_oracle(net, &set, &cfg, &bounds, &opts).map_err(internal)?;
            let passed = checks.iter().filter(|c| c.passed()).count();
            println!("{} v={v} grid: {passed}/{} bounds agree", case.name, checks.len());
            all_passed &= passed == checks.len();
            for c in &checks {
                rows.push(format!(
                    "{},{v},grid,{},{},{},{},{}",
                    case.name,
                    c.bound,
                    c.lp_extreme,
                    c.grid_extreme,
                    c.evaluations,
                    c.passed()
                ));
            }
        }
        if uc_ok && o.uc_samples > 0 {
            let report = screen_all(net, &set, &cfg, a.workers as usize)
                .map_err(|e| user(format!("{}: screening at v={v} failed: {e}", case.name)))?;
            let loads = sample_loads(&set, o.uc_samples, a.seed);
            let checks =
                uc_oracle(net, &loads, &report.redundant(), a.segments as usize, UC_ORACLE_TOL).map_err(internal)?;
            let passed = checks.iter().filter(|c| c.passed).count();
            println!("{} v={v} uc: {passed}/{} samples agree", case.name, checks.len());
            all_passed &= passed == checks.len();
            for c in &checks {
                rows.push(format!(
                    "{},{v},uc,sample {},{},{},{},{}",
                    case.name,
                    c.sample,
                    c.milp_objective,
                    c.brute_force_objective,
                    1usize << net.generators.len(),
                    c.passed
                ));
            }
        }
    }
    write_csv(&a.out.join(format!("{}_oracle.csv", case.name)), ORACLE_HEADER, &rows)?;
    Ok(all_passed)
}
