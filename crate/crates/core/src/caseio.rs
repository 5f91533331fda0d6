//! MATPOWER case parsing and the network model used everywhere else.
//!
//! All power quantities are stored per-unit on `base_mva`. Cost coefficients
//! are rescaled so that `c0 + c1 p + c2 p^2` with `p` in per-unit gives the
//! same $/h as the file's polynomial in MW.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing `mpc.{0}`")]
    Missing(&'static str),
    #[error("invalid network: {0}")]
    Validation(String),
    #[error("snapshot: {0}")]
    Json(#[from] serde_json::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> CaseError {
    CaseError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub d_nom: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    pub p_min: f64,
    pub p_max: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// 1-based row of the branch in the case file's branch table.
    pub id: usize,
    pub from_bus: u32,
    pub to_bus: u32,
    pub b: f64,
    /// `None` means unlimited.
    pub f_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    pub slack_bus: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Upper,
    Lower,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Upper => "UPPER",
            Side::Lower => "LOWER",
        })
    }
}

/// One side of a branch flow limit. Ordered by branch, then upper before lower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowBound {
    pub branch_id: usize,
    pub side: Side,
}

impl fmt::Display for FlowBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "branch {} {}", self.branch_id, self.side)
    }
}

impl Network {
    /// Position of bus `id` in `buses`.
    pub fn bus_index(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    /// Position of branch `id` in `branches`.
    pub fn branch_position(&self, id: usize) -> Option<usize> {
        self.branches.binary_search_by_key(&id, |b| b.id).ok()
    }

    pub fn nominal_load(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.d_nom).collect()
    }

    pub fn num_rated(&self) -> usize {
        self.branches.iter().filter(|b| b.f_max.is_some()).count()
    }

    /// Checks the structural invariants every consumer relies on.
    pub fn validate(&self) -> Result<(), CaseError> {
        let bad = |msg: String| Err(CaseError::Validation(msg));
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            return bad(format!("baseMVA must be positive, got {}", self.base_mva));
        }
        if self.buses.is_empty() {
            return bad("no buses".into());
        }
        let index = self.bus_index();
        if index.len() != self.buses.len() {
            return bad("duplicate bus ids".into());
        }
        if !index.contains_key(&self.slack_bus) {
            return bad(format!("slack bus {} does not exist", self.slack_bus));
        }
        for (k, g) in self.generators.iter().enumerate() {
            if !index.contains_key(&g.bus) {
                return bad(format!("generator {} at unknown bus {}", k + 1, g.bus));
            }
            if !(g.p_min <= g.p_max) {
                return bad(format!(
                    "generator {} has p_min {} > p_max {}",
                    k + 1,
                    g.p_min,
                    g.p_max
                ));
            }
            if g.c2 < 0.0 {
                return bad(format!("generator {} has non-convex cost (c2 < 0)", k + 1));
            }
        }
        for w in self.branches.windows(2) {
            if w[0].id >= w[1].id {
                return bad("branch ids must be strictly increasing".into());
            }
        }
        for br in &self.branches {
            for bus in [br.from_bus, br.to_bus] {
                if !index.contains_key(&bus) {
                    return bad(format!("branch {} references unknown bus {bus}", br.id));
                }
            }
            if br.from_bus == br.to_bus {
                return bad(format!("branch {} is a self-loop", br.id));
            }
            if br.b == 0.0 || !br.b.is_finite() {
                return bad(format!("branch {} has zero reactance", br.id));
            }
            if let Some(f) = br.f_max {
                if !(f > 0.0) {
                    return bad(format!("branch {} has non-positive rating {f}", br.id));
                }
            }
        }
        // connectivity by union-find over bus positions
        let mut parent: Vec<usize> = (0..self.buses.len()).collect();
        fn root(p: &mut [usize], mut k: usize) -> usize {
            while p[k] != k {
                p[k] = p[p[k]];
                k = p[k];
            }
            k
        }
        for br in &self.branches {
            let a = root(&mut parent, index[&br.from_bus]);
            let b = root(&mut parent, index[&br.to_bus]);
            parent[a] = b;
        }
        let r0 = root(&mut parent, 0);
        if let Some(k) = (1..self.buses.len()).find(|&k| root(&mut parent, k) != r0) {
            return bad(format!(
                "network is disconnected (bus {} not reachable from bus {})",
                self.buses[k].id, self.buses[0].id
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, CaseError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        let net: Network = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}

/// A numeric matrix block with the source line of each row.
struct Block {
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_number(tok: &str, line: usize) -> Result<f64, CaseError> {
    match tok {
        "Inf" | "inf" | "+Inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .ok_or_else(|| parse_err(line, format!("not a number: `{tok}`"))),
    }
}

/// Splits the file into `mpc.<name>` assignments: scalars and bracketed matrices.
fn scan(text: &str) -> Result<(BTreeMap<String, (usize, f64)>, BTreeMap<String, Block>), CaseError> {
    let mut scalars = BTreeMap::new();
    let mut blocks = BTreeMap::new();
    let mut open: Option<(String, usize, Block, Vec<f64>, usize)> = None;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let code = raw.split('%').next().unwrap_or("");
        let mut rest = code.trim();

        if open.is_none() {
            let Some(pos) = rest.find("mpc.") else { continue };
            let assign = &rest[pos + 4..];
            let Some(eq) = assign.find('=') else { continue };
            let name = assign[..eq].trim().to_string();
            let rhs = assign[eq + 1..].trim();
            if let Some(body) = rhs.strip_prefix('[') {
                open = Some((name, line, Block { rows: Vec::new() }, Vec::new(), line));
                rest = body;
            } else {
                let value = rhs.trim_end_matches(';').trim();
                if let Ok(v) = value.parse::<f64>() {
                    scalars.insert(name, (line, v));
                }
                continue;
            }
        }

        let (_, _, block, row, row_line) = open.as_mut().expect("inside a matrix");
        let mut closed = false;
        let mut body = rest;
        if let Some(end) = body.find(']') {
            if !body[end + 1..].trim().trim_end_matches(';').is_empty() {
                return Err(parse_err(line, "unexpected text after `]`"));
            }
            body = &body[..end];
            closed = true;
        }
        for (i, seg) in body.split(';').enumerate() {
            if i > 0 && !row.is_empty() {
                block.rows.push((*row_line, std::mem::take(row)));
            }
            for tok in seg.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if row.is_empty() {
                    *row_line = line;
                }
                row.push(parse_number(tok, line)?);
            }
        }
        // a newline also ends a row
        if !row.is_empty() {
            block.rows.push((*row_line, std::mem::take(row)));
        }
        if closed {
            let (name, _, block, _, _) = open.take().expect("inside a matrix");
            if let Some(&(first_line, ref first)) = block.rows.first() {
                for (l, r) in &block.rows {
                    if r.len() != first.len() {
                        return Err(parse_err(
                            *l,
                            format!(
                                "row of mpc.{name} has {} columns, expected {} (as on line {first_line})",
                                r.len(),
                                first.len()
                            ),
                        ));
                    }
                }
            }
            blocks.insert(name, block);
        }
    }
    if let Some((name, start, ..)) = open {
        return Err(parse_err(start, format!("mpc.{name} is never closed with `]`")));
    }
    Ok((scalars, blocks))
}

fn require_columns(block: &Block, name: &str, min: usize) -> Result<(), CaseError> {
    match block.rows.first() {
        Some((line, r)) if r.len() < min => Err(parse_err(
            *line,
            format!("mpc.{name} rows need at least {min} columns, found {}", r.len()),
        )),
        _ => Ok(()),
    }
}

fn as_bus_id(v: f64, line: usize) -> Result<u32, CaseError> {
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(parse_err(line, format!("invalid bus number {v}")));
    }
    Ok(v as u32)
}

/// Parses MATPOWER case text into a validated [`Network`].
pub fn parse_matpower(text: &str) -> Result<Network, CaseError> {
    let (scalars, blocks) = scan(text)?;
    let &(_, base_mva) = scalars.get("baseMVA").ok_or(CaseError::Missing("baseMVA"))?;
    let bus_blk = blocks.get("bus").ok_or(CaseError::Missing("bus"))?;
    let gen_blk = blocks.get("gen").ok_or(CaseError::Missing("gen"))?;
    let br_blk = blocks.get("branch").ok_or(CaseError::Missing("branch"))?;
    require_columns(bus_blk, "bus", 3)?;
    require_columns(gen_blk, "gen", 10)?;
    require_columns(br_blk, "branch", 11)?;

    let mut buses = Vec::new();
    let mut isolated = Vec::new();
    let mut slack: Vec<u32> = Vec::new();
    for (line, r) in &bus_blk.rows {
        let id = as_bus_id(r[0], *line)?;
        match r[1] as i64 {
            4 => {
                isolated.push(id);
                continue;
            }
            3 => slack.push(id),
            1 | 2 => {}
            t => return Err(parse_err(*line, format!("unknown bus type {t}"))),
        }
        buses.push(Bus {
            id,
            d_nom: r[2] / base_mva,
        });
    }
    if !isolated.is_empty() {
        warn!("dropping {} isolated bus(es): {isolated:?}", isolated.len());
    }
    slack.sort_unstable();
    let slack_bus = match slack.as_slice() {
        [] => {
            let id = buses.iter().map(|b| b.id).min().ok_or(CaseError::Missing("bus"))?;
            warn!("no reference bus (type 3); using lowest-numbered bus {id}");
            id
        }
        [one] => *one,
        [first, ..] => {
            warn!("{} reference buses; using bus {first}", slack.len());
            *first
        }
    };
    let live = |id: u32| !isolated.contains(&id);

    let costs = match blocks.get("gencost") {
        Some(blk) => {
            if blk.rows.len() < gen_blk.rows.len() {
                let line = blk.rows.last().map_or(0, |r| r.0);
                return Err(parse_err(
                    line,
                    format!(
                        "mpc.gencost has {} rows for {} generators",
                        blk.rows.len(),
                        gen_blk.rows.len()
                    ),
                ));
            }
            let mut out = Vec::new();
            for (line, r) in blk.rows.iter().take(gen_blk.rows.len()) {
                out.push(polynomial_cost(r, *line, base_mva)?);
            }
            out
        }
        None => vec![(0.0, 0.0, 0.0); gen_blk.rows.len()],
    };

    let mut generators = Vec::new();
    for ((line, r), &(c0, c1, c2)) in gen_blk.rows.iter().zip(&costs) {
        let bus = as_bus_id(r[0], *line)?;
        if r[7] <= 0.0 || !live(bus) {
            continue;
        }
        generators.push(Generator {
            bus,
            p_min: r[9] / base_mva,
            p_max: r[8] / base_mva,
            c0,
            c1,
            c2,
        });
    }

    let mut branches = Vec::new();
    for (k, (line, r)) in br_blk.rows.iter().enumerate() {
        let from_bus = as_bus_id(r[0], *line)?;
        let to_bus = as_bus_id(r[1], *line)?;
        if r[10] <= 0.0 || !live(from_bus) || !live(to_bus) {
            continue;
        }
        let x = r[3];
        if x == 0.0 {
            return Err(CaseError::Validation(format!(
                "branch {} (line {line}) has zero reactance",
                k + 1
            )));
        }
        let rate = r[5];
        branches.push(Branch {
            id: k + 1,
            from_bus,
            to_bus,
            b: 1.0 / x,
            f_max: if rate == 0.0 { None } else { Some(rate / base_mva) },
        });
    }

    let net = Network {
        base_mva,
        buses,
        generators,
        branches,
        slack_bus,
    };
    net.validate()?;
    Ok(net)
}

/// Per-unit `(c0, c1, c2)` from a polynomial gencost row.
fn polynomial_cost(r: &[f64], line: usize, base: f64) -> Result<(f64, f64, f64), CaseError> {
    if r.len() < 4 {
        return Err(parse_err(line, "gencost row needs at least 4 columns"));
    }
    match r[0] as i64 {
        2 => {}
        1 => return Err(parse_err(line, "piecewise-linear gencost (model 1) is not supported")),
        m => return Err(parse_err(line, format!("unknown gencost model {m}"))),
    }
    let n = r[3];
    if n.fract() != 0.0 || n < 0.0 {
        return Err(parse_err(line, format!("invalid coefficient count {n}")));
    }
    let n = n as usize;
    if n > 3 {
        return Err(parse_err(line, format!("polynomial cost of degree {} is not supported", n - 1)));
    }
    if r.len() < 4 + n {
        return Err(parse_err(line, format!("gencost row declares {n} coefficients but has fewer")));
    }
    // highest order first
    let coef = &r[4..4 + n];
    let at = |power: usize| if power < n { coef[n - 1 - power] } else { 0.0 };
    Ok((at(0), at(1) * base, at(2) * base * base))
}

/// Raises every generator's lower limit to at least `fraction * p_max`.
pub fn apply_pmin_floor(network: &Network, fraction: f64) -> Network {
    assert!(fraction >= 0.0, "pmin floor fraction must be non-negative");
    let mut out = network.clone();
    for g in &mut out.generators {
        g.p_min = g.p_min.max(fraction * g.p_max);
    }
    out
}

/// Both sides of every rated branch, in `(branch_id, UPPER, LOWER)` order.
pub fn enumerate_flow_bounds(network: &Network) -> Vec<FlowBound> {
    network
        .branches
        .iter()
        .filter(|b| b.f_max.is_some())
        .flat_map(|b| {
            [Side::Upper, Side::Lower].map(|side| FlowBound {
                branch_id: b.id,
                side,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "\
function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
\t2\t1\t50\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t0\t0\t100\t-100\t1\t100\t1\t100\t0;
];
mpc.branch = [
\t1\t2\t0\t0.1\t0\t100\t100\t100\t0\t0\t1\t-360\t360;
];
mpc.gencost = [
\t2\t0\t0\t3\t0.01\t10\t5;
];
";

    #[test]
    fn two_bus_unit_conversion() {
        let net = parse_matpower(TWO_BUS).unwrap();
        assert_eq!(net.branches.len(), 1);
        assert!((net.branches[0].b - 10.0).abs() < 1e-12);
        assert_eq!(net.branches[0].f_max, Some(1.0));
        assert_eq!(net.nominal_load(), vec![0.0, 0.5]);
        assert_eq!(net.slack_bus, 1);
        let g = &net.generators[0];
        assert_eq!((g.p_min, g.p_max), (0.0, 1.0));
        assert_eq!((g.c0, g.c1, g.c2), (5.0, 1000.0, 100.0));
        assert_eq!(enumerate_flow_bounds(&net).len(), 2);
    }

    #[test]
    fn zero_rating_is_unlimited() {
        let text = TWO_BUS.replace("0.1\t0\t100\t100\t100", "0.1\t0\t0\t0\t0");
        let net = parse_matpower(&text).unwrap();
        assert_eq!(net.branches[0].f_max, None);
        assert!(enumerate_flow_bounds(&net).is_empty());
    }

    #[test]
    fn missing_gencost_means_zero_cost() {
        let cut = TWO_BUS.find("mpc.gencost").unwrap();
        let net = parse_matpower(&TWO_BUS[..cut]).unwrap();
        let g = &net.generators[0];
        assert_eq!((g.c0, g.c1, g.c2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let text = TWO_BUS.replace("\t2\t1\t50\t0", "\t2\t1\tfifty\t0");
        match parse_matpower(&text) {
            Err(CaseError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = TWO_BUS.replace("\t230\t1\t1.1\t0.9;\n\t2", "\t230\t1\t1.1;\n\t2");
        match parse_matpower(&text) {
            Err(CaseError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_reactance_is_rejected() {
        let text = TWO_BUS.replace("\t0\t0.1\t0\t100", "\t0\t0\t0\t100");
        assert!(matches!(parse_matpower(&text), Err(CaseError::Validation(_))));
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let text = TWO_BUS.replace("\t1\t-360\t360", "\t0\t-360\t360");
        let err = parse_matpower(&text).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn cubic_and_piecewise_costs_are_rejected() {
        let cubic = TWO_BUS.replace("\t2\t0\t0\t3\t0.01\t10\t5;", "\t2\t0\t0\t4\t1\t0.01\t10\t5;");
        assert!(matches!(parse_matpower(&cubic), Err(CaseError::Parse { .. })));
        let pwl = TWO_BUS.replace("\t2\t0\t0\t3\t0.01\t10\t5;", "\t1\t0\t0\t2\t0\t0\t100\t1000;");
        assert!(matches!(parse_matpower(&pwl), Err(CaseError::Parse { .. })));
    }

    #[test]
    fn out_of_service_generator_is_dropped() {
        let text = TWO_BUS.replace("\t1\t100\t1\t100\t0;", "\t1\t100\t0\t100\t0;");
        assert!(parse_matpower(&text).unwrap().generators.is_empty());
    }

    #[test]
    fn first_slack_by_id_wins() {
        let text = TWO_BUS
            .replace("\t1\t3\t0", "\t1\t2\t0")
            .replace("\t2\t1\t50", "\t2\t3\t50");
        assert_eq!(parse_matpower(&text).unwrap().slack_bus, 2);
        let both = TWO_BUS.replace("\t2\t1\t50", "\t2\t3\t50");
        assert_eq!(parse_matpower(&both).unwrap().slack_bus, 1);
    }

    #[test]
    fn pmin_floor() {
        let mut net = parse_matpower(TWO_BUS).unwrap();
        net.generators[0].p_max = 2.0;
        let floored = apply_pmin_floor(&net, 0.1);
        assert_eq!(floored.generators[0].p_min, 0.2);
        net.generators[0].p_min = 0.5;
        assert_eq!(apply_pmin_floor(&net, 0.1).generators[0].p_min, 0.5);
        assert_eq!(apply_pmin_floor(&net, 0.0), net);
    }

    #[test]
    fn bound_enumeration_counts_rated_branches() {
        let mut net = parse_matpower(TWO_BUS).unwrap();
        net.branches.clear();
        assert!(enumerate_flow_bounds(&net).is_empty());
        for (id, f) in [(1, Some(1.0)), (2, None), (3, Some(2.0)), (4, Some(0.5))] {
            net.branches.push(Branch {
                id,
                from_bus: 1,
                to_bus: 2,
                b: 5.0,
                f_max: f,
            });
        }
        let bounds = enumerate_flow_bounds(&net);
        assert_eq!(bounds.len(), 6);
        assert_eq!(bounds[0], FlowBound { branch_id: 1, side: Side::Upper });
        assert_eq!(bounds[1], FlowBound { branch_id: 1, side: Side::Lower });
        assert!(bounds.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn json_round_trip() {
        let net = parse_matpower(TWO_BUS).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }
}
