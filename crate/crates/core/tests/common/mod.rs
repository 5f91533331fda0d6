#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gridscreen::caseio::{apply_pmin_floor, parse_matpower, Network};

pub const CASES: [&str; 4] = ["case14_ieee", "case30_ieee", "case57_ieee", "case118_ieee"];
pub const V_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const PMIN_FLOOR: f64 = 0.1;

pub fn data_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(format!("{name}.m"))
}

pub fn raw_case(name: &str) -> Network {
    let text = std::fs::read_to_string(data_path(name)).expect("case file");
    parse_matpower(&text).expect("case parses")
}

/// Case with the standard 10% generator floor.
pub fn case(name: &str) -> Network {
    apply_pmin_floor(&raw_case(name), PMIN_FLOOR)
}
