mod common;

use common::*;
use gridscreen::dcmodel::{build_dc, build_ptdf, line_flows, line_flows_ptdf, solve_angles, DcSystem};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn systems() -> Vec<DcSystem> {
    CASES.iter().map(|n| build_dc(&raw_case(n))).collect()
}

/// Random balanced injection vector from raw draws in [-1, 1].
fn balanced(raw: &[f64], n: usize) -> Vec<f64> {
    let mut inj: Vec<f64> = raw.iter().cycle().take(n).copied().collect();
    let mean = inj.iter().sum::<f64>() / n as f64;
    inj.iter_mut().for_each(|x| *x -= mean);
    inj
}

/// PTDF through the Moore-Penrose inverse of the full Laplacian, referenced
/// to the slack: an independent route to the same matrix.
fn ptdf_by_pseudo_inverse(dc: &DcSystem) -> DMatrix<f64> {
    let a = dc.incidence();
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(dc.susceptances.clone()));
    let lap = a.transpose() * &b * &a;
    let pinv = lap.pseudo_inverse(1e-12).unwrap();
    let mut m = &b * &a * pinv;
    for k in 0..m.nrows() {
        let s = m[(k, dc.slack)];
        for j in 0..m.ncols() {
            m[(k, j)] -= s;
        }
    }
    m
}

#[test]
fn ptdf_matches_pseudo_inverse_construction() {
    for dc in systems().iter().take(3) {
        let ptdf = build_ptdf(dc).unwrap();
        let oracle = ptdf_by_pseudo_inverse(dc);
        let diff = (&ptdf.entries - &oracle).amax();
        assert!(diff < 1e-9, "{} buses: {diff:e}", dc.num_buses());
        assert!(ptdf.entries.column(dc.slack).iter().all(|&x| x == 0.0));
    }
}

#[test]
fn own_terminal_transfer_stays_within_unit_range() {
    for dc in systems() {
        let ptdf = build_ptdf(&dc).unwrap();
        for k in 0..dc.num_branches() {
            if dc.susceptances[k] <= 0.0 {
                continue;
            }
            let t = ptdf.entries[(k, dc.from[k])] - ptdf.entries[(k, dc.to[k])];
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&t), "branch {k}: {t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn angle_and_ptdf_flows_agree(raw in prop::collection::vec(-1.0f64..1.0, 118)) {
        for dc in systems() {
            let ptdf = build_ptdf(&dc).unwrap();
            let inj = balanced(&raw, dc.num_buses());
            let theta = solve_angles(&dc, &inj).unwrap();
            let a = line_flows(&dc, &theta).unwrap();
            let b = line_flows_ptdf(&ptdf, &inj).unwrap();
            let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= 1e-8, "{} buses: {worst:e}", dc.num_buses());
        }
    }

    #[test]
    fn ptdf_flows_superpose(
        g1 in prop::collection::vec(-1.0f64..1.0, 57),
        g2 in prop::collection::vec(-1.0f64..1.0, 57),
    ) {
        let dc = build_dc(&raw_case("case57_ieee"));
        let ptdf = build_ptdf(&dc).unwrap();
        let (x, y) = (balanced(&g1, 57), balanced(&g2, 57));
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let fx = line_flows_ptdf(&ptdf, &x).unwrap();
        let fy = line_flows_ptdf(&ptdf, &y).unwrap();
        let fs = line_flows_ptdf(&ptdf, &sum).unwrap();
        for k in 0..fs.len() {
            prop_assert!((fs[k] - fx[k] - fy[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn flows_ignore_angle_shift_and_scale_linearly(shift in -3.0f64..3.0, scale in -4.0f64..4.0,
                                                    raw in prop::collection::vec(-0.5f64..0.5, 30)) {
        let dc = build_dc(&raw_case("case30_ieee"));
        let base = line_flows(&dc, &raw).unwrap();
        let shifted: Vec<f64> = raw.iter().map(|t| t + shift).collect();
        let scaled: Vec<f64> = raw.iter().map(|t| t * scale).collect();
        let fs = line_flows(&dc, &shifted).unwrap();
        let fc = line_flows(&dc, &scaled).unwrap();
        for k in 0..base.len() {
            prop_assert!((fs[k] - base[k]).abs() <= 1e-9 * (1.0 + base[k].abs()) * 10.0);
            prop_assert!((fc[k] - scale * base[k]).abs() <= 1e-9 * (1.0 + base[k].abs()));
        }
    }
}

#[test]
fn unbalanced_injections_are_rejected() {
    let dc = build_dc(&raw_case("case14_ieee"));
    let ptdf = build_ptdf(&dc).unwrap();
    let mut inj = vec![0.0; 14];
    inj[3] = 1e-6;
    assert!(line_flows_ptdf(&ptdf, &inj).is_err());
}
