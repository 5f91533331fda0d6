//! DC power flow structures: incidence, angle solves and the PTDF matrix.

use std::io::{self, Write};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use thiserror::Error;

use crate::caseio::Network;

/// Allowed imbalance of an injection vector passed to [`line_flows_ptdf`].
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcError {
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("injections are unbalanced (sum = {0:e})")]
    Unbalanced(f64),
    #[error("reduced susceptance matrix is singular; is the network connected?")]
    Singular,
}

#[derive(Clone, Debug)]
pub struct DcSystem {
    pub bus_ids: Vec<u32>,
    pub branch_ids: Vec<usize>,
    /// Incidence in coordinate form: branch `k` has +1 at `from[k]` and -1 at `to[k]`.
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub susceptances: Vec<f64>,
    pub f_max: Vec<Option<f64>>,
    /// Bus position of each generator.
    pub gen_bus: Vec<usize>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub slack: usize,
}

impl DcSystem {
    pub fn num_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn num_branches(&self) -> usize {
        self.from.len()
    }

    pub fn slack_bus(&self) -> u32 {
        self.bus_ids[self.slack]
    }

    /// Dense branch x bus incidence matrix.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.num_branches(), self.num_buses());
        for k in 0..self.num_branches() {
            a[(k, self.from[k])] = 1.0;
            a[(k, self.to[k])] = -1.0;
        }
        a
    }

    pub fn branch_position(&self, id: usize) -> Option<usize> {
        self.branch_ids.binary_search(&id).ok()
    }

    /// Net injection per bus, `G p - d`.
    pub fn injections(&self, p: &[f64], d: &[f64]) -> Vec<f64> {
        let mut inj: Vec<f64> = d.iter().map(|x| -x).collect();
        for (g, &pg) in p.iter().enumerate() {
            inj[self.gen_bus[g]] += pg;
        }
        inj
    }

    /// Bus susceptance matrix with the slack row and column removed.
    fn reduced_bbus(&self) -> DMatrix<f64> {
        let n = self.num_buses() - 1;
        let red = |k| reduced(self.slack, k);
        let mut b = DMatrix::zeros(n, n);
        for k in 0..self.num_branches() {
            let (i, j, s) = (red(self.from[k]), red(self.to[k]), self.susceptances[k]);
            if let Some(i) = i {
                b[(i, i)] += s;
            }
            if let Some(j) = j {
                b[(j, j)] += s;
            }
            if let (Some(i), Some(j)) = (i, j) {
                b[(i, j)] -= s;
                b[(j, i)] -= s;
            }
        }
        b
    }
}

pub fn build_dc(network: &Network) -> DcSystem {
    let index = network.bus_index();
    let pos = |id: u32| index[&id];
    DcSystem {
        bus_ids: network.buses.iter().map(|b| b.id).collect(),
        branch_ids: network.branches.iter().map(|b| b.id).collect(),
        from: network.branches.iter().map(|b| pos(b.from_bus)).collect(),
        to: network.branches.iter().map(|b| pos(b.to_bus)).collect(),
        susceptances: network.branches.iter().map(|b| b.b).collect(),
        f_max: network.branches.iter().map(|b| b.f_max).collect(),
        gen_bus: network.generators.iter().map(|g| pos(g.bus)).collect(),
        p_min: network.generators.iter().map(|g| g.p_min).collect(),
        p_max: network.generators.iter().map(|g| g.p_max).collect(),
        slack: pos(network.slack_bus),
    }
}

enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

/// Reusable factorization of the reduced bus susceptance matrix.
pub struct AngleSolver {
    factor: Factor,
    slack: usize,
    n: usize,
}

impl AngleSolver {
    pub fn new(dc: &DcSystem) -> Result<Self, DcError> {
        let b = dc.reduced_bbus();
        let factor = match Cholesky::new(b.clone()) {
            Some(c) => Factor::Cholesky(c),
            None => {
                let lu = b.lu();
                if !lu.is_invertible() {
                    return Err(DcError::Singular);
                }
                Factor::Lu(lu)
            }
        };
        Ok(AngleSolver {
            factor,
            slack: dc.slack,
            n: dc.num_buses(),
        })
    }

    fn solve_reduced(&self, rhs: DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Cholesky(c) => c.solve(&rhs),
            Factor::Lu(lu) => lu.solve(&rhs).expect("checked invertible"),
        }
    }

    /// Angles with `theta[slack] = 0` for a per-bus injection vector.
    /// The slack entry of `injections` is ignored (the slack absorbs the balance).
    pub fn solve(&self, injections: &[f64]) -> Result<Vec<f64>, DcError> {
        check_len(injections, self.n)?;
        let rhs = DVector::from_iterator(
            self.n - 1,
            injections.iter().enumerate().filter(|&(k, _)| k != self.slack).map(|(_, &v)| v),
        );
        let red = self.solve_reduced(rhs);
        let mut theta = Vec::with_capacity(self.n);
        theta.extend(red.iter().take(self.slack));
        theta.push(0.0);
        theta.extend(red.iter().skip(self.slack));
        Ok(theta)
    }
}

pub fn solve_angles(dc: &DcSystem, injections: &[f64]) -> Result<Vec<f64>, DcError> {
    AngleSolver::new(dc)?.solve(injections)
}

/// Index of bus `k` once the slack row/column is deleted.
fn reduced(slack: usize, k: usize) -> Option<usize> {
    match k.cmp(&slack) {
        std::cmp::Ordering::Less => Some(k),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(k - 1),
    }
}

fn check_len(v: &[f64], expected: usize) -> Result<(), DcError> {
    if v.len() != expected {
        return Err(DcError::Dimension {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

/// Branch flows `b (theta_from - theta_to)`.
pub fn line_flows(dc: &DcSystem, theta: &[f64]) -> Result<Vec<f64>, DcError> {
    check_len(theta, dc.num_buses())?;
    Ok((0..dc.num_branches())
        .map(|k| dc.susceptances[k] * (theta[dc.from[k]] - theta[dc.to[k]]))
        .collect())
}

#[derive(Clone, Debug)]
pub struct PtdfMatrix {
    /// Branch x bus, columns in the order of `bus_ids`.
    pub entries: DMatrix<f64>,
    pub bus_ids: Vec<u32>,
    pub branch_ids: Vec<usize>,
    pub slack_bus: u32,
}

impl PtdfMatrix {
    /// Debug dump: header of bus ids, then one row per branch.
    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        write!(w, "branch")?;
        for id in &self.bus_ids {
            write!(w, ",{id}")?;
        }
        writeln!(w)?;
        for (r, id) in self.branch_ids.iter().enumerate() {
            write!(w, "{id}")?;
            for v in self.entries.row(r).iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// PTDF with withdrawal at the slack bus, one back-substitution per branch.
pub fn build_ptdf(dc: &DcSystem) -> Result<PtdfMatrix, DcError> {
    let solver = AngleSolver::new(dc)?;
    let (nb, nl) = (dc.num_buses(), dc.num_branches());
    let red = |k| reduced(dc.slack, k);
    let mut entries = DMatrix::zeros(nl, nb);
    for k in 0..nl {
        // row_k = b_k (e_from - e_to)^T Bred^-1, and Bred is symmetric
        let mut rhs = DVector::zeros(nb - 1);
        if let Some(i) = red(dc.from[k]) {
            rhs[i] += dc.susceptances[k];
        }
        if let Some(j) = red(dc.to[k]) {
            rhs[j] -= dc.susceptances[k];
        }
        let y = solver.solve_reduced(rhs);
        for bus in 0..nb {
            if let Some(i) = red(bus) {
                entries[(k, bus)] = y[i];
            }
        }
    }
    Ok(PtdfMatrix {
        entries,
        bus_ids: dc.bus_ids.clone(),
        branch_ids: dc.branch_ids.clone(),
        slack_bus: dc.slack_bus(),
    })
}

/// Branch flows `M g` for a balanced injection vector `g`.
pub fn line_flows_ptdf(ptdf: &PtdfMatrix, injections: &[f64]) -> Result<Vec<f64>, DcError> {
    check_len(injections, ptdf.bus_ids.len())?;
    let total: f64 = injections.iter().sum();
    if total.abs() > BALANCE_TOL {
        return Err(DcError::Unbalanced(total));
    }
    let g = DVector::from_column_slice(injections);
    Ok((&ptdf.entries * g).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseio::{Branch, Bus, Network};
    use approx::assert_abs_diff_eq;

    fn two_bus() -> DcSystem {
        build_dc(&Network {
            base_mva: 100.0,
            buses: vec![Bus { id: 1, d_nom: 0.0 }, Bus { id: 2, d_nom: 0.5 }],
            generators: vec![],
            branches: vec![Branch {
                id: 1,
                from_bus: 1,
                to_bus: 2,
                b: 10.0,
                f_max: Some(1.0),
            }],
            slack_bus: 1,
        })
    }

    /// Buses 1, 2, 3 with branches 1-2, 2-3, 1-3, equal susceptance, slack 3.
    fn triangle() -> DcSystem {
        let br = |id, f, t| Branch {
            id,
            from_bus: f,
            to_bus: t,
            b: 5.0,
            f_max: None,
        };
        build_dc(&Network {
            base_mva: 100.0,
            buses: (1..=3).map(|id| Bus { id, d_nom: 0.0 }).collect(),
            generators: vec![],
            branches: vec![br(1, 1, 2), br(2, 2, 3), br(3, 1, 3)],
            slack_bus: 3,
        })
    }

    #[test]
    fn two_bus_incidence_and_flow() {
        let dc = two_bus();
        assert_eq!(dc.incidence(), DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
        assert_eq!(dc.susceptances, vec![10.0]);
        assert_abs_diff_eq!(line_flows(&dc, &[0.1, 0.0]).unwrap()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn flows_are_linear_and_shift_invariant() {
        let dc = triangle();
        assert_eq!(line_flows(&dc, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let th = [0.3, -0.1, 0.05];
        let f = line_flows(&dc, &th).unwrap();
        let f2 = line_flows(&dc, &th.map(|t| 2.0 * t)).unwrap();
        let fs = line_flows(&dc, &th.map(|t| t + 0.7)).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(f2[k], 2.0 * f[k], epsilon = 1e-12);
            assert_abs_diff_eq!(fs[k], f[k], epsilon = 1e-12);
        }
        assert!(matches!(line_flows(&dc, &[0.0; 2]), Err(DcError::Dimension { .. })));
    }

    #[test]
    fn two_bus_ptdf() {
        let dc = two_bus();
        let m = build_ptdf(&dc).unwrap();
        assert_abs_diff_eq!(m.entries[(0, 1)], -1.0, epsilon = 1e-12);
        assert_eq!(m.entries[(0, 0)], 0.0);
        let f = line_flows_ptdf(&m, &[-0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(f[0], -0.5, epsilon = 1e-12);
        assert_eq!(line_flows_ptdf(&m, &[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn triangle_ptdf_splits_two_to_one() {
        let dc = triangle();
        let m = build_ptdf(&dc).unwrap();
        // injection at bus 1: branches 1-2, 2-3, 1-3
        assert_abs_diff_eq!(m.entries[(0, 0)], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.entries[(1, 0)], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.entries[(2, 0)], 2.0 / 3.0, epsilon = 1e-12);
        for r in 0..3 {
            assert_eq!(m.entries[(r, 2)], 0.0);
        }
        let f = line_flows_ptdf(&m, &[1.0, 0.0, -1.0]).unwrap();
        for (a, b) in f.iter().zip([1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn unbalanced_injection_is_rejected() {
        let m = build_ptdf(&triangle()).unwrap();
        assert!(matches!(
            line_flows_ptdf(&m, &[1.0, 0.0, 0.0]),
            Err(DcError::Unbalanced(_))
        ));
    }

    #[test]
    fn ptdf_matches_angle_solve() {
        let dc = triangle();
        let m = build_ptdf(&dc).unwrap();
        let g = [0.4, -0.9, 0.5];
        let theta = solve_angles(&dc, &g).unwrap();
        let a = line_flows(&dc, &theta).unwrap();
        let b = line_flows_ptdf(&m, &g).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn negative_susceptance_falls_back_to_lu() {
        let mut dc = triangle();
        dc.susceptances[0] = -2.0;
        let m = build_ptdf(&dc).unwrap();
        let g = [0.4, -0.9, 0.5];
        let a = line_flows(&dc, &solve_angles(&dc, &g).unwrap()).unwrap();
        let b = line_flows_ptdf(&m, &g).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn csv_dump_has_bus_header() {
        let m = build_ptdf(&two_bus()).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next(), Some("branch,1,2"));
        assert_eq!(text.lines().count(), 2);
    }
}
