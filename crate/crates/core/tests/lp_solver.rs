use gridscreen::lpcore::{
    solve_lp, solve_milp, LinearProgram, LpStatus, MilpStatus, Relation, Sense, VarId,
};
use proptest::prelude::*;

/// Half-space `a.x <= b` used by the vertex oracle.
struct HalfSpace {
    a: Vec<f64>,
    b: f64,
}

fn half_spaces(lp: &LinearProgram) -> Vec<HalfSpace> {
    let n = lp.num_vars();
    let mut out = Vec::new();
    let unit = |j: usize, s: f64| {
        let mut a = vec![0.0; n];
        a[j] = s;
        a
    };
    for (j, v) in lp.variables().iter().enumerate() {
        out.push(HalfSpace { a: unit(j, 1.0), b: v.upper });
        out.push(HalfSpace { a: unit(j, -1.0), b: -v.lower });
    }
    for c in lp.constraints() {
        let mut a = vec![0.0; n];
        for &(v, coef) in &c.terms {
            a[v.0] = coef;
        }
        let (lo, hi) = c.relation.interval();
        if hi.is_finite() {
            out.push(HalfSpace { a: a.clone(), b: hi });
        }
        if lo.is_finite() {
            out.push(HalfSpace { a: a.iter().map(|x| -x).collect(), b: -lo });
        }
    }
    out
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for k in 0..n {
        let p = (k..n).max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs()))?;
        if m[p][k].abs() < 1e-10 {
            return None;
        }
        m.swap(k, p);
        rhs.swap(k, p);
        for i in 0..n {
            if i != k {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Best vertex over all n-subsets of tight half-spaces; `None` when no vertex is feasible.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let hs = half_spaces(lp);
    let sign = if lp.sense() == Sense::Minimize { 1.0 } else { -1.0 };
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| hs[i].a.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| hs[i].b).collect();
        if let Some(x) = solve_square(m, rhs) {
            let feasible = hs
                .iter()
                .all(|h| h.a.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= h.b + 1e-7);
            if feasible {
                let obj = sign * lp.evaluate(&x);
                if best.is_none_or(|b| obj < b) {
                    best = Some(obj);
                }
            }
        }
        // next combination
        let mut k = n;
        loop {
            if k == 0 {
                return best.map(|b| sign * b);
            }
            k -= 1;
            if idx[k] < hs.len() - n + k {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn random_lp(
    sense: bool,
    costs: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<(Vec<f64>, u8, f64, f64)>,
) -> LinearProgram {
    let mut lp = LinearProgram::new(if sense { Sense::Maximize } else { Sense::Minimize });
    let vars: Vec<VarId> = costs
        .iter()
        .zip(&bounds)
        .enumerate()
        .map(|(j, (&c, &(a, b)))| lp.add_var(format!("x{j}"), a.min(b), a.max(b), c))
        .collect();
    for (i, (coefs, kind, r1, r2)) in rows.into_iter().enumerate() {
        let rel = match kind % 4 {
            0 => Relation::Le(r1),
            1 => Relation::Ge(r1),
            2 => Relation::Eq(r1),
            _ => Relation::Range(r1.min(r2), r1.max(r2)),
        };
        let terms: Vec<(VarId, f64)> = vars.iter().copied().zip(coefs).collect();
        lp.add_constraint(format!("r{i}"), terms, rel).unwrap();
    }
    lp
}

fn small_int() -> impl Strategy<Value = f64> {
    (-4i32..=4).prop_map(|v| v as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplex_matches_vertex_enumeration(
        sense in any::<bool>(),
        costs in prop::collection::vec(small_int(), 3),
        bounds in prop::collection::vec((small_int(), small_int()), 3),
        rows in prop::collection::vec(
            (prop::collection::vec(small_int(), 3), any::<u8>(), small_int(), small_int()), 0..4),
    ) {
        let lp = random_lp(sense, costs, bounds, rows);
        let sol = solve_lp(&lp).unwrap();
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-7 * best.abs().max(1.0),
                    "simplex {} oracle {}", sol.objective, best);
                prop_assert!(sol.primal_residual(&lp) <= 1e-8);
                prop_assert!(sol.relative_duality_gap() <= 1e-7);
            }
        }
    }

    #[test]
    fn identical_input_gives_identical_output(
        costs in prop::collection::vec(small_int(), 3),
        bounds in prop::collection::vec((small_int(), small_int()), 3),
        rows in prop::collection::vec(
            (prop::collection::vec(small_int(), 3), any::<u8>(), small_int(), small_int()), 1..4),
    ) {
        let lp = random_lp(false, costs, bounds, rows);
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp.clone()).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn milp_matches_enumeration(
        costs in prop::collection::vec(small_int(), 5),
        rows in prop::collection::vec(
            (prop::collection::vec(small_int(), 5), any::<u8>(), small_int(), small_int()), 1..4),
    ) {
        // x0..x2 binary, x3..x4 continuous in [-2, 3]
        let bounds = vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (-2.0, 3.0), (-2.0, 3.0)];
        let lp = random_lp(false, costs, bounds, rows);
        let binaries = [VarId(0), VarId(1), VarId(2)];
        let sol = solve_milp(&lp, &binaries).unwrap();
        let mut best: Option<f64> = None;
        for mask in 0..8u32 {
            let mut fixed = lp.clone();
            for (k, v) in binaries.iter().enumerate() {
                let val = ((mask >> k) & 1) as f64;
                fixed.set_bounds(*v, val, val);
            }
            let r = solve_lp(&fixed).unwrap();
            if r.is_optimal() && best.is_none_or(|b| r.objective < b) {
                best = Some(r.objective);
            }
        }
        match best {
            None => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
            Some(b) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                prop_assert!((sol.objective - b).abs() <= 1e-7 * b.abs().max(1.0));
                for v in &binaries {
                    let x = sol.x[v.0];
                    prop_assert!(x == 0.0 || x == 1.0);
                }
            }
        }
    }
}

/// Klee-Minty style and highly degenerate instances: many variables pinned at
/// coincident bounds with redundant tight rows through the same vertex.
fn degenerate_corpus() -> Vec<LinearProgram> {
    let mut out = Vec::new();
    for n in [3usize, 5, 8] {
        // all rows pass through the origin, optimum at the origin
        let mut lp = LinearProgram::new(Sense::Maximize);
        let xs: Vec<VarId> = (0..n)
            .map(|j| lp.add_var(format!("x{j}"), 0.0, 10.0, 1.0 + j as f64 * 0.1))
            .collect();
        for i in 0..2 * n {
            let terms: Vec<(VarId, f64)> = xs
                .iter()
                .enumerate()
                .map(|(j, &x)| (x, if (i + j) % 3 == 0 { 1.0 } else { -0.5 + (i * j % 4) as f64 }))
                .collect();
            lp.add_constraint(format!("d{i}"), terms, Relation::Le(0.0)).unwrap();
        }
        out.push(lp);

        // Klee-Minty cube
        let mut km = LinearProgram::new(Sense::Maximize);
        let xs: Vec<VarId> = (0..n)
            .map(|j| km.add_var(format!("x{j}"), 0.0, f64::INFINITY, 2f64.powi((n - 1 - j) as i32)))
            .collect();
        for i in 0..n {
            let mut terms: Vec<(VarId, f64)> = (0..i)
                .map(|j| (xs[j], 2f64.powi((i - j + 1) as i32)))
                .collect();
            terms.push((xs[i], 1.0));
            km.add_constraint(format!("k{i}"), terms, Relation::Le(5f64.powi(i as i32 + 1)))
                .unwrap();
        }
        out.push(km);

        // assignment-like polytope: many ties, coincident bounds
        let mut ap = LinearProgram::new(Sense::Minimize);
        let mut cells = Vec::new();
        for i in 0..n {
            for j in 0..n {
                cells.push(ap.add_var(format!("a{i}_{j}"), 0.0, 1.0, ((i + j) % 2) as f64));
            }
        }
        for i in 0..n {
            ap.add_constraint(format!("row{i}"), (0..n).map(|j| (cells[i * n + j], 1.0)), Relation::Eq(1.0))
                .unwrap();
            ap.add_constraint(format!("col{i}"), (0..n).map(|j| (cells[j * n + i], 1.0)), Relation::Eq(1.0))
                .unwrap();
        }
        out.push(ap);
    }
    out
}

#[test]
fn degenerate_corpus_terminates_with_certificates() {
    for (k, lp) in degenerate_corpus().iter().enumerate() {
        let sol = solve_lp(lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "instance {k}");
        assert!(sol.iterations <= 1_000_000);
        assert!(sol.primal_residual(lp) <= 1e-8, "instance {k}");
        assert!(sol.relative_duality_gap() <= 1e-7, "instance {k}");
    }
}

#[test]
fn klee_minty_optimum() {
    // max sum 2^(n-1-j) x_j over the Klee-Minty cube has optimum 5^n.
    let corpus = degenerate_corpus();
    for (k, n) in [(1usize, 3i32), (4, 5), (7, 8)] {
        let sol = solve_lp(&corpus[k]).unwrap();
        let expect = 5f64.powi(n);
        assert!((sol.objective - expect).abs() <= 1e-9 * expect, "{} vs {}", sol.objective, expect);
    }
}
