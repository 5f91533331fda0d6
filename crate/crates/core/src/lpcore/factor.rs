//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The basis is factored as `P B Q = L U` by right-looking Gaussian elimination
//! on a dense workspace. Columns are visited sparsest first and rows are chosen
//! by partial pivoting, so unit columns (logicals) cost nothing. Each later
//! basis change appends an eta vector instead of refactoring.

use super::lp::LpError;

const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the entering column, `(position, value)`.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    /// Pivot row / column per elimination step.
    pivot_row: Vec<usize>,
    pivot_col: Vec<usize>,
    /// Row multipliers per step, keyed by original row.
    lower: Vec<Vec<(usize, f64)>>,
    /// Remaining entries of the pivot row per step, keyed by basis position.
    upper: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    etas: Vec<Eta>,
    work: Vec<f64>,
}

impl BasisFactor {
    /// Factors the basis whose column at position `p` is produced by `column(p, sink)`.
    pub(crate) fn factor(
        m: usize,
        mut column: impl FnMut(usize, &mut dyn FnMut(usize, f64)),
    ) -> Result<Self, LpError> {
        let mut w = vec![0.0; m * m];
        let mut nnz = vec![0usize; m];
        for p in 0..m {
            column(p, &mut |row, val| {
                w[row * m + p] += val;
            });
        }
        for p in 0..m {
            nnz[p] = (0..m).filter(|&r| w[r * m + p] != 0.0).count();
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (nnz[p], p));

        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut f = BasisFactor {
            m,
            pivot_row: Vec::with_capacity(m),
            pivot_col: Vec::with_capacity(m),
            lower: Vec::with_capacity(m),
            upper: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            etas: Vec::new(),
            work: vec![0.0; m],
        };
        for &c in &order {
            let mut best = None;
            let mut best_abs = 0.0;
            for r in 0..m {
                if row_active[r] {
                    let a = w[r * m + c].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(r);
                    }
                }
            }
            let p = match best {
                Some(p) if best_abs > SINGULAR_TOL => p,
                _ => {
                    return Err(LpError::SolverFailure(format!(
                        "singular basis (column {c}, pivot {best_abs:e})"
                    )))
                }
            };
            let piv = w[p * m + c];
            row_active[p] = false;
            col_active[c] = false;
            let mut lcol = Vec::new();
            for r in 0..m {
                if row_active[r] {
                    let v = w[r * m + c];
                    if v != 0.0 {
                        lcol.push((r, v / piv));
                        w[r * m + c] = 0.0;
                    }
                }
            }
            let mut urow = Vec::new();
            for j in 0..m {
                if col_active[j] {
                    let v = w[p * m + j];
                    if v != 0.0 {
                        urow.push((j, v));
                    }
                }
            }
            for &(r, l) in &lcol {
                let row = &mut w[r * m..(r + 1) * m];
                for &(j, u) in &urow {
                    row[j] -= l * u;
                }
            }
            f.pivot_row.push(p);
            f.pivot_col.push(c);
            f.lower.push(lcol);
            f.upper.push(urow);
            f.diag.push(piv);
        }
        Ok(f)
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs` in place. `rhs` is indexed by row, the result by basis position.
    pub(crate) fn ftran(&mut self, rhs: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let v = rhs[self.pivot_row[k]];
            if v != 0.0 {
                for &(r, l) in &self.lower[k] {
                    rhs[r] -= l * v;
                }
            }
        }
        let x = &mut self.work;
        for k in (0..m).rev() {
            let mut v = rhs[self.pivot_row[k]];
            for &(j, u) in &self.upper[k] {
                v -= u * x[j];
            }
            x[self.pivot_col[k]] = v / self.diag[k];
        }
        rhs.copy_from_slice(x);
        for eta in &self.etas {
            let xr = rhs[eta.pos] / eta.pivot;
            rhs[eta.pos] = xr;
            if xr != 0.0 {
                for &(i, a) in &eta.entries {
                    rhs[i] -= a * xr;
                }
            }
        }
    }

    /// Solves `B^T y = c` in place. `c` is indexed by basis position, the result by row.
    pub(crate) fn btran(&mut self, c: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.pos];
            for &(i, a) in &eta.entries {
                v -= a * c[i];
            }
            c[eta.pos] = v / eta.pivot;
        }
        let z = &mut self.work;
        for k in 0..m {
            let zp = c[self.pivot_col[k]] / self.diag[k];
            z[self.pivot_row[k]] = zp;
            if zp != 0.0 {
                for &(j, u) in &self.upper[k] {
                    c[j] -= u * zp;
                }
            }
        }
        for k in (0..m).rev() {
            let p = self.pivot_row[k];
            let mut v = z[p];
            for &(r, l) in &self.lower[k] {
                v -= l * z[r];
            }
            z[p] = v;
        }
        c.copy_from_slice(z);
    }

    /// Records that the column `alpha = B^{-1} a` replaced basis position `pos`.
    pub(crate) fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_factor(cols: &[Vec<f64>]) -> BasisFactor {
        let m = cols.len();
        BasisFactor::factor(m, |p, sink| {
            for (r, &v) in cols[p].iter().enumerate() {
                if v != 0.0 {
                    sink(r, v);
                }
            }
        })
        .unwrap()
    }

    fn mat_vec(cols: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        let m = cols.len();
        let mut out = vec![0.0; m];
        for (p, col) in cols.iter().enumerate() {
            for r in 0..m {
                out[r] += col[r] * x[p];
            }
        }
        out
    }

    #[test]
    fn ftran_and_btran_invert_the_basis() {
        let cols = vec![
            vec![2.0, 0.0, 1.0],
            vec![0.0, -1.0, 0.0],
            vec![1.0, 3.0, 4.0],
        ];
        let mut f = dense_factor(&cols);
        let b = vec![1.0, 2.0, 3.0];
        let mut x = b.clone();
        f.ftran(&mut x);
        let bx = mat_vec(&cols, &x);
        for (u, v) in bx.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        // y^T B = c^T  <=>  col_p . y = c_p
        let c = vec![0.5, -1.0, 2.0];
        let mut y = c.clone();
        f.btran(&mut y);
        for (p, col) in cols.iter().enumerate() {
            let dot: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!((dot - c[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactor() {
        let mut cols = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let mut f = dense_factor(&cols);
        let entering = vec![1.0, 2.0, -1.0];
        let mut alpha = entering.clone();
        f.ftran(&mut alpha);
        f.update(1, &alpha);
        cols[1] = entering;
        let mut g = dense_factor(&cols);
        let rhs = vec![3.0, -1.0, 0.5];
        let (mut a, mut b) = (rhs.clone(), rhs.clone());
        f.ftran(&mut a);
        g.ftran(&mut b);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let (mut a, mut b) = (rhs.clone(), rhs);
        f.btran(&mut a);
        g.btran(&mut b);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_basis_is_reported() {
        let cols = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let res = BasisFactor::factor(2, |p, sink| {
            for (r, &v) in cols[p].iter().enumerate() {
                sink(r, v);
            }
        });
        assert!(matches!(res, Err(LpError::SolverFailure(_))));
    }
}
