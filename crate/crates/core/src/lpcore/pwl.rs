//! Secant linearization of convex quadratic generator costs.

use serde::{Deserialize, Serialize};

use super::lp::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPiece {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearPiece {
    pub fn eval(&self, p: f64) -> f64 {
        self.slope * p + self.intercept
    }
}

/// Convex piecewise-linear cost: `pieces[k]` is the secant on
/// `[breakpoints[k], breakpoints[k + 1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCost {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<LinearPiece>,
}

impl PiecewiseCost {
    pub fn eval(&self, p: f64) -> f64 {
        self.pieces
            .iter()
            .map(|piece| piece.eval(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cost at the lower end of the domain.
    pub fn base_cost(&self) -> f64 {
        self.eval(self.breakpoints[0])
    }

    /// `(width, slope)` of each segment, in increasing-slope order.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.pieces)
            .map(|(w, piece)| (w[1] - w[0], piece.slope))
    }
}

/// Splits `[p_min, p_max]` into `segments` equal pieces and returns the secant
/// of `c0 + c1 p + c2 p^2` on each. Overestimates the quadratic by at most
/// `c2 * (width / 2)^2`. A linear cost (`c2 == 0`) yields a single exact piece.
pub fn piecewise_linearize(
    c0: f64,
    c1: f64,
    c2: f64,
    p_min: f64,
    p_max: f64,
    segments: usize,
) -> Result<PiecewiseCost, LpError> {
    if c2 < 0.0 {
        return Err(LpError::InvalidCost(format!(
            "non-convex cost (quadratic coefficient {c2})"
        )));
    }
    if segments == 0 {
        return Err(LpError::InvalidCost("zero linearization segments".into()));
    }
    if !(p_min <= p_max) {
        return Err(LpError::InvalidCost(format!("cost domain [{p_min}, {p_max}]")));
    }
    let cost = |p: f64| c0 + c1 * p + c2 * p * p;
    if c2 == 0.0 || p_min == p_max {
        let slope = c1 + 2.0 * c2 * p_min;
        return Ok(PiecewiseCost {
            breakpoints: vec![p_min, p_max],
            pieces: vec![LinearPiece {
                slope,
                intercept: cost(p_min) - slope * p_min,
            }],
        });
    }
    let width = (p_max - p_min) / segments as f64;
    let breakpoints: Vec<f64> = (0..=segments)
        .map(|k| if k == segments { p_max } else { p_min + width * k as f64 })
        .collect();
    let pieces = breakpoints
        .windows(2)
        .map(|w| LinearPiece {
            slope: c1 + c2 * (w[0] + w[1]),
            intercept: c0 - c2 * w[0] * w[1],
        })
        .collect();
    Ok(PiecewiseCost { breakpoints, pieces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_cost_is_one_exact_piece() {
        let pwl = piecewise_linearize(1.0, 5.0, 0.0, 0.0, 3.0, 10).unwrap();
        assert_eq!(pwl.pieces, vec![LinearPiece { slope: 5.0, intercept: 1.0 }]);
        assert_eq!(pwl.eval(2.0), 11.0);
    }

    #[test]
    fn unit_quadratic_two_secants() {
        let pwl = piecewise_linearize(0.0, 0.0, 1.0, 0.0, 2.0, 2).unwrap();
        assert_eq!(pwl.breakpoints, vec![0.0, 1.0, 2.0]);
        for (p, q) in [(0.0, 0.0), (1.0, 1.0), (2.0, 4.0)] {
            assert!((pwl.eval(p) - q).abs() < 1e-15);
        }
        assert!((pwl.eval(0.5) - 0.25 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn error_bound_holds_on_fine_grid() {
        let (c0, c1, c2) = (3.0, 2.0, 0.7);
        for k in [1usize, 3, 7, 10] {
            let pwl = piecewise_linearize(c0, c1, c2, 0.5, 4.0, k).unwrap();
            let width = 3.5 / k as f64;
            let bound = c2 * width * width / 4.0;
            for i in 0..=2000 {
                let p = 0.5 + 3.5 * i as f64 / 2000.0;
                let err = pwl.eval(p) - (c0 + c1 * p + c2 * p * p);
                assert!(err >= -1e-12 && err <= bound + 1e-12, "k={k} p={p} err={err}");
            }
        }
    }

    #[test]
    fn rejects_nonconvex_and_zero_segments() {
        assert!(piecewise_linearize(0.0, 1.0, -0.1, 0.0, 1.0, 4).is_err());
        assert!(piecewise_linearize(0.0, 1.0, 0.1, 0.0, 1.0, 0).is_err());
    }
}
