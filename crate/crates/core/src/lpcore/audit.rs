//! Process-wide record of optimal LP certificates.
//!
//! Every optimal solve reports its primal residual and relative duality gap
//! here, so a test harness can assert solver soundness over a whole run.

use std::sync::atomic::{AtomicU64, Ordering};

use super::lp::{DUALITY_GAP_TOL, FEASIBILITY_TOL};

static SOLVES: AtomicU64 = AtomicU64::new(0);
static VIOLATIONS: AtomicU64 = AtomicU64::new(0);
static MAX_RESIDUAL: AtomicU64 = AtomicU64::new(0);
static MAX_GAP: AtomicU64 = AtomicU64::new(0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditSnapshot {
    pub solves: u64,
    /// Solves whose residual or gap exceeded tolerance (or was not finite).
    pub violations: u64,
    pub max_residual: f64,
    pub max_gap: f64,
}

fn raise(slot: &AtomicU64, value: f64) {
    // Non-negative f64 values order the same way as their bit patterns.
    let bits = value.to_bits();
    slot.fetch_max(bits, Ordering::Relaxed);
}

pub(crate) fn record(residual: f64, gap: f64) {
    SOLVES.fetch_add(1, Ordering::Relaxed);
    let ok = residual.is_finite()
        && gap.is_finite()
        && residual <= FEASIBILITY_TOL
        && gap <= DUALITY_GAP_TOL;
    if !ok {
        VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    raise(&MAX_RESIDUAL, if residual.is_finite() { residual } else { f64::MAX });
    raise(&MAX_GAP, if gap.is_finite() { gap } else { f64::MAX });
}

pub fn snapshot() -> AuditSnapshot {
    AuditSnapshot {
        solves: SOLVES.load(Ordering::Relaxed),
        violations: VIOLATIONS.load(Ordering::Relaxed),
        max_residual: f64::from_bits(MAX_RESIDUAL.load(Ordering::Relaxed)),
        max_gap: f64::from_bits(MAX_GAP.load(Ordering::Relaxed)),
    }
}
