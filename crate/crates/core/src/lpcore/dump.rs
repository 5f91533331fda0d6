use std::io::{self, Write};

use super::lp::{LinearProgram, Relation, Sense};

/// Writes `lp` in a fixed-width text layout: a header line, one line per
/// variable, then each row followed by its coefficients.
pub fn write_fixed_width(lp: &LinearProgram, out: &mut impl Write) -> io::Result<()> {
    let sense = match lp.sense() {
        Sense::Minimize => "MIN",
        Sense::Maximize => "MAX",
    };
    writeln!(
        out,
        "LP {sense} VARS {:>8} ROWS {:>8} OFFSET {:>24.16e}",
        lp.num_vars(),
        lp.num_constraints(),
        lp.offset()
    )?;
    writeln!(out, "VARIABLES")?;
    for (j, (v, c)) in lp.variables().iter().zip(lp.objective()).enumerate() {
        writeln!(
            out,
            "{j:>8} {:<24} {:>24.16e} {:>24.16e} {:>24.16e}",
            truncate(&v.name),
            v.lower,
            v.upper,
            c
        )?;
    }
    writeln!(out, "ROWS")?;
    for (i, row) in lp.constraints().iter().enumerate() {
        let (rel, lo, hi) = match row.relation {
            Relation::Eq(v) => ("E", v, v),
            Relation::Le(v) => ("L", f64::NEG_INFINITY, v),
            Relation::Ge(v) => ("G", v, f64::INFINITY),
            Relation::Range(lo, hi) => ("R", lo, hi),
        };
        writeln!(
            out,
            "{i:>8} {:<24} {rel} {lo:>24.16e} {hi:>24.16e} {:>8}",
            truncate(&row.name),
            row.terms.len()
        )?;
        for &(v, a) in &row.terms {
            writeln!(out, "         {:>8} {a:>24.16e}", v.0)?;
        }
    }
    Ok(())
}

fn truncate(name: &str) -> &str {
    match name.char_indices().nth(24) {
        Some((i, _)) => &name[..i],
        None => name,
    }
}
