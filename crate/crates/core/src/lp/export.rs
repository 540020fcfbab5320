//! Writes a [`LinearProgram`] in CPLEX LP text format, for cross-checking a
//! program against an external solver.

use std::fmt::Write;

use super::{LinearProgram, Relation, Sense};

fn name(p: &LinearProgram, j: usize) -> String {
    p.names.get(j).cloned().unwrap_or_else(|| format!("v{j}"))
}

fn term(out: &mut String, first: &mut bool, coef: f64, var: &str) {
    if coef == 0.0 {
        return;
    }
    let sign = if coef < 0.0 { "-" } else { "+" };
    if *first {
        if coef < 0.0 {
            out.push_str("- ");
        }
    } else {
        let _ = write!(out, " {sign} ");
    }
    let _ = write!(out, "{} {}", coef.abs(), var);
    *first = false;
}

pub fn to_lp_format(p: &LinearProgram) -> String {
    let mut out = String::new();
    out.push_str(match p.sense {
        Sense::Minimize => "Minimize\n obj: ",
        Sense::Maximize => "Maximize\n obj: ",
    });
    let mut first = true;
    for (j, &c) in p.objective.iter().enumerate() {
        term(&mut out, &mut first, c, &name(p, j));
    }
    if first {
        out.push('0');
    }
    out.push_str("\nSubject To\n");
    for (r, row) in p.rows.iter().enumerate() {
        let _ = write!(out, " c{}: ", r + 1);
        let mut first = true;
        for &(j, a) in &row.coeffs {
            term(&mut out, &mut first, a, &name(p, j));
        }
        if first {
            let _ = write!(out, "0 {}", name(p, 0));
        }
        let rel = match row.relation {
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..p.num_vars() {
        let (l, u) = (p.lower[j], p.upper[j]);
        let v = name(p, j);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {l} <= {v} <= {u}");
            }
            (true, false) if l != 0.0 => {
                let _ = writeln!(out, " {v} >= {l}");
            }
            (true, false) => {}
            (false, true) => {
                let _ = writeln!(out, " -inf <= {v} <= {u}");
            }
            (false, false) => {
                let _ = writeln!(out, " {v} free");
            }
        }
    }
    out.push_str("End\n");
    out
}
