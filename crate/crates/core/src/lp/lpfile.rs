//! CPLEX LP file writer. Variables are named `x<index>`, rows `c<id>`.

use std::fmt::Write as _;
use std::path::Path;

use super::store::ModelStore;
use super::{LpError, Sense};

fn coef(out: &mut String, a: f64, first: bool, name: &str) {
    let sign = if a < 0.0 { "-" } else { "+" };
    let mag = a.abs();
    if first {
        if a < 0.0 {
            out.push_str("- ");
        }
    } else {
        let _ = write!(out, " {sign} ");
    }
    if mag != 1.0 {
        let _ = write!(out, "{mag} ");
    }
    out.push_str(name);
}

pub(crate) fn format_lp(store: &ModelStore, title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {title}");
    if store.offset != 0.0 {
        let _ = writeln!(out, "\\ objective offset {}", store.offset);
    }
    out.push_str("Minimize\n obj: ");
    let mut first = true;
    for (j, col) in store.columns.iter().enumerate() {
        if col.cost != 0.0 {
            coef(&mut out, col.cost, first, &format!("x{j}"));
            first = false;
        }
    }
    if store.has_quadratic() {
        out.push_str(if first { "[ " } else { " + [ " });
        let mut qfirst = true;
        for (j, col) in store.columns.iter().enumerate() {
            if col.quad > 0.0 {
                if !qfirst {
                    out.push_str(" + ");
                }
                let _ = write!(out, "{} x{j} ^ 2", 2.0 * col.quad);
                qfirst = false;
            }
        }
        out.push_str(" ] / 2");
        first = false;
    }
    if first {
        out.push('0');
    }
    out.push_str("\nSubject To\n");
    for (id, c) in store.live_constraints() {
        let _ = write!(out, " c{id}: ");
        if c.terms.is_empty() {
            out.push_str("0 x0");
        }
        for (k, &(j, a)) in c.terms.iter().enumerate() {
            coef(&mut out, a, k == 0, &format!("x{j}"));
        }
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (j, col) in store.columns.iter().enumerate() {
        match (col.lb.is_finite(), col.ub.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " x{j} free");
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= x{j} <= {}", col.lb, col.ub);
            }
            (true, false) => {
                let _ = writeln!(out, " x{j} >= {}", col.lb);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= x{j} <= {}", col.ub);
            }
        }
    }
    out.push_str("End\n");
    out
}

pub(crate) fn write_lp(store: &ModelStore, title: &str, path: &Path) -> Result<(), LpError> {
    std::fs::write(path, format_lp(store, title))
        .map_err(|e| LpError::Io(format!("{}: {e}", path.display())))
}
