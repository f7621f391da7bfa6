//! Text forms of a [`RunReport`]: a key=value report (with an optional
//! solution block that `decompose` reads back) and a per-round CSV.

use std::fmt::Write as _;

use crate::driver::RunReport;
use crate::error::{Error, Result};
use crate::relaxation::{BranchValues, SolutionPoint};
use crate::separation::CutFamily;

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:e}"))
}

/// Header, one block per round, and the final solution if any.
pub fn format_report(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case={}", r.case);
    let _ = writeln!(out, "backend={}", r.backend);
    let _ = writeln!(out, "objective_mode={}", r.objective_mode);
    let _ = writeln!(out, "approximate={}", r.approximate);
    let _ = writeln!(out, "warm={}", r.warm);
    let _ = writeln!(out, "status={}", r.status);
    let _ = writeln!(out, "bound={}", opt(r.bound));
    let _ = writeln!(out, "round0_bound={}", opt(r.round0_bound));
    let _ = writeln!(out, "archived_cuts={}", r.archived_cuts);
    let _ = writeln!(out, "solves={}", r.solves());
    let _ = writeln!(out, "cut_rounds={}", r.cut_rounds());
    let _ = writeln!(out, "computed={}", r.total_computed());
    let _ = writeln!(out, "added={}", r.total_added());
    let _ = writeln!(out, "wall_time={:.3}", r.wall_time);
    for log in &r.rounds {
        let _ = writeln!(out, "\n[round {}]", log.round);
        let _ = writeln!(out, "z={:e}", log.objective);
        for f in CutFamily::ALL {
            let _ = writeln!(out, "computed_{f}={}", log.computed.get(f));
        }
        for f in CutFamily::ALL {
            let _ = writeln!(out, "added_{f}={}", log.added.get(f));
        }
        let _ = writeln!(out, "dropped={}", log.dropped);
        let _ = writeln!(out, "live_cuts={}", log.live_cuts);
        for (f, v) in CutFamily::ALL.iter().zip(log.max_violation) {
            let _ = writeln!(out, "max_violation_{f}={v:e}");
        }
        let _ = writeln!(out, "solve_time={:.4}", log.solve_time);
        let _ = writeln!(out, "iterations={}", log.iterations);
    }
    if let Some(pt) = &r.solution {
        out.push('\n');
        out.push_str(&format_solution(pt));
    }
    out
}

/// Deterministic per-round table: no timing columns.
pub fn format_csv(r: &RunReport) -> String {
    let mut out = String::from("round,z,computed,added,dropped,live_cuts,iterations\n");
    for log in &r.rounds {
        let _ = writeln!(
            out,
            "{},{:e},{},{},{},{},{}",
            log.round,
            log.objective,
            log.computed.total(),
            log.added.total(),
            log.dropped,
            log.live_cuts,
            log.iterations
        );
    }
    out
}

pub fn format_solution(pt: &SolutionPoint) -> String {
    let mut out = String::from("[solution]\n");
    let _ = writeln!(out, "objective={:e}", pt.objective);
    let _ = writeln!(out, "round={}", pt.round);
    for (k, v) in pt.v2.iter().enumerate() {
        let _ = writeln!(out, "v2 {k} {v:e}");
    }
    for (l, b) in pt.branches.iter().enumerate() {
        let _ = writeln!(
            out,
            "branch {l} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
            b.c, b.s, b.i2, b.p_km, b.q_km, b.p_mk, b.q_mk
        );
    }
    for (g, (p, q)) in pt.pg.iter().zip(&pt.qg).enumerate() {
        let _ = writeln!(out, "gen {g} {p:e} {q:e}");
    }
    out
}

/// Read the `[solution]` block of a report.
pub fn parse_solution(text: &str) -> Result<SolutionPoint> {
    let start = text
        .lines()
        .position(|l| l.trim() == "[solution]")
        .ok_or_else(|| Error::Parse { line: 0, msg: "report has no [solution] block".into() })?;
    let mut pt = SolutionPoint {
        objective: f64::NAN,
        round: 0,
        v2: Vec::new(),
        branches: Vec::new(),
        pg: Vec::new(),
        qg: Vec::new(),
    };
    for (i, line) in text.lines().enumerate().skip(start + 1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            break;
        }
        let err = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
        if let Some(v) = line.strip_prefix("objective=") {
            pt.objective = v.parse().map_err(|_| err("bad objective"))?;
            continue;
        }
        if let Some(v) = line.strip_prefix("round=") {
            pt.round = v.parse().map_err(|_| err("bad round"))?;
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let idx: usize = fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err("missing index"))?;
        let nums: Vec<f64> = fields[2..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err("bad number"))?;
        let (kind, expected, len) = match fields[0] {
            "v2" => ("v2", 1, pt.v2.len()),
            "branch" => ("branch", 7, pt.branches.len()),
            "gen" => ("gen", 2, pt.pg.len()),
            _ => return Err(err("unknown record")),
        };
        if nums.len() != expected {
            return Err(err(&format!("{kind} record needs {expected} values")));
        }
        if idx != len {
            return Err(err(&format!("{kind} records out of order")));
        }
        match kind {
            "v2" => pt.v2.push(nums[0]),
            "branch" => pt.branches.push(BranchValues {
                c: nums[0],
                s: nums[1],
                i2: nums[2],
                p_km: nums[3],
                q_km: nums[4],
                p_mk: nums[5],
                q_mk: nums[6],
            }),
            _ => {
                pt.pg.push(nums[0]);
                pt.qg.push(nums[1]);
            }
        }
    }
    Ok(pt)
}
