//! Reader for the MATPOWER `.m` case subset used here.

use std::collections::HashSet;

use super::RawCase;
use crate::error::{Error, Result};

const BUS_MIN_COLS: usize = 13;
const GEN_MIN_COLS: usize = 10;
const BRANCH_MIN_COLS: usize = 11;
const GENCOST_MIN_COLS: usize = 4;

/// Parse the text of a MATPOWER case function.
pub fn parse_matpower(text: &str) -> Result<RawCase> {
    let mut case = RawCase::default();
    let mut base: Option<f64> = None;
    let mut bus = None;
    let mut gen = None;
    let mut branch = None;
    let mut gencost = None;

    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line = strip_comment(lines[i]).trim();
        if line.starts_with("function") {
            if let Some(name) = line.split('=').nth(1) {
                case.name = name.trim().trim_end_matches(';').to_string();
            }
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            i += 1;
            continue;
        };
        let Some((field, value)) = rest.split_once('=') else {
            i += 1;
            continue;
        };
        let field = field.trim();
        let value = value.trim();
        match field {
            "baseMVA" => {
                let v = value.trim_end_matches(';').trim();
                base = Some(parse_number(v).ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: format!("baseMVA is not a number: {v:?}"),
                })?);
                i += 1;
            }
            "version" => {
                case.version = value.trim_end_matches(';').trim().trim_matches('\'').to_string();
                i += 1;
            }
            "bus" | "gen" | "branch" | "gencost" if value.starts_with('[') => {
                let (rows, next) = read_matrix(&lines, i, value)?;
                match field {
                    "bus" => bus = Some(rows),
                    "gen" => gen = Some(rows),
                    "branch" => branch = Some(rows),
                    _ => gencost = Some(rows),
                }
                i = next;
            }
            _ => i += 1,
        }
    }

    case.base_mva = base.ok_or(Error::MissingTable("baseMVA"))?;
    if !(case.base_mva > 0.0) {
        return Err(Error::InvalidData(format!("baseMVA must be positive, got {}", case.base_mva)));
    }
    case.bus = bus.ok_or(Error::MissingTable("bus"))?;
    case.gen = gen.ok_or(Error::MissingTable("gen"))?;
    case.branch = branch.ok_or(Error::MissingTable("branch"))?;
    case.gencost = gencost;

    check_widths("bus", &case.bus, BUS_MIN_COLS)?;
    check_widths("gen", &case.gen, GEN_MIN_COLS)?;
    check_widths("branch", &case.branch, BRANCH_MIN_COLS)?;
    if let Some(rows) = &case.gencost {
        check_widths("gencost", rows, GENCOST_MIN_COLS)?;
    }

    let mut seen = HashSet::new();
    for row in &case.bus {
        let id = row.values[0];
        if !seen.insert(id.to_bits()) {
            return Err(Error::Parse {
                line: row.line,
                msg: format!("duplicate bus id {id}"),
            });
        }
    }
    Ok(case)
}

/// One numeric row together with its 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: usize,
    pub values: Vec<f64>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(p) => &line[..p],
        None => line,
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" | "+Inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

/// Read a `[ ... ];` block starting on line `start` whose text after `=` is
/// `first`. Returns the rows and the index of the line after the block.
fn read_matrix(lines: &[&str], start: usize, first: &str) -> Result<(Vec<Row>, usize)> {
    let mut rows = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    let mut current_line = start + 1;
    let mut text = first.trim_start_matches('[').to_string();
    let mut i = start;
    loop {
        let (body, closed) = match text.find(']') {
            Some(p) => (&text[..p], true),
            None => (text.as_str(), false),
        };
        for (k, piece) in body.split(';').enumerate() {
            if k > 0 && !current.is_empty() {
                rows.push(Row {
                    line: current_line,
                    values: std::mem::take(&mut current),
                });
            }
            for tok in piece.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                if current.is_empty() {
                    current_line = i + 1;
                }
                let v = parse_number(tok).ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: format!("malformed matrix entry {tok:?}"),
                })?;
                current.push(v);
            }
        }
        // A newline also terminates a row.
        if !current.is_empty() {
            rows.push(Row {
                line: current_line,
                values: std::mem::take(&mut current),
            });
        }
        if closed {
            return Ok((rows, i + 1));
        }
        i += 1;
        if i >= lines.len() {
            return Err(Error::Parse {
                line: start + 1,
                msg: "matrix is never closed with ']'".into(),
            });
        }
        text = strip_comment(lines[i]).to_string();
    }
}

fn check_widths(table: &str, rows: &[Row], min: usize) -> Result<()> {
    let Some(first) = rows.first() else {
        return Ok(());
    };
    let width = first.values.len();
    for row in rows {
        if row.values.len() < min {
            return Err(Error::Parse {
                line: row.line,
                msg: format!(
                    "{table} row has {} columns, at least {min} required",
                    row.values.len()
                ),
            });
        }
        if table != "gencost" && row.values.len() != width {
            return Err(Error::Parse {
                line: row.line,
                msg: format!("{table} row has {} columns, expected {width}", row.values.len()),
            });
        }
    }
    Ok(())
}
