//! MATPOWER case files: parsing, per-unit conversion, load perturbation and
//! writing.

mod parse;
mod perturb;
mod write;

use std::collections::HashMap;
use std::path::Path;

pub use parse::{parse_matpower, Row};
pub use perturb::{perturb_loads, PerturbationSpec};
pub use write::{format_matpower, write_network};

use crate::error::{Error, Result};
use crate::grid::{Branch, Bus, Generator, GeneratorCost, Network};

/// Tables of a case file exactly as written, in MW / MVAr / degrees.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCase {
    pub name: String,
    pub version: String,
    pub base_mva: f64,
    pub bus: Vec<Row>,
    pub gen: Vec<Row>,
    pub branch: Vec<Row>,
    pub gencost: Option<Vec<Row>>,
}

// Column positions in the MATPOWER format (0-based).
mod col {
    pub const BUS_I: usize = 0;
    pub const BUS_TYPE: usize = 1;
    pub const PD: usize = 2;
    pub const QD: usize = 3;
    pub const GS: usize = 4;
    pub const BS: usize = 5;
    pub const BASE_KV: usize = 9;
    pub const VMAX: usize = 11;
    pub const VMIN: usize = 12;

    pub const GEN_BUS: usize = 0;
    pub const PG: usize = 1;
    pub const QG: usize = 2;
    pub const QMAX: usize = 3;
    pub const QMIN: usize = 4;
    pub const VG: usize = 5;
    pub const GEN_STATUS: usize = 7;
    pub const PMAX: usize = 8;
    pub const PMIN: usize = 9;

    pub const F_BUS: usize = 0;
    pub const T_BUS: usize = 1;
    pub const BR_R: usize = 2;
    pub const BR_X: usize = 3;
    pub const BR_B: usize = 4;
    pub const RATE_A: usize = 5;
    pub const TAP: usize = 8;
    pub const SHIFT: usize = 9;
    pub const BR_STATUS: usize = 10;
    pub const ANGMIN: usize = 11;
    pub const ANGMAX: usize = 12;
}

impl RawCase {
    /// Convert to the per-unit network.
    ///
    /// Out-of-service branches and generators are dropped, `ratio = 0` becomes
    /// a unit tap, `rateA = 0` becomes an infinite limit, and bus ids are
    /// compacted to row order.
    pub fn to_network(&self) -> Result<Network> {
        let base = self.base_mva;
        let mut index_of = HashMap::with_capacity(self.bus.len());
        let mut buses = Vec::with_capacity(self.bus.len());
        for (i, row) in self.bus.iter().enumerate() {
            let v = &row.values;
            let id = v[col::BUS_I] as i64;
            index_of.insert(id, i);
            buses.push(Bus {
                index: i,
                external_id: id,
                kind: v[col::BUS_TYPE] as u8,
                pd: v[col::PD] / base,
                qd: v[col::QD] / base,
                gs: v[col::GS] / base,
                bs: v[col::BS] / base,
                vmin: v[col::VMIN],
                vmax: v[col::VMAX],
                base_kv: v[col::BASE_KV],
            });
        }
        let lookup = |id: f64, line: usize| -> Result<usize> {
            index_of.get(&(id as i64)).copied().ok_or_else(|| {
                Error::InvalidData(format!("line {line}: reference to unknown bus {id}"))
            })
        };

        let mut branches = Vec::with_capacity(self.branch.len());
        for row in &self.branch {
            let v = &row.values;
            if v[col::BR_STATUS] <= 0.0 {
                continue;
            }
            let from = lookup(v[col::F_BUS], row.line)?;
            let to = lookup(v[col::T_BUS], row.line)?;
            let tap = if v[col::TAP] == 0.0 { 1.0 } else { v[col::TAP] };
            let rate_a = v[col::RATE_A];
            branches.push(Branch {
                from,
                to,
                r: v[col::BR_R],
                x: v[col::BR_X],
                b_charging: v[col::BR_B],
                g_shunt: 0.0,
                tap,
                shift: v[col::SHIFT].to_radians(),
                rate: if rate_a == 0.0 { f64::INFINITY } else { rate_a / base },
                angmin: v.get(col::ANGMIN).copied().unwrap_or(-360.0).to_radians(),
                angmax: v.get(col::ANGMAX).copied().unwrap_or(360.0).to_radians(),
            });
        }

        let mut generators = Vec::with_capacity(self.gen.len());
        for (g, row) in self.gen.iter().enumerate() {
            let v = &row.values;
            if v[col::GEN_STATUS] <= 0.0 {
                continue;
            }
            let cost = match &self.gencost {
                Some(rows) => match rows.get(g) {
                    Some(cost_row) => parse_cost(cost_row)?,
                    None => {
                        return Err(Error::InvalidData(format!(
                            "generator on line {} has no gencost row",
                            row.line
                        )))
                    }
                },
                None => GeneratorCost::zero(),
            };
            generators.push(Generator {
                bus: lookup(v[col::GEN_BUS], row.line)?,
                pmin: v[col::PMIN] / base,
                pmax: v[col::PMAX] / base,
                qmin: v[col::QMIN] / base,
                qmax: v[col::QMAX] / base,
                cost,
                pg0: v[col::PG] / base,
                qg0: v[col::QG] / base,
                vg: v[col::VG],
            });
        }

        Network::new(self.name.clone(), base, buses, branches, generators)
    }
}

fn parse_cost(row: &Row) -> Result<GeneratorCost> {
    let v = &row.values;
    let model = v[0] as i64;
    let n = v[3] as usize;
    let coeffs = &v[4..];
    let bad = |msg: String| Error::Parse {
        line: row.line,
        msg,
    };
    match model {
        1 => {
            if coeffs.len() < 2 * n {
                return Err(bad(format!("piecewise cost declares {n} points but has fewer values")));
            }
            let points = (0..n).map(|i| (coeffs[2 * i], coeffs[2 * i + 1])).collect();
            Ok(GeneratorCost::PiecewiseLinear { points })
        }
        2 => {
            if coeffs.len() < n {
                return Err(bad(format!("polynomial cost declares {n} coefficients but has fewer")));
            }
            // Highest degree first.
            let c = &coeffs[..n];
            if n > 3 && c[..n - 3].iter().any(|&x| x != 0.0) {
                return Err(bad("polynomial costs above degree 2 are not supported".into()));
            }
            let at = |deg: usize| if deg < n { c[n - 1 - deg] } else { 0.0 };
            Ok(GeneratorCost::Quadratic {
                c2: at(2),
                c1: at(1),
                c0: at(0),
            })
        }
        _ => Err(bad(format!("unknown cost model {model}"))),
    }
}

/// Read and convert a case file in one step.
pub fn load_case(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw = parse_matpower(&text)?;
    if raw.name.is_empty() {
        raw.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    raw.to_network()
}
