//! Text cut archive.
//!
//! ```text
//! cutarchive v1 <nbus> <nbranch> <data-hash>
//! <family> <branch-index> <role:coeff>... rhs=<value> round=<n>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GeneratorCost, Network};
use crate::relaxation::Role;
use crate::separation::{CutFamily, LinearCut};

#[derive(Debug, Clone, PartialEq)]
pub struct ArchivedCut {
    pub cut: LinearCut,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutArchive {
    pub nbus: usize,
    pub nbranch: usize,
    pub hash: String,
    pub cuts: Vec<ArchivedCut>,
}

/// SHA-256 over the per-unit data, hex encoded.
pub fn data_hash(net: &Network) -> String {
    let mut h = Sha256::new();
    let mut put = |x: f64| h.update(x.to_bits().to_le_bytes());
    put(net.base_mva);
    for b in &net.buses {
        for x in [b.pd, b.qd, b.gs, b.bs, b.vmin, b.vmax] {
            put(x);
        }
    }
    for br in &net.branches {
        for x in [br.from as f64, br.to as f64, br.r, br.x, br.b_charging, br.g_shunt, br.tap, br.shift, br.rate] {
            put(x);
        }
    }
    for g in &net.generators {
        for x in [g.bus as f64, g.pmin, g.pmax, g.qmin, g.qmax] {
            put(x);
        }
        match &g.cost {
            GeneratorCost::Quadratic { c2, c1, c0 } => {
                for x in [*c2, *c1, *c0] {
                    put(x);
                }
            }
            GeneratorCost::PiecewiseLinear { points } => {
                for &(p, f) in points {
                    put(p);
                    put(f);
                }
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl CutArchive {
    pub fn for_network(net: &Network, cuts: Vec<ArchivedCut>) -> Self {
        Self {
            nbus: net.buses.len(),
            nbranch: net.branches.len(),
            hash: data_hash(net),
            cuts,
        }
    }

    /// Topology counts must match; a data hash mismatch (perturbed loads)
    /// is only logged. Returns whether the hash matched.
    pub fn check_compatible(&self, net: &Network) -> Result<bool> {
        if self.nbus != net.buses.len() || self.nbranch != net.branches.len() {
            return Err(Error::TopologyMismatch {
                archive_buses: self.nbus,
                archive_branches: self.nbranch,
                buses: net.buses.len(),
                branches: net.branches.len(),
            });
        }
        let same = self.hash == data_hash(net);
        if !same {
            log::warn!("cut archive was built for different case data; re-using cuts anyway");
        }
        Ok(same)
    }

    pub fn format(&self) -> String {
        let mut out = format!("cutarchive v1 {} {} {}\n", self.nbus, self.nbranch, self.hash);
        for a in &self.cuts {
            let _ = write!(out, "{} {}", a.cut.family, a.cut.branch);
            for (r, c) in &a.cut.terms {
                let _ = write!(out, " {r}:{c:.16e}");
            }
            let _ = writeln!(out, " rhs={:.16e} round={}", a.cut.rhs, a.round);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Archive("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        match fields.as_slice() {
            ["cutarchive", "v1", nbus, nbranch, hash] => {
                let count = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| Error::Archive(format!("bad count {s:?} in header")))
                };
                let mut archive = CutArchive {
                    nbus: count(nbus)?,
                    nbranch: count(nbranch)?,
                    hash: hash.to_string(),
                    cuts: Vec::new(),
                };
                for (i, line) in lines {
                    archive.cuts.push(parse_cut(line).map_err(|e| Error::Archive(format!("line {}: {e}", i + 1)))?);
                }
                Ok(archive)
            }
            ["cutarchive", version, ..] => Err(Error::Archive(format!("unsupported version {version}"))),
            _ => Err(Error::Archive("missing cutarchive header".into())),
        }
    }
}

fn parse_cut(line: &str) -> std::result::Result<ArchivedCut, String> {
    let mut it = line.split_whitespace();
    let family: CutFamily = it.next().ok_or("missing family")?.parse().map_err(|e: Error| e.to_string())?;
    let branch: usize = it
        .next()
        .ok_or("missing branch")?
        .parse()
        .map_err(|_| "bad branch index".to_string())?;
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
    let mut terms = Vec::new();
    let mut rhs = None;
    let mut round = None;
    for tok in it {
        if let Some(v) = tok.strip_prefix("rhs=") {
            rhs = Some(num(v)?);
        } else if let Some(v) = tok.strip_prefix("round=") {
            round = Some(v.parse::<usize>().map_err(|_| format!("bad round {v:?}"))?);
        } else {
            let (r, v) = tok.split_once(':').ok_or_else(|| format!("bad term {tok:?}"))?;
            let role: Role = r.parse().map_err(|e: Error| e.to_string())?;
            terms.push((role, num(v)?));
        }
    }
    if terms.is_empty() {
        return Err("cut without terms".into());
    }
    Ok(ArchivedCut {
        cut: LinearCut {
            family,
            branch,
            terms,
            rhs: rhs.ok_or("missing rhs")?,
            violation: 0.0,
        },
        round: round.ok_or("missing round")?,
    })
}

pub fn save_archive(path: impl AsRef<Path>, archive: &CutArchive) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, archive.format()).map_err(|e| Error::io(path, e))
}

pub fn load_archive(path: impl AsRef<Path>) -> Result<CutArchive> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CutArchive::parse(&text)
}
