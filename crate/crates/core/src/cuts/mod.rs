//! Live cut registry: top-p selection, parallel-cut rejection, aging.

mod archive;

use std::collections::HashSet;

pub use archive::{data_hash, load_archive, save_archive, ArchivedCut, CutArchive};

use crate::error::{Error, Result};
use crate::lp::ConstrId;
use crate::relaxation::{RelaxationModel, Role, SolutionPoint};
use crate::separation::{separate, CutFamily, LinearCut, Tolerances, Violations};

#[derive(Debug, Clone, PartialEq)]
pub struct ManagedCut {
    pub cut: LinearCut,
    /// Backend row while live.
    pub id: Option<ConstrId>,
    pub round_added: usize,
    /// Consecutive rounds with slack above the family tolerance.
    pub age: usize,
    pub last_slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutParams {
    pub eps_par: f64,
    pub max_age: usize,
    pub tol: Tolerances,
    /// Top fractions in (0, 1] per family: jabr, i2, limit.
    pub top: [f64; 3],
}

impl Default for CutParams {
    fn default() -> Self {
        Self {
            eps_par: 1e-2,
            max_age: 5,
            tol: Tolerances::default(),
            top: [0.15; 3],
        }
    }
}

fn family_slot(f: CutFamily) -> usize {
    match f {
        CutFamily::Jabr => 0,
        CutFamily::I2 => 1,
        CutFamily::Limit => 2,
    }
}

/// Per-family counters for one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FamilyCounts(pub [usize; 3]);

impl FamilyCounts {
    pub fn get(&self, f: CutFamily) -> usize {
        self.0[family_slot(f)]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Cosine of the angle between two cut normals over the union of their
/// roles. Cuts on different branches share no variables.
pub fn cosine(c: &LinearCut, d: &LinearCut) -> f64 {
    let norm = |x: &LinearCut| x.terms.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
    if c.branch != d.branch {
        return 0.0;
    }
    let dot: f64 = Role::ALL.iter().map(|&r| c.coefficient(r) * d.coefficient(r)).sum();
    dot / (norm(c) * norm(d))
}

pub fn is_parallel(c: &LinearCut, d: &LinearCut, eps_par: f64) -> bool {
    cosine(c, d) > 1.0 - eps_par
}

/// Number of list entries the top fraction `p` selects.
pub fn top_count(p: f64, len: usize) -> usize {
    ((p * len as f64) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Default)]
pub struct CutManager {
    pub params: CutParams,
    live: Vec<ManagedCut>,
    dormant: Vec<ManagedCut>,
    /// Branches whose jabr and i2 cuts are never added.
    suppressed: HashSet<usize>,
}

impl CutManager {
    pub fn new(params: CutParams) -> Self {
        Self {
            params,
            ..Self::default()
        }
    }

    pub fn live(&self) -> &[ManagedCut] {
        &self.live
    }

    pub fn dormant(&self) -> &[ManagedCut] {
        &self.dormant
    }

    pub fn suppress_branch(&mut self, l: usize) {
        self.suppressed.insert(l);
    }

    pub fn is_suppressed(&self, cut: &LinearCut) -> bool {
        cut.family != CutFamily::Limit && self.suppressed.contains(&cut.branch)
    }

    /// Remove suppressed branches from the jabr and i2 lists so they neither
    /// take selection slots nor block convergence.
    pub fn drop_suppressed(&self, viol: &mut Violations) {
        if self.suppressed.is_empty() {
            return;
        }
        viol.jabr.retain(|v| !self.suppressed.contains(&v.branch));
        viol.i2.retain(|v| !self.suppressed.contains(&v.branch));
    }

    fn push_live(&mut self, model: &mut RelaxationModel, cut: LinearCut, round: usize) -> Result<()> {
        let terms: Vec<_> = cut.terms.iter().map(|&(r, a)| (model.var(cut.branch, r), a)).collect();
        let id = model.add_row(&terms, crate::lp::Sense::Le, cut.rhs)?;
        self.live.push(ManagedCut {
            cut,
            id: Some(id),
            round_added: round,
            age: 0,
            last_slack: 0.0,
        });
        Ok(())
    }

    /// Separate the top fraction of each violation list and add every
    /// candidate that is not parallel to a live cut of the same family on
    /// the same branch. Returns (computed, added).
    pub fn select_and_add(
        &mut self,
        model: &mut RelaxationModel,
        pt: &SolutionPoint,
        violations: &Violations,
        round: usize,
    ) -> Result<(FamilyCounts, FamilyCounts)> {
        let mut computed = FamilyCounts::default();
        let mut added = FamilyCounts::default();
        for family in CutFamily::ALL {
            let slot = family_slot(family);
            let list = violations.family(family);
            let take = top_count(self.params.top[slot], list.len());
            for viol in list.iter().take(take) {
                let cut = match separate(model.network(), pt, family, viol) {
                    Ok(cut) => cut,
                    Err(e) => {
                        log::warn!("{family} cut on branch {} skipped: {e}", viol.branch);
                        continue;
                    }
                };
                computed.0[slot] += 1;
                if self.is_suppressed(&cut) {
                    continue;
                }
                let parallel = self.live.iter().any(|m| {
                    m.cut.family == family && m.cut.branch == cut.branch && is_parallel(&m.cut, &cut, self.params.eps_par)
                });
                if !parallel {
                    self.push_live(model, cut, round)?;
                    added.0[slot] += 1;
                }
            }
        }
        Ok((computed, added))
    }

    /// Update ages from the slack at `pt` and retire cuts that reached the
    /// maximum age. Returns the number dropped.
    pub fn age_and_expire(&mut self, model: &mut RelaxationModel, pt: &SolutionPoint) -> Result<usize> {
        let slacks: Vec<f64> = self.live.iter().map(|m| m.cut.slack(pt, model.network())).collect();
        let mut keep = Vec::with_capacity(self.live.len());
        let mut dropped = 0;
        for (mut m, slack) in std::mem::take(&mut self.live).into_iter().zip(slacks) {
            m.last_slack = slack;
            if m.last_slack > self.params.tol.family(m.cut.family) {
                m.age += 1;
            } else {
                m.age = 0;
            }
            if m.age >= self.params.max_age {
                model.remove_row(m.id.take().expect("live cut has a row"))?;
                self.dormant.push(m);
                dropped += 1;
            } else {
                keep.push(m);
            }
        }
        self.live = keep;
        Ok(dropped)
    }

    /// Re-instate archived cuts as live rows (suppressed branches skipped).
    pub fn add_archived(&mut self, model: &mut RelaxationModel, cuts: &[ArchivedCut]) -> Result<usize> {
        let mut n = 0;
        for a in cuts {
            if a.cut.branch >= model.network().branches.len() {
                return Err(Error::Archive(format!("cut on unknown branch {}", a.cut.branch)));
            }
            if self.is_suppressed(&a.cut) {
                continue;
            }
            self.push_live(model, a.cut.clone(), 0)?;
            n += 1;
        }
        Ok(n)
    }

    /// Live and dormant cuts for archiving.
    pub fn all_cuts(&self) -> Vec<ArchivedCut> {
        self.live
            .iter()
            .chain(&self.dormant)
            .map(|m| ArchivedCut {
                cut: m.cut.clone(),
                round: m.round_added,
            })
            .collect()
    }
}
