//! Maximum-distance separating hyperplanes for the rotated cones and the
//! thermal disks.
//!
//! A rotated cone `x^2 + y^2 <= w z` with `w, z >= 0` is the second-order
//! cone `||(2x, 2y, w - z)|| <= w + z`. Projecting a violating point onto it
//! and taking the tangent plane there gives the cut returned by
//! [`rotated_cone_cut`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::Network;
use crate::relaxation::{Role, SolutionPoint};

#[derive(Debug, Error, PartialEq)]
pub enum SeparationError {
    #[error("point is not outside the set (residual {0})")]
    NotViolated(f64),
    #[error("cone apex degenerate: trace {0} is not positive")]
    Apex(f64),
    #[error("branch has no thermal limit")]
    NoLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CutFamily {
    Jabr,
    I2,
    Limit,
}

impl CutFamily {
    pub const ALL: [CutFamily; 3] = [CutFamily::Jabr, CutFamily::I2, CutFamily::Limit];

    pub fn name(self) -> &'static str {
        match self {
            CutFamily::Jabr => "jabr",
            CutFamily::I2 => "i2",
            CutFamily::Limit => "limit",
        }
    }
}

impl fmt::Display for CutFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CutFamily {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        CutFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| crate::Error::Archive(format!("unknown cut family {s:?}")))
    }
}

/// `sum(coeff * role) <= rhs` on one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCut {
    pub family: CutFamily,
    pub branch: usize,
    pub terms: Vec<(Role, f64)>,
    pub rhs: f64,
    /// Raw residual of the generating point.
    pub violation: f64,
}

impl LinearCut {
    pub fn coefficient(&self, role: Role) -> f64 {
        self.terms.iter().filter(|(r, _)| *r == role).map(|(_, a)| a).sum()
    }

    pub fn lhs(&self, pt: &SolutionPoint, net: &Network) -> f64 {
        self.terms.iter().map(|&(r, a)| a * pt.role_value(net, self.branch, r)).sum()
    }

    /// `rhs - lhs`: negative when the point violates the cut.
    pub fn slack(&self, pt: &SolutionPoint, net: &Network) -> f64 {
        self.rhs - self.lhs(pt, net)
    }

    /// Scale to a unit coefficient vector.
    pub fn normalized(mut self) -> Self {
        let norm = self.terms.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
        assert!(norm > 0.0, "cut with zero normal");
        for (_, a) in &mut self.terms {
            *a /= norm;
        }
        self.rhs /= norm;
        self
    }
}

/// Euclidean projection of `(x', s')` onto `{(x, s) : ||x|| <= s}` for a
/// point with `||x'|| > s' > 0`.
pub fn project_to_soc(xprime: &[f64], sprime: f64) -> Result<(Vec<f64>, f64), SeparationError> {
    let norm = xprime.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= sprime {
        return Err(SeparationError::NotViolated(norm - sprime));
    }
    if sprime <= 0.0 {
        return Err(SeparationError::Apex(sprime));
    }
    let s0 = (norm + sprime) / 2.0;
    Ok((xprime.iter().map(|v| s0 * v / norm).collect(), s0))
}

/// Coefficients `[a_x, a_y, a_w, a_z]` of the cut
/// `4x'x + 4y'y + ((w'-z') - n0) w + (-(w'-z') - n0) z <= 0`
/// with `n0 = ||(2x', 2y', w' - z')||`, for `x'^2 + y'^2 > w' z'`.
pub fn rotated_cone_cut(x: f64, y: f64, w: f64, z: f64) -> Result<[f64; 4], SeparationError> {
    let residual = x * x + y * y - w * z;
    if residual <= 0.0 {
        return Err(SeparationError::NotViolated(residual));
    }
    if w + z <= 0.0 {
        return Err(SeparationError::Apex(w + z));
    }
    Ok(envelope_coefficients(x, y, w, z))
}

/// The same coefficients without the violation check. At any point with
/// nonzero `n0` they give a valid inequality for the cone.
pub fn envelope_coefficients(x: f64, y: f64, w: f64, z: f64) -> [f64; 4] {
    let d = w - z;
    let n0 = (4.0 * x * x + 4.0 * y * y + d * d).sqrt();
    debug_assert!(n0 > 0.0);
    [4.0 * x, 4.0 * y, d - n0, -d - n0]
}

fn cone_cut(family: CutFamily, branch: usize, roles: [Role; 4], point: [f64; 4]) -> Result<LinearCut, SeparationError> {
    let [x, y, w, z] = point;
    let coef = rotated_cone_cut(x, y, w, z)?;
    Ok(LinearCut {
        family,
        branch,
        terms: roles.into_iter().zip(coef).collect(),
        rhs: 0.0,
        violation: x * x + y * y - w * z,
    }
    .normalized())
}

/// Cut for `c^2 + s^2 <= v_k^2 v_m^2` at a violating point.
pub fn jabr_cut(branch: usize, c: f64, s: f64, vk2: f64, vm2: f64) -> Result<LinearCut, SeparationError> {
    cone_cut(CutFamily::Jabr, branch, [Role::C, Role::S, Role::Vk2, Role::Vm2], [c, s, vk2, vm2])
}

/// Cut for `P_km^2 + Q_km^2 <= v_k^2 i^2` at a violating point.
pub fn i2_cut(branch: usize, p: f64, q: f64, vk2: f64, i2: f64) -> Result<LinearCut, SeparationError> {
    cone_cut(CutFamily::I2, branch, [Role::Pkm, Role::Qkm, Role::Vk2, Role::I2], [p, q, vk2, i2])
}

/// Which end of the branch a limit cut constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    From,
    To,
}

impl Side {
    pub fn roles(self) -> [Role; 2] {
        match self {
            Side::From => [Role::Pkm, Role::Qkm],
            Side::To => [Role::Pmk, Role::Qmk],
        }
    }
}

/// Tangent `P'P + Q'Q <= U ||(P', Q')||` to the disk of radius `u`.
pub fn limit_cut(branch: usize, side: Side, p: f64, q: f64, u: f64) -> Result<LinearCut, SeparationError> {
    if !u.is_finite() {
        return Err(SeparationError::NoLimit);
    }
    let residual = p * p + q * q - u * u;
    if residual <= 0.0 {
        return Err(SeparationError::NotViolated(residual));
    }
    let norm = p.hypot(q);
    let [rp, rq] = side.roles();
    Ok(LinearCut {
        family: CutFamily::Limit,
        branch,
        terms: vec![(rp, p), (rq, q)],
        rhs: u * norm,
        violation: residual,
    }
    .normalized())
}

/// A violated branch: raw residual and, for limits, the worse side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub branch: usize,
    pub amount: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Violations {
    pub jabr: Vec<Violation>,
    pub i2: Vec<Violation>,
    pub limit: Vec<Violation>,
}

impl Violations {
    pub fn family(&self, f: CutFamily) -> &[Violation] {
        match f {
            CutFamily::Jabr => &self.jabr,
            CutFamily::I2 => &self.i2,
            CutFamily::Limit => &self.limit,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.jabr.is_empty() && self.i2.is_empty() && self.limit.is_empty()
    }

    pub fn total(&self) -> usize {
        self.jabr.len() + self.i2.len() + self.limit.len()
    }

    pub fn max(&self, f: CutFamily) -> f64 {
        self.family(f).first().map_or(0.0, |v| v.amount)
    }
}

/// Per-family tolerances on the raw residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub jabr: f64,
    pub i2: f64,
    pub limit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { jabr: 1e-5, i2: 1e-5, limit: 1e-5 }
    }
}

impl Tolerances {
    pub fn family(&self, f: CutFamily) -> f64 {
        match f {
            CutFamily::Jabr => self.jabr,
            CutFamily::I2 => self.i2,
            CutFamily::Limit => self.limit,
        }
    }
}

fn branch_residuals(net: &Network, pt: &SolutionPoint, l: usize) -> (f64, f64, Option<(f64, Side)>) {
    let b = &pt.branches[l];
    let (vk, vm) = pt.end_voltages(net, l);
    let jabr = b.c * b.c + b.s * b.s - vk * vm;
    let i2 = b.p_km * b.p_km + b.q_km * b.q_km - vk * b.i2;
    let u = net.branches[l].rate;
    let limit = u.is_finite().then(|| {
        let from = b.p_km * b.p_km + b.q_km * b.q_km - u * u;
        let to = b.p_mk * b.p_mk + b.q_mk * b.q_mk - u * u;
        if to > from {
            (to, Side::To)
        } else {
            (from, Side::From)
        }
    });
    (jabr, i2, limit)
}

fn sort_desc(list: &mut [Violation]) {
    list.sort_by(|a, b| b.amount.total_cmp(&a.amount).then(a.branch.cmp(&b.branch)));
}

/// Branches whose residual exceeds the family tolerance, largest first
/// (ties by branch index). `parallel` spreads the scan over the rayon pool;
/// the result does not depend on it.
pub fn find_violations(pt: &SolutionPoint, net: &Network, tol: &Tolerances, parallel: bool) -> Violations {
    let n = net.branches.len();
    let residuals: Vec<_> = if parallel {
        (0..n).into_par_iter().map(|l| branch_residuals(net, pt, l)).collect()
    } else {
        (0..n).map(|l| branch_residuals(net, pt, l)).collect()
    };
    let mut v = Violations::default();
    for (l, (jabr, i2, limit)) in residuals.into_iter().enumerate() {
        if jabr > tol.jabr {
            v.jabr.push(Violation { branch: l, amount: jabr, side: Side::From });
        }
        if i2 > tol.i2 {
            v.i2.push(Violation { branch: l, amount: i2, side: Side::From });
        }
        if let Some((amount, side)) = limit {
            if amount > tol.limit {
                v.limit.push(Violation { branch: l, amount, side });
            }
        }
    }
    sort_desc(&mut v.jabr);
    sort_desc(&mut v.i2);
    sort_desc(&mut v.limit);
    v
}

/// The cut of `family` separating branch `viol.branch` at `pt`.
pub fn separate(net: &Network, pt: &SolutionPoint, family: CutFamily, viol: &Violation) -> Result<LinearCut, SeparationError> {
    let l = viol.branch;
    let b = &pt.branches[l];
    let (vk, vm) = pt.end_voltages(net, l);
    match family {
        CutFamily::Jabr => jabr_cut(l, b.c, b.s, vk, vm),
        CutFamily::I2 => i2_cut(l, b.p_km, b.q_km, vk, b.i2),
        CutFamily::Limit => {
            let (p, q) = match viol.side {
                Side::From => (b.p_km, b.q_km),
                Side::To => (b.p_mk, b.q_mk),
            };
            limit_cut(l, viol.side, p, q, net.branches[l].rate)
        }
    }
}
