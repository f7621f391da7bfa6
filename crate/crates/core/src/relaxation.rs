//! The base model M0: every ACOPF constraint that is linear in the lifted
//! variables `(v^2, c, s, i^2, P, Q, Pg, Qg)`, with the rotated cones left out.
//! Cones enter later only through cuts.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{branch_admittance, BranchAdmittance, GeneratorCost, Network};
use crate::lp::{ConstrId, LpBackend, Sense, SolveOutcome, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Native convex quadratic costs.
    Quadratic,
    /// Secant over-estimate of each quadratic cost. Reports are flagged
    /// approximate.
    PiecewiseLinear,
}

impl fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveMode::Quadratic => "qp",
            ObjectiveMode::PiecewiseLinear => "pwl",
        })
    }
}

impl FromStr for ObjectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qp" => Ok(ObjectiveMode::Quadratic),
            "pwl" => Ok(ObjectiveMode::PiecewiseLinear),
            other => Err(Error::Param(format!("objective mode {other:?} (expected qp or pwl)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub objective: ObjectiveMode,
    pub pwl_segments: usize,
    /// Static `P_km + P_mk >= 0` rows on branches with non-negative
    /// self-conductances.
    pub loss_rows: bool,
    /// Drop the `c >= 0` bound (needed when angle differences may exceed 90 degrees).
    pub free_c_lower_bound: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            objective: ObjectiveMode::Quadratic,
            pwl_segments: 32,
            loss_rows: true,
            free_c_lower_bound: false,
        }
    }
}

/// Variable roles of a branch, as they appear in cut records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    C,
    S,
    Vk2,
    Vm2,
    I2,
    Pkm,
    Qkm,
    Pmk,
    Qmk,
}

impl Role {
    pub const ALL: [Role; 9] = [
        Role::C,
        Role::S,
        Role::Vk2,
        Role::Vm2,
        Role::I2,
        Role::Pkm,
        Role::Qkm,
        Role::Pmk,
        Role::Qmk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::C => "c",
            Role::S => "s",
            Role::Vk2 => "vk2",
            Role::Vm2 => "vm2",
            Role::I2 => "i2",
            Role::Pkm => "Pkm",
            Role::Qkm => "Qkm",
            Role::Pmk => "Pmk",
            Role::Qmk => "Qmk",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Param(format!("unknown variable role {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchVars {
    pub c: VarId,
    pub s: VarId,
    pub i2: VarId,
    pub p_km: VarId,
    pub q_km: VarId,
    pub p_mk: VarId,
    pub q_mk: VarId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenVars {
    pub pg: VarId,
    pub qg: VarId,
    /// Epigraph variable when the cost is piecewise linear.
    pub cost: Option<VarId>,
}

/// Values of the lifted variables at one optimum, indexed like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchValues {
    pub c: f64,
    pub s: f64,
    pub i2: f64,
    pub p_km: f64,
    pub q_km: f64,
    pub p_mk: f64,
    pub q_mk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPoint {
    pub objective: f64,
    pub round: usize,
    pub v2: Vec<f64>,
    pub branches: Vec<BranchValues>,
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
}

impl SolutionPoint {
    /// `(v_k^2, v_m^2)` of branch `l`.
    pub fn end_voltages(&self, net: &Network, l: usize) -> (f64, f64) {
        let br = &net.branches[l];
        (self.v2[br.from], self.v2[br.to])
    }

    pub fn role_value(&self, net: &Network, l: usize, role: Role) -> f64 {
        let b = &self.branches[l];
        match role {
            Role::C => b.c,
            Role::S => b.s,
            Role::Vk2 => self.v2[net.branches[l].from],
            Role::Vm2 => self.v2[net.branches[l].to],
            Role::I2 => b.i2,
            Role::Pkm => b.p_km,
            Role::Qkm => b.q_km,
            Role::Pmk => b.p_mk,
            Role::Qmk => b.q_mk,
        }
    }
}

/// Secant pieces `(slope, intercept)` over `[pmin, pmax]` in per-unit
/// power, for a quadratic cost. The maximum of the pieces is the chord
/// interpolant of the cost at equally spaced breakpoints.
pub fn pwl_objective(cost: &GeneratorCost, base_mva: f64, pmin: f64, pmax: f64, segments: usize) -> Vec<(f64, f64)> {
    assert!(segments >= 1, "at least one segment");
    match cost {
        GeneratorCost::PiecewiseLinear { points } => points
            .windows(2)
            .map(|w| {
                let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                (slope * base_mva, w[0].1 - slope * w[0].0)
            })
            .collect(),
        GeneratorCost::Quadratic { .. } => {
            let (c2, c1, c0) = cost.per_unit_polynomial(base_mva).expect("quadratic");
            let f = |p: f64| c2 * p * p + c1 * p + c0;
            if c2 == 0.0 || pmax <= pmin {
                let slope = if pmax > pmin { c1 + c2 * (pmin + pmax) } else { c1 + 2.0 * c2 * pmin };
                return vec![(slope, f(pmin) - slope * pmin)];
            }
            let h = (pmax - pmin) / segments as f64;
            (0..segments)
                .map(|i| {
                    let p0 = pmin + h * i as f64;
                    let p1 = if i + 1 == segments { pmax } else { p0 + h };
                    let slope = (f(p1) - f(p0)) / (p1 - p0);
                    (slope, f(p0) - slope * p0)
                })
                .collect()
        }
    }
}

pub struct RelaxationModel {
    backend: Box<dyn LpBackend>,
    net: Network,
    options: BuildOptions,
    admittance: Vec<BranchAdmittance>,
    v2: Vec<VarId>,
    branches: Vec<BranchVars>,
    gens: Vec<GenVars>,
    loss_rows: Vec<Option<ConstrId>>,
    base_constraints: usize,
    approximate: bool,
    last: Option<SolveOutcome>,
}

impl fmt::Debug for RelaxationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RelaxationModel")
            .field("backend", &self.backend.name())
            .field("case", &self.net.name)
            .field("variables", &self.backend.num_variables())
            .field("constraints", &self.backend.num_constraints())
            .finish()
    }
}

/// Build M0 on the given engine.
pub fn build_base_model(net: &Network, opts: BuildOptions, mut lp: Box<dyn LpBackend>) -> Result<RelaxationModel> {
    if opts.pwl_segments == 0 {
        return Err(Error::Param("pwl segments must be at least 1".into()));
    }
    let inf = f64::INFINITY;
    let v2: Vec<VarId> = net
        .buses
        .iter()
        .map(|b| lp.add_variable(b.vmin * b.vmin, b.vmax * b.vmax, 0.0, 0.0))
        .collect::<std::result::Result<_, _>>()?;

    let mut offset = 0.0;
    let mut approximate = false;
    let mut gens = Vec::with_capacity(net.generators.len());
    let mut epigraph_rows = Vec::new();
    for g in &net.generators {
        let qg = lp.add_variable(g.qmin, g.qmax, 0.0, 0.0)?;
        let native = match (&g.cost, opts.objective) {
            (GeneratorCost::Quadratic { c2, .. }, ObjectiveMode::PiecewiseLinear) if *c2 > 0.0 => None,
            (GeneratorCost::Quadratic { .. }, _) => g.cost.per_unit_polynomial(net.base_mva),
            (GeneratorCost::PiecewiseLinear { .. }, _) => None,
        };
        match native {
            Some((c2, c1, c0)) => {
                let pg = lp.add_variable(g.pmin, g.pmax, c1, c2)?;
                offset += c0;
                gens.push(GenVars { pg, qg, cost: None });
            }
            None => {
                if matches!(g.cost, GeneratorCost::Quadratic { .. }) {
                    approximate = true;
                }
                let pg = lp.add_variable(g.pmin, g.pmax, 0.0, 0.0)?;
                let t = lp.add_variable(-inf, inf, 1.0, 0.0)?;
                for (slope, intercept) in pwl_objective(&g.cost, net.base_mva, g.pmin, g.pmax, opts.pwl_segments) {
                    epigraph_rows.push((t, pg, slope, intercept));
                }
                gens.push(GenVars { pg, qg, cost: Some(t) });
            }
        }
    }
    lp.set_objective_offset(offset);

    let admittance: Vec<BranchAdmittance> = net.branches.iter().map(branch_admittance).collect();
    let mut branches = Vec::with_capacity(net.branches.len());
    for br in &net.branches {
        let (vk, vm) = (&net.buses[br.from], &net.buses[br.to]);
        let w = vk.vmax * vm.vmax;
        let c_lb = if opts.free_c_lower_bound { -w } else { 0.0 };
        let c = lp.add_variable(c_lb, w, 0.0, 0.0)?;
        let s = lp.add_variable(-w, w, 0.0, 0.0)?;
        let i2_ub = if br.has_limit() { (br.rate / vk.vmin).powi(2) } else { inf };
        let i2 = lp.add_variable(0.0, i2_ub, 0.0, 0.0)?;
        let u = if br.has_limit() { br.rate } else { inf };
        let mut flow = || lp.add_variable(-u, u, 0.0, 0.0);
        let p_km = flow()?;
        let q_km = flow()?;
        let p_mk = flow()?;
        let q_mk = flow()?;
        branches.push(BranchVars { c, s, i2, p_km, q_km, p_mk, q_mk });
    }

    for (t, pg, slope, intercept) in epigraph_rows {
        lp.add_linear_constraint(&[(t, 1.0), (pg, -slope)], Sense::Ge, intercept)?;
    }

    for (l, br) in net.branches.iter().enumerate() {
        let vars = branches[l];
        let adm = &admittance[l];
        let lifted = [v2[br.from], v2[br.to], vars.c, vars.s];
        let coef = adm.flow_coefficients();
        for (var, row) in [
            (vars.p_km, coef.p_km),
            (vars.q_km, coef.q_km),
            (vars.p_mk, coef.p_mk),
            (vars.q_mk, coef.q_mk),
        ] {
            let mut terms = vec![(var, 1.0)];
            terms.extend(lifted.iter().zip(row).map(|(&v, a)| (v, -a)));
            lp.add_linear_constraint(&terms, Sense::Eq, 0.0)?;
        }
        let i2_row = [adm.alpha, adm.beta, adm.gamma, adm.zeta];
        let mut terms = vec![(vars.i2, 1.0)];
        terms.extend(lifted.iter().zip(i2_row).map(|(&v, a)| (v, -a)));
        lp.add_linear_constraint(&terms, Sense::Eq, 0.0)?;
    }

    for (k, bus) in net.buses.iter().enumerate() {
        let mut p_terms = vec![(v2[k], bus.gs)];
        let mut q_terms = vec![(v2[k], -bus.bs)];
        for &l in net.incident_branches(k) {
            let (p, q) = if net.branches[l].from == k {
                (branches[l].p_km, branches[l].q_km)
            } else {
                (branches[l].p_mk, branches[l].q_mk)
            };
            p_terms.push((p, 1.0));
            q_terms.push((q, 1.0));
        }
        for &g in net.generators_at(k) {
            p_terms.push((gens[g].pg, -1.0));
            q_terms.push((gens[g].qg, -1.0));
        }
        lp.add_linear_constraint(&p_terms, Sense::Eq, -bus.pd)?;
        lp.add_linear_constraint(&q_terms, Sense::Eq, -bus.qd)?;
    }

    let mut loss_rows = vec![None; net.branches.len()];
    if opts.loss_rows {
        for (l, adm) in admittance.iter().enumerate() {
            if adm.has_nonnegative_self_conductance() {
                let id = lp.add_linear_constraint(
                    &[(branches[l].p_km, 1.0), (branches[l].p_mk, 1.0)],
                    Sense::Ge,
                    0.0,
                )?;
                loss_rows[l] = Some(id);
            }
        }
    }

    let base_constraints = lp.num_constraints();
    Ok(RelaxationModel {
        backend: lp,
        net: net.clone(),
        options: opts,
        admittance,
        v2,
        branches,
        gens,
        loss_rows,
        base_constraints,
        approximate,
        last: None,
    })
}

impl RelaxationModel {
    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn options(&self) -> BuildOptions {
        self.options
    }

    pub fn admittance(&self, l: usize) -> &BranchAdmittance {
        &self.admittance[l]
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// True when the objective over-estimates a quadratic cost.
    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    pub fn bus_var(&self, k: usize) -> VarId {
        self.v2[k]
    }

    pub fn branch_vars(&self, l: usize) -> &BranchVars {
        &self.branches[l]
    }

    pub fn gen_vars(&self, g: usize) -> &GenVars {
        &self.gens[g]
    }

    pub fn var(&self, l: usize, role: Role) -> VarId {
        let b = &self.branches[l];
        let br = &self.net.branches[l];
        match role {
            Role::C => b.c,
            Role::S => b.s,
            Role::Vk2 => self.v2[br.from],
            Role::Vm2 => self.v2[br.to],
            Role::I2 => b.i2,
            Role::Pkm => b.p_km,
            Role::Qkm => b.q_km,
            Role::Pmk => b.p_mk,
            Role::Qmk => b.q_mk,
        }
    }

    /// Constraints present right after the build (or after [`Self::relax_branch`]).
    pub fn base_constraints(&self) -> usize {
        self.base_constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.backend.num_constraints()
    }

    pub fn num_variables(&self) -> usize {
        self.backend.num_variables()
    }

    pub(crate) fn add_row(&mut self, terms: &[(VarId, f64)], sense: Sense, rhs: f64) -> Result<ConstrId> {
        Ok(self.backend.add_linear_constraint(terms, sense, rhs)?)
    }

    pub(crate) fn remove_row(&mut self, id: ConstrId) -> Result<()> {
        Ok(self.backend.remove_constraint(id)?)
    }

    pub fn solve(&mut self, warm: bool) -> Result<&SolveOutcome> {
        let out = self.backend.solve(warm)?;
        self.last = Some(out);
        Ok(self.last.as_ref().expect("just stored"))
    }

    pub fn last_outcome(&self) -> Option<&SolveOutcome> {
        self.last.as_ref()
    }

    /// Capture the last optimal solve.
    pub fn snapshot(&self, round: usize) -> Result<SolutionPoint> {
        let out = self.last.as_ref().filter(|o| o.is_optimal()).ok_or(Error::NoSolution)?;
        let x = out.primal.as_ref().ok_or(Error::NoSolution)?;
        let val = |v: VarId| x[v.index()];
        Ok(SolutionPoint {
            objective: out.objective,
            round,
            v2: self.v2.iter().map(|&v| val(v)).collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchValues {
                    c: val(b.c),
                    s: val(b.s),
                    i2: val(b.i2),
                    p_km: val(b.p_km),
                    q_km: val(b.q_km),
                    p_mk: val(b.p_mk),
                    q_mk: val(b.q_mk),
                })
                .collect(),
            pg: self.gens.iter().map(|g| val(g.pg)).collect(),
            qg: self.gens.iter().map(|g| val(g.qg)).collect(),
        })
    }

    /// Remove the rows of branch `l` that only restate its cones: the static
    /// loss row and the bounds on `i^2`. Cut suppression is the caller's job.
    pub fn relax_branch(&mut self, l: usize) -> Result<()> {
        if let Some(id) = self.loss_rows[l].take() {
            self.backend.remove_constraint(id)?;
            self.base_constraints -= 1;
        }
        let i2 = self.branches[l].i2;
        self.backend.set_variable_bounds(i2, f64::NEG_INFINITY, f64::INFINITY)?;
        Ok(())
    }

    pub fn write_lp(&self, path: &std::path::Path) -> Result<()> {
        Ok(self.backend.write_lp(path)?)
    }
}
