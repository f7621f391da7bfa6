use std::path::Path;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT, ZeroConeT,
};

use super::store::ModelStore;
use super::{lpfile, ConstrId, LpBackend, LpError, Sense, SolveOutcome, SolveStatus, VarId, SOLVER_TOLERANCE};

/// Clarabel interior point solver. The conic form `Ax + s = b` is rebuilt
/// from the stored model on every solve, so `warm` has no effect.
#[derive(Default)]
pub struct ClarabelBackend {
    store: ModelStore,
}

impl ClarabelBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn push(&mut self, terms: impl Iterator<Item = (usize, f64)>, rhs: f64) {
        let r = self.b.len();
        for (j, a) in terms {
            self.i.push(r);
            self.j.push(j);
            self.v.push(a);
        }
        self.b.push(rhs);
    }
}

impl LpBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn supports_quadratic(&self) -> bool {
        true
    }

    fn add_variable(&mut self, lb: f64, ub: f64, linear_cost: f64, quad_cost: f64) -> Result<VarId, LpError> {
        self.store.add_column(lb, ub, linear_cost, quad_cost)
    }

    fn set_variable_bounds(&mut self, var: VarId, lb: f64, ub: f64) -> Result<(), LpError> {
        self.store.set_bounds(var, lb, ub)
    }

    fn add_linear_constraint(&mut self, terms: &[(VarId, f64)], sense: Sense, rhs: f64) -> Result<ConstrId, LpError> {
        let merged = self.store.normalize_terms(terms, rhs)?;
        Ok(self.store.add_constraint(merged, sense, rhs))
    }

    fn remove_constraint(&mut self, id: ConstrId) -> Result<(), LpError> {
        self.store.remove(id).map(|_| ())
    }

    fn set_objective_offset(&mut self, offset: f64) {
        self.store.offset = offset;
    }

    fn solve(&mut self, _warm: bool) -> Result<SolveOutcome, LpError> {
        let started = Instant::now();
        let failed = |status| SolveOutcome {
            status,
            objective: f64::NAN,
            primal: None,
            solve_time: started.elapsed().as_secs_f64(),
            iterations: 0,
        };
        if self.store.has_violated_empty_row() {
            return Ok(failed(SolveStatus::Infeasible));
        }
        let n = self.store.columns.len();
        if n == 0 {
            return Ok(SolveOutcome {
                status: SolveStatus::Optimal,
                objective: self.store.offset,
                primal: Some(Vec::new()),
                solve_time: 0.0,
                iterations: 0,
            });
        }

        let mut eq = Rows { i: vec![], j: vec![], v: vec![], b: vec![] };
        let mut ineq = Rows { i: vec![], j: vec![], v: vec![], b: vec![] };
        for (_, c) in self.store.live_constraints() {
            if c.terms.is_empty() {
                continue;
            }
            let terms = c.terms.iter().copied();
            match c.sense {
                Sense::Eq => eq.push(terms, c.rhs),
                Sense::Le => ineq.push(terms, c.rhs),
                Sense::Ge => ineq.push(terms.map(|(j, a)| (j, -a)), -c.rhs),
            }
        }
        for (j, col) in self.store.columns.iter().enumerate() {
            if col.lb == col.ub {
                eq.push(std::iter::once((j, 1.0)), col.lb);
                continue;
            }
            if col.ub.is_finite() {
                ineq.push(std::iter::once((j, 1.0)), col.ub);
            }
            if col.lb.is_finite() {
                ineq.push(std::iter::once((j, -1.0)), -col.lb);
            }
        }

        let m_eq = eq.b.len();
        let m = m_eq + ineq.b.len();
        let mut ai = eq.i;
        ai.extend(ineq.i.iter().map(|r| r + m_eq));
        let mut aj = eq.j;
        aj.extend(ineq.j);
        let mut av = eq.v;
        av.extend(ineq.v);
        let mut b = eq.b;
        b.extend(ineq.b);
        let a = CscMatrix::new_from_triplets(m, n, ai, aj, av);

        let (mut pi, mut pv) = (Vec::new(), Vec::new());
        for (j, col) in self.store.columns.iter().enumerate() {
            if col.quad > 0.0 {
                pi.push(j);
                pv.push(2.0 * col.quad);
            }
        }
        let p = CscMatrix::new_from_triplets(n, n, pi.clone(), pi, pv);
        let q: Vec<f64> = self.store.columns.iter().map(|c| c.cost).collect();

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if m_eq > 0 {
            cones.push(ZeroConeT(m_eq));
        }
        if m > m_eq {
            cones.push(NonnegativeConeT(m - m_eq));
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(SOLVER_TOLERANCE * 1e-2)
            .build()
            .map_err(|e| LpError::Backend(format!("clarabel settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| LpError::Backend(format!("clarabel setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
            _ => SolveStatus::NumericFailure,
        };
        let iterations = sol.iterations as u64;
        if status != SolveStatus::Optimal {
            return Ok(SolveOutcome { iterations, ..failed(status) });
        }
        Ok(SolveOutcome {
            status,
            objective: sol.obj_val + self.store.offset,
            primal: Some(sol.x.clone()),
            solve_time: started.elapsed().as_secs_f64(),
            iterations,
        })
    }

    fn num_variables(&self) -> usize {
        self.store.columns.len()
    }

    fn num_constraints(&self) -> usize {
        self.store.live
    }

    fn write_lp(&self, path: &Path) -> Result<(), LpError> {
        lpfile::write_lp(&self.store, "cutplane model (clarabel)", path)
    }
}
