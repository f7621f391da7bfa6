//! Abstract linear / convex-quadratic programming engine with incremental
//! constraint addition and removal.
//!
//! Two adapters are compiled in: [`HighsBackend`] (dual simplex, reuses the
//! previous basis on warm solves, native convex QP) and [`ClarabelBackend`]
//! (interior point, rebuilds the problem on every solve). [`backend_from_env`]
//! picks one by the `CUTPLANE_BACKEND` environment variable.

mod clarabel_backend;
mod highs_backend;
mod lpfile;
mod store;

use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use clarabel_backend::ClarabelBackend;
pub use highs_backend::HighsBackend;

/// Absolute primal/dual feasibility tolerance requested from every engine.
pub const SOLVER_TOLERANCE: f64 = 1e-6;

/// Dense handle of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle of a constraint. Never reused, invalid after removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstrId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::NumericFailure => "numeric-failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Objective including the constant offset. NaN unless optimal.
    pub objective: f64,
    /// Column values indexed by [`VarId::index`]; present iff optimal.
    pub primal: Option<Vec<f64>>,
    pub solve_time: f64,
    pub iterations: u64,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> Option<f64> {
        self.primal.as_ref().map(|p| p[v.0])
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("variable bounds out of order: {lb} > {ub}")]
    BoundOrder { lb: f64, ub: f64 },
    #[error("negative quadratic cost {0}")]
    NonConvex(f64),
    #[error("backend {0} has no quadratic objective support; use the piecewise-linear objective mode")]
    QuadraticUnsupported(&'static str),
    #[error("unknown variable {0:?}")]
    UnknownVariable(VarId),
    #[error("unknown or already removed constraint {0:?}")]
    UnknownConstraint(ConstrId),
    #[error("non-finite coefficient in constraint")]
    NonFinite,
    #[error("unknown backend {0:?} (expected \"highs\" or \"clarabel\")")]
    UnknownBackend(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("{0}")]
    Io(String),
}

/// Engine interface used by the relaxation. A model is single-owner: callers
/// serialize all mutation and solves.
pub trait LpBackend: Send {
    fn name(&self) -> &'static str;

    fn supports_quadratic(&self) -> bool;

    /// Register a variable contributing `quad_cost * x^2 + linear_cost * x`.
    fn add_variable(
        &mut self,
        lb: f64,
        ub: f64,
        linear_cost: f64,
        quad_cost: f64,
    ) -> Result<VarId, LpError>;

    fn set_variable_bounds(&mut self, var: VarId, lb: f64, ub: f64) -> Result<(), LpError>;

    /// Add `sum(coeff * var) sense rhs`. Repeated variables are summed.
    fn add_linear_constraint(
        &mut self,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstrId, LpError>;

    fn remove_constraint(&mut self, id: ConstrId) -> Result<(), LpError>;

    /// Constant added to every reported objective.
    fn set_objective_offset(&mut self, offset: f64);

    /// Solve the current model. With `warm` the engine may reuse state from
    /// the previous solve; status and objective must not depend on it.
    fn solve(&mut self, warm: bool) -> Result<SolveOutcome, LpError>;

    fn num_variables(&self) -> usize;

    fn num_constraints(&self) -> usize;

    /// Dump the current model in CPLEX LP file syntax.
    fn write_lp(&self, path: &Path) -> Result<(), LpError>;
}

/// Engine used when `CUTPLANE_BACKEND` is unset. The HiGHS active-set QP
/// solver can cycle on the degenerate base models, so the conic engine is
/// the default.
pub const DEFAULT_BACKEND: &str = "clarabel";

/// Engine named by `CUTPLANE_BACKEND`, or [`DEFAULT_BACKEND`].
pub fn backend_from_env() -> Result<Box<dyn LpBackend>, LpError> {
    match std::env::var("CUTPLANE_BACKEND") {
        Ok(name) => backend_by_name(&name),
        Err(_) => backend_by_name(DEFAULT_BACKEND),
    }
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn LpBackend>, LpError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(HighsBackend::new()?)),
        "" | "clarabel" => Ok(Box::new(ClarabelBackend::new())),
        other => Err(LpError::UnknownBackend(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backends() -> Vec<Box<dyn LpBackend>> {
        vec![Box::new(HighsBackend::new().unwrap()), Box::new(ClarabelBackend::new())]
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn bounded_min() {
        for mut lp in backends() {
            let x = lp.add_variable(1.0, 3.0, 1.0, 0.0).unwrap();
            let out = lp.solve(false).unwrap();
            assert_eq!(out.status, SolveStatus::Optimal, "{}", lp.name());
            assert!(close(out.objective, 1.0, 1e-7), "{}: {}", lp.name(), out.objective);
            assert!(close(out.value(x).unwrap(), 1.0, 1e-7));
        }
    }

    #[test]
    fn variable_validation() {
        for mut lp in backends() {
            assert_eq!(
                lp.add_variable(1.0, 0.0, 0.0, 0.0),
                Err(LpError::BoundOrder { lb: 1.0, ub: 0.0 })
            );
            assert!(lp.add_variable(0.0, 2.0, 10.0, 0.0).is_ok());
            assert!(lp.add_variable(f64::NEG_INFINITY, f64::INFINITY, 0.0, 0.0).is_ok());
            assert_eq!(lp.add_variable(0.0, 1.0, 0.0, -1.0), Err(LpError::NonConvex(-1.0)));
        }
    }

    #[test]
    fn equality_row() {
        for mut lp in backends() {
            let x = lp.add_variable(0.0, 1.0, 1.0, 0.0).unwrap();
            let y = lp.add_variable(0.0, 1.0, 0.0, 0.0).unwrap();
            lp.add_linear_constraint(&[(x, 1.0), (y, 1.0)], Sense::Eq, 1.0).unwrap();
            let out = lp.solve(false).unwrap();
            assert!(close(out.objective, 0.0, 1e-7), "{}", lp.name());
            assert!(close(out.value(y).unwrap(), 1.0, 1e-6));
        }
    }

    #[test]
    fn duplicate_terms_are_summed() {
        for mut lp in backends() {
            let x = lp.add_variable(0.0, 10.0, -1.0, 0.0).unwrap();
            // 0.5x + 0.5x <= 2  ->  x <= 2
            lp.add_linear_constraint(&[(x, 0.5), (x, 0.5)], Sense::Le, 2.0).unwrap();
            let out = lp.solve(false).unwrap();
            assert!(close(out.objective, -2.0, 1e-7), "{}: {}", lp.name(), out.objective);
        }
    }

    #[test]
    fn infeasible_models() {
        for mut lp in backends() {
            let x = lp.add_variable(f64::NEG_INFINITY, f64::INFINITY, 1.0, 0.0).unwrap();
            lp.add_linear_constraint(&[(x, 1.0)], Sense::Le, 0.0).unwrap();
            lp.add_linear_constraint(&[(x, 1.0)], Sense::Ge, 1.0).unwrap();
            assert_eq!(lp.solve(false).unwrap().status, SolveStatus::Infeasible, "{}", lp.name());
        }
        for mut lp in backends() {
            lp.add_variable(0.0, 1.0, 1.0, 0.0).unwrap();
            lp.add_linear_constraint(&[], Sense::Le, -1.0).unwrap();
            assert_eq!(lp.solve(false).unwrap().status, SolveStatus::Infeasible, "{}", lp.name());
        }
    }

    #[test]
    fn unknown_variable_rejected() {
        for mut lp in backends() {
            lp.add_variable(0.0, 1.0, 1.0, 0.0).unwrap();
            assert_eq!(
                lp.add_linear_constraint(&[(VarId(5), 1.0)], Sense::Le, 1.0),
                Err(LpError::UnknownVariable(VarId(5)))
            );
            let x = VarId(0);
            assert_eq!(
                lp.add_linear_constraint(&[(x, f64::NAN)], Sense::Le, 1.0),
                Err(LpError::NonFinite)
            );
        }
    }

    #[test]
    fn add_and_remove_cut() {
        for mut lp in backends() {
            let x = lp.add_variable(0.0, 2.0, 1.0, 0.0).unwrap();
            assert!(close(lp.solve(false).unwrap().objective, 0.0, 1e-7));
            let cut = lp.add_linear_constraint(&[(x, 1.0)], Sense::Ge, 1.0).unwrap();
            assert!(close(lp.solve(true).unwrap().objective, 1.0, 1e-7), "{}", lp.name());
            lp.remove_constraint(cut).unwrap();
            assert_eq!(lp.num_constraints(), 0);
            assert!(close(lp.solve(true).unwrap().objective, 0.0, 1e-7), "{}", lp.name());
            assert_eq!(lp.remove_constraint(cut), Err(LpError::UnknownConstraint(cut)));
        }
    }

    #[test]
    fn redundant_cut_removal() {
        for mut lp in backends() {
            let x = lp.add_variable(0.0, 2.0, 1.0, 0.0).unwrap();
            let a = lp.add_linear_constraint(&[(x, 1.0)], Sense::Ge, 1.0).unwrap();
            lp.add_linear_constraint(&[(x, 1.0)], Sense::Ge, 1.0).unwrap();
            lp.solve(true).unwrap();
            lp.remove_constraint(a).unwrap();
            assert!(close(lp.solve(true).unwrap().objective, 1.0, 1e-7), "{}", lp.name());
        }
    }

    #[test]
    fn warm_and_cold_agree() {
        for make_warm in [true, false] {
            let mut lp = HighsBackend::new().unwrap();
            let xs: Vec<VarId> = (0..6)
                .map(|i| lp.add_variable(-5.0, 5.0, (i as f64) - 2.5, 0.0).unwrap())
                .collect();
            for i in 0..6 {
                let terms: Vec<_> = xs.iter().map(|&v| (v, ((v.0 * 7 + i * 3) % 5) as f64 - 2.0)).collect();
                lp.add_linear_constraint(&terms, Sense::Le, 3.0 + i as f64).unwrap();
            }
            let first = lp.solve(make_warm).unwrap();
            let _cut = lp.add_linear_constraint(&[(xs[0], 1.0), (xs[5], -1.0)], Sense::Le, 1.0).unwrap();
            let warm = lp.solve(true).unwrap();
            let cold = lp.solve(false).unwrap();
            assert_eq!(warm.status, cold.status);
            assert!(close(warm.objective, cold.objective, 1e-9), "{} vs {}", warm.objective, cold.objective);
            assert!(warm.objective >= first.objective - 1e-9);
        }
    }

    #[test]
    fn quadratic_objective() {
        for mut lp in backends() {
            // min (x - 1)^2 = x^2 - 2x + 1 on [0, 3]
            let x = lp.add_variable(0.0, 3.0, -2.0, 1.0).unwrap();
            lp.set_objective_offset(1.0);
            let out = lp.solve(false).unwrap();
            assert!(close(out.objective, 0.0, 1e-6), "{}: {}", lp.name(), out.objective);
            assert!(close(out.value(x).unwrap(), 1.0, 1e-4));
        }
    }

    #[test]
    fn bound_changes_apply() {
        for mut lp in backends() {
            let x = lp.add_variable(0.0, 2.0, 1.0, 0.0).unwrap();
            lp.solve(true).unwrap();
            lp.set_variable_bounds(x, 0.5, 2.0).unwrap();
            assert!(close(lp.solve(true).unwrap().objective, 0.5, 1e-7), "{}", lp.name());
        }
    }

    #[test]
    fn lp_file_dump() {
        let dir = tempfile::tempdir().unwrap();
        let mut lp = HighsBackend::new().unwrap();
        let x = lp.add_variable(0.0, 2.0, 1.0, 0.5).unwrap();
        let y = lp.add_variable(f64::NEG_INFINITY, f64::INFINITY, 0.0, 0.0).unwrap();
        lp.add_linear_constraint(&[(x, 1.0), (y, -2.0)], Sense::Ge, 1.0).unwrap();
        let path = dir.path().join("m.lp");
        lp.write_lp(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("\\ "));
        assert!(text.contains("Minimize"));
        assert!(text.contains("x0 - 2 x1 >= 1"), "{text}");
        assert!(text.contains("x1 free"));
        assert!(text.contains("[ 1 x0 ^ 2 ] / 2"), "{text}");
    }

    #[test]
    fn backend_selection() {
        assert_eq!(backend_by_name("clarabel").unwrap().name(), "clarabel");
        assert_eq!(backend_by_name("HiGHS").unwrap().name(), "highs");
        assert!(matches!(backend_by_name("gurobi"), Err(LpError::UnknownBackend(_))));
    }
}
