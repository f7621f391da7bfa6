use std::ffi::{c_void, CString};
use std::path::Path;
use std::time::Instant;

use highs_sys::*;

use super::store::ModelStore;
use super::{lpfile, ConstrId, LpBackend, LpError, Sense, SolveOutcome, SolveStatus, VarId, SOLVER_TOLERANCE};

/// HiGHS through its C API. Rows are appended in place; removals are
/// batched and applied by a single mask deletion before the next solve, so
/// the simplex basis survives between rounds.
pub struct HighsBackend {
    ptr: *mut c_void,
    store: ModelStore,
    /// HiGHS row index of each constraint id, `None` once removed.
    row_of: Vec<Option<usize>>,
    /// Rows currently present in the engine (including pending deletions).
    engine_rows: usize,
    pending_delete: Vec<usize>,
    hessian_dirty: bool,
}

// The handle is owned exclusively and never shared between threads.
unsafe impl Send for HighsBackend {}

impl Drop for HighsBackend {
    fn drop(&mut self) {
        unsafe { Highs_destroy(self.ptr) }
    }
}

const QP_ITERATION_LIMIT: HighsInt = 200_000;

fn check(status: HighsInt, what: &str) -> Result<(), LpError> {
    if status == kHighsStatusError {
        Err(LpError::Backend(format!("HiGHS {what} failed")))
    } else {
        Ok(())
    }
}

impl HighsBackend {
    pub fn new() -> Result<Self, LpError> {
        let ptr = unsafe { Highs_create() };
        if ptr.is_null() {
            return Err(LpError::Backend("Highs_create returned null".into()));
        }
        let lp = Self {
            ptr,
            store: ModelStore::default(),
            row_of: Vec::new(),
            engine_rows: 0,
            pending_delete: Vec::new(),
            hessian_dirty: false,
        };
        lp.set_bool("output_flag", std::env::var_os("CUTPLANE_SOLVER_LOG").is_some())?;
        lp.set_double("primal_feasibility_tolerance", SOLVER_TOLERANCE)?;
        lp.set_double("dual_feasibility_tolerance", SOLVER_TOLERANCE)?;
        // Turns QP cycling into an iteration-limit status instead of a hang.
        lp.set_int("qp_iteration_limit", QP_ITERATION_LIMIT)?;
        Ok(lp)
    }

    fn set_bool(&self, name: &str, value: bool) -> Result<(), LpError> {
        let key = CString::new(name).expect("option name");
        check(unsafe { Highs_setBoolOptionValue(self.ptr, key.as_ptr(), value as HighsInt) }, name)
    }

    fn set_int(&self, name: &str, value: HighsInt) -> Result<(), LpError> {
        let key = CString::new(name).expect("option name");
        check(unsafe { Highs_setIntOptionValue(self.ptr, key.as_ptr(), value) }, name)
    }

    fn set_double(&self, name: &str, value: f64) -> Result<(), LpError> {
        let key = CString::new(name).expect("option name");
        check(unsafe { Highs_setDoubleOptionValue(self.ptr, key.as_ptr(), value) }, name)
    }

    fn set_string(&self, name: &str, value: &str) -> Result<(), LpError> {
        let key = CString::new(name).expect("option name");
        let val = CString::new(value).expect("option value");
        check(unsafe { Highs_setStringOptionValue(self.ptr, key.as_ptr(), val.as_ptr()) }, name)
    }

    fn int_info(&self, name: &str) -> u64 {
        let key = CString::new(name).expect("info name");
        let mut v: HighsInt = 0;
        let st = unsafe { Highs_getIntInfoValue(self.ptr, key.as_ptr(), &mut v) };
        if st == kHighsStatusOk && v > 0 {
            v as u64
        } else {
            0
        }
    }

    fn flush_deletions(&mut self) -> Result<(), LpError> {
        if self.pending_delete.is_empty() {
            return Ok(());
        }
        let mut mask: Vec<HighsInt> = vec![0; self.engine_rows];
        for &r in &self.pending_delete {
            mask[r] = 1;
        }
        check(unsafe { Highs_deleteRowsByMask(self.ptr, mask.as_mut_ptr()) }, "deleteRowsByMask")?;
        // On return the mask holds the new index of each kept row, -1 otherwise.
        for slot in self.row_of.iter_mut() {
            if let Some(r) = *slot {
                let new = mask[r];
                *slot = if new >= 0 { Some(new as usize) } else { None };
            }
        }
        self.engine_rows -= self.pending_delete.len();
        self.pending_delete.clear();
        Ok(())
    }

    fn pass_hessian(&mut self) -> Result<(), LpError> {
        if !self.hessian_dirty {
            return Ok(());
        }
        let n = self.store.columns.len();
        let mut start = Vec::with_capacity(n);
        let mut index = Vec::new();
        let mut value = Vec::new();
        for (j, col) in self.store.columns.iter().enumerate() {
            start.push(index.len() as HighsInt);
            if col.quad > 0.0 {
                index.push(j as HighsInt);
                value.push(2.0 * col.quad);
            }
        }
        check(
            unsafe {
                Highs_passHessian(
                    self.ptr,
                    n as HighsInt,
                    index.len() as HighsInt,
                    kHighsHessianFormatTriangular,
                    start.as_ptr(),
                    index.as_ptr(),
                    value.as_ptr(),
                )
            },
            "passHessian",
        )?;
        self.hessian_dirty = false;
        Ok(())
    }

    fn run(&mut self) -> Result<HighsInt, LpError> {
        check(unsafe { Highs_run(self.ptr) }, "run").or_else(|e| {
            // An error status still leaves a model status worth mapping.
            let st = unsafe { Highs_getModelStatus(self.ptr) };
            if st == kHighsModelStatusNotset {
                Err(e)
            } else {
                Ok(())
            }
        })?;
        Ok(unsafe { Highs_getModelStatus(self.ptr) })
    }
}

impl LpBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn supports_quadratic(&self) -> bool {
        true
    }

    fn add_variable(&mut self, lb: f64, ub: f64, linear_cost: f64, quad_cost: f64) -> Result<VarId, LpError> {
        let id = self.store.add_column(lb, ub, linear_cost, quad_cost)?;
        let st = unsafe { Highs_addCol(self.ptr, linear_cost, lb, ub, 0, std::ptr::null(), std::ptr::null()) };
        if let Err(e) = check(st, "addCol") {
            self.store.columns.pop();
            return Err(e);
        }
        if quad_cost > 0.0 || self.store.has_quadratic() {
            self.hessian_dirty = true;
        }
        Ok(id)
    }

    fn set_variable_bounds(&mut self, var: VarId, lb: f64, ub: f64) -> Result<(), LpError> {
        self.store.set_bounds(var, lb, ub)?;
        check(unsafe { Highs_changeColBounds(self.ptr, var.0 as HighsInt, lb, ub) }, "changeColBounds")
    }

    fn add_linear_constraint(&mut self, terms: &[(VarId, f64)], sense: Sense, rhs: f64) -> Result<ConstrId, LpError> {
        let merged = self.store.normalize_terms(terms, rhs)?;
        let index: Vec<HighsInt> = merged.iter().map(|&(j, _)| j as HighsInt).collect();
        let value: Vec<f64> = merged.iter().map(|&(_, a)| a).collect();
        let id = self.store.add_constraint(merged, sense, rhs);
        let (lo, hi) = self.store.constraints[id.0].as_ref().expect("just added").bounds();
        check(
            unsafe { Highs_addRow(self.ptr, lo, hi, index.len() as HighsInt, index.as_ptr(), value.as_ptr()) },
            "addRow",
        )?;
        self.row_of.push(Some(self.engine_rows));
        self.engine_rows += 1;
        Ok(id)
    }

    fn remove_constraint(&mut self, id: ConstrId) -> Result<(), LpError> {
        self.store.remove(id)?;
        let row = self.row_of[id.0].take().expect("live constraint has a row");
        self.pending_delete.push(row);
        Ok(())
    }

    fn set_objective_offset(&mut self, offset: f64) {
        self.store.offset = offset;
    }

    #[allow(non_upper_case_globals)]
    fn solve(&mut self, warm: bool) -> Result<SolveOutcome, LpError> {
        let started = Instant::now();
        self.flush_deletions()?;
        self.pass_hessian()?;
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
        if !warm {
            check(unsafe { Highs_clearSolver(self.ptr) }, "clearSolver")?;
        }
        let mut status = self.run()?;
        if status == kHighsModelStatusUnboundedOrInfeasible {
            self.set_string("presolve", "off")?;
            let rerun = self.run();
            self.set_string("presolve", "choose")?;
            status = rerun?;
        }
        let iterations = self.int_info("simplex_iteration_count") + self.int_info("qp_iteration_count");
        let mapped = match status {
            kHighsModelStatusOptimal => SolveStatus::Optimal,
            kHighsModelStatusModelEmpty => {
                return Ok(match self.store.separable_optimum() {
                    Some((objective, x)) => SolveOutcome {
                        status: SolveStatus::Optimal,
                        objective,
                        primal: Some(x),
                        solve_time: started.elapsed().as_secs_f64(),
                        iterations,
                    },
                    None => failed(SolveStatus::Unbounded),
                });
            }
            kHighsModelStatusInfeasible => SolveStatus::Infeasible,
            kHighsModelStatusUnbounded | kHighsModelStatusUnboundedOrInfeasible => SolveStatus::Unbounded,
            kHighsModelStatusTimeLimit | kHighsModelStatusIterationLimit => SolveStatus::IterationLimit,
            _ => SolveStatus::NumericFailure,
        };
        if mapped != SolveStatus::Optimal {
            return Ok(SolveOutcome { iterations, ..failed(mapped) });
        }
        let n = self.store.columns.len();
        let mut x = vec![0.0; n];
        let mut col_dual = vec![0.0; n];
        let mut row_value = vec![0.0; self.engine_rows];
        let mut row_dual = vec![0.0; self.engine_rows];
        check(
            unsafe {
                Highs_getSolution(
                    self.ptr,
                    x.as_mut_ptr(),
                    col_dual.as_mut_ptr(),
                    row_value.as_mut_ptr(),
                    row_dual.as_mut_ptr(),
                )
            },
            "getSolution",
        )?;
        let objective = unsafe { Highs_getObjectiveValue(self.ptr) } + self.store.offset;
        Ok(SolveOutcome {
            status: SolveStatus::Optimal,
            objective,
            primal: Some(x),
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
        lpfile::write_lp(&self.store, "cutplane model (highs)", path)
    }
}
