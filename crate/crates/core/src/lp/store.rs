//! Engine-independent copy of the model: validation, id bookkeeping and the
//! input for rebuild-style engines and LP file dumps.

use super::{ConstrId, LpError, Sense, VarId};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Column {
    pub lb: f64,
    pub ub: f64,
    pub cost: f64,
    pub quad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Row bounds `(lower, upper)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self.sense {
            Sense::Le => (f64::NEG_INFINITY, self.rhs),
            Sense::Eq => (self.rhs, self.rhs),
            Sense::Ge => (self.rhs, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct ModelStore {
    pub columns: Vec<Column>,
    /// Indexed by `ConstrId`; `None` once removed.
    pub constraints: Vec<Option<Constraint>>,
    pub live: usize,
    pub offset: f64,
}

impl ModelStore {
    pub fn add_column(&mut self, lb: f64, ub: f64, cost: f64, quad: f64) -> Result<VarId, LpError> {
        if lb.is_nan() || ub.is_nan() || lb > ub {
            return Err(LpError::BoundOrder { lb, ub });
        }
        if !cost.is_finite() || !quad.is_finite() {
            return Err(LpError::NonFinite);
        }
        if quad < 0.0 {
            return Err(LpError::NonConvex(quad));
        }
        self.columns.push(Column { lb, ub, cost, quad });
        Ok(VarId(self.columns.len() - 1))
    }

    pub fn set_bounds(&mut self, var: VarId, lb: f64, ub: f64) -> Result<(), LpError> {
        if lb.is_nan() || ub.is_nan() || lb > ub {
            return Err(LpError::BoundOrder { lb, ub });
        }
        let col = self.columns.get_mut(var.0).ok_or(LpError::UnknownVariable(var))?;
        col.lb = lb;
        col.ub = ub;
        Ok(())
    }

    /// Validate, merge repeated variables and drop exact zeros.
    pub fn normalize_terms(&self, terms: &[(VarId, f64)], rhs: f64) -> Result<Vec<(usize, f64)>, LpError> {
        if !rhs.is_finite() {
            return Err(LpError::NonFinite);
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for &(v, a) in terms {
            if v.0 >= self.columns.len() {
                return Err(LpError::UnknownVariable(v));
            }
            if !a.is_finite() {
                return Err(LpError::NonFinite);
            }
            match merged.iter_mut().find(|(j, _)| *j == v.0) {
                Some(entry) => entry.1 += a,
                None => merged.push((v.0, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        Ok(merged)
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> ConstrId {
        self.constraints.push(Some(Constraint { terms, sense, rhs }));
        self.live += 1;
        ConstrId(self.constraints.len() - 1)
    }

    pub fn remove(&mut self, id: ConstrId) -> Result<Constraint, LpError> {
        let slot = self.constraints.get_mut(id.0).ok_or(LpError::UnknownConstraint(id))?;
        let c = slot.take().ok_or(LpError::UnknownConstraint(id))?;
        self.live -= 1;
        Ok(c)
    }

    pub fn live_constraints(&self) -> impl Iterator<Item = (usize, &Constraint)> {
        self.constraints
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
    }

    pub fn has_quadratic(&self) -> bool {
        self.columns.iter().any(|c| c.quad > 0.0)
    }

    /// True when a live row without terms excludes 0.
    pub fn has_violated_empty_row(&self) -> bool {
        let tol = super::SOLVER_TOLERANCE;
        self.live_constraints().any(|(_, c)| {
            let (lo, hi) = c.bounds();
            c.terms.is_empty() && (lo > tol || hi < -tol)
        })
    }

    /// Closed-form optimum when every row is empty: each column minimizes
    /// its own separable cost over its box. `None` if unbounded.
    pub fn separable_optimum(&self) -> Option<(f64, Vec<f64>)> {
        let mut obj = self.offset;
        let mut x = Vec::with_capacity(self.columns.len());
        for col in &self.columns {
            let v = if col.quad > 0.0 {
                (-col.cost / (2.0 * col.quad)).clamp(col.lb, col.ub)
            } else if col.cost > 0.0 {
                col.lb
            } else if col.cost < 0.0 {
                col.ub
            } else if col.lb.is_finite() {
                col.lb
            } else if col.ub.is_finite() {
                col.ub
            } else {
                0.0
            };
            if !v.is_finite() {
                return None;
            }
            obj += col.quad * v * v + col.cost * v;
            x.push(v);
        }
        Some((obj, x))
    }
}
