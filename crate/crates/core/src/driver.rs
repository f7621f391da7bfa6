//! The outer cutting-plane loop.

use std::fmt;
use std::time::Instant;

use crate::cuts::{CutArchive, CutManager, CutParams, FamilyCounts};
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::lp::{LpBackend, SolveStatus};
use crate::relaxation::{build_base_model, BuildOptions, RelaxationModel, SolutionPoint};
use crate::separation::{find_violations, CutFamily};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmParams {
    /// Wall-clock limit in seconds, checked before each solve.
    pub time_limit: f64,
    /// Stalled rounds tolerated before stopping.
    pub ftol_rounds: usize,
    /// Relative improvement below which a round counts as stalled.
    pub ftol: f64,
    pub cuts: CutParams,
    /// Scan branches for violations on the rayon pool.
    pub parallel: bool,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            time_limit: 1000.0,
            ftol_rounds: 5,
            ftol: 1e-5,
            cuts: CutParams::default(),
            parallel: false,
        }
    }
}

impl AlgorithmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Param(msg.to_string()));
        if self.time_limit.is_nan() || self.time_limit <= 0.0 {
            return bad("time limit must be positive");
        }
        if self.ftol.is_nan() || self.ftol < 0.0 {
            return bad("ftol must be non-negative");
        }
        let c = &self.cuts;
        if !(c.eps_par > 0.0 && c.eps_par < 1.0) {
            return bad("eps-par must lie in (0, 1)");
        }
        for eps in [c.tol.jabr, c.tol.i2, c.tol.limit] {
            if eps.is_nan() || eps <= 0.0 {
                return bad("violation tolerances must be positive");
            }
        }
        for p in c.top {
            if !(p > 0.0 && p <= 1.0) {
                return bad("top percentages must lie in (0, 100]");
            }
        }
        if c.max_age == 0 {
            return bad("cut age must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    Stalled,
    TimeLimit,
    Infeasible,
    NumericFailure,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "converged",
            RunStatus::Stalled => "stalled",
            RunStatus::TimeLimit => "time-limit",
            RunStatus::Infeasible => "infeasible",
            RunStatus::NumericFailure => "numeric-failure",
        })
    }
}

impl std::str::FromStr for RunStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "converged" => RunStatus::Converged,
            "stalled" => RunStatus::Stalled,
            "time-limit" => RunStatus::TimeLimit,
            "infeasible" => RunStatus::Infeasible,
            "numeric-failure" => RunStatus::NumericFailure,
            other => return Err(Error::Param(format!("unknown status {other:?}"))),
        })
    }
}

/// One solve and what followed it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub objective: f64,
    pub computed: FamilyCounts,
    pub added: FamilyCounts,
    pub dropped: usize,
    pub live_cuts: usize,
    /// Largest raw residual per family (jabr, i2, limit).
    pub max_violation: [f64; 3],
    pub solve_time: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub case: String,
    pub backend: String,
    pub objective_mode: String,
    pub approximate: bool,
    pub warm: bool,
    pub status: RunStatus,
    /// Objective of the last optimal solve.
    pub bound: Option<f64>,
    pub rounds: Vec<RoundLog>,
    pub wall_time: f64,
    /// Warm starts: bound with only the archived cuts.
    pub round0_bound: Option<f64>,
    pub archived_cuts: usize,
    pub solution: Option<SolutionPoint>,
}

impl RunReport {
    pub fn solves(&self) -> usize {
        self.rounds.len()
    }

    /// Rounds that added at least one cut.
    pub fn cut_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.added.total() > 0).count()
    }

    pub fn total_computed(&self) -> usize {
        self.rounds.iter().map(|r| r.computed.total()).sum()
    }

    pub fn total_added(&self) -> usize {
        self.rounds.iter().map(|r| r.added.total()).sum()
    }
}

fn stalled(z: f64, z0: f64, ftol: f64) -> bool {
    if z0 == 0.0 {
        (z - z0).abs() < 1e-9
    } else {
        z - z0 < z0.abs() * ftol
    }
}

/// Run the loop on `model` with the cuts already held by `manager`.
pub fn run_cutting_planes(
    model: &mut RelaxationModel,
    manager: &mut CutManager,
    params: &AlgorithmParams,
) -> Result<RunReport> {
    params.validate()?;
    manager.params = params.cuts;
    let started = Instant::now();
    let net = model.network().clone();
    let mut rounds = Vec::new();
    let mut last_point: Option<SolutionPoint> = None;
    let mut z0: Option<f64> = None;
    let mut stall = 0usize;
    let mut round = 0usize;

    let status = loop {
        if round > 0 && started.elapsed().as_secs_f64() >= params.time_limit {
            break RunStatus::TimeLimit;
        }
        let out = match model.solve(round > 0) {
            Ok(out) => out.clone(),
            Err(Error::Lp(e)) => {
                log::error!("solve failed in round {round}: {e}");
                break RunStatus::NumericFailure;
            }
            Err(e) => return Err(e),
        };
        match out.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => break RunStatus::Infeasible,
            other => {
                log::error!("round {round}: solver returned {other}");
                break RunStatus::NumericFailure;
            }
        }
        let pt = model.snapshot(round)?;
        let z = out.objective;
        let mut viol = find_violations(&pt, &net, &params.cuts.tol, params.parallel);
        manager.drop_suppressed(&mut viol);
        let mut log_entry = RoundLog {
            round,
            objective: z,
            computed: FamilyCounts::default(),
            added: FamilyCounts::default(),
            dropped: 0,
            live_cuts: manager.live().len(),
            max_violation: CutFamily::ALL.map(|f| viol.max(f)),
            solve_time: out.solve_time,
            iterations: out.iterations,
        };
        log::info!("round {round}: z = {z:.6} violated = {}", viol.total());
        if viol.is_empty() {
            rounds.push(log_entry);
            last_point = Some(pt);
            break RunStatus::Converged;
        }
        if let Some(prev) = z0 {
            if stalled(z, prev, params.ftol) {
                stall += 1;
            } else {
                stall = 0;
            }
        }
        z0 = Some(z);
        let (computed, added) = manager.select_and_add(model, &pt, &viol, round + 1)?;
        let dropped = manager.age_and_expire(model, &pt)?;
        log_entry.computed = computed;
        log_entry.added = added;
        log_entry.dropped = dropped;
        log_entry.live_cuts = manager.live().len();
        rounds.push(log_entry);
        last_point = Some(pt);
        if stall >= params.ftol_rounds {
            break RunStatus::Stalled;
        }
        round += 1;
    };

    let bound = match status {
        RunStatus::Infeasible => None,
        _ => last_point.as_ref().map(|p| p.objective),
    };
    Ok(RunReport {
        case: net.name.clone(),
        backend: model.backend_name().to_string(),
        objective_mode: model.options().objective.to_string(),
        approximate: model.is_approximate(),
        warm: false,
        status,
        bound,
        rounds,
        wall_time: started.elapsed().as_secs_f64(),
        round0_bound: None,
        archived_cuts: 0,
        solution: last_point,
    })
}

/// Cold run on an already built model.
pub fn cutplane(model: &mut RelaxationModel, params: &AlgorithmParams) -> Result<(RunReport, CutManager)> {
    let mut manager = CutManager::new(params.cuts);
    let report = run_cutting_planes(model, &mut manager, params)?;
    Ok((report, manager))
}

/// Build M0 for `net`, re-instate every archived cut, then run the loop.
/// The first logged round is the bound with archived cuts only.
pub fn warm_start(
    net: &Network,
    archive: &CutArchive,
    opts: BuildOptions,
    params: &AlgorithmParams,
    backend: Box<dyn LpBackend>,
) -> Result<(RunReport, CutManager)> {
    archive.check_compatible(net)?;
    let mut model = build_base_model(net, opts, backend)?;
    let mut manager = CutManager::new(params.cuts);
    let loaded = manager.add_archived(&mut model, &archive.cuts)?;
    let mut report = run_cutting_planes(&mut model, &mut manager, params)?;
    report.warm = true;
    report.archived_cuts = loaded;
    report.round0_bound = report.rounds.first().map(|r| r.objective);
    Ok((report, manager))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stall_rule() {
        assert!(stalled(100.0, 100.0, 1e-5));
        assert!(stalled(100.0005, 100.0, 1e-5));
        assert!(!stalled(100.01, 100.0, 1e-5));
        assert!(stalled(0.0, 0.0, 1e-5));
        assert!(!stalled(1e-6, 0.0, 1e-5));
        // Negative bounds use the magnitude.
        assert!(!stalled(-99.0, -100.0, 1e-5));
    }

    #[test]
    fn parameter_checks() {
        assert!(AlgorithmParams::default().validate().is_ok());
        let mut p = AlgorithmParams::default();
        p.cuts.top[1] = 0.0;
        assert!(p.validate().is_err());
        let p = AlgorithmParams { time_limit: 0.0, ..AlgorithmParams::default() };
        assert!(p.validate().is_err());
        let mut p = AlgorithmParams::default();
        p.cuts.eps_par = 1.0;
        assert!(p.validate().is_err());
    }
}
