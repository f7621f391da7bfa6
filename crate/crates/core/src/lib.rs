//! Cutting-plane lower bounds for AC optimal power flow.
//!
//! The relaxation works over lifted variables `v^2`, `c`, `s`, `i^2` and
//! branch flows. Everything linear is in the base model; the rotated cones
//! and thermal disks are imposed lazily through separating cuts.

pub mod case_io;
pub mod cuts;
pub mod driver;
pub mod error;
pub mod flow;
pub mod grid;
pub mod lp;
pub mod relaxation;
pub mod report;
pub mod rng;
pub mod separation;

pub use case_io::{load_case, perturb_loads, write_network, PerturbationSpec};
pub use cuts::{CutArchive, CutManager, CutParams};
pub use driver::{cutplane, warm_start, AlgorithmParams, RoundLog, RunReport, RunStatus};
pub use error::{Error, Result};
pub use grid::{BranchAdmittance, Network};
pub use relaxation::{build_base_model, BuildOptions, ObjectiveMode, RelaxationModel, Role, SolutionPoint};
pub use separation::{CutFamily, LinearCut, Tolerances};
