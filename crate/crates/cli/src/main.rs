use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cutplane::cuts::{load_archive, save_archive, CutArchive, CutManager};
use cutplane::driver::{cutplane, warm_start, AlgorithmParams, RunReport, RunStatus};
use cutplane::flow::{decompose, loss_report, single_branch_relaxation_experiment, subdivide_and_orient};
use cutplane::lp::{backend_from_env, LpError};
use cutplane::relaxation::{build_base_model, BuildOptions, ObjectiveMode, SolutionPoint};
use cutplane::report::{format_csv, format_report, parse_solution};
use cutplane::separation::Tolerances;
use cutplane::{load_case, perturb_loads, write_network, CutParams, Error, Network, PerturbationSpec};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_TIME_LIMIT: u8 = 3;
const EXIT_INPUT: u8 = 4;
const EXIT_NUMERIC: u8 = 5;

#[derive(Parser)]
#[command(name = "cutplane", version, about = "Cutting-plane lower bounds for AC optimal power flow")]
struct Cli {
    /// Worker threads for violation scans and experiment trials (1 = sequential).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the relaxation and run the cutting-plane loop.
    Solve {
        case: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-instate archived cuts, then run the loop.
    Warmstart {
        case: PathBuf,
        /// Cut archive written by `solve --save-cuts`.
        #[arg(long)]
        cuts: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a copy of the case with Gaussian-perturbed active loads.
    Perturb {
        case: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        mean_scale: f64,
        #[arg(long, default_value_t = 0.05)]
        sd_scale: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Loss ledger and flow-path decomposition of a relaxation solution.
    Decompose {
        case: PathBuf,
        /// Report file containing a [solution] block.
        #[arg(long, conflicts_with = "resolve", required_unless_present = "resolve")]
        solution: Option<PathBuf>,
        /// Solve the case first instead of reading a report.
        #[arg(long)]
        resolve: bool,
        /// Print every path and cycle.
        #[arg(long)]
        paths: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Diagnostic experiments.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Subcommand)]
enum Experiment {
    /// Drop one random branch's cone cuts per trial and record losses.
    RelaxOne {
        case: PathBuf,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 1000.0)]
    time_limit: f64,
    /// Stalled rounds allowed before stopping.
    #[arg(long, default_value_t = 5)]
    ftol_rounds: usize,
    /// Relative improvement that counts as progress.
    #[arg(long, default_value_t = 1e-5)]
    ftol: f64,
    /// Rounds a cut may stay slack before it is dropped.
    #[arg(long, default_value_t = 5)]
    cut_age: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps_jabr: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps_i2: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps_lim: f64,
    /// Cuts whose normals have cosine above 1 - eps-par are parallel.
    #[arg(long, default_value_t = 1e-2)]
    eps_par: f64,
    /// Percent of violated branches separated per family.
    #[arg(long, default_value_t = 15.0)]
    top_jabr: f64,
    #[arg(long, default_value_t = 15.0)]
    top_i2: f64,
    #[arg(long, default_value_t = 15.0)]
    top_lim: f64,
    /// Objective: native quadratic (qp) or secant piecewise-linear (pwl).
    #[arg(long, default_value = "qp")]
    objective: ObjectiveMode,
    #[arg(long, default_value_t = 32)]
    pwl_segments: usize,
    /// Omit the static P_km + P_mk >= 0 rows.
    #[arg(long)]
    no_loss_rows: bool,
    /// Allow c < 0 (angle differences beyond 90 degrees).
    #[arg(long)]
    free_c_lb: bool,
    /// Write all live and dormant cuts here.
    #[arg(long)]
    save_cuts: Option<PathBuf>,
    /// Write the key=value report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the per-round CSV here.
    #[arg(long)]
    csv_rounds: Option<PathBuf>,
}

impl RunArgs {
    fn build_options(&self) -> BuildOptions {
        BuildOptions {
            objective: self.objective,
            pwl_segments: self.pwl_segments,
            loss_rows: !self.no_loss_rows,
            free_c_lower_bound: self.free_c_lb,
        }
    }

    fn params(&self, threads: usize) -> AlgorithmParams {
        AlgorithmParams {
            time_limit: self.time_limit,
            ftol_rounds: self.ftol_rounds,
            ftol: self.ftol,
            cuts: CutParams {
                eps_par: self.eps_par,
                max_age: self.cut_age,
                tol: Tolerances {
                    jabr: self.eps_jabr,
                    i2: self.eps_i2,
                    limit: self.eps_lim,
                },
                top: [self.top_jabr / 100.0, self.top_i2 / 100.0, self.top_lim / 100.0],
            },
            parallel: threads > 1,
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn exit_for(status: RunStatus) -> u8 {
    match status {
        RunStatus::Converged | RunStatus::Stalled => 0,
        RunStatus::Infeasible => EXIT_INFEASIBLE,
        RunStatus::TimeLimit => EXIT_TIME_LIMIT,
        RunStatus::NumericFailure => EXIT_NUMERIC,
    }
}

fn print_summary(r: &RunReport) {
    println!("case: {}", r.case);
    println!("status: {}", r.status);
    match r.bound {
        Some(b) => println!("bound: {b:.2}{}", if r.approximate { " (approximate objective)" } else { "" }),
        None => println!("bound: none"),
    }
    if let Some(b) = r.round0_bound {
        println!("round-0 bound: {b:.2} ({} archived cuts)", r.archived_cuts);
    }
    println!(
        "rounds: {} solves, {} adding cuts; cuts computed {}, added {}",
        r.solves(),
        r.cut_rounds(),
        r.total_computed(),
        r.total_added()
    );
    println!("time: {:.2} s", r.wall_time);
}

fn finish_run(r: &RunReport, manager: &CutManager, net: &Network, args: &RunArgs) -> Result<u8, Error> {
    print_summary(r);
    if let Some(path) = &args.report {
        write_file(path, &format_report(r))?;
    }
    if let Some(path) = &args.csv_rounds {
        write_file(path, &format_csv(r))?;
    }
    if let Some(path) = &args.save_cuts {
        save_archive(path, &CutArchive::for_network(net, manager.all_cuts()))?;
    }
    Ok(exit_for(r.status))
}

fn solve(net: &Network, args: &RunArgs, threads: usize) -> Result<(RunReport, CutManager), Error> {
    let mut model = build_base_model(net, args.build_options(), backend_from_env()?)?;
    cutplane(&mut model, &args.params(threads))
}

fn print_decomposition(net: &Network, pt: &SolutionPoint, show_paths: bool) -> Result<(), Error> {
    let losses = loss_report(net, pt);
    println!("generation: {:.6}", losses.generation);
    println!("load: {:.6}", losses.load);
    println!("positive losses: {:.6}", losses.positive_losses);
    println!("negative losses: {:.6} on {} branches", losses.negative_losses, losses.negative_count);
    println!("total loss: {:.6}", losses.total_loss());
    println!("ledger gap: {:.3e}", losses.ledger_gap());
    println!(
        "reactive: generation {:.6}, shunt {:.6}, load {:.6}, losses {:.6}",
        losses.reactive_generation, losses.reactive_shunt, losses.reactive_load, losses.reactive_losses
    );
    let graph = subdivide_and_orient(net, pt);
    let d = decompose(&graph)?;
    println!("paths: {} carrying {:.6}", d.paths.len(), d.path_flow());
    println!("cycles: {}", d.cycles.len());
    println!("residual: {:.3e}", d.residual);
    if show_paths {
        for p in &d.paths {
            let nodes: Vec<String> = p.nodes.iter().map(|n| n.to_string()).collect();
            println!("path {:.6}: {}", p.flow, nodes.join(" -> "));
        }
        for c in &d.cycles {
            let nodes: Vec<String> = c.nodes.iter().map(|n| n.to_string()).collect();
            println!("cycle {:.6}: {}", c.flow, nodes.join(" -> "));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    let threads = cli.threads.max(1);
    match cli.command {
        Command::Solve { case, run } => {
            let net = load_case(&case)?;
            let (report, manager) = solve(&net, &run, threads)?;
            finish_run(&report, &manager, &net, &run)
        }
        Command::Warmstart { case, cuts, run } => {
            let net = load_case(&case)?;
            let archive = load_archive(&cuts)?;
            let (report, manager) =
                warm_start(&net, &archive, run.build_options(), &run.params(threads), backend_from_env()?)?;
            finish_run(&report, &manager, &net, &run)
        }
        Command::Perturb { case, seed, mean_scale, sd_scale, output } => {
            if sd_scale.is_nan() || sd_scale < 0.0 {
                return Err(Error::Param("sd-scale must be non-negative".into()));
            }
            let net = load_case(&case)?;
            let perturbed = perturb_loads(&net, &PerturbationSpec { seed, mean_scale, sd_scale });
            write_network(&perturbed, &output)?;
            println!("wrote {}", output.display());
            Ok(0)
        }
        Command::Decompose { case, solution, resolve, paths, run } => {
            let net = load_case(&case)?;
            let (pt, code) = if resolve {
                let (report, manager) = solve(&net, &run, threads)?;
                let code = finish_run(&report, &manager, &net, &run)?;
                match report.solution {
                    Some(pt) if report.bound.is_some() => (pt, code),
                    _ => return Ok(code),
                }
            } else {
                let path = solution.expect("clap enforces --solution or --resolve");
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                (parse_solution(&text)?, 0)
            };
            if pt.v2.len() != net.buses.len() || pt.branches.len() != net.branches.len() || pt.pg.len() != net.generators.len() {
                return Err(Error::InvalidData("solution does not match the case dimensions".into()));
            }
            print_decomposition(&net, &pt, paths)?;
            Ok(code)
        }
        Command::Experiment(Experiment::RelaxOne { case, trials, seed, csv, run }) => {
            let net = load_case(&case)?;
            let result = single_branch_relaxation_experiment(
                &net,
                trials,
                seed,
                run.build_options(),
                &run.params(threads),
                backend_from_env,
            )?;
            let table = result.to_csv();
            match csv {
                Some(path) => {
                    write_file(&path, &table)?;
                    println!(
                        "baseline {:.2}, relaxed average {:.2}, average branch loss {:.4}",
                        result.baseline_objective,
                        result.avg_objective(),
                        result.avg_branch_loss()
                    );
                }
                None => print!("{table}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.threads > 1 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Lp(LpError::UnknownBackend(_)) => EXIT_INPUT,
                Error::Lp(_) => EXIT_NUMERIC,
                _ => EXIT_INPUT,
            };
            ExitCode::from(code)
        }
    }
}
