//! Active-power flow decomposition on the subdivided network, loss
//! accounting, and the relax-one-branch experiment.
//!
//! Every branch `l = (k, m)` gets a middle node `n_l`. The arc between `k`
//! and `n_l` carries `|P_km|`, pointing away from `k` when `P_km >= 0`, and
//! likewise at `m`. A middle node then supplies `-(P_km + P_mk)`: it is a
//! sink for a positive loss and a source for a negative one.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::cuts::CutArchive;
use crate::driver::{cutplane, run_cutting_planes, AlgorithmParams, RunStatus};
use crate::error::{Error, Result};
use crate::grid::{branch_loss, Network};
use crate::lp::{LpBackend, LpError};
use crate::relaxation::{build_base_model, BuildOptions, SolutionPoint};
use crate::rng::SplitMix64;

/// Tolerance of the conservation check before decomposing.
pub const CONSERVATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Bus(usize),
    /// Middle node of a branch.
    Split(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Bus(k) => write!(f, "bus {k}"),
            Node::Split(l) => write!(f, "branch {l} midpoint"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub tail: Node,
    pub head: Node,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedFlowGraph {
    pub nbus: usize,
    pub arcs: Vec<Arc>,
    /// Net supply per node: buses first, then middle nodes.
    pub imbalance: Vec<f64>,
    /// Per bus, injection consumed at the bus itself (generation serving
    /// co-located load). It never enters an arc.
    pub local: Vec<f64>,
}

impl DirectedFlowGraph {
    pub fn node_index(&self, n: Node) -> usize {
        match n {
            Node::Bus(k) => k,
            Node::Split(l) => self.nbus + l,
        }
    }

    pub fn node(&self, i: usize) -> Node {
        if i < self.nbus {
            Node::Bus(i)
        } else {
            Node::Split(i - self.nbus)
        }
    }

    /// Worst `|outflow - inflow - supply|` and where it occurs.
    pub fn conservation_residual(&self) -> (f64, Node) {
        let mut net = self.imbalance.iter().map(|s| -s).collect::<Vec<_>>();
        for a in &self.arcs {
            net[self.node_index(a.tail)] += a.flow;
            net[self.node_index(a.head)] -= a.flow;
        }
        let (i, r) = net
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.abs()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        (r, self.node(i))
    }
}

/// Gross (injection, withdrawal) at each bus with shunt consumption folded
/// into load. Negative loads count as injection, negative output as
/// withdrawal.
fn bus_injections(net: &Network, pt: &SolutionPoint) -> Vec<(f64, f64)> {
    let mut io: Vec<(f64, f64)> = net
        .buses
        .iter()
        .map(|b| {
            let load = b.pd + b.gs * pt.v2[b.index];
            (load.min(0.0).abs(), load.max(0.0))
        })
        .collect();
    for (g, gen) in net.generators.iter().enumerate() {
        let p = pt.pg[g];
        io[gen.bus].0 += p.max(0.0);
        io[gen.bus].1 += p.min(0.0).abs();
    }
    io
}

pub fn subdivide_and_orient(net: &Network, pt: &SolutionPoint) -> DirectedFlowGraph {
    let nbus = net.buses.len();
    let io = bus_injections(net, pt);
    let mut imbalance: Vec<f64> = io.iter().map(|(i, w)| i - w).collect();
    let local = io.iter().map(|(i, w)| i.min(*w)).collect();
    let mut arcs = Vec::with_capacity(2 * net.branches.len());
    for (l, br) in net.branches.iter().enumerate() {
        let b = &pt.branches[l];
        let mid = Node::Split(l);
        for (end, p) in [(Node::Bus(br.from), b.p_km), (Node::Bus(br.to), b.p_mk)] {
            if p > 0.0 {
                arcs.push(Arc { tail: end, head: mid, flow: p });
            } else if p < 0.0 {
                arcs.push(Arc { tail: mid, head: end, flow: -p });
            }
        }
        imbalance.push(-branch_loss(b.p_km, b.p_mk));
    }
    DirectedFlowGraph { nbus, arcs, imbalance, local }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// Bus with positive net injection or negative net injection.
    Bus,
    /// Middle node of a branch with negative loss (source) or positive loss (sink).
    Branch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub nodes: Vec<Node>,
    pub flow: f64,
    pub source: Endpoint,
    pub sink: Endpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowCycle {
    /// Closed walk; the first node is not repeated at the end.
    pub nodes: Vec<Node>,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDecomposition {
    pub paths: Vec<FlowPath>,
    pub cycles: Vec<FlowCycle>,
    /// Largest arc flow left unassigned.
    pub residual: f64,
}

impl PathDecomposition {
    pub fn path_flow(&self) -> f64 {
        self.paths.iter().map(|p| p.flow).sum()
    }

    /// Flow assigned to each arc of `g` by the paths and cycles.
    pub fn arc_flows(&self, g: &DirectedFlowGraph) -> Vec<f64> {
        let index: std::collections::HashMap<(Node, Node), usize> =
            g.arcs.iter().enumerate().map(|(i, a)| ((a.tail, a.head), i)).collect();
        let mut flows = vec![0.0; g.arcs.len()];
        let mut walk = |nodes: &[Node], closed: bool, f: f64| {
            let n = nodes.len();
            let steps = if closed { n } else { n.saturating_sub(1) };
            for i in 0..steps {
                let key = (nodes[i], nodes[(i + 1) % n]);
                flows[index[&key]] += f;
            }
        };
        for p in &self.paths {
            walk(&p.nodes, false, p.flow);
        }
        for c in &self.cycles {
            walk(&c.nodes, true, c.flow);
        }
        flows
    }
}

struct Residual {
    /// Outgoing arc ids per node.
    out: Vec<Vec<usize>>,
    head: Vec<usize>,
    flow: Vec<f64>,
}

impl Residual {
    fn best_out(&self, v: usize, zero: f64) -> Option<usize> {
        self.out[v]
            .iter()
            .copied()
            .filter(|&a| self.flow[a] > zero)
            .max_by(|&a, &b| self.flow[a].total_cmp(&self.flow[b]).then(b.cmp(&a)))
    }

    /// Subtract the bottleneck along `arcs` and return it.
    fn cancel(&mut self, arcs: &[usize], cap: f64) -> f64 {
        let f = arcs.iter().map(|&a| self.flow[a]).fold(cap, f64::min);
        for &a in arcs {
            self.flow[a] -= f;
        }
        f
    }
}

/// Split the arc flows into source-to-sink paths and cycles. Sources are
/// taken by decreasing supply; each step follows the heaviest remaining arc.
pub fn decompose(g: &DirectedFlowGraph) -> Result<PathDecomposition> {
    let (worst, node) = g.conservation_residual();
    let scale = g.arcs.iter().map(|a| a.flow).fold(1.0, f64::max);
    if worst > CONSERVATION_TOL {
        return Err(Error::Conservation { node: node.to_string(), residual: worst });
    }
    let zero = 1e-14 * scale;
    let n = g.imbalance.len();
    let mut res = Residual {
        out: vec![Vec::new(); n],
        head: g.arcs.iter().map(|a| g.node_index(a.head)).collect(),
        flow: g.arcs.iter().map(|a| a.flow).collect(),
    };
    for (i, a) in g.arcs.iter().enumerate() {
        res.out[g.node_index(a.tail)].push(i);
    }
    let mut excess = g.imbalance.clone();
    let endpoint = |i: usize| if i < g.nbus { Endpoint::Bus } else { Endpoint::Branch };
    // Single-node paths first, so the path total covers all generation.
    let mut paths: Vec<FlowPath> = g
        .local
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > zero)
        .map(|(k, &f)| FlowPath { nodes: vec![Node::Bus(k)], flow: f, source: Endpoint::Bus, sink: Endpoint::Bus })
        .collect();
    let mut cycles = Vec::new();
    let mut extract_cycle = |res: &mut Residual, trail: &[usize], arcs: &[usize], from: usize| {
        let f = res.cancel(&arcs[from..], f64::INFINITY);
        if f > 0.0 {
            cycles.push(FlowCycle { nodes: trail[from..].iter().map(|&i| g.node(i)).collect(), flow: f });
        }
    };

    loop {
        // Highest remaining supply first; ties by node index.
        let source = (0..n)
            .filter(|&i| excess[i] > zero && res.best_out(i, zero).is_some())
            .max_by(|&a, &b| excess[a].total_cmp(&excess[b]).then(b.cmp(&a)));
        let Some(s) = source else { break };
        let mut trail = vec![s];
        let mut arcs: Vec<usize> = Vec::new();
        let mut pos = vec![usize::MAX; n];
        pos[s] = 0;
        loop {
            let v = *trail.last().expect("non-empty trail");
            if v != s && excess[v] < -zero {
                let f = res.cancel(&arcs, excess[s].min(-excess[v]));
                excess[s] -= f;
                excess[v] += f;
                paths.push(FlowPath {
                    nodes: trail.iter().map(|&i| g.node(i)).collect(),
                    flow: f,
                    source: endpoint(s),
                    sink: endpoint(v),
                });
                break;
            }
            let Some(a) = res.best_out(v, zero) else {
                // Only reachable through round-off: drop the stranded supply.
                log::debug!("flow trail from {} stopped at {}", g.node(s), g.node(v));
                excess[s] = excess[s].min(0.0);
                break;
            };
            let w = res.head[a];
            arcs.push(a);
            if pos[w] != usize::MAX {
                let from = pos[w];
                extract_cycle(&mut res, &trail, &arcs, from);
                for &i in &trail[from + 1..] {
                    pos[i] = usize::MAX;
                }
                trail.truncate(from + 1);
                arcs.truncate(from);
                continue;
            }
            pos[w] = trail.len();
            trail.push(w);
        }
    }

    // What is left is a circulation.
    loop {
        let start = (0..res.flow.len())
            .filter(|&a| res.flow[a] > zero)
            .max_by(|&a, &b| res.flow[a].total_cmp(&res.flow[b]).then(b.cmp(&a)));
        let Some(a0) = start else { break };
        let tail = g.node_index(g.arcs[a0].tail);
        let mut trail = vec![tail];
        let mut arcs = vec![a0];
        let mut pos = vec![usize::MAX; n];
        pos[tail] = 0;
        let mut v = res.head[a0];
        loop {
            if pos[v] != usize::MAX {
                extract_cycle(&mut res, &trail, &arcs, pos[v]);
                break;
            }
            pos[v] = trail.len();
            trail.push(v);
            match res.best_out(v, zero) {
                Some(a) => {
                    arcs.push(a);
                    v = res.head[a];
                }
                None => {
                    // Stranded round-off flow.
                    for &a in &arcs {
                        if res.flow[a] <= 1e-9 * scale {
                            res.flow[a] = 0.0;
                        }
                    }
                    res.flow[a0] = 0.0;
                    break;
                }
            }
        }
    }

    let residual = res.flow.iter().fold(0.0, |m: f64, &f| m.max(f));
    Ok(PathDecomposition { paths, cycles, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub generation: f64,
    /// Active load including shunt conductance consumption.
    pub load: f64,
    pub positive_losses: f64,
    /// Magnitude of the negative losses.
    pub negative_losses: f64,
    pub branch_losses: Vec<f64>,
    pub negative_count: usize,
    pub reactive_generation: f64,
    pub reactive_load: f64,
    /// Reactive power produced by bus shunts, `sum(Bs v^2)`.
    pub reactive_shunt: f64,
    pub reactive_losses: f64,
}

impl LossReport {
    pub fn total_loss(&self) -> f64 {
        self.positive_losses - self.negative_losses
    }

    /// `generation + |negative| - (load + positive)`; zero on balanced points.
    pub fn ledger_gap(&self) -> f64 {
        self.generation + self.negative_losses - self.load - self.positive_losses
    }

    pub fn reactive_gap(&self) -> f64 {
        self.reactive_generation + self.reactive_shunt - self.reactive_load - self.reactive_losses
    }
}

pub fn loss_report(net: &Network, pt: &SolutionPoint) -> LossReport {
    let branch_losses: Vec<f64> = pt.branches.iter().map(|b| branch_loss(b.p_km, b.p_mk)).collect();
    let positive_losses = branch_losses.iter().filter(|&&l| l > 0.0).sum();
    let negative_losses = -branch_losses.iter().filter(|&&l| l < 0.0).sum::<f64>();
    let negative_count = branch_losses.iter().filter(|&&l| l < 0.0).count();
    LossReport {
        generation: pt.pg.iter().sum(),
        load: net.buses.iter().map(|b| b.pd + b.gs * pt.v2[b.index]).sum(),
        positive_losses,
        negative_losses,
        branch_losses,
        negative_count,
        reactive_generation: pt.qg.iter().sum(),
        reactive_load: net.buses.iter().map(|b| b.qd).sum(),
        reactive_shunt: net.buses.iter().map(|b| b.bs * pt.v2[b.index]).sum(),
        reactive_losses: pt.branches.iter().map(|b| b.q_km + b.q_mk).sum(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub trial: usize,
    pub branch: usize,
    pub status: RunStatus,
    pub objective: f64,
    pub total_loss: f64,
    pub branch_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub case: String,
    pub baseline_objective: f64,
    pub baseline_loss: f64,
    pub trials: Vec<Trial>,
}

impl ExperimentResult {
    fn mean(&self, f: impl Fn(&Trial) -> f64) -> f64 {
        self.trials.iter().map(f).sum::<f64>() / self.trials.len() as f64
    }

    pub fn avg_loss(&self) -> f64 {
        self.mean(|t| t.total_loss)
    }

    pub fn avg_branch_loss(&self) -> f64 {
        self.mean(|t| t.branch_loss)
    }

    pub fn avg_objective(&self) -> f64 {
        self.mean(|t| t.objective)
    }

    /// Summary row plus one row per trial.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "# single-branch relaxation, cutting-plane adaptation: the chosen branch keeps no jabr or i2 cuts\n",
        );
        out.push_str("Case,SOC Loss,Avg Loss,Avg br. Loss,SOC Obj,relSOC Obj\n");
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.case,
            self.baseline_loss,
            self.avg_loss(),
            self.avg_branch_loss(),
            self.baseline_objective,
            self.avg_objective()
        );
        out.push_str("\ntrial,branch,status,objective,total_loss,branch_loss\n");
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6}",
                t.trial, t.branch, t.status, t.objective, t.total_loss, t.branch_loss
            );
        }
        out
    }
}

/// The branch trial `t` relaxes.
pub fn trial_branch(seed: u64, trial: usize, nbranch: usize) -> usize {
    SplitMix64::stream(seed, trial as u64).next_index(nbranch)
}

/// Baseline run, then per trial: the same model with one random branch's
/// cone rows and cuts removed, warm started from the baseline's cuts.
pub fn single_branch_relaxation_experiment<F>(
    net: &Network,
    trials: usize,
    seed: u64,
    opts: BuildOptions,
    params: &AlgorithmParams,
    make_backend: F,
) -> Result<ExperimentResult>
where
    F: Fn() -> std::result::Result<Box<dyn LpBackend>, LpError> + Sync,
{
    if trials == 0 {
        return Err(Error::Param("at least one trial is required".into()));
    }
    if net.branches.is_empty() {
        return Err(Error::Param("case has no branches".into()));
    }
    let mut base_model = build_base_model(net, opts, make_backend()?)?;
    let (base, manager) = cutplane(&mut base_model, params)?;
    let base_point = base.solution.as_ref().ok_or(Error::NoSolution)?;
    let archive = CutArchive::for_network(net, manager.all_cuts());

    let run_trial = |t: usize| -> Result<Trial> {
        let l = trial_branch(seed, t, net.branches.len());
        let mut model = build_base_model(net, opts, make_backend()?)?;
        model.relax_branch(l)?;
        let mut mgr = crate::cuts::CutManager::new(params.cuts);
        mgr.suppress_branch(l);
        mgr.add_archived(&mut model, &archive.cuts)?;
        let report = run_cutting_planes(&mut model, &mut mgr, params)?;
        let (objective, total_loss, branch_loss) = match &report.solution {
            Some(pt) if report.bound.is_some() => {
                let losses = loss_report(net, pt);
                (pt.objective, losses.total_loss(), losses.branch_losses[l])
            }
            _ => (f64::NAN, f64::NAN, f64::NAN),
        };
        Ok(Trial { trial: t, branch: l, status: report.status, objective, total_loss, branch_loss })
    };
    let results: Vec<Result<Trial>> = if params.parallel {
        (0..trials).into_par_iter().map(run_trial).collect()
    } else {
        (0..trials).map(run_trial).collect()
    };
    Ok(ExperimentResult {
        case: net.name.clone(),
        baseline_objective: base_point.objective,
        baseline_loss: loss_report(net, base_point).total_loss(),
        trials: results.into_iter().collect::<Result<_>>()?,
    })
}
