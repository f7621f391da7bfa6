//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p cutplane-core --test acceptance`.

mod common;

use std::time::Instant;

use num_complex::Complex64;

use common::*;
use cutplane::cuts::CutArchive;
use cutplane::flow::{decompose, loss_report, single_branch_relaxation_experiment, subdivide_and_orient};
use cutplane::grid::{branch_admittance, i2_value, Branch, FlowCoefficients};
use cutplane::lp::{backend_by_name, backend_from_env};
use cutplane::rng::SplitMix64;
use cutplane::separation::{i2_cut, jabr_cut, limit_cut, project_to_soc, Side};
use cutplane::{
    build_base_model, cutplane, load_case, perturb_loads, warm_start, AlgorithmParams, BuildOptions, LinearCut,
    Network, PerturbationSpec, Role, RunReport, SolutionPoint,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Solved {
    net: Network,
    report: RunReport,
    seconds: f64,
}

fn solve_case(file: &str) -> Result<Solved, String> {
    let started = Instant::now();
    let net = load_case(data_path(file)).map_err(|e| e.to_string())?;
    let backend = backend_from_env().map_err(|e| e.to_string())?;
    let mut model = build_base_model(&net, BuildOptions::default(), backend).map_err(|e| e.to_string())?;
    let (report, _) = cutplane(&mut model, &AlgorithmParams::default()).map_err(|e| e.to_string())?;
    Ok(Solved { net, report, seconds: started.elapsed().as_secs_f64() })
}

fn bound_quality(s: &Result<Solved, String>, lo: f64, hi: f64, limit: f64, max_rounds: Option<usize>) -> Outcome {
    let s = s.as_ref().map_err(|e| e.clone())?;
    let b = s.report.bound.ok_or_else(|| format!("no bound, status {}", s.report.status))?;
    let rounds_ok = max_rounds.map_or(true, |m| s.report.solves() <= m);
    check(
        lo <= b && b <= hi && s.seconds < limit && rounds_ok,
        format!(
            "bound {b:.2} in [{lo:.2}, {hi:.2}], {:.1} s (< {limit} s), {} solves, status {}",
            s.seconds,
            s.report.solves(),
            s.report.status
        ),
    )
}

fn cut_value(cut: &LinearCut, roles: &[Role], p: &[f64]) -> f64 {
    roles.iter().zip(p).map(|(&r, v)| cut.coefficient(r) * v).sum::<f64>() - cut.rhs
}

/// 10^3 violated points per family, each cut checked on 10^4 feasible points.
fn cut_validity() -> Outcome {
    let mut rng = SplitMix64::new(5);
    let mut worst = f64::NEG_INFINITY;
    let mut cuts = 0usize;
    let cone: Vec<[f64; 4]> = (0..10_000).map(|_| rotated_cone_point(&mut rng)).collect();
    for family in 0..2 {
        let roles: [Role; 4] =
            if family == 0 { [Role::C, Role::S, Role::Vk2, Role::Vm2] } else { [Role::Pkm, Role::Qkm, Role::Vk2, Role::I2] };
        for _ in 0..1000 {
            let p = rotated_cone_violator(&mut rng);
            let cut = if family == 0 { jabr_cut(0, p[0], p[1], p[2], p[3]) } else { i2_cut(0, p[0], p[1], p[2], p[3]) }
                .map_err(|e| format!("separation failed at {p:?}: {e}"))?;
            if cut_value(&cut, &roles, &p) <= 0.0 {
                return Err(format!("cut does not separate {p:?}"));
            }
            for q in &cone {
                worst = worst.max(cut_value(&cut, &roles, q));
            }
            cuts += 1;
        }
    }
    let u = 1.3;
    let disk: Vec<[f64; 2]> = (0..10_000).map(|_| disk_point(&mut rng, u)).collect();
    for i in 0..1000 {
        let side = if i % 2 == 0 { Side::From } else { Side::To };
        let p = disk_violator(&mut rng, u);
        let cut = limit_cut(0, side, p[0], p[1], u).map_err(|e| e.to_string())?;
        let roles = side.roles();
        if cut_value(&cut, &roles, &p) <= 0.0 {
            return Err(format!("limit cut does not separate {p:?}"));
        }
        for q in &disk {
            worst = worst.max(cut_value(&cut, &roles, q));
        }
        cuts += 1;
    }
    check(worst <= 1e-9, format!("{cuts} cuts, worst feasible-point violation {worst:.2e} (<= 1e-9)"))
}

fn projection_oracle() -> Outcome {
    let mut rng = SplitMix64::new(6);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 100 {
        let (x1, x2, s) = (uniform(&mut rng, -3.0, 3.0), uniform(&mut rng, -3.0, 3.0), uniform(&mut rng, 0.01, 2.0));
        if x1.hypot(x2) <= s * (1.0 + 1e-6) {
            continue;
        }
        let (px, ps) = project_to_soc(&[x1, x2], s).map_err(|e| e.to_string())?;
        let d = ((x1 - px[0]).powi(2) + (x2 - px[1]).powi(2) + (s - ps).powi(2)).sqrt();
        worst = worst.max((d - soc_distance_by_search(x1, x2, s)).abs());
        n += 1;
    }
    check(worst <= 1e-8, format!("100 points, worst distance error {worst:.2e} (<= 1e-8)"))
}

fn i2_oracle() -> Outcome {
    let mut rng = SplitMix64::new(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let br = random_branch(&mut rng);
        let (vk, vm) = (random_voltage(&mut rng), random_voltage(&mut rng));
        let w: Complex64 = vk * vm.conj();
        let got = i2_value(&branch_admittance(&br), vk.norm_sqr(), vm.norm_sqr(), w.re, w.im);
        let want = current_sq(&br, vk, vm);
        worst = worst.max((got - want).abs() / want);
    }
    check(worst <= 1e-9, format!("1000 branches, worst relative error {worst:.2e} (<= 1e-9)"))
}

fn loss_implication() -> Outcome {
    let mut rng = SplitMix64::new(8);
    let mut worst = f64::INFINITY;
    let mut n = 0;
    while n < 1000 {
        let br = Branch::simple(0, 1, uniform(&mut rng, 1e-3, 0.1), uniform(&mut rng, 0.01, 0.5));
        let (vk2, vm2) = (uniform(&mut rng, 0.8, 1.2), uniform(&mut rng, 0.8, 1.2));
        // A fifth of the points sit on the boundary v_k^2 + v_m^2 = 2c.
        let c = if n % 5 == 0 { (vk2 + vm2) / 2.0 } else { uniform(&mut rng, -1.2, 1.2) };
        let s = uniform(&mut rng, -1.0, 1.0);
        if vk2 + vm2 - 2.0 * c < 0.0 {
            continue;
        }
        let f = branch_admittance(&br).flow_coefficients();
        let loss = FlowCoefficients::eval(&f.p_km, vk2, vm2, c, s) + FlowCoefficients::eval(&f.p_mk, vk2, vm2, c, s);
        worst = worst.min(loss);
        n += 1;
    }
    check(worst >= -1e-12, format!("1000 points, smallest loss {worst:.3e} (>= -1e-12)"))
}

fn monotone(reports: &[&RunReport]) -> Outcome {
    let mut rounds = 0;
    for r in reports {
        for w in r.rounds.windows(2) {
            let (a, b) = (w[0].objective, w[1].objective);
            if b < a - 1e-6 * a.abs() {
                return Err(format!("{}: bound fell from {a} to {b}", r.case));
            }
        }
        rounds += r.rounds.len();
    }
    check(true, format!("{} runs, {rounds} logged rounds, no decrease beyond 1e-6 relative", reports.len()))
}

fn decomposition(net: &Network, pt: &SolutionPoint) -> Result<(f64, f64, f64), String> {
    let g = subdivide_and_orient(net, pt);
    let d = decompose(&g).map_err(|e| e.to_string())?;
    let arc_err = g.arcs.iter().zip(d.arc_flows(&g)).map(|(a, f)| (a.flow - f).abs()).fold(0.0, f64::max);
    let losses = loss_report(net, pt);
    Ok((arc_err, losses.ledger_gap().abs(), losses.total_loss()))
}

fn flow_decomposition(c14: &Result<Solved, String>, c118: &Result<Solved, String>) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for s in [c14, c118] {
        let s = s.as_ref().map_err(|e| e.clone())?;
        let pt = s.report.solution.as_ref().ok_or("no solution")?;
        let (arc_err, gap, loss) = decomposition(&s.net, pt)?;
        ok &= arc_err <= 1e-8 && gap <= 1e-6;
        if s.net.name == "case14" {
            ok &= (loss - 0.0918).abs() <= 0.002;
        }
        parts.push(format!("{}: arc error {arc_err:.1e}, ledger gap {gap:.1e}, loss {loss:.4}", s.net.name));
    }
    check(ok, parts.join("; "))
}

fn warm_start_check(reports: &mut Vec<RunReport>) -> Outcome {
    let base = load_case(data_path("case14.m")).map_err(|e| e.to_string())?;
    let params = AlgorithmParams::default();
    let opts = BuildOptions::default();
    let backend = || backend_from_env().map_err(|e| e.to_string());
    let mut model = build_base_model(&base, opts, backend()?).map_err(|e| e.to_string())?;
    let (_, manager) = cutplane(&mut model, &params).map_err(|e| e.to_string())?;
    let archive = CutArchive::for_network(&base, manager.all_cuts());

    let net = perturb_loads(&base, &PerturbationSpec::new(7));
    let mut model = build_base_model(&net, opts, backend()?).map_err(|e| e.to_string())?;
    let (cold, _) = cutplane(&mut model, &params).map_err(|e| e.to_string())?;
    let (warm, _) = warm_start(&net, &archive, opts, &params, backend()?).map_err(|e| e.to_string())?;
    let m0 = cold.rounds[0].objective;
    let r0 = warm.round0_bound.ok_or("warm run has no round-0 bound")?;
    let ok = warm.solves() <= cold.solves() && r0 >= m0;
    let detail = format!(
        "warm {} solves <= cold {}; warm round-0 {r0:.2} >= cold M0 {m0:.2}; final warm {:.2} cold {:.2}",
        warm.solves(),
        cold.solves(),
        warm.bound.unwrap_or(f64::NAN),
        cold.bound.unwrap_or(f64::NAN)
    );
    reports.push(cold);
    reports.push(warm);
    check(ok, detail)
}

fn relax_one() -> Outcome {
    let net = load_case(data_path("case14.m")).map_err(|e| e.to_string())?;
    let name = std::env::var("CUTPLANE_BACKEND").unwrap_or_else(|_| cutplane::lp::DEFAULT_BACKEND.to_string());
    let res = single_branch_relaxation_experiment(&net, 50, 1, BuildOptions::default(), &AlgorithmParams::default(), || {
        backend_by_name(&name)
    })
    .map_err(|e| e.to_string())?;
    let z = res.baseline_objective;
    let bad: Vec<_> = res.trials.iter().filter(|t| !(t.objective <= z * (1.0 + 1e-6))).map(|t| t.trial).collect();
    check(
        bad.is_empty(),
        format!(
            "50 trials, baseline {z:.2}, relaxed average {:.2}, over baseline: {bad:?}; avg suppressed-branch loss {:.4} p.u. (reported only)",
            res.avg_objective(),
            res.avg_branch_loss()
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    let c14 = solve_case("case14.m");
    results.push(("1 bound quality case14", bound_quality(&c14, 0.99 * 8075.12, 8075.12 * (1.0 + 1e-4), 30.0, Some(50))));
    let c118 = solve_case("case118.m");
    results.push(("2 bound quality case118", bound_quality(&c118, 0.99 * 129340.0, 129340.0 * (1.0 + 1e-4), 60.0, None)));
    let c300 = solve_case("case300.m");
    results.push(("3 bound quality case300", bound_quality(&c300, 0.99 * 718654.0, 718654.0 * (1.0 + 1e-4), 120.0, None)));
    let peg = solve_case("case1354pegase.m");
    results.push((
        "4 bound quality case1354pegase",
        bound_quality(&peg, 0.99 * 73931.71, 74009.27 * (1.0 + 1e-4), 600.0, None),
    ));
    results.push(("5 cut validity", cut_validity()));
    results.push(("6 projection oracle", projection_oracle()));
    results.push(("7 i2 coefficient oracle", i2_oracle()));
    results.push(("8 loss implication", loss_implication()));

    let mut extra = Vec::new();
    let warm = warm_start_check(&mut extra);
    for seed in 0..20 {
        let net = perturb_loads(&load_case(data_path("case14.m")).unwrap(), &PerturbationSpec::new(seed));
        if let Ok(mut m) = build_base_model(&net, BuildOptions::default(), backend_from_env().unwrap()) {
            if let Ok((r, _)) = cutplane(&mut m, &AlgorithmParams::default()) {
                extra.push(r);
            }
        }
    }
    let mut logged: Vec<&RunReport> = [&c14, &c118, &c300, &peg].iter().filter_map(|s| s.as_ref().ok()).map(|s| &s.report).collect();
    logged.extend(extra.iter());
    results.push(("9 monotone bound", monotone(&logged)));
    results.push(("10 flow decomposition", flow_decomposition(&c14, &c118)));
    results.push(("11 warm start", warm));
    results.push(("12 relax-one-branch", relax_one()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
