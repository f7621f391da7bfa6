mod common;

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use common::*;
use cutplane::case_io::{format_matpower, parse_matpower};
use cutplane::cuts::{cosine, is_parallel, top_count, ArchivedCut, CutArchive};
use cutplane::grid::{branch_admittance, i2_value, Branch, FlowCoefficients};
use cutplane::separation::{jabr_cut, limit_cut, project_to_soc, Side};
use cutplane::{load_case, perturb_loads, CutFamily, LinearCut, PerturbationSpec, Role};

fn branch_strategy() -> impl Strategy<Value = Branch> {
    (1e-3..0.1f64, 0.01..0.5f64, 0.0..0.5f64, 0.0..0.01f64, 0.9..1.1f64, -0.5..0.5f64).prop_map(
        |(r, x, b, gsh, tap, shift)| {
            let mut br = Branch::simple(0, 1, r, x);
            br.b_charging = b;
            br.g_shunt = gsh;
            br.tap = tap;
            br.shift = shift;
            br
        },
    )
}

fn voltage_strategy() -> impl Strategy<Value = Complex64> {
    (0.9..1.1f64, -0.6..0.6f64).prop_map(|(m, a)| Complex64::from_polar(m, a))
}

/// Lifted variables `(v_k^2, v_m^2, c, s)` with `c + js = V_k conj(V_m)`.
fn lifted(vk: Complex64, vm: Complex64) -> (f64, f64, f64, f64) {
    let w = vk * vm.conj();
    (vk.norm_sqr(), vm.norm_sqr(), w.re, w.im)
}

proptest! {
    #[test]
    fn i2_matches_phasor_current(br in branch_strategy(), vk in voltage_strategy(), vm in voltage_strategy()) {
        let adm = branch_admittance(&br);
        let (vk2, vm2, c, s) = lifted(vk, vm);
        let expected = current_sq(&br, vk, vm);
        let got = i2_value(&adm, vk2, vm2, c, s);
        prop_assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1e-12), "{got} vs {expected}");
    }

    #[test]
    fn flow_coefficients_match_phasor_power(br in branch_strategy(), vk in voltage_strategy(), vm in voltage_strategy()) {
        let f = branch_admittance(&br).flow_coefficients();
        let (vk2, vm2, c, s) = lifted(vk, vm);
        let (skm, smk) = powers(&br, vk, vm);
        let scale = skm.norm().max(smk.norm()).max(1.0);
        for (coef, want) in [(f.p_km, skm.re), (f.q_km, skm.im), (f.p_mk, smk.re), (f.q_mk, smk.im)] {
            let got = FlowCoefficients::eval(&coef, vk2, vm2, c, s);
            prop_assert!((got - want).abs() <= 1e-10 * scale, "{got} vs {want}");
        }
    }

    #[test]
    fn simple_line_loss_identity(r in 1e-3..0.1f64, x in 0.01..0.5f64, vk2 in 0.8..1.2f64, vm2 in 0.8..1.2f64, c in 0.0..1.2f64, s in -0.5..0.5f64) {
        let br = Branch::simple(0, 1, r, x);
        let f = branch_admittance(&br).flow_coefficients();
        let loss = FlowCoefficients::eval(&f.p_km, vk2, vm2, c, s) + FlowCoefficients::eval(&f.p_mk, vk2, vm2, c, s);
        let g = br.series_admittance().re;
        prop_assert!((loss - g * (vk2 + vm2 - 2.0 * c)).abs() <= 1e-12 * (1.0 + g));
    }

    #[test]
    fn jabr_cut_separates_and_keeps_cone(seed in any::<u64>()) {
        let mut rng = cutplane::rng::SplitMix64::new(seed);
        let [x, y, w, z] = rotated_cone_violator(&mut rng);
        let cut = match jabr_cut(0, x, y, w, z) {
            Ok(cut) => cut,
            Err(_) => return Ok(()),
        };
        let at = |p: [f64; 4]| {
            [Role::C, Role::S, Role::Vk2, Role::Vm2].iter().zip(p).map(|(&r, v)| cut.coefficient(r) * v).sum::<f64>() - cut.rhs
        };
        prop_assert!(at([x, y, w, z]) > 0.0);
        for _ in 0..200 {
            prop_assert!(at(rotated_cone_point(&mut rng)) <= 1e-9);
        }
    }

    #[test]
    fn limit_cut_separates_and_keeps_disk(seed in any::<u64>(), u in 0.1..5.0f64, to_side in any::<bool>()) {
        let mut rng = cutplane::rng::SplitMix64::new(seed);
        let [p, q] = disk_violator(&mut rng, u);
        let side = if to_side { Side::To } else { Side::From };
        let cut = limit_cut(3, side, p, q, u).unwrap();
        let [rp, rq] = side.roles();
        let at = |a: f64, b: f64| cut.coefficient(rp) * a + cut.coefficient(rq) * b - cut.rhs;
        prop_assert!(at(p, q) > 0.0);
        for _ in 0..200 {
            let [a, b] = disk_point(&mut rng, u);
            prop_assert!(at(a, b) <= 1e-9);
        }
    }

    #[test]
    fn projection_matches_search(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, s in 0.01..2.0f64) {
        prop_assume!(x1.hypot(x2) > s * (1.0 + 1e-6));
        let (px, ps) = project_to_soc(&[x1, x2], s).unwrap();
        prop_assert!((px[0].hypot(px[1]) - ps).abs() <= 1e-12 * (1.0 + ps));
        let d = ((x1 - px[0]).powi(2) + (x2 - px[1]).powi(2) + (s - ps).powi(2)).sqrt();
        prop_assert!((d - soc_distance_by_search(x1, x2, s)).abs() <= 1e-8);
    }

    #[test]
    fn top_count_is_smallest_covering_prefix(p in 0.001..1.0f64, len in 0usize..500) {
        let k = top_count(p, len);
        prop_assert!(k <= len);
        prop_assert!(k as f64 >= p * len as f64 - 1e-9);
        if k > 0 {
            prop_assert!(((k - 1) as f64) < p * len as f64);
        }
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(a in proptest::collection::vec(-1.0..1.0f64, 4), b in proptest::collection::vec(-1.0..1.0f64, 4)) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let roles = [Role::C, Role::S, Role::Vk2, Role::Vm2];
        let mk = |v: &[f64]| LinearCut {
            family: CutFamily::Jabr,
            branch: 0,
            terms: roles.iter().copied().zip(v.iter().copied()).collect(),
            rhs: 0.0,
            violation: 0.0,
        };
        let (c, d) = (mk(&a), mk(&b));
        prop_assert!((cosine(&c, &d) - cosine(&d, &c)).abs() < 1e-15);
        prop_assert!(cosine(&c, &d).abs() <= 1.0 + 1e-12);
        prop_assert!(is_parallel(&c, &c, 1e-2));
    }

    #[test]
    fn archive_round_trip(raw in proptest::collection::vec((0usize..3, 0usize..20, proptest::collection::vec(-10.0..10.0f64, 2..5), -5.0..5.0f64, 0usize..100), 0..20)) {
        let roles = [Role::C, Role::S, Role::Vk2, Role::Vm2, Role::I2];
        let cuts = raw
            .into_iter()
            .map(|(f, branch, coefs, rhs, round)| ArchivedCut {
                cut: LinearCut {
                    family: CutFamily::ALL[f],
                    branch,
                    terms: roles.iter().copied().zip(coefs).collect(),
                    rhs,
                    violation: 0.0,
                },
                round,
            })
            .collect();
        let archive = CutArchive { nbus: 14, nbranch: 20, hash: "ab12".into(), cuts };
        prop_assert_eq!(CutArchive::parse(&archive.format()).unwrap(), archive);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbed_case_round_trips_through_text(seed in any::<u64>()) {
        let net = load_case(data_path("case14.m")).unwrap();
        let p = perturb_loads(&net, &PerturbationSpec::new(seed));
        let back = parse_matpower(&format_matpower(&p)).unwrap().to_network().unwrap();
        // Not every per-unit load has a decimal that divides back to it
        // exactly; allow one ulp there, exact equality elsewhere.
        for (a, b) in back.buses.iter().zip(&p.buses) {
            prop_assert!((a.pd - b.pd).abs() <= 2.0 * f64::EPSILON * b.pd.abs());
        }
        let loads: Vec<f64> = p.buses.iter().map(|b| b.pd).collect();
        prop_assert_eq!(back.with_active_loads(&loads), p);
    }

    #[test]
    fn perturbation_is_deterministic_and_sign_preserving(seed in any::<u64>(), mean in -0.5..0.5f64, sd in 0.0..2.0f64) {
        let net = load_case(data_path("case118.m")).unwrap();
        let spec = PerturbationSpec { seed, mean_scale: mean, sd_scale: sd };
        let a = perturb_loads(&net, &spec);
        prop_assert_eq!(&a, &perturb_loads(&net, &spec));
        for (old, new) in net.buses.iter().zip(&a.buses) {
            prop_assert!(old.pd * new.pd >= 0.0);
            if old.pd == 0.0 {
                prop_assert_eq!(new.pd, 0.0);
            }
            prop_assert_eq!(old.qd, new.qd);
        }
    }
}

#[test]
fn i2_oracle_on_fixed_transformer() {
    let mut br = Branch::simple(0, 1, 0.02, 0.2);
    br.tap = 0.95;
    br.shift = 0.1;
    br.b_charging = 0.3;
    let vk = Complex64::from_polar(1.05, 0.2);
    let vm = Complex64::from_polar(0.97, -0.1);
    let (vk2, vm2, c, s) = lifted(vk, vm);
    assert_relative_eq!(
        i2_value(&branch_admittance(&br), vk2, vm2, c, s),
        current_sq(&br, vk, vm),
        max_relative = 1e-12
    );
}

#[test]
fn data_cases_round_trip_exactly() {
    for name in ["case14.m", "case118.m", "case300.m", "case1354pegase.m"] {
        let net = load_case(data_path(name)).unwrap();
        let back = parse_matpower(&format_matpower(&net)).unwrap().to_network().unwrap();
        assert_eq!(back, net, "{name}");
    }
}
