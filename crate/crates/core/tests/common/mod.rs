//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use num_complex::Complex64;

use cutplane::grid::Branch;
use cutplane::rng::SplitMix64;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Plain-complex admittance entries of the pi-model, tap and shift on the
/// from side. Built without touching the library's admittance code.
pub fn y_entries(br: &Branch) -> [Complex64; 4] {
    let z = Complex64::new(br.r, br.x);
    let y = Complex64::new(1.0, 0.0) / z;
    let ysh = Complex64::new(br.g_shunt, br.b_charging);
    let t = Complex64::from_polar(br.tap, br.shift);
    let ykk = (y + ysh / 2.0) / (br.tap * br.tap);
    let ykm = -y / t.conj();
    let ymk = -y / t;
    let ymm = y + ysh / 2.0;
    [ykk, ykm, ymk, ymm]
}

/// `|I_km|^2` from phasors.
pub fn current_sq(br: &Branch, vk: Complex64, vm: Complex64) -> f64 {
    let [ykk, ykm, _, _] = y_entries(br);
    (ykk * vk + ykm * vm).norm_sqr()
}

/// `(S_km, S_mk)` with `S = V conj(I)`.
pub fn powers(br: &Branch, vk: Complex64, vm: Complex64) -> (Complex64, Complex64) {
    let [ykk, ykm, ymk, ymm] = y_entries(br);
    let ik = ykk * vk + ykm * vm;
    let im = ymk * vk + ymm * vm;
    (vk * ik.conj(), vm * im.conj())
}

pub fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

/// Random branch with tap, shift, charging and a small pi-model conductance.
pub fn random_branch(rng: &mut SplitMix64) -> Branch {
    let mut br = Branch::simple(0, 1, uniform(rng, 1e-3, 0.1), uniform(rng, 0.01, 0.5));
    br.b_charging = uniform(rng, 0.0, 0.5);
    br.g_shunt = uniform(rng, 0.0, 0.01);
    br.tap = uniform(rng, 0.9, 1.1);
    br.shift = uniform(rng, -0.5, 0.5);
    br
}

pub fn random_voltage(rng: &mut SplitMix64) -> Complex64 {
    Complex64::from_polar(uniform(rng, 0.9, 1.1), uniform(rng, -0.6, 0.6))
}

pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Distance from `(x1, x2, s)` to the cone `||(x1, x2)|| <= s`, found by
/// searching its boundary `(t cos th, t sin th, t)`: golden section in `th`
/// around the direction of the point, nested golden section in `t`.
pub fn soc_distance_by_search(x1: f64, x2: f64, s: f64) -> f64 {
    let dist = |t: f64, th: f64| ((x1 - t * th.cos()).powi(2) + (x2 - t * th.sin()).powi(2) + (s - t).powi(2)).sqrt();
    let span = x1.hypot(x2) + s.abs() + 1.0;
    let best_t = |th: f64| golden_section(|t| dist(t, th), 0.0, span, 200);
    let phi = x2.atan2(x1);
    let h = std::f64::consts::FRAC_PI_2;
    let th = golden_section(|th| dist(best_t(th), th), phi - h, phi + h, 200);
    dist(best_t(th), th).min(dist(0.0, 0.0))
}

/// A point of `x^2 + y^2 <= w z`, `w, z >= 0`; about a quarter are on the
/// boundary.
pub fn rotated_cone_point(rng: &mut SplitMix64) -> [f64; 4] {
    let w = uniform(rng, 0.0, 2.0);
    let z = uniform(rng, 0.0, 2.0);
    let r = if rng.next_f64() < 0.25 { 1.0 } else { rng.next_f64().sqrt() } * (w * z).sqrt();
    let th = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    [r * th.cos(), r * th.sin(), w, z]
}

/// A point with `x^2 + y^2 > w z` and `w + z > 0`.
pub fn rotated_cone_violator(rng: &mut SplitMix64) -> [f64; 4] {
    loop {
        let p = [uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0), uniform(rng, -0.5, 2.0), uniform(rng, -0.5, 2.0)];
        if p[0] * p[0] + p[1] * p[1] > p[2] * p[3] && p[2] + p[3] > 0.0 {
            return p;
        }
    }
}

pub fn disk_point(rng: &mut SplitMix64, u: f64) -> [f64; 2] {
    let r = if rng.next_f64() < 0.25 { 1.0 } else { rng.next_f64().sqrt() } * u;
    let th = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    [r * th.cos(), r * th.sin()]
}

pub fn disk_violator(rng: &mut SplitMix64, u: f64) -> [f64; 2] {
    let r = u * uniform(rng, 1.0 + 1e-6, 3.0);
    let th = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    [r * th.cos(), r * th.sin()]
}
