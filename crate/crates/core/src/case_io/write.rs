use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GeneratorCost, Network};

/// Seventeen significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "Inf" } else { "-Inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Text for a file value `x` that the reader maps back to exactly `v` via
/// `to_model`. Searches a few ulps around `approx`, the naive inverse.
fn exact(v: f64, approx: f64, to_model: impl Fn(f64) -> f64) -> String {
    if !approx.is_finite() || approx == 0.0 {
        return num(approx);
    }
    let step = |x: f64, up: bool| {
        let bits = x.to_bits();
        // Moving away from zero increments the magnitude bits.
        f64::from_bits(if (x > 0.0) == up { bits + 1 } else { bits - 1 })
    };
    let (mut lo, mut hi) = (approx, approx);
    for _ in 0..8 {
        for c in [lo, hi] {
            if to_model(c) == v {
                return num(c);
            }
        }
        lo = step(lo, false);
        hi = step(hi, true);
    }
    num(approx)
}

/// Per-unit value `v` written in MW / MVA units.
fn mw(v: f64, base: f64) -> String {
    exact(v, v * base, |c| c / base)
}

/// Radian value `v` written in degrees.
fn deg(v: f64) -> String {
    exact(v, v.to_degrees(), f64::to_radians)
}

/// Render `net` as a MATPOWER version 2 case.
pub fn format_matpower(net: &Network) -> String {
    let base = net.base_mva;
    let name = if net.name.is_empty() { "case" } else { net.name.as_str() };
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {name}");
    out.push_str("mpc.version = '2';\n");
    let _ = writeln!(out, "mpc.baseMVA = {};", num(base));

    out.push_str("\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n");
    for bus in &net.buses {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t1\t0\t{}\t1\t{}\t{};",
            bus.external_id,
            bus.kind,
            mw(bus.pd, base),
            mw(bus.qd, base),
            mw(bus.gs, base),
            mw(bus.bs, base),
            num(bus.base_kv),
            num(bus.vmax),
            num(bus.vmin),
        );
    }
    out.push_str("];\n");

    out.push_str("\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
    for gen in &net.generators {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{};",
            net.buses[gen.bus].external_id,
            mw(gen.pg0, base),
            mw(gen.qg0, base),
            mw(gen.qmax, base),
            mw(gen.qmin, base),
            num(gen.vg),
            num(base),
            mw(gen.pmax, base),
            mw(gen.pmin, base),
        );
    }
    out.push_str("];\n");

    out.push_str(
        "\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\nmpc.branch = [\n",
    );
    for br in &net.branches {
        let rate = if br.rate.is_finite() { mw(br.rate, base) } else { num(0.0) };
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t{}\t{}\t1\t{}\t{};",
            net.buses[br.from].external_id,
            net.buses[br.to].external_id,
            num(br.r),
            num(br.x),
            num(br.b_charging),
            rate,
            num(br.tap),
            deg(br.shift),
            deg(br.angmin),
            deg(br.angmax),
        );
    }
    out.push_str("];\n");

    out.push_str("\nmpc.gencost = [\n");
    for gen in &net.generators {
        match &gen.cost {
            GeneratorCost::Quadratic { c2, c1, c0 } => {
                let _ = writeln!(out, "\t2\t0\t0\t3\t{}\t{}\t{};", num(*c2), num(*c1), num(*c0));
            }
            GeneratorCost::PiecewiseLinear { points } => {
                let _ = write!(out, "\t1\t0\t0\t{}", points.len());
                for (p, f) in points {
                    let _ = write!(out, "\t{}\t{}", num(*p), num(*f));
                }
                out.push_str(";\n");
            }
        }
    }
    out.push_str("];\n");
    out
}

pub fn write_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_matpower(net)).map_err(|e| Error::io(path, e))
}
