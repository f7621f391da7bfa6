//! Per-unit network model, branch admittances and loss arithmetic.
//!
//! A [`Network`] is immutable once built. Every quantity is stored in
//! per-unit on the system MVA base, except generator cost coefficients which
//! keep their MATPOWER meaning (currency per MW-hour terms) and are rescaled
//! by [`GeneratorCost::per_unit_polynomial`] when a model is built.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One bus of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// Dense position of the bus in [`Network::buses`].
    pub index: usize,
    /// Identifier as written in the source case file.
    pub external_id: i64,
    /// MATPOWER bus type (1 PQ, 2 PV, 3 reference, 4 isolated).
    pub kind: u8,
    pub pd: f64,
    pub qd: f64,
    /// Shunt conductance, per-unit power consumed at `|V| = 1`.
    pub gs: f64,
    /// Shunt susceptance, per-unit reactive power injected at `|V| = 1`.
    pub bs: f64,
    pub vmin: f64,
    pub vmax: f64,
    /// Kept for round-tripping; not used by the relaxation.
    pub base_kv: f64,
}

/// A transmission line or transformer in the MATPOWER pi-model.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b_charging: f64,
    /// Shunt conductance of the pi-model. MATPOWER never supplies one, so
    /// parsed cases always carry zero here.
    pub g_shunt: f64,
    /// Off-nominal tap magnitude, `> 0`.
    pub tap: f64,
    /// Phase shift in radians.
    pub shift: f64,
    /// Thermal limit on apparent power in per-unit; `f64::INFINITY` when the
    /// case carries `rateA = 0`.
    pub rate: f64,
    /// Angle-difference bounds in radians. Stored for reporting only.
    pub angmin: f64,
    pub angmax: f64,
}

impl Branch {
    /// A branch with no charging, no tap and no thermal limit.
    pub fn simple(from: usize, to: usize, r: f64, x: f64) -> Self {
        Self {
            from,
            to,
            r,
            x,
            b_charging: 0.0,
            g_shunt: 0.0,
            tap: 1.0,
            shift: 0.0,
            rate: f64::INFINITY,
            angmin: -std::f64::consts::TAU,
            angmax: std::f64::consts::TAU,
        }
    }

    pub fn has_limit(&self) -> bool {
        self.rate.is_finite()
    }

    /// Series admittance `y = 1 / (r + jx)`.
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }

    /// Total pi-model shunt admittance `g_sh + j b_sh`.
    pub fn shunt_admittance(&self) -> Complex64 {
        Complex64::new(self.g_shunt, self.b_charging)
    }
}

/// Convex generator cost as written in the case file, in MW units.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorCost {
    /// `c2 * p^2 + c1 * p + c0` with `p` in MW.
    Quadratic { c2: f64, c1: f64, c0: f64 },
    /// Breakpoints `(p, f)` with `p` in MW, strictly increasing.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl GeneratorCost {
    pub fn zero() -> Self {
        GeneratorCost::Quadratic {
            c2: 0.0,
            c1: 0.0,
            c0: 0.0,
        }
    }

    /// Evaluate at `pg` given in per-unit on `base_mva`.
    pub fn evaluate(&self, pg: f64, base_mva: f64) -> f64 {
        let p = pg * base_mva;
        match self {
            GeneratorCost::Quadratic { c2, c1, c0 } => c2 * p * p + c1 * p + c0,
            GeneratorCost::PiecewiseLinear { points } => {
                // Convexity makes the max over segment extensions the curve
                // itself on the breakpoint range.
                points
                    .windows(2)
                    .map(|w| {
                        let (p0, f0) = w[0];
                        let (p1, f1) = w[1];
                        f0 + (f1 - f0) / (p1 - p0) * (p - p0)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Quadratic coefficients rescaled to a per-unit argument:
    /// `(c2 * base^2, c1 * base, c0)`. `None` for piecewise-linear costs.
    pub fn per_unit_polynomial(&self, base_mva: f64) -> Option<(f64, f64, f64)> {
        match self {
            GeneratorCost::Quadratic { c2, c1, c0 } => {
                Some((c2 * base_mva * base_mva, c1 * base_mva, *c0))
            }
            GeneratorCost::PiecewiseLinear { .. } => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            GeneratorCost::Quadratic { c2, .. } => {
                if *c2 < 0.0 {
                    return Err(Error::InvalidData(format!(
                        "quadratic cost coefficient {c2} is negative"
                    )));
                }
            }
            GeneratorCost::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidData(
                        "piecewise-linear cost needs at least two breakpoints".into(),
                    ));
                }
                let mut last_slope = f64::NEG_INFINITY;
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidData(
                            "piecewise-linear breakpoints must be strictly increasing".into(),
                        ));
                    }
                    let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    if slope < last_slope - 1e-9 * slope.abs().max(1.0) {
                        return Err(Error::InvalidData(
                            "piecewise-linear cost is not convex".into(),
                        ));
                    }
                    last_slope = slope;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub cost: GeneratorCost,
    /// Setpoints from the case file, kept for round-tripping.
    pub pg0: f64,
    pub qg0: f64,
    pub vg: f64,
}

/// The immutable per-unit grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    incidence: Vec<Vec<usize>>,
    gens_at: Vec<Vec<usize>>,
}

impl Network {
    /// Assemble a network and check the cross-references between tables.
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Result<Self> {
        if !(base_mva > 0.0) {
            return Err(Error::InvalidData(format!("baseMVA must be positive, got {base_mva}")));
        }
        let n = buses.len();
        for (i, bus) in buses.iter().enumerate() {
            if bus.index != i {
                return Err(Error::InvalidData(format!(
                    "bus at position {i} carries index {}",
                    bus.index
                )));
            }
            if bus.vmin < 0.0 || bus.vmin > bus.vmax {
                return Err(Error::InvalidData(format!(
                    "bus {}: Vmin {} > Vmax {}",
                    bus.external_id, bus.vmin, bus.vmax
                )));
            }
        }
        let mut incidence = vec![Vec::new(); n];
        for (e, br) in branches.iter().enumerate() {
            if br.from >= n || br.to >= n {
                return Err(Error::InvalidData(format!(
                    "branch {e} references a bus outside 0..{n}"
                )));
            }
            if !(br.tap > 0.0) {
                return Err(Error::InvalidData(format!("branch {e}: tap ratio {} <= 0", br.tap)));
            }
            if br.r * br.r + br.x * br.x == 0.0 {
                return Err(Error::InvalidData(format!("branch {e}: zero series impedance")));
            }
            incidence[br.from].push(e);
            if br.to != br.from {
                incidence[br.to].push(e);
            }
        }
        let mut gens_at = vec![Vec::new(); n];
        for (g, gen) in generators.iter().enumerate() {
            if gen.bus >= n {
                return Err(Error::InvalidData(format!("generator {g} sits on unknown bus")));
            }
            if gen.pmin > gen.pmax {
                return Err(Error::InvalidData(format!(
                    "generator {g}: Pmin {} > Pmax {}",
                    gen.pmin, gen.pmax
                )));
            }
            if gen.qmin > gen.qmax {
                return Err(Error::InvalidData(format!(
                    "generator {g}: Qmin {} > Qmax {}",
                    gen.qmin, gen.qmax
                )));
            }
            gen.cost.validate()?;
            gens_at[gen.bus].push(g);
        }
        Ok(Self {
            name: name.into(),
            base_mva,
            buses,
            branches,
            generators,
            incidence,
            gens_at,
        })
    }

    /// Branches incident to `bus` (the set delta(k)).
    pub fn incident_branches(&self, bus: usize) -> &[usize] {
        &self.incidence[bus]
    }

    pub fn generators_at(&self, bus: usize) -> &[usize] {
        &self.gens_at[bus]
    }

    pub fn total_active_load(&self) -> f64 {
        self.buses.iter().map(|b| b.pd).sum()
    }

    /// A copy with the active loads replaced.
    pub fn with_active_loads(&self, loads: &[f64]) -> Self {
        let mut net = self.clone();
        for (bus, &pd) in net.buses.iter_mut().zip(loads) {
            bus.pd = pd;
        }
        net
    }
}

/// The 2x2 branch admittance matrix split into real and imaginary parts,
/// plus the coefficients that express `|I_km|^2` linearly in
/// `(v_k^2, v_m^2, c_km, s_km)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub gkk: f64,
    pub bkk: f64,
    pub gkm: f64,
    pub bkm: f64,
    pub gmk: f64,
    pub bmk: f64,
    pub gmm: f64,
    pub bmm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
}

/// Admittance matrix with tap and shift on the from side:
///
/// ```text
/// Y = [ (y + y_sh/2) / tau^2     -y / (tau e^{-j sigma}) ]
///     [ -y / (tau e^{j sigma})    y + y_sh/2             ]
/// ```
pub fn branch_admittance(br: &Branch) -> BranchAdmittance {
    let y = br.series_admittance();
    let ysh = br.shunt_admittance();
    let tau = br.tap;
    let sigma = br.shift;
    let half_sh = ysh * 0.5;

    let ykk = (y + half_sh) / (tau * tau);
    let ykm = -y / (Complex64::from_polar(tau, -sigma));
    let ymk = -y / (Complex64::from_polar(tau, sigma));
    let ymm = y + half_sh;

    let (g, b) = (y.re, y.im);
    let (gsh, bsh) = (ysh.re, ysh.im);
    let y2 = g * g + b * b;
    let cross_re = g * gsh + b * bsh;
    let cross_im = b * gsh - g * bsh;
    let (sin_s, cos_s) = sigma.sin_cos();
    let tau2 = tau * tau;
    let tau3 = tau2 * tau;

    BranchAdmittance {
        gkk: ykk.re,
        bkk: ykk.im,
        gkm: ykm.re,
        bkm: ykm.im,
        gmk: ymk.re,
        bmk: ymk.im,
        gmm: ymm.re,
        bmm: ymm.im,
        alpha: (y2 + cross_re + (gsh * gsh + bsh * bsh) / 4.0) / (tau2 * tau2),
        beta: y2 / tau2,
        gamma: (cos_s * (-2.0 * y2 - cross_re) + sin_s * cross_im) / tau3,
        zeta: (sin_s * (-2.0 * y2 - cross_re) - cos_s * cross_im) / tau3,
    }
}

/// `alpha v_k^2 + beta v_m^2 + gamma c + zeta s`.
pub fn i2_value(adm: &BranchAdmittance, vk2: f64, vm2: f64, c: f64, s: f64) -> f64 {
    adm.alpha * vk2 + adm.beta * vm2 + adm.gamma * c + adm.zeta * s
}

/// Active-power loss `P_km + P_mk`.
pub fn branch_loss(pkm: f64, pmk: f64) -> f64 {
    pkm + pmk
}

/// The four branch flows as linear functions of the lifted variables.
///
/// With `c + js = V_k conj(V_m)` these are the real and imaginary parts of
/// `S_km = V_k conj(I_km)` and `S_mk = V_m conj(I_mk)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCoefficients {
    /// Coefficients on `(v_k^2, v_m^2, c, s)` for each flow.
    pub p_km: [f64; 4],
    pub q_km: [f64; 4],
    pub p_mk: [f64; 4],
    pub q_mk: [f64; 4],
}

impl BranchAdmittance {
    pub fn flow_coefficients(&self) -> FlowCoefficients {
        FlowCoefficients {
            p_km: [self.gkk, 0.0, self.gkm, self.bkm],
            q_km: [-self.bkk, 0.0, -self.bkm, self.gkm],
            p_mk: [0.0, self.gmm, self.gmk, -self.bmk],
            q_mk: [0.0, -self.bmm, -self.bmk, -self.gmk],
        }
    }

    /// `true` when both self-conductances are non-negative, which is when the
    /// static loss row `P_km + P_mk >= 0` is applied.
    pub fn has_nonnegative_self_conductance(&self) -> bool {
        self.gkk >= 0.0 && self.gmm >= 0.0
    }
}

impl FlowCoefficients {
    pub fn eval(coef: &[f64; 4], vk2: f64, vm2: f64, c: f64, s: f64) -> f64 {
        coef[0] * vk2 + coef[1] * vm2 + coef[2] * c + coef[3] * s
    }
}
