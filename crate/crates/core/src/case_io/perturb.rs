use crate::grid::Network;
use crate::rng::SplitMix64;

/// Gaussian perturbation of active loads: each `P_d` receives an additive
/// draw with mean `mean_scale * P_d` and standard deviation
/// `sd_scale * |P_d|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub seed: u64,
    pub mean_scale: f64,
    pub sd_scale: f64,
}

impl PerturbationSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            mean_scale: 0.05,
            sd_scale: 0.05,
        }
    }
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self::new(0)
    }
}

/// Perturb every active load. Bus `k` draws from stream `k` of the seed
/// (see [`crate::rng`]), so the result depends only on `(net, spec)`.
///
/// A perturbed load never changes sign: non-negative loads are clamped at 0
/// from below, and negative loads (net injections in some cases) at 0 from
/// above. Reactive loads are untouched.
pub fn perturb_loads(net: &Network, spec: &PerturbationSpec) -> Network {
    assert!(spec.sd_scale >= 0.0, "sd-scale must be non-negative");
    let loads: Vec<f64> = net
        .buses
        .iter()
        .map(|bus| {
            let pd = bus.pd;
            if pd == 0.0 {
                return 0.0;
            }
            let z = SplitMix64::stream(spec.seed, bus.index as u64).next_normal();
            let perturbed = pd + spec.mean_scale * pd + spec.sd_scale * pd.abs() * z;
            if pd > 0.0 {
                perturbed.max(0.0)
            } else {
                perturbed.min(0.0)
            }
        })
        .collect();
    net.with_active_loads(&loads)
}
