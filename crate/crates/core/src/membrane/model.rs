use serde::{Deserialize, Serialize};

use super::channels::{gating_step, Gates};
use super::species::IonSpecies;

/// Channel model on the membrane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MembraneModel {
    /// Leak currents g_L^k (φ_M − E^k). With `fixed_reversal` the reversal
    /// potentials are held at the given values (in volts) instead of
    /// following the Nernst potentials.
    Passive {
        #[serde(default)]
        fixed_reversal: Option<Vec<f64>>,
    },
    /// Voltage-gated Na⁺ and K⁺ channels plus a constant Cl⁻ conductance,
    /// optionally on top of the leak currents.
    HodgkinHuxley { include_leak: bool },
}

impl MembraneModel {
    pub fn is_active(&self) -> bool {
        matches!(self, MembraneModel::HodgkinHuxley { .. })
    }
}

/// Gate product multiplying ḡ for a species in the active model.
fn gate_factor(name: &str, gates: Gates) -> f64 {
    match name {
        "Na" => gates.m.powi(3) * gates.h,
        "K" => gates.n.powi(4),
        _ => 1.0,
    }
}

/// Index of the sodium species, which carries the synaptic current.
pub fn sodium_index(species: &[IonSpecies]) -> Option<usize> {
    species.iter().position(|s| s.name == "Na")
}

/// Total conductance G^k of every species at one membrane point, so that
/// I_ch^k = G^k (φ_M − E^k). `g_syn` is the synaptic conductance there.
pub fn channel_conductances(model: &MembraneModel, species: &[IonSpecies], gates: Gates, g_syn: f64) -> Vec<f64> {
    let na = sodium_index(species);
    species
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let g = match model {
                MembraneModel::Passive { .. } => s.g_leak,
                MembraneModel::HodgkinHuxley { include_leak } => {
                    let leak = if *include_leak { s.g_leak } else { 0.0 };
                    leak + s.g_max * gate_factor(&s.name, gates)
                }
            };
            if Some(k) == na {
                g + g_syn
            } else {
                g
            }
        })
        .collect()
}

/// Channel currents I_ch^k and their sum.
pub fn channel_currents(conductances: &[f64], phi_m: f64, reversal: &[f64]) -> (Vec<f64>, f64) {
    let i: Vec<f64> = conductances
        .iter()
        .zip(reversal)
        .map(|(g, e)| g * (phi_m - e))
        .collect();
    let total = i.iter().sum();
    (i, total)
}

/// Advances (φ_M, m, h, n) at one membrane point over [t, t + Δt] with
/// `substeps` forward Euler steps of C_M dφ_M/dt = −I_ch, gates following
/// their rate equations. `g_syn(t)` gives the synaptic conductance.
#[allow(clippy::too_many_arguments)]
pub fn ode_substeps(
    model: &MembraneModel,
    species: &[IonSpecies],
    reversal: &[f64],
    capacitance: f64,
    mut phi_m: f64,
    mut gates: Gates,
    t: f64,
    dt: f64,
    substeps: usize,
    g_syn: impl Fn(f64) -> f64,
) -> (f64, Gates) {
    let h = dt / substeps as f64;
    for s in 0..substeps {
        let g = channel_conductances(model, species, gates, g_syn(t + s as f64 * h));
        let (_, total) = channel_currents(&g, phi_m, reversal);
        let next_gates = if model.is_active() {
            gating_step(gates, phi_m, h)
        } else {
            gates
        };
        phi_m -= h / capacitance * total;
        gates = next_gates;
    }
    (phi_m, gates)
}
