use serde::{Deserialize, Serialize};

use crate::error::PhysicsError;

use super::species::{IonSpecies, PhysicalConstants};

/// Reversal potential E = ψ/z · ln([k]_e / [k]_i), in volts.
pub fn nernst(
    species: &IonSpecies,
    intra: f64,
    extra: f64,
    constants: &PhysicalConstants,
) -> Result<f64, PhysicsError> {
    if species.valence == 0 {
        return Err(PhysicsError::ZeroValence(species.name.clone()));
    }
    if !(intra > 0.0 && extra > 0.0) {
        return Err(PhysicsError::NonpositiveConcentration {
            species: species.name.clone(),
            intra,
            extra,
        });
    }
    Ok(constants.psi() / species.z() * (extra / intra).ln())
}

/// Leak current g_L (φ_M − E).
pub fn passive_current(species: &IonSpecies, phi_m: f64, reversal: f64) -> f64 {
    species.g_leak * (phi_m - reversal)
}

/// Hodgkin-Huxley gating variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub m: f64,
    pub h: f64,
    pub n: f64,
}

impl Gates {
    pub fn steady_state(phi_m: f64) -> Self {
        let r = gating_rates(phi_m);
        Gates {
            m: r.m.0 / (r.m.0 + r.m.1),
            h: r.h.0 / (r.h.0 + r.h.1),
            n: r.n.0 / (r.n.0 + r.n.1),
        }
    }
}

/// Opening and closing rates (α, β) of each gate, in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingRates {
    pub m: (f64, f64),
    pub h: (f64, f64),
    pub n: (f64, f64),
}

/// x / (eˣ − 1), continuous through x = 0.
fn exprel_inv(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - 0.5 * x + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// Rest potential of the classical rate functions, in mV.
const HH_REST_MV: f64 = -65.0;

/// Classical squid-axon rate functions, with the depolarization measured
/// from a −65 mV rest. Takes φ_M in volts and returns rates in 1/s.
pub fn gating_rates(phi_m: f64) -> GatingRates {
    let v = phi_m * 1e3 - HH_REST_MV;
    let per_ms = 1e3;
    GatingRates {
        m: (
            per_ms * exprel_inv((25.0 - v) / 10.0),
            per_ms * 4.0 * (-v / 18.0).exp(),
        ),
        h: (
            per_ms * 0.07 * (-v / 20.0).exp(),
            per_ms / (((30.0 - v) / 10.0).exp() + 1.0),
        ),
        n: (
            per_ms * 0.1 * exprel_inv((10.0 - v) / 10.0),
            per_ms * 0.125 * (-v / 80.0).exp(),
        ),
    }
}

/// One forward Euler step of every gate, clamped to [0, 1].
pub fn gating_step(gates: Gates, phi_m: f64, dt: f64) -> Gates {
    let r = gating_rates(phi_m);
    let step = |p: f64, (a, b): (f64, f64)| (p + dt * (a * (1.0 - p) - b * p)).clamp(0.0, 1.0);
    Gates {
        m: step(gates.m, r.m),
        h: step(gates.h, r.h),
        n: step(gates.n, r.n),
    }
}

/// Voltage-gated currents (I_Na, I_K, I_Cl) = (ḡ_Na m³h (φ−E_Na),
/// ḡ_K n⁴ (φ−E_K), ḡ_Cl (φ−E_Cl)), given ḡ = (ḡ_Na, ḡ_K, ḡ_Cl).
pub fn hh_currents(phi_m: f64, gates: Gates, reversal: [f64; 3], g_max: [f64; 3]) -> [f64; 3] {
    [
        g_max[0] * gates.m.powi(3) * gates.h * (phi_m - reversal[0]),
        g_max[1] * gates.n.powi(4) * (phi_m - reversal[1]),
        g_max[2] * (phi_m - reversal[2]),
    ]
}

/// Time course of a synaptic conductance after its onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusProfile {
    /// exp(−(t − t₀)/α)
    Decaying,
    /// exp((t − t₀)/α)
    Growing,
}

/// Synaptic input on the membranes with the given labels, restricted to
/// the window `window` along `axis`. SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub g_syn: f64,
    pub time_constant: f64,
    pub onsets: Vec<f64>,
    pub axis: usize,
    pub window: (f64, f64),
    pub labels: Vec<u32>,
    pub profile: StimulusProfile,
}

impl StimulusSpec {
    pub fn in_window(&self, x: &[f64; 3]) -> bool {
        let p = x[self.axis];
        let tol = 1e-9 * (self.window.1 - self.window.0).abs();
        p >= self.window.0 - tol && p <= self.window.1 + tol
    }

    /// g_syn Σ_{t₀ ≤ t} f((t − t₀)/α) at a point; zero outside the window.
    pub fn conductance(&self, t: f64, x: &[f64; 3], label: u32) -> f64 {
        if !self.labels.contains(&label) || !self.in_window(x) {
            return 0.0;
        }
        self.onsets
            .iter()
            .filter(|&&t0| t >= t0)
            .map(|&t0| {
                let s = (t - t0) / self.time_constant;
                match self.profile {
                    StimulusProfile::Decaying => (-s).exp(),
                    StimulusProfile::Growing => s.exp(),
                }
            })
            .sum::<f64>()
            * self.g_syn
    }
}

/// I_syn = g_syn H(x) f(t) (φ_M − E_Na).
pub fn synaptic_current(t: f64, phi_m: f64, x: &[f64; 3], label: u32, stimulus: &StimulusSpec, e_na: f64) -> f64 {
    stimulus.conductance(t, x, label) * (phi_m - e_na)
}
