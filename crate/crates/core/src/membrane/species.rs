use serde::{Deserialize, Serialize};

use crate::error::PhysicsError;

/// Physical constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Gas constant R, J/(K mol).
    pub gas_constant: f64,
    /// Absolute temperature T, K.
    pub temperature: f64,
    /// Faraday's constant F, C/mol.
    pub faraday: f64,
    /// Membrane capacitance C_M, F/m².
    pub capacitance: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            gas_constant: 8.314,
            temperature: 300.0,
            faraday: 9.648e4,
            // 1e-5 nF/µm² = 1 µF/cm²
            capacitance: 1e-2,
        }
    }
}

impl PhysicalConstants {
    /// All constants equal to one (ψ = 1).
    pub fn unit() -> Self {
        PhysicalConstants {
            gas_constant: 1.0,
            temperature: 1.0,
            faraday: 1.0,
            capacitance: 1.0,
        }
    }

    /// ψ = RT/F, in volts.
    pub fn psi(&self) -> f64 {
        self.gas_constant * self.temperature / self.faraday
    }
}

/// One ion species with SI parameters: diffusion in m²/s, concentrations
/// in mol/m³ (= mM), conductances in S/m².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub name: String,
    pub valence: i32,
    pub diffusion_intra: f64,
    pub diffusion_extra: f64,
    pub initial_intra: f64,
    pub initial_extra: f64,
    /// Passive leak conductance g_L.
    pub g_leak: f64,
    /// Maximal conductance ḡ of the Hodgkin-Huxley channel for this ion.
    pub g_max: f64,
}

impl IonSpecies {
    pub fn z(&self) -> f64 {
        f64::from(self.valence)
    }

    pub fn diffusion(&self, intra: bool) -> f64 {
        if intra {
            self.diffusion_intra
        } else {
            self.diffusion_extra
        }
    }

    pub fn initial(&self, intra: bool) -> f64 {
        if intra {
            self.initial_intra
        } else {
            self.initial_extra
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if self.valence == 0 {
            return Err(PhysicsError::ZeroValence(self.name.clone()));
        }
        if !(self.initial_intra > 0.0 && self.initial_extra > 0.0) {
            return Err(PhysicsError::NonpositiveConcentration {
                species: self.name.clone(),
                intra: self.initial_intra,
                extra: self.initial_extra,
            });
        }
        Ok(())
    }
}

/// µm²/ms → m²/s
pub const UM2_PER_MS: f64 = 1e-9;
/// mS/cm² → S/m²
pub const MS_PER_CM2: f64 = 10.0;

/// Na⁺, K⁺ and Cl⁻ with the default physiological parameters.
pub fn default_species() -> Vec<IonSpecies> {
    let ion = |name: &str, z: i32, d: f64, ci: f64, ce: f64, gl: f64, gmax: f64| IonSpecies {
        name: name.to_string(),
        valence: z,
        diffusion_intra: d * UM2_PER_MS,
        diffusion_extra: d * UM2_PER_MS,
        initial_intra: ci,
        initial_extra: ce,
        g_leak: gl * MS_PER_CM2,
        g_max: gmax * MS_PER_CM2,
    };
    vec![
        ion("Na", 1, 1.33, 12.0, 100.0, 0.2, 120.0),
        ion("K", 1, 1.96, 125.0, 4.0, 0.8, 36.0),
        ion("Cl", -1, 2.03, 137.0, 104.0, 0.0, 0.0),
    ]
}

/// Σ_k z^k [k] for the given concentrations, in mol/m³.
pub fn charge_density(species: &[IonSpecies], conc: &[f64]) -> f64 {
    species.iter().zip(conc).map(|(s, c)| s.z() * c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_at_300_kelvin() {
        let c = PhysicalConstants::default();
        assert!((c.psi() - 8.314 * 300.0 / 9.648e4).abs() < 1e-15);
        assert!((c.psi() * 1e3 - 25.85).abs() < 0.01);
        assert_eq!(PhysicalConstants::unit().psi(), 1.0);
    }

    #[test]
    fn default_species_are_electroneutral() {
        let s = default_species();
        let ci: Vec<f64> = s.iter().map(|s| s.initial_intra).collect();
        let ce: Vec<f64> = s.iter().map(|s| s.initial_extra).collect();
        assert_eq!(charge_density(&s, &ci), 0.0);
        assert_eq!(charge_density(&s, &ce), 0.0);
        assert!(s.iter().all(|s| s.validate().is_ok()));
    }

    #[test]
    fn validation() {
        let mut s = default_species()[0].clone();
        s.valence = 0;
        assert!(matches!(s.validate(), Err(PhysicsError::ZeroValence(_))));
        let mut s = default_species()[0].clone();
        s.initial_extra = 0.0;
        assert!(matches!(s.validate(), Err(PhysicsError::NonpositiveConcentration { .. })));
    }
}
