use crate::error::PhysicsError;

use super::species::{IonSpecies, PhysicalConstants};

/// Fractions α^k = D^k (z^k)² [k] / Σ_l D^l (z^l)² [l] of the capacitive
/// current carried by each species, normalized to sum to one.
pub fn capacitive_fraction(species: &[IonSpecies], conc: &[f64], intra: bool) -> Result<Vec<f64>, PhysicsError> {
    let weights: Vec<f64> = species
        .iter()
        .zip(conc)
        .map(|(s, &c)| s.diffusion(intra) * s.z() * s.z() * c)
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total != 0.0 && total.is_finite()) {
        return Err(PhysicsError::ZeroDenominator);
    }
    let mut alpha: Vec<f64> = weights.iter().map(|w| w / total).collect();
    // absorb the rounding residue in the largest fraction
    let residue = 1.0 - alpha.iter().sum::<f64>();
    if let Some(big) = (0..alpha.len()).max_by(|&a, &b| alpha[a].total_cmp(&alpha[b])) {
        alpha[big] += residue;
    }
    Ok(alpha)
}

/// σ = (F/ψ) Σ_k D^k (z^k)² [k], in S/m.
pub fn bulk_conductivity(species: &[IonSpecies], conc: &[f64], intra: bool, constants: &PhysicalConstants) -> f64 {
    let sum: f64 = species
        .iter()
        .zip(conc)
        .map(|(s, &c)| s.diffusion(intra) * s.z() * s.z() * c)
        .sum();
    constants.faraday / constants.psi() * sum
}

/// Normal ion flux J^k·n_r through the membrane on the side `intra`,
/// given the total membrane current, the channel current of species k,
/// the total channel current and the capacitive fraction.
pub fn membrane_flux_split(
    i_m: f64,
    i_ch_k: f64,
    i_ch_total: f64,
    alpha: f64,
    z: f64,
    faraday: f64,
    intra: bool,
) -> f64 {
    let j = (i_ch_k + alpha * (i_m - i_ch_total)) / (faraday * z);
    if intra {
        j
    } else {
        -j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membrane::species::default_species;

    #[test]
    fn fractions_with_default_values() {
        let s = default_species();
        let ci: Vec<f64> = s.iter().map(|s| s.initial_intra).collect();
        let a = capacitive_fraction(&s, &ci, true).unwrap();
        assert!((a[0] - 15.96 / 539.07).abs() < 1e-4);
        assert_eq!(a.iter().sum::<f64>(), 1.0);
        let one = capacitive_fraction(&s[..1], &[3.0], false).unwrap();
        assert_eq!(one, vec![1.0]);
        assert_eq!(capacitive_fraction(&s, &[0.0, 0.0, 0.0], true), Err(PhysicsError::ZeroDenominator));
    }

    #[test]
    fn conductivities() {
        let s = default_species();
        let c = PhysicalConstants::default();
        let ci: Vec<f64> = s.iter().map(|s| s.initial_intra).collect();
        let ce: Vec<f64> = s.iter().map(|s| s.initial_extra).collect();
        // S/m equals µS/µm
        assert!((bulk_conductivity(&s, &ci, true, &c) - 2.01).abs() < 0.02);
        assert!((bulk_conductivity(&s, &ce, false, &c) - 1.31).abs() < 0.02);
        assert_eq!(bulk_conductivity(&s, &[0.0; 3], true, &c), 0.0);
    }

    #[test]
    fn flux_split_cases() {
        let f = 9.648e4;
        // no capacitive part when I_M = I_ch
        let j = membrane_flux_split(2.0, 0.7, 2.0, 0.3, 1.0, f, true);
        assert!((j - 0.7 / f).abs() < 1e-18);
        let single = membrane_flux_split(1.5, 0.0, 0.0, 1.0, -1.0, f, true);
        assert!((single - 1.5 / (f * -1.0)).abs() < 1e-18);
        assert_eq!(membrane_flux_split(1.5, 0.2, 0.4, 0.5, 1.0, f, false), -membrane_flux_split(1.5, 0.2, 0.4, 0.5, 1.0, f, true));
    }
}
