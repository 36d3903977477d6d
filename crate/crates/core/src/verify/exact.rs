use std::f64::consts::PI;

use crate::fespace::Side;

/// Valences of Na⁺, K⁺, Cl⁻.
pub const VALENCES: [f64; 3] = [1.0, 1.0, -1.0];
pub const SPECIES_NAMES: [&str; 3] = ["Na", "K", "Cl"];

/// (a, b) of [k]_i = a + b S and [k]_e = a + b S, with
/// S = sin 2πx sin 2πy e^{−t}.
const INTRA: [(f64, f64); 3] = [(0.7, 0.3), (0.3, 0.3), (1.0, 0.6)];
const EXTRA: [(f64, f64); 3] = [(1.0, 0.6), (1.0, 0.2), (2.0, 0.8)];

/// Manufactured solution on the unit square with all physical constants
/// equal to one: trigonometric concentrations, φ_i = cos 2πx cos 2πy
/// (1 + e^{−t}), φ_e = cos 2πx cos 2πy, a passive membrane with
/// I_ch = φ_M shared equally by the three species.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolution;

struct Trig {
    sx: f64,
    cx: f64,
    sy: f64,
    cy: f64,
    et: f64,
}

fn trig(t: f64, x: &[f64; 3]) -> Trig {
    let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
    let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
    Trig {
        sx,
        cx,
        sy,
        cy,
        et: (-t).exp(),
    }
}

fn coeffs(k: usize, side: Side) -> (f64, f64) {
    match side {
        Side::Intra => INTRA[k],
        Side::Extra => EXTRA[k],
    }
}

impl ExactSolution {
    pub fn num_species(&self) -> usize {
        3
    }

    pub fn conc(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        let (a, b) = coeffs(k, side);
        let s = trig(t, x);
        a + b * s.sx * s.sy * s.et
    }

    pub fn conc_grad(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> [f64; 3] {
        let (_, b) = coeffs(k, side);
        let s = trig(t, x);
        let f = 2.0 * PI * b * s.et;
        [f * s.cx * s.sy, f * s.sx * s.cy, 0.0]
    }

    pub fn conc_dt(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        let (_, b) = coeffs(k, side);
        let s = trig(t, x);
        -b * s.sx * s.sy * s.et
    }

    /// Time factor g(t) of φ_r = g(t) cos 2πx cos 2πy.
    fn phi_factor(side: Side, t: f64) -> f64 {
        match side {
            Side::Intra => 1.0 + (-t).exp(),
            Side::Extra => 1.0,
        }
    }

    pub fn phi(&self, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        let s = trig(t, x);
        Self::phi_factor(side, t) * s.cx * s.cy
    }

    pub fn phi_grad(&self, side: Side, t: f64, x: &[f64; 3]) -> [f64; 3] {
        let s = trig(t, x);
        let g = -2.0 * PI * Self::phi_factor(side, t);
        [g * s.sx * s.cy, g * s.cx * s.sy, 0.0]
    }

    pub fn phi_m(&self, t: f64, x: &[f64; 3]) -> f64 {
        self.phi(Side::Intra, t, x) - self.phi(Side::Extra, t, x)
    }

    pub fn phi_m_dt(&self, t: f64, x: &[f64; 3]) -> f64 {
        -self.phi_m(t, x)
    }

    /// J = −∇c − z c ∇φ.
    pub fn flux(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> [f64; 3] {
        let gc = self.conc_grad(k, side, t, x);
        let gp = self.phi_grad(side, t, x);
        let zc = VALENCES[k] * self.conc(k, side, t, x);
        [-gc[0] - zc * gp[0], -gc[1] - zc * gp[1], 0.0]
    }

    /// ∇·J, expanded by hand.
    pub fn flux_div(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        let (a, b) = coeffs(k, side);
        let z = VALENCES[k];
        let g = Self::phi_factor(side, t);
        let s = trig(t, x);
        let sxy = s.sx * s.sy * s.et;
        let c = a + b * sxy;
        let eight_pi2 = 8.0 * PI * PI;
        eight_pi2 * b * sxy
            + eight_pi2 * z * b * g * s.et * s.sx * s.cx * s.sy * s.cy
            + eight_pi2 * z * g * c * s.cx * s.cy
    }

    /// f = ∂[k]/∂t + ∇·J.
    pub fn conc_source(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        self.conc_dt(k, side, t, x) + self.flux_div(k, side, t, x)
    }

    /// f_φ = −Σ_k z^k ∇·J^k.
    pub fn potential_source(&self, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        -(0..3).map(|k| VALENCES[k] * self.flux_div(k, side, t, x)).sum::<f64>()
    }

    fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    /// I_M = Σ z J_i·n_i, the current carried out of Ω_i.
    pub fn membrane_current(&self, t: f64, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        (0..3)
            .map(|k| VALENCES[k] * Self::dot(&self.flux(k, Side::Intra, t, x), n))
            .sum()
    }

    /// I_ch^k = φ_M / 3.
    pub fn channel_current(&self, _k: usize, t: f64, x: &[f64; 3]) -> f64 {
        self.phi_m(t, x) / 3.0
    }

    /// α_r^k = z² c / Σ z² c.
    pub fn capacitive_fraction(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        let w = |l: usize| VALENCES[l] * VALENCES[l] * self.conc(l, side, t, x);
        w(k) / (0..3).map(w).sum::<f64>()
    }

    /// Modelled flux J^k·n_r on Γ for the exact fields, with n = n_i.
    pub fn modelled_membrane_flux(&self, k: usize, side: Side, t: f64, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        let i_m = self.membrane_current(t, x, n);
        let i_ch = self.phi_m(t, x);
        let a = self.capacitive_fraction(k, side, t, x);
        let j = (self.channel_current(k, t, x) + a * (i_m - i_ch)) / VALENCES[k];
        match side {
            Side::Intra => j,
            Side::Extra => -j,
        }
    }

    /// Exact minus modelled J^k·n_r on Γ.
    pub fn membrane_flux_mismatch(&self, k: usize, side: Side, t: f64, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        let j = self.flux(k, side, t, x);
        let jn = match side {
            Side::Intra => Self::dot(&j, n),
            Side::Extra => -Self::dot(&j, n),
        };
        jn - self.modelled_membrane_flux(k, side, t, x, n)
    }

    /// Mismatch of the charge flux condition on the extracellular side:
    /// −Σ z J_e·n_e − I_M.
    pub fn charge_flux_mismatch(&self, t: f64, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        let je: f64 = (0..3)
            .map(|k| VALENCES[k] * Self::dot(&self.flux(k, Side::Extra, t, x), n))
            .sum();
        je - self.membrane_current(t, x, n)
    }

    /// ∂φ_M/∂t − I_M + I_ch with C_M = 1.
    pub fn capacitor_residual(&self, t: f64, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        self.phi_m_dt(t, x) - self.membrane_current(t, x, n) + self.phi_m(t, x)
    }
}
