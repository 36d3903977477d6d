use crate::error::Error;
use crate::fespace::{integral, Field, Side};
use crate::membrane::{capacitive_fraction, nernst, Gates, MembraneModel};

use super::problem::{Discretization, Problem};

/// Solution at one time level.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub step: usize,
    /// Time in seconds.
    pub time: f64,
    pub conc_intra: Vec<Field>,
    pub conc_extra: Vec<Field>,
    pub phi_intra: Field,
    pub phi_extra: Field,
    /// Total membrane current I_M per interface dof.
    pub membrane_current: Vec<f64>,
    /// φ_M per interface dof.
    pub phi_m: Vec<f64>,
    pub gates: Vec<Gates>,
    /// Channel current I_ch^k per species and interface dof, as used in the
    /// last step.
    pub channel_current: Vec<Vec<f64>>,
    /// Value of the grounding multiplier c_e.
    pub multiplier: f64,
}

impl SystemState {
    /// Uniform concentrations, φ_e = 0, φ_i = φ_M = resting potential and
    /// gates at their steady state.
    pub fn resting(disc: &Discretization, problem: &Problem) -> Self {
        let v0 = problem.resting_potential;
        let nq = disc.membrane.ndofs();
        SystemState {
            step: 0,
            time: 0.0,
            conc_intra: problem
                .species
                .iter()
                .map(|s| Field::constant(&disc.intra, s.initial_intra, "mol/m^3"))
                .collect(),
            conc_extra: problem
                .species
                .iter()
                .map(|s| Field::constant(&disc.extra, s.initial_extra, "mol/m^3"))
                .collect(),
            phi_intra: Field::constant(&disc.intra, v0, "V"),
            phi_extra: Field::zeros(&disc.extra, "V"),
            membrane_current: vec![0.0; nq],
            phi_m: vec![v0; nq],
            gates: vec![Gates::steady_state(v0); nq],
            channel_current: vec![vec![0.0; nq]; problem.species.len()],
            multiplier: 0.0,
        }
    }

    pub fn conc(&self, side: Side) -> &[Field] {
        match side {
            Side::Intra => &self.conc_intra,
            Side::Extra => &self.conc_extra,
        }
    }

    pub fn phi(&self, side: Side) -> &Field {
        match side {
            Side::Intra => &self.phi_intra,
            Side::Extra => &self.phi_extra,
        }
    }

    /// Traces of all concentrations of one side on the interface dofs.
    pub fn conc_traces(&self, disc: &Discretization, side: Side) -> Vec<Vec<f64>> {
        self.conc(side)
            .iter()
            .map(|f| disc.trace.restrict(&f.values, side))
            .collect()
    }

    /// Reversal potentials E^k per species and interface dof.
    pub fn reversal_potentials(&self, disc: &Discretization, problem: &Problem) -> Result<Vec<Vec<f64>>, Error> {
        if let MembraneModel::Passive {
            fixed_reversal: Some(e),
        } = &problem.model
        {
            return Ok(e.iter().map(|&e| vec![e; disc.membrane.ndofs()]).collect());
        }
        let ci = self.conc_traces(disc, Side::Intra);
        let ce = self.conc_traces(disc, Side::Extra);
        problem
            .species
            .iter()
            .enumerate()
            .map(|(k, s)| {
                ci[k]
                    .iter()
                    .zip(&ce[k])
                    .map(|(&a, &b)| nernst(s, a, b, &problem.constants).map_err(Error::from))
                    .collect()
            })
            .collect()
    }

    /// Capacitive fractions α_r^k per species and interface dof.
    pub fn capacitive_fractions(&self, disc: &Discretization, problem: &Problem, side: Side) -> Result<Vec<Vec<f64>>, Error> {
        let tr = self.conc_traces(disc, side);
        let nq = disc.membrane.ndofs();
        let mut out = vec![vec![0.0; nq]; problem.species.len()];
        let mut c = vec![0.0; problem.species.len()];
        for d in 0..nq {
            for (k, t) in tr.iter().enumerate() {
                c[k] = t[d];
            }
            let a = capacitive_fraction(&problem.species, &c, side == Side::Intra)?;
            for (k, v) in a.into_iter().enumerate() {
                out[k][d] = v;
            }
        }
        Ok(out)
    }

    /// Σ_r ∫_{Ω_r} [k] dx for every species.
    pub fn ion_content(&self) -> Vec<f64> {
        self.conc_intra
            .iter()
            .zip(&self.conc_extra)
            .map(|(a, b)| integral(a) + integral(b))
            .collect()
    }

    /// Smallest concentration value of any species in either region.
    pub fn min_concentration(&self) -> f64 {
        self.conc_intra
            .iter()
            .chain(&self.conc_extra)
            .flat_map(|f| f.values.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}
