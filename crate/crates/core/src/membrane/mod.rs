//! Ion species and membrane-local physics: reversal potentials, channel
//! currents, gating kinetics, stimulus and capacitive current splitting.

mod channels;
mod model;
mod species;
mod splitting;

pub use channels::{
    gating_rates, gating_step, hh_currents, nernst, passive_current, synaptic_current, Gates, GatingRates,
    StimulusProfile, StimulusSpec,
};
pub use model::{channel_conductances, channel_currents, ode_substeps, sodium_index, MembraneModel};
pub use species::{charge_density, default_species, IonSpecies, PhysicalConstants, MS_PER_CM2, UM2_PER_MS};
pub use splitting::{bulk_conductivity, capacitive_fraction, membrane_flux_split};
