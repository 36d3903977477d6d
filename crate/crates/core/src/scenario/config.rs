#![allow(non_snake_case)]

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{build_box_mesh, tag_subdomains, AxisBox, Mesh};
use crate::knp::{BoundaryCondition, Framework, Grounding, Problem};
use crate::membrane::{
    bulk_conductivity, default_species, IonSpecies, MembraneModel, PhysicalConstants, StimulusProfile, StimulusSpec,
    MS_PER_CM2, UM2_PER_MS,
};

pub const UM: f64 = 1e-6;
pub const MS: f64 = 1e-3;
pub const MV: f64 = 1e-3;
/// µF/cm² → F/m²
pub const UF_PER_CM2: f64 = 1e-2;

/// A complete simulation set-up in laboratory units (µm, ms,
/// mV, mM, mS/cm², µm²/ms). Every key carries its unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub framework: FrameworkKind,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default = "default_species_config")]
    pub species: Vec<SpeciesConfig>,
    #[serde(default)]
    pub membrane: MembraneConfig,
    #[serde(default)]
    pub stimuli: Vec<StimulusConfig>,
    #[serde(default)]
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub probes: Vec<ProbeConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub emi: EmiConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameworkKind {
    #[default]
    KnpEmi,
    Emi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellBox {
    pub lower_um: Vec<f64>,
    pub upper_um: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub lower_um: Vec<f64>,
    pub upper_um: Vec<f64>,
    /// Cells (grid squares or cubes) per axis.
    pub resolution: Vec<usize>,
    #[serde(default = "one")]
    pub degree: usize,
    #[serde(default)]
    pub cells: Vec<CellBox>,
}

fn one() -> usize {
    1
}

impl GeometryConfig {
    pub fn dimension(&self) -> usize {
        self.lower_um.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dimension()
            && p.iter()
                .zip(self.lower_um.iter().zip(&self.upper_um))
                .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(rename = "gas_constant_J_per_K_mol")]
    pub gas_constant: f64,
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    #[serde(rename = "faraday_C_per_mol")]
    pub faraday: f64,
    #[serde(rename = "capacitance_uF_per_cm2")]
    pub capacitance: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        let c = PhysicalConstants::default();
        ConstantsConfig {
            gas_constant: c.gas_constant,
            temperature: c.temperature,
            faraday: c.faraday,
            capacitance: c.capacitance / UF_PER_CM2,
        }
    }
}

impl ConstantsConfig {
    pub fn to_si(&self) -> PhysicalConstants {
        PhysicalConstants {
            gas_constant: self.gas_constant,
            temperature: self.temperature,
            faraday: self.faraday,
            capacitance: self.capacitance * UF_PER_CM2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub name: String,
    pub valence: i32,
    pub diffusion_intra_um2_per_ms: f64,
    pub diffusion_extra_um2_per_ms: f64,
    #[serde(rename = "initial_intra_mM")]
    pub initial_intra: f64,
    #[serde(rename = "initial_extra_mM")]
    pub initial_extra: f64,
    #[serde(rename = "g_leak_mS_per_cm2", default)]
    pub g_leak: f64,
    #[serde(rename = "g_max_mS_per_cm2", default)]
    pub g_max: f64,
}

impl SpeciesConfig {
    pub fn to_si(&self) -> IonSpecies {
        IonSpecies {
            name: self.name.clone(),
            valence: self.valence,
            diffusion_intra: self.diffusion_intra_um2_per_ms * UM2_PER_MS,
            diffusion_extra: self.diffusion_extra_um2_per_ms * UM2_PER_MS,
            initial_intra: self.initial_intra,
            initial_extra: self.initial_extra,
            g_leak: self.g_leak * MS_PER_CM2,
            g_max: self.g_max * MS_PER_CM2,
        }
    }
}

pub fn default_species_config() -> Vec<SpeciesConfig> {
    default_species()
        .into_iter()
        .map(|s| SpeciesConfig {
            name: s.name,
            valence: s.valence,
            diffusion_intra_um2_per_ms: s.diffusion_intra / UM2_PER_MS,
            diffusion_extra_um2_per_ms: s.diffusion_extra / UM2_PER_MS,
            initial_intra: s.initial_intra,
            initial_extra: s.initial_extra,
            g_leak: s.g_leak / MS_PER_CM2,
            g_max: s.g_max / MS_PER_CM2,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembraneKind {
    #[default]
    Passive,
    HodgkinHuxley,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneConfig {
    pub model: MembraneKind,
    /// Keep the leak conductances under the active model.
    pub include_leak: bool,
    #[serde(rename = "resting_potential_mV")]
    pub resting_potential: f64,
    pub ode_substeps: usize,
    /// Reversal potentials held fixed instead of following Nernst.
    #[serde(rename = "fixed_reversal_mV", default, skip_serializing_if = "Option::is_none")]
    pub fixed_reversal: Option<Vec<f64>>,
}

impl Default for MembraneConfig {
    fn default() -> Self {
        MembraneConfig {
            model: MembraneKind::Passive,
            include_leak: true,
            resting_potential: -67.74,
            ode_substeps: 25,
            fixed_reversal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusConfig {
    pub g_syn_mS_per_cm2: f64,
    pub time_constant_ms: f64,
    pub onsets_ms: Vec<f64>,
    /// "x", "y" or "z".
    pub axis: String,
    pub window_um: [f64; 2],
    /// Labels (1-based, in the order of `geometry.cells`); empty = all.
    #[serde(default)]
    pub cells: Vec<u32>,
    #[serde(default = "default_profile")]
    pub profile: StimulusProfile,
}

fn default_profile() -> StimulusProfile {
    StimulusProfile::Decaying
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// [k]_e fixed at the initial values, no charge flux.
    #[default]
    DirichletInitial,
    /// No ion flux.
    ZeroIonFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt_ms: f64,
    pub end_ms: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt_ms: 0.1, end_ms: 10.0 }
    }
}

impl TimeConfig {
    /// Number of steps, rounding end/dt to the nearest integer.
    pub fn num_steps(&self) -> usize {
        (self.end_ms / self.dt_ms).round() as usize
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeRegion {
    /// Whichever region contains the point (extracellular on Γ).
    #[default]
    Auto,
    Intra,
    Extra,
    Membrane,
}

/// A point probe, or a line of `samples` equally spaced probes named
/// `<name>_000`, `<name>_001`, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub name: String,
    pub point_um: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_um: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub region: ProbeRegion,
    /// Field names; bulk: "phi" and species names; membrane: "phi_m",
    /// "I_M", "E_<species>", "<species>_i", "<species>_e", "m", "h", "n".
    pub fields: Vec<String>,
}

impl ProbeConfig {
    /// Expanded (name, point) pairs.
    pub fn points(&self) -> Vec<(String, Vec<f64>)> {
        match (&self.to_um, self.samples) {
            (Some(to), Some(n)) if n >= 2 => (0..n)
                .map(|i| {
                    let s = i as f64 / (n - 1) as f64;
                    let p = self.point_um.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect();
                    (format!("{}_{i:03}", self.name), p)
                })
                .collect(),
            _ => vec![(self.name.clone(), self.point_um.clone())],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Probe sampling interval; every step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_every_ms: Option<f64>,
    /// VTK snapshot interval; no snapshots when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub residual_tolerance: f64,
    pub grounding: Grounding,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            residual_tolerance: crate::fespace::solve::DEFAULT_RESIDUAL_TOLERANCE,
            grounding: Grounding::ExtracellularMean,
        }
    }
}

/// Conductivities of the volume-conductor model, in µS/µm (= S/m).
/// Absent values are computed from the initial concentrations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmiConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_intra_uS_per_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_extra_uS_per_um: Option<f64>,
}

fn axis_index(axis: &str) -> Option<usize> {
    match axis {
        "x" => Some(0),
        "y" => Some(1),
        "z" => Some(2),
        _ => None,
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), Error> {
        let g = &self.geometry;
        let dim = g.dimension();
        if !(dim == 2 || dim == 3) || g.upper_um.len() != dim || g.resolution.len() != dim {
            return Err(Error::config(
                "geometry: lower_um, upper_um and resolution need 2 or 3 matching entries",
            ));
        }
        if !(g.degree == 1 || g.degree == 2) {
            return Err(Error::config("geometry.degree must be 1 or 2"));
        }
        for (i, c) in g.cells.iter().enumerate() {
            if c.lower_um.len() != dim || c.upper_um.len() != dim {
                return Err(Error::config(format!("geometry.cells[{i}] has the wrong dimension")));
            }
        }
        if self.species.is_empty() {
            return Err(Error::config("species: at least one species is required"));
        }
        for s in &self.species {
            if !(s.diffusion_intra_um2_per_ms > 0.0 && s.diffusion_extra_um2_per_ms > 0.0) {
                return Err(Error::config(format!("species {}: diffusion must be positive", s.name)));
            }
            s.to_si().validate()?;
        }
        for (region, conc) in [
            ("intracellular", self.species.iter().map(|s| s.initial_intra).collect::<Vec<_>>()),
            ("extracellular", self.species.iter().map(|s| s.initial_extra).collect()),
        ] {
            let charge: f64 = self.species.iter().zip(&conc).map(|(s, c)| f64::from(s.valence) * c).sum();
            let scale = conc.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if charge.abs() > 1e-9 * scale {
                return Err(Error::config(format!(
                    "species: initial {region} concentrations violate bulk electroneutrality (Σ z c = {charge} mM)"
                )));
            }
        }
        let c = &self.constants;
        if !(c.gas_constant > 0.0 && c.temperature > 0.0 && c.faraday > 0.0 && c.capacitance > 0.0) {
            return Err(Error::config("constants must be positive"));
        }
        if self.membrane.ode_substeps == 0 {
            return Err(Error::config("membrane.ode_substeps must be at least 1"));
        }
        if let Some(e) = &self.membrane.fixed_reversal {
            if e.len() != self.species.len() {
                return Err(Error::config("membrane.fixed_reversal_mV needs one value per species"));
            }
        }
        if !(self.time.dt_ms > 0.0) || !(self.time.end_ms >= 0.0) {
            return Err(Error::config("time: dt_ms must be positive and end_ms nonnegative"));
        }
        let ncells = g.cells.len() as u32;
        for (i, s) in self.stimuli.iter().enumerate() {
            let axis = axis_index(&s.axis)
                .filter(|&a| a < dim)
                .ok_or_else(|| Error::config(format!("stimuli[{i}].axis '{}' is not a domain axis", s.axis)))?;
            if !(s.time_constant_ms > 0.0) || s.g_syn_mS_per_cm2 < 0.0 {
                return Err(Error::config(format!("stimuli[{i}]: time constant must be positive, g_syn nonnegative")));
            }
            if s.window_um[0] > s.window_um[1] {
                return Err(Error::config(format!("stimuli[{i}].window_um is reversed")));
            }
            if let Some(bad) = s.cells.iter().find(|&&l| l == 0 || l > ncells) {
                return Err(Error::config(format!("stimuli[{i}].cells: no cell with label {bad}")));
            }
            let labels: Vec<u32> = if s.cells.is_empty() { (1..=ncells).collect() } else { s.cells.clone() };
            let hits = labels.iter().any(|&l| {
                let b = &g.cells[(l - 1) as usize];
                s.window_um[0] <= b.upper_um[axis] && s.window_um[1] >= b.lower_um[axis]
            });
            if !hits {
                return Err(Error::config(format!("stimuli[{i}].window_um does not intersect any stimulated membrane")));
            }
        }
        for p in &self.probes {
            if p.fields.is_empty() {
                return Err(Error::config(format!("probe {}: no fields", p.name)));
            }
            if p.to_um.is_some() != p.samples.is_some() {
                return Err(Error::config(format!("probe {}: to_um and samples go together", p.name)));
            }
            for (name, pt) in p.points() {
                if !g.contains(&pt) {
                    return Err(Error::config(format!("probe {name} at {pt:?} µm lies outside the domain")));
                }
            }
        }
        if let Some(v) = self.output.snapshot_every_ms.or(self.output.probe_every_ms) {
            if !(v > 0.0) {
                return Err(Error::config("output intervals must be positive"));
            }
        }
        if let (Some(a), Some(b)) = (self.emi.sigma_intra_uS_per_um, self.emi.sigma_extra_uS_per_um) {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::config("emi conductivities must be positive"));
            }
        } else if self.emi.sigma_intra_uS_per_um.is_some() != self.emi.sigma_extra_uS_per_um.is_some() {
            return Err(Error::config("emi: give both conductivities or neither"));
        }
        if !(self.solver.residual_tolerance > 0.0) {
            return Err(Error::config("solver.residual_tolerance must be positive"));
        }
        Ok(())
    }

    /// Tagged mesh in metres.
    pub fn build_mesh(&self) -> Result<Mesh, Error> {
        let g = &self.geometry;
        let mesh = build_box_mesh(&g.lower_um, &g.upper_um, &g.resolution)?;
        let boxes: Vec<AxisBox> = g.cells.iter().map(|c| AxisBox::new(&c.lower_um, &c.upper_um)).collect();
        Ok(tag_subdomains(&mesh, &boxes)?.scaled(UM))
    }

    /// Conductivities (σ_i, σ_e) in S/m for the volume-conductor model.
    pub fn emi_sigma(&self) -> (f64, f64) {
        let species: Vec<IonSpecies> = self.species.iter().map(SpeciesConfig::to_si).collect();
        let consts = self.constants.to_si();
        let ci: Vec<f64> = species.iter().map(|s| s.initial_intra).collect();
        let ce: Vec<f64> = species.iter().map(|s| s.initial_extra).collect();
        (
            self.emi
                .sigma_intra_uS_per_um
                .unwrap_or_else(|| bulk_conductivity(&species, &ci, true, &consts)),
            self.emi
                .sigma_extra_uS_per_um
                .unwrap_or_else(|| bulk_conductivity(&species, &ce, false, &consts)),
        )
    }

    /// The physics in SI units.
    pub fn problem(&self) -> Problem {
        let species: Vec<IonSpecies> = self.species.iter().map(SpeciesConfig::to_si).collect();
        let model = match self.membrane.model {
            MembraneKind::Passive => MembraneModel::Passive {
                fixed_reversal: self
                    .membrane
                    .fixed_reversal
                    .as_ref()
                    .map(|e| e.iter().map(|v| v * MV).collect()),
            },
            MembraneKind::HodgkinHuxley => MembraneModel::HodgkinHuxley {
                include_leak: self.membrane.include_leak,
            },
        };
        let ncells = self.geometry.cells.len() as u32;
        let stimuli = self
            .stimuli
            .iter()
            .map(|s| StimulusSpec {
                g_syn: s.g_syn_mS_per_cm2 * MS_PER_CM2,
                time_constant: s.time_constant_ms * MS,
                onsets: s.onsets_ms.iter().map(|t| t * MS).collect(),
                axis: axis_index(&s.axis).unwrap_or(0),
                window: (s.window_um[0] * UM, s.window_um[1] * UM),
                labels: if s.cells.is_empty() { (1..=ncells).collect() } else { s.cells.clone() },
                profile: s.profile,
            })
            .collect();
        let framework = match self.framework {
            FrameworkKind::KnpEmi => Framework::Knp,
            FrameworkKind::Emi => {
                let (sigma_intra, sigma_extra) = self.emi_sigma();
                Framework::Emi {
                    sigma_intra,
                    sigma_extra,
                }
            }
        };
        Problem {
            species,
            constants: self.constants.to_si(),
            model,
            stimuli,
            boundary: match self.boundary {
                BoundaryKind::DirichletInitial => BoundaryCondition::Dirichlet,
                BoundaryKind::ZeroIonFlux => BoundaryCondition::ZeroFlux,
            },
            grounding: self.solver.grounding,
            framework,
            ode_substeps: self.membrane.ode_substeps,
            resting_potential: self.membrane.resting_potential * MV,
        }
    }
}
