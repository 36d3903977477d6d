use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, SolverError};
use crate::fespace::{assemble_multiplier_row, element::Lagrange, FunctionSpace, Side, TraceMap};
use crate::geometry::{exterior_boundary, extract_interface, BoundaryMesh, InterfaceMesh, Mesh, EXTRACELLULAR};
use crate::membrane::{IonSpecies, MembraneModel, PhysicalConstants, StimulusSpec};

/// Conditions on the exterior boundary ∂Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    /// Extracellular concentrations held at their initial values, no net
    /// charge flux.
    Dirichlet,
    /// No ion flux of any species.
    ZeroFlux,
}

/// Which potential carries the mean-value constraint fixing the constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grounding {
    /// ∫_{Ω_e} φ_e = target
    ExtracellularMean,
    /// ∫_{Ω_i} φ_i = target
    IntracellularMean,
}

/// Bulk model: electrodiffusion, or volume conduction with constant
/// conductivities and frozen concentrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Framework {
    Knp,
    Emi { sigma_intra: f64, sigma_extra: f64 },
}

impl Framework {
    pub fn name(&self) -> &'static str {
        match self {
            Framework::Knp => "knp-emi",
            Framework::Emi { .. } => "emi",
        }
    }
}

/// Everything but the mesh: species, constants, membrane mechanics and
/// numerical options. SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub species: Vec<IonSpecies>,
    pub constants: PhysicalConstants,
    pub model: MembraneModel,
    pub stimuli: Vec<StimulusSpec>,
    pub boundary: BoundaryCondition,
    pub grounding: Grounding,
    pub framework: Framework,
    /// Forward Euler substeps of the membrane ODEs per time step.
    pub ode_substeps: usize,
    /// Initial membrane potential, in volts.
    pub resting_potential: f64,
}

impl Problem {
    pub fn validate(&self) -> Result<(), Error> {
        if self.species.is_empty() {
            return Err(Error::config("at least one ion species is required"));
        }
        for s in &self.species {
            s.validate()?;
        }
        if self.ode_substeps == 0 {
            return Err(Error::config("ode_substeps must be positive"));
        }
        if let MembraneModel::Passive {
            fixed_reversal: Some(e),
        } = &self.model
        {
            if e.len() != self.species.len() {
                return Err(Error::config("fixed_reversal needs one value per species"));
            }
        }
        if let Framework::Emi {
            sigma_intra,
            sigma_extra,
        } = self.framework
        {
            if !(sigma_intra > 0.0 && sigma_extra > 0.0) {
                return Err(Error::config("EMI conductivities must be positive"));
            }
        }
        Ok(())
    }

    /// Synaptic conductance at a membrane point, summed over stimuli.
    pub fn synaptic_conductance(&self, t: f64, x: &[f64; 3], label: u32) -> f64 {
        self.stimuli.iter().map(|s| s.conductance(t, x, label)).sum()
    }
}

/// Meshes, function spaces and index maps shared by every time step.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub gamma: InterfaceMesh,
    pub boundary: BoundaryMesh,
    pub intra: Arc<FunctionSpace>,
    pub extra: Arc<FunctionSpace>,
    pub membrane: Arc<FunctionSpace>,
    pub trace: TraceMap,
    /// Extracellular dofs on ∂Ω.
    pub boundary_dofs: Vec<usize>,
    /// Membrane label of every interface dof.
    pub membrane_labels: Vec<u32>,
    /// ∫ v over each region, per dof.
    pub volume_intra: Vec<f64>,
    pub volume_extra: Vec<f64>,
    /// For every mesh cell, its region and index in that region's space.
    cell_map: Vec<(Side, usize)>,
}

impl Discretization {
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self, Error> {
        let gamma = extract_interface(&mesh)?;
        if gamma.is_empty() {
            return Err(Error::config("the mesh contains no membrane"));
        }
        let boundary = exterior_boundary(&mesh);
        let intra_cells = mesh.intracellular_cells();
        let extra_cells = mesh.cells_with_tag(EXTRACELLULAR);
        let intra = Arc::new(FunctionSpace::on_cells(&mesh, &intra_cells, degree)?);
        let extra = Arc::new(FunctionSpace::on_cells(&mesh, &extra_cells, degree)?);
        let membrane = Arc::new(FunctionSpace::on_interface(&mesh, &gamma, degree)?);
        let trace = TraceMap::new(&membrane, &intra, &extra)?;

        let facet_el = Lagrange::new(mesh.dim() - 1, degree)?;
        let mut boundary_dofs: Vec<usize> = boundary
            .facets
            .iter()
            .flat_map(|f| facet_el.dof_keys(&f.vertices[..mesh.dim()]))
            .map(|k| {
                extra.dof_of_key(k).ok_or(SolverError::MissingTrace {
                    dof: k.0,
                    region: "extracellular boundary",
                })
            })
            .collect::<Result<_, _>>()?;
        boundary_dofs.sort_unstable();
        boundary_dofs.dedup();

        let mut membrane_labels = vec![0; membrane.ndofs()];
        for c in 0..membrane.num_cells() {
            for &d in membrane.cell_dofs(c) {
                membrane_labels[d] = membrane.cell_label(c);
            }
        }

        let mut cell_map = vec![(Side::Extra, 0); mesh.num_cells()];
        for (l, &c) in intra_cells.iter().enumerate() {
            cell_map[c] = (Side::Intra, l);
        }
        for (l, &c) in extra_cells.iter().enumerate() {
            cell_map[c] = (Side::Extra, l);
        }
        Ok(Discretization {
            volume_intra: assemble_multiplier_row(&intra),
            volume_extra: assemble_multiplier_row(&extra),
            mesh,
            gamma,
            boundary,
            intra,
            extra,
            membrane,
            trace,
            boundary_dofs,
            membrane_labels,
            cell_map,
        })
    }

    pub fn space(&self, side: Side) -> &Arc<FunctionSpace> {
        match side {
            Side::Intra => &self.intra,
            Side::Extra => &self.extra,
        }
    }

    pub fn volume_row(&self, side: Side) -> &[f64] {
        match side {
            Side::Intra => &self.volume_intra,
            Side::Extra => &self.volume_extra,
        }
    }

    /// Region and local cell index of a mesh cell.
    pub fn local_cell(&self, cell: usize) -> (Side, usize) {
        self.cell_map[cell]
    }

    pub fn region_measure(&self, side: Side) -> f64 {
        self.volume_row(side).iter().sum()
    }

    /// Total number of unknowns of one linear system.
    pub fn num_unknowns(&self, species: usize, framework: &Framework) -> usize {
        let (ni, ne, nq) = (self.intra.ndofs(), self.extra.ndofs(), self.membrane.ndofs());
        let potentials = ni + ne + 1 + nq;
        match framework {
            Framework::Knp => species * (ni + ne) + potentials,
            Framework::Emi { .. } => potentials,
        }
    }
}
