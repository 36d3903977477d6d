use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fespace::{
    assemble_diffusion, assemble_interface_terms, assemble_jump, assemble_load, assemble_mass,
    assemble_weighted_stiffness, combine_blocks, map_interface_block, BlockLayout, BlockSystem, Coefficient,
    CooBlock, Field, LinearSolver, Side, SolverStats,
};
use crate::membrane::{channel_conductances, ode_substeps, Gates};

use super::problem::{BoundaryCondition, Discretization, Framework, Grounding, Problem};
use super::state::SystemState;

/// Extra terms of a manufactured-solution test, all evaluated at the new
/// time level. `normal` is the unit normal pointing out of Ω_i.
pub trait SourceTerms: Sync {
    /// ∂[k]/∂t + ∇·J^k in Ω_r.
    fn concentration(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> f64;
    /// F Σ_k z^k ∇·J^k in Ω_r.
    fn charge(&self, side: Side, t: f64, x: &[f64; 3]) -> f64;
    /// Exact minus modelled membrane flux J^k·n_r.
    fn membrane_flux(&self, k: usize, side: Side, t: f64, x: &[f64; 3], normal: &[f64; 3]) -> f64;
    /// Mismatch between F Σ z J·n_r and ±I_M on Γ, entering the
    /// potential equation of Ω_r.
    fn membrane_charge(&self, side: Side, t: f64, x: &[f64; 3], normal: &[f64; 3]) -> f64;
    /// Residual of the capacitor equation, already divided by C_M.
    fn capacitor(&self, t: f64, x: &[f64; 3], normal: &[f64; 3]) -> f64;
    /// Extracellular concentration prescribed on ∂Ω.
    fn boundary_concentration(&self, k: usize, t: f64, x: &[f64; 3]) -> f64;
    /// Right-hand side of the grounding constraint.
    fn grounding_target(&self, t: f64) -> f64;

    fn quadrature_degree(&self) -> usize {
        6
    }
}

/// Bookkeeping of one completed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    /// Σ_r ∫[k] dx per species after the step.
    pub ion_content: Vec<f64>,
    /// |Δ content| / content per species over the step.
    pub content_change: Vec<f64>,
    /// |∫ φ dx| / (|Ω| max|φ|) on the grounded region.
    pub grounding_error: f64,
    pub min_concentration: f64,
    /// Negative concentration values clamped in the drift terms.
    pub clamped: usize,
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Intra => 0,
        Side::Extra => 1,
    }
}

fn side_sign(side: Side) -> f64 {
    match side {
        Side::Intra => 1.0,
        Side::Extra => -1.0,
    }
}

const SIDES: [Side; 2] = [Side::Intra, Side::Extra];

/// Block indices of the global system.
#[derive(Debug, Clone, Copy)]
struct Blocks {
    species: usize,
    knp: bool,
}

impl Blocks {
    fn conc(&self, side: Side, k: usize) -> usize {
        debug_assert!(self.knp);
        side_index(side) * self.species + k
    }

    fn phi(&self, side: Side) -> usize {
        let base = if self.knp { 2 * self.species } else { 0 };
        base + side_index(side)
    }

    fn multiplier(&self) -> usize {
        self.phi(Side::Extra) + 1
    }

    fn current(&self) -> usize {
        self.phi(Side::Extra) + 2
    }
}

/// Time-independent matrices.
#[derive(Debug)]
struct Cache {
    mass: [CooBlock; 2],
    stiffness: [CooBlock; 2],
    mass_gamma: CooBlock,
    jump: (CooBlock, CooBlock),
    /// ⟨I_M, w_r⟩_Γ with rows on Ω_r.
    current_rows: [CooBlock; 2],
}

/// Membrane data entering one linear solve.
struct MembraneTerms {
    /// G^k per species and interface dof.
    conductance: Vec<Vec<f64>>,
    reversal: Vec<Vec<f64>>,
    /// φ_M on the right-hand side of the capacitor equation.
    phi_m: Vec<f64>,
    /// Gates after the ODE step.
    gates: Vec<Gates>,
    /// Frozen channel currents (active model only).
    frozen: Option<Vec<Vec<f64>>>,
}

/// Advances a [`SystemState`] by one time step of the coupled system,
/// using operator splitting for active membranes.
pub struct Simulator {
    pub disc: Arc<Discretization>,
    pub problem: Problem,
    solver: LinearSolver,
    cache: Cache,
    blocks: Blocks,
    layout: BlockLayout,
}

impl Simulator {
    pub fn new(disc: Arc<Discretization>, problem: Problem) -> Result<Self, Error> {
        problem.validate()?;
        let mass = [
            assemble_mass(&disc.intra, Coefficient::Constant(1.0))?,
            assemble_mass(&disc.extra, Coefficient::Constant(1.0))?,
        ];
        let stiffness = [assemble_diffusion(&disc.intra, 1.0), assemble_diffusion(&disc.extra, 1.0)];
        let mass_gamma = assemble_mass(&disc.membrane, Coefficient::Constant(1.0))?;
        let jump = assemble_jump(&disc.membrane, &disc.trace, disc.intra.ndofs(), disc.extra.ndofs())?;
        let current_rows = SIDES.map(|s| {
            map_interface_block(&mass_gamma, &disc.trace, Some((s, disc.space(s).ndofs())), None)
        });
        let blocks = Blocks {
            species: problem.species.len(),
            knp: problem.framework == Framework::Knp,
        };
        let mut names = Vec::new();
        if blocks.knp {
            for side in SIDES {
                let suffix = if side == Side::Intra { "i" } else { "e" };
                for s in &problem.species {
                    names.push((format!("{}_{suffix}", s.name), disc.space(side).ndofs()));
                }
            }
        }
        names.push(("phi_i".into(), disc.intra.ndofs()));
        names.push(("phi_e".into(), disc.extra.ndofs()));
        names.push(("c_e".into(), 1));
        names.push(("I_M".into(), disc.membrane.ndofs()));
        Ok(Simulator {
            layout: BlockLayout::new(&names),
            cache: Cache {
                mass,
                stiffness,
                mass_gamma,
                jump,
                current_rows,
            },
            blocks,
            solver: LinearSolver::default(),
            disc,
            problem,
        })
    }

    pub fn solver_stats(&self) -> &SolverStats {
        &self.solver.stats
    }

    pub fn set_residual_tolerance(&mut self, tol: f64) {
        self.solver.tolerance = tol;
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    /// One step of length `dt`; on error the state is left untouched.
    pub fn step(
        &mut self,
        state: &mut SystemState,
        dt: f64,
        sources: Option<&dyn SourceTerms>,
    ) -> Result<StepReport, Error> {
        let step = state.step + 1;
        let t = state.time + dt;
        self.advance(state, dt, t, sources).map_err(|e| match e {
            Error::Instability { .. } => e,
            other => Error::Step {
                step,
                source: Box::new(other),
            },
        })
    }

    fn advance(
        &mut self,
        state: &mut SystemState,
        dt: f64,
        t: f64,
        sources: Option<&dyn SourceTerms>,
    ) -> Result<StepReport, Error> {
        let step = state.step + 1;
        let before = if self.blocks.knp { state.ion_content() } else { Vec::new() };
        let membrane = self.membrane_terms(state, dt, t)?;
        let mut sys = BlockSystem::new(self.layout.clone());
        let mut clamped = 0;
        if self.blocks.knp {
            clamped = self.assemble_knp(&mut sys, state, &membrane, dt, t, sources)?;
        } else {
            self.assemble_emi(&mut sys, sources, t);
        }
        self.assemble_capacitor(&mut sys, &membrane, dt, t, sources)?;
        self.assemble_grounding(&mut sys, t, sources);
        if self.blocks.knp && self.problem.boundary == BoundaryCondition::Dirichlet {
            self.constrain_boundary(&mut sys, t, sources);
        }
        sys.apply_dirichlet();
        let x = self.solver.solve(&sys)?;
        let next = self.unpack(state, &x, membrane, step, t)?;
        *state = next;

        let content = if self.blocks.knp { state.ion_content() } else { Vec::new() };
        let change = before
            .iter()
            .zip(&content)
            .map(|(a, b)| ((b - a) / a).abs())
            .collect();
        let report = StepReport {
            step,
            time: t,
            ion_content: content,
            content_change: change,
            grounding_error: self.grounding_error(state),
            min_concentration: if self.blocks.knp {
                state.min_concentration()
            } else {
                f64::NAN
            },
            clamped,
        };
        debug!("step {step} t={:.4} ms done", t * 1e3);
        Ok(report)
    }

    fn membrane_terms(&self, state: &SystemState, dt: f64, t: f64) -> Result<MembraneTerms, Error> {
        let p = &self.problem;
        let d = &self.disc;
        let reversal = state.reversal_potentials(d, p)?;
        let coords = d.membrane.dof_coords();
        let nq = d.membrane.ndofs();
        let ns = p.species.len();
        let mut conductance = vec![vec![0.0; nq]; ns];
        let mut phi_m = state.phi_m.clone();
        let mut gates = state.gates.clone();
        let mut frozen = None;
        let active = p.model.is_active();
        if active {
            let mut currents = vec![vec![0.0; nq]; ns];
            let mut e = vec![0.0; ns];
            for q in 0..nq {
                let (x, label) = (coords[q], d.membrane_labels[q]);
                for k in 0..ns {
                    e[k] = reversal[k][q];
                }
                let (v, g) = ode_substeps(
                    &p.model,
                    &p.species,
                    &e,
                    p.constants.capacitance,
                    state.phi_m[q],
                    state.gates[q],
                    state.time,
                    dt,
                    p.ode_substeps,
                    |s| p.synaptic_conductance(s, &x, label),
                );
                phi_m[q] = v;
                gates[q] = g;
                let gk = channel_conductances(&p.model, &p.species, g, p.synaptic_conductance(t, &x, label));
                for k in 0..ns {
                    conductance[k][q] = gk[k];
                    currents[k][q] = gk[k] * (v - e[k]);
                }
            }
            if !phi_m.iter().all(|v| v.is_finite()) {
                return Err(Error::Instability {
                    step: state.step + 1,
                    time_ms: t * 1e3,
                    detail: "membrane ODE produced a non-finite potential".into(),
                });
            }
            frozen = Some(currents);
        } else {
            for q in 0..nq {
                let g_syn = p.synaptic_conductance(t, &coords[q], d.membrane_labels[q]);
                let gk = channel_conductances(&p.model, &p.species, gates[q], g_syn);
                for k in 0..ns {
                    conductance[k][q] = gk[k];
                }
            }
        }
        Ok(MembraneTerms {
            conductance,
            reversal,
            phi_m,
            gates,
            frozen,
        })
    }

    /// Adds ⟨f, v⟩ on the interface space to the trace dofs of block `rb`.
    fn scatter_interface(&self, sys: &mut BlockSystem, rb: usize, side: Side, load: &[f64], scale: f64) {
        let o = sys.layout.offset(rb);
        for (&d, v) in self.disc.trace.map(side).iter().zip(load) {
            sys.rhs[o + d] += scale * v;
        }
    }

    fn interface_field(&self, values: Vec<f64>) -> Result<Field, Error> {
        Ok(Field::from_values(&self.disc.membrane, values, "")?)
    }

    fn assemble_knp(
        &self,
        sys: &mut BlockSystem,
        state: &SystemState,
        mem: &MembraneTerms,
        dt: f64,
        t: f64,
        sources: Option<&dyn SourceTerms>,
    ) -> Result<usize, Error> {
        let p = &self.problem;
        let d = &self.disc;
        let b = self.blocks;
        let (f, psi) = (p.constants.faraday, p.constants.psi());
        let nq = d.membrane.ndofs();
        let ns = p.species.len();
        let g_total: Vec<f64> = (0..nq).map(|q| (0..ns).map(|k| mem.conductance[k][q]).sum()).collect();
        let ge_total: Vec<f64> = (0..nq)
            .map(|q| (0..ns).map(|k| mem.conductance[k][q] * mem.reversal[k][q]).sum())
            .collect();
        let i_ch_total: Option<Vec<f64>> = mem
            .frozen
            .as_ref()
            .map(|c| (0..nq).map(|q| (0..ns).map(|k| c[k][q]).sum()).collect());
        let mut clamped = 0;

        for side in SIDES {
            let r = side_index(side);
            let sgn = side_sign(side);
            let intra = side == Side::Intra;
            let space = d.space(side);
            let n_r = space.ndofs();
            let alpha = state.capacitive_fractions(d, p, side)?;
            let mut kappa = vec![0.0; n_r];
            for (k, s) in p.species.iter().enumerate() {
                let (dk, z) = (s.diffusion(intra), s.z());
                let row = b.conc(side, k);
                let prev = &state.conc(side)[k];
                let mut pos = prev.clone();
                for v in &mut pos.values {
                    if *v < 0.0 {
                        *v = 0.0;
                        clamped += 1;
                    }
                }
                for (kp, c) in kappa.iter_mut().zip(&pos.values) {
                    *kp += f / psi * dk * z * z * c;
                }
                let cc = combine_blocks(&[(&self.cache.mass[r], 1.0 / dt), (&self.cache.stiffness[r], dk)]);
                sys.add_block(row, row, &cc, 1.0);
                let drift = assemble_weighted_stiffness(space, Coefficient::Field(&pos))?;
                sys.add_block(row, b.phi(side), &drift, dk * z / psi);
                sys.add_block(b.phi(side), row, &self.cache.stiffness[r], f * z * dk);
                sys.add_rhs(row, &self.cache.mass[r].apply(&prev.values), 1.0 / dt);

                let fz = f * z;
                let w_im = self.interface_field(alpha[k].iter().map(|a| sgn * a / fz).collect())?;
                let blk = assemble_interface_terms(&d.membrane, &d.trace, Coefficient::Field(&w_im), Some((side, n_r)), None)?;
                sys.add_block(row, b.current(), &blk, 1.0);

                let nodal: Vec<f64> = match (&mem.frozen, &i_ch_total) {
                    (Some(cur), Some(tot)) => (0..nq)
                        .map(|q| -sgn * (cur[k][q] - alpha[k][q] * tot[q]) / fz)
                        .collect(),
                    _ => {
                        let w: Vec<f64> = (0..nq)
                            .map(|q| sgn * (mem.conductance[k][q] - alpha[k][q] * g_total[q]) / fz)
                            .collect();
                        let wf = self.interface_field(w)?;
                        for (col, s) in [(Side::Intra, 1.0), (Side::Extra, -1.0)] {
                            let blk = assemble_interface_terms(
                                &d.membrane,
                                &d.trace,
                                Coefficient::Field(&wf),
                                Some((side, n_r)),
                                Some((col, d.space(col).ndofs())),
                            )?;
                            sys.add_block(row, b.phi(col), &blk, s);
                        }
                        (0..nq)
                            .map(|q| {
                                sgn * (mem.conductance[k][q] * mem.reversal[k][q] - alpha[k][q] * ge_total[q]) / fz
                            })
                            .collect()
                    }
                };
                let load = self.cache.mass_gamma.apply(&nodal);
                self.scatter_interface(sys, row, side, &load, 1.0);

                if let Some(src) = sources {
                    let deg = src.quadrature_degree();
                    let fl = assemble_load(space, deg, |_, x| src.concentration(k, side, t, x));
                    sys.add_rhs(row, &fl, 1.0);
                    let gl = assemble_load(&d.membrane, deg, |c, x| {
                        src.membrane_flux(k, side, t, x, &d.gamma.facets[c].normal)
                    });
                    self.scatter_interface(sys, row, side, &gl, -1.0);
                }
            }
            let kf = Field::from_values(space, kappa, "S/m")?;
            let kb = assemble_weighted_stiffness(space, Coefficient::Field(&kf))?;
            sys.add_block(b.phi(side), b.phi(side), &kb, 1.0);
            sys.add_block(b.phi(side), b.current(), &self.cache.current_rows[r], sgn);
            if let Some(src) = sources {
                self.add_charge_sources(sys, side, src, t);
            }
        }
        Ok(clamped)
    }

    fn add_charge_sources(&self, sys: &mut BlockSystem, side: Side, src: &dyn SourceTerms, t: f64) {
        let d = &self.disc;
        let deg = src.quadrature_degree();
        let row = self.blocks.phi(side);
        let fl = assemble_load(d.space(side), deg, |_, x| src.charge(side, t, x));
        sys.add_rhs(row, &fl, 1.0);
        let hl = assemble_load(&d.membrane, deg, |c, x| {
            src.membrane_charge(side, t, x, &d.gamma.facets[c].normal)
        });
        self.scatter_interface(sys, row, side, &hl, 1.0);
    }

    fn assemble_emi(&self, sys: &mut BlockSystem, sources: Option<&dyn SourceTerms>, t: f64) {
        let Framework::Emi {
            sigma_intra,
            sigma_extra,
        } = self.problem.framework
        else {
            unreachable!("EMI assembly with a KNP problem")
        };
        for (side, sigma) in [(Side::Intra, sigma_intra), (Side::Extra, sigma_extra)] {
            let r = side_index(side);
            let row = self.blocks.phi(side);
            sys.add_block(row, row, &self.cache.stiffness[r], sigma);
            sys.add_block(row, self.blocks.current(), &self.cache.current_rows[r], side_sign(side));
            if let Some(src) = sources {
                self.add_charge_sources(sys, side, src, t);
            }
        }
    }

    fn assemble_capacitor(
        &self,
        sys: &mut BlockSystem,
        mem: &MembraneTerms,
        dt: f64,
        t: f64,
        sources: Option<&dyn SourceTerms>,
    ) -> Result<(), Error> {
        let d = &self.disc;
        let b = self.blocks;
        let cm = self.problem.constants.capacitance;
        let row = b.current();
        sys.add_block(row, b.phi(Side::Intra), &self.cache.jump.0, 1.0 / dt);
        sys.add_block(row, b.phi(Side::Extra), &self.cache.jump.1, 1.0 / dt);
        sys.add_block(row, row, &self.cache.mass_gamma, -1.0 / cm);
        sys.add_rhs(row, &self.cache.mass_gamma.apply(&mem.phi_m), 1.0 / dt);
        if mem.frozen.is_none() {
            let nq = d.membrane.ndofs();
            let ns = self.problem.species.len();
            let g: Vec<f64> = (0..nq).map(|q| (0..ns).map(|k| mem.conductance[k][q]).sum()).collect();
            let ge: Vec<f64> = (0..nq)
                .map(|q| (0..ns).map(|k| mem.conductance[k][q] * mem.reversal[k][q]).sum())
                .collect();
            let gf = self.interface_field(g)?;
            for (col, s) in [(Side::Intra, 1.0), (Side::Extra, -1.0)] {
                let blk = assemble_interface_terms(
                    &d.membrane,
                    &d.trace,
                    Coefficient::Field(&gf),
                    None,
                    Some((col, d.space(col).ndofs())),
                )?;
                sys.add_block(row, b.phi(col), &blk, s / cm);
            }
            sys.add_rhs(row, &self.cache.mass_gamma.apply(&ge), 1.0 / cm);
        }
        if let Some(src) = sources {
            let load = assemble_load(&d.membrane, src.quadrature_degree(), |c, x| {
                src.capacitor(t, x, &d.gamma.facets[c].normal)
            });
            sys.add_rhs(row, &load, 1.0);
        }
        Ok(())
    }

    fn grounded_side(&self) -> Side {
        match self.problem.grounding {
            Grounding::ExtracellularMean => Side::Extra,
            Grounding::IntracellularMean => Side::Intra,
        }
    }

    fn assemble_grounding(&self, sys: &mut BlockSystem, t: f64, sources: Option<&dyn SourceTerms>) {
        let b = self.blocks;
        let m = b.multiplier();
        let g = self.grounded_side();
        sys.add_column(b.phi(Side::Extra), m, 0, &self.disc.volume_extra, 1.0);
        sys.add_row(m, 0, b.phi(g), self.disc.volume_row(g), 1.0);
        if let Some(src) = sources {
            sys.add_rhs(m, &[src.grounding_target(t)], 1.0);
        }
    }

    fn constrain_boundary(&self, sys: &mut BlockSystem, t: f64, sources: Option<&dyn SourceTerms>) {
        let coords = self.disc.extra.dof_coords();
        let dofs = &self.disc.boundary_dofs;
        for (k, s) in self.problem.species.iter().enumerate() {
            let values: Vec<f64> = match sources {
                Some(src) => dofs
                    .iter()
                    .map(|&d| src.boundary_concentration(k, t, &coords[d]))
                    .collect(),
                None => vec![s.initial_extra; dofs.len()],
            };
            sys.constrain(self.blocks.conc(Side::Extra, k), dofs, &values);
        }
    }

    fn unpack(
        &self,
        state: &SystemState,
        x: &[f64],
        mem: MembraneTerms,
        step: usize,
        t: f64,
    ) -> Result<SystemState, Error> {
        let b = self.blocks;
        let d = &self.disc;
        let l = &self.layout;
        let mut next = state.clone();
        next.step = step;
        next.time = t;
        if b.knp {
            for side in SIDES {
                for k in 0..b.species {
                    let values = l.slice(x, b.conc(side, k)).to_vec();
                    let field = Field::from_values(d.space(side), values, "mol/m^3")?;
                    match side {
                        Side::Intra => next.conc_intra[k] = field,
                        Side::Extra => next.conc_extra[k] = field,
                    }
                }
            }
            let min = next.min_concentration();
            if !(min > 0.0) {
                return Err(Error::Instability {
                    step,
                    time_ms: t * 1e3,
                    detail: format!("concentration dropped to {min:.3e} mol/m^3"),
                });
            }
        }
        next.phi_intra = Field::from_values(&d.intra, l.slice(x, b.phi(Side::Intra)).to_vec(), "V")?;
        next.phi_extra = Field::from_values(&d.extra, l.slice(x, b.phi(Side::Extra)).to_vec(), "V")?;
        next.multiplier = x[l.offset(b.multiplier())];
        next.membrane_current = l.slice(x, b.current()).to_vec();
        let pi = d.trace.restrict(&next.phi_intra.values, Side::Intra);
        let pe = d.trace.restrict(&next.phi_extra.values, Side::Extra);
        next.phi_m = pi.iter().zip(&pe).map(|(a, b)| a - b).collect();
        next.gates = mem.gates;
        next.channel_current = match mem.frozen {
            Some(c) => c,
            None => mem
                .conductance
                .iter()
                .zip(&mem.reversal)
                .map(|(g, e)| (0..g.len()).map(|q| g[q] * (next.phi_m[q] - e[q])).collect())
                .collect(),
        };
        if let Some(bad) = next.phi_m.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::Instability {
                step,
                time_ms: t * 1e3,
                detail: format!("membrane potential reached {bad:.3e} V"),
            });
        }
        Ok(next)
    }

    /// |∫ φ dx| / (|Ω| max|φ|) for the grounded potential.
    pub fn grounding_error(&self, state: &SystemState) -> f64 {
        let side = self.grounded_side();
        let phi = &state.phi(side).values;
        let row = self.disc.volume_row(side);
        let integral: f64 = row.iter().zip(phi).map(|(w, v)| w * v).sum();
        let scale = self.disc.region_measure(side) * phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            integral.abs() / scale
        } else {
            integral.abs()
        }
    }
}
