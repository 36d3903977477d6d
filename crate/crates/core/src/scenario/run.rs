#![allow(non_snake_case)]

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fespace::{Side, SolverStats};
use crate::geometry::EXTRACELLULAR;
use crate::knp::{Discretization, Framework, Problem, Simulator, StepReport, SystemState};

use super::config::{FrameworkKind, ProbeRegion, ScenarioConfig, MS, MV, UM};

/// One probe sample in µm, ms and mV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub time_ms: f64,
    pub probe: String,
    pub field: String,
    pub value: f64,
}

#[derive(Debug, Clone)]
enum Location {
    Bulk { side: Side, cell: usize, bary: [f64; 4] },
    Membrane { dof: usize },
}

#[derive(Debug, Clone)]
struct Probe {
    name: String,
    location: Location,
    fields: Vec<(String, FieldSel)>,
}

#[derive(Debug, Clone, Copy)]
enum FieldSel {
    Phi,
    Conc(usize),
    PhiM,
    CurrentM,
    Reversal(usize),
    Trace(usize, Side),
    Gate(usize),
}

/// Probes resolved against a discretization.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    probes: Vec<Probe>,
}

fn parse_field(name: &str, membrane: bool, problem: &Problem) -> Option<FieldSel> {
    let species = |s: &str| problem.species.iter().position(|sp| sp.name == s);
    if !membrane {
        return match name {
            "phi" => Some(FieldSel::Phi),
            s => species(s).map(FieldSel::Conc),
        };
    }
    match name {
        "phi_m" => Some(FieldSel::PhiM),
        "I_M" => Some(FieldSel::CurrentM),
        "m" => Some(FieldSel::Gate(0)),
        "h" => Some(FieldSel::Gate(1)),
        "n" => Some(FieldSel::Gate(2)),
        _ => {
            if let Some(s) = name.strip_prefix("E_") {
                return species(s).map(FieldSel::Reversal);
            }
            let (s, side) = name.rsplit_once('_')?;
            let side = match side {
                "i" => Side::Intra,
                "e" => Side::Extra,
                _ => return None,
            };
            species(s).map(|k| FieldSel::Trace(k, side))
        }
    }
}

impl ProbeSet {
    pub fn resolve(cfg: &ScenarioConfig, disc: &Discretization, problem: &Problem) -> Result<Self, Error> {
        let mut probes = Vec::new();
        for pc in &cfg.probes {
            let membrane = pc.region == ProbeRegion::Membrane;
            let fields = pc
                .fields
                .iter()
                .map(|f| {
                    parse_field(f, membrane, problem)
                        .map(|sel| (f.clone(), sel))
                        .ok_or_else(|| Error::config(format!("probe {}: unknown field '{f}'", pc.name)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            for (name, p) in pc.points() {
                let x: Vec<f64> = p.iter().map(|v| v * UM).collect();
                let location = if membrane {
                    let dof = nearest_membrane_dof(disc, &x)
                        .ok_or_else(|| Error::config(format!("probe {name}: no membrane near {p:?} µm")))?;
                    Location::Membrane { dof }
                } else {
                    let hit = match pc.region {
                        ProbeRegion::Intra => disc.mesh.locate(&x, |t| t != EXTRACELLULAR),
                        ProbeRegion::Extra => disc.mesh.locate(&x, |t| t == EXTRACELLULAR),
                        _ => disc
                            .mesh
                            .locate(&x, |t| t == EXTRACELLULAR)
                            .or_else(|| disc.mesh.locate(&x, |_| true)),
                    };
                    let (cell, bary) =
                        hit.ok_or_else(|| Error::config(format!("probe {name} at {p:?} µm is not in the requested region")))?;
                    let (side, cell) = disc.local_cell(cell);
                    Location::Bulk { side, cell, bary }
                };
                probes.push(Probe {
                    name,
                    location,
                    fields: fields.clone(),
                });
            }
        }
        Ok(ProbeSet { probes })
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    /// Samples every probe and field, in configuration order.
    pub fn sample(&self, state: &SystemState, disc: &Discretization, problem: &Problem) -> Result<Vec<ProbeRecord>, Error> {
        let needs_reversal = self
            .probes
            .iter()
            .any(|p| p.fields.iter().any(|f| matches!(f.1, FieldSel::Reversal(_))));
        let reversal = if needs_reversal {
            Some(state.reversal_potentials(disc, problem)?)
        } else {
            None
        };
        let time_ms = state.time / MS;
        let mut out = Vec::new();
        for p in &self.probes {
            for (fname, sel) in &p.fields {
                let value = match (&p.location, sel) {
                    (Location::Bulk { side, cell, bary }, FieldSel::Phi) => state.phi(*side).eval_cell(*cell, bary) / MV,
                    (Location::Bulk { side, cell, bary }, FieldSel::Conc(k)) => state.conc(*side)[*k].eval_cell(*cell, bary),
                    (Location::Membrane { dof }, FieldSel::PhiM) => state.phi_m[*dof] / MV,
                    // A/m² → µA/cm²
                    (Location::Membrane { dof }, FieldSel::CurrentM) => state.membrane_current[*dof] * 0.1,
                    (Location::Membrane { dof }, FieldSel::Reversal(k)) => {
                        reversal.as_ref().expect("computed above")[*k][*dof] / MV
                    }
                    (Location::Membrane { dof }, FieldSel::Trace(k, side)) => {
                        let bulk = disc.trace.map(*side)[*dof];
                        state.conc(*side)[*k].values[bulk]
                    }
                    (Location::Membrane { dof }, FieldSel::Gate(g)) => {
                        let gates = state.gates[*dof];
                        [gates.m, gates.h, gates.n][*g]
                    }
                    _ => unreachable!("fields are parsed per location kind"),
                };
                out.push(ProbeRecord {
                    time_ms,
                    probe: p.name.clone(),
                    field: fname.clone(),
                    value,
                });
            }
        }
        Ok(out)
    }
}

fn nearest_membrane_dof(disc: &Discretization, x: &[f64]) -> Option<usize> {
    let h = (0..disc.mesh.dim())
        .map(|a| disc.mesh.grid().spacing(a))
        .fold(f64::INFINITY, f64::min);
    disc.membrane
        .dof_coords()
        .iter()
        .enumerate()
        .map(|(i, c)| (i, x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()))
        .filter(|&(_, d)| d <= h)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// A scenario ready to run.
pub struct Prepared {
    pub config: ScenarioConfig,
    pub simulator: Simulator,
    pub state: SystemState,
    pub probes: ProbeSet,
}

impl Prepared {
    pub fn new(config: &ScenarioConfig) -> Result<Self, Error> {
        config.validate()?;
        let disc = Arc::new(Discretization::new(config.build_mesh()?, config.geometry.degree)?);
        Self::with_discretization(config, disc)
    }

    /// Shares an existing discretization, which must come from the same
    /// geometry.
    pub fn with_discretization(config: &ScenarioConfig, disc: Arc<Discretization>) -> Result<Self, Error> {
        let problem = config.problem();
        let probes = ProbeSet::resolve(config, &disc, &problem)?;
        let state = SystemState::resting(&disc, &problem);
        let mut simulator = Simulator::new(disc, problem)?;
        simulator.set_residual_tolerance(config.solver.residual_tolerance);
        Ok(Prepared {
            config: config.clone(),
            simulator,
            state,
            probes,
        })
    }

    pub fn disc(&self) -> &Arc<Discretization> {
        &self.simulator.disc
    }

    pub fn sample(&self) -> Result<Vec<ProbeRecord>, Error> {
        self.probes.sample(&self.state, &self.simulator.disc, &self.simulator.problem)
    }
}

/// Hooks called by [`time_loop`].
pub trait Observer {
    /// Called for the initial state (`report = None`) and after every step.
    fn observe(&mut self, run: &Prepared, report: Option<&StepReport>) -> Result<(), Error>;
}

impl Observer for () {
    fn observe(&mut self, _: &Prepared, _: Option<&StepReport>) -> Result<(), Error> {
        Ok(())
    }
}

impl<F: FnMut(&Prepared, Option<&StepReport>) -> Result<(), Error>> Observer for F {
    fn observe(&mut self, run: &Prepared, report: Option<&StepReport>) -> Result<(), Error> {
        self(run, report)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time_ms: f64,
    pub wall_time_s: f64,
    /// Largest per-species relative change of total ion content over a step.
    pub max_relative_content_change: f64,
    pub max_grounding_error: f64,
    pub min_concentration_mM: f64,
    pub clamped_coefficients: usize,
    pub solver: SolverStats,
}

/// Advances `run` by `steps` steps of length `dt_ms`.
pub fn time_loop(run: &mut Prepared, dt_ms: f64, steps: usize, observer: &mut dyn Observer) -> Result<RunSummary, Error> {
    if !(dt_ms > 0.0) {
        return Err(Error::config("time step must be positive"));
    }
    let start = Instant::now();
    let dt = dt_ms * MS;
    let mut max_change = 0.0f64;
    let mut max_ground = run.simulator.grounding_error(&run.state);
    let mut min_conc = run.state.min_concentration();
    let mut clamped = 0;
    observer.observe(run, None)?;
    for _ in 0..steps {
        let report = run.simulator.step(&mut run.state, dt, None)?;
        for d in &report.content_change {
            max_change = max_change.max(d.abs());
        }
        max_ground = max_ground.max(report.grounding_error);
        min_conc = min_conc.min(report.min_concentration);
        clamped += report.clamped;
        observer.observe(run, Some(&report))?;
    }
    Ok(RunSummary {
        steps,
        final_time_ms: run.state.time / MS,
        wall_time_s: start.elapsed().as_secs_f64(),
        max_relative_content_change: max_change,
        max_grounding_error: max_ground,
        min_concentration_mM: min_conc,
        clamped_coefficients: clamped,
        solver: run.simulator.solver_stats().clone(),
    })
}

/// Records probes every `every` steps (and at the first and last state).
pub struct ProbeRecorder {
    pub every: usize,
    pub last_step: usize,
    pub records: Vec<ProbeRecord>,
}

impl ProbeRecorder {
    pub fn new(config: &ScenarioConfig, dt_ms: f64, steps: usize) -> Self {
        let every = config
            .output
            .probe_every_ms
            .map_or(1, |p| ((p / dt_ms).round() as usize).max(1));
        ProbeRecorder {
            every,
            last_step: steps,
            records: Vec::new(),
        }
    }

    pub fn due(&self, step: usize) -> bool {
        step % self.every == 0 || step == self.last_step
    }
}

impl Observer for ProbeRecorder {
    fn observe(&mut self, run: &Prepared, _: Option<&StepReport>) -> Result<(), Error> {
        if self.due(run.state.step) {
            self.records.extend(run.sample()?);
        }
        Ok(())
    }
}

/// Outcome of a paired KNP-EMI / EMI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub time_ms: f64,
    pub sigma_intra_uS_per_um: f64,
    pub sigma_extra_uS_per_um: f64,
    /// max |φ_e^KNP − φ_e^EMI| over the extracellular dofs, mV.
    pub max_abs_phi_e_diff_mV: f64,
    pub max_abs_phi_i_diff_mV: f64,
    pub max_abs_phi_m_diff_mV: f64,
    /// Range (max − min) of φ_e in each framework, mV.
    pub phi_e_range_knp_mV: f64,
    pub phi_e_range_emi_mV: f64,
    pub knp: RunSummary,
    pub emi: RunSummary,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / MV
}

fn range(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    (hi - lo) / MV
}

/// Runs the scenario under both bulk models on one mesh and compares the
/// potentials at the final time. `sigma` overrides the volume-conductor
/// conductivities (µS/µm); by default they follow from the initial
/// concentrations.
pub fn compare_runs(
    config: &ScenarioConfig,
    dt_ms: f64,
    steps: usize,
    sigma: Option<(f64, f64)>,
) -> Result<(Comparison, Prepared, Prepared), Error> {
    let mut knp_cfg = config.clone();
    knp_cfg.framework = FrameworkKind::KnpEmi;
    let mut emi_cfg = config.clone();
    emi_cfg.framework = FrameworkKind::Emi;
    if let Some((si, se)) = sigma {
        emi_cfg.emi.sigma_intra_uS_per_um = Some(si);
        emi_cfg.emi.sigma_extra_uS_per_um = Some(se);
    }
    let mut knp = Prepared::new(&knp_cfg)?;
    let mut emi = Prepared::with_discretization(&emi_cfg, knp.disc().clone())?;
    let (rk, re) = std::thread::scope(|s| {
        let h = s.spawn(|| time_loop(&mut emi, dt_ms, steps, &mut ()));
        let rk = time_loop(&mut knp, dt_ms, steps, &mut ());
        (rk, h.join().expect("EMI run panicked"))
    });
    let (rk, re) = (rk?, re?);
    let (si, se) = match emi.simulator.problem.framework {
        Framework::Emi {
            sigma_intra,
            sigma_extra,
        } => (sigma_intra, sigma_extra),
        Framework::Knp => unreachable!("EMI run"),
    };
    let cmp = Comparison {
        time_ms: knp.state.time / MS,
        sigma_intra_uS_per_um: si,
        sigma_extra_uS_per_um: se,
        max_abs_phi_e_diff_mV: max_abs_diff(&knp.state.phi_extra.values, &emi.state.phi_extra.values),
        max_abs_phi_i_diff_mV: max_abs_diff(&knp.state.phi_intra.values, &emi.state.phi_intra.values),
        max_abs_phi_m_diff_mV: max_abs_diff(&knp.state.phi_m, &emi.state.phi_m),
        phi_e_range_knp_mV: range(&knp.state.phi_extra.values),
        phi_e_range_emi_mV: range(&emi.state.phi_extra.values),
        knp: rk,
        emi: re,
    };
    Ok((cmp, knp, emi))
}
