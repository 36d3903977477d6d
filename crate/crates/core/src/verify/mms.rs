use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fespace::{assemble_load, broken_l2_error, h1_error, l2_error, Field, Side};
use crate::geometry::{build_box_mesh, tag_subdomains, AxisBox};
use crate::knp::{BoundaryCondition, Discretization, Framework, Grounding, Problem, Simulator, SourceTerms, SystemState};
use crate::membrane::{Gates, IonSpecies, MembraneModel, PhysicalConstants};

use super::exact::{ExactSolution, SPECIES_NAMES, VALENCES};

/// Time step of the coarsest level (n = 8); it is quartered per level.
pub const BASE_TIME_STEP: f64 = 1.0 / 64.0 * 1e-5;
/// Steps taken before errors are measured.
pub const MMS_STEPS: usize = 2;

/// Source terms handed to the simulator.
pub struct MmsSources {
    pub exact: ExactSolution,
    /// ∫_{Ω_i} cos 2πx cos 2πy dx on the discrete intracellular region.
    cos_integral: f64,
}

impl MmsSources {
    pub fn new(disc: &Discretization) -> Self {
        let load = assemble_load(&disc.intra, 8, |_, x| {
            (2.0 * std::f64::consts::PI * x[0]).cos() * (2.0 * std::f64::consts::PI * x[1]).cos()
        });
        MmsSources {
            exact: ExactSolution,
            cos_integral: load.iter().sum(),
        }
    }
}

impl SourceTerms for MmsSources {
    fn concentration(&self, k: usize, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        self.exact.conc_source(k, side, t, x)
    }

    fn charge(&self, side: Side, t: f64, x: &[f64; 3]) -> f64 {
        -self.exact.potential_source(side, t, x)
    }

    fn membrane_flux(&self, k: usize, side: Side, t: f64, x: &[f64; 3], normal: &[f64; 3]) -> f64 {
        self.exact.membrane_flux_mismatch(k, side, t, x, normal)
    }

    fn membrane_charge(&self, side: Side, t: f64, x: &[f64; 3], normal: &[f64; 3]) -> f64 {
        match side {
            // I_M is defined as the intracellular charge flux
            Side::Intra => 0.0,
            Side::Extra => self.exact.charge_flux_mismatch(t, x, normal),
        }
    }

    fn capacitor(&self, t: f64, x: &[f64; 3], normal: &[f64; 3]) -> f64 {
        self.exact.capacitor_residual(t, x, normal)
    }

    fn boundary_concentration(&self, k: usize, t: f64, x: &[f64; 3]) -> f64 {
        self.exact.conc(k, Side::Extra, t, x)
    }

    fn grounding_target(&self, t: f64) -> f64 {
        (1.0 + (-t).exp()) * self.cos_integral
    }
}

/// The manufactured-solution problem: unit constants, unit diffusion,
/// passive membrane with g = 1/3 per species and zero reversal.
pub fn mms_problem() -> Problem {
    let species = (0..3)
        .map(|k| IonSpecies {
            name: SPECIES_NAMES[k].to_string(),
            valence: VALENCES[k] as i32,
            diffusion_intra: 1.0,
            diffusion_extra: 1.0,
            initial_intra: ExactSolution.conc(k, Side::Intra, 0.0, &[0.0; 3]),
            initial_extra: ExactSolution.conc(k, Side::Extra, 0.0, &[0.0; 3]),
            g_leak: 1.0 / 3.0,
            g_max: 0.0,
        })
        .collect();
    Problem {
        species,
        constants: PhysicalConstants::unit(),
        model: MembraneModel::Passive {
            fixed_reversal: Some(vec![0.0; 3]),
        },
        stimuli: Vec::new(),
        boundary: BoundaryCondition::Dirichlet,
        grounding: Grounding::IntracellularMean,
        framework: Framework::Knp,
        ode_substeps: 1,
        resting_potential: 0.0,
    }
}

/// Unit square with Ω_i = [0.25, 0.75]², n × n squares.
pub fn mms_discretization(n: usize, degree: usize) -> Result<Discretization, Error> {
    if n < 4 || n % 4 != 0 {
        return Err(Error::config(format!("MMS resolution must be a positive multiple of 4, got {n}")));
    }
    let mesh = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[n, n])?;
    let mesh = tag_subdomains(&mesh, &[AxisBox::new(&[0.25, 0.25], &[0.75, 0.75])])?;
    Discretization::new(mesh, degree)
}

/// Interpolant of the exact solution at time t.
pub fn exact_state(disc: &Discretization, problem: &Problem, t: f64) -> SystemState {
    let e = ExactSolution;
    let mut s = SystemState::resting(disc, problem);
    s.time = t;
    for k in 0..3 {
        s.conc_intra[k] = Field::interpolate(&disc.intra, "mol/m^3", |x| e.conc(k, Side::Intra, t, x));
        s.conc_extra[k] = Field::interpolate(&disc.extra, "mol/m^3", |x| e.conc(k, Side::Extra, t, x));
    }
    s.phi_intra = Field::interpolate(&disc.intra, "V", |x| e.phi(Side::Intra, t, x));
    s.phi_extra = Field::interpolate(&disc.extra, "V", |x| e.phi(Side::Extra, t, x));
    let pi = disc.trace.restrict(&s.phi_intra.values, Side::Intra);
    let pe = disc.trace.restrict(&s.phi_extra.values, Side::Extra);
    s.phi_m = pi.iter().zip(&pe).map(|(a, b)| a - b).collect();
    s.gates = vec![Gates { m: 0.0, h: 0.0, n: 0.0 }; s.phi_m.len()];
    s
}

/// Names of the reported error norms, in table order.
pub fn error_names() -> Vec<String> {
    let mut names = Vec::new();
    for s in SPECIES_NAMES {
        for norm in ["L2", "H1"] {
            for r in ["i", "e"] {
                names.push(format!("{s}_{r}_{norm}"));
            }
        }
    }
    for norm in ["L2", "H1"] {
        for r in ["i", "e"] {
            names.push(format!("phi_{r}_{norm}"));
        }
    }
    names.push("I_M_L2".into());
    names
}

/// Errors of one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsErrors {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub time: f64,
    /// In the order of [`error_names`].
    pub errors: Vec<f64>,
}

impl MmsErrors {
    pub fn get(&self, name: &str) -> Option<f64> {
        error_names().iter().position(|n| n == name).map(|i| self.errors[i])
    }
}

/// Errors of the discrete solution against the exact one at its time.
pub fn measure_errors(disc: &Discretization, state: &SystemState) -> Vec<f64> {
    let e = ExactSolution;
    let t = state.time;
    let mut out = Vec::new();
    for k in 0..3 {
        for side in [Side::Intra, Side::Extra] {
            out.push(l2_error(&state.conc(side)[k], |x| e.conc(k, side, t, x)));
        }
        for side in [Side::Intra, Side::Extra] {
            out.push(h1_error(
                &state.conc(side)[k],
                |x| e.conc(k, side, t, x),
                |x| e.conc_grad(k, side, t, x),
            ));
        }
    }
    for side in [Side::Intra, Side::Extra] {
        out.push(l2_error(state.phi(side), |x| e.phi(side, t, x)));
    }
    for side in [Side::Intra, Side::Extra] {
        out.push(h1_error(state.phi(side), |x| e.phi(side, t, x), |x| e.phi_grad(side, t, x)));
    }
    let im = Field::from_values(&disc.membrane, state.membrane_current.clone(), "")
        .expect("membrane current lives on the interface space");
    out.push(broken_l2_error(&im, |c, x| {
        e.membrane_current(t, x, &disc.gamma.facets[c].normal)
    }));
    out
}

/// Runs `steps` steps of size `dt` from the interpolated exact solution on
/// the n × n mesh and measures all errors.
pub fn run_mms_case(n: usize, dt: f64, steps: usize, degree: usize) -> Result<MmsErrors, Error> {
    let disc = Arc::new(mms_discretization(n, degree)?);
    let problem = mms_problem();
    let sources = MmsSources::new(&disc);
    let mut sim = Simulator::new(Arc::clone(&disc), problem.clone())?;
    let mut state = exact_state(&disc, &problem, 0.0);
    for _ in 0..steps {
        sim.step(&mut state, dt, Some(&sources))?;
    }
    Ok(MmsErrors {
        n,
        h: 1.0 / n as f64,
        dt,
        time: state.time,
        errors: measure_errors(&disc, &state),
    })
}

/// Resolution and time step of level `l`: n = 8·2^l, Δt = Δt₀ / 4^l.
pub fn level_parameters(level: usize) -> (usize, f64) {
    (8 << level, BASE_TIME_STEP / 4f64.powi(level as i32))
}

/// Errors per level with rates between consecutive levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub names: Vec<String>,
    pub rows: Vec<MmsErrors>,
}

/// log₂(e_coarse / e_fine), valid because h halves between levels (and
/// Δt quarters, matching the second-order spatial error).
pub fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

impl ConvergenceReport {
    /// Rates of row `i` against row `i − 1`, `None` for the first row.
    pub fn rates(&self, i: usize) -> Option<Vec<f64>> {
        if i == 0 {
            return None;
        }
        let (a, b) = (&self.rows[i - 1], &self.rows[i]);
        Some(a.errors.iter().zip(&b.errors).map(|(&c, &f)| rate(c, f)).collect())
    }

    /// Long-format CSV: n,h,dt_s,time_s,quantity,error,rate.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,dt_s,time_s,quantity,error,rate\n");
        for (i, row) in self.rows.iter().enumerate() {
            let rates = self.rates(i);
            for (j, name) in self.names.iter().enumerate() {
                let r = rates.as_ref().map(|r| format!("{:.2}", r[j])).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{:e},{:e},{:e},{},{:.2E},{}",
                    row.n, row.h, row.dt, row.time, name, row.errors[j], r
                );
            }
        }
        s
    }

    /// Aligned text tables, one per group of quantities.
    pub fn to_table(&self) -> String {
        let groups: Vec<Vec<usize>> = (0..self.names.len())
            .collect::<Vec<_>>()
            .chunks(4)
            .map(|c| c.to_vec())
            .collect();
        let mut out = String::new();
        for g in groups {
            let _ = write!(out, "{:>5}", "n");
            for &j in &g {
                let _ = write!(out, "  {:>16}", self.names[j]);
            }
            out.push('\n');
            for (i, row) in self.rows.iter().enumerate() {
                let rates = self.rates(i);
                let _ = write!(out, "{:>5}", row.n);
                for &j in &g {
                    let r = rates.as_ref().map_or("(-)".to_string(), |r| format!("({:.2})", r[j]));
                    let _ = write!(out, "  {:>16}", format!("{:.2E}{r}", row.errors[j]));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the given levels, in parallel, and collects the report.
pub fn convergence_study(levels: &[usize], degree: usize) -> Result<ConvergenceReport, Error> {
    let results: Vec<Result<MmsErrors, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&l| {
                s.spawn(move || {
                    let (n, dt) = level_parameters(l);
                    run_mms_case(n, dt, MMS_STEPS, degree)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence level panicked"))
            .collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|r| r.n);
    Ok(ConvergenceReport {
        names: error_names(),
        rows,
    })
}
