//! WebAssembly bindings for the browser demo in `www/`.

use wasm_bindgen::prelude::*;

use knpemi::fespace::Side;
use knpemi::membrane::{
    bulk_conductivity, default_species, nernst, ode_substeps, Gates, MembraneModel, PhysicalConstants,
    MS_PER_CM2,
};
use knpemi::scenario::{builtin_scenario, Prepared, MS, MV, UM};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Membrane potential (mV) of an isolated Hodgkin-Huxley patch driven by a
/// decaying synaptic conductance `g_syn` (mS/cm²), sampled every `dt_ms`.
#[wasm_bindgen]
pub fn hh_trace(g_syn: f64, alpha_ms: f64, duration_ms: f64, dt_ms: f64) -> Result<Vec<f64>, JsValue> {
    if !(dt_ms > 0.0 && duration_ms >= 0.0 && alpha_ms > 0.0) {
        return Err(js_err("time step, duration and time constant must be positive"));
    }
    let species = default_species();
    let constants = PhysicalConstants::default();
    let reversal = species
        .iter()
        .map(|s| nernst(s, s.initial_intra, s.initial_extra, &constants))
        .collect::<Result<Vec<_>, _>>()
        .map_err(js_err)?;
    let model = MembraneModel::HodgkinHuxley { include_leak: true };
    let rest = -67.74 * MV;
    let mut phi = rest;
    let mut gates = Gates::steady_state(rest);
    let g = g_syn * MS_PER_CM2;
    let (dt, alpha) = (dt_ms * MS, alpha_ms * MS);
    let steps = (duration_ms / dt_ms).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(phi / MV);
    for k in 0..steps {
        let t = k as f64 * dt;
        (phi, gates) = ode_substeps(&model, &species, &reversal, constants.capacitance, phi, gates, t, dt, 25, |s| {
            g * (-s / alpha).exp()
        });
        out.push(phi / MV);
    }
    Ok(out)
}

/// Reversal potentials (mV) and bulk conductivities (µS/µm) for the given
/// concentrations (mM), as a JSON object.
#[wasm_bindgen]
pub fn reversal_table(na_i: f64, na_e: f64, k_i: f64, k_e: f64, cl_i: f64, cl_e: f64) -> Result<String, JsValue> {
    let species = default_species();
    let constants = PhysicalConstants::default();
    let intra = [na_i, k_i, cl_i];
    let extra = [na_e, k_e, cl_e];
    let mut rows = Vec::new();
    for (k, s) in species.iter().enumerate() {
        let e = nernst(s, intra[k], extra[k], &constants).map_err(js_err)?;
        rows.push(serde_json::json!({ "species": s.name, "reversal_mV": e / MV }));
    }
    // S/m equals µS/µm
    let sigma_i = bulk_conductivity(&species, &intra, true, &constants);
    let sigma_e = bulk_conductivity(&species, &extra, false, &constants);
    let charge = |c: &[f64; 3]| species.iter().zip(c).map(|(s, v)| s.z() * v).sum::<f64>();
    Ok(serde_json::json!({
        "species": rows,
        "sigma_intra_uS_per_um": sigma_i,
        "sigma_extra_uS_per_um": sigma_e,
        "net_charge_intra_mM": charge(&intra),
        "net_charge_extra_mM": charge(&extra),
    })
    .to_string())
}

/// A coarse single-axon simulation whose extracellular potential can be
/// stepped and rasterized from JavaScript.
#[wasm_bindgen]
pub struct AxonField {
    run: Prepared,
    dt: f64,
}

#[wasm_bindgen]
impl AxonField {
    /// Single axon in a 60 × 60 µm box on an `n` × `n` grid (n a multiple
    /// of 30 keeps the membrane grid-aligned), stimulus `g_syn` in mS/cm².
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, g_syn: f64, dt_ms: f64) -> Result<AxonField, JsValue> {
        let mut cfg = builtin_scenario("A").map_err(js_err)?;
        cfg.geometry.resolution = vec![n, n];
        for s in &mut cfg.stimuli {
            s.g_syn_mS_per_cm2 = g_syn;
        }
        cfg.time.dt_ms = dt_ms;
        cfg.probes.clear();
        cfg.validate().map_err(js_err)?;
        let run = Prepared::new(&cfg).map_err(js_err)?;
        Ok(AxonField { run, dt: dt_ms * MS })
    }

    pub fn time_ms(&self) -> f64 {
        self.run.state.time / MS
    }

    /// Advances `steps` time steps.
    pub fn advance(&mut self, steps: usize) -> Result<(), JsValue> {
        for _ in 0..steps {
            self.run
                .simulator
                .step(&mut self.run.state, self.dt, None)
                .map_err(js_err)?;
        }
        Ok(())
    }

    /// Potential (mV) on a `w` × `h` raster over the box, row-major from the
    /// bottom-left corner. Points inside the cell report φ_i.
    pub fn raster(&self, w: usize, h: usize) -> Vec<f64> {
        let disc = self.run.disc();
        let mesh = &disc.mesh;
        let side = 60.0 * UM;
        let mut out = Vec::with_capacity(w * h);
        for j in 0..h {
            for i in 0..w {
                let p = [(i as f64 + 0.5) / w as f64 * side, (j as f64 + 0.5) / h as f64 * side];
                let value = mesh.locate(&p, |_| true).map_or(f64::NAN, |(c, bary)| {
                    let s = if mesh.tag(c) == 0 { Side::Extra } else { Side::Intra };
                    let space = disc.space(s);
                    let phi = &self.run.state.phi(s).values;
                    mesh.cell(c)
                        .iter()
                        .zip(bary)
                        .map(|(&v, b)| b * phi[space.vertex_dof(v).expect("vertex dof")])
                        .sum::<f64>()
                });
                out.push(value / MV);
            }
        }
        out
    }

    /// Membrane potential (mV) along the top membrane at `samples` points
    /// from x = 6 µm to x = 56 µm.
    pub fn membrane_profile(&self, samples: usize) -> Vec<f64> {
        (0..samples)
            .map(|k| {
                let x = 6.0 + 50.0 * k as f64 / (samples.max(2) - 1) as f64;
                let at = |side: Side, y: f64| {
                    let disc = self.run.disc();
                    disc.mesh
                        .locate(&[x * UM, y * UM], |t| (t == 0) == (side == Side::Extra))
                        .map_or(f64::NAN, |(c, bary)| {
                            let space = disc.space(side);
                            let phi = &self.run.state.phi(side).values;
                            disc.mesh
                                .cell(c)
                                .iter()
                                .zip(bary)
                                .map(|(&v, b)| b * phi[space.vertex_dof(v).expect("vertex dof")])
                                .sum::<f64>()
                        })
                };
                (at(Side::Intra, 34.0) - at(Side::Extra, 34.0)) / MV
            })
            .collect()
    }
}
