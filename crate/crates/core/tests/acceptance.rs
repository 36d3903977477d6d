//! Acceptance checks. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing the test harness capture) and then asserts it.
//!
//! The long-running scenarios are shared between tests through `OnceLock`,
//! so running the whole file costs one C1 run, one C2 comparison, one
//! D-reduced run and two short bundle EMI runs.

use std::cell::Cell;
use std::io::Write as _;
use std::sync::OnceLock;

use knpemi::fespace::Side;
use knpemi::knp::StepReport;
use knpemi::membrane::{
    capacitive_fraction, channel_conductances, channel_currents, default_species, gating_step, membrane_flux_split,
    nernst, ode_substeps, Gates, MembraneModel, PhysicalConstants, MS_PER_CM2,
};
use knpemi::scenario::{
    builtin_scenario, compare_runs, stimulate_neighbors, time_loop, FrameworkKind, Prepared, ProbeRecord,
    ProbeRecorder, MS, MV,
};
use knpemi::verify::{convergence_study, error_names, ExactSolution, VALENCES};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn report(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {name}: {detail}");
    assert!(pass, "{name}: {detail}");
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

fn series(records: &[ProbeRecord], probe: &str, field: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.probe == probe && r.field == field)
        .map(|r| (r.time_ms, r.value))
        .collect()
}

// ---------------------------------------------------------------- convergence

/// Rows n = 8, 16, 32, 64 in the column order of `error_names`.
const REFERENCE_ERRORS: [[f64; 17]; 4] = [
    [
        9.01e-3, 3.12e-2, 2.54e-1, 8.80e-1, 9.01e-3, 1.04e-2, 2.54e-1, 2.93e-1, 1.80e-2, 4.16e-2, 5.08e-1, 1.17e0,
        5.83e-2, 1.43e-1, 1.69e0, 1.43e0, 7.03e0,
    ],
    [
        2.33e-3, 8.08e-3, 1.30e-1, 4.50e-1, 2.33e-3, 2.69e-3, 1.30e-1, 1.50e-1, 4.67e-3, 1.08e-2, 2.60e-1, 6.00e-1,
        1.61e-2, 3.81e-2, 8.66e-1, 7.43e-1, 2.54e0,
    ],
    [
        5.88e-4, 2.04e-3, 6.53e-2, 2.26e-1, 5.88e-4, 6.79e-4, 6.53e-2, 7.54e-2, 1.18e-3, 2.72e-3, 1.31e-1, 3.02e-1,
        4.13e-3, 9.67e-3, 4.35e-1, 3.76e-1, 8.93e-1,
    ],
    [
        1.47e-4, 5.10e-4, 3.27e-2, 1.13e-1, 1.47e-4, 1.70e-4, 3.27e-2, 3.78e-2, 2.95e-4, 6.82e-4, 6.54e-2, 1.51e-1,
        1.04e-3, 2.43e-3, 2.18e-1, 1.89e-1, 3.14e-1,
    ],
];

#[test]
fn convergence_table() {
    let report_data = convergence_study(&[0, 1, 2, 3], 1).expect("convergence study");
    let names = error_names();
    let mut worst_rel = (0.0f64, String::new());
    let mut bad_rates = Vec::new();
    for (i, row) in report_data.rows.iter().enumerate() {
        for (j, name) in names.iter().enumerate() {
            let rel = (row.errors[j] - REFERENCE_ERRORS[i][j]).abs() / REFERENCE_ERRORS[i][j];
            if rel > worst_rel.0 {
                worst_rel = (rel, format!("{name} n={}", row.n));
            }
        }
        if let Some(rates) = report_data.rates(i) {
            for (j, name) in names.iter().enumerate() {
                let (lo, hi) = if name == "I_M_L2" {
                    (1.3, 1.7)
                } else if name.ends_with("_L2") {
                    (1.85, 2.15)
                } else {
                    (0.9, 1.1)
                };
                if !(rates[j] >= lo && rates[j] <= hi) {
                    bad_rates.push(format!("{name} n={} rate {:.2}", row.n, rates[j]));
                }
            }
        }
    }
    let last = report_data.rates(3).expect("rates");
    let im = names.iter().position(|n| n == "I_M_L2").unwrap();
    report(
        "convergence errors within 5% and rates",
        worst_rel.0 <= 0.05 && bad_rates.is_empty(),
        &format!(
            "max relative deviation {:.2}% ({}), I_M rate {:.2}, rates out of band: {}",
            100.0 * worst_rel.0,
            worst_rel.1,
            last[im],
            if bad_rates.is_empty() { "none".to_string() } else { bad_rates.join("; ") }
        ),
    );
}

// ------------------------------------------------------ bulk conductivity

#[test]
fn bulk_conductivities() {
    let cfg = builtin_scenario("C2").unwrap();
    let (si, se) = cfg.emi_sigma();
    report(
        "bulk conductivity",
        (si - 2.01).abs() <= 0.02 && (se - 1.31).abs() <= 0.02,
        &format!("σ_i = {si:.4} µS/µm (2.01 ± 0.02), σ_e = {se:.4} µS/µm (1.31 ± 0.02)"),
    );
}

// ---------------------------------------------------------- Model C1 run

struct C1Outcome {
    max_content_change: f64,
    worst_species: String,
    max_grounding: f64,
    line_range: f64,
    time_ms: f64,
}

fn c1() -> &'static C1Outcome {
    static RUN: OnceLock<C1Outcome> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = builtin_scenario("C1").unwrap();
        let names: Vec<String> = cfg.species.iter().map(|s| s.name.clone()).collect();
        let mut run = Prepared::new(&cfg).expect("C1 setup");
        let steps = cfg.time.num_steps();
        let mut per_species = vec![0.0f64; names.len()];
        let mut max_grounding = 0.0f64;
        let mut observer = |_: &Prepared, r: Option<&StepReport>| {
            if let Some(r) = r {
                for (m, d) in per_species.iter_mut().zip(&r.content_change) {
                    *m = m.max(*d);
                }
                max_grounding = max_grounding.max(r.grounding_error);
            }
            Ok(())
        };
        time_loop(&mut run, cfg.time.dt_ms, steps, &mut observer).expect("C1 run");
        let line: Vec<f64> = run
            .sample()
            .unwrap()
            .into_iter()
            .filter(|r| r.probe.starts_with("above_") && r.field == "phi")
            .map(|r| r.value)
            .collect();
        let range = line.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - line.iter().cloned().fold(f64::INFINITY, f64::min);
        let (k, &max_change) = per_species
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        C1Outcome {
            max_content_change: max_change,
            worst_species: names[k].clone(),
            max_grounding,
            line_range: range,
            time_ms: run.state.time / MS,
        }
    })
}

#[test]
fn c1_conservation_and_grounding() {
    let o = c1();
    report(
        "C1 conservation and grounding",
        o.max_content_change <= 1e-8 && o.max_grounding <= 1e-10,
        &format!(
            "max per-step relative content change {:.2e} ({}; bound 1e-8), max |∫φ_e|/(|Ω_e| max|φ_e|) {:.2e} (bound 1e-10)",
            o.max_content_change, o.worst_species, o.max_grounding
        ),
    );
}

#[test]
fn c1_field_scale() {
    let o = c1();
    report(
        "C1 field scale",
        (o.line_range - 0.12).abs() <= 0.04,
        &format!(
            "φ_e range along y = 65 µm at t = {:.1} ms is {:.4} mV (0.12 ± 0.04)",
            o.time_ms, o.line_range
        ),
    );
}

// ---------------------------------------------------------------- Model C2

#[test]
fn c2_knp_vs_emi() {
    let cfg = builtin_scenario("C2").unwrap();
    let (cmp, _, _) = compare_runs(&cfg, cfg.time.dt_ms, cfg.time.num_steps(), None).expect("C2 comparison");
    let d = cmp.max_abs_phi_e_diff_mV;
    report(
        "C2 KNP-EMI vs EMI",
        (0.005..=0.06).contains(&d),
        &format!(
            "max |Δφ_e| at t = {:.1} ms is {d:.4} mV (band [0.005, 0.06]); φ_e range KNP {:.4} mV, EMI {:.4} mV",
            cmp.time_ms, cmp.phi_e_range_knp_mV, cmp.phi_e_range_emi_mV
        ),
    );
}

// ------------------------------------------------------ Model D-reduced

const REST_MV: f64 = -67.74;

fn bundle() -> &'static (Vec<ProbeRecord>, Vec<f64>) {
    static RUN: OnceLock<(Vec<ProbeRecord>, Vec<f64>)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = builtin_scenario("D-reduced").unwrap();
        let steps = cfg.time.num_steps();
        let mut run = Prepared::new(&cfg).expect("D-reduced setup");
        let mut rec = ProbeRecorder::new(&cfg, cfg.time.dt_ms, steps);
        time_loop(&mut run, cfg.time.dt_ms, steps, &mut rec).expect("D-reduced run");
        (rec.records, cfg.stimuli[0].onsets_ms.clone())
    })
}

#[test]
fn bundle_center_fires_per_onset() {
    let (records, onsets) = bundle();
    let phi = series(records, "center", "phi_m");
    let end = phi.last().unwrap().0;
    let peaks: Vec<f64> = onsets
        .iter()
        .enumerate()
        .map(|(i, &t0)| {
            let t1 = onsets.get(i + 1).copied().unwrap_or(end + 1.0);
            phi.iter()
                .filter(|(t, _)| *t >= t0 && *t < t1)
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    report(
        "D-reduced (a) centre axon fires per onset",
        peaks.iter().all(|&p| p > 0.0) && (phi[0].1 - REST_MV).abs() < 1e-6,
        &format!("peak φ_M after onsets {onsets:?} ms: {peaks:.2?} mV (must exceed 0)"),
    );
}

#[test]
fn bundle_neighbor_stays_subthreshold() {
    let (records, _) = bundle();
    let phi = series(records, "neighbor", "phi_m");
    let peak = phi.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let depolarization = peak - REST_MV;
    report(
        "D-reduced (b) neighbour depolarization",
        (0.2..=10.0).contains(&depolarization) && peak < -20.0,
        &format!("peak φ_M {peak:.3} mV, depolarization {depolarization:.3} mV (band [0.2, 10], no crossing of −20 mV)"),
    );
}

#[test]
fn bundle_concentration_drift() {
    let (records, _) = bundle();
    let change = |field: &str| {
        let s = series(records, "center", field);
        s.last().unwrap().1 - s[0].1
    };
    let (ke, nai, ena, ek) = (change("K_e"), change("Na_i"), change("E_Na"), change("E_K"));
    report(
        "D-reduced (c) concentration drift",
        ke > 0.0 && nai > 0.0 && ena < 0.0 && ek > 0.0,
        &format!("Δ[K]_e {ke:+.3e} mM, Δ[Na]_i {nai:+.3e} mM, ΔE_Na {ena:+.3e} mV, ΔE_K {ek:+.3e} mV"),
    );
}

/// Largest centre-axon depolarization under neighbour stimulation in the
/// volume-conductor model, with the given conductivities (None: from the
/// initial concentrations).
fn emi_center_depolarization(sigma: Option<(f64, f64)>, end_ms: f64) -> f64 {
    let mut cfg = builtin_scenario("D-reduced").unwrap();
    stimulate_neighbors(&mut cfg);
    cfg.framework = FrameworkKind::Emi;
    cfg.time.end_ms = end_ms;
    if let Some((si, se)) = sigma {
        cfg.emi.sigma_intra_uS_per_um = Some(si);
        cfg.emi.sigma_extra_uS_per_um = Some(se);
    }
    cfg.probes.retain(|p| p.name == "center");
    cfg.probes[0].fields = vec!["phi_m".into()];
    let steps = cfg.time.num_steps();
    let mut run = Prepared::new(&cfg).expect("bundle EMI setup");
    let mut rec = ProbeRecorder::new(&cfg, cfg.time.dt_ms, steps);
    time_loop(&mut run, cfg.time.dt_ms, steps, &mut rec).expect("bundle EMI run");
    let phi = series(&rec.records, "center", "phi_m");
    phi.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) - phi[0].1
}

#[test]
fn bundle_low_extracellular_conductivity_couples_more() {
    let low = emi_center_depolarization(Some((1.0, 0.1)), 10.0);
    let bulk = emi_center_depolarization(None, 10.0);
    report(
        "D-reduced (d) EMI conductivity effect",
        low > bulk,
        &format!("centre depolarization with σ = (1.0, 0.1) µS/µm: {low:.4} mV; with bulk σ: {bulk:.4} mV"),
    );
}

// ------------------------------------------------------ membrane identities

fn close(what: &str, a: f64, b: f64, tol: f64) -> Result<(), TestCaseError> {
    if (a - b).abs() <= tol * a.abs().max(b.abs()) {
        Ok(())
    } else {
        Err(TestCaseError::fail(format!("{what}: {a:e} vs {b:e}")))
    }
}

#[test]
fn membrane_identity_suite() {
    let species = default_species();
    let constants = PhysicalConstants::default();
    let model = MembraneModel::HodgkinHuxley { include_leak: true };
    let conc = || prop::collection::vec(0.5f64..200.0, 3);
    let gate = || 0.0f64..=1.0;

    // F Σ z J·n_r = ±I_M and Σ α = 1 for random states
    let strategy = (conc(), conc(), -0.1f64..0.06, gate(), gate(), gate(), 0.0f64..100.0, -50.0f64..50.0);
    let reconstruction = runner(2000).run(&strategy, |(ci, ce, phi, m, h, n, g_syn, i_m)| {
        let reversal: Vec<f64> = species
            .iter()
            .enumerate()
            .map(|(k, s)| nernst(s, ci[k], ce[k], &constants).unwrap())
            .collect();
        let g = channel_conductances(&model, &species, Gates { m, h, n }, g_syn * MS_PER_CM2);
        let (ich, total) = channel_currents(&g, phi, &reversal);
        for (intra, conc, sign) in [(true, &ci, 1.0), (false, &ce, -1.0)] {
            let alpha = capacitive_fraction(&species, conc, intra).unwrap();
            close("Σα", alpha.iter().sum::<f64>(), 1.0, 1e-12)?;
            let charge: f64 = species
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    constants.faraday
                        * s.z()
                        * membrane_flux_split(i_m, ich[k], total, alpha[k], s.z(), constants.faraday, intra)
                })
                .sum();
            let scale = i_m.abs() + ich.iter().map(|v| v.abs()).sum::<f64>();
            if (charge - sign * i_m).abs() > 1e-12 * scale {
                return Err(TestCaseError::fail(format!("F Σ z J·n = {charge:e}, I_M = {i_m:e}")));
            }
        }
        Ok(())
    });

    let antisymmetry = runner(2000).run(&(0usize..3, 0.1f64..500.0, 0.1f64..500.0), |(k, a, b)| {
        let s = &species[k];
        let forward = nernst(s, a, b, &constants).unwrap();
        let backward = nernst(s, b, a, &constants).unwrap();
        if (forward + backward).abs() > 1e-12 * forward.abs().max(1e-3) {
            return Err(TestCaseError::fail(format!("E(a,b) = {forward:e}, E(b,a) = {backward:e}")));
        }
        Ok(())
    });

    let fixed_point = runner(500).run(&(-0.1f64..0.06), |v| {
        let ss = Gates::steady_state(v);
        let next = gating_step(ss, v, 1e-5);
        for (a, b) in [(ss.m, next.m), (ss.h, next.h), (ss.n, next.n)] {
            if (a - b).abs() > 1e-12 {
                return Err(TestCaseError::fail(format!("steady state moves at {v} V: {a} → {b}")));
            }
        }
        Ok(())
    });

    // 100 ms Hodgkin-Huxley runs under repeated strong input
    let reversal: Vec<f64> = species
        .iter()
        .map(|s| nernst(s, s.initial_intra, s.initial_extra, &constants).unwrap())
        .collect();
    let confinement = runner(20).run(&(0.0f64..50.0, 0.2f64..5.0), |(g_syn, alpha_ms)| {
        let mut phi = REST_MV * MV;
        let mut gates = Gates::steady_state(phi);
        let dt = 0.01 * MS;
        for step in 0..10_000 {
            let t = step as f64 * dt;
            (phi, gates) = ode_substeps(&model, &species, &reversal, constants.capacitance, phi, gates, t, dt, 4, |s| {
                let since = s % (20.0 * MS);
                g_syn * MS_PER_CM2 * (-since / (alpha_ms * MS)).exp()
            });
            for p in [gates.m, gates.h, gates.n] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(TestCaseError::fail(format!("gate {p} left [0, 1] at {t} s")));
                }
            }
            if !phi.is_finite() {
                return Err(TestCaseError::fail("φ_M became non-finite"));
            }
        }
        Ok(())
    });

    let results = [
        ("F Σ z J·n = I_M and Σα = 1", reconstruction.map_err(|e| e.to_string())),
        ("Nernst antisymmetry", antisymmetry.map_err(|e| e.to_string())),
        ("gating fixed point", fixed_point.map_err(|e| e.to_string())),
        ("gates confined over 100 ms", confinement.map_err(|e| e.to_string())),
    ];
    let failures: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    report(
        "membrane identity suite",
        failures.is_empty(),
        &if failures.is_empty() {
            "flux reconstruction (2000 states), Σα = 1, Nernst antisymmetry, gating fixed point, gate confinement all hold"
                .to_string()
        } else {
            failures.join("; ")
        },
    );
}

// ------------------------------------------------------------ MMS oracle

/// Hyper-dual number f + f_a ε_a + f_b ε_b + f_ab ε_a ε_b with ε² = 0.
/// Seeding ε_a = ε_b along one coordinate yields the first and second
/// derivative along it.
#[derive(Clone, Copy, Debug)]
struct Jet {
    v: f64,
    a: f64,
    b: f64,
    ab: f64,
}

impl Jet {
    fn c(v: f64) -> Jet {
        Jet { v, a: 0.0, b: 0.0, ab: 0.0 }
    }
    fn var(v: f64) -> Jet {
        Jet { v, a: 1.0, b: 1.0, ab: 0.0 }
    }
    fn chain(self, f: f64, d1: f64, d2: f64) -> Jet {
        Jet {
            v: f,
            a: d1 * self.a,
            b: d1 * self.b,
            ab: d1 * self.ab + d2 * self.a * self.b,
        }
    }
    fn sin(self) -> Jet {
        self.chain(self.v.sin(), self.v.cos(), -self.v.sin())
    }
    fn cos(self) -> Jet {
        self.chain(self.v.cos(), -self.v.sin(), -self.v.cos())
    }
    fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, a: self.a + o.a, b: self.b + o.b, ab: self.ab + o.ab }
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            a: self.v * o.a + self.a * o.v,
            b: self.v * o.b + self.b * o.v,
            ab: self.v * o.ab + self.a * o.b + self.b * o.a + self.ab * o.v,
        }
    }
}

impl std::ops::Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::c(self) * o
    }
}

impl std::ops::Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -1.0 * self
    }
}

/// Amplitudes (a, b) of a + b sin 2πx sin 2πy e^{−t}, per species.
const OR_INTRA: [(f64, f64); 3] = [(0.7, 0.3), (0.3, 0.3), (1.0, 0.6)];
const OR_EXTRA: [(f64, f64); 3] = [(1.0, 0.6), (1.0, 0.2), (2.0, 0.8)];
const TAU: f64 = 2.0 * std::f64::consts::PI;

fn or_conc(k: usize, intra: bool, x: Jet, y: Jet, t: Jet) -> Jet {
    let (a, b) = if intra { OR_INTRA[k] } else { OR_EXTRA[k] };
    Jet::c(a) + b * ((TAU * x).sin() * (TAU * y).sin() * (-t).exp())
}

fn or_phi(intra: bool, x: Jet, y: Jet, t: Jet) -> Jet {
    let g = if intra { Jet::c(1.0) + (-t).exp() } else { Jet::c(1.0) };
    (TAU * x).cos() * (TAU * y).cos() * g
}

/// Seeds one of (x, y, t) as the active variable.
fn seeded(p: [f64; 3], axis: usize) -> (Jet, Jet, Jet) {
    let s = |i: usize| if i == axis { Jet::var(p[i]) } else { Jet::c(p[i]) };
    (s(0), s(1), s(2))
}

/// Flux component J_axis = −∂c − z c ∂φ and its derivative along `axis`.
fn or_flux(k: usize, intra: bool, p: [f64; 3], axis: usize) -> (f64, f64) {
    let (x, y, t) = seeded(p, axis);
    let c = or_conc(k, intra, x, y, t);
    let phi = or_phi(intra, x, y, t);
    let z = VALENCES[k];
    let value = -c.a - z * c.v * phi.a;
    let derivative = -c.ab - z * (c.a * phi.a + c.v * phi.ab);
    (value, derivative)
}

fn or_div(k: usize, intra: bool, p: [f64; 3]) -> f64 {
    or_flux(k, intra, p, 0).1 + or_flux(k, intra, p, 1).1
}

fn or_dt(f: impl Fn(Jet, Jet, Jet) -> Jet, p: [f64; 3]) -> f64 {
    let (x, y, t) = seeded(p, 2);
    f(x, y, t).a
}

#[test]
fn mms_sources_match_autodiff_oracle() {
    let e = ExactSolution;
    let worst = Cell::new(0.0f64);
    let checked = Cell::new(0usize);
    let result = runner(100).run(
        &(0.0f64..1.0, 0.0f64..1.0, 0.0f64..1e-5, 0.0f64..TAU),
        |(x, y, t, angle)| {
            let p = [x, y, t];
            let xv = [x, y, 0.0];
            let n = [angle.cos(), angle.sin(), 0.0];
            let mut pairs: Vec<(&str, f64, f64)> = Vec::new();
            for (intra, side) in [(true, Side::Intra), (false, Side::Extra)] {
                let mut charge = 0.0;
                for k in 0..3 {
                    let dt = or_dt(|x, y, t| or_conc(k, intra, x, y, t), p);
                    let div = or_div(k, intra, p);
                    pairs.push(("concentration source", e.conc_source(k, side, t, &xv), dt + div));
                    charge += VALENCES[k] * div;
                }
                pairs.push(("potential source", e.potential_source(side, t, &xv), -charge));
            }
            let normal_flux = |k: usize, intra: bool| {
                or_flux(k, intra, p, 0).0 * n[0] + or_flux(k, intra, p, 1).0 * n[1]
            };
            let i_m: f64 = (0..3).map(|k| VALENCES[k] * normal_flux(k, true)).sum();
            let i_e: f64 = (0..3).map(|k| VALENCES[k] * normal_flux(k, false)).sum();
            let phi_m = |x, y, t| or_phi(true, x, y, t) + -or_phi(false, x, y, t);
            let phi_m_v = phi_m(Jet::c(x), Jet::c(y), Jet::c(t)).v;
            pairs.push(("membrane current", e.membrane_current(t, &xv, &n), i_m));
            pairs.push(("charge flux mismatch", e.charge_flux_mismatch(t, &xv, &n), i_e - i_m));
            pairs.push((
                "capacitor residual",
                e.capacitor_residual(t, &xv, &n),
                or_dt(phi_m, p) - i_m + phi_m_v,
            ));
            for (intra, side, sign) in [(true, Side::Intra, 1.0), (false, Side::Extra, -1.0)] {
                let c: Vec<f64> = (0..3)
                    .map(|k| or_conc(k, intra, Jet::c(x), Jet::c(y), Jet::c(t)).v)
                    .collect();
                let w: f64 = (0..3).map(|k| VALENCES[k] * VALENCES[k] * c[k]).sum();
                for k in 0..3 {
                    let alpha = VALENCES[k] * VALENCES[k] * c[k] / w;
                    let modelled = sign * (phi_m_v / 3.0 + alpha * (i_m - phi_m_v)) / VALENCES[k];
                    pairs.push((
                        "membrane flux mismatch",
                        e.membrane_flux_mismatch(k, side, t, &xv, &n),
                        sign * normal_flux(k, intra) - modelled,
                    ));
                }
            }
            for (what, embedded, oracle) in pairs {
                let err = (embedded - oracle).abs() / oracle.abs().max(1.0);
                worst.set(worst.get().max(err));
                checked.set(checked.get() + 1);
                if err > 1e-12 {
                    return Err(TestCaseError::fail(format!(
                        "{what} at ({x}, {y}, {t}): {embedded:e} vs {oracle:e}"
                    )));
                }
            }
            Ok(())
        },
    );
    report(
        "MMS source oracle",
        result.is_ok(),
        &match &result {
            Ok(()) => format!("100 space-time points, {} values, max relative deviation {:.2e} (bound 1e-12)", checked.get(), worst.get()),
            Err(e) => e.to_string(),
        },
    );
}
