use crate::error::Error;
use crate::membrane::StimulusProfile;

use super::config::*;

pub const BUILTIN_NAMES: [&str; 7] = ["A", "B", "C1", "C2", "C3", "D", "D-reduced"];

fn cell(lower: &[f64], upper: &[f64]) -> CellBox {
    CellBox {
        lower_um: lower.to_vec(),
        upper_um: upper.to_vec(),
    }
}

fn probe(name: &str, point: &[f64], region: ProbeRegion, fields: &[&str]) -> ProbeConfig {
    ProbeConfig {
        name: name.into(),
        point_um: point.to_vec(),
        to_um: None,
        samples: None,
        region,
        fields: fields.iter().map(|s| s.to_string()).collect(),
    }
}

fn line(name: &str, from: &[f64], to: &[f64], samples: usize, fields: &[&str]) -> ProbeConfig {
    ProbeConfig {
        to_um: Some(to.to_vec()),
        samples: Some(samples),
        ..probe(name, from, ProbeRegion::Auto, fields)
    }
}

fn base(name: &str, description: &str, geometry: GeometryConfig) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        description: description.into(),
        framework: FrameworkKind::KnpEmi,
        geometry,
        constants: ConstantsConfig::default(),
        species: default_species_config(),
        membrane: MembraneConfig::default(),
        stimuli: Vec::new(),
        boundary: BoundaryKind::DirichletInitial,
        time: TimeConfig::default(),
        probes: Vec::new(),
        output: OutputConfig::default(),
        solver: SolverConfig::default(),
        emi: EmiConfig::default(),
    }
}

const MEMBRANE_FIELDS: [&str; 7] = ["phi_m", "I_M", "E_Na", "E_K", "E_Cl", "Na_i", "K_e"];

fn model_a() -> ScenarioConfig {
    let mut s = base(
        "A",
        "Single 2D cell in a 60x60 um box, passive membrane, growing synaptic input at the left end",
        GeometryConfig {
            lower_um: vec![0.0, 0.0],
            upper_um: vec![60.0, 60.0],
            resolution: vec![30, 30],
            degree: 1,
            cells: vec![cell(&[6.0, 28.0], &[56.0, 34.0])],
        },
    );
    s.stimuli.push(StimulusConfig {
        g_syn_mS_per_cm2: 125.0,
        time_constant_ms: 1.0,
        onsets_ms: vec![0.0],
        axis: "x".into(),
        window_um: [5.0, 10.0],
        cells: vec![],
        profile: StimulusProfile::Growing,
    });
    s.probes = vec![
        probe("stim_end", &[6.0, 34.0], ProbeRegion::Membrane, &MEMBRANE_FIELDS),
        probe("far_end", &[56.0, 34.0], ProbeRegion::Membrane, &MEMBRANE_FIELDS),
        line("above", &[6.0, 36.0], &[56.0, 36.0], 26, &["phi", "Na", "K", "Cl"]),
    ];
    s
}

fn model_b() -> ScenarioConfig {
    base(
        "B",
        "Manufactured-solution geometry on the unit square (lengths in the solution's own units); \
         used by the convergence study, not by time-domain runs",
        GeometryConfig {
            lower_um: vec![0.0, 0.0],
            upper_um: vec![1.0, 1.0],
            resolution: vec![8, 8],
            degree: 1,
            cells: vec![cell(&[0.25, 0.25], &[0.75, 0.75])],
        },
    )
}

fn model_c(name: &str, cells: Vec<CellBox>, windows: &[[f64; 2]], probes: Vec<ProbeConfig>) -> ScenarioConfig {
    let mut s = base(
        name,
        "2D cells in a 120x120 um box, passive membranes, zero ion flux on the outer boundary",
        GeometryConfig {
            lower_um: vec![0.0, 0.0],
            upper_um: vec![120.0, 120.0],
            resolution: vec![120, 120],
            degree: 1,
            cells,
        },
    );
    s.boundary = BoundaryKind::ZeroIonFlux;
    s.output.probe_every_ms = Some(0.5);
    for (i, w) in windows.iter().enumerate() {
        s.stimuli.push(StimulusConfig {
            g_syn_mS_per_cm2: 12.5,
            time_constant_ms: 1.0,
            onsets_ms: vec![0.0],
            axis: "x".into(),
            window_um: *w,
            cells: vec![i as u32 + 1],
            profile: StimulusProfile::Growing,
        });
    }
    s.probes = probes;
    s
}

/// Builtin scenarios. `D-reduced` is a desk-scale stand-in for D with short
/// axons and a coarse axial grid; its numbers are qualitative only.
pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig, Error> {
    let cfg = match name {
        "A" => model_a(),
        "B" => model_b(),
        "C1" => model_c(
            "C1",
            vec![cell(&[35.0, 57.0], &[85.0, 63.0])],
            &[[35.0, 40.0]],
            vec![
                line("above", &[35.0, 65.0], &[85.0, 65.0], 51, &["phi"]),
                probe("membrane_mid", &[60.0, 63.0], ProbeRegion::Membrane, &MEMBRANE_FIELDS),
            ],
        ),
        "C2" => model_c(
            "C2",
            vec![cell(&[35.0, 52.0], &[85.0, 58.0]), cell(&[35.0, 62.0], &[85.0, 68.0])],
            &[[60.0, 65.0], [60.0, 65.0]],
            vec![
                line("between", &[35.0, 60.0], &[85.0, 60.0], 51, &["phi"]),
                line("above", &[35.0, 70.0], &[85.0, 70.0], 51, &["phi"]),
            ],
        ),
        "C3" => model_c(
            "C3",
            vec![cell(&[35.0, 49.0], &[85.0, 55.0]), cell(&[35.0, 65.0], &[85.0, 71.0])],
            &[[35.0, 40.0], [55.0, 60.0]],
            vec![
                line("between", &[35.0, 60.0], &[85.0, 60.0], 51, &["phi"]),
                line("above", &[35.0, 73.0], &[85.0, 73.0], 51, &["phi"]),
            ],
        ),
        "D" => model_d("D", 400.0, [0.625, 0.1], 40.0, 60.0),
        "D-reduced" => model_d("D-reduced", 60.0, [2.5, 0.1], 20.0, 40.0),
        other => {
            return Err(Error::config(format!(
                "unknown scenario '{other}' (expected one of {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Label of the centre axon in the 3x3 bundle.
pub const CENTER_AXON: u32 = 5;
/// Label of the neighbour probed in the bundle runs (directly below the centre in y).
pub const NEIGHBOR_AXON: u32 = 2;

/// 3D bundle of nine 0.2x0.2 um axons, 0.1 um apart, running along x and
/// ending 5 um short of each end of the box. Labels run over (y, z) rows:
/// label = 1 + 3 i_y + i_z, so 5 is the centre axon.
fn model_d(name: &str, length: f64, spacing: [f64; 2], last_onset: f64, end: f64) -> ScenarioConfig {
    let offsets = [0.3, 0.6, 0.9];
    let mut cells = Vec::new();
    for &y in &offsets {
        for &z in &offsets {
            cells.push(cell(&[5.0, y, z], &[length - 5.0, y + 0.2, z + 0.2]));
        }
    }
    let mut onsets = Vec::new();
    let mut t = 0.0;
    while t <= last_onset + 1e-9 {
        onsets.push(t);
        t += 20.0;
    }
    let resolution = vec![
        (length / spacing[0]).round() as usize,
        (1.4 / spacing[1]).round() as usize,
        (1.4 / spacing[1]).round() as usize,
    ];
    let description = if name == "D" {
        "Nine 390 um axons in a 3D bundle, Hodgkin-Huxley membranes, centre axon stimulated every 20 ms"
    } else {
        "Desk-scale bundle of nine 50 um axons (qualitative only), Hodgkin-Huxley membranes, \
         centre axon stimulated every 20 ms"
    };
    let mut s = base(
        name,
        description,
        GeometryConfig {
            lower_um: vec![0.0, 0.0, 0.0],
            upper_um: vec![length, 1.4, 1.4],
            resolution,
            degree: 1,
            cells,
        },
    );
    s.membrane.model = MembraneKind::HodgkinHuxley;
    s.time = TimeConfig { dt_ms: 0.1, end_ms: end };
    s.output.probe_every_ms = Some(0.1);
    s.stimuli.push(StimulusConfig {
        g_syn_mS_per_cm2: 4.0,
        time_constant_ms: 2.0,
        onsets_ms: onsets,
        axis: "x".into(),
        window_um: [5.0, 15.0],
        cells: vec![CENTER_AXON],
        profile: StimulusProfile::Decaying,
    });
    let mid = (length / 2.0 / spacing[0]).round() * spacing[0];
    let fields = ["phi_m", "E_Na", "E_K", "Na_i", "K_i", "Na_e", "K_e", "m", "h", "n"];
    s.probes = vec![
        probe("center", &[mid, 0.8, 0.7], ProbeRegion::Membrane, &fields),
        probe("neighbor", &[mid, 0.5, 0.7], ProbeRegion::Membrane, &fields),
        probe("gap", &[mid, 0.55, 0.7], ProbeRegion::Extra, &["phi", "Na", "K"]),
    ];
    s
}

/// Moves the stimulus of a bundle scenario from the centre axon to the
/// eight axons around it.
pub fn stimulate_neighbors(cfg: &mut ScenarioConfig) {
    for s in &mut cfg.stimuli {
        s.cells = (1..=9).filter(|&l| l != CENTER_AXON).collect();
    }
}
