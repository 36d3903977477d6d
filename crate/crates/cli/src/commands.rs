use std::path::{Path, PathBuf};
use std::time::Instant;

use knpemi::error::Error;
use knpemi::knp::StepReport;
use knpemi::output::{probes_to_csv, write_text, VtkGrid};
use knpemi::scenario::{
    builtin_scenario, compare_runs, time_loop, Observer, Prepared, ProbeRecord, ProbeRecorder, ScenarioConfig,
};
use knpemi::verify::convergence_study;
use log::info;

use crate::manifest::{version, Manifest};
use crate::{CompareArgs, ConvergeArgs, ProbeArgs, RunArgs, ScenarioArgs};

const MMS_BENCHMARK: &str = "B";

fn reject_seedless(flag: bool) -> Result<(), Error> {
    if flag {
        return Err(Error::config(
            "--seedless is reserved: no random numbers are drawn anywhere, so there is no seed to drop",
        ));
    }
    Ok(())
}

pub fn load_scenario(a: &ScenarioArgs) -> Result<ScenarioConfig, Error> {
    reject_seedless(a.seedless)?;
    let mut cfg = match (&a.scenario, &a.config) {
        (Some(name), None) => {
            if name == MMS_BENCHMARK {
                return Err(Error::config(
                    "scenario B is the manufactured-solution benchmark; run it with `knpemi converge`",
                ));
            }
            builtin_scenario(name)?
        }
        (None, Some(path)) => ScenarioConfig::load(path)?,
        _ => return Err(Error::config("give exactly one of --scenario or --config")),
    };
    if let Some(dt) = a.dt_ms {
        cfg.time.dt_ms = dt;
    }
    if let Some(end) = a.end_ms {
        cfg.time.end_ms = end;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Accepts `1ms`, `1 ms` or `1`.
pub fn parse_ms(s: &str) -> Result<f64, Error> {
    let t = s.trim().trim_end_matches("ms").trim();
    match t.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::config(format!("invalid interval '{s}' (expected e.g. 1ms)"))),
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn rel(dir: &Path, p: &Path) -> String {
    p.strip_prefix(dir).unwrap_or(p).display().to_string()
}

struct RunObserver {
    probes: ProbeRecorder,
    snapshot_every: Option<usize>,
    last_step: usize,
    snapshot_dir: PathBuf,
    written: Vec<PathBuf>,
    started: Instant,
}

impl Observer for RunObserver {
    fn observe(&mut self, run: &Prepared, report: Option<&StepReport>) -> Result<(), Error> {
        self.probes.observe(run, report)?;
        let step = run.state.step;
        if let Some(every) = self.snapshot_every {
            if step % every == 0 || step == self.last_step {
                let path = self.snapshot_dir.join(format!("step_{step:06}.vtk"));
                VtkGrid::from_state(run.disc(), &run.simulator.problem, &run.state).write(&path)?;
                self.written.push(path);
            }
        }
        if step > 0 && (step % 100 == 0 || step == self.last_step) {
            info!(
                "step {step}/{} t = {:.3} ms ({:.1} s)",
                self.last_step,
                run.state.time * 1e3,
                self.started.elapsed().as_secs_f64()
            );
        }
        Ok(())
    }
}

pub fn run(a: &RunArgs) -> Result<(), Error> {
    let cfg = load_scenario(&a.scenario)?;
    let snapshot_ms = match &a.snapshot_every {
        Some(s) => Some(parse_ms(s)?),
        None => cfg.output.snapshot_every_ms,
    };
    let dir = &a.out_dir;
    create_dir(dir)?;
    let dt = cfg.time.dt_ms;
    let steps = cfg.time.num_steps();
    let started = Instant::now();
    info!("scenario {}: {steps} steps of {dt} ms", cfg.name);
    let mut run = Prepared::new(&cfg)?;
    let snapshot_dir = dir.join("snapshots");
    if snapshot_ms.is_some() {
        create_dir(&snapshot_dir)?;
    }
    let mut obs = RunObserver {
        probes: ProbeRecorder::new(&cfg, dt, steps),
        snapshot_every: snapshot_ms.map(|s| ((s / dt).round() as usize).max(1)),
        last_step: steps,
        snapshot_dir,
        written: Vec::new(),
        started,
    };
    let summary = time_loop(&mut run, dt, steps, &mut obs)?;

    let probes_path = dir.join("probes.csv");
    write_text(&probes_path, &probes_to_csv(&obs.probes.records))?;
    let config_path = dir.join("config.toml");
    write_text(&config_path, &cfg.to_toml())?;
    let mut outputs = vec![rel(dir, &probes_path), rel(dir, &config_path)];
    outputs.extend(obs.written.iter().map(|p| rel(dir, p)));
    Manifest {
        command: "run".into(),
        version: version(),
        wall_time_s: started.elapsed().as_secs_f64(),
        config: Some(cfg.to_toml()),
        summary: serde_json::to_value(&summary).expect("summary serializes"),
        outputs,
    }
    .write(dir)?;
    println!(
        "{}: {} steps to t = {:.3} ms in {:.1} s; max relative content change {:.2e}, {} probe records",
        cfg.name,
        summary.steps,
        summary.final_time_ms,
        summary.wall_time_s,
        summary.max_relative_content_change,
        obs.probes.records.len()
    );
    Ok(())
}

/// Maps mesh sizes 8, 16, 32, ... to refinement levels 0, 1, 2, ...
pub fn levels_from_sizes(sizes: &[usize]) -> Result<Vec<usize>, Error> {
    if sizes.is_empty() {
        return Err(Error::config("--levels needs at least one mesh size"));
    }
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n < 8 || n % 8 != 0 || !(n / 8).is_power_of_two() {
            return Err(Error::config(format!("level {n} is not 8 times a power of two")));
        }
        out.push((n / 8).trailing_zeros() as usize);
    }
    if out.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::config("--levels must be consecutive doublings, e.g. 8,16,32"));
    }
    Ok(out)
}

pub fn converge(a: &ConvergeArgs) -> Result<(), Error> {
    reject_seedless(a.seedless)?;
    let levels = levels_from_sizes(&a.levels)?;
    create_dir(&a.out_dir)?;
    let started = Instant::now();
    info!("convergence study for n = {:?}", a.levels);
    let report = convergence_study(&levels, a.degree)?;
    let table = report.to_table();
    let csv_path = a.out_dir.join("convergence.csv");
    let txt_path = a.out_dir.join("convergence.txt");
    write_text(&csv_path, &report.to_csv())?;
    write_text(&txt_path, &table)?;
    Manifest {
        command: "converge".into(),
        version: version(),
        wall_time_s: started.elapsed().as_secs_f64(),
        config: None,
        summary: serde_json::to_value(&report).expect("report serializes"),
        outputs: vec![rel(&a.out_dir, &csv_path), rel(&a.out_dir, &txt_path)],
    }
    .write(&a.out_dir)?;
    print!("{table}");
    Ok(())
}

/// `from-initial` or `σi,σe` (µS/µm).
pub fn parse_sigma(s: &str) -> Result<Option<(f64, f64)>, Error> {
    if s == "from-initial" {
        return Ok(None);
    }
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::config(format!("--emi-sigma '{s}': expected from-initial or <σi>,<σe>")))?;
    match v[..] {
        [si, se] if si > 0.0 && se > 0.0 => Ok(Some((si, se))),
        _ => Err(Error::config(format!("--emi-sigma '{s}': need two positive conductivities"))),
    }
}

pub fn compare(a: &CompareArgs) -> Result<(), Error> {
    let cfg = load_scenario(&a.scenario)?;
    let sigma = parse_sigma(&a.emi_sigma)?;
    create_dir(&a.out_dir)?;
    let dt = cfg.time.dt_ms;
    let steps = cfg.time.num_steps();
    let started = Instant::now();
    info!("comparing KNP-EMI and EMI on {}: {steps} steps", cfg.name);
    let (cmp, knp, emi) = compare_runs(&cfg, dt, steps, sigma)?;
    let dir = &a.out_dir;
    let mut outputs = Vec::new();
    for (tag, run) in [("knp", &knp), ("emi", &emi)] {
        let csv = dir.join(format!("probes_{tag}.csv"));
        write_text(&csv, &probes_to_csv(&run.sample()?))?;
        let vtk = dir.join(format!("final_{tag}.vtk"));
        VtkGrid::from_state(run.disc(), &run.simulator.problem, &run.state).write(&vtk)?;
        outputs.push(rel(dir, &csv));
        outputs.push(rel(dir, &vtk));
    }
    let text = format!(
        "scenario {} at t = {:.3} ms\n\
         EMI conductivities: intracellular {:.6} µS/µm, extracellular {:.6} µS/µm\n\
         max |Δφ_e| = {:.6e} mV\n\
         max |Δφ_i| = {:.6e} mV\n\
         max |Δφ_M| = {:.6e} mV\n\
         φ_e range: KNP-EMI {:.6e} mV, EMI {:.6e} mV\n",
        cfg.name,
        cmp.time_ms,
        cmp.sigma_intra_uS_per_um,
        cmp.sigma_extra_uS_per_um,
        cmp.max_abs_phi_e_diff_mV,
        cmp.max_abs_phi_i_diff_mV,
        cmp.max_abs_phi_m_diff_mV,
        cmp.phi_e_range_knp_mV,
        cmp.phi_e_range_emi_mV,
    );
    let report_path = dir.join("compare.txt");
    write_text(&report_path, &text)?;
    outputs.push(rel(dir, &report_path));
    Manifest {
        command: "compare".into(),
        version: version(),
        wall_time_s: started.elapsed().as_secs_f64(),
        config: Some(cfg.to_toml()),
        summary: serde_json::to_value(&cmp).expect("comparison serializes"),
        outputs,
    }
    .write(dir)?;
    print!("{text}");
    Ok(())
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, Error> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::config(format!("--at '{s}': expected x,y or x,y,z in µm")))?;
    if !(2..=3).contains(&v.len()) {
        return Err(Error::config(format!("--at '{s}': expected two or three coordinates")));
    }
    Ok(v)
}

/// Snapshot files of a directory in name order.
pub fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let io = |e: std::io::Error| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vtk"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Io {
            path: dir.display().to_string(),
            message: "no .vtk snapshots found".into(),
        });
    }
    Ok(files)
}

pub fn extract(
    files: &[PathBuf],
    points: &[Vec<f64>],
    fields: &[String],
    intracellular: bool,
) -> Result<Vec<ProbeRecord>, Error> {
    let mut records = Vec::new();
    for path in files {
        let grid = VtkGrid::read(path)?;
        let time_ms = grid.time_ms().ok_or_else(|| Error::Io {
            path: path.display().to_string(),
            message: "title carries no snapshot time".into(),
        })?;
        let names: Vec<String> = if fields.is_empty() {
            grid.point_data
                .iter()
                .map(|(n, _)| n.clone())
                .filter(|n| n != "region")
                .collect()
        } else {
            fields.to_vec()
        };
        for (i, p) in points.iter().enumerate() {
            for name in &names {
                if grid.point_field(name).is_none() {
                    return Err(Error::config(format!("{}: no point field '{name}'", path.display())));
                }
                let value = grid.interpolate(name, p, intracellular).ok_or_else(|| {
                    Error::config(format!("point {p:?} lies outside the snapshot grid"))
                })?;
                records.push(ProbeRecord {
                    time_ms,
                    probe: format!("p{i}"),
                    field: name.clone(),
                    value,
                });
            }
        }
    }
    Ok(records)
}

pub fn probe(a: &ProbeArgs) -> Result<(), Error> {
    let points = a.points.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>, _>>()?;
    let files = snapshot_files(&a.snapshots)?;
    let records = extract(&files, &points, &a.fields, a.intracellular)?;
    let csv = probes_to_csv(&records);
    match &a.out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intervals_accept_unit_suffix() {
        assert_eq!(parse_ms("1ms").unwrap(), 1.0);
        assert_eq!(parse_ms(" 0.5 ms").unwrap(), 0.5);
        assert_eq!(parse_ms("2").unwrap(), 2.0);
        assert!(parse_ms("0ms").is_err());
        assert!(parse_ms("fast").is_err());
    }

    #[test]
    fn sigma_spec() {
        assert_eq!(parse_sigma("from-initial").unwrap(), None);
        assert_eq!(parse_sigma("1.0,0.1").unwrap(), Some((1.0, 0.1)));
        assert!(parse_sigma("1.0").is_err());
        assert!(parse_sigma("1.0,-2").is_err());
    }

    #[test]
    fn mesh_sizes_map_to_levels() {
        assert_eq!(levels_from_sizes(&[8, 16, 32, 64]).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(levels_from_sizes(&[32]).unwrap(), vec![2]);
        assert!(levels_from_sizes(&[8, 32]).is_err());
        assert!(levels_from_sizes(&[12]).is_err());
        assert!(levels_from_sizes(&[]).is_err());
    }

    #[test]
    fn points_need_two_or_three_coordinates() {
        assert_eq!(parse_point("1,2").unwrap(), vec![1.0, 2.0]);
        assert_eq!(parse_point("1, 2, 3").unwrap().len(), 3);
        assert!(parse_point("1").is_err());
        assert!(parse_point("a,b").is_err());
    }
}
