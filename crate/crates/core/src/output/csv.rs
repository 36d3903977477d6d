use std::fmt::Write as _;
use std::path::Path;

use crate::error::Error;
use crate::scenario::ProbeRecord;

pub const PROBE_HEADER: &str = "time_ms,probe,field,value";

pub fn probes_to_csv(records: &[ProbeRecord]) -> String {
    let mut s = String::with_capacity(32 * (records.len() + 1));
    s.push_str(PROBE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.time_ms, r.probe, r.field, r.value);
    }
    s
}

pub fn write_probes(records: &[ProbeRecord], path: &Path) -> Result<(), Error> {
    write_text(path, &probes_to_csv(records))
}

pub fn parse_probes(text: &str) -> Result<Vec<ProbeRecord>, Error> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(PROBE_HEADER) {
        return Err(Error::config(format!("probe CSV must start with '{PROBE_HEADER}'")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::config(format!("probe CSV line {}: malformed '{l}'", i + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(ProbeRecord {
                time_ms: f[0].parse().map_err(|_| bad())?,
                probe: f[1].to_string(),
                field: f[2].to_string(),
                value: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
