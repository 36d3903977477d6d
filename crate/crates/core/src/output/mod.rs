//! Probe CSV files and VTK field snapshots.

mod csv;
mod vtk;

pub use csv::{parse_probes, probes_to_csv, write_probes, write_text, PROBE_HEADER};
pub use vtk::VtkGrid;
