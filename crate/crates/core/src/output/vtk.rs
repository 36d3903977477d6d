//! Legacy ASCII VTK snapshots: one unstructured grid with the two regions
//! stored as separate point sets, so fields stay discontinuous across Γ.

use std::fmt::Write as _;

use crate::error::Error;
use crate::fespace::{FunctionSpace, Side};
use crate::knp::{Discretization, Problem, SystemState};
use crate::scenario::{MS, MV, UM};

/// Snapshot as plain arrays; lengths in µm, potentials in mV,
/// concentrations in mM.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub title: String,
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub point_data: Vec<(String, Vec<f64>)>,
    pub cell_data: Vec<(String, Vec<f64>)>,
}

fn region_points(space: &FunctionSpace) -> Vec<usize> {
    let mut v: Vec<usize> = (0..space.num_cells())
        .flat_map(|c| space.cell_vertices(c).to_vec())
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

impl VtkGrid {
    /// Builds the grid for a state. P2 fields are written at the vertices.
    pub fn from_state(disc: &Discretization, problem: &Problem, state: &SystemState) -> Self {
        let dim = disc.mesh.dim();
        let mut points = Vec::new();
        let mut cells = Vec::new();
        let mut subdomain = Vec::new();
        let mut region = Vec::new();
        let mut phi = Vec::new();
        let mut conc = vec![Vec::new(); problem.species.len()];
        for side in [Side::Extra, Side::Intra] {
            let space = disc.space(side);
            let verts = region_points(space);
            let offset = points.len();
            let local: std::collections::HashMap<usize, usize> =
                verts.iter().enumerate().map(|(i, &v)| (v, offset + i)).collect();
            for &v in &verts {
                let x = disc.mesh.vertex(v);
                points.push([x[0] / UM, x[1] / UM, x[2] / UM]);
                let d = space.vertex_dof(v).expect("vertex carries a dof");
                phi.push(state.phi(side).values[d] / MV);
                for (k, c) in conc.iter_mut().enumerate() {
                    c.push(state.conc(side)[k].values[d]);
                }
                region.push(if side == Side::Intra { 1.0 } else { 0.0 });
            }
            for c in 0..space.num_cells() {
                cells.push(space.cell_vertices(c).iter().map(|v| local[v]).collect());
                subdomain.push(f64::from(space.cell_label(c)));
            }
        }
        let mut point_data = vec![("phi".to_string(), phi)];
        for (s, c) in problem.species.iter().zip(conc) {
            point_data.push((s.name.clone(), c));
        }
        point_data.push(("region".to_string(), region));
        VtkGrid {
            title: format!("knpemi snapshot t_ms={:.6}", state.time / MS),
            dim,
            points,
            cells,
            point_data,
            cell_data: vec![("subdomain".to_string(), subdomain)],
        }
    }

    /// Time stored in the title, in ms.
    pub fn time_ms(&self) -> Option<f64> {
        self.title.split("t_ms=").nth(1)?.trim().parse().ok()
    }

    pub fn point_field(&self, name: &str) -> Option<&[f64]> {
        self.point_data.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn cell_field(&self, name: &str) -> Option<&[f64]> {
        self.cell_data.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_vtk_string(&self) -> String {
        let mut s = String::new();
        let cell_type = if self.dim == 2 { 5 } else { 10 };
        s.push_str("# vtk DataFile Version 3.0\n");
        s.push_str(&self.title);
        s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:.9e} {:.9e} {:.9e}", p[0], p[1], p[2]);
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {size}", self.cells.len());
        for c in &self.cells {
            s.push_str(&c.len().to_string());
            for v in c {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            let _ = writeln!(s, "{cell_type}");
        }
        let scalars = |s: &mut String, data: &[(String, Vec<f64>)]| {
            for (name, v) in data {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{:.9e}", x);
                }
            }
        };
        let _ = writeln!(s, "CELL_DATA {}", self.cells.len());
        scalars(&mut s, &self.cell_data);
        let _ = writeln!(s, "POINT_DATA {}", self.points.len());
        scalars(&mut s, &self.point_data);
        s
    }

    pub fn write(&self, path: &std::path::Path) -> Result<(), Error> {
        std::fs::write(path, self.to_vtk_string()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|m| Error::Io {
            path: path.display().to_string(),
            message: m,
        })
    }

    /// Parses the subset of legacy VTK written by [`VtkGrid::to_vtk_string`].
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| format!("unexpected end of file reading {what}"));
        if !next("header")?.starts_with("# vtk DataFile") {
            return Err("not a legacy VTK file".into());
        }
        let title = next("title")?.to_string();
        if next("format")?.trim() != "ASCII" {
            return Err("only ASCII files are supported".into());
        }
        next("dataset")?;
        let rest: Vec<&str> = lines.collect();
        let mut tokens = rest.iter().flat_map(|l| l.split_whitespace());
        let mut grid = VtkGrid {
            title,
            dim: 2,
            points: Vec::new(),
            cells: Vec::new(),
            point_data: Vec::new(),
            cell_data: Vec::new(),
        };
        let num = |t: Option<&str>| -> Result<f64, String> {
            let t = t.ok_or("unexpected end of data")?;
            t.parse::<f64>().map_err(|e| format!("bad number '{t}': {e}"))
        };
        let mut section: Option<(bool, usize)> = None;
        while let Some(tok) = tokens.next() {
            match tok {
                "POINTS" => {
                    let n = num(tokens.next())? as usize;
                    tokens.next();
                    for _ in 0..n {
                        grid.points.push([num(tokens.next())?, num(tokens.next())?, num(tokens.next())?]);
                    }
                }
                "CELLS" => {
                    let n = num(tokens.next())? as usize;
                    tokens.next();
                    for _ in 0..n {
                        let k = num(tokens.next())? as usize;
                        let c = (0..k).map(|_| num(tokens.next()).map(|v| v as usize)).collect::<Result<_, _>>()?;
                        grid.cells.push(c);
                    }
                }
                "CELL_TYPES" => {
                    let n = num(tokens.next())? as usize;
                    for i in 0..n {
                        let t = num(tokens.next())?;
                        if i == 0 {
                            grid.dim = if t == 10.0 { 3 } else { 2 };
                        }
                    }
                }
                "CELL_DATA" => section = Some((false, num(tokens.next())? as usize)),
                "POINT_DATA" => section = Some((true, num(tokens.next())? as usize)),
                "SCALARS" => {
                    let name = tokens.next().ok_or("missing scalar name")?.to_string();
                    tokens.next();
                    tokens.next();
                    if tokens.next() != Some("LOOKUP_TABLE") {
                        return Err(format!("scalar {name}: expected LOOKUP_TABLE"));
                    }
                    tokens.next();
                    let (on_points, n) = section.ok_or("SCALARS outside a data section")?;
                    let v = (0..n).map(|_| num(tokens.next())).collect::<Result<Vec<_>, _>>()?;
                    if on_points {
                        grid.point_data.push((name, v));
                    } else {
                        grid.cell_data.push((name, v));
                    }
                }
                other => return Err(format!("unexpected token '{other}'")),
            }
        }
        Ok(grid)
    }

    /// Linear interpolation of a point field at `p` (µm). Extracellular
    /// cells are searched first, so points on Γ report the extracellular
    /// value unless `intracellular` is set.
    pub fn interpolate(&self, name: &str, p: &[f64], intracellular: bool) -> Option<f64> {
        let field = self.point_field(name)?;
        let sub = self.cell_field("subdomain");
        let wanted = |c: usize| sub.map_or(true, |s| (s[c] != 0.0) == intracellular);
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for pass in 0..2 {
            for (c, verts) in self.cells.iter().enumerate() {
                if (pass == 0) != wanted(c) {
                    continue;
                }
                let bary = self.barycentric(verts, p);
                let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
                if best.as_ref().map_or(true, |b| worst > b.0) {
                    best = Some((worst, c, bary));
                }
            }
            if matches!(best, Some((w, _, _)) if w >= -1e-9) {
                break;
            }
        }
        let (worst, c, bary) = best?;
        if worst < -1e-9 {
            return None;
        }
        Some(self.cells[c].iter().zip(&bary).map(|(&v, w)| w * field[v]).sum())
    }

    fn barycentric(&self, verts: &[usize], p: &[f64]) -> Vec<f64> {
        let x0 = self.points[verts[0]];
        let d = self.dim;
        let mut a = [[0.0; 3]; 3];
        for j in 0..d {
            let xj = self.points[verts[j + 1]];
            for i in 0..d {
                a[i][j] = xj[i] - x0[i];
            }
        }
        let r: Vec<f64> = (0..d).map(|i| p[i] - x0[i]).collect();
        let l = solve_small(&a, &r, d);
        let mut out = vec![1.0 - l.iter().sum::<f64>()];
        out.extend(l);
        out
    }
}

/// Cramer's rule for 2x2 or 3x3 systems.
fn solve_small(a: &[[f64; 3]; 3], r: &[f64], d: usize) -> Vec<f64> {
    if d == 2 {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        return vec![
            (r[0] * a[1][1] - a[0][1] * r[1]) / det,
            (a[0][0] * r[1] - r[0] * a[1][0]) / det,
        ];
    }
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let det = det3(a);
    (0..3)
        .map(|j| {
            let mut m = *a;
            for i in 0..3 {
                m[i][j] = r[i];
            }
            det3(&m) / det
        })
        .collect()
}
