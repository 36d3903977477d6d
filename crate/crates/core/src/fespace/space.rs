use std::collections::HashMap;
use std::sync::Arc;

use crate::error::SolverError;
use crate::geometry::{InterfaceMesh, Mesh};

use super::element::Lagrange;
use crate::geometry::mesh::invert3;

/// Continuous Lagrange space on a set of simplices of a parent mesh: bulk
/// cells of one region, or the facets of Γ.
#[derive(Debug)]
pub struct FunctionSpace {
    element: Lagrange,
    ambient_dim: usize,
    coords: Arc<[[f64; 3]]>,
    cells: Vec<usize>,
    labels: Vec<u32>,
    cell_dofs: Vec<usize>,
    keys: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    dof_coords: Vec<[f64; 3]>,
}

/// Measure of a simplex and the physical gradients of its barycentric
/// coordinates (gradients are only filled for full-dimensional cells).
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub measure: f64,
    pub grad_bary: [[f64; 3]; 4],
}

impl FunctionSpace {
    /// Space on the given cells of `mesh`.
    pub fn on_cells(mesh: &Mesh, cells: &[usize], degree: usize) -> Result<Self, SolverError> {
        let element = Lagrange::new(mesh.dim(), degree)?;
        let simplices: Vec<&[usize]> = cells.iter().map(|&c| mesh.cell(c)).collect();
        let labels = cells.iter().map(|&c| mesh.tag(c)).collect();
        Ok(Self::build(element, mesh, &simplices, labels))
    }

    /// Space on the membrane facets.
    pub fn on_interface(mesh: &Mesh, gamma: &InterfaceMesh, degree: usize) -> Result<Self, SolverError> {
        let element = Lagrange::new(mesh.dim() - 1, degree)?;
        let dim = mesh.dim();
        let simplices: Vec<&[usize]> = gamma.facets.iter().map(|f| &f.vertices[..dim]).collect();
        let labels = gamma.facets.iter().map(|f| f.label).collect();
        Ok(Self::build(element, mesh, &simplices, labels))
    }

    fn build(element: Lagrange, mesh: &Mesh, simplices: &[&[usize]], labels: Vec<u32>) -> Self {
        let mut keys: Vec<(usize, usize)> = simplices
            .iter()
            .flat_map(|verts| element.dof_keys(verts))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let index: HashMap<(usize, usize), usize> =
            keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut cells = Vec::with_capacity(simplices.len() * element.num_vertices());
        let mut cell_dofs = Vec::with_capacity(simplices.len() * element.ndofs());
        for verts in simplices {
            cells.extend_from_slice(verts);
            cell_dofs.extend(element.dof_keys(verts).iter().map(|k| index[k]));
        }
        let dof_coords = keys
            .iter()
            .map(|&(a, b)| {
                let (p, q) = (mesh.vertex(a), mesh.vertex(b));
                [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])]
            })
            .collect();
        FunctionSpace {
            element,
            ambient_dim: mesh.dim(),
            coords: mesh.coords().into(),
            cells,
            labels,
            cell_dofs,
            keys,
            index,
            dof_coords,
        }
    }

    pub fn element(&self) -> Lagrange {
        self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree
    }

    /// Topological dimension of the simplices carrying the space.
    pub fn cell_dim(&self) -> usize {
        self.element.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn ndofs(&self) -> usize {
        self.keys.len()
    }

    pub fn num_cells(&self) -> usize {
        self.labels.len()
    }

    pub fn cell_vertices(&self, c: usize) -> &[usize] {
        let n = self.element.num_vertices();
        &self.cells[c * n..(c + 1) * n]
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        let n = self.element.ndofs();
        &self.cell_dofs[c * n..(c + 1) * n]
    }

    /// Subdomain tag (bulk) or membrane label (interface) of local cell `c`.
    pub fn cell_label(&self, c: usize) -> u32 {
        self.labels[c]
    }

    pub fn dof_coords(&self) -> &[[f64; 3]] {
        &self.dof_coords
    }

    pub fn dof_key(&self, dof: usize) -> (usize, usize) {
        self.keys[dof]
    }

    pub fn dof_of_key(&self, key: (usize, usize)) -> Option<usize> {
        self.index.get(&key).copied()
    }

    /// Dof for a mesh vertex, if the vertex belongs to the space.
    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.dof_of_key((v, v))
    }

    /// Physical point at barycentric coordinates `l` of cell `c`.
    pub fn point(&self, c: usize, l: &[f64; 4]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (i, &v) in self.cell_vertices(c).iter().enumerate() {
            for k in 0..3 {
                p[k] += l[i] * self.coords[v][k];
            }
        }
        p
    }

    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        let verts = self.cell_vertices(c);
        let x = |i: usize, k: usize| self.coords[verts[i]][k] - self.coords[verts[0]][k];
        let mut grad_bary = [[0.0; 3]; 4];
        let measure = match (self.cell_dim(), self.ambient_dim) {
            (1, _) => (0..3).map(|k| x(1, k) * x(1, k)).sum::<f64>().sqrt(),
            (2, 2) => {
                let det = x(1, 0) * x(2, 1) - x(2, 0) * x(1, 1);
                grad_bary[1] = [x(2, 1) / det, -x(2, 0) / det, 0.0];
                grad_bary[2] = [-x(1, 1) / det, x(1, 0) / det, 0.0];
                0.5 * det.abs()
            }
            (2, _) => {
                let u = [x(1, 0), x(1, 1), x(1, 2)];
                let w = [x(2, 0), x(2, 1), x(2, 2)];
                let cr = [
                    u[1] * w[2] - u[2] * w[1],
                    u[2] * w[0] - u[0] * w[2],
                    u[0] * w[1] - u[1] * w[0],
                ];
                0.5 * (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt()
            }
            _ => {
                let mut m = [[0.0; 3]; 3];
                for row in 0..3 {
                    for col in 0..3 {
                        m[row][col] = x(col + 1, row);
                    }
                }
                let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                let inv = invert3(&m);
                for i in 0..3 {
                    grad_bary[i + 1] = inv[i];
                }
                det.abs() / 6.0
            }
        };
        if self.cell_dim() == self.ambient_dim {
            for k in 0..3 {
                grad_bary[0][k] = -(1..=self.cell_dim()).map(|i| grad_bary[i][k]).sum::<f64>();
            }
        }
        CellGeometry { measure, grad_bary }
    }

    /// Total measure of the simplices carrying the space.
    pub fn measure(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_geometry(c).measure).sum()
    }
}

/// Coefficient vector on a function space.
#[derive(Debug, Clone)]
pub struct Field {
    pub space: Arc<FunctionSpace>,
    pub values: Vec<f64>,
    pub unit: &'static str,
}

impl Field {
    pub fn zeros(space: &Arc<FunctionSpace>, unit: &'static str) -> Self {
        Self::constant(space, 0.0, unit)
    }

    pub fn constant(space: &Arc<FunctionSpace>, value: f64, unit: &'static str) -> Self {
        Field {
            space: Arc::clone(space),
            values: vec![value; space.ndofs()],
            unit,
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: &Arc<FunctionSpace>, unit: &'static str, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        Field {
            space: Arc::clone(space),
            values: space.dof_coords().iter().map(f).collect(),
            unit,
        }
    }

    pub fn from_values(space: &Arc<FunctionSpace>, values: Vec<f64>, unit: &'static str) -> Result<Self, SolverError> {
        if values.len() != space.ndofs() {
            return Err(SolverError::SpaceMismatch(format!(
                "{} values for a space with {} dofs",
                values.len(),
                space.ndofs()
            )));
        }
        Ok(Field {
            space: Arc::clone(space),
            values,
            unit,
        })
    }

    /// Value at barycentric point `l` of cell `c`.
    pub fn eval_cell(&self, c: usize, l: &[f64; 4]) -> f64 {
        let el = self.space.element();
        let mut phi = [0.0; 10];
        el.eval(l, &mut phi);
        self.space
            .cell_dofs(c)
            .iter()
            .zip(&phi)
            .map(|(&d, &p)| p * self.values[d])
            .sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// For each dof of the interface space, the matching dof of the
/// intracellular and the extracellular space.
#[derive(Debug, Clone)]
pub struct TraceMap {
    pub intra: Vec<usize>,
    pub extra: Vec<usize>,
}

impl TraceMap {
    pub fn new(gamma: &FunctionSpace, intra: &FunctionSpace, extra: &FunctionSpace) -> Result<Self, SolverError> {
        if gamma.degree() != intra.degree() || gamma.degree() != extra.degree() {
            return Err(SolverError::SpaceMismatch("trace spaces must share a degree".into()));
        }
        let lookup = |space: &FunctionSpace, region: &'static str| -> Result<Vec<usize>, SolverError> {
            (0..gamma.ndofs())
                .map(|d| {
                    space
                        .dof_of_key(gamma.dof_key(d))
                        .ok_or(SolverError::MissingTrace { dof: d, region })
                })
                .collect()
        };
        Ok(TraceMap {
            intra: lookup(intra, "intracellular")?,
            extra: lookup(extra, "extracellular")?,
        })
    }

    pub fn len(&self) -> usize {
        self.intra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intra.is_empty()
    }

    /// Values of a bulk field at the interface dofs.
    pub fn restrict(&self, bulk: &[f64], side: Side) -> Vec<f64> {
        self.map(side).iter().map(|&d| bulk[d]).collect()
    }

    /// Writes interface values into the matching dofs of a bulk vector.
    pub fn inject(&self, values: &[f64], bulk: &mut [f64], side: Side) {
        for (&d, &v) in self.map(side).iter().zip(values) {
            bulk[d] = v;
        }
    }

    pub fn map(&self, side: Side) -> &[usize] {
        match side {
            Side::Intra => &self.intra,
            Side::Extra => &self.extra,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Intra,
    Extra,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Intra => "intracellular",
            Side::Extra => "extracellular",
        }
    }
}
