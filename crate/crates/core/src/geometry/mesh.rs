use std::collections::HashMap;

use crate::error::GeometryError;

/// Subdomain tag of the extracellular region.
pub const EXTRACELLULAR: u32 = 0;

/// Marker for the missing neighbour of an exterior facet.
pub const NO_CELL: usize = usize::MAX;

/// Relative tolerance used when checking grid alignment of cell boxes.
const ALIGN_TOL: f64 = 1e-9;

/// Axis-aligned box given by its lower and upper corners. Only the first
/// `dim` entries of each corner are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl AxisBox {
    pub fn new(min: &[f64], max: &[f64]) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        lo[..min.len()].copy_from_slice(min);
        hi[..max.len()].copy_from_slice(max);
        AxisBox { min: lo, max: hi }
    }

    pub fn measure(&self, dim: usize) -> f64 {
        (0..dim).map(|a| self.max[a] - self.min[a]).product()
    }

    fn contains_strict(&self, p: &[f64; 3], dim: usize) -> bool {
        (0..dim).all(|a| p[a] > self.min[a] && p[a] < self.max[a])
    }

    fn touches(&self, other: &AxisBox, dim: usize) -> bool {
        (0..dim).all(|a| self.min[a] <= other.max[a] && other.min[a] <= self.max[a])
    }
}

/// Structured grid underlying a box mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub resolution: [usize; 3],
}

impl Grid {
    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.resolution[axis] as f64
    }
}

/// A codimension-one face of the mesh: sorted vertex ids plus the one or two
/// adjacent cells (`cells[1] == NO_CELL` on the exterior boundary).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    pub vertices: [usize; 3],
    pub cells: [usize; 2],
}

impl Facet {
    pub fn is_exterior(&self) -> bool {
        self.cells[1] == NO_CELL
    }
}

/// Conforming simplicial mesh of a box with per-cell subdomain tags.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    coords: Vec<[f64; 3]>,
    cells: Vec<usize>,
    tags: Vec<u32>,
    facets: Vec<Facet>,
    grid: Grid,
    boxes: Vec<AxisBox>,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn num_cells(&self) -> usize {
        self.tags.len()
    }

    pub fn vertices_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn vertex(&self, v: usize) -> &[f64; 3] {
        &self.coords[v]
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.cells[c * n..(c + 1) * n]
    }

    pub fn tag(&self, c: usize) -> u32 {
        self.tags[c]
    }

    pub fn tags(&self) -> &[u32] {
        &self.tags
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet_vertices<'a>(&self, f: &'a Facet) -> &'a [usize] {
        &f.vertices[..self.dim]
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Cell boxes used for tagging, in label order (label = index + 1).
    pub fn cell_boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn num_labels(&self) -> usize {
        self.boxes.len()
    }

    /// Cells carrying the given tag, in increasing order.
    pub fn cells_with_tag(&self, tag: u32) -> Vec<usize> {
        (0..self.num_cells()).filter(|&c| self.tags[c] == tag).collect()
    }

    /// Cells in the union of all intracellular regions.
    pub fn intracellular_cells(&self) -> Vec<usize> {
        (0..self.num_cells())
            .filter(|&c| self.tags[c] != EXTRACELLULAR)
            .collect()
    }

    pub fn cell_centroid(&self, c: usize) -> [f64; 3] {
        let verts = self.cell(c);
        let mut p = [0.0; 3];
        for &v in verts {
            for a in 0..3 {
                p[a] += self.coords[v][a];
            }
        }
        p.map(|x| x / verts.len() as f64)
    }

    /// Lebesgue measure of cell `c`.
    pub fn cell_measure(&self, c: usize) -> f64 {
        let v = self.cell(c);
        let x0 = self.coords[v[0]];
        let d = |i: usize, a: usize| self.coords[v[i]][a] - x0[a];
        match self.dim {
            2 => 0.5 * (d(1, 0) * d(2, 1) - d(1, 1) * d(2, 0)).abs(),
            _ => {
                let det = d(1, 0) * (d(2, 1) * d(3, 2) - d(2, 2) * d(3, 1))
                    - d(1, 1) * (d(2, 0) * d(3, 2) - d(2, 2) * d(3, 0))
                    + d(1, 2) * (d(2, 0) * d(3, 1) - d(2, 1) * d(3, 0));
                det.abs() / 6.0
            }
        }
    }

    /// Copy of the mesh with every coordinate multiplied by `factor`
    /// (e.g. 1e-6 to go from micrometres to metres).
    pub fn scaled(&self, factor: f64) -> Mesh {
        let mut m = self.clone();
        for p in &mut m.coords {
            for x in p.iter_mut() {
                *x *= factor;
            }
        }
        for a in 0..3 {
            m.grid.lower[a] *= factor;
            m.grid.upper[a] *= factor;
        }
        for b in &mut m.boxes {
            for a in 0..3 {
                b.min[a] *= factor;
                b.max[a] *= factor;
            }
        }
        m
    }

    #[cfg(test)]
    pub(crate) fn retag_for_test(&mut self, cells: &[usize], tag: u32) {
        for &c in cells {
            self.tags[c] = tag;
        }
    }

    /// Cells per structured grid cell (2 triangles or 6 tetrahedra).
    fn simplices_per_block(&self) -> usize {
        if self.dim == 2 {
            2
        } else {
            6
        }
    }

    /// Finds a cell containing `p` whose tag satisfies `accept`, returning
    /// the cell and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: &[f64], accept: impl Fn(u32) -> bool) -> Option<(usize, [f64; 4])> {
        let dim = self.dim;
        let g = &self.grid;
        let mut ranges = [(0usize, 0usize); 3];
        for a in 0..dim {
            let h = g.spacing(a);
            let tol = 1e-9 * h;
            if p[a] < g.lower[a] - tol || p[a] > g.upper[a] + tol {
                return None;
            }
            let n = g.resolution[a];
            let lo = (((p[a] - tol - g.lower[a]) / h).floor().max(0.0) as usize).min(n - 1);
            let hi = (((p[a] + tol - g.lower[a]) / h).floor().max(0.0) as usize).min(n - 1);
            ranges[a] = (lo, hi);
        }
        let per = self.simplices_per_block();
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        let (nx, ny) = (g.resolution[0], g.resolution[1]);
        let kr = if dim == 3 { ranges[2] } else { (0, 0) };
        for k in kr.0..=kr.1 {
            for j in ranges[1].0..=ranges[1].1 {
                for i in ranges[0].0..=ranges[0].1 {
                    let block = i + nx * (j + ny * k);
                    for c in block * per..(block + 1) * per {
                        if !accept(self.tags[c]) {
                            continue;
                        }
                        let bary = self.barycentric(c, p);
                        let worst = bary[..=dim].iter().cloned().fold(f64::INFINITY, f64::min);
                        if best.as_ref().map_or(true, |b| worst > b.2) {
                            best = Some((c, bary, worst));
                        }
                    }
                }
            }
        }
        match best {
            Some((c, bary, worst)) if worst >= -1e-9 => Some((c, bary)),
            _ => None,
        }
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: &[f64]) -> [f64; 4] {
        let v = self.cell(c);
        let x0 = self.coords[v[0]];
        let mut out = [0.0; 4];
        match self.dim {
            2 => {
                let (a, b) = (self.coords[v[1]], self.coords[v[2]]);
                let (m00, m01, m10, m11) = (a[0] - x0[0], b[0] - x0[0], a[1] - x0[1], b[1] - x0[1]);
                let det = m00 * m11 - m01 * m10;
                let (rx, ry) = (p[0] - x0[0], p[1] - x0[1]);
                let l1 = (m11 * rx - m01 * ry) / det;
                let l2 = (-m10 * rx + m00 * ry) / det;
                out[0] = 1.0 - l1 - l2;
                out[1] = l1;
                out[2] = l2;
            }
            _ => {
                let mut m = [[0.0; 3]; 3];
                for col in 0..3 {
                    for row in 0..3 {
                        m[row][col] = self.coords[v[col + 1]][row] - x0[row];
                    }
                }
                let inv = invert3(&m);
                let r = [p[0] - x0[0], p[1] - x0[1], p[2] - x0[2]];
                let mut s = 0.0;
                for row in 0..3 {
                    let l = inv[row][0] * r[0] + inv[row][1] * r[1] + inv[row][2] * r[2];
                    out[row + 1] = l;
                    s += l;
                }
                out[0] = 1.0 - s;
            }
        }
        out
    }
}

pub(crate) fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv_det = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ]
}

/// Kuhn subdivision of the unit cube into six tetrahedra sharing the main
/// diagonal; each entry lists the corner offsets (bit a = axis a) of one tet.
const KUHN: [[u8; 4]; 6] = [
    [0b000, 0b001, 0b011, 0b111],
    [0b000, 0b001, 0b101, 0b111],
    [0b000, 0b010, 0b011, 0b111],
    [0b000, 0b010, 0b110, 0b111],
    [0b000, 0b100, 0b101, 0b111],
    [0b000, 0b100, 0b110, 0b111],
];

/// Structured mesh of the box `[lower, upper]` with `resolution` cells per
/// axis. 2D: every rectangle is split into two triangles along the diagonal
/// from its lower-left to its upper-right corner. 3D: every block is split
/// into six Kuhn tetrahedra, mirrored along each axis where the block index
/// is odd so that the tessellation is symmetric under reflections about the
/// box centre whenever the resolution is even.
pub fn build_box_mesh(
    lower: &[f64],
    upper: &[f64],
    resolution: &[usize],
) -> Result<Mesh, GeometryError> {
    let dim = lower.len();
    if !(2..=3).contains(&dim) || upper.len() != dim || resolution.len() != dim {
        return Err(GeometryError::Dimension(dim));
    }
    let mut grid = Grid {
        lower: [0.0; 3],
        upper: [0.0; 3],
        resolution: [1; 3],
    };
    for a in 0..dim {
        if resolution[a] == 0 {
            return Err(GeometryError::Resolution { axis: a });
        }
        if !(upper[a] > lower[a]) {
            return Err(GeometryError::Extent { axis: a });
        }
        grid.lower[a] = lower[a];
        grid.upper[a] = upper[a];
        grid.resolution[a] = resolution[a];
    }
    let [nx, ny, nz] = grid.resolution;
    let (sx, sy) = (nx + 1, ny + 1);
    let sz = if dim == 3 { nz + 1 } else { 1 };
    let coord = |a: usize, i: usize| {
        if i == grid.resolution[a] {
            grid.upper[a]
        } else {
            grid.lower[a] + i as f64 * grid.spacing(a)
        }
    };
    let mut coords = Vec::with_capacity(sx * sy * sz);
    for k in 0..sz {
        for j in 0..sy {
            for i in 0..sx {
                let z = if dim == 3 { coord(2, k) } else { 0.0 };
                coords.push([coord(0, i), coord(1, j), z]);
            }
        }
    }
    let vid = |i: usize, j: usize, k: usize| i + sx * (j + sy * k);
    let mut cells = Vec::new();
    if dim == 2 {
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (vid(i, j, 0), vid(i + 1, j, 0), vid(i, j + 1, 0), vid(i + 1, j + 1, 0));
                cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
            }
        }
    } else {
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let parity = (i & 1) as u8 | (((j & 1) as u8) << 1) | (((k & 1) as u8) << 2);
                    for tet in KUHN.iter() {
                        for &corner in tet {
                            let o = corner ^ parity;
                            cells.push(vid(
                                i + (o & 1) as usize,
                                j + ((o >> 1) & 1) as usize,
                                k + ((o >> 2) & 1) as usize,
                            ));
                        }
                    }
                }
            }
        }
    }
    let ncells = cells.len() / (dim + 1);
    let facets = build_facets(dim, &cells);
    Ok(Mesh {
        dim,
        coords,
        cells,
        tags: vec![EXTRACELLULAR; ncells],
        facets,
        grid,
        boxes: Vec::new(),
    })
}

fn build_facets(dim: usize, cells: &[usize]) -> Vec<Facet> {
    let nv = dim + 1;
    let mut map: HashMap<[usize; 3], [usize; 2]> = HashMap::with_capacity(cells.len());
    for (c, verts) in cells.chunks_exact(nv).enumerate() {
        for skip in 0..nv {
            let mut key = [usize::MAX; 3];
            let mut n = 0;
            for (l, &v) in verts.iter().enumerate() {
                if l != skip {
                    key[n] = v;
                    n += 1;
                }
            }
            key[..dim].sort_unstable();
            let entry = map.entry(key).or_insert([NO_CELL, NO_CELL]);
            if entry[0] == NO_CELL {
                entry[0] = c;
            } else {
                entry[1] = c;
            }
        }
    }
    let mut facets: Vec<Facet> = map
        .into_iter()
        .map(|(vertices, cells)| Facet { vertices, cells })
        .collect();
    facets.sort_unstable_by(|a, b| a.vertices.cmp(&b.vertices));
    facets
}

/// Tags every cell whose centroid lies in box `n` with label `n + 1`; the
/// rest stay extracellular. Boxes must be grid aligned, pairwise separated
/// and strictly inside the domain.
pub fn tag_subdomains(mesh: &Mesh, boxes: &[AxisBox]) -> Result<Mesh, GeometryError> {
    let dim = mesh.dim;
    let g = &mesh.grid;
    for (index, b) in boxes.iter().enumerate() {
        for a in 0..dim {
            if !(b.max[a] > b.min[a]) {
                return Err(GeometryError::Extent { axis: a });
            }
            let h = g.spacing(a);
            for value in [b.min[a], b.max[a]] {
                let steps = (value - g.lower[a]) / h;
                if (steps - steps.round()).abs() > ALIGN_TOL * steps.abs().max(1.0) {
                    return Err(GeometryError::NotGridAligned { index, axis: a, value });
                }
            }
            let tol = ALIGN_TOL * h;
            if b.min[a] <= g.lower[a] + tol || b.max[a] >= g.upper[a] - tol {
                return Err(GeometryError::TouchesBoundary { index });
            }
        }
    }
    for first in 0..boxes.len() {
        for second in first + 1..boxes.len() {
            if boxes[first].touches(&boxes[second], dim) {
                return Err(GeometryError::Overlap { first, second });
            }
        }
    }
    let mut tagged = mesh.clone();
    for c in 0..mesh.num_cells() {
        let p = mesh.cell_centroid(c);
        tagged.tags[c] = boxes
            .iter()
            .position(|b| b.contains_strict(&p, dim))
            .map_or(EXTRACELLULAR, |n| n as u32 + 1);
    }
    tagged.boxes = boxes.to_vec();
    Ok(tagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> Mesh {
        build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap()
    }

    #[test]
    fn single_cell_grid() {
        let m = unit_square(1);
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_vertices(), 4);
    }

    #[test]
    fn counts_follow_grid_formula() {
        let m = unit_square(16);
        assert_eq!(m.num_cells(), 2 * 16 * 16);
        assert_eq!(m.num_vertices(), 17 * 17);
        let m = build_box_mesh(&[0.0, 0.0], &[60.0, 60.0], &[30, 30]).unwrap();
        assert_eq!(m.num_cells(), 1800);
    }

    #[test]
    fn cell_measures_tile_the_box() {
        let m = build_box_mesh(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0], &[2, 3, 4]).unwrap();
        assert_eq!(m.num_cells(), 6 * 24);
        let total: f64 = (0..m.num_cells()).map(|c| m.cell_measure(c)).sum();
        assert!((total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn mesh_is_conforming() {
        for m in [
            unit_square(5),
            build_box_mesh(&[0.0; 3], &[1.0; 3], &[3, 2, 2]).unwrap(),
        ] {
            // every interior facet is shared by exactly two cells, and the
            // exterior ones lie on the box boundary
            for f in m.facets() {
                if f.is_exterior() {
                    let on_boundary = (0..m.dim()).any(|a| {
                        m.facet_vertices(f)
                            .iter()
                            .all(|&v| m.vertex(v)[a] == 0.0 || m.vertex(v)[a] == m.grid().upper[a])
                    });
                    assert!(on_boundary, "dangling facet {:?}", f);
                }
            }
        }
    }

    #[test]
    fn tags_cells_inside_box() {
        let m = unit_square(16);
        let t = tag_subdomains(&m, &[AxisBox::new(&[0.25, 0.25], &[0.75, 0.75])]).unwrap();
        assert_eq!(t.cells_with_tag(1).len(), 128);
        let area: f64 = t.cells_with_tag(1).iter().map(|&c| t.cell_measure(c)).sum();
        assert!((area - 0.25).abs() < 1e-12 * 0.25);
        let plain = tag_subdomains(&m, &[]).unwrap();
        assert!(plain.tags().iter().all(|&t| t == EXTRACELLULAR));
    }

    #[test]
    fn rejects_misaligned_box() {
        let m = unit_square(16);
        let err = tag_subdomains(&m, &[AxisBox::new(&[0.25, 0.3], &[0.75, 0.75])]).unwrap_err();
        assert!(matches!(err, GeometryError::NotGridAligned { axis: 1, .. }));
    }

    #[test]
    fn rejects_overlap_and_boundary_contact() {
        let m = unit_square(16);
        let a = AxisBox::new(&[0.25, 0.25], &[0.5, 0.5]);
        let b = AxisBox::new(&[0.5, 0.25], &[0.75, 0.5]);
        assert!(matches!(
            tag_subdomains(&m, &[a, b]),
            Err(GeometryError::Overlap { first: 0, second: 1 })
        ));
        let edge = AxisBox::new(&[0.0, 0.25], &[0.5, 0.5]);
        assert!(matches!(
            tag_subdomains(&m, &[edge]),
            Err(GeometryError::TouchesBoundary { index: 0 })
        ));
    }

    #[test]
    fn two_disjoint_axons() {
        let m = build_box_mesh(&[0.0, 0.0], &[120.0, 120.0], &[120, 120]).unwrap();
        let t = tag_subdomains(
            &m,
            &[
                AxisBox::new(&[35.0, 52.0], &[85.0, 58.0]),
                AxisBox::new(&[35.0, 62.0], &[85.0, 68.0]),
            ],
        )
        .unwrap();
        assert_eq!(t.cells_with_tag(1).len(), 2 * 50 * 6);
        assert_eq!(t.cells_with_tag(2).len(), 2 * 50 * 6);
    }

    #[test]
    fn locate_finds_containing_cell() {
        let m = unit_square(4);
        let (c, bary) = m.locate(&[0.3, 0.6], |_| true).unwrap();
        let w: f64 = bary[..3].iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
        assert!(bary[..3].iter().all(|&l| l >= -1e-12));
        let mut p = [0.0; 2];
        for (l, &v) in bary[..3].iter().zip(m.cell(c)) {
            p[0] += l * m.vertex(v)[0];
            p[1] += l * m.vertex(v)[1];
        }
        assert!((p[0] - 0.3).abs() < 1e-14 && (p[1] - 0.6).abs() < 1e-14);
        assert!(m.locate(&[1.1, 0.5], |_| true).is_none());
    }

    #[test]
    fn mirrored_kuhn_mesh_is_reflection_symmetric() {
        let m = build_box_mesh(&[0.0; 3], &[1.0; 3], &[2, 4, 4]).unwrap();
        let key = |p: [f64; 3]| p.map(|x| (x * 1e6).round() as i64);
        let mut cells: Vec<Vec<[i64; 3]>> = (0..m.num_cells())
            .map(|c| {
                let mut v: Vec<_> = m.cell(c).iter().map(|&v| key(*m.vertex(v))).collect();
                v.sort();
                v
            })
            .collect();
        cells.sort();
        for axis in 1..3 {
            let mut mirrored: Vec<Vec<[i64; 3]>> = (0..m.num_cells())
                .map(|c| {
                    let mut v: Vec<_> = m
                        .cell(c)
                        .iter()
                        .map(|&v| {
                            let mut p = *m.vertex(v);
                            p[axis] = 1.0 - p[axis];
                            key(p)
                        })
                        .collect();
                    v.sort();
                    v
                })
                .collect();
            mirrored.sort();
            assert_eq!(cells, mirrored, "not symmetric about axis {axis}");
        }
    }
}
