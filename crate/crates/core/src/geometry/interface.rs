use crate::error::GeometryError;

use super::mesh::{Mesh, EXTRACELLULAR};

/// One facet of Γ or of ∂Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFacet {
    /// Sorted parent-mesh vertex ids (only the first `dim` are used).
    pub vertices: [usize; 3],
    /// The cell the normal points out of (intracellular for Γ).
    pub inner_cell: usize,
    /// The neighbouring extracellular cell on Γ; `usize::MAX` on ∂Ω.
    pub outer_cell: usize,
    pub normal: [f64; 3],
    pub measure: f64,
    /// Membrane label n of Γ_n (0 on ∂Ω).
    pub label: u32,
}

/// The membrane Γ as a codimension-one facet mesh.
#[derive(Debug, Clone)]
pub struct InterfaceMesh {
    pub dim: usize,
    pub facets: Vec<SurfaceFacet>,
}

/// Exterior facets of ∂Ω with outward normals.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub dim: usize,
    pub facets: Vec<SurfaceFacet>,
}

impl InterfaceMesh {
    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.facets.iter().map(|f| f.measure).sum()
    }

    /// Distinct parent vertices touched by Γ, sorted.
    pub fn vertices(&self) -> Vec<usize> {
        collect_vertices(self.dim, &self.facets)
    }

    pub fn facets_with_label(&self, label: u32) -> impl Iterator<Item = &SurfaceFacet> {
        self.facets.iter().filter(move |f| f.label == label)
    }
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.facets.iter().map(|f| f.measure).sum()
    }

    pub fn vertices(&self) -> Vec<usize> {
        collect_vertices(self.dim, &self.facets)
    }
}

fn collect_vertices(dim: usize, facets: &[SurfaceFacet]) -> Vec<usize> {
    let mut v: Vec<usize> = facets.iter().flat_map(|f| f.vertices[..dim].to_vec()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Unit normal and measure of a facet, oriented away from `cell`.
fn oriented_normal(mesh: &Mesh, verts: &[usize], cell: usize) -> ([f64; 3], f64) {
    let p = |i: usize| mesh.vertex(verts[i]);
    let (mut n, measure) = if mesh.dim() == 2 {
        let (a, b) = (p(0), p(1));
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = t[0].hypot(t[1]);
        ([t[1] / len, -t[0] / len, 0.0], len)
    } else {
        let (a, b, c) = (p(0), p(1), p(2));
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cr = [
            u[1] * w[2] - u[2] * w[1],
            u[2] * w[0] - u[0] * w[2],
            u[0] * w[1] - u[1] * w[0],
        ];
        let len = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
        (cr.map(|x| x / len), 0.5 * len)
    };
    let centroid = mesh.cell_centroid(cell);
    let a = p(0);
    let outward: f64 = (0..3).map(|k| n[k] * (a[k] - centroid[k])).sum();
    if outward < 0.0 {
        n = n.map(|x| -x);
    }
    (n, measure)
}

/// Facets separating an intracellular cell from an extracellular one, in
/// the mesh's lexicographic facet order, with normals pointing out of Ω_i.
pub fn extract_interface(mesh: &Mesh) -> Result<InterfaceMesh, GeometryError> {
    let dim = mesh.dim();
    let mut facets = Vec::new();
    for f in mesh.facets() {
        if f.is_exterior() {
            continue;
        }
        let (t0, t1) = (mesh.tag(f.cells[0]), mesh.tag(f.cells[1]));
        if t0 == t1 {
            continue;
        }
        if t0 != EXTRACELLULAR && t1 != EXTRACELLULAR {
            return Err(GeometryError::CellsTouch {
                vertices: f.vertices[..dim].to_vec(),
                first: t0.min(t1),
                second: t0.max(t1),
            });
        }
        let (inner, outer) = if t0 != EXTRACELLULAR {
            (f.cells[0], f.cells[1])
        } else {
            (f.cells[1], f.cells[0])
        };
        let (normal, measure) = oriented_normal(mesh, &f.vertices[..dim], inner);
        facets.push(SurfaceFacet {
            vertices: f.vertices,
            inner_cell: inner,
            outer_cell: outer,
            normal,
            measure,
            label: mesh.tag(inner),
        });
    }
    Ok(InterfaceMesh { dim, facets })
}

/// Facets adjacent to exactly one cell, with outward normals.
pub fn exterior_boundary(mesh: &Mesh) -> BoundaryMesh {
    let dim = mesh.dim();
    let facets = mesh
        .facets()
        .iter()
        .filter(|f| f.is_exterior())
        .map(|f| {
            let (normal, measure) = oriented_normal(mesh, &f.vertices[..dim], f.cells[0]);
            SurfaceFacet {
                vertices: f.vertices,
                inner_cell: f.cells[0],
                outer_cell: usize::MAX,
                normal,
                measure,
                label: 0,
            }
        })
        .collect();
    BoundaryMesh { dim, facets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::{build_box_mesh, tag_subdomains, AxisBox};

    fn square_with_cell(n: usize) -> Mesh {
        let m = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap();
        tag_subdomains(&m, &[AxisBox::new(&[0.25, 0.25], &[0.75, 0.75])]).unwrap()
    }

    #[test]
    fn interface_of_square_cell() {
        let m = square_with_cell(16);
        let g = extract_interface(&m).unwrap();
        assert_eq!(g.len(), 32);
        assert!((g.measure() - 2.0).abs() < 1e-13);
        assert_eq!(g.vertices().len(), 32);
        for f in &g.facets {
            assert_eq!(m.tag(f.inner_cell), 1);
            assert_eq!(m.tag(f.outer_cell), EXTRACELLULAR);
            // normal points away from the square's centre
            let mid: Vec<f64> = (0..2)
                .map(|a| 0.5 * (m.vertex(f.vertices[0])[a] + m.vertex(f.vertices[1])[a]))
                .collect();
            assert!(f.normal[0] * (mid[0] - 0.5) + f.normal[1] * (mid[1] - 0.5) > 0.0);
        }
    }

    #[test]
    fn untagged_mesh_has_empty_interface() {
        let m = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[4, 4]).unwrap();
        assert!(extract_interface(&m).unwrap().is_empty());
    }

    #[test]
    fn boundary_facet_counts() {
        let m = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[1, 1]).unwrap();
        assert_eq!(exterior_boundary(&m).len(), 4);
        let m = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[16, 16]).unwrap();
        let b = exterior_boundary(&m);
        assert_eq!(b.len(), 64);
        assert!((b.measure() - 4.0).abs() < 1e-13);
        let m = build_box_mesh(&[0.0; 3], &[1.0; 3], &[2, 2, 2]).unwrap();
        let b = exterior_boundary(&m);
        assert_eq!(b.len(), 48);
        assert!((b.measure() - 6.0).abs() < 1e-13);
        for f in &b.facets {
            let c = m.cell_centroid(f.inner_cell);
            let p = m.vertex(f.vertices[0]);
            let d: f64 = (0..3).map(|a| f.normal[a] * (p[a] - c[a])).sum();
            assert!(d > 0.0);
        }
    }

    #[test]
    fn box_cell_in_3d() {
        let m = build_box_mesh(&[0.0; 3], &[4.0, 1.4, 1.4], &[4, 14, 14]).unwrap();
        let m = tag_subdomains(&m, &[AxisBox::new(&[1.0, 0.6, 0.6], &[3.0, 0.8, 0.8])]).unwrap();
        let g = extract_interface(&m).unwrap();
        // brute-force scan: count facets with differently tagged neighbours
        let brute = m
            .facets()
            .iter()
            .filter(|f| !f.is_exterior() && m.tag(f.cells[0]) != m.tag(f.cells[1]))
            .count();
        assert_eq!(g.len(), brute);
        let area = 2.0 * (2.0 * 0.2 * 2.0) + 2.0 * 0.2 * 0.2;
        assert!((g.measure() - area).abs() < 1e-12);
        // four long faces and two end faces, each 2 x 2 grid squares split
        // into two triangles
        let squares = 4 * (2 * 2) + 2 * (2 * 2);
        assert_eq!(g.len(), 2 * squares);
    }

    #[test]
    fn touching_cells_rejected() {
        let m = square_with_cell(8);
        let left = tag_subdomains(&m, &[AxisBox::new(&[0.125, 0.25], &[0.25, 0.75])]).unwrap();
        let mut tagged = m.clone();
        tagged.retag_for_test(&left.cells_with_tag(1), 2);
        assert!(matches!(
            extract_interface(&tagged),
            Err(GeometryError::CellsTouch { first: 1, second: 2, .. })
        ));
    }
}
