//! Structured simplicial meshes of boxes with tagged cell subdomains.

mod interface;
pub(crate) mod mesh;

pub use interface::{extract_interface, exterior_boundary, BoundaryMesh, InterfaceMesh, SurfaceFacet};
pub use mesh::{build_box_mesh, tag_subdomains, AxisBox, Facet, Grid, Mesh, EXTRACELLULAR, NO_CELL};
