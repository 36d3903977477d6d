use crate::error::SolverError;

/// Edges of a simplex with `n` vertices, lexicographic in local vertex ids.
pub fn local_edges(n: usize) -> &'static [(usize, usize)] {
    const E2: [(usize, usize); 1] = [(0, 1)];
    const E3: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
    const E4: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    match n {
        2 => &E2,
        3 => &E3,
        4 => &E4,
        _ => &[],
    }
}

/// Continuous Lagrange element of degree 1 or 2 on a `dim`-simplex, with
/// basis functions written in barycentric coordinates. Local dofs are the
/// vertices followed by the edge midpoints (P2 only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lagrange {
    pub dim: usize,
    pub degree: usize,
}

impl Lagrange {
    pub fn new(dim: usize, degree: usize) -> Result<Self, SolverError> {
        if !(1..=2).contains(&degree) {
            return Err(SolverError::Degree(degree));
        }
        Ok(Lagrange { dim, degree })
    }

    pub fn num_vertices(&self) -> usize {
        self.dim + 1
    }

    pub fn ndofs(&self) -> usize {
        let nv = self.num_vertices();
        if self.degree == 1 {
            nv
        } else {
            nv + local_edges(nv).len()
        }
    }

    /// Global dof keys for a simplex with the given vertices: `(v, v)` for
    /// vertex dofs and `(min, max)` for edge dofs.
    pub fn dof_keys(&self, verts: &[usize]) -> Vec<(usize, usize)> {
        let mut keys: Vec<(usize, usize)> = verts.iter().map(|&v| (v, v)).collect();
        if self.degree == 2 {
            for &(a, b) in local_edges(verts.len()) {
                let (x, y) = (verts[a], verts[b]);
                keys.push((x.min(y), x.max(y)));
            }
        }
        keys
    }

    /// Barycentric coordinates of the local nodes.
    pub fn nodes(&self) -> Vec<[f64; 4]> {
        let nv = self.num_vertices();
        let mut out = Vec::with_capacity(self.ndofs());
        for a in 0..nv {
            let mut p = [0.0; 4];
            p[a] = 1.0;
            out.push(p);
        }
        if self.degree == 2 {
            for &(a, b) in local_edges(nv) {
                let mut p = [0.0; 4];
                p[a] = 0.5;
                p[b] = 0.5;
                out.push(p);
            }
        }
        out
    }

    /// Basis values at barycentric point `l`.
    pub fn eval(&self, l: &[f64; 4], out: &mut [f64]) {
        let nv = self.num_vertices();
        if self.degree == 1 {
            out[..nv].copy_from_slice(&l[..nv]);
            return;
        }
        for a in 0..nv {
            out[a] = l[a] * (2.0 * l[a] - 1.0);
        }
        for (e, &(a, b)) in local_edges(nv).iter().enumerate() {
            out[nv + e] = 4.0 * l[a] * l[b];
        }
    }

    /// Physical gradients at barycentric point `l`, given the physical
    /// gradients of the barycentric coordinates themselves.
    pub fn eval_grad(&self, l: &[f64; 4], grad_bary: &[[f64; 3]; 4], out: &mut [[f64; 3]]) {
        let nv = self.num_vertices();
        if self.degree == 1 {
            out[..nv].copy_from_slice(&grad_bary[..nv]);
            return;
        }
        for a in 0..nv {
            let s = 4.0 * l[a] - 1.0;
            out[a] = grad_bary[a].map(|g| s * g);
        }
        for (e, &(a, b)) in local_edges(nv).iter().enumerate() {
            let mut g = [0.0; 3];
            for k in 0..3 {
                g[k] = 4.0 * (l[a] * grad_bary[b][k] + l[b] * grad_bary[a][k]);
            }
            out[nv + e] = g;
        }
    }
}
