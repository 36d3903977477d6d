use log::warn;

use crate::error::SolverError;

use super::quadrature::simplex_rule;
use super::space::{Field, FunctionSpace, Side, TraceMap};

/// A sparse matrix block in coordinate form with block-local indices.
/// Duplicate entries are summed when the global matrix is built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooBlock {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CooBlock {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooBlock {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for e in &mut self.entries {
            e.2 *= s;
        }
        self
    }

    /// y = A x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Dense copy, for small blocks in tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for &(i, j, v) in &self.entries {
            d[i][j] += v;
        }
        d
    }

    /// Bilinear form yᵀ A x.
    pub fn form(&self, y: &[f64], x: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, j, v)| y[i] * v * x[j]).sum()
    }
}

/// Coefficient of a variational term: a constant or a field on the same
/// space as the test functions.
#[derive(Debug, Clone, Copy)]
pub enum Coefficient<'a> {
    Constant(f64),
    Field(&'a Field),
}

impl Coefficient<'_> {
    fn degree(&self) -> usize {
        match self {
            Coefficient::Constant(_) => 0,
            Coefficient::Field(f) => f.space.degree(),
        }
    }

    fn check(&self, space: &FunctionSpace) -> Result<(), SolverError> {
        if let Coefficient::Field(f) = self {
            if f.space.ndofs() != space.ndofs() || f.space.num_cells() != space.num_cells() {
                return Err(SolverError::SpaceMismatch(
                    "coefficient field lives on a different space".into(),
                ));
            }
        }
        Ok(())
    }

    fn eval(&self, c: usize, l: &[f64; 4]) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Field(f) => f.eval_cell(c, l),
        }
    }
}

/// Loops over the cells of `space` with a quadrature rule of `degree`,
/// handing each quadrature point's weight × measure, basis values and (for
/// bulk spaces) gradients to `kernel`, which accumulates into the local
/// matrix.
fn cell_loop(
    space: &FunctionSpace,
    degree: usize,
    with_grad: bool,
    mut kernel: impl FnMut(usize, f64, &[f64; 4], &[f64], &[[f64; 3]], &mut [f64]),
) -> CooBlock {
    let el = space.element();
    let nd = el.ndofs();
    let rule = simplex_rule(space.cell_dim(), degree);
    let mut block = CooBlock::new(space.ndofs(), space.ndofs());
    block.entries.reserve(space.num_cells() * nd * nd);
    let mut phi = vec![0.0; nd];
    let mut grad = vec![[0.0; 3]; nd];
    let mut local = vec![0.0; nd * nd];
    for c in 0..space.num_cells() {
        let geo = space.cell_geometry(c);
        local.iter_mut().for_each(|x| *x = 0.0);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            el.eval(l, &mut phi);
            if with_grad {
                el.eval_grad(l, &geo.grad_bary, &mut grad);
            }
            kernel(c, w * geo.measure, l, &phi, &grad, &mut local);
        }
        let dofs = space.cell_dofs(c);
        for a in 0..nd {
            for b in 0..nd {
                block.entries.push((dofs[a], dofs[b], local[a * nd + b]));
            }
        }
    }
    block
}

/// ⟨κ u, v⟩ over the cells of `space`.
pub fn assemble_mass(space: &FunctionSpace, coef: Coefficient) -> Result<CooBlock, SolverError> {
    coef.check(space)?;
    let nd = space.element().ndofs();
    let degree = 2 * space.degree() + coef.degree();
    Ok(cell_loop(space, degree, false, |c, w, l, phi, _, local| {
        let k = w * coef.eval(c, l);
        for a in 0..nd {
            for b in 0..nd {
                local[a * nd + b] += k * phi[a] * phi[b];
            }
        }
    }))
}

/// ⟨D ∇u, ∇v⟩.
pub fn assemble_diffusion(space: &FunctionSpace, d: f64) -> CooBlock {
    weighted_stiffness(space, Coefficient::Constant(d))
}

fn weighted_stiffness(space: &FunctionSpace, coef: Coefficient) -> CooBlock {
    let nd = space.element().ndofs();
    let degree = (2 * space.degree() - 2 + coef.degree()).max(1);
    cell_loop(space, degree, true, |c, w, l, _, g, local| {
        let k = w * coef.eval(c, l);
        for a in 0..nd {
            for b in 0..nd {
                local[a * nd + b] += k * (g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]);
            }
        }
    })
}

/// ⟨κ ∇u, ∇v⟩ with κ constant or a field on the same space.
pub fn assemble_weighted_stiffness(space: &FunctionSpace, coef: Coefficient) -> Result<CooBlock, SolverError> {
    coef.check(space)?;
    Ok(weighted_stiffness(space, coef))
}

/// Σ s_i B_i for blocks produced by the same assembly loop over the same
/// space, which share their entry order.
pub fn combine_blocks(parts: &[(&CooBlock, f64)]) -> CooBlock {
    let first = parts[0].0;
    let mut out = CooBlock {
        nrows: first.nrows,
        ncols: first.ncols,
        entries: first.entries.iter().map(|&(i, j, _)| (i, j, 0.0)).collect(),
    };
    for (blk, s) in parts {
        assert_eq!(blk.entries.len(), out.entries.len(), "blocks from different loops");
        for (o, e) in out.entries.iter_mut().zip(&blk.entries) {
            debug_assert_eq!((o.0, o.1), (e.0, e.1));
            o.2 += s * e.2;
        }
    }
    out
}

/// ⟨(D z / ψ) c ∇φ, ∇v⟩ with c the previous concentration. Negative
/// values of c are clamped to zero; the number of clamped dofs is returned
/// with the block.
pub fn assemble_drift(
    space: &FunctionSpace,
    conc_prev: &Field,
    d: f64,
    z: f64,
    psi: f64,
) -> Result<(CooBlock, usize), SolverError> {
    Coefficient::Field(conc_prev).check(space)?;
    let clamped = conc_prev.values.iter().filter(|&&c| c < 0.0).count();
    let block = if clamped > 0 {
        warn!("clamping {clamped} negative concentration values in the drift term");
        let mut c = conc_prev.clone();
        c.values.iter_mut().for_each(|x| *x = x.max(0.0));
        weighted_stiffness(space, Coefficient::Field(&c))
    } else {
        weighted_stiffness(space, Coefficient::Field(conc_prev))
    };
    Ok((block.scaled(d * z / psi), clamped))
}

/// ⟨κ u, v⟩ with κ an arbitrary function of the cell and the physical
/// point, integrated with a rule of the given degree.
pub fn assemble_mass_with(
    space: &FunctionSpace,
    degree: usize,
    kappa: impl Fn(usize, &[f64; 3]) -> f64,
) -> CooBlock {
    let nd = space.element().ndofs();
    cell_loop(space, degree, false, |c, w, l, phi, _, local| {
        let k = w * kappa(c, &space.point(c, l));
        for a in 0..nd {
            for b in 0..nd {
                local[a * nd + b] += k * phi[a] * phi[b];
            }
        }
    })
}

/// Maps the rows and/or columns of an interface-space block onto bulk
/// spaces through the trace map (`None` keeps the interface numbering).
pub fn map_interface_block(
    block: &CooBlock,
    trace: &TraceMap,
    rows: Option<(Side, usize)>,
    cols: Option<(Side, usize)>,
) -> CooBlock {
    let (nrows, rmap) = match rows {
        Some((side, n)) => (n, Some(trace.map(side))),
        None => (block.nrows, None),
    };
    let (ncols, cmap) = match cols {
        Some((side, n)) => (n, Some(trace.map(side))),
        None => (block.ncols, None),
    };
    CooBlock {
        nrows,
        ncols,
        entries: block
            .entries
            .iter()
            .map(|&(i, j, v)| (rmap.map_or(i, |m| m[i]), cmap.map_or(j, |m| m[j]), v))
            .collect(),
    }
}

/// Weighted interface mass ⟨w u, v⟩_Γ coupling interface dofs, with rows
/// and columns optionally mapped onto bulk trace dofs.
pub fn assemble_interface_terms(
    gamma: &FunctionSpace,
    trace: &TraceMap,
    weight: Coefficient,
    rows: Option<(Side, usize)>,
    cols: Option<(Side, usize)>,
) -> Result<CooBlock, SolverError> {
    let m = assemble_mass(gamma, weight)?;
    Ok(map_interface_block(&m, trace, rows, cols))
}

/// Blocks of ⟨φ_i − φ_e, q⟩_Γ: rows on the interface space, columns on
/// the intracellular and extracellular spaces respectively.
pub fn assemble_jump(
    gamma: &FunctionSpace,
    trace: &TraceMap,
    n_intra: usize,
    n_extra: usize,
) -> Result<(CooBlock, CooBlock), SolverError> {
    let m = assemble_mass(gamma, Coefficient::Constant(1.0))?;
    Ok((
        map_interface_block(&m, trace, None, Some((Side::Intra, n_intra))),
        map_interface_block(&m, trace, None, Some((Side::Extra, n_extra))).scaled(-1.0),
    ))
}

/// Coefficients of ∫ u dx, i.e. the row of the grounding constraint.
pub fn assemble_multiplier_row(space: &FunctionSpace) -> Vec<f64> {
    assemble_load(space, space.degree(), |_, _| 1.0)
}

/// Load vector ⟨f, v⟩ with f a function of the cell and the physical point.
pub fn assemble_load(space: &FunctionSpace, degree: usize, f: impl Fn(usize, &[f64; 3]) -> f64) -> Vec<f64> {
    let el = space.element();
    let nd = el.ndofs();
    let rule = simplex_rule(space.cell_dim(), degree);
    let mut out = vec![0.0; space.ndofs()];
    let mut phi = vec![0.0; nd];
    for c in 0..space.num_cells() {
        let measure = space.cell_geometry(c).measure;
        let dofs = space.cell_dofs(c);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            el.eval(l, &mut phi);
            let fx = w * measure * f(c, &space.point(c, l));
            for a in 0..nd {
                out[dofs[a]] += fx * phi[a];
            }
        }
    }
    out
}

/// Load vector ⟨F, ∇v⟩ with F a vector function of the cell and point.
pub fn assemble_grad_load(
    space: &FunctionSpace,
    degree: usize,
    f: impl Fn(usize, &[f64; 3]) -> [f64; 3],
) -> Vec<f64> {
    let el = space.element();
    let nd = el.ndofs();
    let rule = simplex_rule(space.cell_dim(), degree);
    let mut out = vec![0.0; space.ndofs()];
    let mut grad = vec![[0.0; 3]; nd];
    for c in 0..space.num_cells() {
        let geo = space.cell_geometry(c);
        let dofs = space.cell_dofs(c);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            el.eval_grad(l, &geo.grad_bary, &mut grad);
            let fx = f(c, &space.point(c, l));
            let s = w * geo.measure;
            for a in 0..nd {
                out[dofs[a]] += s * (fx[0] * grad[a][0] + fx[1] * grad[a][1] + fx[2] * grad[a][2]);
            }
        }
    }
    out
}
