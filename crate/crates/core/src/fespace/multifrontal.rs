//! Multifrontal sparse LU for structurally symmetric matrices.
//!
//! The elimination order and the supernodal assembly tree come from the
//! symbolic Cholesky factorization of the symmetrized pattern (AMD
//! ordering). Row pivoting is restricted to the fully summed block of each
//! front, so the symbolic structure is fixed in advance; the outer solver
//! recovers accuracy lost to restricted pivoting by iterative refinement.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::factor::{lu_in_place, lu_in_place_scratch};
use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_unit_lower_triangular_in_place};
use faer::reborrow::*;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{Pair, SymbolicSparseColMat};
use faer::{Accum, Mat, MatMut, Par, Side};

use crate::error::SolverError;

#[derive(Debug, Clone)]
struct Front {
    begin: usize,
    end: usize,
    /// Row indices below the diagonal block, in elimination order.
    rows: Vec<usize>,
    children: Vec<usize>,
    /// Position in this front of every row of each child's update matrix.
    child_map: Vec<Vec<usize>>,
    /// (row, col, entry) for the matrix entries assembled into this front.
    entries: Vec<(u32, u32, usize)>,
}

impl Front {
    fn ncols(&self) -> usize {
        self.end - self.begin
    }

    fn size(&self) -> usize {
        self.ncols() + self.rows.len()
    }

    fn local(&self, r: usize) -> Option<usize> {
        if (self.begin..self.end).contains(&r) {
            Some(r - self.begin)
        } else {
            self.rows.binary_search(&r).ok().map(|p| p + self.ncols())
        }
    }
}

/// Elimination order and front structure for a fixed pattern.
#[derive(Debug, Clone)]
pub struct Symbolic {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    fronts: Vec<Front>,
    num_entries: usize,
}

#[derive(Debug, Clone)]
struct FactoredFront {
    /// Unit lower L and upper U of the fully summed block, packed.
    lu: Mat<f64>,
    /// Row i of the factored block is local row `pivots[i]`.
    pivots: Vec<usize>,
    l21: Mat<f64>,
    u12: Mat<f64>,
}

/// Numerical factors from [`Symbolic::factor`].
#[derive(Debug, Clone)]
pub struct Numeric {
    fronts: Vec<FactoredFront>,
}

fn pattern_error(reason: String) -> SolverError {
    SolverError::Factorization {
        reason,
        blocks: String::new(),
    }
}

impl Symbolic {
    /// Analyses the pattern of an `n`x`n` matrix given as (row, col) pairs,
    /// which may repeat.
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<Self, SolverError> {
        let mut sym: Vec<Pair<usize, usize>> = Vec::with_capacity(pairs.len() + n);
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(pattern_error(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            sym.push(Pair {
                row: i.max(j),
                col: i.min(j),
            });
        }
        sym.extend((0..n).map(|i| Pair { row: i, col: i }));
        let (pattern, _) = SymbolicSparseColMat::try_new_from_indices(n, n, &sym)
            .map_err(|e| pattern_error(format!("{e:?}")))?;
        let params = CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        };
        let chol = factorize_symbolic_cholesky(pattern.as_ref(), Side::Lower, SymmetricOrdering::Amd, params)
            .map_err(|e| pattern_error(format!("symbolic analysis: {e:?}")))?;
        let perm: Vec<usize> = match chol.perm() {
            Some(p) => p.arrays().0.to_vec(),
            None => (0..n).collect(),
        };
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // (begin, end, rows below the block) per front
        let layout: Vec<(usize, usize, Vec<usize>)> = match chol.raw() {
            SymbolicCholeskyRaw::Supernodal(sn) => {
                let (begin, end) = (sn.supernode_begin(), sn.supernode_end());
                let (ptr, ridx) = (sn.col_ptr_for_row_idx(), sn.row_idx());
                (0..sn.n_supernodes())
                    .map(|s| (begin[s], end[s], ridx[ptr[s]..ptr[s + 1]].to_vec()))
                    .collect()
            }
            SymbolicCholeskyRaw::Simplicial(sc) => {
                let (ptr, ridx) = (sc.col_ptr(), sc.row_idx());
                (0..n)
                    .map(|j| {
                        let mut rows: Vec<usize> = ridx[ptr[j]..ptr[j + 1]].iter().copied().filter(|&r| r > j).collect();
                        rows.sort_unstable();
                        (j, j + 1, rows)
                    })
                    .collect()
            }
        };
        let ns = layout.len();
        let mut owner = vec![0usize; n];
        let mut fronts: Vec<Front> = layout
            .into_iter()
            .enumerate()
            .map(|(s, (begin, end, rows))| {
                owner[begin..end].iter_mut().for_each(|o| *o = s);
                Front {
                    begin,
                    end,
                    rows,
                    children: Vec::new(),
                    child_map: Vec::new(),
                    entries: Vec::new(),
                }
            })
            .collect();
        for s in 0..ns {
            let Some(&first) = fronts[s].rows.first() else { continue };
            let p = owner[first];
            let map = fronts[s]
                .rows
                .iter()
                .map(|&r| fronts[p].local(r).expect("child rows lie in the parent front"))
                .collect();
            fronts[p].children.push(s);
            fronts[p].child_map.push(map);
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let (pi, pj) = (inv[i], inv[j]);
            let f = &mut fronts[owner[pi.min(pj)]];
            let li = f.local(pi).expect("entry row lies in its front");
            let lj = f.local(pj).expect("entry column lies in its front");
            f.entries.push((li as u32, lj as u32, k));
        }
        Ok(Symbolic {
            n,
            perm,
            fronts,
            num_entries: pairs.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn factor_nonzeros(&self) -> usize {
        self.fronts
            .iter()
            .map(|f| {
                let (c, r) = (f.ncols(), f.rows.len());
                c * c + 2 * c * r
            })
            .sum()
    }

    /// Numerical factorization; `values[k]` belongs to the k-th pair given
    /// to [`Symbolic::new`]. Fails on an exactly singular pivot block.
    pub fn factor(&self, values: &[f64]) -> Result<Numeric, SolverError> {
        assert_eq!(values.len(), self.num_entries, "one value per pattern entry");
        let mut updates: Vec<Option<Mat<f64>>> = vec![None; self.fronts.len()];
        let mut out = Vec::with_capacity(self.fronts.len());
        for (s, f) in self.fronts.iter().enumerate() {
            let (size, nc) = (f.size(), f.ncols());
            let mut front = Mat::<f64>::zeros(size, size);
            for &(i, j, k) in &f.entries {
                front[(i as usize, j as usize)] += values[k];
            }
            for (c, map) in f.children.iter().zip(&f.child_map) {
                let u = updates[*c].take().expect("children are factored first");
                for (jj, &gj) in map.iter().enumerate() {
                    for (ii, &gi) in map.iter().enumerate() {
                        front[(gi, gj)] += u[(ii, jj)];
                    }
                }
            }
            let pivots = {
                let (f11, f12, f21, f22) = front.as_mut().split_at_mut(nc, nc);
                let (mut f11, mut f12, mut f21) = (f11, f12, f21);
                let pivots = factor_dense(f11.rb_mut());
                if let Some(i) = (0..nc).find(|&i| !(f11[(i, i)] != 0.0 && f11[(i, i)].is_finite())) {
                    return Err(SolverError::Factorization {
                        reason: format!("zero pivot in elimination step {}", f.begin + i),
                        blocks: format!("unknown {}", self.perm[f.begin + i]),
                    });
                }
                permute_rows(f12.rb_mut(), &pivots);
                solve_unit_lower_triangular_in_place(f11.rb(), f12.rb_mut(), Par::Seq);
                // X U = F21  <=>  Uᵀ Xᵀ = F21ᵀ
                solve_lower_triangular_in_place(f11.rb().transpose(), f21.rb_mut().transpose_mut(), Par::Seq);
                matmul(f22, Accum::Add, f21.rb(), f12.rb(), -1.0, Par::Seq);
                pivots
            };
            let r = size - nc;
            if r > 0 {
                updates[s] = Some(front.as_ref().submatrix(nc, nc, r, r).to_owned());
            }
            out.push(FactoredFront {
                lu: front.as_ref().submatrix(0, 0, nc, nc).to_owned(),
                pivots,
                l21: front.as_ref().submatrix(nc, 0, r, nc).to_owned(),
                u12: front.as_ref().submatrix(0, nc, nc, r).to_owned(),
            });
        }
        Ok(Numeric { fronts: out })
    }

    /// Solves A x = b with the factors of A.
    pub fn solve(&self, num: &Numeric, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        let mut seg = Vec::new();
        for (f, ff) in self.fronts.iter().zip(&num.fronts) {
            let nc = f.ncols();
            seg.clear();
            seg.extend(ff.pivots.iter().map(|&p| y[f.begin + p]));
            for j in 0..nc {
                let v = seg[j];
                if v != 0.0 {
                    for i in j + 1..nc {
                        seg[i] -= ff.lu[(i, j)] * v;
                    }
                }
            }
            for (j, &v) in seg.iter().enumerate() {
                if v != 0.0 {
                    for (i, &r) in f.rows.iter().enumerate() {
                        y[r] -= ff.l21[(i, j)] * v;
                    }
                }
            }
            y[f.begin..f.end].copy_from_slice(&seg);
        }
        for (f, ff) in self.fronts.iter().zip(&num.fronts).rev() {
            let nc = f.ncols();
            seg.clear();
            seg.extend_from_slice(&y[f.begin..f.end]);
            for (k, &r) in f.rows.iter().enumerate() {
                let v = y[r];
                if v != 0.0 {
                    for (i, s) in seg.iter_mut().enumerate() {
                        *s -= ff.u12[(i, k)] * v;
                    }
                }
            }
            for j in (0..nc).rev() {
                seg[j] /= ff.lu[(j, j)];
                let v = seg[j];
                for i in 0..j {
                    seg[i] -= ff.lu[(i, j)] * v;
                }
            }
            y[f.begin..f.end].copy_from_slice(&seg);
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

fn permute_rows(mut m: MatMut<'_, f64>, pivots: &[usize]) {
    if m.ncols() == 0 {
        return;
    }
    let orig = m.rb().to_owned();
    for (i, &p) in pivots.iter().enumerate() {
        for j in 0..m.ncols() {
            m[(i, j)] = orig[(p, j)];
        }
    }
}

/// Dense LU with partial pivoting in place; returns the row order.
fn factor_dense(a: MatMut<'_, f64>) -> Vec<usize> {
    let n = a.nrows();
    let mut fwd = vec![0usize; n];
    let mut inv = vec![0usize; n];
    let mut mem = MemBuffer::new(lu_in_place_scratch::<usize, f64>(n, n, Par::Seq, Default::default()));
    lu_in_place(a, &mut fwd, &mut inv, Par::Seq, MemStack::new(&mut mem), Default::default());
    fwd
}
