use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::SolverError;

use super::multifrontal::{Numeric, Symbolic};
use super::system::BlockSystem;

/// Default bound on the relative residual ‖R(Ax − b)‖ / ‖Rb‖ of a solve,
/// with R the row equilibration.
pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-10;

const MAX_REFINEMENTS: usize = 10;
/// Refinement sweeps allowed with a factorization of an earlier matrix.
const MAX_STALE_SWEEPS: usize = 10;
/// Minimum residual reduction per sweep before a stale factor is dropped.
const STALE_CONTRACTION: f64 = 0.25;

/// Counters collected across solves, reported in the run manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub solves: usize,
    pub symbolic_factorizations: usize,
    #[serde(default)]
    pub numeric_factorizations: usize,
    pub refinement_steps: usize,
    pub max_backward_error: f64,
    #[serde(default)]
    pub max_relative_residual: f64,
    pub max_unknowns: usize,
    pub max_nonzeros: usize,
}

struct Pattern {
    fingerprint: u64,
    symbolic: Symbolic,
    /// Last numeric factorization with the scalings it was computed under.
    factor: Option<Factor>,
}

struct Factor {
    numeric: Numeric,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl Factor {
    /// Approximate solve C · LU⁻¹ · R r.
    fn apply(&self, symbolic: &Symbolic, r: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = r.iter().zip(&self.row_scale).map(|(a, s)| a * s).collect();
        let y = symbolic.solve(&self.numeric, &rhs);
        y.iter().zip(&self.col_scale).map(|(a, s)| a * s).collect()
    }
}

/// Direct sparse LU solver with row/column equilibration and iterative
/// refinement. The symbolic analysis is kept while the sparsity pattern is
/// unchanged; with `reuse_factor` the previous numeric factor is tried
/// first as a preconditioner and only replaced when refinement with it
/// stops contracting.
pub struct LinearSolver {
    pub tolerance: f64,
    pub reuse_factor: bool,
    pattern: Option<Pattern>,
    pub stats: SolverStats,
}

impl Default for LinearSolver {
    fn default() -> Self {
        Self::new(DEFAULT_RESIDUAL_TOLERANCE)
    }
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("tolerance", &self.tolerance)
            .field("reuse_factor", &self.reuse_factor)
            .field("stats", &self.stats)
            .finish()
    }
}

/// Residual of a candidate with two measures. The componentwise backward
/// error max_i |r_i| / (|A||x| + |b|)_i drives refinement, so constraint rows
/// with tiny coefficients are resolved as tightly as the others. The
/// row-equilibrated relative residual is what the tolerance is checked on.
struct Residual<'a> {
    system: &'a BlockSystem,
    row_scale: &'a [f64],
    rhs_norm: f64,
}

struct Quality {
    backward: f64,
    relative: f64,
}

impl<'a> Residual<'a> {
    fn new(system: &'a BlockSystem, row_scale: &'a [f64]) -> Self {
        let rhs_norm = system
            .rhs
            .iter()
            .zip(row_scale)
            .map(|(b, s)| (b * s).powi(2))
            .sum::<f64>()
            .sqrt();
        Residual { system, row_scale, rhs_norm }
    }

    fn eval(&self, x: &[f64]) -> (Vec<f64>, Quality) {
        let n = self.system.size();
        let mut r = self.system.rhs.clone();
        let mut den: Vec<f64> = r.iter().map(|b| b.abs()).collect();
        for &(i, j, v) in &self.system.triplets {
            let t = v * x[j];
            r[i] -= t;
            den[i] += t.abs();
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            let e = r[i].abs();
            if e > 0.0 {
                worst = worst.max(if den[i] > 0.0 { e / den[i] } else { f64::INFINITY });
            }
        }
        let scaled = r
            .iter()
            .zip(self.row_scale)
            .map(|(a, s)| (a * s).powi(2))
            .sum::<f64>()
            .sqrt();
        let relative = if scaled == 0.0 { 0.0 } else { scaled / self.rhs_norm };
        (r, Quality { backward: worst, relative })
    }
}

impl LinearSolver {
    pub fn new(tolerance: f64) -> Self {
        LinearSolver {
            tolerance,
            reuse_factor: true,
            pattern: None,
            stats: SolverStats::default(),
        }
    }

    /// Solves the (constrained) system, returning the global solution.
    pub fn solve(&mut self, system: &BlockSystem) -> Result<Vec<f64>, SolverError> {
        let n = system.size();
        let trips = &system.triplets;
        let mut row_scale = vec![0.0f64; n];
        for &(i, _, v) in trips {
            row_scale[i] = row_scale[i].max(v.abs());
        }
        if let Some(i) = row_scale.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(SolverError::Factorization {
                reason: format!("row {i} is empty or non-finite"),
                blocks: self.describe(system, i),
            });
        }
        row_scale.iter_mut().for_each(|s| *s = 1.0 / *s);
        let mut col_scale = vec![0.0f64; n];
        for &(i, j, v) in trips {
            col_scale[j] = col_scale[j].max((v * row_scale[i]).abs());
        }
        if let Some(j) = col_scale.iter().position(|&s| !(s > 0.0)) {
            return Err(SolverError::Factorization {
                reason: format!("column {j} is empty"),
                blocks: self.describe(system, j),
            });
        }
        col_scale.iter_mut().for_each(|s| *s = 1.0 / *s);

        let fingerprint = {
            let mut h = DefaultHasher::new();
            n.hash(&mut h);
            for &(i, j, _) in trips {
                (i, j).hash(&mut h);
            }
            h.finish()
        };
        if self.pattern.as_ref().map_or(true, |p| p.fingerprint != fingerprint) {
            let pairs: Vec<(usize, usize)> = trips.iter().map(|&(i, j, _)| (i, j)).collect();
            self.pattern = Some(Pattern {
                fingerprint,
                symbolic: Symbolic::new(n, &pairs)?,
                factor: None,
            });
            self.stats.symbolic_factorizations += 1;
        }
        self.stats.max_unknowns = self.stats.max_unknowns.max(n);
        let residual = Residual::new(system, &row_scale);
        let target = 1e-3 * self.tolerance;

        let mut result = None;
        if self.reuse_factor {
            let pattern = self.pattern.as_ref().expect("pattern");
            if let Some(f) = &pattern.factor {
                let (r, sweeps) = refine_stale(&pattern.symbolic, f, &residual, target, 0.1 * self.tolerance);
                self.stats.refinement_steps += sweeps;
                result = r;
            }
        }
        let (x, quality) = match result {
            Some(r) => r,
            None => {
                let pattern = self.pattern.as_mut().expect("pattern");
                let values: Vec<f64> = trips
                    .iter()
                    .map(|&(i, j, v)| v * row_scale[i] * col_scale[j])
                    .collect();
                let numeric = pattern.symbolic.factor(&values).map_err(|e| match e {
                    SolverError::Factorization { reason, .. } => SolverError::Factorization {
                        reason,
                        blocks: singular_hint(system),
                    },
                    other => other,
                })?;
                self.stats.numeric_factorizations += 1;
                self.stats.max_nonzeros = self.stats.max_nonzeros.max(pattern.symbolic.factor_nonzeros());
                let factor = Factor {
                    numeric,
                    row_scale: row_scale.clone(),
                    col_scale,
                };
                let mut x = factor.apply(&pattern.symbolic, &system.rhs);
                let (mut r, mut q) = residual.eval(&x);
                for _ in 0..MAX_REFINEMENTS {
                    if !(q.backward > target) {
                        break;
                    }
                    let dx = factor.apply(&pattern.symbolic, &r);
                    let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
                    let (r2, q2) = residual.eval(&candidate);
                    self.stats.refinement_steps += 1;
                    if !(q2.backward < q.backward) {
                        break;
                    }
                    x = candidate;
                    r = r2;
                    q = q2;
                }
                pattern.factor = Some(factor);
                (x, q)
            }
        };
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            let b = system.layout.block_of(i);
            return Err(SolverError::NonFinite {
                block: system.layout.name(b).to_string(),
            });
        }
        self.stats.solves += 1;
        self.stats.max_backward_error = self.stats.max_backward_error.max(quality.backward);
        self.stats.max_relative_residual = self.stats.max_relative_residual.max(quality.relative);
        if !(quality.relative <= self.tolerance) {
            return Err(SolverError::Residual {
                residual: quality.relative,
                tolerance: self.tolerance,
            });
        }
        Ok(x)
    }

    fn describe(&self, system: &BlockSystem, i: usize) -> String {
        let b = system.layout.block_of(i);
        format!("{} (local index {})", system.layout.name(b), i - system.layout.offset(b))
    }

}

/// Refinement preconditioned by an older factor. Sweeps continue while the
/// backward error contracts; once it stalls the best iterate is accepted if
/// both measures are within `accept`, otherwise `None` asks for a fresh
/// factorization. Also returns the number of sweeps spent.
fn refine_stale(
    symbolic: &Symbolic,
    factor: &Factor,
    residual: &Residual<'_>,
    target: f64,
    accept: f64,
) -> (Option<(Vec<f64>, Quality)>, usize) {
    let ok = |q: &Quality| q.backward <= accept && q.relative <= accept;
    let mut x = factor.apply(symbolic, &residual.system.rhs);
    let (mut r, mut q) = residual.eval(&x);
    for sweep in 0..MAX_STALE_SWEEPS {
        if q.backward <= target {
            return (Some((x, q)), sweep);
        }
        let dx = factor.apply(symbolic, &r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let (r2, q2) = residual.eval(&candidate);
        if !(q2.backward <= STALE_CONTRACTION * q.backward) {
            let best = if q2.backward < q.backward { (candidate, q2) } else { (x, q) };
            return (ok(&best.1).then_some(best), sweep + 1);
        }
        x = candidate;
        r = r2;
        q = q2;
    }
    (ok(&q).then_some((x, q)), MAX_STALE_SWEEPS)
}

/// Per-block dimensions, to help locate a singular block.
fn singular_hint(system: &BlockSystem) -> String {
    (0..system.layout.num_blocks())
        .map(|b| format!("{}[{}]", system.layout.name(b), system.layout.size(b)))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::assembly::CooBlock;
    use crate::fespace::system::BlockLayout;

    fn system_from(n: usize, entries: &[(usize, usize, f64)], rhs: &[f64]) -> BlockSystem {
        let mut s = BlockSystem::new(BlockLayout::new(&[("x".into(), n)]));
        let mut b = CooBlock::new(n, n);
        b.entries.extend_from_slice(entries);
        s.add_block(0, 0, &b, 1.0);
        s.add_rhs(0, rhs, 1.0);
        s
    }

    #[test]
    fn identity_returns_rhs() {
        let s = system_from(3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)], &[1.0, -2.0, 3.5]);
        let x = LinearSolver::default().solve(&s).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn badly_scaled_saddle_point() {
        // [[1e6, 1], [1, 0]] x = [1, 2]
        let s = system_from(2, &[(0, 0, 1e6), (0, 1, 1.0), (1, 0, 1.0)], &[1.0, 2.0]);
        let x = LinearSolver::default().solve(&s).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - (1.0 - 2e6)).abs() < 1e-6);
    }

    #[test]
    fn reuses_symbolic_factorization() {
        let mut solver = LinearSolver::default();
        for k in 1..4 {
            let d = k as f64 + 1.0;
            let s = system_from(2, &[(0, 0, d), (0, 1, 1.0), (1, 0, 1.0), (1, 1, d)], &[1.0, 1.0]);
            let x = solver.solve(&s).unwrap();
            assert!((x[0] - 1.0 / (d + 1.0)).abs() < 1e-14);
        }
        assert_eq!(solver.stats.symbolic_factorizations, 1);
        assert_eq!(solver.stats.solves, 3);
    }

    #[test]
    fn singular_system_is_reported() {
        let s = system_from(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)], &[1.0, 2.0]);
        assert!(LinearSolver::default().solve(&s).is_err());
        let empty_row = system_from(2, &[(0, 0, 1.0), (0, 1, 1.0)], &[1.0, 0.0]);
        assert!(matches!(
            LinearSolver::default().solve(&empty_row),
            Err(SolverError::Factorization { .. })
        ));
    }
}
