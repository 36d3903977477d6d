use super::quadrature::simplex_rule;
use super::space::Field;

/// Degree added on top of 2·p for error integrals of non-polynomial
/// exact solutions.
const EXTRA_DEGREE: usize = 3;

fn degree_for(field: &Field) -> usize {
    2 * field.space.degree() + EXTRA_DEGREE
}

/// ‖u‖ in L² over the simplices of the field's space.
pub fn l2_norm(field: &Field) -> f64 {
    l2_error(field, |_| 0.0)
}

/// ‖u − u_h‖ in L². On an interface space this is the broken L² norm over
/// the facets of Γ.
pub fn l2_error(field: &Field, exact: impl Fn(&[f64; 3]) -> f64) -> f64 {
    broken_l2_error(field, |_, x| exact(x))
}

/// L² error against an exact solution that may depend on the cell, such as
/// a normal flux on the interface facets. The sum runs cell by cell.
pub fn broken_l2_error(field: &Field, exact: impl Fn(usize, &[f64; 3]) -> f64) -> f64 {
    let space = &field.space;
    let rule = simplex_rule(space.cell_dim(), degree_for(field));
    let mut sum = 0.0;
    for c in 0..space.num_cells() {
        let measure = space.cell_geometry(c).measure;
        let mut cell = 0.0;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let d = exact(c, &space.point(c, l)) - field.eval_cell(c, l);
            cell += w * d * d;
        }
        sum += measure * cell;
    }
    sum.sqrt()
}

/// Full H¹ error (L² part plus gradient part) against an exact solution
/// with known gradient.
pub fn h1_error(
    field: &Field,
    exact: impl Fn(&[f64; 3]) -> f64,
    exact_grad: impl Fn(&[f64; 3]) -> [f64; 3],
) -> f64 {
    let space = &field.space;
    let el = space.element();
    let nd = el.ndofs();
    let rule = simplex_rule(space.cell_dim(), degree_for(field));
    let mut grad = vec![[0.0; 3]; nd];
    let mut sum = 0.0;
    for c in 0..space.num_cells() {
        let geo = space.cell_geometry(c);
        let dofs = space.cell_dofs(c);
        let mut cell = 0.0;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = space.point(c, l);
            el.eval_grad(l, &geo.grad_bary, &mut grad);
            let mut gh = [0.0; 3];
            for (a, &d) in dofs.iter().enumerate() {
                for k in 0..3 {
                    gh[k] += field.values[d] * grad[a][k];
                }
            }
            let g = exact_grad(&x);
            let d = exact(&x) - field.eval_cell(c, l);
            cell += w * (d * d + (0..3).map(|k| (g[k] - gh[k]).powi(2)).sum::<f64>());
        }
        sum += geo.measure * cell;
    }
    sum.sqrt()
}

/// ∫ u dx.
pub fn integral(field: &Field) -> f64 {
    let space = &field.space;
    let rule = simplex_rule(space.cell_dim(), space.degree());
    (0..space.num_cells())
        .map(|c| {
            let m = space.cell_geometry(c).measure;
            m * rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(l, w)| w * field.eval_cell(c, l))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::space::FunctionSpace;
    use crate::geometry::build_box_mesh;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_space(n: usize, degree: usize) -> Arc<FunctionSpace> {
        let m = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap();
        let all: Vec<usize> = (0..m.num_cells()).collect();
        Arc::new(FunctionSpace::on_cells(&m, &all, degree).unwrap())
    }

    #[test]
    fn norm_of_one() {
        let v = unit_space(3, 1);
        assert!((l2_norm(&Field::constant(&v, 1.0, "")) - 1.0).abs() < 1e-14);
        assert_eq!(l2_norm(&Field::zeros(&v, "")), 0.0);
    }

    #[test]
    fn analytic_sine_norm() {
        // the interpolation error is O(h²), so compare the exact integral
        // through an error norm against the zero field
        let v = unit_space(4, 1);
        let s = |p: &[f64; 3]| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin();
        let e = l2_error(&Field::zeros(&v, ""), s);
        // degree 5 rule on a 4 x 4 mesh integrates sin² to about 1e-3
        assert!((e * e - 0.25).abs() < 2e-3);
        let v = unit_space(32, 1);
        let e = l2_error(&Field::zeros(&v, ""), s);
        assert!((e * e - 0.25).abs() < 1e-9);
    }

    #[test]
    fn interpolation_error_rates() {
        let u = |p: &[f64; 3]| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos();
        let du = |p: &[f64; 3]| {
            [
                2.0 * PI * (2.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).cos(),
                -2.0 * PI * (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin(),
                0.0,
            ]
        };
        for degree in 1..=2 {
            let errs: Vec<(f64, f64)> = [8, 16, 32]
                .iter()
                .map(|&n| {
                    let v = unit_space(n, degree);
                    let f = Field::interpolate(&v, "", u);
                    (l2_error(&f, u), h1_error(&f, u, du))
                })
                .collect();
            for w in errs.windows(2) {
                let l2_rate = (w[0].0 / w[1].0).log2();
                let h1_rate = (w[0].1 / w[1].1).log2();
                assert!((l2_rate - (degree + 1) as f64).abs() < 0.15, "p={degree} l2 rate {l2_rate}");
                assert!((h1_rate - degree as f64).abs() < 0.15, "p={degree} h1 rate {h1_rate}");
            }
        }
    }

    #[test]
    fn integral_of_affine_field() {
        let v = unit_space(5, 2);
        let f = Field::interpolate(&v, "", |p| 1.0 + p[0] + 2.0 * p[1]);
        assert!((integral(&f) - 2.5).abs() < 1e-14);
    }
}
