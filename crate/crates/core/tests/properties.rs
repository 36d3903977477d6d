use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;

use knpemi::fespace::{assemble_diffusion, assemble_mass, Coefficient, CooBlock, Field, FunctionSpace, Side};
use knpemi::geometry::{build_box_mesh, extract_interface, exterior_boundary, tag_subdomains, AxisBox};
use knpemi::knp::Discretization;
use knpemi::membrane::{
    bulk_conductivity, default_species, gating_step, nernst, ode_substeps, Gates, MembraneModel, PhysicalConstants,
    MS_PER_CM2,
};
use knpemi::verify::rate;

/// A grid-aligned box inside the unit square/cube at resolution `n`.
fn aligned_box(dim: usize, n: usize) -> impl Strategy<Value = AxisBox> {
    prop::collection::vec((1..n - 1, 1..n - 1), dim).prop_map(move |ends| {
        let lo: Vec<f64> = ends.iter().map(|&(a, b)| a.min(b) as f64 / n as f64).collect();
        let hi: Vec<f64> = ends.iter().map(|&(a, b)| (a.max(b) + 1).min(n - 1) as f64 / n as f64).collect();
        AxisBox::new(&lo, &hi)
    })
}

fn dense_symmetry_error(b: &CooBlock) -> f64 {
    let d = b.to_dense();
    let scale = d.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..d.len() {
        for j in 0..i {
            worst = worst.max((d[i][j] - d[j][i]).abs());
        }
    }
    worst / scale
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tagged_measure_matches_box(
        (dim, n, b) in (2usize..=3, prop::sample::select(vec![6usize, 8]))
            .prop_flat_map(|(dim, n)| (Just(dim), Just(n), aligned_box(dim, n)))
    ) {
        let mesh = build_box_mesh(&vec![0.0; dim], &vec![1.0; dim], &vec![n; dim]).unwrap();
        let tagged = tag_subdomains(&mesh, &[b.clone()]).unwrap();
        let intra: f64 = tagged.cells_with_tag(1).iter().map(|&c| tagged.cell_measure(c)).sum();
        let extra: f64 = tagged.cells_with_tag(0).iter().map(|&c| tagged.cell_measure(c)).sum();
        let expected = b.measure(dim);
        prop_assert!((intra - expected).abs() <= 1e-12 * expected);
        prop_assert!((extra - (1.0 - expected)).abs() <= 1e-12);

        let gamma = extract_interface(&tagged).unwrap();
        let boundary = exterior_boundary(&tagged);
        let key = |v: &[usize; 3]| v[..dim].to_vec();
        let g: HashSet<Vec<usize>> = gamma.facets.iter().map(|f| key(&f.vertices)).collect();
        let e: HashSet<Vec<usize>> = boundary.facets.iter().map(|f| key(&f.vertices)).collect();
        prop_assert_eq!(g.len(), gamma.facets.len());
        prop_assert!(g.is_disjoint(&e));
        prop_assert!(gamma.facets.iter().all(|f| f.label == 1));

        let again = extract_interface(&tagged).unwrap();
        prop_assert_eq!(&again.facets, &gamma.facets);
    }

    #[test]
    fn mass_and_stiffness_are_symmetric(dim in 2usize..=3, degree in 1usize..=2, d in 0.1f64..10.0) {
        let n = if dim == 2 { 6 } else { 3 };
        let mesh = build_box_mesh(&vec![0.0; dim], &vec![1.0; dim], &vec![n; dim]).unwrap();
        let cells: Vec<usize> = (0..mesh.num_cells()).collect();
        let space = Arc::new(FunctionSpace::on_cells(&mesh, &cells, degree).unwrap());
        let coef = Field::interpolate(&space, "", |x| 1.0 + x[0] * x[1]);
        let mass = assemble_mass(&space, Coefficient::Field(&coef)).unwrap();
        let stiff = assemble_diffusion(&space, d);
        prop_assert!(dense_symmetry_error(&mass) <= 1e-13);
        prop_assert!(dense_symmetry_error(&stiff) <= 1e-13);
    }

    #[test]
    fn affine_patch_test(dim in 2usize..=3, degree in 1usize..=2, a in prop::array::uniform4(-3.0f64..3.0)) {
        let n = if dim == 2 { 5 } else { 3 };
        let mesh = build_box_mesh(&vec![0.0; dim], &vec![1.0; dim], &vec![n; dim]).unwrap();
        let cells: Vec<usize> = (0..mesh.num_cells()).collect();
        let space = Arc::new(FunctionSpace::on_cells(&mesh, &cells, degree).unwrap());
        let u = Field::interpolate(&space, "", |x| a[0] + a[1] * x[0] + a[2] * x[1] + a[3] * x[2]);
        let r = assemble_diffusion(&space, 1.0).apply(&u.values);
        for (i, p) in space.dof_coords().iter().enumerate() {
            let interior = p[..dim].iter().all(|&c| c > 1e-9 && c < 1.0 - 1e-9);
            if interior {
                prop_assert!(r[i].abs() <= 1e-12, "row {} residual {}", i, r[i]);
            }
        }
    }

    #[test]
    fn trace_round_trip(degree in 1usize..=2, c in -5.0f64..5.0) {
        let mesh = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[8, 8]).unwrap();
        let mesh = tag_subdomains(&mesh, &[AxisBox::new(&[0.25, 0.25], &[0.75, 0.625])]).unwrap();
        let disc = Discretization::new(mesh, degree).unwrap();
        for side in [Side::Intra, Side::Extra] {
            let space = disc.space(side);
            let field = Field::interpolate(space, "", |x| c * x[0] - x[1] * x[1]);
            let on_gamma = disc.trace.restrict(&field.values, side);
            let mut bulk = vec![0.0; field.values.len()];
            disc.trace.inject(&on_gamma, &mut bulk, side);
            prop_assert_eq!(disc.trace.restrict(&bulk, side), on_gamma.clone());
            // shared Γ dofs agree between the two bulk spaces
            let coords = disc.membrane.dof_coords();
            for (q, &d) in disc.trace.map(side).iter().enumerate() {
                let p = space.dof_coords()[d];
                prop_assert!((0..2).all(|k| (p[k] - coords[q][k]).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn conductivity_is_linear_and_label_free(
        c in prop::collection::vec(0.0f64..200.0, 3),
        dc in prop::collection::vec(0.0f64..50.0, 3),
        s in 0.0f64..4.0,
        perm in Just(vec![2usize, 0, 1]),
    ) {
        let species = default_species();
        let k = PhysicalConstants::default();
        let sigma = |c: &[f64]| bulk_conductivity(&species, c, false, &k);
        let combined: Vec<f64> = c.iter().zip(&dc).map(|(a, b)| a + s * b).collect();
        let lhs = sigma(&combined);
        let rhs = sigma(&c) + s * sigma(&dc);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-12));
        let permuted: Vec<_> = perm.iter().map(|&i| species[i].clone()).collect();
        let pc: Vec<f64> = perm.iter().map(|&i| c[i]).collect();
        let ps = bulk_conductivity(&permuted, &pc, false, &k);
        prop_assert!((ps - sigma(&c)).abs() <= 1e-12 * ps.abs().max(1e-12));
    }

    #[test]
    fn nernst_antisymmetric(k in 0usize..3, a in 0.01f64..500.0, b in 0.01f64..500.0) {
        let s = &default_species()[k];
        let c = PhysicalConstants::default();
        let e = nernst(s, a, b, &c).unwrap() + nernst(s, b, a, &c).unwrap();
        prop_assert!(e.abs() <= 1e-15);
    }

    #[test]
    fn gates_stay_in_unit_interval(
        dt_ms in 0.001f64..=0.01,
        g_syn in 0.0f64..40.0,
        start in prop::array::uniform3(0.0f64..=1.0),
        v0 in -0.09f64..0.05,
    ) {
        let species = default_species();
        let c = PhysicalConstants::default();
        let model = MembraneModel::HodgkinHuxley { include_leak: true };
        let reversal: Vec<f64> = species.iter().map(|s| nernst(s, s.initial_intra, s.initial_extra, &c).unwrap()).collect();
        let mut phi = v0;
        let mut gates = Gates { m: start[0], h: start[1], n: start[2] };
        let dt = dt_ms * 1e-3;
        let steps = (0.1 / dt).round() as usize;
        for i in 0..steps {
            (phi, gates) = ode_substeps(&model, &species, &reversal, c.capacitance, phi, gates, i as f64 * dt, dt, 1, |t| {
                g_syn * MS_PER_CM2 * (-(t % 0.01) / 2e-3).exp()
            });
            prop_assert!([gates.m, gates.h, gates.n].iter().all(|g| (0.0..=1.0).contains(g)));
        }
        prop_assert!(phi.is_finite());
    }

    #[test]
    fn gate_steady_state_is_a_fixed_point(v in -0.1f64..0.06, dt in 1e-7f64..1e-4) {
        let g = Gates::steady_state(v);
        let next = gating_step(g, v, dt);
        prop_assert!((next.m - g.m).abs() <= 1e-12);
        prop_assert!((next.h - g.h).abs() <= 1e-12);
        prop_assert!((next.n - g.n).abs() <= 1e-12);
    }

    #[test]
    fn rates_ignore_uniform_scaling(a in 1e-8f64..1e2, b in 1e-8f64..1e2, s in 1e-6f64..1e6) {
        prop_assert!((rate(a, b) - rate(s * a, s * b)).abs() <= 1e-9);
    }
}

#[test]
fn resting_gate_values_are_steady_states() {
    let g = Gates::steady_state(-67.74e-3);
    for (value, expected) in [(g.m, 0.0379), (g.h, 0.688), (g.n, 0.276)] {
        assert!((value - expected).abs() <= 0.1 * expected, "{value} vs {expected}");
    }
}
