//! Cross-module invariants of the discretization.

use std::sync::Arc;

use mhd::cases::{HartmannParams, LidParams};
use mhd::estimator::{estimate, estimate_algebraic};
use mhd::fem::{CellGeometry, Component, Degrees, FeFunction, ProductSpace, QuadratureRule, StatePoint};
use mhd::forms::assembly::rule_for;
use mhd::forms::{
    adjoint_matrix, homogeneous_constraints, jacobian, residual, LinearizationState, MhdConfig, QoiSpec, Region,
    StateRef, Term, TermMask,
};
use mhd::linalg::solve_direct;
use mhd::mesh::{Mesh, MeshPattern, LOCAL_EDGES};
use mhd::solvers::{adjoint_solve, homotopy_solve, newton_solve, NewtonOptions};
use mhd::verify::divergence_norm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: usize = mhd::linalg::DEFAULT_MEMORY_BUDGET;

fn space(n: usize, degrees: Degrees) -> Arc<ProductSpace> {
    let mesh = Arc::new(Mesh::unit_square(n, MeshPattern::Right).unwrap());
    Arc::new(ProductSpace::new(mesh, degrees).unwrap())
}

fn random_function(space: Arc<ProductSpace>, rng: &mut impl Rng) -> FeFunction {
    let coeffs = (0..space.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeFunction::from_coeffs(space, coeffs).unwrap()
}

/// Sum over cells and quadrature points of `w |K| g(x, state)`.
fn integrate(f: &FeFunction, rule: &QuadratureRule, g: impl Fn([f64; 2], &StatePoint) -> f64) -> f64 {
    let mesh = f.space().mesh();
    let bound = f.bind(rule);
    let mut values = vec![StatePoint::default(); rule.len()];
    let mut sum = 0.0;
    for cell in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        bound.eval_cell(cell, &geo, &mut values);
        for ((xi, w), v) in rule.points().iter().zip(rule.weights()).zip(&values) {
            sum += w * geo.det * g(geo.map(*xi), v);
        }
    }
    sum
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn solve(space: Arc<ProductSpace>, config: &MhdConfig) -> FeFunction {
    newton_solve(FeFunction::zeros(space), config, &NewtonOptions::default()).unwrap().0
}

#[test]
fn scalar_triple_product_is_cyclic_for_embedded_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_function(space(3, Degrees::new(2, 2, 1)), &mut rng);
    let g = random_function(f.space().clone(), &mut rng);
    let rule = rule_for(&[f.space()]);
    let (bf, bg) = (f.bind(&rule), g.bind(&rule));
    let mut fv = vec![StatePoint::default(); rule.len()];
    let mut gv = fv.clone();
    let mesh = f.space().mesh();
    for cell in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        bf.eval_cell(cell, &geo, &mut fv);
        bg.eval_cell(cell, &geo, &mut gv);
        for (s, t) in fv.iter().zip(&gv) {
            // In-plane fields and the out-of-plane curl of a magnetic field.
            let triples = [
                ([s.u[0], s.u[1], 0.0], [s.b[0], s.b[1], 0.0], [0.0, 0.0, t.curl_b()]),
                ([s.u[0], s.u[1], 0.0], [0.0, 0.0, s.curl_b()], [t.b[0], t.b[1], 0.0]),
                ([t.u[0], t.u[1], 0.0], [s.b[0], s.b[1], 0.0], [t.b[0], t.b[1], t.p]),
            ];
            for (a, b, c) in triples {
                let abc = dot(a, cross(b, c));
                let scale = 1.0 + abc.abs();
                assert!((abc - dot(b, cross(c, a))).abs() < 1e-12 * scale);
                assert!((abc - dot(c, cross(a, b))).abs() < 1e-12 * scale);
            }
        }
    }
}

#[test]
fn curl_integrates_by_parts_against_fields_vanishing_on_the_boundary() {
    // a = (0, 0, a_z) with a_z = 0 on the boundary, so a x n = 0 there and
    // int a . curl B = int B . curl a.
    let a_z = |[x, y]: [f64; 2]| (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos();
    let field = |[x, y]: [f64; 2]| [a_z([x, y]), 0.0, (2.0 * x + y).sin(), x * x * y.exp(), 0.0];
    let defect = |n: usize, degree: usize| {
        let f = FeFunction::interpolate(space(n, Degrees::new(2, 2, 1)), field);
        // u_x carries a_z, b carries B.
        integrate(&f, &QuadratureRule::triangle(degree), |_, s| {
            let curl_a = [s.du[0][1], -s.du[0][0]];
            s.u[0] * s.curl_b() - (s.b[0] * curl_a[0] + s.b[1] * curl_a[1])
        })
    };
    // Exact for discrete fields once the rule integrates the products exactly.
    for n in [2, 4, 8] {
        assert!(defect(n, 4).abs() < 1e-13, "n={n}: {:e}", defect(n, 4));
    }
    // With an under-integrating rule the defect is a quadrature error and
    // falls under refinement.
    let coarse: Vec<f64> = [2, 4, 8, 16].iter().map(|&n| defect(n, 1).abs()).collect();
    assert!(coarse.windows(2).all(|w| w[1] < w[0]), "{coarse:?}");
    assert!(coarse[3] < 0.1 * coarse[0], "{coarse:?}");
}

#[test]
fn curl_and_divergence_of_interpolated_fields() {
    let s = space(4, Degrees::new(2, 2, 1));
    let rotation = FeFunction::interpolate(s.clone(), |[x, y]| [x, y, -y, x, 0.0]);
    let r = rotation.eval_point([0.1, -0.2]).unwrap();
    assert!((r.curl_b() - 2.0).abs() < 1e-12);
    assert!(r.div_b().abs() < 1e-12);
    assert!((r.div_u() - 2.0).abs() < 1e-12);
    let parabola = FeFunction::interpolate(s, |[_, y]| [0.0, 0.0, y * y, 0.0, 0.0]);
    let rule = QuadratureRule::triangle(6);
    let worst = integrate(&parabola, &rule, |[_, y], v| (v.curl_b() + 2.0 * y).powi(2));
    assert!(worst < 1e-24);
}

#[test]
fn mesh_refinement_and_boundary_closure() {
    for pattern in [MeshPattern::Right, MeshPattern::Crossed] {
        for n in [1, 3, 10] {
            let coarse = Mesh::unit_square(n, pattern).unwrap();
            let fine = Mesh::unit_square(2 * n, pattern).unwrap();
            assert_eq!(fine.num_cells(), 4 * coarse.num_cells());
            let perimeter: f64 = fine
                .boundary_facets()
                .iter()
                .map(|f| {
                    let v = fine.cell_vertices(f.cell);
                    let [a, b] = LOCAL_EDGES[f.local_edge].map(|k| v[k]);
                    (a[0] - b[0]).hypot(a[1] - b[1])
                })
                .sum();
            assert!((perimeter - 4.0).abs() < 1e-12);
            assert!((0..fine.num_cells()).all(|c| fine.cell_area(c) > 0.0));
        }
    }
}

#[test]
fn hartmann_number_and_pressure_gradient() {
    let p = HartmannParams::default();
    assert!((p.ha().powi(2) - p.kappa * p.re * p.re_m).abs() < 1e-12);
    assert!((p.velocity(0.0) - 1.0).abs() < 1e-14);
    assert!((p.pressure_gradient() - 2.001342300803365).abs() < 1e-12);
}

#[test]
fn quantities_of_interest_are_linear_and_exact_on_grid_aligned_regions() {
    let s = space(8, Degrees::new(2, 1, 1));
    let ones = FeFunction::interpolate(s.clone(), |_| [1.0; 5]);
    let region = QoiSpec { component: Component::P, region: Region::new(-0.25, 0.5, -0.25, 0.25), normalize: false };
    assert!((region.evaluate(&ones).unwrap() - 0.375).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (a, b) = (random_function(s.clone(), &mut rng), random_function(s.clone(), &mut rng));
    let (alpha, beta) = (1.7, -0.3);
    let combo: Vec<f64> = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| alpha * x + beta * y).collect();
    let combo = FeFunction::from_coeffs(s.clone(), combo).unwrap();
    for c in Component::ALL {
        let q = QoiSpec { component: c, ..region };
        let lhs = q.evaluate(&combo).unwrap();
        let rhs = alpha * q.evaluate(&a).unwrap() + beta * q.evaluate(&b).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-3));
    }

    let params = HartmannParams::default();
    let exact = FeFunction::interpolate(s, |x| params.exact_values(x));
    let q_uy = QoiSpec { component: Component::Uy, ..HartmannParams::default_qoi() };
    assert_eq!(q_uy.evaluate(&exact).unwrap(), 0.0);
    assert!((params.exact_qoi(&HartmannParams::default_qoi()) - 0.3735340984996425).abs() < 1e-13);
}

#[test]
fn dropping_the_penalty_term_spoils_the_divergence() {
    let params = HartmannParams::default();
    let config = params.config();
    let s = space(8, Degrees::new(2, 2, 1));
    let with = solve(s.clone(), &config);

    // Same Newton iteration with the exact-penalty term removed.
    let mask = TermMask::ALL.without(Term::MagneticDiv);
    let mut state = FeFunction::zeros(s.clone());
    for (d, v) in config.essential_values(&state) {
        state.coeffs_mut()[d] = v;
    }
    let constraints = homogeneous_constraints(&s);
    for _ in 0..8 {
        let mut r = residual(&s, &state, &config, mask);
        for &(d, _) in &constraints {
            r[d] = 0.0;
        }
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut j = jacobian(&state, &config, mask);
        j.apply_dirichlet(&mut rhs, &constraints);
        let Ok(delta) = solve_direct(&j, &rhs, None) else { break };
        for (u, d) in state.coeffs_mut().iter_mut().zip(&delta) {
            *u += d;
        }
    }
    let (d_with, d_without) = (divergence_norm(&with), divergence_norm(&state));
    assert!(d_without > 10.0 * d_with, "with {d_with:e}, without {d_without:e}");
}

#[test]
fn zero_functional_gives_zero_adjoint() {
    let config = HartmannParams::default().config();
    let u_h = solve(space(4, Degrees::new(2, 1, 1)), &config);
    let enriched = space(4, Degrees::new(3, 2, 2));
    let mut a = adjoint_matrix(&enriched, &LinearizationState::numerical(&u_h), &config, TermMask::ALL);
    let mut rhs = vec![0.0; enriched.num_dofs()];
    a.apply_dirichlet(&mut rhs, &homogeneous_constraints(&enriched));
    let phi = solve_direct(&a, &rhs, Some(&enriched.dof_coords())).unwrap();
    assert!(phi.iter().all(|&v| v == 0.0));
}

#[test]
fn estimate_decomposition_and_enrichment() {
    let params = HartmannParams::default();
    let config = params.config();
    let qoi = HartmannParams::default_qoi();
    let exact = params.exact_qoi(&qoi);
    let u_h = solve(space(40, Degrees::new(2, 1, 1)), &config);
    let err = exact - qoi.evaluate(&u_h).unwrap();
    let lin = LinearizationState::numerical(&u_h);

    let (same, _) = adjoint_solve(u_h.space(), &lin, &config, &qoi, BUDGET).unwrap();
    let e_same = estimate(&u_h, &same, &config);
    assert!((e_same.eta() / err).abs() < 1e-6, "same-space effectivity {}", e_same.eta() / err);

    let (phi, _) = adjoint_solve(&space(40, Degrees::new(3, 2, 2)), &lin, &config, &qoi, BUDGET).unwrap();
    let e = estimate(&u_h, &phi, &config);
    let sum = e.e_mom + e.e_con + e.e_m;
    assert!((e.eta() - sum).abs() <= 1e-14 * e.eta().abs());
    assert!((estimate_algebraic(&u_h, &phi, &config) - e.eta()).abs() < 1e-12 * e.eta().abs().max(1e-10));
    let eff = e.eta() / err;
    assert!((0.95..1.05).contains(&eff), "enriched effectivity {eff}");
}

#[test]
fn second_linearization_state_equal_to_the_first_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let config = HartmannParams::default().config();
    let u = random_function(space(3, Degrees::new(2, 1, 1)), &mut rng);
    let adj = space(3, Degrees::new(3, 2, 2));
    let single = adjoint_matrix(&adj, &LinearizationState::numerical(&u), &config, TermMask::ALL);
    let pair = LinearizationState { first: &u, second: Some(StateRef::Fe(&u)) };
    let double = adjoint_matrix(&adj, &pair, &config, TermMask::ALL);
    let worst = single.values().iter().zip(double.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-12 * single.max_abs());
}

#[test]
fn solves_are_bit_reproducible() {
    let config = HartmannParams::default().config();
    let a = solve(space(6, Degrees::new(2, 1, 1)), &config);
    let b = solve(space(6, Degrees::new(2, 1, 1)), &config);
    assert_eq!(a.coeffs(), b.coeffs());
}

#[test]
fn newton_converges_quadratically_on_the_channel() {
    let config = HartmannParams::default().config();
    let (_, report) =
        newton_solve(FeFunction::zeros(space(8, Degrees::new(2, 1, 1))), &config, &NewtonOptions::default()).unwrap();
    let r = &report.residual_norms;
    assert!(r.windows(2).skip(1).all(|w| w[1] < w[0]), "{r:?}");
    // Last step: r_{k+1} <= C r_k^2 with C = 10, unless already at round-off.
    let (prev, last) = (r[r.len() - 2], r[r.len() - 1]);
    assert!(last <= 10.0 * prev * prev || last < 1e-12, "{r:?}");
}

#[test]
fn continuation_needs_no_more_iterations_than_a_cold_start() {
    let lid = LidParams::new(400.0, 0.4, 1.0);
    let config = lid.config();
    let s = space(8, Degrees::new(2, 1, 1));
    let options = NewtonOptions::default();
    let (_, stages) = homotopy_solve(s.clone(), &config, &[100.0, 200.0, 400.0], &options).unwrap();
    for stage in &stages {
        let mut cfg = config.clone();
        cfg.re = stage.re;
        if let Ok((_, cold)) = newton_solve(FeFunction::zeros(s.clone()), &cfg, &options) {
            assert!(stage.iterations <= cold.iterations, "Re={}: {} vs {}", stage.re, stage.iterations, cold.iterations);
        }
    }
}
