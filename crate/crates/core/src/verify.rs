//! Numerical property checks of the discretization: adjoint consistency,
//! Jacobian accuracy, Galerkin orthogonality and divergence cleaning.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Problem, RunConfig};
use crate::error::Error;
use crate::estimator::estimate;
use crate::fem::{CellGeometry, Component, Degrees, FeFunction, ProductSpace, StatePoint};
use crate::forms::assembly::rule_for;
use crate::forms::{self, adjoint_matrix, jacobian, LinearizationState, MhdConfig, QoiSpec, TermMask};
use crate::linalg::norm2;
use crate::mesh::Mesh;
use crate::runner::solve_primal;
use crate::solvers::{adjoint_solve, NewtonOptions};

/// One verified property.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, passed: value < limit }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.3e} (limit {:.1e})", self.name, self.value, self.limit)
    }
}

/// Constrained dofs of a space as a mask.
fn fixed_mask(space: &ProductSpace) -> Vec<bool> {
    let mut fixed = vec![false; space.num_dofs()];
    for (d, _) in space.constraints() {
        fixed[d] = true;
    }
    fixed
}

/// Largest entry of `A - J^T` on free rows and columns, relative to the
/// largest entry of `J`, for the adjoint operator linearized at `state`.
pub fn transpose_defect(state: &FeFunction, config: &MhdConfig) -> f64 {
    let space = state.space();
    let j = jacobian(state, config, TermMask::ALL);
    let a = adjoint_matrix(space, &LinearizationState::numerical(state), config, TermMask::ALL);
    let jt = j.transpose();
    let fixed = fixed_mask(space);
    let p = a.pattern();
    let mut worst: f64 = 0.0;
    for i in 0..space.num_dofs() {
        for e in p.row_ptr()[i]..p.row_ptr()[i + 1] {
            let k = p.col_idx()[e] as usize;
            if !fixed[i] && !fixed[k] {
                worst = worst.max((a.values()[e] - jt.values()[e]).abs());
            }
        }
    }
    worst / j.max_abs()
}

/// Worst relative difference between `J d` and the central difference
/// quotient of the residual over `directions` random free-dof directions.
pub fn jacobian_fd_defect(state: &FeFunction, config: &MhdConfig, directions: usize, rng: &mut impl Rng) -> f64 {
    let space = state.space().clone();
    let fixed = fixed_mask(&space);
    let j = jacobian(state, config, TermMask::ALL);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    let mut jd = vec![0.0; space.num_dofs()];
    for _ in 0..directions {
        let d: Vec<f64> = fixed.iter().map(|&f| if f { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        j.matvec(&d, &mut jd);
        let shifted = |s: f64| {
            let mut v = state.clone();
            for (c, di) in v.coeffs_mut().iter_mut().zip(&d) {
                *c += s * h * di;
            }
            forms::residual(&space, &v, config, TermMask::ALL)
        };
        let (plus, minus) = (shifted(1.0), shifted(-1.0));
        let diff: Vec<f64> =
            plus.iter().zip(&minus).zip(&jd).map(|((p, m), jdi)| (p - m) / (2.0 * h) - jdi).collect();
        worst = worst.max(norm2(&diff) / norm2(&jd));
    }
    worst
}

/// `|eta| / (1 + |J(U_h)|)` with the adjoint taken in the primal space.
pub fn galerkin_defect(u_h: &FeFunction, config: &MhdConfig, qoi: &QoiSpec) -> Result<f64, Error> {
    let lin = LinearizationState::numerical(u_h);
    let (phi, _) = adjoint_solve(u_h.space(), &lin, config, qoi, crate::linalg::DEFAULT_MEMORY_BUDGET)?;
    let eta = estimate(u_h, &phi, config).eta();
    Ok(eta.abs() / (1.0 + qoi.evaluate(u_h)?.abs()))
}

/// `||div b_h||` in `L^2`.
pub fn divergence_norm(f: &FeFunction) -> f64 {
    let mesh = f.space().mesh();
    let rule = rule_for(&f.spaces());
    let bound = f.bind(&rule);
    let mut values = vec![StatePoint::default(); rule.len()];
    let mut sum = 0.0;
    for cell in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        bound.eval_cell(cell, &geo, &mut values);
        for (v, w) in values.iter().zip(rule.weights()) {
            sum += w * geo.det * v.div_b().powi(2);
        }
    }
    sum.sqrt()
}

/// State with random free coefficients and the configured boundary data,
/// as a linearization point for the algebraic checks.
pub fn random_state(
    config: &MhdConfig,
    mesh: Arc<Mesh>,
    degrees: Degrees,
    lift_degree: usize,
    rng: &mut impl Rng,
) -> Result<FeFunction, Error> {
    let space = Arc::new(ProductSpace::new(mesh.clone(), degrees)?);
    let coeffs = (0..space.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut state = FeFunction::from_coeffs(space, coeffs)?;
    if lift_degree > 0 {
        let lift = config.boundary_lift(mesh, lift_degree, &[Component::Ux, Component::Uy])?;
        state = state.with_lift(Arc::new(lift))?;
    }
    for (d, v) in config.essential_values(&state) {
        state.coeffs_mut()[d] = v;
    }
    Ok(state)
}

/// Grid sizes and seed of a property run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Grid of the algebraic checks.
    pub n: usize,
    /// Grids of the divergence refinement study.
    pub refinement: Vec<usize>,
    pub seed: u64,
    pub directions: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n: 4, refinement: vec![4, 8, 16], seed: 0, directions: 10 }
    }
}

/// Runs the property suite for the physics, spaces and lift of `cfg`.
pub fn verify_case(cfg: &RunConfig, options: &VerifyOptions) -> Result<Vec<Check>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let config = cfg.mhd_config();
    let degrees = cfg.primal_degrees();
    let mesh = Arc::new(Mesh::unit_square(options.n, cfg.mesh.pattern)?);
    let tag = format!("{degrees} n={}", options.n);
    let mut checks = Vec::new();

    let state = random_state(&config, mesh.clone(), degrees, cfg.lift_degree(), &mut rng)?;
    checks.push(Check::below(format!("adjoint = Jacobian transpose ({tag})"), transpose_defect(&state, &config), 1e-10));
    let fd = jacobian_fd_defect(&state, &config, options.directions, &mut rng);
    checks.push(Check::below(format!("Jacobian vs central differences ({tag})"), fd, 1e-6));

    // Orthogonality needs a converged solution; the cavity is solved at a
    // Reynolds number the coarse grid resolves.
    let mut solve_config = config.clone();
    if cfg.case.problem == Problem::Lid {
        solve_config.re = solve_config.re.min(100.0);
    }
    let newton = NewtonOptions::default();
    let schedule = [solve_config.re];
    let qoi = cfg.qoi();
    let grid = qoi_grid(&qoi, options.n);
    let u_h = solve_primal(
        &solve_config,
        Arc::new(Mesh::unit_square(grid, cfg.mesh.pattern)?),
        degrees,
        cfg.lift_degree(),
        &schedule,
        &newton,
    )?
    .state;
    let g = galerkin_defect(&u_h, &solve_config, &qoi)?;
    checks.push(Check::below(format!("Galerkin orthogonality, Re={} ({degrees} n={grid})", solve_config.re), g, 1e-9));

    if cfg.case.problem == Problem::Hartmann {
        let mut norms = Vec::new();
        for &n in &options.refinement {
            let mesh = Arc::new(Mesh::unit_square(n, cfg.mesh.pattern)?);
            let u = solve_primal(&config, mesh, degrees, cfg.lift_degree(), &schedule, &newton)?.state;
            norms.push(divergence_norm(&u));
        }
        let worst_ratio = norms.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        checks.push(Check::below(
            format!("||div b_h|| decreases over n={:?} (largest ratio)", options.refinement),
            worst_ratio,
            1.0,
        ));
    }
    Ok(checks)
}

/// Smallest multiple of 4 not below `n`, so the quantity of interest regions
/// follow grid lines.
fn qoi_grid(qoi: &QoiSpec, n: usize) -> usize {
    (n..).find(|&m| qoi.cells(&Mesh::unit_square_crossed(m).expect("positive size")).is_ok()).expect("aligned grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::HartmannParams;
    use crate::mesh::MeshPattern;

    #[test]
    fn algebraic_checks_on_hartmann_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = HartmannParams::default().config();
        let mesh = Arc::new(Mesh::unit_square(3, MeshPattern::Right).unwrap());
        let state = random_state(&cfg, mesh, Degrees::new(2, 1, 1), 4, &mut rng).unwrap();
        assert!(transpose_defect(&state, &cfg) < 1e-12);
        assert!(jacobian_fd_defect(&state, &cfg, 3, &mut rng) < 1e-8);
    }

    #[test]
    fn divergence_of_a_solenoidal_field_vanishes() {
        let mesh = Arc::new(Mesh::unit_square(3, MeshPattern::Right).unwrap());
        let space = Arc::new(ProductSpace::new(mesh, Degrees::new(2, 2, 1)).unwrap());
        let f = FeFunction::interpolate(space.clone(), |[x, y]| [0.0, 0.0, x * y, -0.5 * y * y, 0.0]);
        assert!(divergence_norm(&f) < 1e-13);
        let g = FeFunction::interpolate(space, |[x, _]| [0.0, 0.0, x, 0.0, 0.0]);
        assert!((divergence_norm(&g) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn qoi_grids_follow_the_region() {
        assert_eq!(qoi_grid(&HartmannParams::default_qoi(), 4), 4);
        assert_eq!(qoi_grid(&HartmannParams::default_qoi(), 5), 8);
    }
}
