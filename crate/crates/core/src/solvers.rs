//! Newton's method, Reynolds-number continuation and the adjoint solve.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{QoiError, SolverError};
use crate::fem::{FeFunction, ProductSpace};
use crate::forms::{self, homogeneous_constraints, LinearizationState, MhdConfig, QoiSpec, TermMask};
use crate::linalg::{norm2, DirectSolver, LinearSolver, DEFAULT_MEMORY_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Bytes of LU factor kept in memory before spilling to disk.
    pub memory_budget: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-12, max_iter: 25, memory_budget: DEFAULT_MEMORY_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    /// Reynolds number of the solve.
    pub re: f64,
    pub iterations: usize,
    /// Residual norm before each step and after the last one.
    pub residual_norms: Vec<f64>,
    pub seconds: f64,
}

/// Solves `N(U; V) = (f, v)` by Newton's method starting from `initial`,
/// whose constrained dofs are overwritten with the boundary data (or with
/// zero if `initial` carries a boundary lift).
pub fn newton_solve(
    initial: FeFunction,
    config: &MhdConfig,
    options: &NewtonOptions,
) -> Result<(FeFunction, NewtonReport), SolverError> {
    let start = Instant::now();
    let space = initial.space().clone();
    let mut state = initial;
    for (d, v) in config.essential_values(&state) {
        state.coeffs_mut()[d] = v;
    }
    let constraints = homogeneous_constraints(&space);
    let mut solver = DirectSolver::with_coords(Arc::new(space.dof_coords())).with_memory_budget(options.memory_budget);
    let mut norms = Vec::new();
    let linear_error = |source| SolverError::Linear { source, stage: None };
    loop {
        let mut r = forms::residual(&space, &state, config, TermMask::ALL);
        for &(d, _) in &constraints {
            r[d] = 0.0;
        }
        let norm = norm2(&r);
        norms.push(norm);
        let iterations = norms.len() - 1;
        log::debug!("Newton Re={} iteration {iterations}: |R| = {norm:.3e}", config.re);
        if norm <= options.abs_tol || norm <= options.rel_tol * norms[0] {
            let report = NewtonReport { re: config.re, iterations, residual_norms: norms, seconds: start.elapsed().as_secs_f64() };
            return Ok((state, report));
        }
        if iterations >= options.max_iter || !norm.is_finite() || norm > 1e12 * norms[0].max(1.0) {
            return Err(SolverError::NewtonDiverged { iterations, residual: norm, stage: None });
        }
        let mut j = forms::jacobian(&state, config, TermMask::ALL);
        for v in r.iter_mut() {
            *v = -*v;
        }
        j.apply_dirichlet(&mut r, &constraints);
        let delta = solver.solve(&j, &r).map_err(linear_error)?;
        for (u, d) in state.coeffs_mut().iter_mut().zip(&delta) {
            *u += d;
        }
    }
}

/// Continuation in the Reynolds number: each stage starts from the previous
/// stage's solution. The final stage uses the last schedule entry.
pub fn homotopy_solve(
    space: Arc<ProductSpace>,
    config: &MhdConfig,
    schedule: &[f64],
    options: &NewtonOptions,
) -> Result<(FeFunction, Vec<NewtonReport>), SolverError> {
    homotopy_from(FeFunction::zeros(space), config, schedule, options)
}

/// Continuation starting from a given initial guess.
pub fn homotopy_from(
    initial: FeFunction,
    config: &MhdConfig,
    schedule: &[f64],
    options: &NewtonOptions,
) -> Result<(FeFunction, Vec<NewtonReport>), SolverError> {
    let stages: Vec<f64> = if schedule.is_empty() { vec![config.re] } else { schedule.to_vec() };
    let mut state = initial;
    let mut reports = Vec::new();
    for re in stages {
        let mut cfg = config.clone();
        cfg.re = re;
        let (next, report) = newton_solve(state, &cfg, options).map_err(|e| match e {
            SolverError::NewtonDiverged { iterations, residual, .. } => {
                SolverError::NewtonDiverged { iterations, residual, stage: Some(re) }
            }
            SolverError::Linear { source, .. } => SolverError::Linear { source, stage: Some(re) },
        })?;
        state = next;
        reports.push(report);
    }
    Ok((state, reports))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointReport {
    pub seconds: f64,
    pub residual: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum AdjointError {
    #[error(transparent)]
    Qoi(#[from] QoiError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Solves the adjoint problem `N*(Phi; V) = J(V)` on `space` with
/// homogeneous essential conditions. Factors above `memory_budget` bytes
/// are kept on disk.
pub fn adjoint_solve(
    space: &Arc<ProductSpace>,
    lin: &LinearizationState<'_>,
    config: &MhdConfig,
    qoi: &QoiSpec,
    memory_budget: usize,
) -> Result<(FeFunction, AdjointReport), AdjointError> {
    let start = Instant::now();
    let mut a = forms::adjoint_matrix(space, lin, config, TermMask::ALL);
    let mut rhs = qoi.load_vector(space)?;
    a.apply_dirichlet(&mut rhs, &homogeneous_constraints(space));
    let mut solver = DirectSolver::with_coords(Arc::new(space.dof_coords())).with_memory_budget(memory_budget);
    let phi = solver.solve(&a, &rhs).map_err(|source| SolverError::Linear { source, stage: None })?;
    let report = AdjointReport { seconds: start.elapsed().as_secs_f64(), residual: solver.stats().residual };
    let phi = FeFunction::from_coeffs(space.clone(), phi).expect("solution length matches space");
    Ok((phi, report))
}
