//! Sparse storage and direct solves.

pub mod multifrontal;
pub mod sparse;

use std::sync::Arc;

pub use multifrontal::{FactorStorage, Numeric, Symbolic};
pub use sparse::{norm2, relative_residual, SparseMatrix, SparsityPattern};

use crate::error::LinalgError;

/// Relative residual every successful solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-11;
const MAX_REFINEMENT_STEPS: usize = 8;
/// Factors larger than this many bytes go to a temporary file by default.
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// Pluggable linear solver interface.
pub trait LinearSolver {
    fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError>;
}

/// Multifrontal LU with iterative refinement. The symbolic analysis is cached
/// and reused while the matrix pattern stays the same.
#[derive(Debug)]
pub struct DirectSolver {
    coords: Option<Arc<Vec<[f64; 2]>>>,
    symbolic: Option<Symbolic>,
    memory_budget: usize,
    stats: SolveStats,
}

impl Default for DirectSolver {
    fn default() -> Self {
        Self { coords: None, symbolic: None, memory_budget: DEFAULT_MEMORY_BUDGET, stats: SolveStats::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub refinement_steps: usize,
    pub residual: f64,
    pub perturbed_pivots: usize,
    pub factor_entries: usize,
    pub storage: FactorStorage,
}

impl DirectSolver {
    /// Solver ordering unknowns by the given per-variable coordinates.
    pub fn with_coords(coords: Arc<Vec<[f64; 2]>>) -> Self {
        Self { coords: Some(coords), ..Self::default() }
    }

    /// Factors needing more than `bytes` are kept on disk.
    pub fn with_memory_budget(mut self, bytes: usize) -> Self {
        self.memory_budget = bytes;
        self
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    fn symbolic_for(&mut self, a: &SparseMatrix) -> &Symbolic {
        let reuse = self.symbolic.as_ref().is_some_and(|s| Arc::ptr_eq(s.pattern(), a.pattern()));
        if !reuse {
            let coords = self.coords.as_ref().filter(|c| c.len() == a.n()).map(|c| c.as_slice());
            self.symbolic = Some(Symbolic::analyze(a.pattern().clone(), coords));
        }
        self.symbolic.as_ref().expect("symbolic analysis present")
    }
}

impl LinearSolver for DirectSolver {
    fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = a.n();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { rows: n, cols: n, rhs: b.len() });
        }
        let budget = self.memory_budget;
        self.symbolic_for(a);
        let sym = self.symbolic.as_ref().expect("symbolic analysis present");
        let storage =
            if 8 * sym.factor_entries() > budget { FactorStorage::Disk } else { FactorStorage::Memory };
        let start = std::time::Instant::now();
        let io = |e: std::io::Error| LinalgError::Storage(e.to_string());
        let num = Numeric::factor_with(sym, a, storage).map_err(io)?;
        log::debug!(
            "factored n={n} nnz={} entries={} max front={} ({storage:?}) in {:.2}s",
            a.values().len(),
            sym.factor_entries(),
            sym.max_front(),
            start.elapsed().as_secs_f64()
        );
        let mut x = b.to_vec();
        num.solve_in_place(sym, &mut x).map_err(io)?;
        let bnorm = norm2(b).max(1.0);
        let mut r = vec![0.0; n];
        let mut residual = f64::INFINITY;
        let mut steps = 0;
        loop {
            a.matvec(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            let new = norm2(&r) / bnorm;
            if !new.is_finite() || (steps > 0 && new > 0.5 * residual && new > SOLVE_TOLERANCE) {
                residual = residual.min(new);
                break;
            }
            residual = new;
            if residual <= SOLVE_TOLERANCE || steps == MAX_REFINEMENT_STEPS {
                break;
            }
            num.solve_in_place(sym, &mut r).map_err(io)?;
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            steps += 1;
        }
        self.stats = SolveStats {
            refinement_steps: steps,
            residual,
            perturbed_pivots: num.perturbed_pivots().len(),
            factor_entries: sym.factor_entries(),
            storage,
        };
        if residual <= SOLVE_TOLERANCE {
            Ok(x)
        } else if let Some(&row) = num.perturbed_pivots().first() {
            Err(LinalgError::Singular { row })
        } else {
            Err(LinalgError::Inaccurate { residual, tolerance: SOLVE_TOLERANCE })
        }
    }
}

/// One-shot direct solve.
pub fn solve_direct(a: &SparseMatrix, b: &[f64], coords: Option<&[[f64; 2]]>) -> Result<Vec<f64>, LinalgError> {
    let mut solver = match coords {
        Some(c) => DirectSolver::with_coords(Arc::new(c.to_vec())),
        None => DirectSolver::default(),
    };
    solver.solve(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_system_names_the_row() {
        let a = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 2.0), (0, 1, 1.0), (2, 2, 0.0)]);
        match solve_direct(&a, &[1.0, 1.0, 1.0], None) {
            Err(LinalgError::Singular { row }) => assert_eq!(row, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_detected() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(solve_direct(&a, &[1.0], None), Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn small_system_solves_to_tolerance() {
        let a = SparseMatrix::from_triplets(
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, 5.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 0.0)],
        );
        let b = [1.0, 2.0, 3.0];
        let x = solve_direct(&a, &b, None).unwrap();
        assert!(relative_residual(&a, &x, &b).unwrap() < SOLVE_TOLERANCE);
    }

    #[test]
    fn disk_factors_give_the_same_solution() {
        let n = 400;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + (i % 7) as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.5));
            }
            if i + 20 < n {
                t.push((i, i + 20, 0.5));
                t.push((i + 20, i, -0.25));
            }
        }
        let a = SparseMatrix::from_triplets(n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut memory = DirectSolver::default();
        let mut disk = DirectSolver::default().with_memory_budget(0);
        let xm = memory.solve(&a, &b).unwrap();
        let xd = disk.solve(&a, &b).unwrap();
        assert_eq!(memory.stats().storage, FactorStorage::Memory);
        assert_eq!(disk.stats().storage, FactorStorage::Disk);
        assert_eq!(xm, xd);
    }
}
