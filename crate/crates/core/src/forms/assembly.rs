//! Cell-by-cell assembly of the residual, Jacobian and adjoint operators.

use super::kernels::{self, Coefficients, TermMask, TestPairing};
use super::MhdConfig;
use crate::fem::quadrature::default_degree;
use crate::fem::{AnalyticState, BasisTable, BoundField, CellGeometry, FeFunction, ProductSpace, QuadratureRule, StatePoint};
use crate::linalg::SparseMatrix;

/// A state entering the adjoint linearization.
#[derive(Clone, Copy)]
pub enum StateRef<'a> {
    Fe(&'a FeFunction),
    Analytic(&'a AnalyticState),
}

impl<'a> StateRef<'a> {
    fn bind(self, rule: &QuadratureRule) -> BoundField<'a> {
        match self {
            StateRef::Fe(f) => f.bind(rule),
            StateRef::Analytic(f) => BoundField::analytic(f, rule),
        }
    }
}

/// States the adjoint operator is linearized about. Without a second state
/// the linearization uses `(U_h, U_h)`, which gives the exact transpose of
/// the Jacobian.
#[derive(Clone, Copy)]
pub struct LinearizationState<'a> {
    pub first: &'a FeFunction,
    pub second: Option<StateRef<'a>>,
}

impl<'a> LinearizationState<'a> {
    pub fn numerical(first: &'a FeFunction) -> Self {
        Self { first, second: None }
    }
}

/// Default rule for forms combining functions from several spaces.
pub fn rule_for(spaces: &[&ProductSpace]) -> QuadratureRule {
    let degrees: Vec<usize> = spaces.iter().flat_map(|s| s.degrees().as_array()).collect();
    QuadratureRule::triangle(default_degree(&degrees))
}

/// Basis tables of the three scalar fields with per-cell physical gradients.
pub(crate) struct CellBasis {
    tables: [BasisTable; 3],
    grads: [Vec<[f64; 2]>; 3],
}

impl CellBasis {
    pub(crate) fn new(space: &ProductSpace, rule: &QuadratureRule) -> Self {
        let tables: [BasisTable; 3] = std::array::from_fn(|f| BasisTable::new(space.field(f).element(), rule.points()));
        let grads = std::array::from_fn(|f| vec![[0.0; 2]; tables[f].grads.len()]);
        Self { tables, grads }
    }

    pub(crate) fn update(&mut self, geo: &CellGeometry) {
        for f in 0..3 {
            for (g, r) in self.grads[f].iter_mut().zip(&self.tables[f].grads) {
                *g = geo.grad(*r);
            }
        }
    }

    #[inline]
    pub(crate) fn values(&self, field: usize, q: usize) -> &[f64] {
        self.tables[field].values_at(q)
    }

    #[inline]
    pub(crate) fn grads(&self, field: usize, q: usize) -> &[[f64; 2]] {
        let n = self.tables[field].num_nodes();
        &self.grads[field][q * n..(q + 1) * n]
    }

    pub(crate) fn num_nodes(&self, field: usize) -> usize {
        self.tables[field].num_nodes()
    }
}

const FIELD: [usize; 5] = [0, 0, 1, 1, 2];

/// Residual vector `R_i = N(U; V_i) - (f, v_i)` for all basis functions of
/// `test_space`. The state may live on a different space over the same mesh.
pub fn residual(test_space: &ProductSpace, state: &FeFunction, config: &MhdConfig, mask: TermMask) -> Vec<f64> {
    assert_eq!(test_space.mesh().num_cells(), state.space().mesh().num_cells(), "spaces on different meshes");
    let mut spaces = state.spaces();
    spaces.push(test_space);
    let rule = rule_for(&spaces);
    let bound = state.bind(&rule);
    let mesh = test_space.mesh();
    let coeffs = config.coefficients();
    let mut basis = CellBasis::new(test_space, &rule);
    let mut states = vec![StatePoint::default(); rule.len()];
    let mut out = vec![0.0; test_space.num_dofs()];
    let mut dofs = Vec::new();
    let local_offsets = local_offsets(&basis);
    for cell in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        basis.update(&geo);
        bound.eval_cell(cell, &geo, &mut states);
        test_space.cell_dofs(cell, &mut dofs);
        for (q, (xi, w)) in rule.points().iter().zip(rule.weights()).enumerate() {
            let w = w * geo.det;
            let pair = kernels::residual(&states[q], config.forcing_at(geo.map(*xi)), &coeffs, mask);
            for c in 0..5 {
                let (vals, grads) = (basis.values(FIELD[c], q), basis.grads(FIELD[c], q));
                let (fc, gc) = (w * pair.f[c], [w * pair.g[c][0], w * pair.g[c][1]]);
                for i in 0..vals.len() {
                    out[dofs[local_offsets[c] + i]] += fc * vals[i] + gc[0] * grads[i][0] + gc[1] * grads[i][1];
                }
            }
        }
    }
    out
}

fn local_offsets(basis: &CellBasis) -> [usize; 6] {
    let mut off = [0; 6];
    for c in 0..5 {
        off[c + 1] = off[c] + basis.num_nodes(FIELD[c]);
    }
    off
}

/// A pointwise operator, linear in its perturbation argument.
trait LinearKernel {
    fn prepare(&mut self, cell: usize, geo: &CellGeometry);
    fn apply(&self, q: usize, pert: &StatePoint) -> TestPairing;
}

struct JacobianKernel<'a> {
    state: BoundField<'a>,
    values: Vec<StatePoint>,
    coeffs: Coefficients,
    mask: TermMask,
}

impl LinearKernel for JacobianKernel<'_> {
    fn prepare(&mut self, cell: usize, geo: &CellGeometry) {
        self.state.eval_cell(cell, geo, &mut self.values);
    }

    fn apply(&self, q: usize, pert: &StatePoint) -> TestPairing {
        kernels::jacobian(&self.values[q], pert, &self.coeffs, self.mask)
    }
}

struct AdjointKernel<'a> {
    first: BoundField<'a>,
    second: Option<BoundField<'a>>,
    sum: Vec<StatePoint>,
    scratch: Vec<StatePoint>,
    coeffs: Coefficients,
    mask: TermMask,
}

impl LinearKernel for AdjointKernel<'_> {
    fn prepare(&mut self, cell: usize, geo: &CellGeometry) {
        self.first.eval_cell(cell, geo, &mut self.sum);
        match &self.second {
            Some(second) => second.eval_cell(cell, geo, &mut self.scratch),
            None => self.scratch.copy_from_slice(&self.sum),
        }
        for (s, t) in self.sum.iter_mut().zip(&self.scratch) {
            *s = s.add(t);
        }
    }

    fn apply(&self, q: usize, pert: &StatePoint) -> TestPairing {
        kernels::adjoint(&self.sum[q], pert, &self.coeffs, self.mask)
    }
}

/// Unit perturbations: for each component, its value and two derivatives.
fn unit(c: usize, s: usize) -> StatePoint {
    let mut p = StatePoint::default();
    match (c, s) {
        (0 | 1, 0) => p.u[c] = 1.0,
        (0 | 1, _) => p.du[c][s - 1] = 1.0,
        (2 | 3, 0) => p.b[c - 2] = 1.0,
        (2 | 3, _) => p.db[c - 2][s - 1] = 1.0,
        _ => p.p = 1.0,
    }
    p
}

fn assemble_matrix(space: &ProductSpace, rule: &QuadratureRule, kernel: &mut impl LinearKernel) -> SparseMatrix {
    let mesh = space.mesh();
    let mut matrix = SparseMatrix::zeros(space.sparsity());
    let mut basis = CellBasis::new(space, rule);
    let off = local_offsets(&basis);
    let nl = off[5];
    let mut local = vec![0.0; nl * nl];
    let mut dofs = Vec::new();
    let units: Vec<Vec<StatePoint>> =
        (0..5).map(|c| (0..if c == 4 { 1 } else { 3 }).map(|s| unit(c, s)).collect()).collect();
    let mut resp = [[TestPairing::default(); 3]; 5];
    for cell in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        basis.update(&geo);
        kernel.prepare(cell, &geo);
        local.fill(0.0);
        for (q, w) in rule.weights().iter().enumerate() {
            let w = w * geo.det;
            for (c, us) in units.iter().enumerate() {
                for (s, u) in us.iter().enumerate() {
                    resp[c][s] = kernel.apply(q, u);
                }
            }
            for c in 0..5 {
                let (tv, tg) = (basis.values(FIELD[c], q), basis.grads(FIELD[c], q));
                for ct in 0..5 {
                    let ns = units[ct].len();
                    // d[t][s]: coefficient of (test value/dx/dy) x (trial value/dx/dy)
                    let mut d = [[0.0; 3]; 3];
                    let mut any = false;
                    for s in 0..ns {
                        let r = &resp[ct][s];
                        d[0][s] = w * r.f[c];
                        d[1][s] = w * r.g[c][0];
                        d[2][s] = w * r.g[c][1];
                        any |= d[0][s] != 0.0 || d[1][s] != 0.0 || d[2][s] != 0.0;
                    }
                    if !any {
                        continue;
                    }
                    let (sv, sg) = (basis.values(FIELD[ct], q), basis.grads(FIELD[ct], q));
                    for j in 0..sv.len() {
                        let psi = [sv[j], sg[j][0], sg[j][1]];
                        let mut t = [0.0; 3];
                        for (tt, row) in t.iter_mut().zip(&d) {
                            *tt = row[0] * psi[0] + row[1] * psi[1] + row[2] * psi[2];
                        }
                        let col = off[ct] + j;
                        for i in 0..tv.len() {
                            local[(off[c] + i) * nl + col] += t[0] * tv[i] + t[1] * tg[i][0] + t[2] * tg[i][1];
                        }
                    }
                }
            }
        }
        space.cell_dofs(cell, &mut dofs);
        matrix.add_local(&dofs, &local);
    }
    matrix
}

/// Jacobian `J_ij = N'(U)[V_j](V_i)` on the state's own space.
pub fn jacobian(state: &FeFunction, config: &MhdConfig, mask: TermMask) -> SparseMatrix {
    let space = state.space();
    let rule = rule_for(&state.spaces());
    let mut kernel = JacobianKernel {
        state: state.bind(&rule),
        values: vec![StatePoint::default(); rule.len()],
        coeffs: config.coefficients(),
        mask,
    };
    assemble_matrix(space, &rule, &mut kernel)
}

/// Adjoint operator `A_ij = N*(Phi_j; V_i)` on `space`, linearized about `lin`.
pub fn adjoint_matrix(space: &ProductSpace, lin: &LinearizationState<'_>, config: &MhdConfig, mask: TermMask) -> SparseMatrix {
    assert_eq!(space.mesh().num_cells(), lin.first.space().mesh().num_cells(), "spaces on different meshes");
    let mut spaces = lin.first.spaces();
    spaces.push(space);
    if let Some(StateRef::Fe(f)) = lin.second {
        spaces.push(f.space());
    }
    let rule = rule_for(&spaces);
    let mut kernel = AdjointKernel {
        first: lin.first.bind(&rule),
        second: lin.second.map(|s| s.bind(&rule)),
        sum: vec![StatePoint::default(); rule.len()],
        scratch: vec![StatePoint::default(); rule.len()],
        coeffs: config.coefficients(),
        mask,
    };
    assemble_matrix(space, &rule, &mut kernel)
}
