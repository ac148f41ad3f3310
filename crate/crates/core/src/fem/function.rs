//! Finite element functions on a [`ProductSpace`] and pointwise field states.

use std::sync::Arc;

use super::element::BasisTable;
use super::quadrature::QuadratureRule;
use super::space::{CellGeometry, Component, ProductSpace};
use crate::error::SpaceError;

/// Values and gradients of `(u, b, p)` at one point. `du[i][j]` is `d u_i / d x_j`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StatePoint {
    pub u: [f64; 2],
    pub du: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub db: [[f64; 2]; 2],
    pub p: f64,
}

impl StatePoint {
    pub fn div_u(&self) -> f64 {
        self.du[0][0] + self.du[1][1]
    }

    pub fn div_b(&self) -> f64 {
        self.db[0][0] + self.db[1][1]
    }

    pub fn curl_b(&self) -> f64 {
        self.db[1][0] - self.db[0][1]
    }

    pub fn component(&self, c: Component) -> f64 {
        match c {
            Component::Ux => self.u[0],
            Component::Uy => self.u[1],
            Component::Bx => self.b[0],
            Component::By => self.b[1],
            Component::P => self.p,
        }
    }

    pub fn add(&self, o: &StatePoint) -> StatePoint {
        let add2 = |a: [f64; 2], b: [f64; 2]| [a[0] + b[0], a[1] + b[1]];
        StatePoint {
            u: add2(self.u, o.u),
            du: [add2(self.du[0], o.du[0]), add2(self.du[1], o.du[1])],
            b: add2(self.b, o.b),
            db: [add2(self.db[0], o.db[0]), add2(self.db[1], o.db[1])],
            p: self.p + o.p,
        }
    }
}

/// A closed-form state with gradients, such as an exact solution.
pub type AnalyticState = Arc<dyn Fn([f64; 2]) -> StatePoint + Send + Sync>;

/// Coefficient vector on a product space, optionally offset by a fixed lift
/// from another space on the same mesh. Evaluation returns the sum.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<ProductSpace>,
    coeffs: Vec<f64>,
    lift: Option<Arc<Lift>>,
}

/// A fixed function carrying the boundary data of some components. Those
/// components of the lifted function vanish on the boundary.
#[derive(Debug, Clone)]
pub struct Lift {
    function: FeFunction,
    components: Vec<Component>,
}

impl Lift {
    pub fn new(function: FeFunction, components: Vec<Component>) -> Result<Self, SpaceError> {
        if function.lift.is_some() || components.contains(&Component::P) {
            return Err(SpaceError::InvalidLift);
        }
        Ok(Self { function, components })
    }

    pub fn function(&self) -> &FeFunction {
        &self.function
    }

    pub fn carries(&self, c: Component) -> bool {
        self.components.contains(&c)
    }
}

impl FeFunction {
    pub fn zeros(space: Arc<ProductSpace>) -> Self {
        let n = space.num_dofs();
        Self { space, coeffs: vec![0.0; n], lift: None }
    }

    pub fn from_coeffs(space: Arc<ProductSpace>, coeffs: Vec<f64>) -> Result<Self, SpaceError> {
        if coeffs.len() != space.num_dofs() {
            return Err(SpaceError::CoefficientLength { expected: space.num_dofs(), got: coeffs.len() });
        }
        Ok(Self { space, coeffs, lift: None })
    }

    /// Nodal interpolant of a pointwise field.
    pub fn interpolate(space: Arc<ProductSpace>, f: impl Fn([f64; 2]) -> [f64; 5]) -> Self {
        let mut coeffs = vec![0.0; space.num_dofs()];
        for c in Component::ALL {
            let range = space.component_range(c);
            for (i, x) in space.component_space(c).coords().iter().enumerate() {
                coeffs[range.start + i] = f(*x)[c.index()];
            }
        }
        Self { space, coeffs, lift: None }
    }

    pub fn with_lift(mut self, lift: Arc<Lift>) -> Result<Self, SpaceError> {
        if !lift.function.space.same_mesh(&self.space) {
            return Err(SpaceError::MeshMismatch);
        }
        self.lift = Some(lift);
        Ok(self)
    }

    pub fn lift(&self) -> Option<&Arc<Lift>> {
        self.lift.as_ref()
    }

    /// The spaces contributing to evaluation, for choosing quadrature.
    pub fn spaces(&self) -> Vec<&ProductSpace> {
        let mut v = vec![self.space.as_ref()];
        v.extend(self.lift.iter().map(|l| l.function.space.as_ref()));
        v
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Evaluates the function at an arbitrary physical point.
    pub fn eval_point(&self, x: [f64; 2]) -> Option<StatePoint> {
        let mesh = self.space.mesh();
        let cell = mesh.locate(x)?;
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        let xi = geo.inverse_map(x);
        let tables: [BasisTable; 3] =
            std::array::from_fn(|f| BasisTable::new(self.space.field(f).element(), &[xi]));
        let mut out = [StatePoint::default()];
        eval_with_tables(&self.space, &self.coeffs, &tables, cell, &geo, &mut out, false);
        if let Some(l) = self.lift.as_ref().map(|l| &l.function) {
            let tables: [BasisTable; 3] = std::array::from_fn(|f| BasisTable::new(l.space.field(f).element(), &[xi]));
            eval_with_tables(&l.space, &l.coeffs, &tables, cell, &geo, &mut out, true);
        }
        Some(out[0])
    }

    /// Binds the function to a quadrature rule for repeated cell evaluation.
    pub fn bind(&self, rule: &QuadratureRule) -> BoundField<'_> {
        let tables = |s: &ProductSpace| -> [BasisTable; 3] {
            std::array::from_fn(|f| BasisTable::new(s.field(f).element(), rule.points()))
        };
        BoundField::Fe { f: self, tables: tables(&self.space), lift_tables: self.lift.as_ref().map(|l| tables(&l.function.space)) }
    }
}

fn eval_with_tables(
    space: &ProductSpace,
    coeffs: &[f64],
    tables: &[BasisTable; 3],
    cell: usize,
    geo: &CellGeometry,
    out: &mut [StatePoint],
    accumulate: bool,
) {
    if !accumulate {
        out.fill(StatePoint::default());
    }
    for c in Component::ALL {
        let range = space.component_range(c);
        let nodes = space.component_space(c).cell_nodes(cell);
        let table = &tables[c.field()];
        for (q, s) in out.iter_mut().enumerate() {
            let (vals, grads) = (table.values_at(q), table.grads_at(q));
            let mut v = 0.0;
            let mut g = [0.0; 2];
            for (i, &n) in nodes.iter().enumerate() {
                let a = coeffs[range.start + n];
                v += a * vals[i];
                g[0] += a * grads[i][0];
                g[1] += a * grads[i][1];
            }
            let g = geo.grad(g);
            let (val, grad) = match c {
                Component::Ux => (&mut s.u[0], Some(&mut s.du[0])),
                Component::Uy => (&mut s.u[1], Some(&mut s.du[1])),
                Component::Bx => (&mut s.b[0], Some(&mut s.db[0])),
                Component::By => (&mut s.b[1], Some(&mut s.db[1])),
                Component::P => (&mut s.p, None),
            };
            *val += v;
            if let Some(grad) = grad {
                grad[0] += g[0];
                grad[1] += g[1];
            }
        }
    }
}

/// A field state bound to a quadrature rule, evaluated cell by cell.
#[allow(clippy::large_enum_variant)]
pub enum BoundField<'a> {
    Fe { f: &'a FeFunction, tables: [BasisTable; 3], lift_tables: Option<[BasisTable; 3]> },
    Analytic { f: &'a AnalyticState, points: Vec<[f64; 2]> },
}

impl<'a> BoundField<'a> {
    pub fn analytic(f: &'a AnalyticState, rule: &QuadratureRule) -> Self {
        BoundField::Analytic { f, points: rule.points().to_vec() }
    }

    /// Fills `out[q]` with the state at quadrature point `q` of `cell`.
    pub fn eval_cell(&self, cell: usize, geo: &CellGeometry, out: &mut [StatePoint]) {
        match self {
            BoundField::Fe { f, tables, lift_tables } => {
                eval_with_tables(&f.space, &f.coeffs, tables, cell, geo, out, false);
                if let (Some(l), Some(t)) = (f.lift.as_ref().map(|l| &l.function), lift_tables) {
                    eval_with_tables(&l.space, &l.coeffs, t, cell, geo, out, true);
                }
            }
            BoundField::Analytic { f, points } => {
                for (s, xi) in out.iter_mut().zip(points) {
                    *s = f(geo.map(*xi));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::Degrees;
    use crate::mesh::Mesh;

    #[test]
    fn interpolant_of_quadratic_is_exact_with_gradients() {
        let mesh = Arc::new(Mesh::unit_square_crossed(3).unwrap());
        let space = Arc::new(ProductSpace::new(mesh, Degrees::new(2, 2, 1)).unwrap());
        let f = FeFunction::interpolate(space, |[x, y]| [x * y, x * x - y, 2.0 * y * y, x + 1.0, 3.0 * x - y]);
        let s = f.eval_point([0.13, -0.27]).unwrap();
        let (x, y) = (0.13, -0.27);
        assert!((s.u[0] - x * y).abs() < 1e-14);
        assert!((s.du[0][0] - y).abs() < 1e-13 && (s.du[0][1] - x).abs() < 1e-13);
        assert!((s.du[1][0] - 2.0 * x).abs() < 1e-13 && (s.du[1][1] + 1.0).abs() < 1e-13);
        assert!((s.db[0][1] - 4.0 * y).abs() < 1e-13);
        assert!((s.p - (3.0 * x - y)).abs() < 1e-14);
        assert!((s.curl_b() - (1.0 - 4.0 * y)).abs() < 1e-13);
    }

    #[test]
    fn bound_evaluation_matches_point_evaluation() {
        let mesh = Arc::new(Mesh::unit_square_crossed(2).unwrap());
        let space = Arc::new(ProductSpace::new(mesh.clone(), Degrees::new(3, 2, 2)).unwrap());
        let f = FeFunction::interpolate(space, |[x, y]| [x.sin(), y.cos(), x * y, x - y, x.exp()]);
        let rule = QuadratureRule::triangle(5);
        let bound = f.bind(&rule);
        let cell = 5;
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        let mut out = vec![StatePoint::default(); rule.len()];
        bound.eval_cell(cell, &geo, &mut out);
        for (q, xi) in rule.points().iter().enumerate() {
            let s = f.eval_point(geo.map(*xi)).unwrap();
            assert!((s.u[0] - out[q].u[0]).abs() < 1e-13);
            assert!((s.db[1][0] - out[q].db[1][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let mesh = Arc::new(Mesh::unit_square_crossed(2).unwrap());
        let space = Arc::new(ProductSpace::new(mesh, Degrees::new(2, 1, 1)).unwrap());
        assert!(FeFunction::from_coeffs(space, vec![0.0; 3]).is_err());
    }
}
