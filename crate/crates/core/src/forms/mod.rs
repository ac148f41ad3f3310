//! Variational forms, their assembly and quantities of interest.

pub mod assembly;
pub mod kernels;
pub mod qoi;

use std::fmt;
use std::sync::Arc;

pub use assembly::{adjoint_matrix, jacobian, residual, LinearizationState, StateRef};
pub use kernels::{Coefficients, Term, TermMask, TestPairing};
pub use qoi::{QoiSpec, Region};

use crate::error::SpaceError;
use crate::fem::{Component, ConstraintKind, Degrees, FeFunction, Lift, ProductSpace};
use crate::mesh::Mesh;

pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Physical parameters and data of a stationary MHD problem.
#[derive(Clone)]
pub struct MhdConfig {
    pub re: f64,
    pub re_m: f64,
    pub kappa: f64,
    pub forcing: Option<VectorField>,
    /// Velocity on the boundary.
    pub velocity_bc: VectorField,
    /// Magnetic field whose tangential trace is imposed.
    pub magnetic_bc: VectorField,
    /// Pressure value at the pinned corner `(-1/2, -1/2)`.
    pub pressure_pin: f64,
}

impl MhdConfig {
    pub fn coefficients(&self) -> Coefficients {
        Coefficients { re: self.re, re_m: self.re_m, kappa: self.kappa }
    }

    pub fn forcing_at(&self, x: [f64; 2]) -> [f64; 2] {
        self.forcing.as_ref().map_or([0.0; 2], |f| f(x))
    }

    /// Values of every constrained dof.
    pub fn dirichlet_values(&self, space: &ProductSpace) -> Vec<(usize, f64)> {
        let coords = space.dof_coords();
        space
            .constraints()
            .into_iter()
            .map(|(d, kind)| {
                let x = coords[d];
                let v = match kind {
                    ConstraintKind::Velocity(c) => (self.velocity_bc)(x)[c.index()],
                    ConstraintKind::Magnetic(Component::Bx) => (self.magnetic_bc)(x)[0],
                    ConstraintKind::Magnetic(_) => (self.magnetic_bc)(x)[1],
                    ConstraintKind::PressurePin => self.pressure_pin,
                };
                (d, v)
            })
            .collect()
    }

    /// Lift of degree `k` carrying the boundary data of the listed `u` and
    /// `b` components: the data at boundary nodes, zero at interior nodes.
    pub fn boundary_lift(&self, mesh: Arc<Mesh>, k: usize, components: &[Component]) -> Result<Lift, SpaceError> {
        let space = Arc::new(ProductSpace::new(mesh, Degrees::new(k, k, 1))?);
        let mut f = FeFunction::zeros(space.clone());
        for (d, v) in self.dirichlet_values(&space) {
            if d != space.pressure_pin() && components.contains(&space.dof_component(d)) {
                f.coeffs_mut()[d] = v;
            }
        }
        Lift::new(f, components.to_vec())
    }

    /// Values the constrained dofs of `state` must take: zero for the
    /// components its lift carries, the boundary data otherwise.
    pub fn essential_values(&self, state: &FeFunction) -> Vec<(usize, f64)> {
        let space = state.space();
        let mut values = self.dirichlet_values(space);
        if let Some(lift) = state.lift() {
            for (d, v) in values.iter_mut() {
                if lift.carries(space.dof_component(*d)) {
                    *v = 0.0;
                }
            }
        }
        values
    }
}

impl fmt::Debug for MhdConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MhdConfig")
            .field("re", &self.re)
            .field("re_m", &self.re_m)
            .field("kappa", &self.kappa)
            .field("forcing", &self.forcing.is_some())
            .field("pressure_pin", &self.pressure_pin)
            .finish_non_exhaustive()
    }
}

/// Homogeneous version of the essential constraints.
pub fn homogeneous_constraints(space: &ProductSpace) -> Vec<(usize, f64)> {
    space.constraints().into_iter().map(|(d, _)| (d, 0.0)).collect()
}
