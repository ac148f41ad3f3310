//! One row of the Hartmann channel study through the library API.
//!
//! `cargo run --release -p mhd-core --example hartmann -- 40`

use std::sync::Arc;

use mhd::cases::HartmannParams;
use mhd::estimator::estimate;
use mhd::fem::{Component, Degrees, FeFunction, ProductSpace};
use mhd::forms::LinearizationState;
use mhd::linalg::DEFAULT_MEMORY_BUDGET;
use mhd::mesh::{Mesh, MeshPattern};
use mhd::solvers::{adjoint_solve, newton_solve, NewtonOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(40), |a| a.parse())?;
    let params = HartmannParams::default();
    let config = params.config();
    let mesh = Arc::new(Mesh::unit_square(n, MeshPattern::Right)?);

    // Velocity data rides on a degree-4 lift; the unknown velocity vanishes on the boundary.
    let primal = Arc::new(ProductSpace::new(mesh.clone(), Degrees::new(2, 1, 1))?);
    let lift = config.boundary_lift(mesh.clone(), 4, &[Component::Ux, Component::Uy])?;
    let initial = FeFunction::zeros(primal).with_lift(Arc::new(lift))?;
    let (u_h, report) = newton_solve(initial, &config, &NewtonOptions::default())?;

    let qoi = HartmannParams::default_qoi();
    let error = params.exact_qoi(&qoi) - qoi.evaluate(&u_h)?;
    let adjoint = Arc::new(ProductSpace::new(mesh, Degrees::new(3, 2, 2))?);
    let (phi, _) = adjoint_solve(&adjoint, &LinearizationState::numerical(&u_h), &config, &qoi, DEFAULT_MEMORY_BUDGET)?;
    let e = estimate(&u_h, &phi, &config);

    println!("{} elements, {} Newton steps", n * n, report.iterations);
    println!("error {error:.3e}  eta {:.3e}  eff {:.3}", e.eta(), e.eta() / error);
    println!("E_mom {:.3e}  E_con {:.3e}  E_M {:.3e}", e.e_mom, e.e_con, e.e_m);
    Ok(())
}
