//! Shared fixtures for the benchmarks in `benches/`.

use std::sync::Arc;

use mhd::cases::HartmannParams;
use mhd::fem::{Degrees, FeFunction, ProductSpace};
use mhd::forms::MhdConfig;
use mhd::mesh::{Mesh, MeshPattern};

/// Hartmann data interpolated on an `n x n` grid.
pub fn hartmann_state(n: usize, degrees: Degrees) -> (FeFunction, MhdConfig) {
    let params = HartmannParams::default();
    let mesh = Arc::new(Mesh::unit_square(n, MeshPattern::Right).expect("positive grid size"));
    let space = Arc::new(ProductSpace::new(mesh, degrees).expect("supported degrees"));
    (FeFunction::interpolate(space, |x| params.exact_values(x)), params.config())
}
