//! Lagrange finite elements on triangulations of the square.

pub mod element;
pub mod function;
pub mod quadrature;
pub mod space;

pub use element::{BasisTable, LagrangeElement};
pub use function::{AnalyticState, BoundField, FeFunction, Lift, StatePoint};
pub use quadrature::{default_degree, QuadratureRule};
pub use space::{CellGeometry, Component, ConstraintKind, Degrees, ProductSpace, ScalarSpace};
