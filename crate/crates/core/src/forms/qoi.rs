//! Linear quantities of interest: integrals of one field component over a
//! grid-aligned rectangle.

use serde::{Deserialize, Serialize};

use super::assembly::{rule_for, CellBasis};
use crate::error::QoiError;
use crate::fem::{CellGeometry, Component, FeFunction, ProductSpace, QuadratureRule, StatePoint};
use crate::mesh::Mesh;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Region {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn contains(&self, x: [f64; 2]) -> bool {
        x[0] > self.x0 && x[0] < self.x1 && x[1] > self.y0 && x[1] < self.y1
    }
}

/// `J(U) = int_region U_component` (optionally divided by the region area).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoiSpec {
    pub component: Component,
    pub region: Region,
    #[serde(default)]
    pub normalize: bool,
}

impl QoiSpec {
    fn scale(&self) -> f64 {
        if self.normalize {
            1.0 / self.region.area()
        } else {
            1.0
        }
    }

    /// Cells covering the region; fails unless the region follows grid lines.
    pub fn cells(&self, mesh: &Mesh) -> Result<Vec<usize>, QoiError> {
        let r = self.region;
        let n = mesh.divisions();
        let aligned = |v: f64| {
            let t = (v + 0.5) * n as f64;
            (t - t.round()).abs() < 1e-9 && (-1e-9..=n as f64 + 1e-9).contains(&t)
        };
        if !(r.x0 < r.x1 && r.y0 < r.y1) {
            return Err(QoiError::EmptyRegion);
        }
        if ![r.x0, r.x1, r.y0, r.y1].into_iter().all(aligned) {
            return Err(QoiError::NotGridAligned { x0: r.x0, x1: r.x1, y0: r.y0, y1: r.y1, n });
        }
        Ok((0..mesh.num_cells())
            .filter(|&c| {
                let v = mesh.cell_vertices(c);
                r.contains([(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0])
            })
            .collect())
    }

    /// Value on a finite element function.
    pub fn evaluate(&self, f: &FeFunction) -> Result<f64, QoiError> {
        let mesh = f.space().mesh();
        let cells = self.cells(mesh)?;
        let rule = rule_for(&f.spaces());
        let bound = f.bind(&rule);
        let mut states = vec![StatePoint::default(); rule.len()];
        let mut total = 0.0;
        for cell in cells {
            let geo = CellGeometry::new(mesh.cell_vertices(cell));
            bound.eval_cell(cell, &geo, &mut states);
            for (s, w) in states.iter().zip(rule.weights()) {
                total += w * geo.det * s.component(self.component);
            }
        }
        Ok(total * self.scale())
    }

    /// Value on a pointwise field, integrated with a rule of the given degree.
    pub fn evaluate_analytic(&self, mesh: &Mesh, f: impl Fn([f64; 2]) -> f64, degree: usize) -> Result<f64, QoiError> {
        let rule = QuadratureRule::triangle(degree);
        let mut total = 0.0;
        for cell in self.cells(mesh)? {
            let geo = CellGeometry::new(mesh.cell_vertices(cell));
            for (xi, w) in rule.points().iter().zip(rule.weights()) {
                total += w * geo.det * f(geo.map(*xi));
            }
        }
        Ok(total * self.scale())
    }

    /// Load vector `(Psi, V_i)` of the adjoint problem.
    pub fn load_vector(&self, space: &ProductSpace) -> Result<Vec<f64>, QoiError> {
        let mesh = space.mesh();
        let cells = self.cells(mesh)?;
        let rule = rule_for(&[space]);
        let mut basis = CellBasis::new(space, &rule);
        let field = self.component.field();
        let range = space.component_range(self.component);
        let scalar = space.component_space(self.component);
        let mut out = vec![0.0; space.num_dofs()];
        for cell in cells {
            let geo = CellGeometry::new(mesh.cell_vertices(cell));
            basis.update(&geo);
            let nodes = scalar.cell_nodes(cell);
            for (q, w) in rule.weights().iter().enumerate() {
                for (i, v) in basis.values(field, q).iter().enumerate() {
                    out[range.start + nodes[i]] += w * geo.det * v * self.scale();
                }
            }
        }
        Ok(out)
    }
}
