//! Scalar Lagrange spaces and the mixed product space for `(u, b, p)`.

use std::sync::{Arc, OnceLock};

use super::element::{LagrangeElement, NodeEntity};
use crate::error::SpaceError;
use crate::linalg::SparsityPattern;
use crate::mesh::{Mesh, LOCAL_EDGES};

/// Affine map data of one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: [f64; 2],
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    inv_t: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [v0, v1, v2] = vertices;
        let j = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        Self { origin: v0, jacobian: j, det, inv_t }
    }

    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        [self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1], self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1]]
    }

    /// Maps a physical point back to reference coordinates.
    pub fn inverse_map(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        // J^{-1} d = (J^{-T})^T d
        [self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1], self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1]]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1], self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1]]
    }
}

/// Continuous scalar Lagrange space of fixed degree on a mesh.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    element: LagrangeElement,
    num_nodes: usize,
    cell_nodes: Vec<usize>,
    coords: Vec<[f64; 2]>,
}

impl ScalarSpace {
    pub fn new(mesh: &Mesh, degree: usize) -> Result<Self, SpaceError> {
        let element = LagrangeElement::new(degree)?;
        let k = degree;
        let nloc = element.num_nodes();
        let nv = mesh.num_vertices();
        let ne = mesh.edges().len();
        let ni = element.num_interior();
        let num_nodes = nv + ne * (k - 1) + mesh.num_cells() * ni;
        let mut cell_nodes = Vec::with_capacity(nloc * mesh.num_cells());
        let mut coords = vec![[f64::NAN; 2]; num_nodes];

        for (c, cell) in mesh.cells().iter().enumerate() {
            let geo = CellGeometry::new(mesh.cell_vertices(c));
            let edges = mesh.cell_edges(c);
            for (i, ent) in element.entities().iter().enumerate() {
                let g = match *ent {
                    NodeEntity::Vertex(v) => cell[v],
                    NodeEntity::Edge { edge, step } => {
                        let [a, b] = LOCAL_EDGES[edge];
                        let pos = if cell[a] < cell[b] { step } else { k - step };
                        nv + edges[edge] * (k - 1) + pos - 1
                    }
                    NodeEntity::Interior(j) => nv + ne * (k - 1) + c * ni + j,
                };
                if coords[g][0].is_nan() {
                    coords[g] = geo.map(element.node(i));
                }
                cell_nodes.push(g);
            }
        }
        Ok(Self { element, num_nodes, cell_nodes, coords })
    }

    pub fn element(&self) -> &LagrangeElement {
        &self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.element.num_nodes()
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let n = self.element.num_nodes();
        &self.cell_nodes[cell * n..(cell + 1) * n]
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }
}

/// Field components of the mixed unknown, in global storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Ux,
    Uy,
    Bx,
    By,
    P,
}

impl Component {
    pub const ALL: [Component; 5] = [Component::Ux, Component::Uy, Component::Bx, Component::By, Component::P];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Which scalar space (velocity, magnetic, pressure) carries this component.
    pub fn field(self) -> usize {
        match self {
            Component::Ux | Component::Uy => 0,
            Component::Bx | Component::By => 1,
            Component::P => 2,
        }
    }
}

/// Polynomial degrees of the velocity, magnetic and pressure spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Degrees {
    pub u: usize,
    pub b: usize,
    pub p: usize,
}

impl Degrees {
    pub const fn new(u: usize, b: usize, p: usize) -> Self {
        Self { u, b, p }
    }

    pub fn as_array(self) -> [usize; 3] {
        [self.u, self.b, self.p]
    }

    pub fn max(self) -> usize {
        self.u.max(self.b).max(self.p)
    }
}

impl std::fmt::Display for Degrees {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P{}P{}P{}", self.u, self.b, self.p)
    }
}

/// What a constrained degree of freedom represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Velocity(Component),
    /// Tangential magnetic component on the boundary.
    Magnetic(Component),
    PressurePin,
}

/// Mixed space `V x C x Q` with component-major storage
/// `[u_x, u_y, b_x, b_y, p]`.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    mesh: Arc<Mesh>,
    degrees: Degrees,
    fields: [ScalarSpace; 3],
    offsets: [usize; 6],
    pattern: OnceLock<Arc<SparsityPattern>>,
}

impl ProductSpace {
    pub fn new(mesh: Arc<Mesh>, degrees: Degrees) -> Result<Self, SpaceError> {
        let fields = [
            ScalarSpace::new(&mesh, degrees.u)?,
            ScalarSpace::new(&mesh, degrees.b)?,
            ScalarSpace::new(&mesh, degrees.p)?,
        ];
        let mut offsets = [0; 6];
        for c in Component::ALL {
            offsets[c.index() + 1] = offsets[c.index()] + fields[c.field()].num_nodes();
        }
        Ok(Self { mesh, degrees, fields, offsets, pattern: OnceLock::new() })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degrees(&self) -> Degrees {
        self.degrees
    }

    pub fn num_dofs(&self) -> usize {
        self.offsets[5]
    }

    pub fn field(&self, field: usize) -> &ScalarSpace {
        &self.fields[field]
    }

    pub fn component_space(&self, c: Component) -> &ScalarSpace {
        &self.fields[c.field()]
    }

    /// Global index range of a component block.
    pub fn component_range(&self, c: Component) -> std::ops::Range<usize> {
        self.offsets[c.index()]..self.offsets[c.index() + 1]
    }

    pub fn dof(&self, c: Component, node: usize) -> usize {
        self.offsets[c.index()] + node
    }

    /// Component and physical coordinates of every global dof.
    pub fn dof_component(&self, dof: usize) -> Component {
        let i = self.offsets[1..].iter().position(|&o| dof < o).expect("dof out of range");
        Component::ALL[i]
    }

    pub fn dof_coords(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.num_dofs());
        for c in Component::ALL {
            out.extend_from_slice(self.component_space(c).coords());
        }
        out
    }

    /// Global dofs of one cell, grouped by component.
    pub fn cell_dofs(&self, cell: usize, out: &mut Vec<usize>) {
        out.clear();
        for c in Component::ALL {
            let off = self.offsets[c.index()];
            out.extend(self.component_space(c).cell_nodes(cell).iter().map(|n| off + n));
        }
    }

    /// Sparsity pattern coupling all dofs that share a cell (built once).
    pub fn sparsity(&self) -> Arc<SparsityPattern> {
        self.pattern
            .get_or_init(|| {
                let mut flat = Vec::new();
                let mut dofs = Vec::new();
                for cell in 0..self.mesh.num_cells() {
                    self.cell_dofs(cell, &mut dofs);
                    flat.extend_from_slice(&dofs);
                }
                let nl = dofs.len();
                // Pressure couples only to velocity; the magnetic field never
                // meets the pressure in any form.
                let field: Vec<u8> = (0..self.num_dofs()).map(|d| self.dof_component(d).field() as u8).collect();
                let keep = |i: usize, j: usize| i == j || field[i] + field[j] < 3;
                Arc::new(SparsityPattern::from_cells_filtered(self.num_dofs(), flat.chunks(nl), keep))
            })
            .clone()
    }

    /// Essential constraints: all velocity boundary nodes, the tangential
    /// magnetic component on each side, and one pinned pressure dof at the
    /// corner `(-1/2, -1/2)`.
    pub fn constraints(&self) -> Vec<(usize, ConstraintKind)> {
        const TOL: f64 = 1e-12;
        let mut out = Vec::new();
        let on = |x: f64| (x.abs() - 0.5).abs() < TOL;
        for c in [Component::Ux, Component::Uy] {
            for (i, x) in self.component_space(c).coords().iter().enumerate() {
                if on(x[0]) || on(x[1]) {
                    out.push((self.dof(c, i), ConstraintKind::Velocity(c)));
                }
            }
        }
        // b_x is tangential on top and bottom, b_y on left and right.
        for (c, axis) in [(Component::Bx, 1), (Component::By, 0)] {
            for (i, x) in self.component_space(c).coords().iter().enumerate() {
                if on(x[axis]) {
                    out.push((self.dof(c, i), ConstraintKind::Magnetic(c)));
                }
            }
        }
        out.push((self.pressure_pin(), ConstraintKind::PressurePin));
        out
    }

    /// The pinned pressure dof (vertex 0, the corner `(-1/2, -1/2)`).
    pub fn pressure_pin(&self) -> usize {
        self.dof(Component::P, 0)
    }

    pub fn same_mesh(&self, other: &ProductSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
            || (self.mesh.divisions() == other.mesh.divisions() && self.mesh.num_cells() == other.mesh.num_cells())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_square_crossed(n).unwrap())
    }

    #[test]
    fn dof_counts_match_formula() {
        let m = mesh(5);
        let (v, e, f) = (m.num_vertices(), m.edges().len(), m.num_cells());
        for k in 1..=6 {
            let s = ScalarSpace::new(&m, k).unwrap();
            assert_eq!(s.num_nodes(), v + (k - 1) * e + (k - 1) * (k.saturating_sub(2)) / 2 * f);
        }
    }

    #[test]
    fn shared_nodes_have_consistent_coordinates() {
        let m = mesh(4);
        for k in 1..=6 {
            let s = ScalarSpace::new(&m, k).unwrap();
            for c in 0..m.num_cells() {
                let geo = CellGeometry::new(m.cell_vertices(c));
                for (i, &g) in s.cell_nodes(c).iter().enumerate() {
                    let x = geo.map(s.element().node(i));
                    let y = s.coords()[g];
                    assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14, "k={k}");
                }
            }
            // Every node is used.
            assert!(s.coords().iter().all(|x| !x[0].is_nan()));
        }
    }

    #[test]
    fn geometry_inverse_roundtrip() {
        let g = CellGeometry::new([[0.1, 0.2], [0.4, 0.25], [0.2, 0.6]]);
        let xi = [0.3, 0.45];
        let back = g.inverse_map(g.map(xi));
        assert!((back[0] - xi[0]).abs() < 1e-14 && (back[1] - xi[1]).abs() < 1e-14);
    }

    #[test]
    fn constraint_counts() {
        let n = 4;
        let space = ProductSpace::new(mesh(n), Degrees::new(2, 1, 1)).unwrap();
        let cons = space.constraints();
        let vel = cons.iter().filter(|(_, k)| matches!(k, ConstraintKind::Velocity(_))).count();
        let mag = cons.iter().filter(|(_, k)| matches!(k, ConstraintKind::Magnetic(_))).count();
        // P2 boundary nodes: 4 * 2n, P1: 4n; tangential b_x on two sides of n+1 nodes each.
        assert_eq!(vel, 2 * 8 * n);
        assert_eq!(mag, 2 * 2 * (n + 1));
        let pin = space.pressure_pin();
        assert_eq!(space.dof_component(pin), Component::P);
        assert_eq!(space.dof_coords()[pin], [-0.5, -0.5]);
    }
}
