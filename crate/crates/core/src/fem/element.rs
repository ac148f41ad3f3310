//! Lagrange elements of degree 1 to 6 on the reference triangle.

use crate::error::SpaceError;
use crate::mesh::LOCAL_EDGES;

pub const MAX_DEGREE: usize = 6;

/// Where a local node sits on the reference triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeEntity {
    Vertex(usize),
    /// Local edge and position `1..k` counted from the first edge vertex.
    Edge { edge: usize, step: usize },
    Interior(usize),
}

/// Equispaced Lagrange element. Local nodes are ordered vertices, then edge
/// nodes edge by edge, then interior nodes.
#[derive(Debug, Clone)]
pub struct LagrangeElement {
    degree: usize,
    /// Barycentric multi-indices `(a0, a1, a2)` summing to `degree`.
    indices: Vec<[usize; 3]>,
    entities: Vec<NodeEntity>,
}

impl LagrangeElement {
    pub fn new(degree: usize) -> Result<Self, SpaceError> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(SpaceError::UnsupportedDegree(degree));
        }
        let k = degree;
        let mut indices = Vec::new();
        let mut entities = Vec::new();
        for v in 0..3 {
            let mut a = [0; 3];
            a[v] = k;
            indices.push(a);
            entities.push(NodeEntity::Vertex(v));
        }
        for (edge, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            for step in 1..k {
                let mut idx = [0; 3];
                idx[*a] = k - step;
                idx[*b] = step;
                indices.push(idx);
                entities.push(NodeEntity::Edge { edge, step });
            }
        }
        let mut interior = 0;
        for a1 in 1..k {
            for a2 in 1..k {
                if a1 + a2 < k {
                    indices.push([k - a1 - a2, a1, a2]);
                    entities.push(NodeEntity::Interior(interior));
                    interior += 1;
                }
            }
        }
        Ok(Self { degree, indices, entities })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.indices.len()
    }

    pub fn num_interior(&self) -> usize {
        (self.degree.saturating_sub(1)) * (self.degree.saturating_sub(2)) / 2
    }

    pub fn entities(&self) -> &[NodeEntity] {
        &self.entities
    }

    /// Reference coordinates of local node `i`.
    pub fn node(&self, i: usize) -> [f64; 2] {
        let k = self.degree as f64;
        [self.indices[i][1] as f64 / k, self.indices[i][2] as f64 / k]
    }

    /// Values and reference gradients of all basis functions at `x`.
    pub fn eval(&self, x: [f64; 2], values: &mut [f64], grads: &mut [[f64; 2]]) {
        let k = self.degree as f64;
        let lambda = [1.0 - x[0] - x[1], x[0], x[1]];
        // d lambda_i / d(x, y)
        const DLAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

        // Factor tables: f_i(a) = prod_{j<a} (k lambda_i - j) / (j + 1) and its
        // derivative with respect to lambda_i.
        let mut f = [[0.0; MAX_DEGREE + 1]; 3];
        let mut df = [[0.0; MAX_DEGREE + 1]; 3];
        for i in 0..3 {
            f[i][0] = 1.0;
            df[i][0] = 0.0;
            for a in 1..=self.degree {
                let j = (a - 1) as f64;
                let factor = (k * lambda[i] - j) / (j + 1.0);
                f[i][a] = f[i][a - 1] * factor;
                df[i][a] = df[i][a - 1] * factor + f[i][a - 1] * k / (j + 1.0);
            }
        }
        for (n, idx) in self.indices.iter().enumerate() {
            let (f0, f1, f2) = (f[0][idx[0]], f[1][idx[1]], f[2][idx[2]]);
            values[n] = f0 * f1 * f2;
            let dl = [df[0][idx[0]] * f1 * f2, f0 * df[1][idx[1]] * f2, f0 * f1 * df[2][idx[2]]];
            let mut g = [0.0; 2];
            for i in 0..3 {
                g[0] += dl[i] * DLAMBDA[i][0];
                g[1] += dl[i] * DLAMBDA[i][1];
            }
            grads[n] = g;
        }
    }
}

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    num_nodes: usize,
    /// `values[q * num_nodes + i]`
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

impl BasisTable {
    pub fn new(element: &LagrangeElement, points: &[[f64; 2]]) -> Self {
        let nn = element.num_nodes();
        let mut values = vec![0.0; nn * points.len()];
        let mut grads = vec![[0.0; 2]; nn * points.len()];
        for (q, p) in points.iter().enumerate() {
            element.eval(*p, &mut values[q * nn..(q + 1) * nn], &mut grads[q * nn..(q + 1) * nn]);
        }
        Self { num_nodes: nn, values, grads }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.num_nodes..(q + 1) * self.num_nodes]
    }

    pub fn grads_at(&self, q: usize) -> &[[f64; 2]] {
        &self.grads[q * self.num_nodes..(q + 1) * self.num_nodes]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        for (k, n) in [(1, 3), (2, 6), (3, 10), (4, 15)] {
            let e = LagrangeElement::new(k).unwrap();
            assert_eq!(e.num_nodes(), n);
            assert_eq!(3 + 3 * (k - 1) + e.num_interior(), n);
        }
        assert!(LagrangeElement::new(0).is_err());
        assert!(LagrangeElement::new(7).is_err());
    }

    #[test]
    fn kronecker_property_and_partition_of_unity() {
        for k in 1..=6 {
            let e = LagrangeElement::new(k).unwrap();
            let nn = e.num_nodes();
            let mut v = vec![0.0; nn];
            let mut g = vec![[0.0; 2]; nn];
            for i in 0..nn {
                e.eval(e.node(i), &mut v, &mut g);
                for j in 0..nn {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v[j] - expect).abs() < 1e-13, "k={k} i={i} j={j}");
                }
            }
            e.eval([0.23, 0.41], &mut v, &mut g);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            let gs = g.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
            assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let e = LagrangeElement::new(4).unwrap();
        let nn = e.num_nodes();
        let x = [0.17, 0.29];
        let h = 1e-6;
        let (mut v, mut g) = (vec![0.0; nn], vec![[0.0; 2]; nn]);
        let (mut vp, mut vm, mut gd) = (vec![0.0; nn], vec![0.0; nn], vec![[0.0; 2]; nn]);
        e.eval(x, &mut v, &mut g);
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            e.eval(xp, &mut vp, &mut gd);
            e.eval(xm, &mut vm, &mut gd);
            for i in 0..nn {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!((fd - g[i][d]).abs() < 1e-7, "node {i} dir {d}");
            }
        }
    }

    #[test]
    fn reproduces_polynomials_of_its_degree() {
        let e = LagrangeElement::new(3).unwrap();
        let nn = e.num_nodes();
        let p = |x: [f64; 2]| 1.0 + x[0] - 2.0 * x[1] * x[1] + x[0] * x[0] * x[1];
        let coeffs: Vec<f64> = (0..nn).map(|i| p(e.node(i))).collect();
        let (mut v, mut g) = (vec![0.0; nn], vec![[0.0; 2]; nn]);
        let x = [0.31, 0.22];
        e.eval(x, &mut v, &mut g);
        let val: f64 = coeffs.iter().zip(&v).map(|(c, v)| c * v).sum();
        assert!((val - p(x)).abs() < 1e-13);
    }
}
