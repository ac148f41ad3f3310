//! Compressed sparse row storage with a structurally symmetric pattern.

use std::sync::Arc;

use crate::error::LinalgError;

/// Structurally symmetric CSR pattern with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    /// `transpose[e]` is the position of entry `(j, i)` for entry `e = (i, j)`.
    transpose: Vec<u32>,
}

impl SparsityPattern {
    /// Pattern coupling every pair of dofs that share a cell.
    pub fn from_cells<'a>(n: usize, cells: impl Iterator<Item = &'a [usize]> + Clone) -> Self {
        Self::from_cells_filtered(n, cells, |_, _| true)
    }

    /// Pattern coupling dofs that share a cell and pass `keep`, which must be
    /// symmetric. The diagonal is always present.
    pub fn from_cells_filtered<'a>(
        n: usize,
        cells: impl Iterator<Item = &'a [usize]> + Clone,
        keep: impl Fn(usize, usize) -> bool,
    ) -> Self {
        // dof -> cells incidence
        let mut count = vec![0usize; n + 1];
        let mut num_cells = 0;
        for cell in cells.clone() {
            for &d in cell {
                count[d + 1] += 1;
            }
            num_cells += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut incidence = vec![0u32; count[n]];
        let mut fill = count.clone();
        let mut cell_ptr = Vec::with_capacity(num_cells + 1);
        let mut cell_dofs: Vec<u32> = Vec::new();
        cell_ptr.push(0);
        for (c, cell) in cells.enumerate() {
            for &d in cell {
                incidence[fill[d]] = c as u32;
                fill[d] += 1;
            }
            cell_dofs.extend(cell.iter().map(|&d| d as u32));
            cell_ptr.push(cell_dofs.len());
        }

        let mut marker = vec![u32::MAX; n];
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        let mut row = Vec::new();
        for i in 0..n {
            row.clear();
            for &c in &incidence[count[i]..count[i + 1]] {
                let c = c as usize;
                for &j in &cell_dofs[cell_ptr[c]..cell_ptr[c + 1]] {
                    if marker[j as usize] != i as u32 {
                        marker[j as usize] = i as u32;
                        if keep(i, j as usize) {
                            row.push(j);
                        }
                    }
                }
            }
            if marker[i] != i as u32 {
                row.push(i as u32);
            }
            row.sort_unstable();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        Self::finish(n, row_ptr, col_idx)
    }

    /// Symmetrized pattern of arbitrary entries, always including the diagonal.
    pub fn from_entries(n: usize, entries: &[(usize, usize)]) -> Self {
        let mut rows: Vec<Vec<u32>> = (0..n).map(|i| vec![i as u32]).collect();
        for &(i, j) in entries {
            rows[i].push(j as u32);
            rows[j].push(i as u32);
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Self::finish(n, row_ptr, col_idx)
    }

    fn finish(n: usize, row_ptr: Vec<usize>, col_idx: Vec<u32>) -> Self {
        assert!(col_idx.len() <= u32::MAX as usize, "pattern too large for 32-bit entry positions");
        let mut transpose = vec![0u32; col_idx.len()];
        // Walking rows in order visits, for each column j, the rows i in
        // increasing order, which is exactly the order of row j's columns.
        let mut next = row_ptr[..n].to_vec();
        for i in 0..n {
            for e in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[e] as usize;
                let t = next[j];
                debug_assert_eq!(col_idx[t] as usize, i, "pattern must be symmetric");
                transpose[e] = t as u32;
                next[j] += 1;
            }
        }
        Self { n, row_ptr, col_idx, transpose }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn transpose_map(&self) -> &[u32] {
        &self.transpose
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Position of entry `(i, j)` if it is in the pattern.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&(j as u32)).ok().map(|k| start + k)
    }
}

/// Square sparse matrix on a shared pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        Self { pattern, values: vec![0.0; nnz] }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let entries: Vec<_> = triplets.iter().map(|&(i, j, _)| (i, j)).collect();
        let mut m = Self::zeros(Arc::new(SparsityPattern::from_entries(n, &entries)));
        for &(i, j, v) in triplets {
            let e = m.pattern.find(i, j).expect("entry in pattern");
            m.values[e] += v;
        }
        m
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |e| self.values[e])
    }

    /// Adds a dense row-major local matrix at the given global dofs.
    pub fn add_local(&mut self, dofs: &[usize], local: &[f64]) {
        let nl = dofs.len();
        debug_assert_eq!(local.len(), nl * nl);
        let mut order: Vec<usize> = (0..nl).collect();
        order.sort_unstable_by_key(|&k| dofs[k]);
        for (a, &r) in dofs.iter().enumerate() {
            let row = self.pattern.row(r);
            let base = self.pattern.row_ptr[r];
            let mut lo = 0;
            for &b in &order {
                let j = dofs[b] as u32;
                match row[lo..].binary_search(&j) {
                    Ok(k) => {
                        self.values[base + lo + k] += local[a * nl + b];
                        lo += k;
                    }
                    Err(_) => assert!(local[a * nl + b] == 0.0, "nonzero local entry outside pattern"),
                }
            }
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for i in 0..p.n {
            let mut s = 0.0;
            for e in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[e] * x[p.col_idx[e] as usize];
            }
            y[i] = s;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let values = self.pattern.transpose.iter().map(|&t| self.values[t as usize]).collect();
        SparseMatrix { pattern: self.pattern.clone(), values }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Imposes `x[d] = g` by symmetric elimination: constrained rows become
    /// identity rows, constrained columns are moved to the right-hand side.
    /// The pattern is left unchanged so symbolic factorizations stay valid.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], constraints: &[(usize, f64)]) {
        let n = self.n();
        let mut fixed = vec![false; n];
        for &(d, _) in constraints {
            fixed[d] = true;
        }
        let p = self.pattern.clone();
        for &(d, g) in constraints {
            for e in p.row_ptr[d]..p.row_ptr[d + 1] {
                let j = p.col_idx[e] as usize;
                if j == d {
                    self.values[e] = 1.0;
                    continue;
                }
                let t = p.transpose[e] as usize;
                if !fixed[j] {
                    rhs[j] -= self.values[t] * g;
                }
                self.values[t] = 0.0;
                self.values[e] = 0.0;
            }
            rhs[d] = g;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for e in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                d[i][self.pattern.col_idx[e] as usize] = self.values[e];
            }
        }
        d
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n(), self.n(), self.pattern.nnz())?;
        for i in 0..self.n() {
            for e in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                writeln!(w, "{} {} {:.17e}", i + 1, self.pattern.col_idx[e] + 1, self.values[e])?;
            }
        }
        Ok(())
    }
}

/// Relative residual `||A x - b|| / max(||b||, 1)`.
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<f64, LinalgError> {
    if x.len() != a.n() || b.len() != a.n() {
        return Err(LinalgError::DimensionMismatch { rows: a.n(), cols: a.n(), rhs: b.len() });
    }
    let mut ax = vec![0.0; a.n()];
    a.matvec(x, &mut ax);
    let r = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    Ok(r / norm2(b).max(1.0))
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
