//! Multifrontal sparse LU with geometric nested dissection.
//!
//! The ordering recursively splits the dof coordinates along grid lines, so
//! separators are cheap and the assembly tree is balanced. Each front is a
//! dense matrix factored with partial pivoting restricted to its fully summed
//! rows; dense updates go through `faer`. Pivots that are numerically zero
//! are perturbed, and the caller restores accuracy by iterative refinement.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Seek, SeekFrom, Write};
use std::sync::{Arc, Mutex};

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::solve_unit_lower_triangular_in_place;
use faer::prelude::{Reborrow, ReborrowMut};
use faer::{Accum, MatMut, MatRef, Par};

use super::sparse::{SparseMatrix, SparsityPattern};

/// Fronts with at most this many coordinate groups are not split further.
const LEAF_NODES: usize = 48;
/// Panel width of the blocked front factorization.
const PANEL: usize = 32;

/// Ordering and front structure of a sparsity pattern.
#[derive(Debug, Clone)]
pub struct Symbolic {
    pattern: Arc<SparsityPattern>,
    /// Front variable lists: own (fully summed) variables first, then the
    /// contribution block variables. Fronts are stored in postorder.
    ptr: Vec<usize>,
    vars: Vec<u32>,
    own: Vec<usize>,
    num_children: Vec<u32>,
}

impl Symbolic {
    /// Orders the pattern by nested dissection on `coords` (one point per
    /// variable). Without coordinates the variable index is used as a 1D
    /// coordinate.
    pub fn analyze(pattern: Arc<SparsityPattern>, coords: Option<&[[f64; 2]]>) -> Self {
        let n = pattern.n();
        let fallback: Vec<[f64; 2]>;
        let coords = match coords {
            Some(c) => {
                assert_eq!(c.len(), n, "one coordinate per variable");
                c
            }
            None => {
                fallback = (0..n).map(|i| [i as f64, 0.0]).collect();
                &fallback
            }
        };
        let (front_vars, num_children) = nested_dissection(&pattern, coords);
        Self::from_fronts(pattern, front_vars, num_children)
    }

    fn from_fronts(pattern: Arc<SparsityPattern>, front_vars: Vec<Vec<u32>>, num_children: Vec<u32>) -> Self {
        let n = pattern.n();
        let nfronts = front_vars.len();
        let mut eliminated = vec![false; n];
        let mut order = vec![0u32; n];
        let mut k = 0u32;
        for f in &front_vars {
            for &v in f {
                order[v as usize] = k;
                k += 1;
            }
        }
        debug_assert_eq!(k as usize, n);

        let mut mark = vec![usize::MAX; n];
        let mut ptr = Vec::with_capacity(nfronts + 1);
        let mut vars: Vec<u32> = Vec::new();
        let mut own = Vec::with_capacity(nfronts);
        let mut stack: Vec<usize> = Vec::new();
        ptr.push(0);
        for (f, fv) in front_vars.iter().enumerate() {
            for &v in fv {
                mark[v as usize] = f;
            }
            let mut cb: Vec<u32> = Vec::new();
            for &v in fv {
                for &j in pattern.row(v as usize) {
                    if !eliminated[j as usize] && mark[j as usize] != f {
                        mark[j as usize] = f;
                        cb.push(j);
                    }
                }
            }
            let nc = num_children[f] as usize;
            for child in stack.drain(stack.len() - nc..) {
                let c0 = ptr[child] + own[child];
                for i in c0..ptr[child + 1] {
                    let j = vars[i];
                    if mark[j as usize] != f {
                        mark[j as usize] = f;
                        cb.push(j);
                    }
                }
            }
            for &v in fv {
                eliminated[v as usize] = true;
            }
            cb.sort_unstable_by_key(|&j| order[j as usize]);
            vars.extend_from_slice(fv);
            vars.extend_from_slice(&cb);
            own.push(fv.len());
            ptr.push(vars.len());
            stack.push(f);
        }
        Self { pattern, ptr, vars, own, num_children }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn num_fronts(&self) -> usize {
        self.own.len()
    }

    /// Number of stored factor entries (L and U, including dense fill).
    pub fn factor_entries(&self) -> usize {
        (0..self.num_fronts())
            .map(|f| {
                let m = self.ptr[f + 1] - self.ptr[f];
                let nf = self.own[f];
                m * nf + nf * (m - nf)
            })
            .sum()
    }

    /// Largest front dimension.
    pub fn max_front(&self) -> usize {
        (0..self.num_fronts()).map(|f| self.ptr[f + 1] - self.ptr[f]).max().unwrap_or(0)
    }

    fn front(&self, f: usize) -> (&[u32], usize) {
        (&self.vars[self.ptr[f]..self.ptr[f + 1]], self.own[f])
    }
}

/// Groups variables by coordinates and recursively bisects along grid lines.
/// Returns front variable lists in postorder and the child count of each front.
fn nested_dissection(pattern: &SparsityPattern, coords: &[[f64; 2]]) -> (Vec<Vec<u32>>, Vec<u32>) {
    let n = pattern.n();
    let mut node_of = vec![0u32; n];
    let mut node_coords: Vec<[f64; 2]> = Vec::new();
    let mut lookup: HashMap<[u64; 2], u32> = HashMap::new();
    for (v, x) in coords.iter().enumerate() {
        let key = [x[0].to_bits(), x[1].to_bits()];
        let id = *lookup.entry(key).or_insert_with(|| {
            node_coords.push(*x);
            (node_coords.len() - 1) as u32
        });
        node_of[v] = id;
    }
    let nn = node_coords.len();
    let mut vptr = vec![0usize; nn + 1];
    for &g in &node_of {
        vptr[g as usize + 1] += 1;
    }
    for i in 0..nn {
        vptr[i + 1] += vptr[i];
    }
    let mut node_vars = vec![0u32; n];
    let mut fill = vptr.clone();
    for (v, &g) in node_of.iter().enumerate() {
        node_vars[fill[g as usize]] = v as u32;
        fill[g as usize] += 1;
    }
    // Node adjacency.
    let mut aptr = vec![0usize; nn + 1];
    let mut adj: Vec<u32> = Vec::new();
    let mut mark = vec![u32::MAX; nn];
    for g in 0..nn {
        mark[g] = g as u32;
        for &v in &node_vars[vptr[g]..vptr[g + 1]] {
            for &j in pattern.row(v as usize) {
                let h = node_of[j as usize];
                if mark[h as usize] != g as u32 {
                    mark[h as usize] = g as u32;
                    adj.push(h);
                }
            }
        }
        aptr[g + 1] = adj.len();
    }

    let mut nd = Dissector {
        coords: node_coords,
        aptr,
        adj,
        vptr,
        node_vars,
        stamp: vec![0; nn],
        side: vec![0; nn],
        current: 0,
        fronts: Vec::new(),
        num_children: Vec::new(),
    };
    nd.build((0..nn as u32).collect());
    (nd.fronts, nd.num_children)
}

struct Dissector {
    coords: Vec<[f64; 2]>,
    aptr: Vec<usize>,
    adj: Vec<u32>,
    vptr: Vec<usize>,
    node_vars: Vec<u32>,
    stamp: Vec<u32>,
    side: Vec<u8>,
    current: u32,
    fronts: Vec<Vec<u32>>,
    num_children: Vec<u32>,
}

impl Dissector {
    fn emit(&mut self, nodes: &[u32], children: u32) {
        let mut vars = Vec::new();
        for &g in nodes {
            vars.extend_from_slice(&self.node_vars[self.vptr[g as usize]..self.vptr[g as usize + 1]]);
        }
        self.fronts.push(vars);
        self.num_children.push(children);
    }

    fn build(&mut self, set: Vec<u32>) {
        if set.len() <= LEAF_NODES {
            self.emit(&set, 0);
            return;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &g in &set {
            let x = self.coords[g as usize];
            for d in 0..2 {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
        let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        let mut vals: Vec<f64> = set.iter().map(|&g| self.coords[g as usize][axis]).collect();
        vals.sort_unstable_by(f64::total_cmp);
        let len = vals.len();
        let median = vals[len / 2];
        let (qlo, qhi) = (vals[len * 2 / 5], vals[len * 3 / 5]);
        let tol = 1e-12 * (1.0 + (hi[axis] - lo[axis]).abs());
        // Pick the most populated coordinate line near the median.
        let mut split = median;
        let mut best = (0usize, f64::INFINITY);
        let mut i = 0;
        while i < len {
            let mut j = i;
            while j < len && vals[j] - vals[i] <= tol {
                j += 1;
            }
            let v = vals[i];
            if v >= qlo - tol && v <= qhi + tol {
                let dist = (v - median).abs();
                if j - i > best.0 || (j - i == best.0 && dist < best.1) {
                    best = (j - i, dist);
                    split = v;
                }
            }
            i = j;
        }

        self.current += 1;
        let stamp = self.current;
        for &g in &set {
            let x = self.coords[g as usize][axis];
            self.stamp[g as usize] = stamp;
            self.side[g as usize] = if x < split - tol {
                0
            } else if x > split + tol {
                1
            } else {
                2
            };
        }
        // Left nodes touching the right part join the separator.
        for &g in &set {
            if self.side[g as usize] == 0 {
                let touches = self.adj[self.aptr[g as usize]..self.aptr[g as usize + 1]]
                    .iter()
                    .any(|&h| self.stamp[h as usize] == stamp && self.side[h as usize] == 1);
                if touches {
                    self.side[g as usize] = 2;
                }
            }
        }
        let mut parts: [Vec<u32>; 3] = Default::default();
        for &g in &set {
            parts[self.side[g as usize] as usize].push(g);
        }
        if parts[0].is_empty() || parts[1].is_empty() {
            self.emit(&set, 0);
            return;
        }
        drop(set);
        let [left, right, sep] = parts;
        self.build(left);
        self.build(right);
        self.emit(&sep, 2);
    }
}

#[derive(Debug, Clone, Default)]
struct FrontFactor {
    /// Columns `0..nf` of the factored front (`m x nf`, column-major):
    /// unit lower `L11` and `U11` on top, `L21` below.
    panel: Vec<f64>,
    /// `U12` block (`nf x (m - nf)`, column-major).
    u12: Vec<f64>,
    ipiv: Vec<u32>,
}

/// Where factored fronts are kept between factorization and solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FactorStorage {
    #[default]
    Memory,
    /// An anonymous temporary file, read back front by front in each solve.
    Disk,
}

#[derive(Debug)]
enum Store {
    Memory(Vec<FrontFactor>),
    Disk { file: Mutex<File>, offsets: Vec<u64> },
}

fn write_f64s(w: &mut impl Write, v: &[f64]) -> io::Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, bytes: &mut Vec<u8>, out: &mut Vec<f64>, len: usize) -> io::Result<()> {
    bytes.resize(8 * len, 0);
    r.read_exact(bytes)?;
    out.clear();
    out.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))));
    Ok(())
}

/// Numerical LU factors for a [`Symbolic`] structure.
#[derive(Debug)]
pub struct Numeric {
    store: Store,
    perturbed: Vec<usize>,
}

impl Numeric {
    /// Factors `a` keeping the factors in memory.
    pub fn factor(sym: &Symbolic, a: &SparseMatrix) -> Self {
        Self::factor_with(sym, a, FactorStorage::Memory).expect("in-memory factorization performs no I/O")
    }

    /// Factors `a`, whose pattern must be the one analyzed by `sym`.
    pub fn factor_with(sym: &Symbolic, a: &SparseMatrix, storage: FactorStorage) -> io::Result<Self> {
        assert!(Arc::ptr_eq(sym.pattern(), a.pattern()) || **sym.pattern() == **a.pattern());
        let n = a.n();
        let pattern = a.pattern();
        let (row_ptr, col_idx, tmap) = (pattern.row_ptr(), pattern.col_idx(), pattern.transpose_map());
        let values = a.values();
        let anorm = a.max_abs().max(f64::MIN_POSITIVE);
        let tiny = 1e-14 * anorm;
        let bump = f64::EPSILON.sqrt() * anorm;

        let mut pos = vec![-1i32; n];
        let mut stack: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut fronts = Vec::new();
        let mut disk = match storage {
            FactorStorage::Memory => None,
            FactorStorage::Disk => Some((BufWriter::with_capacity(1 << 20, tempfile::tempfile()?), Vec::new(), 0u64)),
        };
        let mut perturbed = Vec::new();
        for f in 0..sym.num_fronts() {
            let (vars, nf) = sym.front(f);
            let m = vars.len();
            for (l, &v) in vars.iter().enumerate() {
                pos[v as usize] = l as i32;
            }
            let mut dense = vec![0.0; m * m];
            for (lv, &v) in vars[..nf].iter().enumerate() {
                let v = v as usize;
                for e in row_ptr[v]..row_ptr[v + 1] {
                    let pj = pos[col_idx[e] as usize];
                    if pj < 0 {
                        continue;
                    }
                    let pj = pj as usize;
                    dense[lv + pj * m] += values[e];
                    if pj >= nf {
                        dense[pj + lv * m] += values[tmap[e] as usize];
                    }
                }
            }
            let nchild = sym.num_children[f] as usize;
            for (child, cb) in stack.drain(stack.len() - nchild..) {
                let (cvars, cnf) = sym.front(child);
                let local: Vec<usize> = cvars[cnf..].iter().map(|&v| pos[v as usize] as usize).collect();
                let nc = local.len();
                for (jj, &lj) in local.iter().enumerate() {
                    let src = &cb[jj * nc..(jj + 1) * nc];
                    let dst = &mut dense[lj * m..(lj + 1) * m];
                    for (ii, &li) in local.iter().enumerate() {
                        dst[li] += src[ii];
                    }
                }
            }

            let mut ipiv = vec![0u32; nf];
            for k in factor_front(&mut dense, m, nf, &mut ipiv, tiny, bump) {
                perturbed.push(vars[k] as usize);
            }
            let nc = m - nf;
            let panel = dense[..m * nf].to_vec();
            let mut u12 = vec![0.0; nf * nc];
            let mut cb = vec![0.0; nc * nc];
            for j in 0..nc {
                let col = &dense[(nf + j) * m..(nf + j + 1) * m];
                u12[j * nf..(j + 1) * nf].copy_from_slice(&col[..nf]);
                cb[j * nc..(j + 1) * nc].copy_from_slice(&col[nf..]);
            }
            drop(dense);
            stack.push((f, cb));
            match &mut disk {
                None => fronts.push(FrontFactor { panel, u12, ipiv }),
                Some((w, offsets, pos)) => {
                    offsets.push(*pos);
                    for p in &ipiv {
                        w.write_all(&p.to_le_bytes())?;
                    }
                    write_f64s(w, &panel)?;
                    write_f64s(w, &u12)?;
                    *pos += 4 * ipiv.len() as u64 + 8 * (panel.len() + u12.len()) as u64;
                }
            }
            for &v in vars {
                pos[v as usize] = -1;
            }
        }
        let store = match disk {
            None => Store::Memory(fronts),
            Some((w, offsets, _)) => {
                let file = w.into_inner().map_err(|e| e.into_error())?;
                Store::Disk { file: Mutex::new(file), offsets }
            }
        };
        Ok(Self { store, perturbed })
    }

    pub fn storage(&self) -> FactorStorage {
        match self.store {
            Store::Memory(_) => FactorStorage::Memory,
            Store::Disk { .. } => FactorStorage::Disk,
        }
    }

    /// Front `f`, either borrowed or read into `scratch`.
    fn front<'a>(&'a self, sym: &Symbolic, f: usize, scratch: &'a mut FrontFactor, bytes: &mut Vec<u8>) -> io::Result<&'a FrontFactor> {
        match &self.store {
            Store::Memory(fronts) => Ok(&fronts[f]),
            Store::Disk { file, offsets } => {
                let (vars, nf) = sym.front(f);
                let m = vars.len();
                let mut file = file.lock().unwrap_or_else(|e| e.into_inner());
                file.seek(SeekFrom::Start(offsets[f]))?;
                let mut r = io::BufReader::with_capacity(1 << 20, &mut *file);
                bytes.resize(4 * nf, 0);
                r.read_exact(bytes)?;
                scratch.ipiv.clear();
                scratch.ipiv.extend(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk"))));
                read_f64s(&mut r, bytes, &mut scratch.panel, m * nf)?;
                read_f64s(&mut r, bytes, &mut scratch.u12, nf * (m - nf))?;
                Ok(scratch)
            }
        }
    }

    /// Global rows whose pivots were perturbed during factorization.
    pub fn perturbed_pivots(&self) -> &[usize] {
        &self.perturbed
    }

    /// Overwrites `b` with `A^{-1} b` (exact up to pivot perturbations).
    /// Fails only when factors kept on disk cannot be read back.
    pub fn solve_in_place(&self, sym: &Symbolic, b: &mut [f64]) -> io::Result<()> {
        let mut w = Vec::new();
        let (mut scratch, mut bytes) = (FrontFactor::default(), Vec::new());
        for f in 0..sym.num_fronts() {
            let ff = self.front(sym, f, &mut scratch, &mut bytes)?;
            let (vars, nf) = sym.front(f);
            let m = vars.len();
            w.clear();
            w.extend(vars[..nf].iter().map(|&v| b[v as usize]));
            for k in 0..nf {
                w.swap(k, ff.ipiv[k] as usize);
            }
            for k in 0..nf {
                let wk = w[k];
                if wk == 0.0 {
                    continue;
                }
                let col = &ff.panel[k * m..(k + 1) * m];
                for i in k + 1..nf {
                    w[i] -= col[i] * wk;
                }
                for i in nf..m {
                    b[vars[i] as usize] -= col[i] * wk;
                }
            }
            for (k, &v) in vars[..nf].iter().enumerate() {
                b[v as usize] = w[k];
            }
        }
        for f in (0..sym.num_fronts()).rev() {
            let ff = self.front(sym, f, &mut scratch, &mut bytes)?;
            let (vars, nf) = sym.front(f);
            let m = vars.len();
            w.clear();
            w.extend(vars[..nf].iter().map(|&v| b[v as usize]));
            for (c, &v) in vars[nf..].iter().enumerate() {
                let xc = b[v as usize];
                if xc != 0.0 {
                    for (wk, u) in w.iter_mut().zip(&ff.u12[c * nf..(c + 1) * nf]) {
                        *wk -= u * xc;
                    }
                }
            }
            for k in (0..nf).rev() {
                let col = &ff.panel[k * m..k * m + nf];
                w[k] /= col[k];
                let wk = w[k];
                for i in 0..k {
                    w[i] -= col[i] * wk;
                }
            }
            for (k, &v) in vars[..nf].iter().enumerate() {
                b[v as usize] = w[k];
            }
        }
        Ok(())
    }
}

/// Blocked LU of the first `nf` columns of an `m x m` column-major front,
/// pivoting only among rows `0..nf`. On return the trailing block holds the
/// Schur complement. Returns local rows whose pivots were perturbed.
fn factor_front(a: &mut [f64], m: usize, nf: usize, ipiv: &mut [u32], tiny: f64, bump: f64) -> Vec<usize> {
    let mut perturbed = Vec::new();
    let mut k0 = 0;
    while k0 < nf {
        let kb = PANEL.min(nf - k0);
        let k1 = k0 + kb;
        // Unblocked panel factorization of columns k0..k1, rows k0..m.
        for k in k0..k1 {
            let mut p = k;
            let mut best = a[k + k * m].abs();
            for i in k + 1..nf {
                let v = a[i + k * m].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[k] = p as u32;
            if p != k {
                for j in 0..m {
                    a.swap(k + j * m, p + j * m);
                }
            }
            if best <= tiny {
                let d = a[k + k * m];
                a[k + k * m] = if d < 0.0 { -bump } else { bump };
                perturbed.push(k);
            }
            let inv = 1.0 / a[k + k * m];
            for i in k + 1..m {
                a[i + k * m] *= inv;
            }
            for j in k + 1..k1 {
                let ukj = a[k + j * m];
                if ukj != 0.0 {
                    let (lcol, jcol) = split_cols(a, m, k, j);
                    for i in k + 1..m {
                        jcol[i] -= lcol[i] * ukj;
                    }
                }
            }
        }
        if k1 < m {
            let mut full = MatMut::from_column_major_slice_mut(a, m, m);
            let (left, right) = full.rb_mut().split_at_col_mut(k1);
            let left = left.rb();
            let (top, bottom) = right.split_at_row_mut(k1);
            let mut u12 = top.subrows_mut(k0, kb);
            let l11: MatRef<'_, f64> = left.submatrix(k0, k0, kb, kb);
            solve_unit_lower_triangular_in_place(l11, u12.rb_mut(), Par::Seq);
            let l21 = left.submatrix(k1, k0, m - k1, kb);
            matmul(bottom, Accum::Add, l21, u12.rb(), -1.0, Par::Seq);
        }
        k0 = k1;
    }
    perturbed
}

/// Disjoint views of columns `k < j` of a column-major matrix with `m` rows.
fn split_cols(a: &mut [f64], m: usize, k: usize, j: usize) -> (&[f64], &mut [f64]) {
    let (head, tail) = a.split_at_mut(j * m);
    (&head[k * m..(k + 1) * m], &mut tail[..m])
}
