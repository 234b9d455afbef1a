//! Sparse (CSR) and small dense linear algebra primitives.
//!
//! Every operator in the hierarchy — the fine-grid matrix, Galerkin coarse
//! operators, interpolation and restriction — lives in a single CSR format.
//! Dense matrices appear only for the coarsest-level factorization and for
//! iteration-matrix analysis, and are capped in size.

use crate::Error;

/// Magnitude below which accumulated product entries are treated as explicit zeros.
const DROP_TOL: f64 = 1e-300;

// ---------------------------------------------------------------------------
// Vector kernels
// ---------------------------------------------------------------------------

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "dot: length mismatch");
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// y += alpha * x, returning the updated y.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy: length mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

// ---------------------------------------------------------------------------
// CSR matrix
// ---------------------------------------------------------------------------

/// Compressed sparse row matrix.
///
/// Invariants: `row_ptr` is non-decreasing with `row_ptr[nrows] == col_idx.len()`,
/// and column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from raw parts, validating the structural invariants.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, Error> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::Invalid(format!(
                "row_ptr length {} != nrows+1 ({})",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if *row_ptr.last().unwrap() != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::Invalid(format!(
                "nnz mismatch: row_ptr end {}, col_idx {}, values {}",
                row_ptr.last().unwrap(),
                col_idx.len(),
                values.len()
            )));
        }
        for r in 0..nrows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(Error::Invalid(format!("row_ptr decreases at row {r}")));
            }
            let mut prev: Option<usize> = None;
            for k in row_ptr[r]..row_ptr[r + 1] {
                let c = col_idx[k];
                if c >= ncols {
                    return Err(Error::Invalid(format!(
                        "column {c} out of bounds in row {r} (ncols {ncols})"
                    )));
                }
                if let Some(p) = prev {
                    if c <= p {
                        return Err(Error::Invalid(format!(
                            "columns not strictly increasing in row {r}"
                        )));
                    }
                }
                prev = Some(c);
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from unsorted COO-style triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, Error> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::Invalid(format!("triplet ({r},{c}) out of bounds")));
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_csr(nrows, ncols, row_ptr, col_idx, values)
    }

    /// Dense row-major initializer, keeping only nonzero entries. Test helper.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip).expect("dense rows are always consistent")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_csr(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n]).unwrap()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row accessor: parallel slices of column indices and values.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.entry(i, i))
            .collect()
    }

    /// y = A * x.
    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.ncols,
            "spmv: x has length {} but matrix has {} columns",
            x.len(),
            self.ncols
        );
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        y
    }

    /// y = A * x into a caller-owned buffer.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "spmv: dimension mismatch");
        assert_eq!(y.len(), self.nrows, "spmv: output dimension mismatch");
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// r = b - A * x.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.nrows, "residual: b dimension mismatch");
        let mut r = b.to_vec();
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            r[i] -= acc;
        }
        r
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = counts;
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let slot = next[c];
                next[c] += 1;
                col_idx[slot] = r;
                values[slot] = self.values[k];
            }
        }
        // Rows of the transpose come out sorted because source rows are scanned in order.
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// C = A * B with sorted, deduplicated rows; near-zero entries dropped.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix, Error> {
        if self.ncols != other.nrows {
            return Err(Error::Invalid(format!(
                "matmul: inner dimensions {} vs {}",
                self.ncols, other.nrows
            )));
        }
        let n = other.ncols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![0.0; n];
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for ka in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a_col = self.col_idx[ka];
                let a_val = self.values[ka];
                for kb in other.row_ptr[a_col]..other.row_ptr[a_col + 1] {
                    let c = other.col_idx[kb];
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a_val * other.values[kb];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c].abs() >= DROP_TOL {
                    col_idx.push(c);
                    values.push(acc[c]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Maximum absolute deviation from symmetry, relative to the larger entry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c > r {
                    let w = self.entry(c, r);
                    let scale = v.abs().max(w.abs()).max(1.0);
                    worst = worst.max((v - w).abs() / scale);
                }
            }
        }
        worst
    }

    /// Symmetry check used when a matrix is flagged SPD.
    pub fn check_spd_symmetry(&self) -> Result<(), Error> {
        if self.nrows != self.ncols {
            return Err(Error::Invalid(format!(
                "SPD matrix must be square, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        let defect = self.symmetry_defect();
        if defect > 1e-12 {
            return Err(Error::Invalid(format!(
                "symmetry defect {defect:.3e} exceeds 1e-12"
            )));
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Iterates (row, col, value) over stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }
}

/// Galerkin triple product R * A * P as two sparse products.
pub fn triple_product(
    r: &SparseMatrix,
    a: &SparseMatrix,
    p: &SparseMatrix,
) -> Result<SparseMatrix, Error> {
    r.matmul(&a.matmul(p)?)
}

// ---------------------------------------------------------------------------
// Dense matrix and LU factorization
// ---------------------------------------------------------------------------

/// Default size cap for dense analysis matrices (rows and columns each).
pub const DENSE_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense rows");
            for (c, &v) in row.iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dense matvec: dimension mismatch");
        (0..self.nrows)
            .map(|r| {
                (0..self.ncols)
                    .map(|c| self[(r, c)] * x[c])
                    .sum()
            })
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows, "dense matmul: dimension mismatch");
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        for r in 0..self.nrows {
            for k in 0..self.ncols {
                let v = self[(r, k)];
                if v == 0.0 {
                    continue;
                }
                for c in 0..other.ncols {
                    out[(r, c)] += v * other[(k, c)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut out = self.clone();
        for (o, e) in out.entries.iter_mut().zip(&other.entries) {
            *o -= e;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.nrows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, col: &[f64]) {
        assert_eq!(col.len(), self.nrows);
        for (r, &v) in col.iter().enumerate() {
            self[(r, c)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.entries[r * self.ncols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.entries[r * self.ncols + c]
    }
}

/// LU factorization with partial pivoting of a square dense matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

/// Relative pivot tolerance: a pivot below `1e-14 * max|A|` is treated as singular.
const PIVOT_RTOL: f64 = 1e-14;

pub fn dense_lu_factor(a: &DenseMatrix) -> Result<LuFactors, Error> {
    if a.nrows != a.ncols {
        return Err(Error::Invalid(format!(
            "LU requires a square matrix, got {}x{}",
            a.nrows, a.ncols
        )));
    }
    let n = a.nrows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_mag = lu[(k, k)].abs();
        for r in k + 1..n {
            let mag = lu[(r, k)].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag <= PIVOT_RTOL * scale {
            return Err(Error::SingularMatrix { pivot_row: k });
        }
        if pivot_row != k {
            for c in 0..n {
                let tmp = lu[(k, c)];
                lu[(k, c)] = lu[(pivot_row, c)];
                lu[(pivot_row, c)] = tmp;
            }
            perm.swap(k, pivot_row);
        }
        let inv = 1.0 / lu[(k, k)];
        for r in k + 1..n {
            let factor = lu[(r, k)] * inv;
            lu[(r, k)] = factor;
            for c in k + 1..n {
                let contrib = factor * lu[(k, c)];
                lu[(r, c)] -= contrib;
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

pub fn dense_lu_solve(f: &LuFactors, b: &[f64]) -> Vec<f64> {
    let n = f.lu.nrows;
    assert_eq!(b.len(), n, "lu_solve: dimension mismatch");
    let mut x: Vec<f64> = f.perm.iter().map(|&p| b[p]).collect();
    for r in 1..n {
        for c in 0..r {
            x[r] -= f.lu[(r, c)] * x[c];
        }
    }
    for r in (0..n).rev() {
        for c in r + 1..n {
            x[r] -= f.lu[(r, c)] * x[c];
        }
        x[r] /= f.lu[(r, r)];
    }
    x
}

impl LuFactors {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        dense_lu_solve(self, b)
    }

    pub fn nrows(&self) -> usize {
        self.lu.nrows
    }
}

// ---------------------------------------------------------------------------
// Block partition
// ---------------------------------------------------------------------------

/// Contiguous row partition emulating the per-process block rows of a
/// distributed solve; blocks are non-empty and cover all rows exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    boundaries: Vec<usize>,
}

impl BlockPartition {
    /// Splits `nrows` into at most `blocks` near-equal contiguous blocks,
    /// merging down to one row per block when the level is smaller.
    pub fn even(nrows: usize, blocks: usize) -> Self {
        assert!(nrows > 0, "partition of an empty matrix");
        let p = blocks.clamp(1, nrows);
        let boundaries = (0..=p).map(|i| i * nrows / p).collect();
        Self { boundaries }
    }

    pub fn from_boundaries(boundaries: Vec<usize>) -> Result<Self, Error> {
        if boundaries.len() < 2 || boundaries[0] != 0 {
            return Err(Error::Invalid("partition must start at 0".into()));
        }
        if !boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invalid(
                "partition boundaries must be strictly increasing".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    pub fn num_blocks(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn nrows(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    /// Half-open row range of block `k`.
    pub fn block(&self, k: usize) -> std::ops::Range<usize> {
        self.boundaries[k]..self.boundaries[k + 1]
    }

    pub fn blocks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.num_blocks()).map(|k| self.block(k))
    }

    /// Block index owning row `r`.
    pub fn block_of(&self, r: usize) -> usize {
        match self.boundaries.binary_search(&r) {
            Ok(k) if k == self.num_blocks() => k - 1,
            Ok(k) => k,
            Err(k) => k - 1,
        }
    }
}
