//! CSR matrices and dense-vector kernels with serial and parallel backends.
//!
//! Every kernel computes each output element with the same sequential
//! accumulation regardless of backend, and the parallel backend only splits
//! the output into fixed contiguous row blocks. Results are therefore
//! deterministic per backend (and in practice identical across backends).
//!
//! Each backend carries a work counter: an SpMV adds `nnz`, an elementwise
//! kernel adds the vector length.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

fn check_len(expected: usize, got: usize) -> Result<(), SparseError> {
    if expected == got {
        Ok(())
    } else {
        Err(SparseError::DimensionMismatch { expected, got })
    }
}

/// Returns the index of the first NaN or infinity, if any.
pub fn ensure_finite(x: &[f64]) -> Result<(), SparseError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SparseError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn try_new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        let m = Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds from unordered `(row, col, value)` triplets; duplicates are
    /// summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, SparseError> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(SparseError::InvalidCsr(format!(
                "entry ({r}, {c}) outside a {rows}x{cols} matrix"
            )));
        }
        if let Some(i) = triplets.iter().position(|t| !t.2.is_finite()) {
            return Err(SparseError::NonFinite(i));
        }
        // Stable sort keeps duplicate accumulation order deterministic.
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        col_indices.shrink_to_fit();
        values.shrink_to_fit();
        Self::try_new(rows, cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), SparseError> {
        let bad = |m: &str| Err(SparseError::InvalidCsr(m.to_string()));
        if self.row_offsets.len() != self.rows + 1 {
            return bad("row offsets must have rows + 1 entries");
        }
        if self.row_offsets[0] != 0 || *self.row_offsets.last().unwrap() != self.col_indices.len() {
            return bad("row offsets must start at 0 and end at nnz");
        }
        if self.col_indices.len() != self.values.len() {
            return bad("column indices and values differ in length");
        }
        for r in 0..self.rows {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            if lo > hi {
                return bad("row offsets decrease");
            }
            let cols = &self.col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices must be strictly increasing within a row");
            }
            if cols.last().is_some_and(|&c| c >= self.cols) {
                return bad("column index out of range");
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values may be rewritten in place; the pattern is fixed.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_offsets[r + 1] - self.row_offsets[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |i| vals[i])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    /// Explicit transpose by counting sort; column order inside each new row
    /// follows the original row order.
    pub fn transpose(&self) -> SparseMatrix {
        let mut row_offsets = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            row_offsets[c + 1] += 1;
        }
        for i in 0..self.cols {
            row_offsets[i + 1] += row_offsets[i];
        }
        let mut next = row_offsets.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c];
                col_indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn heap_bytes(&self) -> usize {
        (self.row_offsets.capacity() + self.col_indices.capacity()) * std::mem::size_of::<usize>()
            + self.values.capacity() * std::mem::size_of::<f64>()
    }
}

/// A matrix stored together with its explicit transpose, so products in
/// both directions are row-parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub matrix: SparseMatrix,
    pub transpose: SparseMatrix,
}

impl SparseOperator {
    pub fn new(matrix: SparseMatrix) -> Self {
        let transpose = matrix.transpose();
        Self { matrix, transpose }
    }

    pub fn heap_bytes(&self) -> usize {
        self.matrix.heap_bytes() + self.transpose.heap_bytes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Serial,
    Parallel { workers: usize },
}

/// Outputs shorter than this run on the calling thread even in parallel
/// mode. The per-element arithmetic is identical either way.
const PARALLEL_MIN_LEN: usize = 8 * 1024;
const MIN_BLOCK: usize = 1024;

/// Execution backend for the kernels, with an exact work counter.
#[derive(Debug)]
pub struct Backend {
    kind: BackendKind,
    pool: Option<rayon::ThreadPool>,
    work: AtomicU64,
}

impl Backend {
    pub fn serial() -> Self {
        Self {
            kind: BackendKind::Serial,
            pool: None,
            work: AtomicU64::new(0),
        }
    }

    /// A backend with its own pool of `workers` threads.
    pub fn parallel(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("seqcfr-worker-{i}"))
            .build()?;
        Ok(Self {
            kind: BackendKind::Parallel { workers },
            pool: Some(pool),
            work: AtomicU64::new(0),
        })
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    /// Scalar operations performed since the last reset.
    pub fn work(&self) -> u64 {
        self.work.load(Ordering::Relaxed)
    }

    pub fn reset_work(&self) {
        self.work.store(0, Ordering::Relaxed);
    }

    fn count(&self, n: usize) {
        self.work.fetch_add(n as u64, Ordering::Relaxed);
    }

    /// Runs `f(first_index, block)` over a fixed partition of `out`.
    fn for_blocks<F>(&self, out: &mut [f64], f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        match (&self.pool, self.kind) {
            (Some(pool), BackendKind::Parallel { workers }) if out.len() >= PARALLEL_MIN_LEN => {
                let block = out.len().div_ceil(workers * 4).max(MIN_BLOCK);
                pool.install(|| {
                    out.par_chunks_mut(block)
                        .enumerate()
                        .for_each(|(i, chunk)| f(i * block, chunk));
                });
            }
            _ => f(0, out),
        }
    }

    /// `y = M x`
    pub fn spmv_into(&self, m: &SparseMatrix, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        check_len(m.cols, x.len())?;
        check_len(m.rows, y.len())?;
        self.for_blocks(y, |start, out| {
            for (i, yi) in out.iter_mut().enumerate() {
                *yi = row_dot(m, start + i, x);
            }
        });
        self.count(m.nnz());
        Ok(())
    }

    /// `y += M x`
    pub fn spmv_acc(&self, m: &SparseMatrix, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        check_len(m.cols, x.len())?;
        check_len(m.rows, y.len())?;
        self.for_blocks(y, |start, out| {
            for (i, yi) in out.iter_mut().enumerate() {
                *yi += row_dot(m, start + i, x);
            }
        });
        self.count(m.nnz() + m.rows);
        Ok(())
    }

    /// `y = Mᵀ x`, using the stored transpose.
    pub fn spmv_t_into(&self, op: &SparseOperator, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        self.spmv_into(&op.transpose, x, y)
    }

    /// `out = x + y`
    pub fn add(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), SparseError> {
        self.zip2(x, y, out, |a, b| a + b)
    }

    /// `out = x - y`
    pub fn sub(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), SparseError> {
        self.zip2(x, y, out, |a, b| a - b)
    }

    /// `out = x ⊙ y`
    pub fn hadamard_mul(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), SparseError> {
        self.zip2(x, y, out, |a, b| a * b)
    }

    /// `out = x ⊘ y`, taking `fallback[i]` wherever `y[i] == 0`.
    pub fn hadamard_div_or_default(
        &self,
        x: &[f64],
        y: &[f64],
        fallback: &[f64],
        out: &mut [f64],
    ) -> Result<(), SparseError> {
        check_len(x.len(), fallback.len())?;
        check_len(x.len(), y.len())?;
        check_len(x.len(), out.len())?;
        self.for_blocks(out, |start, o| {
            for (i, oi) in o.iter_mut().enumerate() {
                let k = start + i;
                *oi = if y[k] == 0.0 { fallback[k] } else { x[k] / y[k] };
            }
        });
        self.count(x.len());
        Ok(())
    }

    /// `y += a x`
    pub fn axpy(&self, a: f64, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        check_len(x.len(), y.len())?;
        self.for_blocks(y, |start, o| {
            for (i, oi) in o.iter_mut().enumerate() {
                *oi += a * x[start + i];
            }
        });
        self.count(x.len());
        Ok(())
    }

    /// `x = a x`
    pub fn scale(&self, a: f64, x: &mut [f64]) {
        let n = x.len();
        self.for_blocks(x, |_, o| o.iter_mut().for_each(|v| *v *= a));
        self.count(n);
    }

    /// `out[i] = src[idx[i]]`
    pub fn gather(&self, src: &[f64], idx: &[usize], out: &mut [f64]) -> Result<(), SparseError> {
        check_len(idx.len(), out.len())?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= src.len()) {
            return Err(SparseError::DimensionMismatch {
                expected: src.len(),
                got: bad + 1,
            });
        }
        self.for_blocks(out, |start, o| {
            for (i, oi) in o.iter_mut().enumerate() {
                *oi = src[idx[start + i]];
            }
        });
        self.count(idx.len());
        Ok(())
    }

    /// `out = max(x, 0)`
    pub fn positive_part(&self, x: &[f64], out: &mut [f64]) -> Result<(), SparseError> {
        self.map(x, out, |v| if v > 0.0 { v } else { 0.0 })
    }

    /// `out[i] = f(x[i])`
    pub fn map<F>(&self, x: &[f64], out: &mut [f64], f: F) -> Result<(), SparseError>
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        check_len(x.len(), out.len())?;
        self.for_blocks(out, |start, o| {
            for (i, oi) in o.iter_mut().enumerate() {
                *oi = f(x[start + i]);
            }
        });
        self.count(x.len());
        Ok(())
    }

    /// `x[i] = f(x[i])`
    pub fn map_in_place<F>(&self, x: &mut [f64], f: F)
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let n = x.len();
        self.for_blocks(x, |_, o| o.iter_mut().for_each(|v| *v = f(*v)));
        self.count(n);
    }

    fn zip2<F>(&self, x: &[f64], y: &[f64], out: &mut [f64], f: F) -> Result<(), SparseError>
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        check_len(x.len(), y.len())?;
        check_len(x.len(), out.len())?;
        self.for_blocks(out, |start, o| {
            for (i, oi) in o.iter_mut().enumerate() {
                *oi = f(x[start + i], y[start + i]);
            }
        });
        self.count(x.len());
        Ok(())
    }
}

#[inline]
fn row_dot(m: &SparseMatrix, r: usize, x: &[f64]) -> f64 {
    let lo = m.row_offsets[r];
    let hi = m.row_offsets[r + 1];
    let mut acc = 0.0;
    for k in lo..hi {
        acc += m.values[k] * x[m.col_indices[k]];
    }
    acc
}

/// `M x` as a new vector.
pub fn spmv(m: &SparseMatrix, x: &[f64], backend: &Backend) -> Result<Vec<f64>, SparseError> {
    let mut y = vec![0.0; m.rows()];
    backend.spmv_into(m, x, &mut y)?;
    Ok(y)
}

/// `Mᵀ x` as a new vector, through the stored transpose.
pub fn spmv_t(op: &SparseOperator, x: &[f64], backend: &Backend) -> Result<Vec<f64>, SparseError> {
    let mut y = vec![0.0; op.matrix.cols()];
    backend.spmv_t_into(op, x, &mut y)?;
    Ok(y)
}
