//! Compressed sparse row matrices.

use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("entry ({0}, {1}) out of bounds")]
    OutOfBounds(usize, usize),
}

/// Row offsets and sorted, deduplicated column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (need not be sorted).
    pub fn from_rows(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < ncols));
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Pattern { nrows: row_ptr.len() - 1, ncols, row_ptr, col_idx }
    }

    /// Wraps CSR arrays whose rows are already sorted and deduplicated.
    pub fn from_csr(ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        debug_assert_eq!(row_ptr.last().copied(), Some(col_idx.len()));
        debug_assert!(row_ptr.windows(2).all(|w| col_idx[w[0]..w[1]].windows(2).all(|c| c[0] < c[1])));
        Pattern { nrows: row_ptr.len() - 1, ncols, row_ptr, col_idx }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Position of `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(pattern: Arc<Pattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        SparseMatrix { pattern, values }
    }

    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let n = pattern.nnz();
        SparseMatrix { pattern, values: vec![0.0; n] }
    }

    /// Empty `nrows x ncols` matrix.
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self::zeros(Arc::new(Pattern::from_rows(ncols, vec![Vec::new(); nrows])))
    }

    pub fn identity(n: usize) -> Self {
        let p = Pattern::from_rows(n, (0..n).map(|i| vec![i]).collect());
        SparseMatrix { pattern: Arc::new(p), values: vec![1.0; n] }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, SparseError> {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(SparseError::OutOfBounds(i, j));
            }
            rows[i].push(j);
        }
        let pattern = Arc::new(Pattern::from_rows(ncols, rows));
        let mut m = SparseMatrix::zeros(pattern);
        for &(i, j, v) in triplets {
            let k = m.pattern.find(i, j).expect("entry present");
            m.values[k] += v;
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), ncols, &t).expect("in bounds")
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols()]; self.nrows()];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row_iter(i) {
                row[j] += v;
            }
        }
        d
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in rp[i]..rp[i + 1] {
                acc += self.values[k] * x[ci[k]];
            }
            *yi = acc;
        }
    }

    /// `y = Aᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows());
        let mut y = vec![0.0; self.ncols()];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row_iter(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let (nr, nc) = (self.nrows(), self.ncols());
        let mut count = vec![0usize; nc + 1];
        for &j in &self.pattern.col_idx {
            count[j + 1] += 1;
        }
        for j in 0..nc {
            count[j + 1] += count[j];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..nr {
            for (j, v) in self.row_iter(i) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        let pattern = Pattern { nrows: nc, ncols: nr, row_ptr, col_idx };
        SparseMatrix { pattern: Arc::new(pattern), values }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.scale(alpha);
        m
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern
    }

    /// `self += alpha * other`; patterns are merged when they differ.
    pub fn add_scaled(&mut self, alpha: f64, other: &SparseMatrix) {
        assert_eq!((self.nrows(), self.ncols()), (other.nrows(), other.ncols()));
        if alpha == 0.0 {
            return;
        }
        if self.same_pattern(other) {
            for (a, b) in self.values.iter_mut().zip(&other.values) {
                *a += alpha * b;
            }
            return;
        }
        *self = linear_combination(&[(1.0, &*self), (alpha, other)]);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over all entries.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let d = linear_combination(&[(1.0, self), (-1.0, &t)]);
        d.max_abs()
    }

    /// `max |A + Aᵀ|` over all entries.
    pub fn symmetric_part_max(&self) -> f64 {
        let t = self.transpose();
        linear_combination(&[(1.0, self), (1.0, &t)]).max_abs()
    }

    /// Rows without any stored entry, or whose stored entries are all zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.nrows()).filter(|&i| self.row_iter(i).all(|(_, v)| v == 0.0)).collect()
    }

    /// Block-diagonal `diag(self, self, ...)` with `copies` blocks.
    pub fn block_diagonal(&self, copies: usize) -> SparseMatrix {
        let blocks: Vec<Vec<Option<&SparseMatrix>>> =
            (0..copies).map(|b| (0..copies).map(|c| (b == c).then_some(self)).collect()).collect();
        block_matrix(&blocks).expect("consistent block sizes")
    }
}

/// `Σ αₖ Aₖ` over the union pattern, summed in the given order.
pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> SparseMatrix {
    let (nr, nc) = (terms[0].1.nrows(), terms[0].1.ncols());
    assert!(terms.iter().all(|(_, m)| m.nrows() == nr && m.ncols() == nc));
    if terms.iter().all(|(_, m)| m.same_pattern(terms[0].1)) {
        let mut values = vec![0.0; terms[0].1.nnz()];
        for (a, m) in terms {
            for (v, x) in values.iter_mut().zip(&m.values) {
                *v += a * x;
            }
        }
        return SparseMatrix { pattern: terms[0].1.pattern.clone(), values };
    }
    let rows: Vec<Vec<usize>> = (0..nr)
        .map(|i| terms.iter().flat_map(|(_, m)| m.pattern.row(i).iter().copied()).collect())
        .collect();
    let mut out = SparseMatrix::zeros(Arc::new(Pattern::from_rows(nc, rows)));
    for (a, m) in terms {
        for i in 0..nr {
            for (j, v) in m.row_iter(i) {
                let k = out.pattern.find(i, j).expect("union pattern");
                out.values[k] += a * v;
            }
        }
    }
    out
}

/// Assembles a matrix from a grid of optional blocks. Every block row must
/// contain at least one block fixing its height, and likewise for columns.
pub fn block_matrix(blocks: &[Vec<Option<&SparseMatrix>>]) -> Result<SparseMatrix, SparseError> {
    let nbr = blocks.len();
    let nbc = blocks.first().map_or(0, |r| r.len());
    let mut heights = vec![None; nbr];
    let mut widths = vec![None; nbc];
    for (bi, row) in blocks.iter().enumerate() {
        if row.len() != nbc {
            return Err(SparseError::Dimension("ragged block rows".into()));
        }
        for (bj, b) in row.iter().enumerate() {
            if let Some(m) = b {
                for (slot, val) in [(&mut heights[bi], m.nrows()), (&mut widths[bj], m.ncols())] {
                    match slot {
                        Some(h) if *h != val => {
                            return Err(SparseError::Dimension(format!("block ({bi}, {bj}) does not fit")))
                        }
                        _ => *slot = Some(val),
                    }
                }
            }
        }
    }
    let heights: Vec<usize> = heights
        .into_iter()
        .map(|h| h.ok_or_else(|| SparseError::Dimension("empty block row".into())))
        .collect::<Result<_, _>>()?;
    let widths: Vec<usize> = widths
        .into_iter()
        .map(|w| w.ok_or_else(|| SparseError::Dimension("empty block column".into())))
        .collect::<Result<_, _>>()?;
    let col_off: Vec<usize> = widths.iter().scan(0, |s, w| { let o = *s; *s += w; Some(o) }).collect();
    let ncols: usize = widths.iter().sum();

    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for (bi, row) in blocks.iter().enumerate() {
        for i in 0..heights[bi] {
            for (bj, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    for (j, v) in m.row_iter(i) {
                        col_idx.push(col_off[bj] + j);
                        values.push(v);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    let pattern = Pattern { nrows: row_ptr.len() - 1, ncols, row_ptr, col_idx };
    Ok(SparseMatrix { pattern: Arc::new(pattern), values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 2, 2.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn transpose_and_products() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 3.0, 4.0]]);
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![vec![1.0, 0.0], vec![2.0, 3.0], vec![0.0, 4.0]]);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(a.mul_transpose_vec(&[1.0, 1.0]), vec![1.0, 5.0, 4.0]);
    }

    #[test]
    fn combination_over_union_pattern() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = SparseMatrix::from_dense(&[vec![0.0, 2.0], vec![0.0, 1.0]]);
        let c = linear_combination(&[(2.0, &a), (-1.0, &b)]);
        assert_eq!(c.to_dense(), vec![vec![2.0, -2.0], vec![0.0, 1.0]]);
        let mut d = a.clone();
        d.add_scaled(1.0, &b);
        assert_eq!(d.to_dense(), vec![vec![1.0, 2.0], vec![0.0, 2.0]]);
    }

    #[test]
    fn blocks() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = SparseMatrix::from_dense(&[vec![5.0], vec![6.0]]);
        let bt = b.transpose();
        let z = SparseMatrix::empty(1, 1);
        let m = block_matrix(&[vec![Some(&a), Some(&b)], vec![Some(&bt), Some(&z)]]).unwrap();
        assert_eq!(
            m.to_dense(),
            vec![vec![1.0, 2.0, 5.0], vec![3.0, 4.0, 6.0], vec![5.0, 6.0, 0.0]]
        );
        let d = a.block_diagonal(2);
        assert_eq!(d.get(3, 2), 3.0);
        assert_eq!(d.get(0, 2), 0.0);
    }

    #[test]
    fn symmetry_measures() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert_eq!(a.symmetric_part_max(), 0.0);
        assert_eq!(a.asymmetry(), 2.0);
        assert_eq!(a.quadratic_form(&[0.3, -1.7]), 0.0);
    }
}
