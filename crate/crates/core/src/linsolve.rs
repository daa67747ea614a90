//! Sparse linear solves with constraint elimination.
//!
//! Systems are reduced by eliminating pinned DOFs and, for mean-zero
//! pressures, augmented with one Lagrange-multiplier row and column. The
//! reduced matrix is factored by sparse LU with partial pivoting; every
//! solution is polished by iterative refinement until the residual contract
//! holds. Factors kept from an earlier, nearby matrix precondition GMRES.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use thiserror::Error;

use crate::fespace::Constraint;
use crate::sparse::{Pattern, SparseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("constraint on dof {dof} outside a system of dimension {dim}")]
    ConstraintRange { dof: usize, dim: usize },
    #[error("dof {dof} constrained to both {first} and {second}")]
    ConstraintConflict { dof: usize, first: f64, second: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("no convergence: relative residual {residual:e} above tolerance {tol:e}")]
    NotConverged { residual: f64, tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Relative residual bound `‖b − Ax‖ ≤ tol ‖b‖`.
    pub tol: f64,
    /// Maximum number of refinement sweeps, or of preconditioned GMRES
    /// iterations when factors are reused.
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 50 }
    }
}

/// Mean-zero side condition `Σ weightsⱼ x[offset + j] = 0`, enforced by a
/// Lagrange multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanZero {
    pub offset: usize,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub mean_zero: Option<MeanZero>,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self, SolveError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SolveError::Dimension(format!("matrix is {}x{}", matrix.nrows(), matrix.ncols())));
        }
        if rhs.len() != matrix.nrows() {
            return Err(SolveError::Dimension(format!(
                "right-hand side has length {}, matrix has {} rows",
                rhs.len(),
                matrix.nrows()
            )));
        }
        Ok(LinearSystem { matrix, rhs, constraints: Vec::new(), mean_zero: None })
    }

    pub fn with_constraints(mut self, constraints: &[Constraint]) -> Self {
        self.constraints.extend_from_slice(constraints);
        self
    }

    pub fn with_mean_zero(mut self, mean_zero: MeanZero) -> Self {
        self.mean_zero = Some(mean_zero);
        self
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

/// Result of [`apply_constraints`]: an unconstrained square system plus the
/// data needed to map its solution back.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub system: LinearSystem,
    free: Vec<usize>,
    prescribed: Vec<f64>,
    full_dim: usize,
}

impl ReducedSystem {
    /// Full-length solution (constrained entries set, multiplier dropped).
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = self.prescribed.clone();
        for (r, &f) in self.free.iter().enumerate() {
            x[f] = reduced[r];
        }
        x.truncate(self.full_dim);
        x
    }

    /// Lagrange multiplier of the mean-zero condition, if any.
    pub fn multiplier(&self, reduced: &[f64]) -> Option<f64> {
        (self.prescribed.len() > self.full_dim).then(|| reduced[reduced.len() - 1])
    }
}

/// Sorted, deduplicated constraints; conflicting duplicates are an error.
fn normalize_constraints(constraints: &[Constraint], dim: usize) -> Result<Vec<Constraint>, SolveError> {
    let mut sorted = constraints.to_vec();
    sorted.sort_by_key(|c| c.dof);
    let mut out: Vec<Constraint> = Vec::with_capacity(sorted.len());
    for c in sorted {
        if c.dof >= dim {
            return Err(SolveError::ConstraintRange { dof: c.dof, dim });
        }
        match out.last() {
            Some(prev) if prev.dof == c.dof => {
                if prev.value != c.value {
                    return Err(SolveError::ConstraintConflict { dof: c.dof, first: prev.value, second: c.value });
                }
            }
            _ => out.push(c),
        }
    }
    Ok(out)
}

fn augment(matrix: &SparseMatrix, mz: &MeanZero) -> Result<SparseMatrix, SolveError> {
    let n = matrix.nrows();
    if mz.offset + mz.weights.len() > n {
        return Err(SolveError::Dimension("mean-zero block exceeds system".into()));
    }
    let mut rows: Vec<Vec<usize>> = (0..n).map(|i| matrix.pattern().row(i).to_vec()).collect();
    for (j, _) in mz.weights.iter().enumerate() {
        rows[mz.offset + j].push(n);
    }
    rows.push((mz.offset..mz.offset + mz.weights.len()).collect());
    let pattern = Arc::new(Pattern::from_rows(n + 1, rows));
    let mut out = SparseMatrix::zeros(pattern.clone());
    let values = out.values_mut();
    for i in 0..n {
        for (j, v) in matrix.row_iter(i) {
            values[pattern.find(i, j).expect("copied entry")] = v;
        }
    }
    for (j, &w) in mz.weights.iter().enumerate() {
        values[pattern.find(mz.offset + j, n).expect("multiplier column")] = w;
        values[pattern.find(n, mz.offset + j).expect("multiplier row")] = w;
    }
    Ok(out)
}

/// Entry-level recipe for eliminating a fixed set of DOFs from matrices
/// sharing one pattern.
#[derive(Clone, Debug)]
struct Elimination {
    source: Arc<Pattern>,
    fixed: Vec<bool>,
    free: Vec<usize>,
    pattern: Arc<Pattern>,
    /// reduced entry index for each source entry kept
    kept: Vec<(usize, usize)>,
    /// (source entry, reduced row, source column) for couplings to fixed DOFs
    couplings: Vec<(usize, usize, usize)>,
}

impl Elimination {
    fn new(source: Arc<Pattern>, fixed: Vec<bool>) -> Self {
        let n = source.nrows();
        let mut new_index = vec![usize::MAX; n];
        let mut free = Vec::with_capacity(n);
        for i in 0..n {
            if !fixed[i] {
                new_index[i] = free.len();
                free.push(i);
            }
        }
        let mut row_ptr = Vec::with_capacity(free.len() + 1);
        let mut col_idx = Vec::new();
        let mut kept = Vec::new();
        let mut couplings = Vec::new();
        row_ptr.push(0);
        for (r, &i) in free.iter().enumerate() {
            let start = source.row_ptr()[i];
            for (off, &j) in source.row(i).iter().enumerate() {
                if fixed[j] {
                    couplings.push((start + off, r, j));
                } else {
                    kept.push((start + off, col_idx.len()));
                    col_idx.push(new_index[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let pattern = Arc::new(Pattern::from_csr(free.len(), row_ptr, col_idx));
        Elimination { source, fixed, free, pattern, kept, couplings }
    }

    fn matches(&self, pattern: &Arc<Pattern>, fixed: &[bool]) -> bool {
        (Arc::ptr_eq(&self.source, pattern) || *self.source == **pattern) && self.fixed == fixed
    }

    fn reduce_matrix(&self, matrix: &SparseMatrix) -> SparseMatrix {
        let mut out = SparseMatrix::zeros(self.pattern.clone());
        let src = matrix.values();
        let dst = out.values_mut();
        for &(k, r) in &self.kept {
            dst[r] = src[k];
        }
        out
    }

    fn reduce_rhs(&self, matrix: &SparseMatrix, rhs: &[f64], prescribed: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = self.free.iter().map(|&i| rhs[i]).collect();
        let src = matrix.values();
        for &(k, r, j) in &self.couplings {
            if prescribed[j] != 0.0 {
                b[r] -= src[k] * prescribed[j];
            }
        }
        b
    }
}

fn prepare(sys: &LinearSystem) -> Result<(SparseMatrix, Vec<f64>, Vec<bool>, Vec<f64>), SolveError> {
    let n = sys.dim();
    if sys.matrix.nrows() != n || sys.matrix.ncols() != n {
        return Err(SolveError::Dimension(format!("matrix {}x{}, rhs {}", sys.matrix.nrows(), sys.matrix.ncols(), n)));
    }
    let constraints = normalize_constraints(&sys.constraints, n)?;
    let (matrix, mut rhs) = match &sys.mean_zero {
        Some(mz) => {
            let mut rhs = sys.rhs.clone();
            rhs.push(0.0);
            (augment(&sys.matrix, mz)?, rhs)
        }
        None => (sys.matrix.clone(), sys.rhs.clone()),
    };
    let dim = rhs.len();
    let mut fixed = vec![false; dim];
    let mut prescribed = vec![0.0; dim];
    for c in &constraints {
        fixed[c.dof] = true;
        prescribed[c.dof] = c.value;
        rhs[c.dof] = c.value;
    }
    Ok((matrix, rhs, fixed, prescribed))
}

/// Eliminates constrained rows and columns (moving their contribution to
/// the right-hand side) and appends the mean-zero multiplier if requested.
pub fn apply_constraints(sys: &LinearSystem) -> Result<ReducedSystem, SolveError> {
    let (matrix, rhs, fixed, prescribed) = prepare(sys)?;
    let elim = Elimination::new(matrix.pattern().clone(), fixed);
    let reduced = elim.reduce_matrix(&matrix);
    let b = elim.reduce_rhs(&matrix, &rhs, &prescribed);
    Ok(ReducedSystem {
        system: LinearSystem { matrix: reduced, rhs: b, constraints: Vec::new(), mean_zero: None },
        free: elim.free,
        prescribed,
        full_dim: sys.dim(),
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64], r: &mut [f64]) -> f64 {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Sparse LU of a reduced matrix. The CSR arrays are read as the CSC
/// arrays of the transpose, which is factored; solves use the transposed
/// factors.
struct Factorization {
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
}

fn symbolic_of(a: &SparseMatrix) -> Result<SymbolicLu<usize>, SolveError> {
    let p = a.pattern();
    let sym = SymbolicSparseColMatRef::new_checked(p.nrows(), p.ncols(), p.row_ptr(), None, p.col_idx());
    SymbolicLu::try_new(sym).map_err(|e| SolveError::Singular(format!("symbolic analysis failed: {e:?}")))
}

impl Factorization {
    fn new(a: &SparseMatrix, symbolic: Option<SymbolicLu<usize>>) -> Result<Self, SolveError> {
        let zero = a.zero_rows();
        if let Some(&row) = zero.first() {
            return Err(SolveError::Singular(format!("{} zero rows (first: {row})", zero.len())));
        }
        let symbolic = match symbolic {
            Some(s) => s,
            None => symbolic_of(a)?,
        };
        let p = a.pattern();
        let sym = SymbolicSparseColMatRef::new_checked(p.nrows(), p.ncols(), p.row_ptr(), None, p.col_idx());
        let mat = SparseColMatRef::new(sym, a.values());
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat).map_err(|e| match e {
            LuError::SymbolicSingular { index } => SolveError::Singular(format!("no pivot at step {index}")),
            LuError::Generic(g) => SolveError::Singular(format!("{g:?}")),
        })?;
        Ok(Factorization { symbolic, lu })
    }

    fn apply_inverse(&self, v: &mut [f64]) {
        let n = v.len();
        self.lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(v, n, 1));
    }
}

/// Outcome of a refinement loop.
struct Refined {
    x: Vec<f64>,
    sweeps: usize,
}

/// Iterative refinement `x ← x + F⁻¹(b − Ax)` with `F` an LU of `A` or of a
/// nearby matrix.
fn refine(a: &SparseMatrix, b: &[f64], f: &Factorization, opts: &SolveOptions) -> Result<Refined, SolveError> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Refined { x: vec![0.0; n], sweeps: 0 });
    }
    let target = opts.tol * bnorm;
    let mut x = b.to_vec();
    f.apply_inverse(&mut x);
    let mut r = vec![0.0; n];
    let mut res = residual(a, &x, b, &mut r);
    let mut sweeps = 0;
    while !(res <= target) {
        if !res.is_finite() {
            return Err(SolveError::Singular("factorization produced non-finite values".into()));
        }
        if sweeps >= opts.max_iter {
            return Err(SolveError::NotConverged { residual: res / bnorm, tol: opts.tol });
        }
        f.apply_inverse(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        let prev = res;
        res = residual(a, &x, b, &mut r);
        sweeps += 1;
        // stagnation: further sweeps cannot help
        if res.is_finite() && res >= prev && !(res <= target) {
            return Err(SolveError::NotConverged { residual: res / bnorm, tol: opts.tol });
        }
    }
    Ok(Refined { x, sweeps })
}

/// Restart length of the preconditioned GMRES.
const RESTART: usize = 30;

/// Right-preconditioned restarted GMRES with `F⁻¹` as the preconditioner,
/// started from `F⁻¹b`. The reported count is the number of Krylov
/// iterations; the true residual is checked before returning.
fn gmres(a: &SparseMatrix, b: &[f64], f: &Factorization, opts: &SolveOptions) -> Result<Refined, SolveError> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Refined { x: vec![0.0; n], sweeps: 0 });
    }
    let target = opts.tol * bnorm;
    let mut x = b.to_vec();
    f.apply_inverse(&mut x);
    let mut r = vec![0.0; n];
    let mut res = residual(a, &x, b, &mut r);
    let mut iterations = 0;
    while !(res <= target) {
        if !res.is_finite() {
            return Err(SolveError::Singular("preconditioner produced non-finite values".into()));
        }
        if iterations >= opts.max_iter {
            return Err(SolveError::NotConverged { residual: res / bnorm, tol: opts.tol });
        }
        let m = RESTART.min(opts.max_iter - iterations);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = res;
        v.push(r.iter().map(|ri| ri / res).collect());
        let mut k = 0;
        while k < m {
            let mut zk = v[k].clone();
            f.apply_inverse(&mut zk);
            let mut wk = vec![0.0; n];
            a.mul_vec_into(&zk, &mut wk);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                let hik: f64 = wk.iter().zip(vi).map(|(a, b)| a * b).sum();
                h[i][k] = hik;
                wk.iter_mut().zip(vi).for_each(|(w, vv)| *w -= hik * vv);
            }
            let hk1 = norm(&wk);
            h[k + 1][k] = hk1;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            iterations += 1;
            if g[k].abs() <= 0.5 * target || hk1 == 0.0 {
                break;
            }
            v.push(wk.iter().map(|w| w / hk1).collect());
        }
        if k == 0 {
            return Err(SolveError::NotConverged { residual: res / bnorm, tol: opts.tol });
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(xv, zv)| *xv += yi * zv);
        }
        let prev = res;
        res = residual(a, &x, b, &mut r);
        if res.is_finite() && res >= prev && !(res <= target) {
            return Err(SolveError::NotConverged { residual: res / bnorm, tol: opts.tol });
        }
    }
    Ok(Refined { x, sweeps: iterations })
}

/// Exact elimination of unknowns whose diagonal block is itself diagonal,
/// such as element bubbles: `S = A_kk − A_ke D⁻¹ A_ek` on the kept set,
/// with the eliminated values recovered afterwards. The index plan is
/// built once per pattern and reused.
#[derive(Clone, Debug)]
pub struct DiagonalCondensation {
    source: Arc<Pattern>,
    kept: Vec<usize>,
    new_index: Vec<Option<usize>>,
    pattern: Arc<Pattern>,
    /// `(position in A, position in S)` of kept-kept entries.
    copy: Vec<(usize, usize)>,
    eliminated: Vec<Eliminated>,
}

#[derive(Clone, Debug)]
struct Eliminated {
    dof: usize,
    diag: usize,
    /// Kept entries of the row: `(position in A, reduced column)`.
    row: Vec<(usize, usize)>,
    /// Kept entries of the column: `(position in A, reduced row)`.
    col: Vec<(usize, usize)>,
    /// Positions in S of the `col × row` outer product, row-major.
    updates: Vec<usize>,
}

impl DiagonalCondensation {
    /// Plans the elimination of the DOFs flagged in `eliminate`. Fails if
    /// two of them are coupled or one lacks a diagonal entry.
    pub fn new(pattern: &Arc<Pattern>, eliminate: &[bool]) -> Result<Self, SolveError> {
        let n = pattern.nrows();
        if pattern.ncols() != n || eliminate.len() != n {
            return Err(SolveError::Dimension("condensation needs a square pattern and one flag per row".into()));
        }
        let mut new_index = vec![None; n];
        let mut kept = Vec::new();
        for i in 0..n {
            if !eliminate[i] {
                new_index[i] = Some(kept.len());
                kept.push(i);
            }
        }
        let mut col_entries: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for &i in &kept {
            for (off, &j) in pattern.row(i).iter().enumerate() {
                if eliminate[j] {
                    col_entries[j].push((pattern.row_ptr()[i] + off, new_index[i].expect("kept")));
                }
            }
        }
        let mut rows: Vec<Vec<usize>> = kept
            .iter()
            .map(|&i| pattern.row(i).iter().filter_map(|&j| new_index[j]).collect())
            .collect();
        let mut eliminated = Vec::new();
        for k in (0..n).filter(|&k| eliminate[k]) {
            let mut diag = None;
            let mut row = Vec::new();
            for (off, &j) in pattern.row(k).iter().enumerate() {
                let pos = pattern.row_ptr()[k] + off;
                match new_index[j] {
                    Some(nj) => row.push((pos, nj)),
                    None if j == k => diag = Some(pos),
                    None => {
                        return Err(SolveError::Dimension(format!("eliminated dofs {k} and {j} are coupled")))
                    }
                }
            }
            let diag = diag.ok_or_else(|| SolveError::Singular(format!("no diagonal entry for dof {k}")))?;
            let col = std::mem::take(&mut col_entries[k]);
            for &(_, i) in &col {
                rows[i].extend(row.iter().map(|&(_, j)| j));
            }
            eliminated.push(Eliminated { dof: k, diag, row, col, updates: Vec::new() });
        }
        let reduced = Arc::new(Pattern::from_rows(kept.len(), rows));
        for e in &mut eliminated {
            e.updates = e
                .col
                .iter()
                .flat_map(|&(_, i)| e.row.iter().map(move |&(_, j)| (i, j)))
                .map(|(i, j)| reduced.find(i, j).expect("fill entry"))
                .collect();
        }
        let copy = kept
            .iter()
            .flat_map(|&i| {
                let start = pattern.row_ptr()[i];
                pattern.row(i).iter().enumerate().filter_map(move |(off, &j)| Some((start + off, i, j)))
            })
            .filter_map(|(pos, i, j)| Some((pos, reduced.find(new_index[i]?, new_index[j]?)?)))
            .collect();
        Ok(DiagonalCondensation { source: pattern.clone(), kept, new_index, pattern: reduced, copy, eliminated })
    }

    /// Whether the plan applies to matrices with this pattern.
    pub fn matches(&self, pattern: &Arc<Pattern>) -> bool {
        Arc::ptr_eq(&self.source, pattern) || *self.source == **pattern
    }

    pub fn reduced_index(&self, dof: usize) -> Option<usize> {
        self.new_index.get(dof).copied().flatten()
    }

    pub fn reduced_dim(&self) -> usize {
        self.kept.len()
    }

    /// Schur complement and reduced right-hand side.
    pub fn reduce(&self, a: &SparseMatrix, b: &[f64]) -> Result<(SparseMatrix, Vec<f64>), SolveError> {
        if !self.matches(a.pattern()) || b.len() != a.nrows() {
            return Err(SolveError::Dimension("matrix does not match the condensation plan".into()));
        }
        let av = a.values();
        let mut values = vec![0.0; self.pattern.nnz()];
        for &(from, to) in &self.copy {
            values[to] += av[from];
        }
        let mut rhs: Vec<f64> = self.kept.iter().map(|&i| b[i]).collect();
        for e in &self.eliminated {
            let d = av[e.diag];
            if d == 0.0 || !d.is_finite() {
                return Err(SolveError::Singular(format!("zero pivot at eliminated dof {}", e.dof)));
            }
            let mut slot = e.updates.iter();
            for &(pi, i) in &e.col {
                let f = av[pi] / d;
                rhs[i] -= f * b[e.dof];
                for &(pj, _) in &e.row {
                    values[*slot.next().expect("update slot")] -= f * av[pj];
                }
            }
        }
        Ok((SparseMatrix::new(self.pattern.clone(), values), rhs))
    }

    /// Full solution from the reduced one.
    pub fn recover(&self, a: &SparseMatrix, b: &[f64], reduced: &[f64]) -> Vec<f64> {
        let av = a.values();
        let mut x = vec![0.0; a.nrows()];
        for (r, &i) in self.kept.iter().enumerate() {
            x[i] = reduced[r];
        }
        for e in &self.eliminated {
            let s: f64 = e.row.iter().map(|&(p, j)| av[p] * reduced[j]).sum();
            x[e.dof] = (b[e.dof] - s) / av[e.diag];
        }
        x
    }
}

/// Solves a single system with a fresh factorization.
pub fn solve(sys: &LinearSystem, opts: &SolveOptions) -> Result<Vec<f64>, SolveError> {
    let reduced = apply_constraints(sys)?;
    let a = &reduced.system.matrix;
    let f = Factorization::new(a, None)?;
    let refined = refine(a, &reduced.system.rhs, &f, opts)?;
    Ok(reduced.expand(&refined.x))
}

/// Solver for a sequence of systems with a common structure, such as one
/// equation across time steps.
///
/// The elimination map and symbolic factorization are reused while the
/// pattern and constraint set stay the same. With `reuse` enabled the
/// numeric factors are also kept and used to precondition GMRES on later
/// matrices; they are recomputed when convergence slows down. Results satisfy the same residual contract either way.
pub struct SequenceSolver {
    opts: SolveOptions,
    reuse: bool,
    elimination: Option<Elimination>,
    factorization: Option<Factorization>,
    stale: bool,
    factorizations: usize,
}

/// GMRES iterations above which kept factors are recomputed before the
/// next solve.
const REFACTOR_ITERATIONS: usize = 8;

impl SequenceSolver {
    pub fn new(opts: SolveOptions, reuse: bool) -> Self {
        SequenceSolver { opts, reuse, elimination: None, factorization: None, stale: true, factorizations: 0 }
    }

    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    /// Number of numeric factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn solve(&mut self, sys: &LinearSystem) -> Result<Vec<f64>, SolveError> {
        Ok(self.solve_with_multiplier(sys)?.0)
    }

    /// Also returns the mean-zero multiplier when the system has one.
    pub fn solve_with_multiplier(&mut self, sys: &LinearSystem) -> Result<(Vec<f64>, Option<f64>), SolveError> {
        let (matrix, rhs, fixed, prescribed) = prepare(sys)?;
        if !self.elimination.as_ref().is_some_and(|e| e.matches(matrix.pattern(), &fixed)) {
            self.elimination = Some(Elimination::new(matrix.pattern().clone(), fixed));
            self.factorization = None;
        }
        let elim = self.elimination.as_ref().expect("set above");
        let a = elim.reduce_matrix(&matrix);
        let b = elim.reduce_rhs(&matrix, &rhs, &prescribed);

        let mut x = None;
        if self.reuse && !self.stale {
            if let Some(f) = &self.factorization {
                if let Ok(r) = gmres(&a, &b, f, &self.opts) {
                    self.stale = r.sweeps > REFACTOR_ITERATIONS;
                    x = Some(r.x);
                }
            }
        }
        let x = match x {
            Some(x) => x,
            None => {
                let symbolic = self.factorization.take().map(|f| f.symbolic);
                let f = Factorization::new(&a, symbolic)?;
                self.factorizations += 1;
                let r = refine(&a, &b, &f, &self.opts)?;
                self.factorization = Some(f);
                self.stale = false;
                r.x
            }
        };
        let full_dim = sys.dim();
        let multiplier = (prescribed.len() > full_dim).then(|| x[x.len() - 1]);
        let mut full = prescribed;
        for (r, &i) in elim.free.iter().enumerate() {
            full[i] = x[r];
        }
        full.truncate(full_dim);
        Ok((full, multiplier))
    }
}
