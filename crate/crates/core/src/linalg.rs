//! Compressed sparse row storage for assembled operators, with factorizations
//! delegated to `faer`.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Appends `scale * m` shifted by `(row_off, col_off)`.
    pub fn add_block(&mut self, m: &SparseMatrix, row_off: usize, col_off: usize, scale: f64) {
        for (i, j, v) in m.iter() {
            self.push(i + row_off, j + col_off, scale * v);
        }
    }

    /// Appends `scale * m^T` shifted by `(row_off, col_off)`.
    pub fn add_block_transposed(&mut self, m: &SparseMatrix, row_off: usize, col_off: usize, scale: f64) {
        for (i, j, v) in m.iter() {
            self.push(j + row_off, i + col_off, scale * v);
        }
    }

    pub fn build(self) -> SparseMatrix {
        // bucket by row, then a stable sort by column inside each row: equal
        // (i, j) entries keep insertion order, so mirrored contributions sum
        // in the same order
        let mut start = vec![0usize; self.nrows + 1];
        for &(i, _, _) in &self.entries {
            start[i + 1] += 1;
        }
        for i in 0..self.nrows {
            start[i + 1] += start[i];
        }
        let mut next = start.clone();
        let mut bucket = vec![(0usize, 0.0f64); self.entries.len()];
        for &(i, j, v) in &self.entries {
            bucket[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        for i in 0..self.nrows {
            let row = &mut bucket[start[i]..start[i + 1]];
            row.sort_by_key(|e| e.0);
            let mut last = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr[i + 1] = indices.len();
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |k| (i, self.indices[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = self.indptr[i]..self.indptr[i + 1];
        match self.indices[row.clone()].binary_search(&j) {
            Ok(k) => self.values[row.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension");
        (0..self.nrows)
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1])
                    .map(|k| self.values[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows, "transpose_matvec dimension");
        let mut out = vec![0.0; self.ncols];
        for (i, j, v) in self.iter() {
            out[j] += v * y[i];
        }
        out
    }

    /// `y^T A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        dot(y, &self.matvec(x))
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `sum_ij |A_ij| |y_i| |x_j|`, the scale against which cancellation in
    /// `y^T A x` is measured.
    pub fn abs_bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        self.iter().map(|(i, j, v)| (v * y[i] * x[j]).abs()).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.iter() {
            b.push(j, i, v);
        }
        b.build()
    }

    /// `alpha * self + beta * other`
    /// `alpha * self + beta * other` by a row-wise merge.
    pub fn add(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let cap = self.nnz() + other.nnz();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(cap);
        let mut values = Vec::with_capacity(cap);
        indptr.push(0);
        for i in 0..self.nrows {
            let (mut p, pe) = (self.indptr[i], self.indptr[i + 1]);
            let (mut q, qe) = (other.indptr[i], other.indptr[i + 1]);
            while p < pe || q < qe {
                let jp = if p < pe { self.indices[p] } else { usize::MAX };
                let jq = if q < qe { other.indices[q] } else { usize::MAX };
                if jp < jq {
                    indices.push(jp);
                    values.push(alpha * self.values[p]);
                    p += 1;
                } else if jq < jp {
                    indices.push(jq);
                    values.push(beta * other.values[q]);
                    q += 1;
                } else {
                    indices.push(jp);
                    values.push(alpha * self.values[p] + beta * other.values[q]);
                    p += 1;
                    q += 1;
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> =
            self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| Error::LinearSolve(format!("matrix conversion: {e:?}")))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Sparse LU factorization with partial pivoting.
pub struct LuSolver {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuSolver {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Dimension {
                context: "LU factorization",
                expected: a.nrows,
                actual: a.ncols,
            });
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        Ok(LuSolver { lu, n: a.nrows })
    }

    /// Numeric factorization reusing the ordering of an earlier matrix with
    /// the same sparsity pattern.
    pub fn factor_with(a: &SparseMatrix, symbolic: &SymbolicLu<usize>) -> Result<Self> {
        let m = a.to_faer()?;
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), m.as_ref())
            .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        Ok(LuSolver { lu, n: a.nrows })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Dimension {
                context: "LU solve",
                expected: self.n,
                actual: rhs.len(),
            });
        }
        let b = faer::Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution".into()));
        }
        Ok(out)
    }
}

/// Fill-reducing ordering and elimination structure of a sparsity pattern,
/// cached so that matrices sharing the pattern skip the symbolic phase.
#[derive(Default)]
pub struct SymbolicCache {
    entry: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl SymbolicCache {
    pub fn factor(&mut self, a: &SparseMatrix) -> Result<LuSolver> {
        if let Some((ptr, idx, sym)) = &self.entry {
            if *ptr == a.indptr && *idx == a.indices {
                return LuSolver::factor_with(a, sym);
            }
        }
        let m = a.to_faer()?;
        let sym = SymbolicLu::try_new(m.symbolic()).map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let lu = LuSolver::factor_with(a, &sym)?;
        self.entry = Some((a.indptr.clone(), a.indices.clone(), sym));
        Ok(lu)
    }
}

/// Solves and checks the relative residual; a large residual signals a
/// (numerically) singular system.
pub fn solve_checked(a: &SparseMatrix, lu: &LuSolver, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let x = lu.solve(rhs)?;
    let r = a.matvec(&x);
    let res: f64 = r.iter().zip(rhs).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let scale = norm2(rhs).max(a.max_abs() * norm2(&x)).max(f64::MIN_POSITIVE);
    if res > tol * scale {
        return Err(Error::SingularSystem(format!(
            "relative residual {:.3e} exceeds {:.1e}",
            res / scale,
            tol
        )));
    }
    Ok(x)
}

/// Eigenvalues of the symmetric-definite pencil `num v = lambda den v`
/// (ascending), by dense reduction with `den^{-1/2}`.
pub fn generalized_eigenvalues_dense(num: &SparseMatrix, den: &SparseMatrix) -> Result<Vec<f64>> {
    let n = num.nrows;
    if den.nrows != n || num.ncols != n || den.ncols != n {
        return Err(Error::Dimension {
            context: "generalized eigenproblem",
            expected: n,
            actual: den.nrows,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let d = den.to_dense();
    let evd = d
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearSolve(format!("eigendecomposition: {e:?}")))?;
    let u = evd.U();
    let s = evd.S();
    let mut inv_sqrt = Mat::<f64>::zeros(n, n);
    for k in 0..n {
        let lam = s[k];
        if !(lam > 0.0) {
            return Err(Error::LinearSolve(format!(
                "denominator matrix not positive definite (eigenvalue {lam:e})"
            )));
        }
        let f = 1.0 / lam.sqrt();
        for i in 0..n {
            for j in 0..n {
                inv_sqrt[(i, j)] += u[(i, k)] * f * u[(j, k)];
            }
        }
    }
    let c = &inv_sqrt * &num.to_dense() * &inv_sqrt;
    let c = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    c.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearSolve(format!("eigenvalues: {e:?}")))
}

/// Largest eigenvalue of `num v = lambda den v` by power iteration on
/// `den^{-1} num`, with the Rayleigh quotient as estimate.
pub fn largest_generalized_eigenvalue_power(
    num: &SparseMatrix,
    den: &SparseMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let n = num.nrows;
    if n == 0 {
        return Ok(0.0);
    }
    let lu = LuSolver::factor(den)?;
    // deterministic start vector with components in every direction
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = lu.solve(&num.matvec(&v))?;
        let nrm = den.quad(&w).sqrt();
        if nrm == 0.0 {
            return Ok(0.0);
        }
        v = w.iter().map(|x| x / nrm).collect();
        let next = num.quad(&v);
        if (next - lambda).abs() <= tol * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}
