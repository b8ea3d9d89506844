//! Row-compressed sparse matrices and the monolithic linear solve.
//!
//! General systems use a sparse LU with partial pivoting (faer); saddle-point
//! systems use a symmetric indefinite factorization of the sign-flipped
//! matrix. Both are followed by iterative refinement until the relative
//! residual contract is met.

use std::io::Write;
use std::ops::Range;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::prelude::*;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, CholeskySymbolicParams, SymmetricOrdering};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.entries.push((r, c, v));
    }

    pub fn extend(&mut self, other: &TripletBuilder) {
        self.entries.extend_from_slice(&other.entries);
    }

    pub fn build(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.rows, self.cols, &self.entries)
    }
}

/// CSR matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps the summation order deterministic
            scratch.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let c = scratch[i].0;
                let mut s = 0.0;
                while i < scratch.len() && scratch[i].0 == c {
                    s += scratch[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(s);
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let t: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(n, m, &t)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets());
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let t: Vec<_> = rows
            .clone()
            .flat_map(|i| {
                let (c0, c1, r0) = (cols.start, cols.end, rows.start);
                self.row(i)
                    .filter(move |&(j, _)| j >= c0 && j < c1)
                    .map(move |(j, v)| (i - r0, j - c0, v))
                    .collect::<Vec<_>>()
            })
            .collect();
        Self::from_triplets(rows.len(), cols.len(), &t)
    }

    /// Copy with rows `from..` multiplied by −1.
    pub fn rows_negated_from(&self, from: usize) -> Self {
        let mut out = self.clone();
        for i in from.min(self.nrows)..self.nrows {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] = -out.values[k];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Symmetric permutation `P A Pᵀ` with `perm[i]` the new index of row i.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (perm[i], perm[j], v)).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// MatrixMarket coordinate (general, real) dump.
    pub fn write_matrix_market<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factorization {
    Lu,
    /// Symmetric indefinite LBLᵀ with Bunch–Kaufman pivoting inside supernodes.
    Lblt,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    /// ‖A x − b‖ / ‖b‖ (zero when b = 0).
    pub residual: f64,
    pub refinements: usize,
    pub factorization: Factorization,
}

const MAX_REFINEMENTS: usize = 8;

fn check_inputs(a: &SparseMatrix, b: &[f64], rel_tol: f64) -> Result<()> {
    if a.nrows != a.ncols || b.len() != a.nrows {
        return Err(Error::InvalidParameter {
            name: "A",
            reason: format!("expected square system, got {}x{} with rhs {}", a.nrows, a.ncols, b.len()),
        });
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidParameter { name: "rel_tol", reason: format!("must lie in (0, 1), got {rel_tol}") });
    }
    Ok(())
}

/// Iterative refinement around an approximate inverse.
fn refine(
    a: &SparseMatrix,
    b: &[f64],
    rel_tol: f64,
    factorization: Factorization,
    solve_with: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Solution> {
    let bnorm = norm2(b);
    let mut x = solve_with(b);
    let residual_of = |x: &[f64]| -> Vec<f64> { a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let mut r = residual_of(&x);
    let mut res = norm2(&r) / bnorm;
    if !res.is_finite() {
        return Err(Error::Singular("factorization produced non-finite values".into()));
    }
    let mut refinements = 0;
    // refine a little past the contract so logged residuals are well inside it
    while res > 0.01 * rel_tol && refinements < MAX_REFINEMENTS {
        let dx = solve_with(&r);
        let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let r_new = residual_of(&cand);
        let res_new = norm2(&r_new) / bnorm;
        refinements += 1;
        if !(res_new < res) {
            break;
        }
        x = cand;
        r = r_new;
        res = res_new;
    }
    if res > rel_tol {
        return Err(Error::SolverNotConverged { rel_tol, achieved: res, refinements });
    }
    Ok(Solution { x, residual: res, refinements, factorization })
}

fn zero_solution(n: usize, factorization: Factorization) -> Solution {
    Solution { x: vec![0.0; n], residual: 0.0, refinements: 0, factorization }
}

/// Solves `A x = b` with a sparse LU factorization and iterative refinement.
pub fn solve(a: &SparseMatrix, b: &[f64], rel_tol: f64) -> Result<Solution> {
    check_inputs(a, b, rel_tol)?;
    let n = a.nrows;
    if norm2(b) == 0.0 {
        return Ok(zero_solution(n, Factorization::Lu));
    }
    let trip: Vec<Triplet<usize, usize, f64>> = a.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Singular(format!("matrix construction failed: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
    refine(a, b, rel_tol, Factorization::Lu, |rhs| {
        let r = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let y = lu.solve(&r);
        (0..n).map(|i| y[(i, 0)]).collect()
    })
}

fn solve_lblt(a: &SparseMatrix, flipped: &SparseMatrix, b: &[f64], split: usize, rel_tol: f64) -> Result<Solution> {
    let n = a.nrows;
    let trip: Vec<Triplet<usize, usize, f64>> =
        flipped.triplets().into_iter().filter(|&(i, j, _)| i <= j).map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Singular(format!("matrix construction failed: {e:?}")))?;
    let symbolic = factorize_symbolic_cholesky(
        mat.symbolic(),
        Side::Upper,
        SymmetricOrdering::Amd,
        CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        },
    )
    .map_err(|e| Error::Singular(format!("symbolic factorization failed: {e:?}")))?;
    let mut values = vec![0.0; symbolic.len_val()];
    let mut subdiag = vec![0.0; n];
    let (mut fwd, mut inv) = (vec![0usize; n], vec![0usize; n]);
    let req = symbolic
        .factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default())
        .or(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
    let mut mem = MemBuffer::try_new(req).map_err(|_| Error::Singular("out of memory for LBLT workspace".into()))?;
    let factor = symbolic.factorize_numeric_intranode_lblt(
        &mut values,
        &mut subdiag,
        &mut fwd,
        &mut inv,
        mat.as_ref(),
        Side::Upper,
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    );
    let mem = std::cell::RefCell::new(MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq)));
    refine(a, b, rel_tol, Factorization::Lblt, |rhs| {
        let mut r = Mat::<f64>::from_fn(n, 1, |i, _| if i >= split { -rhs[i] } else { rhs[i] });
        factor.solve_in_place_with_conj(Conj::No, r.as_mut(), Par::Seq, MemStack::new(&mut mem.borrow_mut()));
        (0..n).map(|i| r[(i, 0)]).collect()
    })
}

/// Solves a saddle-point system whose rows from `split` on become symmetric
/// after a sign change ([[A, B], [−Bᵀ, C]] with A, C symmetric). Uses a
/// symmetric indefinite factorization of the sign-flipped matrix and falls
/// back to LU if the structure does not hold or the residual contract fails.
pub fn solve_saddle_point(a: &SparseMatrix, b: &[f64], split: usize, rel_tol: f64) -> Result<Solution> {
    check_inputs(a, b, rel_tol)?;
    if norm2(b) == 0.0 {
        return Ok(zero_solution(a.nrows, Factorization::Lblt));
    }
    let flipped = a.rows_negated_from(split);
    let asym = flipped.add(&flipped.transpose().scaled(-1.0)).max_abs();
    if asym <= 1e-12 * flipped.max_abs() {
        if let Ok(sol) = solve_lblt(a, &flipped, b, split, rel_tol) {
            return Ok(sol);
        }
    }
    solve(a, b, rel_tol)
}
