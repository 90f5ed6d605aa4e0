//! Sparse operators on the truncated two-mode number basis.
//!
//! The basis index of `|n1, n2>` is `n1 * N + n2`. Density matrices are dense
//! and column-major, so `A rho` walks the CSR rows of `A` down each column of
//! `rho`, and `rho B` combines whole columns of `rho` through the CSC form of
//! `B`. Both products split over output columns and are deterministic.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const MIN_COLUMNS_PER_TASK: usize = 32;

/// CSR and CSC index arrays shared by operators with the same structure.
#[derive(Debug, PartialEq, Eq)]
pub struct Pattern {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Position in CSR order of each CSC entry.
    csc_to_csr: Vec<usize>,
}

impl Pattern {
    fn from_mask(dim: usize, mask: impl Fn(usize, usize) -> bool) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for r in 0..dim {
            col_idx.extend((0..dim).filter(|&c| mask(r, c)));
            row_ptr.push(col_idx.len());
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::with_capacity(col_idx.len());
        let mut csc_to_csr = Vec::with_capacity(col_idx.len());
        let mut cursor = row_ptr[..dim].to_vec();
        for c in 0..dim {
            for r in 0..dim {
                if cursor[r] < row_ptr[r + 1] && col_idx[cursor[r]] == c {
                    row_idx.push(r);
                    csc_to_csr.push(cursor[r]);
                    cursor[r] += 1;
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            col_ptr,
            row_idx,
            csc_to_csr,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
}

#[derive(Debug, Clone)]
pub struct SparseOp {
    pattern: Arc<Pattern>,
    /// Values in CSR order.
    vals: Vec<C64>,
}

impl PartialEq for SparseOp {
    fn eq(&self, other: &Self) -> bool {
        self.to_dense() == other.to_dense()
    }
}

impl SparseOp {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operators are square");
        let pattern = Pattern::from_mask(m.nrows(), |r, c| m[(r, c)] != ZERO);
        Self::on(Arc::new(pattern), m)
    }

    fn on(pattern: Arc<Pattern>, m: &DMatrix<C64>) -> Self {
        let vals = (0..pattern.dim)
            .flat_map(|r| {
                let cols = &pattern.col_idx[pattern.row_ptr[r]..pattern.row_ptr[r + 1]];
                cols.iter().map(move |&c| m[(r, c)])
            })
            .collect();
        Self { pattern, vals }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_dense(&DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let p = &self.pattern;
        let mut m = DMatrix::zeros(p.dim, p.dim);
        for r in 0..p.dim {
            for i in p.row_ptr[r]..p.row_ptr[r + 1] {
                m[(r, p.col_idx[i])] = self.vals[i];
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_dense(&self.to_dense().adjoint())
    }

    pub fn scale(&self, w: C64) -> Self {
        Self {
            pattern: self.pattern.clone(),
            vals: self.vals.iter().map(|v| v * w).collect(),
        }
    }

    fn from_rows(dim: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let mut entries: Vec<_> = rows
            .into_iter()
            .enumerate()
            .flat_map(|(r, row)| row.into_iter().map(move |(c, v)| (r, c, v)))
            .filter(|e| e.2 != ZERO)
            .collect();
        entries.sort_by_key(|e| (e.0, e.1));
        let mut lookup = std::collections::HashMap::with_capacity(entries.len());
        for (r, c, v) in &entries {
            lookup.insert((*r, *c), *v);
        }
        let pattern = Pattern::from_mask(dim, |r, c| lookup.contains_key(&(r, c)));
        let vals = entries.into_iter().map(|e| e.2).collect();
        Self {
            pattern: Arc::new(pattern),
            vals,
        }
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let p = &self.pattern;
        (p.row_ptr[r]..p.row_ptr[r + 1]).map(move |i| (p.col_idx[i], self.vals[i]))
    }

    fn rows(&self) -> impl Iterator<Item = impl Iterator<Item = (usize, C64)> + '_> + '_ {
        (0..self.dim()).map(move |r| self.row(r))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let dim = self.dim();
        let mut buf = vec![ZERO; dim];
        let rows = self
            .rows()
            .map(|row| {
                let mut touched = Vec::new();
                for (k, a) in row {
                    for (c, b) in other.row(k) {
                        if buf[c] == ZERO {
                            touched.push(c);
                        }
                        buf[c] += a * b;
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                touched
                    .into_iter()
                    .map(|c| (c, std::mem::replace(&mut buf[c], ZERO)))
                    .collect()
            })
            .collect();
        Self::from_rows(dim, rows)
    }

    pub fn add(&self, other: &Self) -> Self {
        let rows = self
            .rows()
            .zip(other.rows())
            .map(|(a, b)| {
                let mut row: Vec<(usize, C64)> = a.chain(b).collect();
                row.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
                for (c, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged
            })
            .collect();
        Self::from_rows(self.dim(), rows)
    }

    /// Largest absolute row sum.
    pub fn infinity_norm(&self) -> f64 {
        let p = &self.pattern;
        (0..p.dim)
            .map(|r| {
                self.vals[p.row_ptr[r]..p.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `out += w * self * rho`.
    pub fn add_left(&self, w: C64, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let p = &*self.pattern;
        let dim = p.dim;
        out.as_mut_slice()
            .par_chunks_mut(dim)
            .zip(rho.as_slice().par_chunks(dim))
            .with_min_len(MIN_COLUMNS_PER_TASK)
            .for_each(|(out_col, col)| {
                for r in 0..dim {
                    let mut acc = ZERO;
                    for i in p.row_ptr[r]..p.row_ptr[r + 1] {
                        acc += self.vals[i] * col[p.col_idx[i]];
                    }
                    out_col[r] += w * acc;
                }
            });
    }

    /// `out += w * rho * self`.
    pub fn add_right(&self, w: C64, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let p = &*self.pattern;
        let dim = p.dim;
        let src = rho.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(dim)
            .enumerate()
            .with_min_len(MIN_COLUMNS_PER_TASK)
            .for_each(|(c, out_col)| {
                for i in p.col_ptr[c]..p.col_ptr[c + 1] {
                    let v = w * self.vals[p.csc_to_csr[i]];
                    let k = p.row_idx[i];
                    for (o, s) in out_col.iter_mut().zip(&src[k * dim..(k + 1) * dim]) {
                        *o += v * s;
                    }
                }
            });
    }

    pub fn left(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        self.add_left(C64::new(1.0, 0.0), rho, &mut out);
        out
    }

    pub fn right(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        self.add_right(C64::new(1.0, 0.0), rho, &mut out);
        out
    }

    /// `self * rho * self^dag`.
    pub fn conjugate(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let half = self.left(rho);
        // (A X A^dag) = A (A X^dag)^dag with X = rho Hermitian
        self.left(&half.adjoint())
    }

    /// `tr(self * rho)`.
    pub fn expectation(&self, rho: &DMatrix<C64>) -> C64 {
        let p = &self.pattern;
        let mut acc = ZERO;
        for r in 0..p.dim {
            for i in p.row_ptr[r]..p.row_ptr[r + 1] {
                acc += self.vals[i] * rho[(p.col_idx[i], r)];
            }
        }
        acc
    }
}

/// Operators that share one sparsity pattern, so any linear combination is
/// a cheap sum of value arrays.
#[derive(Debug, Clone)]
pub struct SharedPattern {
    pattern: Arc<Pattern>,
    terms: Vec<Vec<C64>>,
}

impl SharedPattern {
    pub fn new(ops: &[&SparseOp]) -> Self {
        let dense: Vec<_> = ops.iter().map(|o| o.to_dense()).collect();
        let dim = dense[0].nrows();
        let pattern = Arc::new(Pattern::from_mask(dim, |r, c| {
            dense.iter().any(|m| m[(r, c)] != ZERO)
        }));
        let terms = dense
            .iter()
            .map(|m| SparseOp::on(pattern.clone(), m).vals)
            .collect();
        Self { pattern, terms }
    }

    pub fn combine(&self, coeffs: &[C64]) -> SparseOp {
        assert_eq!(coeffs.len(), self.terms.len());
        let mut vals = vec![ZERO; self.pattern.nnz()];
        for (w, t) in coeffs.iter().zip(&self.terms) {
            if *w != ZERO {
                for (v, x) in vals.iter_mut().zip(t) {
                    *v += w * x;
                }
            }
        }
        SparseOp {
            pattern: self.pattern.clone(),
            vals,
        }
    }
}

/// Single-mode annihilation operator truncated at `n` levels.
pub fn annihilation(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// `<m| x^2 |n>` of the untruncated oscillator, restricted to `n` levels.
pub fn position_squared(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |r, c| {
        let v = if r == c {
            r as f64 + 0.5
        } else if c == r + 2 {
            0.5 * ((r + 1) as f64 * (r + 2) as f64).sqrt()
        } else if r == c + 2 {
            0.5 * ((c + 1) as f64 * (c + 2) as f64).sqrt()
        } else {
            0.0
        };
        C64::new(v, 0.0)
    })
}

/// Quadratures and number operator of one mode, embedded in the two-mode
/// space.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub a: SparseOp,
    pub x: SparseOp,
    pub p: SparseOp,
    pub n: SparseOp,
    /// Exact `x^2` (differs from `x * x` in the top level).
    pub x_sq: SparseOp,
}

#[derive(Debug, Clone)]
pub struct Operators {
    /// Per-mode truncation.
    pub levels: usize,
    pub modes: [ModeOperators; 2],
    /// Symmetrised products `(r_i r_j + r_j r_i)/2` of `(x1, p1, x2, p2)`.
    sym: Vec<SparseOp>,
}

fn embed(single: &DMatrix<C64>, mode: usize) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(single.nrows(), single.ncols());
    if mode == 0 {
        single.kronecker(&id)
    } else {
        id.kronecker(single)
    }
}

pub fn build_operators(levels: usize) -> Result<Operators> {
    if levels < 2 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: levels as f64,
            reason: "need at least two levels per mode",
        });
    }
    let a = annihilation(levels);
    let ad = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = (&a + &ad) * C64::new(s, 0.0);
    let p = (&a - &ad) * C64::new(0.0, -s);
    let n = &ad * &a;
    let x_sq = position_squared(levels);
    let mode = |k| ModeOperators {
        a: SparseOp::from_dense(&embed(&a, k)),
        x: SparseOp::from_dense(&embed(&x, k)),
        p: SparseOp::from_dense(&embed(&p, k)),
        n: SparseOp::from_dense(&embed(&n, k)),
        x_sq: SparseOp::from_dense(&embed(&x_sq, k)),
    };
    let modes = [mode(0), mode(1)];
    let quad = [&modes[0].x, &modes[0].p, &modes[1].x, &modes[1].p];
    let half = C64::new(0.5, 0.0);
    let mut sym = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            sym.push(quad[i].mul(quad[j]).add(&quad[j].mul(quad[i])).scale(half));
        }
    }
    Ok(Operators { levels, modes, sym })
}

impl Operators {
    pub fn dim(&self) -> usize {
        self.levels * self.levels
    }

    /// The quadratures in the order `(x1, p1, x2, p2)`.
    pub fn quadratures(&self) -> [&SparseOp; 4] {
        [
            &self.modes[0].x,
            &self.modes[0].p,
            &self.modes[1].x,
            &self.modes[1].p,
        ]
    }

    pub fn symmetric_product(&self, i: usize, j: usize) -> &SparseOp {
        &self.sym[4 * i + j]
    }
}

/// `<m| D(beta) |n>` for one mode, from
/// `sqrt(n!/m!) beta^(m-n) e^(-|beta|^2/2) L_n^(m-n)(|beta|^2)` for `m >= n`
/// and the mirror relation for `m < n`.
pub fn displacement(levels: usize, beta: C64) -> DMatrix<C64> {
    let b2 = beta.norm_sqr();
    let envelope = (-0.5 * b2).exp();
    DMatrix::from_fn(levels, levels, |m, n| {
        let (hi, lo, z) = if m >= n {
            (m, n, beta)
        } else {
            (n, m, -beta.conj())
        };
        let k = hi - lo;
        // sqrt(lo!/hi!) without overflow
        let ratio = ((lo + 1)..=hi).map(|i| (i as f64).sqrt()).product::<f64>();
        z.powu(k as u32) * (envelope * laguerre(lo, k as f64, b2) / ratio)
    })
}

/// Generalised Laguerre polynomial `L_n^(alpha)(x)` by upward recurrence.
fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 + alpha - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}
