//! Small dense complex linear algebra.
//!
//! Arrays in this crate have on the order of ten elements, so everything here
//! is plain row-major storage with textbook algorithms. Indexing follows the
//! `(row, column)` convention, `M[(i, l)]`.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Column vector of complex amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CVector(Vec<Complex64>);

impl CVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("vector entry"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![ZERO; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    /// Inner product `self^H other`.
    pub fn dot(&self, other: &CVector) -> Complex64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(x, y)| x.conj() * y).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> CVector {
        CVector(self.0.iter().map(|z| z * s).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: Complex64, other: &CVector) -> CVector {
        debug_assert_eq!(self.len(), other.len());
        CVector(self.0.iter().zip(&other.0).map(|(x, y)| x + s * y).collect())
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        self.add_scaled(-ONE, other)
    }

    pub fn conj(&self) -> CVector {
        CVector(self.0.iter().map(|z| z.conj()).collect())
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

impl From<CVector> for Vec<Complex64> {
    fn from(v: CVector) -> Self {
        v.0
    }
}

impl Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Dense complex matrix, row-major. Usually square; rectangular matrices show
/// up for stacked steering vectors.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for l in 0..self.cols {
                let z = self[(i, l)];
                write!(f, "{:>10.4}{:+.4}j ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entry"));
        }
        Ok(Self { rows: r, cols: c, data })
    }

    /// Stacks vectors as columns.
    pub fn from_columns(cols: &[CVector]) -> Result<Self> {
        let n = cols.first().map_or(0, CVector::len);
        let mut m = Self::zeros(n, cols.len());
        for (l, col) in cols.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
            for i in 0..n {
                m[(i, l)] = col[i];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, l: usize) -> CVector {
        CVector((0..self.rows).map(|i| self[(i, l)]).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for l in 0..self.cols {
                out[(l, i)] = self[(i, l)].conj();
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &CVector) -> Result<CVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok(CVector(
            (0..self.rows)
                .map(|i| {
                    let row = &self.data[i * self.cols..(i + 1) * self.cols];
                    row.iter().zip(x.iter()).map(|(m, v)| m * v).sum()
                })
                .collect(),
        ))
    }

    pub fn mul_mat(&self, other: &CMatrix) -> Result<CMatrix> {
        if other.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for l in 0..other.cols {
                    out[(i, l)] += a * other[(k, l)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<CMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// `self + scale * u u^H`. With a real `scale` the bump is built so that
    /// its (i, l) and (l, i) entries are exact conjugates.
    fn add_outer(&self, u: &CVector, scale: Complex64) -> CMatrix {
        let mut out = self.clone();
        let n = u.len();
        if scale.im == 0.0 {
            for i in 0..n {
                out[(i, i)] += scale.re * u[i].norm_sqr();
                for l in (i + 1)..n {
                    let z = scale.re * u[i] * u[l].conj();
                    out[(i, l)] += z;
                    out[(l, i)] += z.conj();
                }
            }
        } else {
            for i in 0..n {
                for l in 0..n {
                    out[(i, l)] += scale * u[i] * u[l].conj();
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, l): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + l]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, l): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + l]
    }
}

/// `x^H M y`.
pub fn quad_form(m: &CMatrix, x: &CVector, y: &CVector) -> Result<Complex64> {
    if x.len() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: x.len(),
        });
    }
    let my = m.mul_vec(y)?;
    Ok(x.dot(&my))
}

/// `M^{-1} + scale * u u^H`, the shape every Woodbury-form inverse update in
/// this crate reduces to.
pub fn rank1_inverse_update(m_inv: &CMatrix, u: &CVector, scale: Complex64) -> Result<CMatrix> {
    if !m_inv.is_square() {
        return Err(Error::NotSquare {
            rows: m_inv.rows(),
            cols: m_inv.cols(),
        });
    }
    if u.len() != m_inv.rows() {
        return Err(Error::DimensionMismatch {
            expected: m_inv.rows(),
            got: u.len(),
        });
    }
    if !scale.re.is_finite() || !scale.im.is_finite() {
        return Err(Error::NonFinite("rank-one update scale"));
    }
    Ok(m_inv.add_outer(u, scale))
}

/// `M + scale * u u^H`.
pub fn rank1_update(m: &CMatrix, u: &CVector, scale: Complex64) -> Result<CMatrix> {
    rank1_inverse_update(m, u, scale)
}

/// LU factors with partial pivoting, packed in one matrix.
struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
}

fn lu_factor(m: &CMatrix) -> Result<Lu> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let tol = 1e-14 * m.max_abs();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (p, pivot) =
            (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= tol || pivot == 0.0 {
            return Err(Error::Singular { pivot });
        }
        if p != k {
            for l in 0..n {
                let tmp = lu[(k, l)];
                lu[(k, l)] = lu[(p, l)];
                lu[(p, l)] = tmp;
            }
            perm.swap(k, p);
        }
        let d = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / d;
            lu[(i, k)] = f;
            for l in (k + 1)..n {
                let sub = f * lu[(k, l)];
                lu[(i, l)] -= sub;
            }
        }
    }
    Ok(Lu { lu, perm })
}

impl Lu {
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.perm.len();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let sub = self.lu[(i, k)] * x[k];
                x[i] -= sub;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let sub = self.lu[(i, k)] * x[k];
                x[i] -= sub;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Inverse by partial-pivot elimination. Fails when a pivot drops below
/// `1e-14 * max|M|`.
pub fn invert(m: &CMatrix) -> Result<CMatrix> {
    let lu = lu_factor(m)?;
    let n = m.rows();
    let mut out = CMatrix::zeros(n, n);
    let mut e = vec![ZERO; n];
    for l in 0..n {
        e.iter_mut().for_each(|z| *z = ZERO);
        e[l] = ONE;
        let col = lu.solve(&e);
        for i in 0..n {
            out[(i, l)] = col[i];
        }
    }
    Ok(out)
}

/// Solves `M x = b`.
pub fn solve(m: &CMatrix, b: &CVector) -> Result<CVector> {
    if b.len() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: b.len(),
        });
    }
    let lu = lu_factor(m)?;
    Ok(CVector(lu.solve(b.as_slice())))
}

/// `max_{i,l} |M(i,l) - conj(M(l,i))|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.rows().min(m.cols());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for l in i..n {
            worst = worst.max((m[(i, l)] - m[(l, i)].conj()).norm());
        }
    }
    worst
}

/// Cholesky-pivot test: every pivot must exceed `1e-12 * max|M|`.
pub fn is_positive_definite(m: &CMatrix) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let scale = m.max_abs();
    let defect = hermitian_defect(m);
    if defect > 1e-9 * scale.max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    let n = m.rows();
    let tol = 1e-12 * scale;
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d.is_nan() || d <= tol {
            return Ok(false);
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(true)
}

/// Least-squares fit of `b` by the columns of `a` (modified Gram-Schmidt with
/// one reorthogonalisation pass).
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub coefficients: Vec<Complex64>,
    pub residual: f64,
    /// Set when a column is numerically dependent on the preceding ones.
    pub rank_deficient: bool,
}

pub fn least_squares(a: &CMatrix, b: &CVector) -> Result<LeastSquares> {
    let (n, k) = (a.rows(), a.cols());
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut q: Vec<CVector> = Vec::with_capacity(k);
    let mut r = CMatrix::zeros(k, k);
    let mut rank_deficient = false;
    let col_scale = (0..k).map(|l| a.column(l).norm()).fold(0.0, f64::max);
    for l in 0..k {
        let mut v = a.column(l);
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&v);
                r[(i, l)] += c;
                v = v.add_scaled(-c, qi);
            }
        }
        let nv = v.norm();
        if nv <= 1e-10 * col_scale {
            rank_deficient = true;
            r[(l, l)] = ZERO;
            q.push(CVector::zeros(n));
        } else {
            r[(l, l)] = Complex64::new(nv, 0.0);
            q.push(v.scale(Complex64::new(1.0 / nv, 0.0)));
        }
    }
    let qtb: Vec<Complex64> = q.iter().map(|qi| qi.dot(b)).collect();
    let mut coeffs = vec![ZERO; k];
    for i in (0..k).rev() {
        if r[(i, i)] == ZERO {
            continue;
        }
        let mut s = qtb[i];
        for l in (i + 1)..k {
            s -= r[(i, l)] * coeffs[l];
        }
        coeffs[i] = s / r[(i, i)];
    }
    let fit = a.mul_vec(&CVector(coeffs.clone()))?;
    Ok(LeastSquares {
        residual: b.sub(&fit).norm(),
        coefficients: coeffs,
        rank_deficient,
    })
}
