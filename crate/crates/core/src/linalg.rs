//! Dense complex matrices for 2×2 and 4×4 operators.
//!
//! Storage is row-major and kept inline (no heap allocation up to 16
//! entries), so the master-equation right-hand side can be evaluated in a
//! tight loop without touching the allocator.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default tolerance on `max |a - a†|` for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues above this (negative) floor are clamped to zero before square roots.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: SmallVec<[C64; 16]>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        assert_eq!(entries.len(), rows * cols, "entry count must equal rows*cols");
        CMatrix { rows, cols, data: SmallVec::from_vec(entries) }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        CMatrix { rows, cols, data: SmallVec::from_elem(ZERO, rows * cols) }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Square matrix from real entries given row by row.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Self::from_fn(n, rows[0].len(), |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    /// Projector onto computational basis state `k` of an `n`-dimensional space.
    pub fn basis_projector(n: usize, k: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == k && j == k { ONE } else { ZERO })
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

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conj(&self) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|z| *z = z.conj());
        m
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|z| *z *= s);
        m
    }

    pub fn scale_real(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|z| *z *= s);
        m
    }

    /// `(a + a†) / 2`; the result is exactly Hermitian in floating point.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry of `|a - a†|`.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        out.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
        out
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product; block `(i, j)` of the result is `a[i, j] · b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows * b.rows, a.cols * b.cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    })
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.dagger()
}

/// Single-qubit operators in the local basis order `|e⟩, |g⟩`.
pub mod pauli {
    use super::{CMatrix, C64, I, ONE, ZERO};

    pub fn identity() -> CMatrix {
        CMatrix::identity(2)
    }

    pub fn sigma_x() -> CMatrix {
        CMatrix::new(2, 2, vec![ZERO, ONE, ONE, ZERO])
    }

    pub fn sigma_y() -> CMatrix {
        CMatrix::new(2, 2, vec![ZERO, -I, I, ZERO])
    }

    pub fn sigma_z() -> CMatrix {
        CMatrix::new(2, 2, vec![ONE, ZERO, ZERO, C64::new(-1.0, 0.0)])
    }

    /// Raising operator `|e⟩⟨g|`.
    pub fn sigma_plus() -> CMatrix {
        CMatrix::new(2, 2, vec![ZERO, ONE, ZERO, ZERO])
    }

    /// Lowering operator `|g⟩⟨e|`.
    pub fn sigma_minus() -> CMatrix {
        CMatrix::new(2, 2, vec![ZERO, ZERO, ONE, ZERO])
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues sorted descending and the unitary whose columns are the
/// matching eigenvectors.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let err = a.hermiticity_error();
    if err > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: err });
    }
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let tol = JACOBI_OFF_TOL * m.frobenius_norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].re.total_cmp(&m[(x, x)].re));
    let values = order.iter().map(|&k| m[(k, k)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((values, vectors))
}

fn off_diagonal_norm(m: &CMatrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

// Zeroes m[p, q] with U = diag-phase · real rotation acting on the (p, q) plane;
// m <- U† m U and v <- v U.
fn jacobi_rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r;
    let tau = (m[(q, q)].re - m[(p, p)].re) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let u_pp = C64::new(c, 0.0);
    let u_pq = C64::new(s, 0.0);
    let u_qp = phase.conj() * -s;
    let u_qq = phase.conj() * c;

    let n = m.rows();
    for k in 0..n {
        let (a, b) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = a * u_pp + b * u_qp;
        m[(k, q)] = a * u_pq + b * u_qq;
        let (a, b) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = a * u_pp + b * u_qp;
        v[(k, q)] = a * u_pq + b * u_qq;
    }
    for k in 0..n {
        let (a, b) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = u_pp.conj() * a + u_qp.conj() * b;
        m[(q, k)] = u_pq.conj() * a + u_qq.conj() * b;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
}

/// Real eigenvalues of a Hermitian matrix, sorted descending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    hermitian_eigen(a).map(|(values, _)| values)
}

/// Positive-semidefinite square root of a Hermitian PSD matrix.
///
/// Eigenvalues in `[-1e-9, 0)` are treated as zero; anything more negative is
/// rejected.
pub fn hermitian_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(a)?;
    let n = a.rows();
    let mut roots = Vec::with_capacity(n);
    for &lambda in &values {
        if lambda < -NEGATIVE_CLAMP {
            return Err(Error::NotPositive { eigenvalue: lambda });
        }
        roots.push(lambda.max(0.0).sqrt());
    }
    let s = CMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| vectors[(i, k)] * roots[k] * vectors[(j, k)].conj()).sum()
    });
    Ok(s.hermitian_part())
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square());
    let norm = a.frobenius_norm();
    let mut squarings = 0;
    while norm / f64::powi(2.0, squarings) > 0.5 {
        squarings += 1;
    }
    let scaled = a.scale_real(f64::powi(2.0, -squarings));
    let mut sum = CMatrix::identity(a.rows());
    let mut term = sum.clone();
    for k in 1..=30 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        sum += &term;
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(n: usize, vals: &[f64]) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| c(vals[2 * (i * n + j)], vals[2 * (i * n + j) + 1]))
    }

    fn random_hermitian(n: usize, vals: &[f64]) -> CMatrix {
        random_matrix(n, vals).hermitian_part()
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&pauli::identity(), &pauli::identity()), CMatrix::identity(4));
        let lifted = kron(&pauli::identity(), &pauli::sigma_minus());
        let mut expected = CMatrix::zeros(4, 4);
        expected[(1, 0)] = ONE;
        expected[(3, 2)] = ONE;
        assert_eq!(lifted, expected);
        assert_eq!(
            kron(&pauli::sigma_z(), &pauli::identity()),
            CMatrix::diag_real(&[1.0, 1.0, -1.0, -1.0])
        );
    }

    #[test]
    fn dagger_examples() {
        assert_eq!(dagger(&pauli::identity()), pauli::identity());
        assert_eq!(dagger(&pauli::sigma_minus()), pauli::sigma_plus());
        let ix = pauli::sigma_x().scale(I);
        assert_eq!(dagger(&ix), pauli::sigma_x().scale(-I));
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(hermitian_eigenvalues(&CMatrix::diag_real(&[1.0, 2.0])).unwrap(), vec![2.0, 1.0]);
        let sx = hermitian_eigenvalues(&pauli::sigma_x()).unwrap();
        assert!((sx[0] - 1.0).abs() < 1e-15 && (sx[1] + 1.0).abs() < 1e-15);
        let quarter = hermitian_eigenvalues(&CMatrix::diag_real(&[0.25; 4])).unwrap();
        assert_eq!(quarter, vec![0.25; 4]);
        let sy = hermitian_eigenvalues(&pauli::sigma_y()).unwrap();
        assert!((sy[0] - 1.0).abs() < 1e-15 && (sy[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn expm_of_pauli_rotation() {
        let theta = 0.7;
        let e = expm(&pauli::sigma_x().scale(I * theta));
        let expected = &CMatrix::identity(2).scale_real(theta.cos()) + &pauli::sigma_x().scale(I * theta.sin());
        assert!(e.max_abs_diff(&expected) < 1e-14);
        let big = expm(&CMatrix::diag_real(&[3.0, -2.0]));
        assert!((big[(0, 0)].re - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
        assert!((big[(1, 1)].re - (-2f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let e = hermitian_eigenvalues(&pauli::sigma_plus()).unwrap_err();
        assert!(matches!(e, Error::NotHermitian { .. }));
    }

    #[test]
    fn sqrt_examples() {
        assert!(hermitian_sqrt(&CMatrix::identity(4)).unwrap().max_abs_diff(&CMatrix::identity(4)) < 1e-15);
        let s = hermitian_sqrt(&CMatrix::diag_real(&[4.0, 1.0])).unwrap();
        assert!(s.max_abs_diff(&CMatrix::diag_real(&[2.0, 1.0])) < 1e-15);
        let proj = CMatrix::basis_projector(2, 0);
        assert!(hermitian_sqrt(&proj).unwrap().max_abs_diff(&proj) < 1e-15);
    }

    #[test]
    fn sqrt_clamps_tiny_negatives_and_rejects_large_ones() {
        let tiny = CMatrix::diag_real(&[1.0, -5e-10]);
        let s = hermitian_sqrt(&tiny).unwrap();
        assert_eq!(s[(1, 1)], ZERO);
        let bad = CMatrix::diag_real(&[1.0, -1e-6]);
        assert!(matches!(hermitian_sqrt(&bad), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn eigenvectors_reconstruct_matrix() {
        let a = CMatrix::new(
            4,
            4,
            vec![
                c(2.0, 0.0), c(0.3, 0.4), c(0.0, -1.0), c(0.1, 0.0),
                c(0.3, -0.4), c(1.0, 0.0), c(0.5, 0.5), c(0.0, 0.2),
                c(0.0, 1.0), c(0.5, -0.5), c(-1.0, 0.0), c(0.7, 0.0),
                c(0.1, 0.0), c(0.0, -0.2), c(0.7, 0.0), c(0.5, 0.0),
            ],
        );
        let (values, v) = hermitian_eigen(&a).unwrap();
        let recon = &(&v * &CMatrix::diag_real(&values)) * &v.dagger();
        assert!(recon.max_abs_diff(&a) < 1e-12);
        assert!((&v.dagger() * &v).max_abs_diff(&CMatrix::identity(4)) < 1e-12);
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
    }

    proptest! {
        #[test]
        fn kron_dimension_law(a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8)) {
            let (a, b) = (random_matrix(2, &a), random_matrix(2, &b));
            let k = kron(&a, &b);
            prop_assert_eq!((k.rows(), k.cols()), (4, 4));
            for i in 0..2 { for j in 0..2 { for r in 0..2 { for s in 0..2 {
                prop_assert_eq!(k[(2 * i + r, 2 * j + s)], a[(i, j)] * b[(r, s)]);
            }}}}
        }

        #[test]
        fn dagger_involution_and_product_rule(a in prop::collection::vec(-1.0f64..1.0, 32), b in prop::collection::vec(-1.0f64..1.0, 32)) {
            let (a, b) = (random_matrix(4, &a), random_matrix(4, &b));
            prop_assert_eq!(a.dagger().dagger(), a.clone());
            let lhs = (&a * &b).dagger();
            let rhs = &b.dagger() * &a.dagger();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn eigenvalue_sum_is_trace(vals in prop::collection::vec(-2.0f64..2.0, 32)) {
            let a = random_hermitian(4, &vals);
            let ev = hermitian_eigenvalues(&a).unwrap();
            prop_assert!((ev.iter().sum::<f64>() - a.trace().re).abs() < 1e-9);
        }

        #[test]
        fn sqrt_squares_back(vals in prop::collection::vec(-1.0f64..1.0, 32)) {
            let b = random_matrix(4, &vals);
            let a = (&b * &b.dagger()).hermitian_part();
            let s = hermitian_sqrt(&a).unwrap();
            prop_assert!(s.is_hermitian(1e-14));
            prop_assert!((&s * &s).max_abs_diff(&a) < 1e-8);
        }
    }
}
