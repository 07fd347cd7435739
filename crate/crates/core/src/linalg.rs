//! Factorizations backing the spectral machinery: one-sided Jacobi SVD for
//! complex matrices, Gram-Schmidt QR, and a small real dense matrix with LU
//! inversion for realified operators.

use num_complex::Complex;

use crate::matcore::{Field, Mat};
use crate::scalar::{re, Cx, Real};

/// Singular value decomposition `A = U diag(s) V*`.
///
/// For an `m x n` input with `k = min(m, n)`, `u` is `m x k`, `v` is `n x k`
/// (both with orthonormal columns) and `s` is nonincreasing. Square inputs
/// therefore get unitary `u` and `v`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: Mat<T>,
    pub s: Vec<T>,
    pub v: Mat<T>,
}

impl<T: Real> Svd<T> {
    pub fn reconstruct(&self) -> Mat<T> {
        let field = self.u.field().join(self.v.field());
        let k = self.s.len();
        let us = Mat::from_fn(self.u.rows(), k, field, |i, j| self.u[(i, j)] * self.s[j]);
        &us * &self.v.adjoint()
    }

    pub fn largest(&self) -> T {
        self.s.first().copied().unwrap_or_else(T::zero)
    }

    pub fn smallest(&self) -> T {
        self.s.last().copied().unwrap_or_else(T::zero)
    }
}

const MAX_SWEEPS: usize = 80;

/// Computes the SVD of any nonempty matrix.
pub fn svd<T: Real>(a: &Mat<T>) -> Svd<T> {
    if a.rows() < a.cols() {
        let t = svd_tall(&a.adjoint());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    svd_tall(a)
}

/// Singular values only, nonincreasing.
pub fn singular_values<T: Real>(a: &Mat<T>) -> Vec<T> {
    svd(a).s
}

fn svd_tall<T: Real>(a: &Mat<T>) -> Svd<T> {
    let (m, n) = (a.rows(), a.cols());
    let field = a.field();
    let zero = re(T::zero());
    // Column-major working copies of A·V and V.
    let mut w: Vec<Vec<Cx<T>>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<Cx<T>>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { re(T::one()) } else { zero }).collect())
        .collect();
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = zero;
                    for i in 0..m {
                        alpha = alpha + wp[i].norm_sqr();
                        beta = beta + wq[i].norm_sqr();
                        gamma = gamma + wp[i].conj() * wq[i];
                    }
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == T::zero() || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let ph = gamma / g;
                let zeta = (beta - alpha) / (g + g);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + T::one().hypot(zeta))
                } else {
                    -T::one() / (-zeta + T::one().hypot(zeta))
                };
                let c = T::one() / T::one().hypot(t);
                let s = c * t;
                rotate(&mut w, p, q, ph, c, s);
                rotate(&mut v, p, q, ph, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = w.iter().map(|col| col.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let smax = norms.iter().fold(T::zero(), |acc, &x| acc.max(x));
    let tiny = smax * eps * T::lit(m.max(n) as f64) + T::min_positive_value();
    let mut u = Mat::zeros(m, n, field);
    let mut vm = Mat::zeros(n, n, field);
    let mut s = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let sj = norms[j];
        s.push(sj);
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
        if sj > tiny {
            for i in 0..m {
                u[(i, k)] = w[j][i] / sj;
            }
        } else {
            missing.push(k);
        }
    }
    for k in missing {
        let col = orthogonal_completion(&u, k);
        u.set_column(k, &col);
    }
    Svd { u, s, v: vm }
}

fn rotate<T: Real>(cols: &mut [Vec<Cx<T>>], p: usize, q: usize, ph: Cx<T>, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    let phc = ph.conj();
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        // Phase-align column q with column p before the real rotation.
        let b = *xq * phc;
        *xp = a * c - b * s;
        *xq = a * s + b * c;
    }
}

/// A unit vector orthogonal to every nonzero column of `u` except column `skip`.
fn orthogonal_completion<T: Real>(u: &Mat<T>, skip: usize) -> Mat<T> {
    let m = u.rows();
    let field = u.field();
    let existing: Vec<Mat<T>> = (0..u.cols())
        .filter(|&j| j != skip)
        .map(|j| u.column(j))
        .filter(|c| c.vec_norm() > T::lit(0.5))
        .collect();
    let mut best: Option<(T, Mat<T>)> = None;
    for e in 0..m {
        let mut x = Mat::basis_vector(e, m, field);
        for _ in 0..2 {
            for c in &existing {
                let proj = crate::matcore::inner_unchecked(&x, c);
                x = &x - &c.scale(proj);
            }
        }
        let nrm = x.vec_norm();
        if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
            best = Some((nrm, x));
        }
    }
    let (_, x) = best.expect("nonempty basis");
    x.normalized()
}

/// QR factorization of a square matrix by classical Gram-Schmidt with
/// reorthogonalization. `R` has a positive real diagonal, which makes `Q`
/// Haar-distributed when `A` is Gaussian. Returns `None` when `A` is
/// numerically rank deficient.
pub fn qr<T: Real>(a: &Mat<T>) -> Option<(Mat<T>, Mat<T>)> {
    let n = a.n();
    let field = a.field();
    let mut q = Mat::zeros(n, n, field);
    let mut r = Mat::zeros(n, n, field);
    let scale = a.frobenius_norm();
    for j in 0..n {
        let mut x = a.column(j);
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj = crate::matcore::inner_unchecked(&x, &qk);
                r[(k, j)] = r[(k, j)] + proj;
                x = &x - &qk.scale(proj);
            }
        }
        let nrm = x.vec_norm();
        if nrm.is_nan() || nrm <= scale * T::lit(1e-10) {
            return None;
        }
        r[(j, j)] = re(nrm);
        q.set_column(j, &x.scale_real(T::one() / nrm));
    }
    Some((q, r))
}

/// Orthonormal basis of the column span of `a` (assumed full column rank).
pub fn orthonormalize<T: Real>(a: &Mat<T>) -> Mat<T> {
    let mut q = Mat::zeros(a.rows(), a.cols(), a.field());
    for j in 0..a.cols() {
        let mut x = a.column(j);
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj = crate::matcore::inner_unchecked(&x, &qk);
                x = &x - &qk.scale(proj);
            }
        }
        q.set_column(j, &x.normalized());
    }
    q
}

/// Dense real matrix, row-major. Used for realified operators.
#[derive(Clone, Debug, PartialEq)]
pub struct RMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> RMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_columns(rows: usize, cols: &[Vec<T>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, &x) in c.iter().enumerate() {
                m.data[i * cols.len() + j] = x;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: T) {
        self.data[i * self.cols + j] = x;
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn matmul(&self, other: &RMat<T>) -> RMat<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = RMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] = out.data[i * other.cols + j] + a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &RMat<T>) -> RMat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn sub(&self, other: &RMat<T>) -> RMat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn to_mat(&self) -> Mat<T> {
        Mat::from_fn(self.rows, self.cols, Field::R, |i, j| Complex::new(self.get(i, j), T::zero()))
    }

    pub fn singular_values(&self) -> Vec<T> {
        singular_values(&self.to_mat())
    }

    pub fn spectral_norm(&self) -> T {
        self.singular_values().first().copied().unwrap_or_else(T::zero)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<RMat<T>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = RMat::identity(n);
        let scale = self.max_abs();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a.get(i, k).abs().partial_cmp(&a.get(j, k).abs()).unwrap())
                .unwrap();
            let piv = a.get(p, k);
            if piv.is_nan() || piv.abs() <= scale * T::epsilon() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                    inv.data.swap(k * n + j, p * n + j);
                }
            }
            let pinv = T::one() / piv;
            for j in 0..n {
                a.data[k * n + j] = a.data[k * n + j] * pinv;
                inv.data[k * n + j] = inv.data[k * n + j] * pinv;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a.get(i, k);
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a.data[i * n + j] = a.data[i * n + j] - f * a.data[k * n + j];
                    inv.data[i * n + j] = inv.data[i * n + j] - f * inv.data[k * n + j];
                }
            }
        }
        Some(inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{gaussian_matrix, haar_unitary};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_svd(a: &Mat<f64>) {
        let d = svd(a);
        let scale = a.frobenius_norm().max(1.0);
        assert!(d.reconstruct().max_abs_diff(a) <= 1e-12 * scale);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(d.s.iter().all(|&x| x >= 0.0));
        assert!(d.u.unitarity_defect() < 1e-12, "U defect {}", d.u.unitarity_defect());
        assert!(d.v.unitarity_defect() < 1e-12);
    }

    #[test]
    fn svd_random_and_structured() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=7 {
            for field in [Field::R, Field::C] {
                check_svd(&gaussian_matrix(n, n, field, &mut rng));
            }
        }
        check_svd(&Mat::zeros(3, 3, Field::C));
        check_svd(&crate::matcore::unit(0, 1, 3, Field::R).unwrap());
        let u: Mat<f64> = haar_unitary(4, Field::C, &mut rng);
        let d = svd(&u);
        assert!(d.s.iter().all(|&x| (x - 1.0).abs() < 1e-13));
    }

    #[test]
    fn svd_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Mat<f64> = gaussian_matrix(5, 2, Field::C, &mut rng);
        let d = svd(&a);
        assert_eq!((d.u.rows(), d.u.cols(), d.v.rows()), (5, 2, 2));
        assert!(d.reconstruct().max_abs_diff(&a) < 1e-12);
        let b = a.adjoint();
        let d = svd(&b);
        assert!(d.reconstruct().max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn svd_real_stays_real() {
        let a = Mat::<f64>::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let d = svd(&a);
        assert_eq!(d.u.field(), Field::R);
        assert!(d.u.entries().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn svd_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Mat<f32> = gaussian_matrix(4, 4, Field::C, &mut rng);
        let d = svd(&a);
        assert!(d.reconstruct().max_abs_diff(&a) < 1e-5);
    }

    #[test]
    fn qr_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Mat<f64> = gaussian_matrix(5, 5, Field::C, &mut rng);
        let (q, r) = qr(&a).unwrap();
        assert!((&q * &r).max_abs_diff(&a) < 1e-12);
        assert!(q.unitarity_defect() < 1e-12);
        for i in 0..5 {
            assert!(r[(i, i)].im == 0.0 && r[(i, i)].re > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], re(0.0));
            }
        }
        let m = RMat::from_columns(3, &[vec![2.0, 1.0, 0.0], vec![0.0, 3.0, 1.0], vec![1.0, 0.0, 4.0]]);
        let inv = m.inverse().unwrap();
        assert!(m.matmul(&inv).sub(&RMat::identity(3)).max_abs() < 1e-14);
        let sing = RMat::from_columns(2, &[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(sing.inverse().is_none());
    }

    proptest! {
        #[test]
        fn svd_reconstructs(seed in any::<u64>(), n in 1usize..6, complex in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let field = if complex { Field::C } else { Field::R };
            let a: Mat<f64> = gaussian_matrix(n, n, field, &mut rng);
            let d = svd(&a);
            prop_assert!(d.reconstruct().max_abs_diff(&a) <= 1e-12 * a.frobenius_norm().max(1.0));
            prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
