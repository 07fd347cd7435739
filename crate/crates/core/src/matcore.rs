//! Dense real/complex matrices, the Frobenius inner product, tolerance
//! profiles and Haar sampling of unitary/orthogonal groups.
//!
//! A [`Mat`] always stores complex entries. Real matrices carry
//! [`Field::R`] and have identically zero imaginary parts, so every
//! routine is written once for both fields.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{cx, re, Cx, Real};

/// Scalar field of a matrix space: real or complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    R,
    C,
}

impl Field {
    /// Real dimension of the field (1 for R, 2 for C).
    pub fn real_dim(self) -> usize {
        match self {
            Field::R => 1,
            Field::C => 2,
        }
    }

    pub fn join(self, other: Field) -> Field {
        if self == Field::C || other == Field::C {
            Field::C
        } else {
            Field::R
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::R => f.write_str("R"),
            Field::C => f.write_str("C"),
        }
    }
}

/// Absolute/relative tolerances used by every approximate predicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceProfile {
    /// Entrywise absolute tolerance for matrix equality.
    pub eq_abs: f64,
    /// Relative tolerance for norm comparisons.
    pub eq_rel: f64,
    /// Relative singular-value gap used to extract clusters and subspaces.
    pub rank_gap: f64,
    pub seed: u64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            eq_abs: 1e-9,
            eq_rel: 1e-8,
            rank_gap: 1e-7,
            seed: 0x5eed_0f11_ea5e,
        }
    }
}

impl ToleranceProfile {
    /// Looser profile suitable for single-precision arithmetic.
    pub fn single_precision() -> Self {
        Self {
            eq_abs: 1e-4,
            eq_rel: 1e-4,
            rank_gap: 2e-3,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eq_abs", self.eq_abs),
            ("eq_rel", self.eq_rel),
            ("rank_gap", self.rank_gap),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidTolerance(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rank_gap < self.eq_abs {
            return Err(Error::InvalidTolerance(format!(
                "rank_gap ({}) must be at least eq_abs ({})",
                self.rank_gap, self.eq_abs
            )));
        }
        Ok(())
    }
}

/// Dense matrix with complex storage in row-major order.
///
/// Most of the crate works with square matrices; column vectors and
/// orthonormal bases are represented as `n x k` instances of the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize, field: Field) -> Self {
        Self {
            field,
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize, field: Field) -> Self {
        let mut m = Self::zeros(n, n, field);
        for i in 0..n {
            m[(i, i)] = re(T::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, field: Field, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = f(i, j);
                data.push(match field {
                    Field::R => re(z.re),
                    Field::C => z,
                });
            }
        }
        Self { field, rows, cols, data }
    }

    /// Builds a real matrix from row slices.
    pub fn from_real_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, Field::R, |i, j| re(rows[i][j]))
    }

    /// Builds a complex matrix from rows of `(re, im)` pairs.
    pub fn from_complex_rows(rows: &[&[(T, T)]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, Field::C, |i, j| cx(rows[i][j].0, rows[i][j].1))
    }

    pub fn from_entries(rows: usize, cols: usize, field: Field, data: Vec<Cx<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count");
        Self::from_fn(rows, cols, field, |i, j| data[i * cols + j])
    }

    pub fn diag_real(values: &[T], field: Field) -> Self {
        let n = values.len();
        Self::from_fn(n, n, field, |i, j| if i == j { re(values[i]) } else { re(T::zero()) })
    }

    pub fn column_vector(entries: &[Cx<T>], field: Field) -> Self {
        Self::from_fn(entries.len(), 1, field, |i, _| entries[i])
    }

    /// Standard basis vector `e_i` of length `n` (0-based).
    pub fn basis_vector(i: usize, n: usize, field: Field) -> Self {
        Self::from_fn(n, 1, field, |k, _| if k == i { re(T::one()) } else { re(T::zero()) })
    }

    pub fn field(&self) -> Field {
        self.field
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

    /// Square dimension. Panics on non-square matrices.
    pub fn n(&self) -> usize {
        assert!(self.is_square(), "expected a square matrix, got {}x{}", self.rows, self.cols);
        self.rows
    }

    pub fn entries(&self) -> &[Cx<T>] {
        &self.data
    }

    /// Reinterprets the matrix over `field`. Dropping to R discards imaginary parts.
    pub fn with_field(&self, field: Field) -> Self {
        Self::from_fn(self.rows, self.cols, field, |i, j| self[(i, j)])
    }

    pub fn map(&self, f: impl Fn(Cx<T>) -> Cx<T>) -> Self {
        Self::from_fn(self.rows, self.cols, self.field, |i, j| f(self[(i, j)]))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.field, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// Conjugate transpose (plain transpose over R).
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.field, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        let field = if s.im == T::zero() { self.field } else { Field::C };
        Self::from_fn(self.rows, self.cols, field, |i, j| self[(i, j)] * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn column(&self, j: usize) -> Self {
        Self::from_fn(self.rows, 1, self.field, |i, _| self[(i, j)])
    }

    pub fn set_column(&mut self, j: usize, v: &Mat<T>) {
        assert_eq!(v.rows, self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[(i, 0)];
        }
        if v.field == Field::C {
            self.field = Field::C;
        }
    }

    /// Selects a subset of columns.
    pub fn columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), self.field, |i, j| self[(i, idx[j])])
    }

    pub fn trace(&self) -> Cx<T> {
        (0..self.n()).map(|i| self[(i, i)]).fold(re(T::zero()), |a, b| a + b)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == T::zero() && z.im == T::zero())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat<T>) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }

    pub fn approx_eq(&self, other: &Mat<T>, tol: T) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.max_abs_diff(other) <= tol
    }

    /// Euclidean norm of a column vector (Frobenius norm in general).
    pub fn vec_norm(&self) -> T {
        self.frobenius_norm()
    }

    pub fn normalized(&self) -> Self {
        let nrm = self.vec_norm();
        if nrm == T::zero() {
            self.clone()
        } else {
            self.scale_real(T::one() / nrm)
        }
    }

    /// `‖U*U − I‖_F` for a square matrix.
    pub fn unitarity_defect(&self) -> T {
        let g = &self.adjoint() * self;
        (&g - &Mat::identity(self.cols, self.field)).frobenius_norm()
    }

    /// Determinant of a square matrix by partially pivoted elimination.
    pub fn det(&self) -> Cx<T> {
        let n = self.n();
        let mut a = self.data.clone();
        let mut det = re(T::one());
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].norm()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() {
                return re(T::zero());
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let piv = a[k * n + k];
            det = det * piv;
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                for j in k..n {
                    let v = a[k * n + j];
                    a[i * n + j] = a[i * n + j] - f * v;
                }
            }
        }
        det
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.rows, other.rows);
        let field = self.field.join(other.field);
        Self::from_fn(self.rows, self.cols + other.cols, field, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    /// Embeds `block` into the leading corner of an identity of size `n`.
    pub fn embed_leading(block: &Mat<T>, n: usize) -> Self {
        let k = block.n();
        assert!(k <= n);
        let mut m = Mat::identity(n, block.field);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = block[(i, j)];
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = Cx<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;

    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch");
        let field = self.field.join(rhs.field);
        let mut out = Mat::zeros(self.rows, rhs.cols, field);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d = *d + a * *b;
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &Mat<T> {
    type Output = Mat<T>;

    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        let field = self.field.join(rhs.field);
        Mat::from_fn(self.rows, self.cols, field, |i, j| self[(i, j)] + rhs[(i, j)])
    }
}

impl<T: Real> Sub for &Mat<T> {
    type Output = Mat<T>;

    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        let field = self.field.join(rhs.field);
        Mat::from_fn(self.rows, self.cols, field, |i, j| self[(i, j)] - rhs[(i, j)])
    }
}

impl<T: Real> Neg for &Mat<T> {
    type Output = Mat<T>;

    fn neg(self) -> Mat<T> {
        self.map(|z| -z)
    }
}

/// `E_{ij} = e_i e_j^*` in `M_n(F)`, 0-based indices.
pub fn unit<T: Real>(i: usize, j: usize, n: usize, field: Field) -> Result<Mat<T>> {
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange { i, j, n });
    }
    let mut m = Mat::zeros(n, n, field);
    m[(i, j)] = re(T::one());
    Ok(m)
}

fn check_same_space<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<()> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    if a.field != b.field {
        return Err(Error::FieldMismatch {
            expected: a.field.to_string(),
            found: b.field.to_string(),
        });
    }
    Ok(())
}

pub(crate) fn ensure_same_space<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<()> {
    check_same_space(a, b)
}

/// `⟨A, B⟩ = tr(B* A)`.
pub fn frobenius_inner<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<Cx<T>> {
    check_same_space(a, b)?;
    Ok(inner_unchecked(a, b))
}

/// Frobenius inner product without field checks (shapes must agree).
pub(crate) fn inner_unchecked<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Cx<T> {
    debug_assert_eq!((a.rows, a.cols), (b.rows, b.cols));
    a.data
        .iter()
        .zip(&b.data)
        .fold(re(T::zero()), |acc, (x, y)| acc + y.conj() * *x)
}

/// Standard Gaussian scalar over `field` (complex entries have unit total variance).
pub fn gaussian<T: Real, R: Rng + ?Sized>(field: Field, rng: &mut R) -> Cx<T>
where
    StandardNormal: Distribution<T>,
{
    match field {
        Field::R => re(StandardNormal.sample(rng)),
        Field::C => {
            let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
            let a: T = StandardNormal.sample(rng);
            let b: T = StandardNormal.sample(rng);
            cx(a * h, b * h)
        }
    }
}

pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, field: Field, rng: &mut R) -> Mat<T>
where
    StandardNormal: Distribution<T>,
{
    Mat::from_fn(rows, cols, field, |_, _| gaussian(field, rng))
}

/// Uniformly distributed unit vector in `F^n`.
pub fn random_unit_vector<T: Real, R: Rng + ?Sized>(n: usize, field: Field, rng: &mut R) -> Mat<T>
where
    StandardNormal: Distribution<T>,
{
    loop {
        let g = gaussian_matrix(n, 1, field, rng);
        if g.vec_norm() > T::lit(1e-6) {
            return g.normalized();
        }
    }
}

/// Haar-distributed element of `U_n(F)`: QR of a Gaussian matrix with the
/// diagonal of `R` made real positive.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(n: usize, field: Field, rng: &mut R) -> Mat<T>
where
    StandardNormal: Distribution<T>,
{
    loop {
        let g = gaussian_matrix(n, n, field, rng);
        if let Some((q, _)) = crate::linalg::qr(&g) {
            return q;
        }
    }
}

/// Haar unitary conditioned on its first column being `x` (unit vector).
pub fn unitary_with_first_column<T: Real, R: Rng + ?Sized>(x: &Mat<T>, rng: &mut R) -> Mat<T>
where
    StandardNormal: Distribution<T>,
{
    let n = x.rows();
    let field = x.field();
    loop {
        let mut g = gaussian_matrix(n, n, field, rng);
        g.set_column(0, x);
        if let Some((q, _)) = crate::linalg::qr(&g) {
            return q;
        }
    }
}

/// Wire form of a square matrix.
#[derive(Serialize, Deserialize)]
struct MatJson {
    field: Field,
    n: usize,
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

impl<T: Real> Serialize for Mat<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.is_square() {
            return Err(serde::ser::Error::custom("only square matrices are serializable"));
        }
        let n = self.rows;
        let part = |f: &dyn Fn(Cx<T>) -> T| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| f(self[(i, j)]).as_f64()).collect()).collect()
        };
        let json = MatJson {
            field: self.field,
            n,
            re: part(&|z| z.re),
            im: match self.field {
                Field::R => None,
                Field::C => Some(part(&|z| z.im)),
            },
        };
        json.serialize(serializer)
    }
}

impl<'de, T: Real> Deserialize<'de> for Mat<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = MatJson::deserialize(deserializer)?;
        let n = json.n;
        if n == 0 {
            return Err(D::Error::custom("n must be at least 1"));
        }
        let check = |rows: &Vec<Vec<f64>>, name: &str| -> std::result::Result<(), D::Error> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(D::Error::custom(format!("\"{name}\" must be a {n}x{n} array")));
            }
            Ok(())
        };
        check(&json.re, "re")?;
        match (&json.field, &json.im) {
            (Field::C, Some(im)) => check(im, "im")?,
            (Field::C, None) => return Err(D::Error::custom("field C requires \"im\"")),
            (Field::R, Some(im)) => {
                check(im, "im")?;
                if im.iter().flatten().any(|v| *v != 0.0) {
                    return Err(D::Error::custom("field R requires zero imaginary parts"));
                }
            }
            (Field::R, None) => {}
        }
        Ok(Mat::from_fn(n, n, json.field, |i, j| {
            let im = json.im.as_ref().map_or(0.0, |m| m[i][j]);
            cx(T::lit(json.re[i][j]), T::lit(im))
        }))
    }
}
