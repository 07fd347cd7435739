//! Real-linear operators on `M_n(F)` stored as real matrices on realified
//! coordinates.
//!
//! Coordinates are ordered by entry `(k, l)` row-major. For `F = C` the real
//! part of entry `(k, l)` is immediately followed by its imaginary part, so a
//! complex operator is a `2n² x 2n²` real matrix and a real one is `n² x n²`.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::RMat;
use crate::matcore::{Field, Mat, ToleranceProfile};
use crate::scalar::{cx, Cx, Real};

/// Element of the real basis of `M_n(F)`: `E_kl` or `iE_kl` (0-based indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisElement {
    Re(usize, usize),
    Im(usize, usize),
}

impl BasisElement {
    /// The real basis of `M_n(F)` in coordinate order.
    pub fn all(n: usize, field: Field) -> Vec<BasisElement> {
        let mut out = Vec::with_capacity(field.real_dim() * n * n);
        for k in 0..n {
            for l in 0..n {
                out.push(BasisElement::Re(k, l));
                if field == Field::C {
                    out.push(BasisElement::Im(k, l));
                }
            }
        }
        out
    }

    pub fn indices(self) -> (usize, usize) {
        match self {
            BasisElement::Re(k, l) | BasisElement::Im(k, l) => (k, l),
        }
    }

    /// Position of this element in the realified coordinate vector.
    pub fn coordinate(self, n: usize, field: Field) -> usize {
        let (k, l) = self.indices();
        let base = field.real_dim() * (k * n + l);
        match self {
            BasisElement::Re(..) => base,
            BasisElement::Im(..) => base + 1,
        }
    }

    pub fn matrix<T: Real>(self, n: usize, field: Field) -> Mat<T> {
        let (k, l) = self.indices();
        let mut m = Mat::zeros(n, n, field);
        m[(k, l)] = match self {
            BasisElement::Re(..) => cx(T::one(), T::zero()),
            BasisElement::Im(..) => cx(T::zero(), T::one()),
        };
        m
    }
}

impl fmt::Display for BasisElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisElement::Re(k, l) => write!(f, "E[{k},{l}]"),
            BasisElement::Im(k, l) => write!(f, "iE[{k},{l}]"),
        }
    }
}

/// Realified coordinates of a square matrix in the operator basis.
pub fn realify<T: Real>(a: &Mat<T>, field: Field) -> Vec<T> {
    let n = a.n();
    let mut v = Vec::with_capacity(field.real_dim() * n * n);
    for z in a.entries() {
        v.push(z.re);
        if field == Field::C {
            v.push(z.im);
        }
    }
    v
}

/// Inverse of [`realify`].
pub fn derealify<T: Real>(v: &[T], n: usize, field: Field) -> Mat<T> {
    let d = field.real_dim();
    assert_eq!(v.len(), d * n * n, "coordinate vector has wrong length");
    Mat::from_fn(n, n, field, |k, l| {
        let base = d * (k * n + l);
        match field {
            Field::R => cx(v[base], T::zero()),
            Field::C => cx(v[base], v[base + 1]),
        }
    })
}

/// A real-linear operator on `M_n(F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatLinOp<T> {
    field: Field,
    n: usize,
    mat: RMat<T>,
}

/// Numerical bijectivity verdict with the extreme singular values of the realified matrix.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bijectivity {
    pub bijective: bool,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `sigma_max / sigma_min`, infinite for singular operators.
    pub condition: f64,
}

/// How an operator interacts with multiplication by `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearityTag {
    ComplexLinear,
    ConjugateTwisted,
    GeneralRealLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearityClass<T: Real> {
    pub tag: LinearityTag,
    /// Twisting scalar `μ` with `T(iX) = μT(X)` on `V3`; filled in by the 2x2 reducers.
    pub mu: Option<Cx<T>>,
}

impl<T: Real> MatLinOp<T> {
    /// Wraps a realified matrix. Its size must be `d n² x d n²`.
    pub fn from_real_matrix(field: Field, n: usize, mat: RMat<T>) -> Result<Self> {
        let dim = field.real_dim() * n * n;
        if n == 0 || mat.rows() != dim || mat.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "realified matrix must be {dim}x{dim}, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        Ok(Self { field, n, mat })
    }

    /// The unique real-linear operator with the given basis images.
    pub fn from_images(field: Field, n: usize, images: &[(BasisElement, Mat<T>)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch("n must be at least 1".into()));
        }
        let basis = BasisElement::all(n, field);
        let mut cols: Vec<Option<Vec<T>>> = vec![None; basis.len()];
        for (e, img) in images {
            let (k, l) = e.indices();
            if k >= n || l >= n || (field == Field::R && matches!(e, BasisElement::Im(..))) {
                return Err(Error::DimensionMismatch(format!("basis element {e} does not belong to M_{n}({field})")));
            }
            if !img.is_square() || img.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "image of {e} is {}x{}, expected {n}x{n}",
                    img.rows(),
                    img.cols()
                )));
            }
            if field == Field::R && img.field() == Field::C {
                return Err(Error::FieldMismatch { expected: "R".into(), found: "C".into() });
            }
            cols[e.coordinate(n, field)] = Some(realify(img, field));
        }
        let cols = cols
            .into_iter()
            .zip(&basis)
            .map(|(c, e)| c.ok_or_else(|| Error::MissingBasisImage(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { field, n, mat: RMat::from_columns(basis.len(), &cols) })
    }

    /// Operator defined by a closure, evaluated on the basis. Images are
    /// coerced into the operator's field.
    pub fn from_fn(field: Field, n: usize, f: impl Fn(&Mat<T>) -> Mat<T>) -> Self {
        let basis = BasisElement::all(n, field);
        let cols: Vec<Vec<T>> = basis.iter().map(|e| realify(&f(&e.matrix(n, field)), field)).collect();
        Self { field, n, mat: RMat::from_columns(basis.len(), &cols) }
    }

    pub fn identity(n: usize, field: Field) -> Self {
        Self { field, n, mat: RMat::identity(field.real_dim() * n * n) }
    }

    pub fn transposition(n: usize, field: Field) -> Self {
        Self::from_fn(field, n, |x| x.transpose())
    }

    /// Entrywise conjugation (the identity when `F = R`).
    pub fn conjugation(n: usize, field: Field) -> Self {
        Self::from_fn(field, n, |x| x.conj())
    }

    /// `X ↦ X*`.
    pub fn adjoint_map(n: usize, field: Field) -> Self {
        Self::from_fn(field, n, |x| x.adjoint())
    }

    /// `X ↦ AX`.
    pub fn left_mul(a: &Mat<T>) -> Self {
        let a = a.clone();
        Self::from_fn(a.field(), a.n(), move |x| &a * x)
    }

    /// `X ↦ XB`.
    pub fn right_mul(b: &Mat<T>) -> Self {
        let b = b.clone();
        Self::from_fn(b.field(), b.n(), move |x| x * &b)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension `d n²` of the underlying space.
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &RMat<T> {
        &self.mat
    }

    pub fn image(&self, e: BasisElement) -> Mat<T> {
        derealify(&self.mat.column(e.coordinate(self.n, self.field)), self.n, self.field)
    }

    /// All basis images in coordinate order.
    pub fn images(&self) -> Vec<(BasisElement, Mat<T>)> {
        BasisElement::all(self.n, self.field).into_iter().map(|e| (e, self.image(e))).collect()
    }

    fn check_input(&self, a: &Mat<T>) -> Result<()> {
        if !a.is_square() || a.n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "operator acts on {n}x{n} matrices, got {}x{}",
                a.rows(),
                a.cols(),
                n = self.n
            )));
        }
        if self.field == Field::R && a.field() == Field::C {
            return Err(Error::FieldMismatch { expected: "R".into(), found: "C".into() });
        }
        Ok(())
    }

    /// `T(A)`. Real matrices are accepted by complex operators.
    pub fn apply(&self, a: &Mat<T>) -> Result<Mat<T>> {
        self.check_input(a)?;
        Ok(derealify(&self.mat.matvec(&realify(a, self.field)), self.n, self.field))
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.field != other.field {
            return Err(Error::DimensionMismatch(format!(
                "operators act on M_{}({}) and M_{}({})",
                self.n, self.field, other.n, other.field
            )));
        }
        Ok(())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { field: self.field, n: self.n, mat: self.mat.matmul(&other.mat) })
    }

    pub fn scale(&self, s: T) -> Self {
        let dim = self.dim();
        let mut mat = self.mat.clone();
        for i in 0..dim {
            for j in 0..dim {
                mat.set(i, j, mat.get(i, j) * s);
            }
        }
        Self { mat, ..self.clone() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { mat: self.mat.sub(&other.mat), ..self.clone() })
    }

    pub fn bijectivity(&self, tol: &ToleranceProfile) -> Bijectivity {
        let s = self.mat.singular_values();
        let sigma_max = s.first().copied().unwrap_or_else(T::zero).as_f64();
        let sigma_min = s.last().copied().unwrap_or_else(T::zero).as_f64();
        let bijective = sigma_max > 0.0 && sigma_min > tol.rank_gap * sigma_max;
        let condition = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
        Bijectivity { bijective, sigma_max, sigma_min, condition }
    }

    /// Smallest singular value of the realified matrix exceeds `rank_gap` times the largest.
    pub fn is_bijective(&self, tol: &ToleranceProfile) -> bool {
        self.bijectivity(tol).bijective
    }

    /// Numerical rank of the realified matrix relative to `rank_gap`.
    pub fn rank(&self, tol: &ToleranceProfile) -> usize {
        let s = self.mat.singular_values();
        let s1 = s.first().copied().unwrap_or_else(T::zero);
        s.iter().filter(|&&x| x > T::lit(tol.rank_gap) * s1).count()
    }

    pub fn inverse(&self, tol: &ToleranceProfile) -> Result<Self> {
        let b = self.bijectivity(tol);
        if !b.bijective {
            let rel = if b.sigma_max > 0.0 { b.sigma_min / b.sigma_max } else { 0.0 };
            return Err(Error::SingularOperator(rel));
        }
        let inv = self.mat.inverse().ok_or(Error::SingularOperator(0.0))?;
        Ok(Self { mat: inv, ..self.clone() })
    }

    /// Classifies the interaction with `i` on the basis: complex-linear,
    /// conjugate-linear or neither.
    pub fn linearity_class(&self, tol: &ToleranceProfile) -> Result<LinearityClass<T>> {
        if self.field == Field::R {
            return Err(Error::Unsupported("linearity class is defined for complex operators only".into()));
        }
        let i = cx(T::zero(), T::one());
        let scale = self.mat.max_abs().max(T::one());
        let thr = T::lit(tol.eq_abs) * scale;
        let (mut linear, mut twisted) = (true, true);
        for k in 0..self.n {
            for l in 0..self.n {
                let te = self.image(BasisElement::Re(k, l));
                let tie = self.image(BasisElement::Im(k, l));
                let ite = te.scale(i);
                linear &= tie.max_abs_diff(&ite) <= thr;
                twisted &= tie.max_abs_diff(&(-&ite)) <= thr;
            }
        }
        let tag = if linear {
            LinearityTag::ComplexLinear
        } else if twisted {
            LinearityTag::ConjugateTwisted
        } else {
            LinearityTag::GeneralRealLinear
        };
        Ok(LinearityClass { tag, mu: None })
    }

    /// `‖T - S‖ / ‖T‖` in the operator norm of the realified matrices.
    pub fn relative_distance(&self, other: &Self) -> Result<T> {
        let diff = self.sub(other)?;
        let base = self.mat.spectral_norm();
        let d = diff.mat.spectral_norm();
        Ok(if base > T::zero() { d / base } else { d })
    }

    /// Largest entrywise discrepancy between basis images.
    pub fn basis_discrepancy(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.mat.max_abs())
    }

    /// `Φ ∘ T ∘ Φ` with `Φ(X) = X*`.
    pub fn adjoint_conjugate(&self) -> Self {
        let phi = Self::adjoint_map(self.n, self.field);
        phi.compose(self).and_then(|s| s.compose(&phi)).expect("same space")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct ImageJson<T: Real> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    re_kl: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im_kl: Option<[usize; 2]>,
    image: Mat<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct OpJson<T: Real> {
    field: Field,
    n: usize,
    images: Vec<ImageJson<T>>,
}

impl<T: Real> Serialize for MatLinOp<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let images = self
            .images()
            .into_iter()
            .map(|(e, image)| {
                let (k, l) = e.indices();
                match e {
                    BasisElement::Re(..) => ImageJson { re_kl: Some([k, l]), im_kl: None, image },
                    BasisElement::Im(..) => ImageJson { re_kl: None, im_kl: Some([k, l]), image },
                }
            })
            .collect();
        OpJson { field: self.field, n: self.n, images }.serialize(serializer)
    }
}

impl<'de, T: Real> Deserialize<'de> for MatLinOp<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = OpJson::<T>::deserialize(deserializer)?;
        let mut images = Vec::with_capacity(json.images.len());
        for (idx, img) in json.images.into_iter().enumerate() {
            let e = match (img.re_kl, img.im_kl) {
                (Some([k, l]), None) => BasisElement::Re(k, l),
                (None, Some([k, l])) => BasisElement::Im(k, l),
                _ => {
                    return Err(D::Error::custom(format!(
                        "images[{idx}] needs exactly one of \"re_kl\" or \"im_kl\""
                    )))
                }
            };
            if images.iter().any(|(seen, _)| *seen == e) {
                return Err(D::Error::custom(format!("duplicate image for {e}")));
            }
            images.push((e, img.image));
        }
        MatLinOp::from_images(json.field, json.n, &images).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::sigma;
    use crate::matcore::{gaussian_matrix, haar_unitary, unit};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = Mat<f64>;
    type Op = MatLinOp<f64>;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn images_of(n: usize, field: Field, f: impl Fn(&M) -> M) -> Vec<(BasisElement, M)> {
        BasisElement::all(n, field).into_iter().map(|e| (e, f(&e.matrix(n, field)))).collect()
    }

    #[test]
    fn construction_from_images() {
        let id = Op::from_images(Field::C, 2, &images_of(2, Field::C, |x| x.clone())).unwrap();
        assert_eq!(id, Op::identity(2, Field::C));
        let tr = Op::from_images(Field::C, 2, &images_of(2, Field::C, |x| x.transpose())).unwrap();
        let e12: M = unit(0, 1, 2, Field::C).unwrap();
        assert_eq!(tr.apply(&e12).unwrap(), unit(1, 0, 2, Field::C).unwrap());
        let conj = Op::from_images(Field::C, 2, &images_of(2, Field::C, |x| x.conj())).unwrap();
        let s3 = sigma::<f64>(3);
        assert!(conj.apply(&s3).unwrap().approx_eq(&(-&s3), 0.0));

        let mut partial = images_of(2, Field::C, |x| x.clone());
        partial.pop();
        assert!(matches!(Op::from_images(Field::C, 2, &partial), Err(Error::MissingBasisImage(_))));
        let bad = vec![(BasisElement::Re(0, 0), M::identity(3, Field::R))];
        assert!(matches!(Op::from_images(Field::R, 2, &bad), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: M = gaussian_matrix(3, 3, Field::C, &mut rng);
        assert!(Op::identity(3, Field::C).apply(&a).unwrap().approx_eq(&a, 0.0));
        let u: M = haar_unitary(3, Field::C, &mut rng);
        let v: M = haar_unitary(3, Field::C, &mut rng);
        let (uu, vv) = (u.clone(), v.clone());
        let t = Op::from_fn(Field::C, 3, move |x| (&(&uu * x) * &vv).scale_real(2.0));
        let want = (&(&u * &a) * &v).scale_real(2.0);
        assert!(t.apply(&a).unwrap().approx_eq(&want, 1e-10));
        assert!(Op::identity(2, Field::R).apply(&M::identity(2, Field::C)).is_err());
        assert!(Op::identity(2, Field::R).apply(&M::identity(3, Field::R)).is_err());
    }

    #[test]
    fn algebra() {
        let t = tol();
        let id = Op::identity(3, Field::C);
        assert_eq!(id.inverse(&t).unwrap(), id);
        // A ↦ tr(A)·I is rank one.
        for n in 2..5 {
            let deg = Op::from_fn(Field::R, n, |x| M::identity(x.n(), Field::R).scale(x.trace()));
            assert!(!deg.is_bijective(&t));
            assert_eq!(deg.rank(&t), 1);
            assert!(matches!(deg.inverse(&t), Err(Error::SingularOperator(_))));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: M = haar_unitary(3, Field::C, &mut rng);
        let v: M = haar_unitary(3, Field::C, &mut rng);
        let s = Op::left_mul(&u).compose(&Op::right_mul(&v)).unwrap();
        let s_inv = Op::left_mul(&u.adjoint()).compose(&Op::right_mul(&v.adjoint())).unwrap();
        let a: M = gaussian_matrix(3, 3, Field::C, &mut rng);
        let round = s_inv.compose(&s).unwrap().apply(&a).unwrap();
        assert!(round.approx_eq(&a, 1e-12));
        let inv = s.inverse(&t).unwrap();
        assert!(inv.compose(&s).unwrap().basis_discrepancy(&id).unwrap() <= t.eq_abs);
        assert!(s.bijectivity(&t).condition < 1.0 + 1e-9);
    }

    #[test]
    fn linearity_examples() {
        let t = tol();
        let lc = Op::identity(2, Field::C).linearity_class(&t).unwrap();
        assert_eq!(lc.tag, LinearityTag::ComplexLinear);
        let lc = Op::conjugation(2, Field::C).linearity_class(&t).unwrap();
        assert_eq!(lc.tag, LinearityTag::ConjugateTwisted);
        assert!(Op::identity(2, Field::R).linearity_class(&t).is_err());
        // Real-part projection is neither.
        let re = Op::from_fn(Field::C, 2, |x| x.map(|z| cx(z.re, 0.0)));
        assert_eq!(re.linearity_class(&t).unwrap().tag, LinearityTag::GeneralRealLinear);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: M = haar_unitary(2, Field::C, &mut rng);
        let op = Op::left_mul(&u);
        let s = serde_json::to_string(&op).unwrap();
        let back: Op = serde_json::from_str(&s).unwrap();
        assert_eq!(back, op);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["images"].as_array().unwrap().len(), 8);
        assert_eq!(v["images"][1]["im_kl"], serde_json::json!([0, 0]));

        let mut v2 = v.clone();
        v2["images"].as_array_mut().unwrap().pop();
        assert!(serde_json::from_value::<Op>(v2).is_err());
        let mut v3 = v;
        v3["images"][1]["re_kl"] = serde_json::json!([0, 0]);
        assert!(serde_json::from_value::<Op>(v3).is_err());
    }

    fn arb_op(field: Field, n: usize) -> impl Strategy<Value = Op> {
        let dim = field.real_dim() * n * n;
        prop::collection::vec(-2.0f64..2.0, dim * dim).prop_map(move |data| {
            let cols: Vec<Vec<f64>> = data.chunks(dim).map(|c| c.to_vec()).collect();
            Op::from_real_matrix(field, n, RMat::from_columns(dim, &cols)).unwrap()
        })
    }

    fn arb_mat(field: Field, n: usize) -> impl Strategy<Value = M> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n * n).prop_map(move |v| {
            M::from_fn(n, n, field, |i, j| cx(v[i * n + j].0, v[i * n + j].1))
        })
    }

    proptest! {
        #[test]
        fn apply_is_real_linear(op in arb_op(Field::C, 2), a in arb_mat(Field::C, 2),
                                b in arb_mat(Field::C, 2), s in -3.0f64..3.0, r in -3.0f64..3.0) {
            let lhs = op.apply(&(&a.scale_real(s) + &b.scale_real(r))).unwrap();
            let rhs = &op.apply(&a).unwrap().scale_real(s) + &op.apply(&b).unwrap().scale_real(r);
            let scale = a.frobenius_norm() + b.frobenius_norm();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * scale.max(1.0) * 50.0);
        }

        #[test]
        fn inverse_composes_to_identity(op in arb_op(Field::R, 2)) {
            let t = tol();
            if op.bijectivity(&t).condition < 1e6 {
                let inv = op.inverse(&t).unwrap();
                let id = Op::identity(2, Field::R);
                prop_assert!(inv.compose(&op).unwrap().basis_discrepancy(&id).unwrap() <= t.eq_abs);
            }
        }

        #[test]
        fn composition_matches_application(s in arb_op(Field::C, 2), t in arb_op(Field::C, 2),
                                           a in arb_mat(Field::C, 2)) {
            let st = s.compose(&t).unwrap();
            let direct = s.apply(&t.apply(&a).unwrap()).unwrap();
            prop_assert!(st.apply(&a).unwrap().max_abs_diff(&direct) <= 1e-10 * (1.0 + direct.max_abs()));
        }

        #[test]
        fn images_round_trip(op in arb_op(Field::C, 2)) {
            let back = Op::from_images(Field::C, 2, &op.images()).unwrap();
            prop_assert!(back.basis_discrepancy(&op).unwrap() <= 1e-9);
        }
    }
}
