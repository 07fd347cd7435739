//! Canonical preserver families and the quaternionic 2x2 machinery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::linop::MatLinOp;
use crate::matcore::{inner_unchecked, Field, Mat, ToleranceProfile};
use crate::scalar::{cx, re, Cx, Real};
use crate::specnorm::v1_v2_bases;

/// The unit `Σ_j` for `j ∈ {1, 2, 3}`:
/// `Σ1 = [[0, i], [i, 0]]`, `Σ2 = [[0, 1], [-1, 0]]`, `Σ3 = [[i, 0], [0, -i]]`.
///
/// Panics for any other `j`.
pub fn sigma<T: Real>(j: usize) -> Mat<T> {
    let (o, z) = (T::one(), T::zero());
    match j {
        1 => Mat::from_complex_rows(&[&[(z, z), (z, o)], &[(z, o), (z, z)]]),
        2 => Mat::from_complex_rows(&[&[(z, z), (o, z)], &[(-o, z), (z, z)]]),
        3 => Mat::from_complex_rows(&[&[(z, o), (z, z)], &[(z, z), (z, -o)]]),
        _ => panic!("sigma index must be 1, 2 or 3, got {j}"),
    }
}

/// `{I, Σ1, Σ2, Σ3}`, a real basis of `V3`, each of Frobenius norm √2.
pub fn v3_basis<T: Real>() -> [Mat<T>; 4] {
    [Mat::identity(2, Field::C), sigma(1), sigma(2), sigma(3)]
}

/// The eight unitaries `I, Σ1, Σ2, Σ3, iI, iΣ1, iΣ2, iΣ3`, a real basis of `M2(C)`.
pub fn quaternion_unitaries<T: Real>() -> Vec<Mat<T>> {
    let i = cx(T::zero(), T::one());
    let base = v3_basis::<T>();
    base.iter().cloned().chain(base.iter().map(|b| b.scale(i))).collect()
}

/// Splits `Z = X + iY` with `X, Y ∈ V3`, returning the coordinates of `X`
/// and `Y` in the basis `{I, Σ1, Σ2, Σ3}`.
pub fn v3_split<T: Real>(z: &Mat<T>) -> ([T; 4], [T; 4]) {
    let z = z.with_field(Field::C);
    let i = cx(T::zero(), T::one());
    let two = T::lit(2.0);
    let mut x = [T::zero(); 4];
    let mut y = [T::zero(); 4];
    for (k, b) in v3_basis::<T>().iter().enumerate() {
        x[k] = inner_unchecked(&z, b).re / two;
        y[k] = inner_unchecked(&z, &b.scale(i)).re / two;
    }
    (x, y)
}

/// `Σ c_k B_k` over the basis `{I, Σ1, Σ2, Σ3}`.
pub fn v3_combine<T: Real>(c: &[T; 4]) -> Mat<T> {
    v3_basis::<T>()
        .iter()
        .zip(c)
        .fold(Mat::zeros(2, 2, Field::C), |acc, (b, &ck)| &acc + &b.scale_real(ck))
}

/// The four ways a sandwich map may act on its argument before multiplying.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Id,
    Transpose,
    Conj,
    ConjTranspose,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Id, Variant::Transpose, Variant::Conj, Variant::ConjTranspose];

    pub fn from_flags(conj: bool, transpose: bool) -> Self {
        match (conj, transpose) {
            (false, false) => Variant::Id,
            (false, true) => Variant::Transpose,
            (true, false) => Variant::Conj,
            (true, true) => Variant::ConjTranspose,
        }
    }

    pub fn has_conj(self) -> bool {
        matches!(self, Variant::Conj | Variant::ConjTranspose)
    }

    pub fn has_transpose(self) -> bool {
        matches!(self, Variant::Transpose | Variant::ConjTranspose)
    }

    pub fn apply<T: Real>(self, x: &Mat<T>) -> Mat<T> {
        match self {
            Variant::Id => x.clone(),
            Variant::Transpose => x.transpose(),
            Variant::Conj => x.conj(),
            Variant::ConjTranspose => x.adjoint(),
        }
    }
}

fn check_unitary<T: Real>(u: &Mat<T>, what: &str, tol: &ToleranceProfile) -> Result<()> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch(format!("{what} must be square")));
    }
    let defect = u.unitarity_defect();
    if defect > T::lit(tol.eq_abs * (u.n() as f64).max(1.0)) {
        return Err(Error::NotUnitary(defect.as_f64()));
    }
    Ok(())
}

/// `X ↦ r U φ(X) V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SandwichForm<T: Real> {
    pub r: T,
    pub u: Mat<T>,
    pub v: Mat<T>,
    pub variant: Variant,
}

impl<T: Real> SandwichForm<T> {
    pub fn new(r: T, u: Mat<T>, v: Mat<T>, variant: Variant, tol: &ToleranceProfile) -> Result<Self> {
        if r <= T::zero() || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
        }
        check_unitary(&u, "U", tol)?;
        check_unitary(&v, "V", tol)?;
        if u.n() != v.n() {
            return Err(Error::DimensionMismatch(format!("U is {0}x{0} but V is {1}x{1}", u.n(), v.n())));
        }
        let field = u.field().join(v.field());
        Ok(Self { r, u: u.with_field(field), v: v.with_field(field), variant })
    }

    pub fn field(&self) -> Field {
        self.u.field()
    }

    pub fn apply(&self, x: &Mat<T>) -> Mat<T> {
        (&(&self.u * &self.variant.apply(x)) * &self.v).scale_real(self.r)
    }

    pub fn to_op(&self) -> MatLinOp<T> {
        MatLinOp::from_fn(self.field(), self.u.n(), |x| self.apply(x))
    }
}

/// The operator `X ↦ r U φ(X) V` on `M_n(F)`, `F` being the field of `U` and `V`.
pub fn sandwich_op<T: Real>(
    r: T,
    u: &Mat<T>,
    v: &Mat<T>,
    variant: Variant,
    tol: &ToleranceProfile,
) -> Result<MatLinOp<T>> {
    Ok(SandwichForm::new(r, u.clone(), v.clone(), variant, tol)?.to_op())
}

/// `Φ_c(X)`: identity on `V1`, scaling by `c` on `V2`.
pub fn phi_c_apply<T: Real>(c: T, x: &Mat<T>) -> Mat<T> {
    let (v1, v2) = v1_v2_bases::<T>();
    let two = T::lit(2.0);
    let mut out = Mat::zeros(2, 2, Field::R);
    for b in &v1 {
        out = &out + &b.scale_real(inner_unchecked(x, b).re / two);
    }
    for b in &v2 {
        out = &out + &b.scale_real(c * inner_unchecked(x, b).re / two);
    }
    out
}

/// `Φ_c` on `M2(R)`.
pub fn phi_c<T: Real>(c: T) -> Result<MatLinOp<T>> {
    if c <= T::zero() || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    Ok(MatLinOp::from_fn(Field::R, 2, |x| phi_c_apply(c, x)))
}

/// `X ↦ γ · left · U Φ_c(X) Uᵀ` on `M2(R)`. For the product relation `left = I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PhiCForm<T: Real> {
    pub gamma: T,
    pub c: T,
    pub u: Mat<T>,
    pub left: Mat<T>,
}

impl<T: Real> PhiCForm<T> {
    pub fn new(gamma: T, c: T, u: Mat<T>, tol: &ToleranceProfile) -> Result<Self> {
        Self::with_left(gamma, c, u, Mat::identity(2, Field::R), tol)
    }

    pub fn with_left(gamma: T, c: T, u: Mat<T>, left: Mat<T>, tol: &ToleranceProfile) -> Result<Self> {
        if gamma == T::zero() || !gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be nonzero".into()));
        }
        if c <= T::zero() || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        for (m, name) in [(&u, "U"), (&left, "left factor")] {
            if m.field() != Field::R || m.rows() != 2 || m.cols() != 2 {
                return Err(Error::InvalidParameter(format!("{name} must be a real 2x2 matrix")));
            }
            check_unitary(m, name, tol)?;
        }
        Ok(Self { gamma, c, u, left })
    }

    pub fn apply(&self, x: &Mat<T>) -> Mat<T> {
        let inner = &(&self.u * &phi_c_apply(self.c, x)) * &self.u.transpose();
        (&self.left * &inner).scale_real(self.gamma)
    }

    pub fn to_op(&self) -> MatLinOp<T> {
        MatLinOp::from_fn(Field::R, 2, |x| self.apply(x))
    }
}

/// `L0(X + iY) = X + μY` for `X, Y ∈ V3`.
pub fn l0_apply<T: Real>(mu: Cx<T>, z: &Mat<T>) -> Mat<T> {
    let (x, y) = v3_split(z);
    &v3_combine(&x) + &v3_combine(&y).scale(mu)
}

/// `X ↦ (1/γ) · left · V* L0(U* X U) V` on `M2(C)`. For the product relation `left = I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MuTwistForm<T: Real> {
    pub gamma: Cx<T>,
    pub mu: Cx<T>,
    pub u: Mat<T>,
    pub v: Mat<T>,
    pub left: Mat<T>,
}

impl<T: Real> MuTwistForm<T> {
    pub fn new(gamma: Cx<T>, mu: Cx<T>, u: Mat<T>, v: Mat<T>, tol: &ToleranceProfile) -> Result<Self> {
        Self::with_left(gamma, mu, u, v, Mat::identity(2, Field::C), tol)
    }

    pub fn with_left(
        gamma: Cx<T>,
        mu: Cx<T>,
        u: Mat<T>,
        v: Mat<T>,
        left: Mat<T>,
        tol: &ToleranceProfile,
    ) -> Result<Self> {
        if gamma.norm() == T::zero() || !gamma.norm().is_finite() {
            return Err(Error::InvalidParameter("gamma must be nonzero".into()));
        }
        if mu.im == T::zero() || !mu.norm().is_finite() {
            return Err(Error::InvalidParameter(format!("mu must have nonzero imaginary part, got {mu}")));
        }
        for (m, name) in [(&u, "U"), (&v, "V"), (&left, "left factor")] {
            if m.rows() != 2 || m.cols() != 2 {
                return Err(Error::InvalidParameter(format!("{name} must be 2x2")));
            }
            check_unitary(m, name, tol)?;
        }
        let c = Field::C;
        Ok(Self { gamma, mu, u: u.with_field(c), v: v.with_field(c), left: left.with_field(c) })
    }

    pub fn apply(&self, x: &Mat<T>) -> Mat<T> {
        let inner = &(&self.u.adjoint() * &x.with_field(Field::C)) * &self.u;
        let twisted = &(&self.v.adjoint() * &l0_apply(self.mu, &inner)) * &self.v;
        (&self.left * &twisted).scale(re(T::one()) / self.gamma)
    }

    pub fn to_op(&self) -> MatLinOp<T> {
        MatLinOp::from_fn(Field::C, 2, |x| self.apply(x))
    }
}

/// The operator `T` with `γ V T(U X U*) V* = L0(X)`, i.e. `T(X) = (1/γ) V* L0(U* X U) V`.
pub fn mu_twist<T: Real>(
    gamma: Cx<T>,
    mu: Cx<T>,
    u: &Mat<T>,
    v: &Mat<T>,
    tol: &ToleranceProfile,
) -> Result<MatLinOp<T>> {
    Ok(MuTwistForm::new(gamma, mu, u.clone(), v.clone(), tol)?.to_op())
}

/// General unital-up-to-`M` 2x2 unitary-multiple preserver:
/// `T(X) = M · V* L'(U* X U) V`, where `L'(I) = I`, `L'(Σ_j) = a_j Σ_j + b_j I`
/// and `L'(iX) = μ L'(X)` on `V3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TwoByTwoForm<T: Real> {
    /// `M = T(I)`.
    pub t_identity: Mat<T>,
    pub u: Mat<T>,
    pub v: Mat<T>,
    pub mu: Cx<T>,
    pub a: [T; 3],
    pub b: [T; 3],
}

impl<T: Real> TwoByTwoForm<T> {
    /// `L'` on an arbitrary 2x2 matrix.
    pub fn l_prime(&self, z: &Mat<T>) -> Mat<T> {
        let act = |c: &[T; 4]| {
            let mut out = [c[0], T::zero(), T::zero(), T::zero()];
            for j in 0..3 {
                out[0] = out[0] + self.b[j] * c[j + 1];
                out[j + 1] = self.a[j] * c[j + 1];
            }
            v3_combine(&out)
        };
        let (x, y) = v3_split(z);
        &act(&x) + &act(&y).scale(self.mu)
    }

    pub fn apply(&self, x: &Mat<T>) -> Mat<T> {
        let inner = &(&self.u.adjoint() * &x.with_field(Field::C)) * &self.u;
        let mid = &(&self.v.adjoint() * &self.l_prime(&inner)) * &self.v;
        &self.t_identity.with_field(Field::C) * &mid
    }

    pub fn to_op(&self) -> MatLinOp<T> {
        MatLinOp::from_fn(Field::C, 2, |x| self.apply(x))
    }
}

/// Rotation matrix of `X ↦ U X U*` on `span_R{Σ1, Σ2, Σ3}` in the basis `{Σ_j/√2}`:
/// `R_jk = Re⟨U Σ_k U*, Σ_j⟩ / 2`.
pub fn so3_of_unitary<T: Real>(u: &Mat<T>, tol: &ToleranceProfile) -> Result<Mat<T>> {
    if u.rows() != 2 || u.cols() != 2 {
        return Err(Error::InvalidParameter("expected a 2x2 unitary".into()));
    }
    check_unitary(u, "U", tol)?;
    let u = u.with_field(Field::C);
    let s: Vec<Mat<T>> = (1..=3).map(sigma).collect();
    let images: Vec<Mat<T>> = s.iter().map(|sk| &(&u * sk) * &u.adjoint()).collect();
    Ok(Mat::from_fn(3, 3, Field::R, |j, k| re(inner_unchecked(&images[k], &s[j]).re / T::lit(2.0))))
}

/// Unit quaternion `q` with `U = q0 I + q1 Σ1 + q2 Σ2 + q3 Σ3` and
/// `so3_of_unitary(U) = R`, first nonzero component positive.
fn quaternion_of_rotation<T: Real>(r: &Mat<T>) -> [T; 4] {
    // With these Σ_j the conjugation action is the transpose of the usual
    // quaternion rotation matrix, so extract from M = Rᵀ.
    let m = |i: usize, j: usize| r[(j, i)].re;
    let (one, four) = (T::one(), T::lit(4.0));
    let trace = m(0, 0) + m(1, 1) + m(2, 2);
    let diag = [trace, m(0, 0), m(1, 1), m(2, 2)];
    let branch = (0..4).fold(0, |b, k| if diag[k] > diag[b] { k } else { b });
    let mut q = match branch {
        0 => {
            let q0 = (one + trace).max(T::zero()).sqrt() / T::lit(2.0);
            [q0, (m(2, 1) - m(1, 2)) / (four * q0), (m(0, 2) - m(2, 0)) / (four * q0), (m(1, 0) - m(0, 1)) / (four * q0)]
        }
        1 => {
            let q1 = (one + m(0, 0) - m(1, 1) - m(2, 2)).max(T::zero()).sqrt() / T::lit(2.0);
            [(m(2, 1) - m(1, 2)) / (four * q1), q1, (m(0, 1) + m(1, 0)) / (four * q1), (m(0, 2) + m(2, 0)) / (four * q1)]
        }
        2 => {
            let q2 = (one + m(1, 1) - m(0, 0) - m(2, 2)).max(T::zero()).sqrt() / T::lit(2.0);
            [(m(0, 2) - m(2, 0)) / (four * q2), (m(0, 1) + m(1, 0)) / (four * q2), q2, (m(1, 2) + m(2, 1)) / (four * q2)]
        }
        _ => {
            let q3 = (one + m(2, 2) - m(0, 0) - m(1, 1)).max(T::zero()).sqrt() / T::lit(2.0);
            [(m(1, 0) - m(0, 1)) / (four * q3), (m(0, 2) + m(2, 0)) / (four * q3), (m(1, 2) + m(2, 1)) / (four * q3), q3]
        }
    };
    let norm = q.iter().map(|x| *x * *x).sum::<T>().sqrt();
    for x in q.iter_mut() {
        *x = *x / norm;
    }
    let eps = T::epsilon() * T::lit(64.0);
    if let Some(first) = q.iter().find(|x| x.abs() > eps) {
        if *first < T::zero() {
            for x in q.iter_mut() {
                *x = -*x;
            }
        }
    }
    q
}

/// `U ∈ SU(2)` whose conjugation action on `span_R{Σ1, Σ2, Σ3}` is `R`.
/// The sign is fixed by making the first nonzero quaternion coordinate positive.
pub fn su2_lift<T: Real>(r: &Mat<T>, tol: &ToleranceProfile) -> Result<Mat<T>> {
    if r.rows() != 3 || r.cols() != 3 || r.field() != Field::R {
        return Err(Error::InvalidParameter("expected a real 3x3 matrix".into()));
    }
    let defect = r.unitarity_defect();
    let det = r.det().re;
    let thr = T::lit(tol.eq_abs * 3.0);
    if defect > thr || (det - T::one()).abs() > thr {
        return Err(Error::InvalidParameter(format!(
            "not a rotation: orthogonality defect {:e}, det {}",
            defect.as_f64(),
            det.as_f64()
        )));
    }
    let q = quaternion_of_rotation(r);
    Ok(v3_combine(&q))
}

/// Nearest rotation to a 3x3 real matrix (polar factor with determinant corrected to +1).
pub fn nearest_rotation<T: Real>(r: &Mat<T>) -> Mat<T> {
    let d = svd(r);
    let mut u = d.u.clone();
    if (&d.u * &d.v.adjoint()).det().re < T::zero() {
        for i in 0..3 {
            u[(i, 2)] = -u[(i, 2)];
        }
    }
    (&u * &d.v.adjoint()).with_field(Field::R)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SandwichParams<T: Real> {
    pub r: T,
    pub u: Mat<T>,
    pub v: Mat<T>,
    pub variant: Variant,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PhiCParams<T: Real> {
    pub c: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Mat<T>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MuTwistParams<T: Real> {
    /// `[re, im]`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Cx<T>>,
    /// `[re, im]`.
    pub mu: Cx<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Mat<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Mat<T>>,
}

/// Family descriptor: `{"family": "sandwich" | "phi_c" | "mu_twist", "params": {...}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", bound = "T: Real")]
pub enum FamilyDescriptor<T: Real> {
    Sandwich(SandwichParams<T>),
    PhiC(PhiCParams<T>),
    MuTwist(MuTwistParams<T>),
}

impl<T: Real> FamilyDescriptor<T> {
    pub fn build(&self, tol: &ToleranceProfile) -> Result<MatLinOp<T>> {
        match self {
            FamilyDescriptor::Sandwich(p) => sandwich_op(p.r, &p.u, &p.v, p.variant, tol),
            FamilyDescriptor::PhiC(p) => {
                let u = p.u.clone().unwrap_or_else(|| Mat::identity(2, Field::R));
                Ok(PhiCForm::new(p.gamma.unwrap_or_else(T::one), p.c, u, tol)?.to_op())
            }
            FamilyDescriptor::MuTwist(p) => {
                let id = Mat::identity(2, Field::C);
                let u = p.u.clone().unwrap_or_else(|| id.clone());
                let v = p.v.clone().unwrap_or(id);
                mu_twist(p.gamma.unwrap_or_else(|| re(T::one())), p.mu, &u, &v, tol)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{gen_norm_mult_pair, gen_sesqui_pair};
    use crate::matcore::{gaussian_matrix, haar_unitary, unit};
    use crate::specnorm::{is_unitary_multiple, norm_mult_direct, sesqui_direct, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M = Mat<f64>;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> M {
        let mut q: M = haar_unitary(3, Field::R, rng);
        if q.det().re < 0.0 {
            for i in 0..3 {
                q[(i, 0)] = -q[(i, 0)];
            }
        }
        q
    }

    #[test]
    fn quaternion_relations() {
        let s: Vec<M> = (1..=3).map(sigma).collect();
        let id = M::identity(2, Field::C);
        for sj in &s {
            assert!((sj * sj).approx_eq(&(-&id), 0.0));
            assert!(sj.unitarity_defect() == 0.0);
        }
        // With these matrices the cyclic products carry a minus sign.
        assert!((&s[0] * &s[1]).approx_eq(&(-&s[2]), 0.0));
        assert!((&s[1] * &s[2]).approx_eq(&(-&s[0]), 0.0));
        assert!((&s[2] * &s[0]).approx_eq(&(-&s[1]), 0.0));
        assert!((&s[1] * &s[0]).approx_eq(&s[2], 0.0));
        let eight = quaternion_unitaries::<f64>();
        for (a, x) in eight.iter().enumerate() {
            for (b, y) in eight.iter().enumerate() {
                let ip = inner_unchecked(x, y).re;
                assert_eq!(ip, if a == b { 2.0 } else { 0.0 });
            }
        }
        // Σ1 = i(E12 + E21), Σ2 = E12 - E21, Σ3 = i(E11 - E22).
        let e = |i, j| unit::<f64>(i, j, 2, Field::C).unwrap();
        let i = cx(0.0, 1.0);
        assert!(s[0].approx_eq(&(&e(0, 1) + &e(1, 0)).scale(i), 0.0));
        assert!(s[1].approx_eq(&(&e(0, 1) - &e(1, 0)), 0.0));
        assert!(s[2].approx_eq(&(&e(0, 0) - &e(1, 1)).scale(i), 0.0));
    }

    #[test]
    fn sandwich_examples() {
        let t = tol();
        let id = M::identity(3, Field::C);
        assert_eq!(sandwich_op(1.0, &id, &id, Variant::Id, &t).unwrap(), MatLinOp::identity(3, Field::C));
        let tr = sandwich_op(1.0, &id, &id, Variant::Transpose, &t).unwrap();
        assert_eq!(tr.apply(&unit(0, 1, 3, Field::C).unwrap()).unwrap(), unit(1, 0, 3, Field::C).unwrap());
        assert!(matches!(sandwich_op(1.0, &M::diag_real(&[1.0, 2.0], Field::R), &M::identity(2, Field::R), Variant::Id, &t), Err(Error::NotUnitary(_))));
        assert!(sandwich_op(0.0, &id, &id, Variant::Id, &t).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: M = haar_unitary(3, Field::C, &mut rng);
        let v: M = haar_unitary(3, Field::C, &mut rng);
        let op = sandwich_op(2.0, &u, &v, Variant::Conj, &t).unwrap();
        for _ in 0..300 {
            let w: M = haar_unitary(3, Field::C, &mut rng);
            let (c, _) = is_unitary_multiple(&op.apply(&w).unwrap(), &t).unwrap();
            assert!((c - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn phi_c_examples() {
        let t = tol();
        assert!(phi_c::<f64>(1.0).unwrap().basis_discrepancy(&MatLinOp::identity(2, Field::R)).unwrap() < 1e-15);
        let rot = M::from_real_rows(&[&[2.0, 3.0], &[-3.0, 2.0]]);
        let p = phi_c(5.0).unwrap();
        assert!(p.apply(&rot).unwrap().approx_eq(&rot, 1e-14));
        let e11: M = unit(0, 0, 2, Field::R).unwrap();
        let img = phi_c(2.0).unwrap().apply(&e11).unwrap();
        assert!(img.approx_eq(&M::diag_real(&[1.5, -0.5], Field::R), 1e-15));
        assert!(phi_c::<f64>(0.0).is_err());
        assert!(phi_c::<f64>(-1.0).is_err());
        assert!(PhiCForm::new(1.0, 2.0, M::identity(2, Field::C), &t).is_err());
    }

    #[test]
    fn mu_twist_examples() {
        let t = tol();
        let id = M::identity(2, Field::C);
        let i = cx(0.0, 1.0);
        let op = mu_twist(cx(1.0, 0.0), i, &id, &id, &t).unwrap();
        assert!(op.basis_discrepancy(&MatLinOp::identity(2, Field::C)).unwrap() < 1e-15);
        let op = mu_twist(cx(1.0, 0.0), cx(0.0, 2.0), &id, &id, &t).unwrap();
        assert!(op.apply(&id.scale(i)).unwrap().approx_eq(&id.scale(cx(0.0, 2.0)), 1e-15));
        assert!(mu_twist(cx(1.0, 0.0), cx(2.0, 0.0), &id, &id, &t).is_err());
        assert!(mu_twist(cx(0.0, 0.0), i, &id, &id, &t).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let u: M = haar_unitary(2, Field::C, &mut rng);
            let v: M = haar_unitary(2, Field::C, &mut rng);
            let mu = cx(rng.random_range(-2.0..2.0), rng.random_range(0.1..2.0));
            let gamma = cx(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0));
            let form = MuTwistForm::new(gamma, mu, u.clone(), v.clone(), &t).unwrap();
            let op = form.to_op();
            let w: M = haar_unitary(2, Field::C, &mut rng);
            assert!(is_unitary_multiple(&op.apply(&w).unwrap(), &t).is_some());
            // γ V T(U X U*) V* = L0(X).
            let x: M = gaussian_matrix(2, 2, Field::C, &mut rng);
            let inner = op.apply(&(&(&u * &x) * &u.adjoint())).unwrap();
            let lhs = (&(&v * &inner) * &v.adjoint()).scale(gamma);
            assert!(lhs.approx_eq(&l0_apply(mu, &x), 1e-12));
        }
    }

    #[test]
    fn su2_so3_examples() {
        let t = tol();
        let i3 = M::identity(3, Field::R);
        assert!(su2_lift(&i3, &t).unwrap().approx_eq(&M::identity(2, Field::C), 1e-15));
        assert!(so3_of_unitary(&M::identity(2, Field::C), &t).unwrap().approx_eq(&i3, 1e-15));
        let r3 = so3_of_unitary(&sigma(3), &t).unwrap();
        assert!(r3.approx_eq(&M::diag_real(&[-1.0, -1.0, 1.0], Field::R), 1e-15));
        let quarter = M::from_real_rows(&[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        let u = su2_lift(&quarter, &t).unwrap();
        assert!(so3_of_unitary(&u, &t).unwrap().approx_eq(&quarter, 1e-10));
        assert!(su2_lift(&M::diag_real(&[1.0, 1.0, -1.0], Field::R), &t).is_err());
        assert!(so3_of_unitary(&M::diag_real(&[1.0, 2.0], Field::C), &t).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let r = random_rotation(&mut rng);
            let u = su2_lift(&r, &t).unwrap();
            assert!((u.det() - cx(1.0, 0.0)).norm() < 1e-12);
            assert!(so3_of_unitary(&u, &t).unwrap().max_abs_diff(&r) <= 1e-10);
            assert!(so3_of_unitary(&(-&u), &t).unwrap().max_abs_diff(&r) <= 1e-10);
        }
        for _ in 0..100 {
            let a: M = haar_unitary(2, Field::C, &mut rng);
            let b: M = haar_unitary(2, Field::C, &mut rng);
            let ra = so3_of_unitary(&a, &t).unwrap();
            let rb = so3_of_unitary(&b, &t).unwrap();
            let rab = so3_of_unitary(&(&a * &b), &t).unwrap();
            assert!(rab.max_abs_diff(&(&ra * &rb)) <= 1e-9);
            assert!((rab.det().re - 1.0).abs() < 1e-10);
            assert!(rab.unitarity_defect() < 1e-10);
            let lam = cx(0.6, 0.8);
            assert!(so3_of_unitary(&a.scale(lam), &t).unwrap().max_abs_diff(&ra) < 1e-12);
        }
    }

    #[test]
    fn su2_lifts_are_exactly_plus_minus() {
        // Any SU(2) element with the same rotation equals ±U.
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let w: M = haar_unitary(2, Field::C, &mut rng);
            let phase = w.det().sqrt();
            let w = w.scale(phase.inv());
            let r = so3_of_unitary(&w, &t).unwrap();
            let u = su2_lift(&r, &t).unwrap();
            assert!(u.approx_eq(&w, 1e-10) || u.approx_eq(&(-&w), 1e-10));
        }
    }

    #[test]
    fn d_identity_on_mu_twist() {
        // A = U diag(1, t) V*, T = L0: the diagonal of U* T(A) V satisfies
        // |d11|² - |d22|² = (1 - t²) Im μ.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u: M = haar_unitary(2, Field::C, &mut rng);
            let v: M = haar_unitary(2, Field::C, &mut rng);
            let mu = cx(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            for k in 0..=10 {
                let tt = k as f64 / 10.0;
                let a = &(&u * &M::diag_real(&[1.0, tt], Field::C)) * &v.adjoint();
                let d = &(&u.adjoint() * &l0_apply(mu, &a)) * &v;
                assert!(d[(0, 1)].norm() < 1e-12 && d[(1, 0)].norm() < 1e-12);
                let lhs = d[(0, 0)].norm_sqr() - d[(1, 1)].norm_sqr();
                assert!((lhs - (1.0 - tt * tt) * mu.im).abs() <= 1e-9, "{lhs} vs {}", (1.0 - tt * tt) * mu.im);
            }
        }
    }

    #[test]
    fn families_preserve_constructed_pairs() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &c in &[0.2, 3.0] {
            let op = phi_c(c).unwrap();
            for _ in 0..200 {
                let (a, b) = gen_norm_mult_pair::<f64, _>(2, Field::R, &mut rng);
                assert!(norm_mult_direct(&op.apply(&a).unwrap(), &op.apply(&b).unwrap(), &t).unwrap().holds);
                let (a, b) = gen_sesqui_pair::<f64, _>(2, Field::R, Side::StarRight, &mut rng);
                let v = sesqui_direct(&op.apply(&a).unwrap(), &op.apply(&b).unwrap(), Side::StarRight, &t).unwrap();
                assert!(v.holds);
            }
        }
        let u: M = haar_unitary(2, Field::C, &mut rng);
        let v: M = haar_unitary(2, Field::C, &mut rng);
        let op = mu_twist(cx(1.3, 0.0), cx(0.4, -1.5), &u, &v, &t).unwrap();
        for _ in 0..200 {
            let (a, b) = gen_norm_mult_pair::<f64, _>(2, Field::C, &mut rng);
            assert!(norm_mult_direct(&op.apply(&a).unwrap(), &op.apply(&b).unwrap(), &t).unwrap().holds);
        }
    }

    #[test]
    fn descriptor_json() {
        let t = tol();
        let js = r#"{"family":"phi_c","params":{"c":2.0}}"#;
        let d: FamilyDescriptor<f64> = serde_json::from_str(js).unwrap();
        assert_eq!(d.build(&t).unwrap(), phi_c(2.0).unwrap());
        let js = r#"{"family":"mu_twist","params":{"mu":[0.0,1.0]}}"#;
        let d: FamilyDescriptor<f64> = serde_json::from_str(js).unwrap();
        assert!(d.build(&t).unwrap().basis_discrepancy(&MatLinOp::identity(2, Field::C)).unwrap() < 1e-15);
        let id = M::identity(3, Field::R);
        let d = FamilyDescriptor::Sandwich(SandwichParams { r: 1.0, u: id.clone(), v: id, variant: Variant::Transpose });
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains(r#""family":"sandwich""#) && s.contains(r#""variant":"transpose""#));
        let back: FamilyDescriptor<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back.build(&t).unwrap(), MatLinOp::transposition(3, Field::R));
        assert!(serde_json::from_str::<FamilyDescriptor<f64>>(r#"{"family":"nope","params":{}}"#).is_err());
    }

    #[test]
    fn nearest_rotation_projects() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g: M = gaussian_matrix(3, 3, Field::R, &mut rng);
        let r = nearest_rotation(&g);
        assert!(r.unitarity_defect() < 1e-12 && (r.det().re - 1.0).abs() < 1e-12);
    }
}
