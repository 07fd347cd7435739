//! Spectral-norm machinery: norm-attaining subspaces, unitary multiples,
//! norm-multiplicative pair predicates and the 2x2 subspace tests.
//!
//! Every pair predicate has a *direct* form that compares `‖AB‖` against
//! `‖A‖‖B‖` and a *structural* form that looks for a common norm-attaining
//! direction. The structural form searches one top singular subspace for the
//! vector that best attains the norm of the other factor, accepts it when it
//! does so within `eq_rel`, and returns it as the witness. The smallest
//! principal angle between the two subspaces is reported alongside.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, svd};
use crate::matcore::{ensure_same_space, inner_unchecked, unit, Field, Mat, ToleranceProfile};
use crate::scalar::{cx, re, Cx, Real};

pub use crate::linalg::Svd;

/// Largest singular value; zero for the zero matrix.
pub fn spectral_norm<T: Real>(a: &Mat<T>) -> T {
    svd(a).largest()
}

/// Orthonormal basis of a subspace of `F^n`, stored as the columns of an `n x k` matrix.
#[derive(Clone, Debug)]
pub struct Subspace<T> {
    basis: Mat<T>,
}

impl<T: Real> Subspace<T> {
    /// Wraps a matrix whose columns are already orthonormal.
    pub fn from_orthonormal(basis: Mat<T>) -> Self {
        Self { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Mat<T> {
        &self.basis
    }

    pub fn vectors(&self) -> Vec<Mat<T>> {
        (0..self.dim()).map(|j| self.basis.column(j)).collect()
    }

    /// Orthogonal projection of a column vector onto the subspace.
    pub fn project(&self, x: &Mat<T>) -> Mat<T> {
        let coeffs = &self.basis.adjoint() * x;
        &self.basis * &coeffs
    }

    /// Distance from a column vector to the subspace.
    pub fn distance(&self, x: &Mat<T>) -> T {
        (x - &self.project(x)).vec_norm()
    }
}

/// Number of leading singular values within `rank_gap * s1` of `s1`.
fn top_cluster<T: Real>(s: &[T], rank_gap: T) -> usize {
    let s1 = s[0];
    s.iter().take_while(|&&x| s1 - x <= rank_gap * s1).count()
}

/// Span of the right singular vectors attaining the norm (within `rank_gap`).
pub fn top_right_singular_subspace<T: Real>(a: &Mat<T>, tol: &ToleranceProfile) -> Result<Subspace<T>> {
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let d = svd(a);
    let k = top_cluster(&d.s, T::lit(tol.rank_gap));
    Ok(Subspace { basis: d.v.columns(&(0..k).collect::<Vec<_>>()) })
}

/// Span of the left singular vectors attaining the norm (within `rank_gap`).
pub fn top_left_singular_subspace<T: Real>(a: &Mat<T>, tol: &ToleranceProfile) -> Result<Subspace<T>> {
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let d = svd(a);
    let k = top_cluster(&d.s, T::lit(tol.rank_gap));
    Ok(Subspace { basis: d.u.columns(&(0..k).collect::<Vec<_>>()) })
}

/// Closest pair of directions between two subspaces.
#[derive(Clone, Debug)]
pub struct Intersection<T> {
    /// Sine of the smallest principal angle.
    pub sin_angle: T,
    /// Unit vector in the first subspace realizing that angle.
    pub vector: Mat<T>,
}

/// Smallest principal angle between `x` and `y` with its principal vector in `x`.
///
/// The sine is measured as the residual of projecting the principal vector
/// onto `y`, which stays accurate for tiny angles where `acos` does not.
pub fn principal_intersection<T: Real>(x: &Subspace<T>, y: &Subspace<T>) -> Intersection<T> {
    let cross = &x.basis.adjoint() * &y.basis;
    let d = svd(&cross);
    let coeff = d.u.column(0);
    let v = (&x.basis * &coeff).normalized();
    Intersection { sin_angle: y.distance(&v).min(T::one()), vector: v }
}

/// Unit vector of `x` maximizing `‖Ay‖`, with `‖Ay‖ / ‖A‖`.
pub fn best_attaining<T: Real>(a: &Mat<T>, x: &Subspace<T>) -> (Mat<T>, T) {
    let d = svd(&(a * &x.basis));
    let y = (&x.basis * &d.v.column(0)).normalized();
    let norm = spectral_norm(a);
    let ratio = if norm == T::zero() { T::zero() } else { d.largest() / norm };
    (y, ratio)
}

fn attained<T: Real>(ratio: T, tol: &ToleranceProfile) -> bool {
    T::one() - ratio <= T::lit(tol.eq_rel)
}

/// Decides whether `A = cU` with `U` unitary: all singular values equal within
/// `rank_gap`. Returns `c >= 0` and the polar factor `U`. The zero matrix gives `(0, I)`.
pub fn is_unitary_multiple<T: Real>(a: &Mat<T>, tol: &ToleranceProfile) -> Option<(T, Mat<T>)> {
    let n = a.n();
    if a.is_zero() {
        return Some((T::zero(), Mat::identity(n, a.field())));
    }
    let d = svd(a);
    let (s1, sn) = (d.largest(), d.smallest());
    if s1 - sn > T::lit(tol.rank_gap) * s1 {
        return None;
    }
    let c = d.s.iter().copied().sum::<T>() / T::lit(n as f64);
    let u = &d.u * &d.v.adjoint();
    Some((c, u.with_field(a.field())))
}

/// Outcome of a norm-multiplicativity test.
#[derive(Clone, Debug, Serialize)]
pub struct PairVerdict<T: Real> {
    pub holds: bool,
    /// `‖AB‖` (or the sesquilinear variant).
    pub lhs: T,
    /// `‖A‖‖B‖`.
    pub rhs: T,
    /// `|lhs - rhs| / rhs`, zero when `rhs` vanishes.
    pub residual: T,
    /// Sine of the principal angle used by structural tests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<T>,
    /// Unit vector certifying a structural success.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Mat<T>>,
}

impl<T: Real> PairVerdict<T> {
    fn direct(lhs: T, rhs: T, tol: &ToleranceProfile) -> Self {
        let residual = if rhs == T::zero() { T::zero() } else { (lhs - rhs).abs() / rhs };
        Self {
            holds: residual <= T::lit(tol.eq_rel),
            lhs,
            rhs,
            residual,
            angle: None,
            witness: None,
        }
    }

    fn trivial() -> Self {
        Self {
            holds: true,
            lhs: T::zero(),
            rhs: T::zero(),
            residual: T::zero(),
            angle: None,
            witness: None,
        }
    }
}

/// Which factor carries the adjoint in a sesquilinear relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `‖A*B‖ = ‖A‖‖B‖`.
    StarLeft,
    /// `‖AB*‖ = ‖A‖‖B‖`.
    StarRight,
}

fn check_pair<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<()> {
    ensure_same_space(a, b)?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch("square matrices required".into()));
    }
    Ok(())
}

/// Direct test of `‖AB‖ = ‖A‖‖B‖`. Pairs with a zero factor hold trivially.
pub fn norm_mult_direct<T: Real>(a: &Mat<T>, b: &Mat<T>, tol: &ToleranceProfile) -> Result<PairVerdict<T>> {
    check_pair(a, b)?;
    if a.is_zero() || b.is_zero() {
        return Ok(PairVerdict::trivial());
    }
    let lhs = spectral_norm(&(a * b));
    let rhs = spectral_norm(a) * spectral_norm(b);
    Ok(PairVerdict::direct(lhs, rhs, tol))
}

/// Structural test of `‖AB‖ = ‖A‖‖B‖`: some unit `x` attains the norm of `B`
/// and `Bx` attains the norm of `A`.
pub fn norm_mult_structural<T: Real>(a: &Mat<T>, b: &Mat<T>, tol: &ToleranceProfile) -> Result<PairVerdict<T>> {
    check_pair(a, b)?;
    if a.is_zero() || b.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let top_b = top_right_singular_subspace(b, tol)?;
    let image = Subspace::from_orthonormal(orthonormalize(&(b * top_b.basis())));
    let top_a = top_right_singular_subspace(a, tol)?;
    let (y, ratio) = best_attaining(a, &image);
    let mut verdict = PairVerdict::direct(spectral_norm(&(a * b)), spectral_norm(a) * spectral_norm(b), tol);
    verdict.holds = attained(ratio, tol);
    verdict.angle = Some(principal_intersection(&image, &top_a).sin_angle);
    if verdict.holds {
        // B* maps the top left singular directions of B back onto its top right ones.
        verdict.witness = Some((&b.adjoint() * &y).normalized());
    }
    Ok(verdict)
}

/// Whether `x` attains the norm of `a` within `eq_rel`: `‖Ax̂‖ >= (1 - eq_rel)‖A‖`.
pub fn attains_norm_at<T: Real>(a: &Mat<T>, x: &Mat<T>, tol: &ToleranceProfile) -> bool {
    let s = spectral_norm(a);
    s == T::zero() || attained((a * &x.normalized()).vec_norm() / s, tol)
}

/// Re-checks a product witness: `x` attains `‖B‖` and `Bx` attains `‖A‖`.
pub fn check_product_witness<T: Real>(a: &Mat<T>, b: &Mat<T>, x: &Mat<T>, tol: &ToleranceProfile) -> bool {
    attains_norm_at(b, x, tol) && attains_norm_at(a, &(b * x), tol)
}

/// Direct test of the sesquilinear relations.
pub fn sesqui_direct<T: Real>(a: &Mat<T>, b: &Mat<T>, side: Side, tol: &ToleranceProfile) -> Result<PairVerdict<T>> {
    check_pair(a, b)?;
    if a.is_zero() || b.is_zero() {
        return Ok(PairVerdict::trivial());
    }
    let prod = match side {
        Side::StarLeft => &a.adjoint() * b,
        Side::StarRight => a * &b.adjoint(),
    };
    Ok(PairVerdict::direct(spectral_norm(&prod), spectral_norm(a) * spectral_norm(b), tol))
}

/// Structural test of the sesquilinear relations: a common norm-attaining
/// right vector (`StarRight`) or left vector (`StarLeft`).
pub fn sesqui_structural<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    side: Side,
    tol: &ToleranceProfile,
) -> Result<PairVerdict<T>> {
    check_pair(a, b)?;
    if a.is_zero() || b.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let (sa, sb) = match side {
        Side::StarRight => (top_right_singular_subspace(a, tol)?, top_right_singular_subspace(b, tol)?),
        Side::StarLeft => (top_left_singular_subspace(a, tol)?, top_left_singular_subspace(b, tol)?),
    };
    let (y, ratio) = match side {
        Side::StarRight => best_attaining(a, &sb),
        Side::StarLeft => best_attaining(&a.adjoint(), &sb),
    };
    let mut verdict = sesqui_direct(a, b, side, tol)?;
    verdict.holds = attained(ratio, tol);
    verdict.angle = Some(principal_intersection(&sb, &sa).sin_angle);
    if verdict.holds {
        verdict.witness = Some(y);
    }
    Ok(verdict)
}

/// Sesquilinear relation computed both ways. The verdict follows the direct
/// test; disagreement between the two routes is reported as an error.
pub fn sesqui_mult<T: Real>(a: &Mat<T>, b: &Mat<T>, side: Side, tol: &ToleranceProfile) -> Result<PairVerdict<T>> {
    let direct = sesqui_direct(a, b, side, tol)?;
    if a.is_zero() || b.is_zero() {
        return Ok(direct);
    }
    let structural = sesqui_structural(a, b, side, tol)?;
    if direct.holds != structural.holds {
        return Err(Error::Inconsistent(format!(
            "{side:?}: direct residual {:e} vs structural angle {:e}",
            direct.residual.as_f64(),
            structural.angle.unwrap_or_else(T::zero).as_f64()
        )));
    }
    Ok(PairVerdict { witness: structural.witness, angle: structural.angle, ..direct })
}

/// `‖A²‖ = ‖A‖²` on 2x2 matrices, which characterizes normality there.
pub fn is_normal_by_norm<T: Real>(a: &Mat<T>, tol: &ToleranceProfile) -> Result<bool> {
    if a.rows() != 2 || a.cols() != 2 {
        return Err(Error::Unsupported(format!("norm normality test is 2x2 only, got {}x{}", a.rows(), a.cols())));
    }
    let s = spectral_norm(a);
    let sq = spectral_norm(&(a * a));
    Ok((sq - s * s).abs() <= T::lit(tol.eq_rel) * s * s)
}

/// Membership of a real 2x2 matrix in the scaled rotations `V1` or the
/// scaled reflections `V2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum V12 {
    InV1,
    InV2,
    Neither,
}

/// Basis `{I, E12 - E21}` of `V1` and `{E11 - E22, E12 + E21}` of `V2` (each of Frobenius norm √2).
pub fn v1_v2_bases<T: Real>() -> ([Mat<T>; 2], [Mat<T>; 2]) {
    let o = T::one();
    let z = T::zero();
    (
        [
            Mat::from_real_rows(&[&[o, z], &[z, o]]),
            Mat::from_real_rows(&[&[z, o], &[-o, z]]),
        ],
        [
            Mat::from_real_rows(&[&[o, z], &[z, -o]]),
            Mat::from_real_rows(&[&[z, o], &[o, z]]),
        ],
    )
}

pub(crate) fn project_onto<T: Real>(x: &Mat<T>, basis: &[Mat<T>]) -> Mat<T> {
    basis.iter().fold(Mat::zeros(2, 2, Field::R), |acc, b| {
        let c = inner_unchecked(x, b).re / b.frobenius_norm().powi(2);
        &acc + &b.scale_real(c)
    })
}

fn check_real_2x2<T: Real>(x: &Mat<T>) -> Result<()> {
    if x.field() != Field::R {
        return Err(Error::FieldMismatch { expected: "R".into(), found: x.field().to_string() });
    }
    if x.rows() != 2 || x.cols() != 2 {
        return Err(Error::Unsupported(format!("expected 2x2, got {}x{}", x.rows(), x.cols())));
    }
    Ok(())
}

/// Classifies a real 2x2 matrix by projection residuals (tolerance
/// `eq_abs * max(1, ‖X‖_F)`). The zero matrix reports `InV1`.
pub fn v12_membership<T: Real>(x: &Mat<T>, tol: &ToleranceProfile) -> Result<V12> {
    check_real_2x2(x)?;
    let (v1, v2) = v1_v2_bases::<T>();
    let thr = T::lit(tol.eq_abs) * x.frobenius_norm().max(T::one());
    if (x - &project_onto(x, &v1)).frobenius_norm() <= thr {
        Ok(V12::InV1)
    } else if (x - &project_onto(x, &v2)).frobenius_norm() <= thr {
        Ok(V12::InV2)
    } else {
        Ok(V12::Neither)
    }
}

/// Coefficients of a 2x2 matrix in the real basis `{I, Σ1, Σ2, Σ3}` of `V3`
/// together with the distance to `V3`.
pub fn v3_coefficients<T: Real>(a: &Mat<T>) -> ([T; 4], T) {
    let basis = crate::families::v3_basis::<T>();
    let a = a.with_field(Field::C);
    let mut coeffs = [T::zero(); 4];
    let mut proj = Mat::zeros(2, 2, Field::C);
    for (k, b) in basis.iter().enumerate() {
        coeffs[k] = inner_unchecked(&a, b).re / T::lit(2.0);
        proj = &proj + &b.scale_real(coeffs[k]);
    }
    (coeffs, (&a - &proj).frobenius_norm())
}

/// Writes a 2x2 matrix as `A = αW` with `W ∈ span_R{I, Σ1, Σ2, Σ3}`,
/// `‖W‖_F = ‖A‖_F` and the first nonzero coefficient of `W` positive.
/// Returns `None` when `A` is not a multiple of a unitary.
pub fn v3_decompose<T: Real>(a: &Mat<T>, tol: &ToleranceProfile) -> Option<(Cx<T>, Mat<T>)> {
    if a.rows() != 2 || a.cols() != 2 {
        return None;
    }
    let a = a.with_field(Field::C);
    if a.is_zero() {
        return Some((re(T::one()), a));
    }
    // det(αW) = α² det W with det W > 0 on V3, so arg α = arg(det A) / 2 mod π.
    let det = a.det();
    if det.norm() <= T::lit(tol.eq_abs) * a.frobenius_norm().powi(2) {
        return None;
    }
    let half = det.arg() / T::lit(2.0);
    let mut alpha = cx(half.cos(), half.sin());
    let mut w = a.scale(alpha.conj());
    let (coeffs, dist) = v3_coefficients(&w);
    if dist > T::lit(tol.eq_abs).max(T::lit(tol.rank_gap) * a.frobenius_norm()) {
        return None;
    }
    let lead = T::lit(tol.eq_abs) * a.frobenius_norm().max(T::one());
    if let Some(first) = coeffs.iter().find(|c| c.abs() > lead) {
        if *first < T::zero() {
            alpha = -alpha;
            w = -&w;
        }
    }
    Some((alpha, w))
}

/// `B = αQ + βU` with `Q` a rotation, `U` a reflection and `α, β >= 0`.
#[derive(Clone, Debug)]
pub struct RotRefl<T> {
    pub alpha: T,
    pub rotation: Mat<T>,
    pub beta: T,
    pub reflection: Mat<T>,
}

/// Splits a real 2x2 matrix along `M2(R) = V1 ⊕ V2`. Vanishing components
/// get the identity rotation or the reflection `diag(1, -1)`.
pub fn rot_refl_decompose<T: Real>(b: &Mat<T>) -> Result<RotRefl<T>> {
    check_real_2x2(b)?;
    let (v1, v2) = v1_v2_bases::<T>();
    let p1 = project_onto(b, &v1);
    let p2 = project_onto(b, &v2);
    let alpha = p1[(0, 0)].re.hypot(p1[(0, 1)].re);
    let beta = p2[(0, 0)].re.hypot(p2[(0, 1)].re);
    let rotation = if alpha > T::zero() { p1.scale_real(T::one() / alpha) } else { v1[0].clone() };
    let reflection = if beta > T::zero() { p2.scale_real(T::one() / beta) } else { v2[0].clone() };
    Ok(RotRefl { alpha, rotation, beta, reflection })
}

/// The witness `B = Q* E_nn` (from `A = P diag(s) Q`) that breaks
/// `‖AB‖ = ‖A‖‖B‖` whenever the extreme singular values of `A` differ.
pub fn lam1_witness<T: Real>(a: &Mat<T>) -> Mat<T> {
    let n = a.n();
    let d = svd(a);
    // With A = U S V*, Q = V* and Q* E_nn = V E_nn.
    let enn = unit::<T>(n - 1, n - 1, n, a.field()).expect("valid index");
    &d.v * &enn
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::sigma;
    use crate::matcore::{gaussian_matrix, haar_unitary, unit, Field};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = Mat<f64>;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn diag(a: f64, b: f64) -> M {
        M::diag_real(&[a, b], Field::R)
    }

    /// Power iteration on A*A.
    fn power_norm(a: &M) -> f64 {
        let g = &a.adjoint() * a;
        let mut x = M::from_fn(a.cols(), 1, Field::C, |i, _| cx(1.0 + i as f64, 0.5));
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let y = &g * &x;
            let nrm = y.vec_norm();
            lambda = nrm;
            x = y.scale_real(1.0 / nrm);
        }
        lambda.sqrt()
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&unit::<f64>(0, 0, 3, Field::R).unwrap()), 1.0);
        assert!((spectral_norm(&diag(3.0, 1.0)) - 3.0).abs() < 1e-15);
        assert_eq!(spectral_norm(&M::zeros(2, 2, Field::R)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let a: M = gaussian_matrix(4, 4, Field::C, &mut rng);
            let s = spectral_norm(&a);
            assert!((s - power_norm(&a)).abs() <= 1e-8 * s);
            assert!((s - spectral_norm(&a.adjoint())).abs() <= 1e-12 * s);
            assert!((s - spectral_norm(&a.conj())).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn top_subspace_examples() {
        let t = tol();
        let s = top_right_singular_subspace(&diag(2.0, 1.0), &t).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.basis()[(0, 0)].norm() - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u: M = haar_unitary(4, Field::C, &mut rng);
        assert_eq!(top_right_singular_subspace(&u, &t).unwrap().dim(), 4);
        assert!(matches!(top_right_singular_subspace(&M::zeros(2, 2, Field::R), &t), Err(Error::ZeroMatrix)));

        // Orthogonal columns with the first one longer: norm attained at e1.
        let (alpha, beta, tt) = (1.0, 2.0, 0.5);
        let x = M::from_real_rows(&[&[alpha, tt * beta], &[beta, -tt * alpha]]);
        let s = top_right_singular_subspace(&x, &t).unwrap();
        assert_eq!(s.dim(), 1);
        let e1 = M::basis_vector(0, 2, Field::R);
        assert!(s.distance(&e1) < 1e-12);
        assert!(((&x * &e1).vec_norm() - spectral_norm(&x)).abs() < 1e-12);
        for v in s.vectors() {
            let g = &(&x.adjoint() * &x) * &v;
            let s1 = spectral_norm(&x);
            assert!((&g - &v.scale_real(s1 * s1)).vec_norm() <= t.rank_gap * s1 * s1);
        }
    }

    #[test]
    fn unitary_multiple_examples() {
        let t = tol();
        let s1 = sigma::<f64>(1);
        let (c, u) = is_unitary_multiple(&s1, &t).unwrap();
        assert!((c - 1.0).abs() < 1e-14);
        assert!(u.approx_eq(&s1, 1e-14));
        assert!(is_unitary_multiple(&diag(1.0, 2.0), &t).is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: M = haar_unitary(3, Field::C, &mut rng);
        let a = w.scale(cx(1.0, 1.0));
        let (c, u) = is_unitary_multiple(&a, &t).unwrap();
        assert!((c - 2f64.sqrt()).abs() < 1e-8);
        assert!(u.scale_real(c).approx_eq(&a, 1e-10));
        assert!(u.unitarity_defect() < 1e-12);
        let (c0, i0) = is_unitary_multiple(&M::zeros(3, 3, Field::R), &t).unwrap();
        assert_eq!(c0, 0.0);
        assert_eq!(i0, M::identity(3, Field::R));
    }

    #[test]
    fn direct_examples() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = crate::matcore::random_unit_vector::<f64, _>(3, Field::C, &mut rng);
        let p = &x * &x.adjoint();
        assert!(norm_mult_direct(&p, &p, &t).unwrap().holds);
        let e11: M = unit(0, 0, 2, Field::R).unwrap();
        let e12: M = unit(0, 1, 2, Field::R).unwrap();
        let e21: M = unit(1, 0, 2, Field::R).unwrap();
        let v = norm_mult_direct(&e11, &e12, &t).unwrap();
        assert!(v.holds && (v.lhs - 1.0).abs() < 1e-15 && (v.rhs - 1.0).abs() < 1e-15);
        let v = norm_mult_direct(&e11, &e21, &t).unwrap();
        assert!(!v.holds && v.lhs == 0.0 && (v.rhs - 1.0).abs() < 1e-15);
        assert!(norm_mult_direct(&M::zeros(2, 2, Field::R), &e11, &t).unwrap().holds);
        assert!(norm_mult_direct(&e11, &M::identity(2, Field::C), &t).is_err());
    }

    #[test]
    fn structural_examples() {
        let t = tol();
        let v = norm_mult_structural(&diag(3.0, 1.0), &diag(2.0, 1.0), &t).unwrap();
        assert!(v.holds);
        let w = v.witness.unwrap();
        assert!((w[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(check_product_witness(&diag(3.0, 1.0), &diag(2.0, 1.0), &w, &t));
        let v = norm_mult_structural(&diag(3.0, 1.0), &diag(1.0, 2.0), &t).unwrap();
        assert!(!v.holds && v.witness.is_none());
        assert!(matches!(
            norm_mult_structural(&M::zeros(2, 2, Field::R), &diag(1.0, 2.0), &t),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn structural_agrees_with_direct_on_random_pairs() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let a: M = gaussian_matrix(3, 3, Field::C, &mut rng);
            let b: M = gaussian_matrix(3, 3, Field::C, &mut rng);
            let d = norm_mult_direct(&a, &b, &t).unwrap();
            let s = norm_mult_structural(&a, &b, &t).unwrap();
            assert_eq!(d.holds, s.holds);
        }
    }

    #[test]
    fn sesqui_examples() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: M = gaussian_matrix(3, 3, Field::C, &mut rng);
        for side in [Side::StarLeft, Side::StarRight] {
            assert!(sesqui_mult(&a, &a, side, &t).unwrap().holds);
        }
        let e11: M = unit(0, 0, 3, Field::C).unwrap();
        let e21: M = unit(1, 0, 3, Field::C).unwrap();
        let e12: M = unit(0, 1, 3, Field::C).unwrap();
        let v = sesqui_mult(&e11, &e21, Side::StarRight, &t).unwrap();
        assert!(v.holds && v.witness.is_some());
        let v = sesqui_mult(&e11, &e12, Side::StarRight, &t).unwrap();
        assert!(!v.holds && v.lhs == 0.0);
        for _ in 0..200 {
            let a: M = gaussian_matrix(3, 3, Field::C, &mut rng);
            let b: M = gaussian_matrix(3, 3, Field::C, &mut rng);
            let ab = sesqui_mult(&a, &b, Side::StarRight, &t).unwrap().holds;
            let ba = sesqui_mult(&b, &a, Side::StarRight, &t).unwrap().holds;
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn normality_by_norm() {
        let t = tol();
        assert!(!is_normal_by_norm(&unit::<f64>(0, 1, 2, Field::C).unwrap(), &t).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u: M = haar_unitary(2, Field::C, &mut rng);
        assert!(is_normal_by_norm(&u, &t).unwrap());
        assert!(is_normal_by_norm(&M::identity(3, Field::C), &t).is_err());
        for _ in 0..1000 {
            let a: M = gaussian_matrix(2, 2, Field::C, &mut rng);
            let comm = (&(&a * &a.adjoint()) - &(&a.adjoint() * &a)).frobenius_norm();
            assert_eq!(is_normal_by_norm(&a, &t).unwrap(), comm <= t.eq_abs);
        }
    }

    #[test]
    fn v12_examples() {
        let t = tol();
        let (c, s) = (0.6, 0.8);
        let rot = M::from_real_rows(&[&[c, s], &[-s, c]]);
        assert_eq!(v12_membership(&rot, &t).unwrap(), V12::InV1);
        assert_eq!(v12_membership(&diag(1.0, -1.0), &t).unwrap(), V12::InV2);
        assert_eq!(v12_membership(&unit::<f64>(0, 0, 2, Field::R).unwrap(), &t).unwrap(), V12::Neither);
        assert_eq!(v12_membership(&M::zeros(2, 2, Field::R), &t).unwrap(), V12::InV1);
        assert!(v12_membership(&M::identity(2, Field::C), &t).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let x: M = gaussian_matrix(2, 2, Field::R, &mut rng);
            let member = v12_membership(&x, &t).unwrap() != V12::Neither;
            assert_eq!(member, is_unitary_multiple(&x, &t).is_some());
            let o: M = haar_unitary(2, Field::R, &mut rng);
            assert_ne!(v12_membership(&o.scale_real(1.7), &t).unwrap(), V12::Neither);
        }
    }

    #[test]
    fn v3_examples() {
        let t = tol();
        let a = M::from_complex_rows(&[&[(0.0, 1.0), (0.0, 0.0)], &[(0.0, 0.0), (0.0, -1.0)]]);
        let (alpha, w) = v3_decompose(&a, &t).unwrap();
        assert!(alpha.im.abs() < 1e-15 && alpha.re > 0.0);
        assert!(w.approx_eq(&sigma(3), 1e-14));
        let (alpha, w) = v3_decompose(&M::identity(2, Field::C), &t).unwrap();
        assert!((alpha - cx(1.0, 0.0)).norm() < 1e-15);
        assert!(w.approx_eq(&M::identity(2, Field::C), 1e-15));
        assert!(v3_decompose(&unit::<f64>(0, 0, 2, Field::C).unwrap(), &t).is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let u: M = haar_unitary(2, Field::C, &mut rng);
            let a = u.scale(cx(0.3, -2.0));
            let (alpha, w) = v3_decompose(&a, &t).unwrap();
            assert!(w.scale(alpha).approx_eq(&a, 1e-12));
            assert!((w.frobenius_norm() - a.frobenius_norm()).abs() < 1e-12);
            let g: M = gaussian_matrix(2, 2, Field::C, &mut rng);
            assert_eq!(v3_decompose(&g, &t).is_some(), is_unitary_multiple(&g, &t).is_some());
        }
    }

    #[test]
    fn rot_refl_examples() {
        let (c, s) = (0.6, 0.8);
        let rot = M::from_real_rows(&[&[c, s], &[-s, c]]);
        let d = rot_refl_decompose(&rot).unwrap();
        assert!((d.alpha - 1.0).abs() < 1e-15 && d.beta == 0.0);
        let refl = diag(1.0, -1.0);
        let d = rot_refl_decompose(&refl).unwrap();
        assert!(d.alpha == 0.0 && (d.beta - 1.0).abs() < 1e-15);
        assert!(d.reflection.approx_eq(&refl, 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let b: M = gaussian_matrix(2, 2, Field::R, &mut rng);
            let d = rot_refl_decompose(&b).unwrap();
            let rec = &d.rotation.scale_real(d.alpha) + &d.reflection.scale_real(d.beta);
            assert!(rec.approx_eq(&b, 1e-10));
            assert!((d.rotation.det().re - 1.0).abs() < 1e-12);
            assert!((d.reflection.det().re + 1.0).abs() < 1e-12);
            let qtu = &d.rotation.transpose() * &d.reflection;
            let utq = &d.reflection.transpose() * &d.rotation;
            assert!(qtu.approx_eq(&utq, 1e-12));
        }
    }

    #[test]
    fn lam1_witness_breaks_non_multiples() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let a: M = gaussian_matrix(4, 4, Field::C, &mut rng);
            let b = lam1_witness(&a);
            assert!(!norm_mult_direct(&a, &b, &t).unwrap().holds);
        }
    }
}
