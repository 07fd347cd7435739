//! Inverse direction: detect preserver properties of an operator and
//! decompose it into canonical form.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{quaternion_unitaries, su2_lift, v3_basis, v3_split, MuTwistForm, PhiCForm, TwoByTwoForm, Variant};
use crate::harness::{case_rng, gen_norm_mult_pair, gen_sesqui_pair};
use crate::linalg::svd;
use crate::linop::{LinearityTag, MatLinOp};
use crate::matcore::{haar_unitary, inner_unchecked, unit, Field, Mat, ToleranceProfile};
use crate::scalar::{cx, phase, re, Cx, Real};
use crate::specnorm::{
    is_unitary_multiple, norm_mult_direct, norm_mult_structural, project_onto, sesqui_direct, sesqui_mult, v1_v2_bases,
    PairVerdict, Side,
};

/// Relation an operator is asked to preserve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `‖AB‖ = ‖A‖‖B‖`.
    Product,
    /// `‖A*B‖ = ‖A‖‖B‖`.
    StarLeft,
    /// `‖AB*‖ = ‖A‖‖B‖`.
    StarRight,
    /// Unitaries map to multiples of unitaries.
    Unitary,
}

impl Relation {
    pub fn side(self) -> Option<Side> {
        match self {
            Relation::StarLeft => Some(Side::StarLeft),
            Relation::StarRight => Some(Side::StarRight),
            _ => None,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Product => "product",
            Relation::StarLeft => "star_left",
            Relation::StarRight => "star_right",
            Relation::Unitary => "unitary",
        })
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Relation::Product),
            "star_left" => Ok(Relation::StarLeft),
            "star_right" => Ok(Relation::StarRight),
            "unitary" => Ok(Relation::Unitary),
            other => Err(Error::InvalidParameter(format!("unknown relation {other:?}"))),
        }
    }
}

/// Tagged payload of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "tag", bound = "T: Real")]
pub enum FormPayload<T: Real> {
    /// `X ↦ r U φ(X) V`. When `gamma` is present the product relation folded
    /// `V = λU*` and the map reads `X ↦ γ U φ(X) V` with `γ = rλ`.
    Sandwich {
        r: T,
        u: Mat<T>,
        v: Mat<T>,
        variant: Variant,
        #[serde(skip_serializing_if = "Option::is_none")]
        gamma: Option<Cx<T>>,
    },
    PhiC(PhiCForm<T>),
    MuTwist(MuTwistForm<T>),
    TwoByTwoUnitaryForm(TwoByTwoForm<T>),
    Unclassified { diagnostic: String },
}

/// Decomposition result with the relative operator-norm distance between the
/// input and its reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct CanonicalForm<T: Real> {
    #[serde(flatten)]
    pub payload: FormPayload<T>,
    pub residual: Option<T>,
}

impl<T: Real> CanonicalForm<T> {
    pub fn unclassified(diagnostic: impl Into<String>) -> Self {
        Self { payload: FormPayload::Unclassified { diagnostic: diagnostic.into() }, residual: None }
    }

    fn unclassified_with(diagnostic: impl Into<String>, residual: T) -> Self {
        Self { payload: FormPayload::Unclassified { diagnostic: diagnostic.into() }, residual: Some(residual) }
    }

    pub fn tag(&self) -> &'static str {
        match self.payload {
            FormPayload::Sandwich { .. } => "Sandwich",
            FormPayload::PhiC(_) => "PhiC",
            FormPayload::MuTwist(_) => "MuTwist",
            FormPayload::TwoByTwoUnitaryForm(_) => "TwoByTwoUnitaryForm",
            FormPayload::Unclassified { .. } => "Unclassified",
        }
    }

    pub fn is_classified(&self) -> bool {
        !matches!(self.payload, FormPayload::Unclassified { .. })
    }

    pub fn diagnostic(&self) -> Option<&str> {
        match &self.payload {
            FormPayload::Unclassified { diagnostic } => Some(diagnostic),
            _ => None,
        }
    }

    /// The operator described by the payload.
    pub fn reconstruct(&self) -> Option<MatLinOp<T>> {
        match &self.payload {
            FormPayload::Sandwich { r, u, v, variant, gamma } => {
                let s = gamma.unwrap_or_else(|| re(*r));
                Some(MatLinOp::from_fn(u.field(), u.n(), |x| (&(u * &variant.apply(x)) * v).scale(s)))
            }
            FormPayload::PhiC(f) => Some(f.to_op()),
            FormPayload::MuTwist(f) => Some(f.to_op()),
            FormPayload::TwoByTwoUnitaryForm(f) => Some(f.to_op()),
            FormPayload::Unclassified { .. } => None,
        }
    }
}

/// Outcome of [`maps_unitaries_to_multiples`].
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "T: Real")]
pub struct UnitaryImageCheck<T: Real> {
    pub pass: bool,
    pub tested: usize,
    /// Largest relative singular-value spread `(s1 - sn) / s1` over the images.
    pub max_spread: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Mat<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<Mat<T>>,
}

/// Structured unitaries: the 2x2 quaternion units (or the real orthogonal
/// basis of `V1 ∪ V2`) in the leading block, plus permutation matrices.
pub fn structured_unitaries<T: Real>(n: usize, field: Field) -> Vec<Mat<T>> {
    let mut out = vec![Mat::identity(n, field)];
    if n == 1 {
        if field == Field::C {
            out.push(Mat::identity(1, field).scale(cx(T::zero(), T::one())));
        }
        out.push(Mat::identity(1, field).scale_real(-T::one()));
        return out;
    }
    let blocks: Vec<Mat<T>> = match field {
        Field::C => quaternion_unitaries(),
        Field::R => {
            let (v1, v2) = v1_v2_bases::<T>();
            v1.into_iter().chain(v2).collect()
        }
    };
    out.extend(blocks.iter().map(|b| Mat::embed_leading(b, n)));
    let perm = |p: &dyn Fn(usize) -> usize| {
        Mat::from_fn(n, n, field, |i, j| if p(j) == i { re(T::one()) } else { re(T::zero()) })
    };
    for k in 1..n {
        out.push(perm(&|j| if j == 0 { k } else if j == k { 0 } else { j }));
    }
    out.push(perm(&|j| (j + 1) % n));
    out
}

fn relative_spread<T: Real>(a: &Mat<T>) -> T {
    let d = svd(a);
    if d.largest() == T::zero() {
        T::zero()
    } else {
        (d.largest() - d.smallest()) / d.largest()
    }
}

/// Applies `op` to structured unitaries and `trials` Haar unitaries; passes iff
/// every image is a multiple of a unitary. Haar samples come from per-trial
/// streams derived from `tol.seed`.
pub fn maps_unitaries_to_multiples<T: Real>(op: &MatLinOp<T>, trials: usize, tol: &ToleranceProfile) -> UnitaryImageCheck<T>
where
    StandardNormal: Distribution<T>,
{
    let (n, field) = (op.n(), op.field());
    let structured = structured_unitaries::<T>(n, field);
    let haar = (0..trials).map(|i| haar_unitary::<T, _>(n, field, &mut case_rng(tol.seed, "unitary-images", i as u64)));
    let mut max_spread = T::zero();
    let mut tested = 0;
    for u in structured.into_iter().chain(haar) {
        tested += 1;
        let img = op.apply(&u).expect("unitary built in the operator's space");
        max_spread = max_spread.max(relative_spread(&img));
        if is_unitary_multiple(&img, tol).is_none() {
            return UnitaryImageCheck { pass: false, tested, max_spread, counterexample: Some(u), image: Some(img) };
        }
    }
    UnitaryImageCheck { pass: true, tested, max_spread, counterexample: None, image: None }
}

/// Rotates a vector so its first non-negligible coordinate is real positive.
fn fix_phase<T: Real>(v: &Mat<T>) -> Mat<T> {
    let thr = v.max_abs() * T::lit(1e-8);
    match v.entries().iter().find(|z| z.norm() > thr) {
        Some(z) => v.scale(phase(*z).conj()),
        None => v.clone(),
    }
}

const SANDWICH_TRIALS: usize = 24;

/// Sandwich decomposition without precondition checks.
fn sandwich_core<T: Real>(op: &MatLinOp<T>, tol: &ToleranceProfile) -> CanonicalForm<T> {
    let (n, field) = (op.n(), op.field());
    let conj = if field == Field::C {
        match op.linearity_class(tol).map(|c| c.tag) {
            Ok(LinearityTag::ComplexLinear) => false,
            Ok(LinearityTag::ConjugateTwisted) => true,
            _ => return CanonicalForm::unclassified("linearity: operator is neither complex-linear nor conjugate-linear"),
        }
    } else {
        false
    };
    let e = |i: usize, j: usize| unit::<T>(i, j, n, field).expect("index in range");
    let work = if conj { op.compose(&MatLinOp::conjugation(n, field)).expect("same space") } else { op.clone() };

    let t11 = work.apply(&e(0, 0)).expect("same space");
    let t12 = work.apply(&e(0, 1.min(n - 1))).expect("same space");
    if t11.is_zero() || t12.is_zero() {
        return CanonicalForm::unclassified("variant: an image of E11 or E12 vanishes");
    }
    let (d11, d12) = (svd(&t11), svd(&t12));
    let overlap = |x: &Mat<T>, y: &Mat<T>| (&x.column(0).adjoint() * &y.column(0))[(0, 0)].norm();
    let transpose = n > 1 && overlap(&d11.v, &d12.v) > overlap(&d11.u, &d12.u);
    let work = if transpose { work.compose(&MatLinOp::transposition(n, field)).expect("same space") } else { work };

    let t11 = work.apply(&e(0, 0)).expect("same space");
    let d = svd(&t11);
    let r = d.largest();
    let u1 = fix_phase(&d.u.column(0));
    let rows: Vec<Mat<T>> = (0..n)
        .map(|j| (&u1.adjoint() * &work.apply(&e(0, j)).expect("same space")).scale_real(T::one() / r))
        .collect();
    let v = Mat::from_fn(n, n, field, |j, l| rows[j][(0, l)]);
    let v1c = rows[0].adjoint();
    let v1n = v1c.vec_norm().powi(2);
    let mut u = Mat::zeros(n, n, field);
    for i in 0..n {
        let col = (&work.apply(&e(i, 0)).expect("same space") * &v1c).scale_real(T::one() / (r * v1n));
        u.set_column(i, &col);
    }
    let variant = Variant::from_flags(conj, transpose);
    let form = CanonicalForm {
        payload: FormPayload::Sandwich { r, u: u.clone(), v: v.clone(), variant, gamma: None },
        residual: None,
    };
    let recon = form.reconstruct().expect("sandwich payload");
    let residual = op.relative_distance(&recon).expect("same space");
    if residual > T::lit(tol.eq_rel) {
        return CanonicalForm::unclassified_with(
            format!("reconstruction: sandwich residual {:e} exceeds eq_rel", residual.as_f64()),
            residual,
        );
    }
    let defect = u.unitarity_defect().max(v.unitarity_defect());
    if defect > T::lit(tol.eq_abs * n as f64) {
        return CanonicalForm::unclassified_with(
            format!("unitarity: recovered factors have defect {:e}", defect.as_f64()),
            residual,
        );
    }
    CanonicalForm { residual: Some(residual), ..form }
}

/// `T = r U φ(·) V` recovered from basis images. Requires `n >= 3`, a
/// bijective operator and a passing unitary-image check; residuals above
/// `eq_rel` yield `Unclassified`.
pub fn decompose_sandwich<T: Real>(op: &MatLinOp<T>, tol: &ToleranceProfile) -> Result<CanonicalForm<T>>
where
    StandardNormal: Distribution<T>,
{
    if op.n() < 3 {
        return Err(Error::Precondition(format!("sandwich decomposition needs n >= 3, got n = {}", op.n())));
    }
    let b = op.bijectivity(tol);
    if !b.bijective {
        return Err(Error::Precondition(format!("operator is not bijective (condition {:e})", b.condition)));
    }
    let check = maps_unitaries_to_multiples(op, SANDWICH_TRIALS, tol);
    if !check.pass {
        return Err(Error::Precondition("operator does not map unitaries to unitary multiples".into()));
    }
    Ok(sandwich_core(op, tol))
}

/// Result of the real 2x2 reduction.
#[derive(Clone, Debug)]
pub enum V12Verdict<T> {
    /// `L = T(I)⁻¹ T` leaves `V1` and `V2` invariant.
    V1V2Preserved { l: MatLinOp<T> },
    No { reason: String },
}

impl<T> V12Verdict<T> {
    pub fn preserved(&self) -> bool {
        matches!(self, V12Verdict::V1V2Preserved { .. })
    }
}

fn require_2x2<T: Real>(op: &MatLinOp<T>, field: Field) -> Result<()> {
    if op.field() != field {
        return Err(Error::FieldMismatch { expected: field.to_string(), found: op.field().to_string() });
    }
    if op.n() != 2 {
        return Err(Error::Unsupported(format!("2x2 reduction called with n = {}", op.n())));
    }
    Ok(())
}

/// Checks `T(I) ∈ R·O(2)` and that `L = T(I)⁻¹ T` maps `V1` into `V1` and `V2` into `V2`.
pub fn reduce_2x2_real<T: Real>(op: &MatLinOp<T>, tol: &ToleranceProfile) -> Result<V12Verdict<T>> {
    require_2x2(op, Field::R)?;
    if !op.is_bijective(tol) {
        return Err(Error::Precondition("operator is not bijective".into()));
    }
    let m = op.apply(&Mat::identity(2, Field::R))?;
    let Some((c, w)) = is_unitary_multiple(&m, tol) else {
        return Ok(V12Verdict::No { reason: "T(I) is not a multiple of an orthogonal matrix".into() });
    };
    let l = MatLinOp::left_mul(&w.transpose().scale_real(T::one() / c)).compose(op)?;
    let (v1, v2) = v1_v2_bases::<T>();
    for (basis, name) in [(&v1, "V1"), (&v2, "V2")] {
        for b in basis.iter() {
            let img = l.apply(b)?;
            let res = (&img - &project_onto(&img, basis)).frobenius_norm();
            if res > T::lit(tol.eq_abs) * img.frobenius_norm().max(T::one()) {
                return Ok(V12Verdict::No {
                    reason: format!("L maps a basis element of {name} outside {name} (residual {:e})", res.as_f64()),
                });
            }
        }
    }
    Ok(V12Verdict::V1V2Preserved { l })
}

const SO3_SIGN_PATTERNS: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];

/// Reduces a 2x2 complex unitary-multiple preserver to `T(X) = M · V* L'(U* X U) V`
/// with `L'(Σ_j) = a_j Σ_j + b_j I` and `L'(iX) = μ L'(X)` on `V3`.
pub fn reduce_2x2_complex<T: Real>(op: &MatLinOp<T>, tol: &ToleranceProfile) -> Result<CanonicalForm<T>>
where
    StandardNormal: Distribution<T>,
{
    require_2x2(op, Field::C)?;
    if !op.is_bijective(tol) {
        return Err(Error::Precondition("operator is not bijective".into()));
    }
    if !maps_unitaries_to_multiples(op, SANDWICH_TRIALS, tol).pass {
        return Err(Error::Precondition("operator does not map unitaries to unitary multiples".into()));
    }
    let id = Mat::identity(2, Field::C);
    let m = op.apply(&id)?;
    let Some((c, w)) = is_unitary_multiple(&m, tol) else {
        return Ok(CanonicalForm::unclassified("unital: T(I) is not a multiple of a unitary"));
    };
    let l = MatLinOp::left_mul(&w.adjoint().scale_real(T::one() / c)).compose(op)?;
    let thr = T::lit(tol.eq_abs);

    let z = l.apply(&id.scale(cx(T::zero(), T::one())))?;
    let mu = z.trace() / T::lit(2.0);
    if (&z - &id.scale(mu)).max_abs() > thr * z.max_abs().max(T::one()) {
        return Ok(CanonicalForm::unclassified("mu: L(iI) is not a multiple of I"));
    }
    if mu.im.abs() <= thr * mu.norm().max(T::one()) {
        return Ok(CanonicalForm::unclassified(format!("mu: twisting scalar {mu} is real")));
    }

    // Matrix of L on V3 in the orthonormal basis {I, Σ1, Σ2, Σ3}/√2.
    let mut rmat = [[T::zero(); 4]; 4];
    for (k, b) in v3_basis::<T>().iter().enumerate() {
        let img = l.apply(b)?;
        let (x, y) = v3_split(&img);
        let off = y.iter().map(|t| t.abs()).fold(T::zero(), T::max);
        if off > thr * img.max_abs().max(T::one()) {
            return Ok(CanonicalForm::unclassified("invariance: L(V3) is not contained in V3"));
        }
        for j in 0..4 {
            rmat[j][k] = x[j];
        }
    }
    let s = Mat::from_fn(3, 3, Field::R, |j, k| re(rmat[j + 1][k + 1]));
    let wrow = [rmat[0][1], rmat[0][2], rmat[0][3]];

    let d = svd(&s);
    let (mut pu, mut qv, mut a) = (d.u.clone(), d.v.clone(), [d.s[0], d.s[1], d.s[2]]);
    let negate_col = |m: &mut Mat<T>, j: usize| {
        for i in 0..3 {
            m[(i, j)] = -m[(i, j)];
        }
    };
    if pu.det().re * qv.det().re < T::zero() {
        negate_col(&mut qv, 2);
        a[2] = -a[2];
    }
    if pu.det().re < T::zero() {
        negate_col(&mut pu, 2);
        negate_col(&mut qv, 2);
    }
    // P S Q = diag(a) with P = puᵀ, Q = qv; b = wQ. Even sign flips D keep
    // P S Q diagonal, so pick the pattern giving the lexicographically largest b.
    let b0: Vec<T> = (0..3).map(|k| (0..3).map(|j| wrow[j] * qv[(j, k)].re).sum()).collect();
    let mut best = SO3_SIGN_PATTERNS[0];
    let mut best_b = b0.clone();
    for pat in &SO3_SIGN_PATTERNS[1..] {
        let cand: Vec<T> = (0..3).map(|k| b0[k] * T::lit(pat[k])).collect();
        let greater = cand
            .iter()
            .zip(&best_b)
            .find(|(x, y)| (**x - **y).abs() > thr)
            .is_some_and(|(x, y)| x > y);
        if greater {
            best = *pat;
            best_b = cand;
        }
    }
    for (k, sign) in best.iter().enumerate() {
        if *sign < 0.0 {
            negate_col(&mut pu, k);
            negate_col(&mut qv, k);
        }
    }
    let b = [best_b[0], best_b[1], best_b[2]];
    let p = pu.transpose();
    let uu = su2_lift(&qv, tol)?;
    let vv = su2_lift(&p, tol)?;
    let form = TwoByTwoForm { t_identity: m, u: uu, v: vv, mu, a, b };
    let residual = op.relative_distance(&form.to_op())?;
    if residual > T::lit(tol.eq_rel) {
        return Ok(CanonicalForm::unclassified_with(
            format!("reconstruction: L(iX) = mu L(X) fails on V3 or L is not of the reduced form (residual {:e})", residual.as_f64()),
            residual,
        ));
    }
    Ok(CanonicalForm { payload: FormPayload::TwoByTwoUnitaryForm(form), residual: Some(residual) })
}

fn scalar_part<T: Real>(m: &Mat<T>, tol: &ToleranceProfile) -> Option<Cx<T>> {
    let n = m.n();
    let lam = m.trace() / T::lit(n as f64);
    let dev = (m - &Mat::identity(n, m.field()).scale(lam)).max_abs();
    (dev <= T::lit(tol.eq_abs) * m.max_abs().max(T::one())).then_some(lam)
}

fn check_residual<T: Real>(op: &MatLinOp<T>, payload: FormPayload<T>, tol: &ToleranceProfile) -> CanonicalForm<T> {
    let form = CanonicalForm { payload, residual: None };
    let recon = form.reconstruct().expect("classified payload");
    let residual = op.relative_distance(&recon).expect("same space");
    if residual > T::lit(tol.eq_rel) {
        return CanonicalForm::unclassified_with(
            format!("reconstruction: residual {:e} exceeds eq_rel", residual.as_f64()),
            residual,
        );
    }
    CanonicalForm { residual: Some(residual), ..form }
}

fn classify_2x2_real<T: Real>(op: &MatLinOp<T>, relation: Relation, tol: &ToleranceProfile) -> CanonicalForm<T> {
    let id = Mat::identity(2, Field::R);
    let m = op.apply(&id).expect("same space");
    let (gamma, left) = if relation == Relation::Product {
        match scalar_part(&m, tol) {
            Some(lam) if lam.re != T::zero() => (lam.re, id.clone()),
            _ => return CanonicalForm::unclassified("unital: T(I) is not a nonzero multiple of I"),
        }
    } else {
        match is_unitary_multiple(&m, tol) {
            Some((c, w)) if c > T::zero() => (c, w),
            _ => return CanonicalForm::unclassified("unital: T(I) is not a multiple of an orthogonal matrix"),
        }
    };
    let l = MatLinOp::left_mul(&left.transpose().scale_real(T::one() / gamma)).compose(op).expect("same space");
    let (v1, v2) = v1_v2_bases::<T>();
    let two = T::lit(2.0);
    let lj = l.apply(&v1[1]).expect("same space");
    let s = inner_unchecked(&lj, &v1[1]).re / two;
    if (&lj - &v1[1].scale_real(s)).max_abs() > T::lit(tol.eq_abs) || (s.abs() - T::one()).abs() > T::lit(tol.eq_abs) {
        return CanonicalForm::unclassified("rotation: L(E12 - E21) is not ±(E12 - E21)");
    }
    let d = v2[0].clone();
    let l2 = if s < T::zero() {
        let dd = d.clone();
        MatLinOp::from_fn(Field::R, 2, |x| l.apply(&(&(&dd * x) * &dd)).expect("same space"))
    } else {
        l
    };
    let lk = l2.apply(&v2[0]).expect("same space");
    let (p, q) = (inner_unchecked(&lk, &v2[0]).re / two, inner_unchecked(&lk, &v2[1]).re / two);
    let c = p.hypot(q);
    let theta = q.atan2(p) / two;
    let (ct, st) = (theta.cos(), theta.sin());
    let rot = Mat::from_real_rows(&[&[ct, -st], &[st, ct]]);
    let u = if s < T::zero() { &rot * &d } else { rot };
    match PhiCForm::with_left(gamma, c, u, left, tol) {
        Ok(f) => check_residual(op, FormPayload::PhiC(f), tol),
        Err(e) => CanonicalForm::unclassified(format!("phi_c: {e}")),
    }
}

fn classify_2x2_complex<T: Real>(op: &MatLinOp<T>, relation: Relation, tol: &ToleranceProfile) -> CanonicalForm<T>
where
    StandardNormal: Distribution<T>,
{
    let id = Mat::identity(2, Field::C);
    let m = op.apply(&id).expect("same space");
    let (scale, left) = if relation == Relation::Product {
        match scalar_part(&m, tol) {
            Some(lam) if lam.norm() > T::zero() => (lam, id.clone()),
            _ => return CanonicalForm::unclassified("unital: T(I) is not a nonzero multiple of I"),
        }
    } else {
        match is_unitary_multiple(&m, tol) {
            Some((c, w)) if c > T::zero() => (re(c), w),
            _ => return CanonicalForm::unclassified("unital: T(I) is not a multiple of a unitary"),
        }
    };
    let reduced = match reduce_2x2_complex(op, tol) {
        Ok(f) => f,
        Err(e) => return CanonicalForm::unclassified(format!("reduction: {e}")),
    };
    let FormPayload::TwoByTwoUnitaryForm(f) = reduced.payload else {
        return reduced;
    };
    let lim = T::lit(tol.rank_gap);
    if f.a.iter().any(|&x| (x - T::one()).abs() > lim) || f.b.iter().any(|&x| x.abs() > lim) {
        return CanonicalForm::unclassified(format!(
            "parameters: a = ({}, {}, {}), b = ({}, {}, {}) differ from a = (1, 1, 1), b = 0",
            f.a[0], f.a[1], f.a[2], f.b[0], f.b[1], f.b[2]
        ));
    }
    let gamma = re(T::one()) / scale;
    match MuTwistForm::with_left(gamma, f.mu, f.u, f.v, left, tol) {
        Ok(form) => check_residual(op, FormPayload::MuTwist(form), tol),
        Err(e) => CanonicalForm::unclassified(format!("mu_twist: {e}")),
    }
}

/// Canonical form of a bijective preserver of a norm-multiplicativity relation.
/// Every failing stage yields `Unclassified` naming the failed check.
pub fn classify_norm_mult_preserver<T: Real>(op: &MatLinOp<T>, relation: Relation, tol: &ToleranceProfile) -> CanonicalForm<T>
where
    StandardNormal: Distribution<T>,
{
    if relation == Relation::Unitary {
        return CanonicalForm::unclassified("relation: 'unitary' is not a norm-multiplicativity relation");
    }
    let b = op.bijectivity(tol);
    if !b.bijective {
        return CanonicalForm::unclassified(format!("bijectivity: condition number {:e}", b.condition));
    }
    match op.n() {
        1 => CanonicalForm::unclassified("dimension: n = 1 has no canonical form"),
        2 => match op.field() {
            Field::R => classify_2x2_real(op, relation, tol),
            Field::C => classify_2x2_complex(op, relation, tol),
        },
        _ => {
            let form = match decompose_sandwich(op, tol) {
                Ok(f) => f,
                Err(e) => return CanonicalForm::unclassified(format!("sandwich: {e}")),
            };
            let FormPayload::Sandwich { r, u, v, variant, .. } = &form.payload else {
                return form;
            };
            if !matches!(variant, Variant::Id | Variant::Conj) {
                return CanonicalForm::unclassified(format!(
                    "variant: {variant:?} does not preserve {relation} pairs"
                ));
            }
            if relation != Relation::Product {
                return form;
            }
            let w = v * u;
            let Some(lam) = scalar_part(&w, tol) else {
                return CanonicalForm::unclassified("scalar: V U is not a multiple of I");
            };
            let payload = FormPayload::Sandwich {
                r: *r,
                u: u.clone(),
                v: u.adjoint(),
                variant: *variant,
                gamma: Some(lam.scale(*r)),
            };
            check_residual(op, payload, tol)
        }
    }
}

/// A pair satisfying the source relation whose image violates it.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "T: Real")]
pub struct Witness<T: Real> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    /// Verdict of the relation on `(T(A), T(B))`.
    pub image: PairVerdict<T>,
    /// Which candidate family produced the witness.
    pub origin: String,
}

fn relation_verdict<T: Real>(a: &Mat<T>, b: &Mat<T>, relation: Relation, tol: &ToleranceProfile) -> Result<PairVerdict<T>> {
    match relation.side() {
        Some(side) => sesqui_direct(a, b, side, tol),
        None => norm_mult_direct(a, b, tol),
    }
}

/// Searches for `(A, B)` with the relation holding on `(A, B)` and failing on
/// `(T(A), T(B))`: first `A = B = xx*` guided by a sandwich decomposition,
/// then `E11, E12, E21` pairs, then generated pairs, within `budget` attempts.
/// The returned witness is re-checked structurally; a disagreement is an error.
pub fn witness_nonpreservation<T: Real>(
    op: &MatLinOp<T>,
    relation: Relation,
    tol: &ToleranceProfile,
    budget: usize,
) -> Result<Option<Witness<T>>>
where
    StandardNormal: Distribution<T>,
{
    if relation == Relation::Unitary {
        return Err(Error::InvalidParameter("witness search needs a norm-multiplicativity relation".into()));
    }
    let (n, field) = (op.n(), op.field());
    let attempts = std::cell::Cell::new(0usize);
    let try_pair = |a: Mat<T>, b: Mat<T>, origin: &str| -> Result<Option<Witness<T>>> {
        if attempts.get() >= budget {
            return Ok(None);
        }
        attempts.set(attempts.get() + 1);
        if !relation_verdict(&a, &b, relation, tol)?.holds {
            return Ok(None);
        }
        let image = relation_verdict(&op.apply(&a)?, &op.apply(&b)?, relation, tol)?;
        if image.holds {
            return Ok(None);
        }
        Ok(Some(Witness { a, b, image, origin: origin.to_string() }))
    };

    let mut found = None;
    if relation == Relation::Product && n >= 2 && op.is_bijective(tol) {
        if let FormPayload::Sandwich { u, v, .. } = sandwich_core(op, tol).payload {
            let w = &v * &u;
            if scalar_part(&w, tol).is_none() {
                for x in probe_vectors::<T>(n, field, tol.seed) {
                    let p = &x * &x.adjoint();
                    if let Some(wt) = try_pair(p.clone(), p, "xx*")? {
                        found = Some(wt);
                        break;
                    }
                }
            }
        }
    }
    if found.is_none() && n >= 2 {
        let e = |i: usize, j: usize| unit::<T>(i, j, n, field).expect("index in range");
        let fixed = [(e(0, 0), e(0, 1)), (e(0, 0), e(1, 0)), (e(0, 1), e(0, 0)), (e(1, 0), e(0, 0)), (e(0, 1), e(1, 0)), (e(1, 0), e(0, 1))];
        for (a, b) in fixed {
            if let Some(wt) = try_pair(a, b, "unit")? {
                found = Some(wt);
                break;
            }
        }
    }
    let mut k = 0u64;
    while found.is_none() && attempts.get() < budget {
        let mut rng = case_rng(tol.seed, "witness", k);
        k += 1;
        let (a, b) = match relation.side() {
            Some(side) => gen_sesqui_pair(n, field, side, &mut rng),
            None => gen_norm_mult_pair(n, field, &mut rng),
        };
        found = try_pair(a, b, "generated")?;
    }
    if let Some(wt) = &found {
        confirm_structurally(op, wt, relation, tol)?;
    }
    Ok(found)
}

/// Cross-checks a witness with the structural predicates.
fn confirm_structurally<T: Real>(op: &MatLinOp<T>, wt: &Witness<T>, relation: Relation, tol: &ToleranceProfile) -> Result<()> {
    let (ta, tb) = (op.apply(&wt.a)?, op.apply(&wt.b)?);
    if ta.is_zero() || tb.is_zero() {
        return Ok(());
    }
    let holds = match relation.side() {
        Some(side) => sesqui_mult(&ta, &tb, side, tol)?.holds,
        None => norm_mult_structural(&ta, &tb, tol)?.holds,
    };
    if holds {
        return Err(Error::Inconsistent("witness image passes the structural test but fails the direct one".into()));
    }
    Ok(())
}

/// Basis vectors, normalized sums `e_j + e_k` (and `e_j + i e_k`), then random unit vectors.
fn probe_vectors<T: Real>(n: usize, field: Field, seed: u64) -> Vec<Mat<T>>
where
    StandardNormal: Distribution<T>,
{
    let mut out: Vec<Mat<T>> = (0..n).map(|k| Mat::basis_vector(k, n, field)).collect();
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    for j in 0..n {
        for k in j + 1..n {
            let ej = Mat::basis_vector(j, n, field);
            let ek = Mat::basis_vector(k, n, field);
            out.push((&ej + &ek).scale_real(h));
            if field == Field::C {
                out.push((&ej + &ek.scale(cx(T::zero(), T::one()))).scale_real(h));
            }
        }
    }
    let mut rng = case_rng(seed, "probe-vectors", 0);
    out.extend((0..16).map(|_| crate::matcore::random_unit_vector(n, field, &mut rng)));
    out
}

/// One named step of an analysis.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), pass, detail: detail.into() }
    }
}

/// Full analysis of an operator against one relation.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "T: Real")]
pub struct Report<T: Real> {
    pub verdict: String,
    pub form: CanonicalForm<T>,
    pub residual: Option<T>,
    pub witness: Option<Witness<T>>,
    /// Unitary mapped to a non-multiple (relation `unitary` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Mat<T>>,
    pub checks: Vec<Check>,
}

/// Default number of Haar trials and witness attempts used by [`analyze`].
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_BUDGET: usize = 1000;

/// Runs the checks appropriate to `relation` and assembles a [`Report`].
/// Errors signal internal inconsistency or malformed input, never a negative verdict.
pub fn analyze<T: Real>(op: &MatLinOp<T>, relation: Relation, tol: &ToleranceProfile, budget: usize) -> Result<Report<T>>
where
    StandardNormal: Distribution<T>,
{
    tol.validate()?;
    let mut checks = Vec::new();
    let bij = op.bijectivity(tol);
    checks.push(Check::new(
        "bijective",
        bij.bijective,
        format!("sigma_min = {:e}, sigma_max = {:e}, condition = {:e}", bij.sigma_min, bij.sigma_max, bij.condition),
    ));
    let mut counterexample = None;
    let mut verdict = None;

    let form = if !bij.bijective {
        let rank = op.rank(tol);
        let degenerate = rank <= op.field().real_dim();
        checks.push(Check::new(
            "degenerate_f_z",
            degenerate,
            format!("realified rank {rank} of {}", op.dim()),
        ));
        let mut msg = format!("bijectivity: operator is singular (realified rank {rank} of {})", op.dim());
        if degenerate {
            msg.push_str("; it has the degenerate form A -> f(A) Z");
        }
        CanonicalForm::unclassified(msg)
    } else if relation == Relation::Unitary {
        let check = maps_unitaries_to_multiples(op, DEFAULT_TRIALS, tol);
        checks.push(Check::new(
            "unitaries_to_multiples",
            check.pass,
            format!("{} unitaries tested, max relative spread {:e}", check.tested, check.max_spread.as_f64()),
        ));
        if !check.pass {
            counterexample = check.counterexample;
            CanonicalForm::unclassified("unitaries: a unitary is mapped to a non-multiple of a unitary")
        } else {
            match (op.n(), op.field()) {
                (1, _) => CanonicalForm::unclassified("dimension: n = 1 has no canonical form"),
                (2, Field::R) => match reduce_2x2_real(op, tol)? {
                    V12Verdict::V1V2Preserved { .. } => {
                        verdict = Some("V1V2Preserved".to_string());
                        checks.push(Check::new("v1_v2_invariant", true, "L(V1) = V1 and L(V2) = V2"));
                        CanonicalForm::unclassified("2x2 real: L = T(I)^-1 T leaves V1 and V2 invariant")
                    }
                    V12Verdict::No { reason } => {
                        checks.push(Check::new("v1_v2_invariant", false, reason.clone()));
                        CanonicalForm::unclassified(format!("v1_v2: {reason}"))
                    }
                },
                (2, Field::C) => reduce_2x2_complex(op, tol)?,
                _ => decompose_sandwich(op, tol)?,
            }
        }
    } else {
        classify_norm_mult_preserver(op, relation, tol)
    };
    if relation != Relation::Unitary {
        checks.push(Check::new(
            "classification",
            form.is_classified(),
            form.diagnostic().map_or_else(|| form.tag().to_string(), str::to_string),
        ));
    }

    let witness = if relation != Relation::Unitary && !form.is_classified() {
        let w = witness_nonpreservation(op, relation, tol, budget)?;
        checks.push(Check::new(
            "witness",
            w.is_some(),
            match &w {
                Some(w) => format!("{} pair breaks the relation (image residual {:e})", w.origin, w.image.residual.as_f64()),
                None => format!("no witness within budget {budget}"),
            },
        ));
        w
    } else {
        None
    };

    Ok(Report {
        verdict: verdict.unwrap_or_else(|| form.tag().to_string()),
        residual: form.residual,
        form,
        witness,
        counterexample,
        checks,
    })
}
