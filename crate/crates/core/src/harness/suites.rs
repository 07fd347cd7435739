use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::generators::{gen_norm_mult_pair, gen_sesqui_non_pair, gen_sesqui_pair, with_top_vectors};
use super::rng::case_rng;
use crate::canonize::{
    classify_norm_mult_preserver, decompose_sandwich, maps_unitaries_to_multiples, reduce_2x2_complex,
    reduce_2x2_real, witness_nonpreservation, FormPayload, Relation,
};
use crate::error::{Error, Result};
use crate::families::{l0_apply, sandwich_op, MuTwistForm, PhiCForm, TwoByTwoForm, Variant};
use crate::linalg::{svd, RMat};
use crate::linop::MatLinOp;
use crate::matcore::{gaussian_matrix, haar_unitary, inner_unchecked, random_unit_vector, unit, Field, Mat, ToleranceProfile};
use crate::scalar::{cx, Cx};
use crate::specnorm::{
    is_unitary_multiple, lam1_witness, norm_mult_direct, norm_mult_structural, rot_refl_decompose, sesqui_direct,
    sesqui_mult, v1_v2_bases, Side,
};

type M = Mat<f64>;
type Op = MatLinOp<f64>;

/// The seeded verification suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteId {
    ThmMain1,
    Lam1,
    Main2,
    Generalization,
    PUnitary,
    N2Real,
    N2Complex,
    TN2,
    BasicLemma,
}

impl SuiteId {
    pub const ALL: [SuiteId; 9] = [
        SuiteId::ThmMain1,
        SuiteId::Lam1,
        SuiteId::Main2,
        SuiteId::Generalization,
        SuiteId::PUnitary,
        SuiteId::N2Real,
        SuiteId::N2Complex,
        SuiteId::TN2,
        SuiteId::BasicLemma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteId::ThmMain1 => "thm_main1",
            SuiteId::Lam1 => "lam1",
            SuiteId::Main2 => "main2",
            SuiteId::Generalization => "generalization",
            SuiteId::PUnitary => "p_unitary",
            SuiteId::N2Real => "n2_real",
            SuiteId::N2Complex => "n2_complex",
            SuiteId::TN2 => "t_n2",
            SuiteId::BasicLemma => "basic_lemma",
        }
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite {s:?}")))
    }
}

/// Deliberate breakage of the `Φ_c` family, used to check that suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Scale `V1` by `c` instead of `V2`. This equals `c Φ_{1/c}`, so it is
    /// still a preserver and the suites keep passing.
    PhiCOnV1,
    /// Scale only the `E11 - E22` direction of `V2`.
    PhiCPartialV2,
}

fn default_dims() -> Vec<usize> {
    vec![2, 3, 4, 5]
}

fn default_fields() -> Vec<Field> {
    vec![Field::R, Field::C]
}

fn default_trials() -> usize {
    200
}

fn default_suites() -> Vec<SuiteId> {
    SuiteId::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_fields")]
    pub fields: Vec<Field>,
    #[serde(default = "default_trials")]
    pub trials_per_case: usize,
    #[serde(default)]
    pub tol: ToleranceProfile,
    #[serde(default = "default_suites")]
    pub suites: Vec<SuiteId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            fields: default_fields(),
            trials_per_case: default_trials(),
            tol: ToleranceProfile::default(),
            suites: default_suites(),
            mutation: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidParameter("dims must be a nonempty list of positive sizes".into()));
        }
        if self.fields.is_empty() {
            return Err(Error::InvalidParameter("fields must be nonempty".into()));
        }
        if self.trials_per_case == 0 {
            return Err(Error::InvalidParameter("trials_per_case must be at least 1".into()));
        }
        if self.suites.is_empty() {
            return Err(Error::InvalidParameter("suites must be nonempty".into()));
        }
        self.tol.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseFailure {
    /// Case index within the suite; `None` for suite-level harness errors.
    pub case: Option<usize>,
    pub inputs: Value,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    /// Negative controls that were correctly rejected.
    pub controls_rejected: usize,
    pub failures: Vec<CaseFailure>,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub all_passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl SuiteReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    SandwichRoundTrip(Variant),
    PerturbedSandwich,
    DegenerateTrace,
    UnitaryMultiple,
    NonMultiple,
    RandomPairs,
    ConstructedPairs,
    NonPairs,
    ProductPreserver,
    NonScalarW,
    Transpose,
    SesquiPreserver { conj: bool },
    TransposedSandwich,
    UnitaryPreserver,
    SwapMap,
    RandomOperator,
    TracePlus,
    PhiC,
    MuTwist,
    NonTwist,
    StarEquivalence,
}

#[derive(Clone, Copy, Debug, Serialize)]
struct Case {
    n: usize,
    field: Field,
    kind: Kind,
    #[serde(skip)]
    control: bool,
}

struct Failure {
    detail: String,
    extra: Value,
}

type Outcome = std::result::Result<(), Failure>;

fn fail<T>(detail: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure { detail: detail.into(), extra: Value::Null })
}

fn fail_with<T>(detail: impl Into<String>, extra: Value) -> std::result::Result<T, Failure> {
    Err(Failure { detail: detail.into(), extra })
}

fn ensure(cond: bool, detail: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        fail(detail())
    }
}

fn lift<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure { detail: format!("error: {e}"), extra: Value::Null })
}

fn enumerate_cases(suite: SuiteId, cfg: &SuiteConfig) -> Vec<Case> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Case>, n, field, kind, control, reps: usize| {
        out.extend((0..reps).map(|_| Case { n, field, kind, control }));
    };
    for &n in &cfg.dims {
        for &field in &cfg.fields {
            let c = &mut out;
            match suite {
                SuiteId::ThmMain1 if n >= 3 => {
                    for v in Variant::ALL {
                        push(c, n, field, Kind::SandwichRoundTrip(v), false, 2);
                    }
                    push(c, n, field, Kind::PerturbedSandwich, true, 2);
                    push(c, n, field, Kind::DegenerateTrace, true, 1);
                }
                SuiteId::Lam1 => {
                    push(c, n, field, Kind::UnitaryMultiple, false, 3);
                    if n >= 2 {
                        push(c, n, field, Kind::NonMultiple, true, 3);
                    }
                }
                SuiteId::BasicLemma => {
                    push(c, n, field, Kind::RandomPairs, false, 2);
                    push(c, n, field, Kind::ConstructedPairs, false, 2);
                    if n >= 2 {
                        push(c, n, field, Kind::NonPairs, true, 1);
                    }
                }
                SuiteId::Main2 if n >= 2 => {
                    push(c, n, field, Kind::ProductPreserver, false, 3);
                    if n >= 3 {
                        push(c, n, field, Kind::NonScalarW, true, 2);
                    }
                    push(c, n, field, Kind::Transpose, true, 1);
                }
                SuiteId::Generalization if n >= 3 => {
                    push(c, n, field, Kind::SesquiPreserver { conj: false }, false, 2);
                    if field == Field::C {
                        push(c, n, field, Kind::SesquiPreserver { conj: true }, false, 2);
                    }
                    push(c, n, field, Kind::TransposedSandwich, true, 1);
                }
                SuiteId::PUnitary if n == 2 => {
                    push(c, n, field, Kind::UnitaryPreserver, false, 4);
                    if field == Field::R {
                        push(c, n, field, Kind::SwapMap, false, 2);
                        push(c, n, field, Kind::RandomOperator, true, 2);
                    }
                    push(c, n, field, Kind::TracePlus, true, 1);
                }
                SuiteId::N2Real if n == 2 && field == Field::R => {
                    push(c, n, field, Kind::PhiC, false, 6);
                    push(c, n, field, Kind::TracePlus, true, 1);
                    push(c, n, field, Kind::Transpose, true, 1);
                }
                SuiteId::N2Complex if n == 2 && field == Field::C => {
                    push(c, n, field, Kind::MuTwist, false, 6);
                    push(c, n, field, Kind::NonTwist, true, 2);
                    push(c, n, field, Kind::Transpose, true, 1);
                }
                SuiteId::TN2 if n == 2 => {
                    push(c, n, field, Kind::StarEquivalence, false, 4);
                    push(c, n, field, Kind::Transpose, true, 1);
                }
                _ => {}
            }
        }
    }
    out
}

/// Runs the configured suites. Every case draws from its own stream derived
/// from `(seed, suite, case index)`, so the report does not depend on how
/// cases are scheduled across threads.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let suites: Vec<SuiteResult> = cfg.suites.iter().map(|&id| run_one(id, cfg)).collect();
    Ok(SuiteReport { config: cfg.clone(), all_passed: suites.iter().all(SuiteResult::ok), suites })
}

fn run_one(id: SuiteId, cfg: &SuiteConfig) -> SuiteResult {
    let cases = enumerate_cases(id, cfg);
    let outcomes: Vec<Outcome> = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = case_rng(cfg.tol.seed, id.name(), i as u64);
            let ctx = Ctx { cfg, suite: id, case, seed: rng.random() };
            ctx.run(&mut rng)
        })
        .collect();
    let mut failures = Vec::new();
    let mut controls_rejected = 0;
    for (i, (case, outcome)) in cases.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(()) => controls_rejected += usize::from(case.control),
            Err(f) => {
                let mut inputs = serde_json::to_value(case).expect("case serializes");
                if !f.extra.is_null() {
                    inputs["data"] = f.extra;
                }
                failures.push(CaseFailure { case: Some(i), inputs, detail: f.detail });
            }
        }
    }
    if controls_rejected == 0 {
        let detail = if cases.is_empty() {
            "harness error: no cases apply to the configured dims and fields"
        } else {
            "harness error: no negative control was rejected"
        };
        failures.push(CaseFailure { case: None, inputs: Value::Null, detail: detail.into() });
    }
    SuiteResult {
        name: id.name().to_string(),
        cases: cases.len(),
        passed: cases.len() - failures.iter().filter(|f| f.case.is_some()).count(),
        controls_rejected,
        failures,
    }
}

struct Ctx<'a> {
    cfg: &'a SuiteConfig,
    suite: SuiteId,
    case: &'a Case,
    /// Seed for randomized checks inside library calls.
    seed: u64,
}

fn nonzero_scalar(field: Field, rng: &mut ChaCha8Rng) -> Cx<f64> {
    let m = rng.random_range(0.3..3.0);
    match field {
        Field::R => cx(if rng.random_bool(0.5) { m } else { -m }, 0.0),
        Field::C => Cx::from_polar(m, rng.random_range(0.0..std::f64::consts::TAU)),
    }
}

fn random_mu(rng: &mut ChaCha8Rng) -> Cx<f64> {
    let im = rng.random_range(0.1..2.0);
    cx(rng.random_range(-2.0..2.0), if rng.random_bool(0.5) { im } else { -im })
}

fn trace_plus(n: usize, field: Field) -> Op {
    let e = unit::<f64>(0, 1.min(n - 1), n, field).expect("index in range");
    Op::from_fn(field, n, move |x| x + &e.scale(x.trace()))
}

/// `Φ_c`, or its mutated version, inside `X ↦ γ · left · U Φ(X) Uᵀ`.
fn phi_c_family(gamma: f64, c: f64, u: &M, left: &M, mutation: Option<Mutation>, tol: &ToleranceProfile) -> Op {
    let Some(m) = mutation else {
        return PhiCForm::with_left(gamma, c, u.clone(), left.clone(), tol).expect("valid parameters").to_op();
    };
    let (v1, v2) = v1_v2_bases::<f64>();
    let scales = match m {
        Mutation::PhiCOnV1 => [c, c, 1.0, 1.0],
        Mutation::PhiCPartialV2 => [1.0, 1.0, c, 1.0],
    };
    let basis = [v1[0].clone(), v1[1].clone(), v2[0].clone(), v2[1].clone()];
    let (u, left) = (u.clone(), left.clone());
    Op::from_fn(Field::R, 2, move |x| {
        let mut y = M::zeros(2, 2, Field::R);
        for (b, s) in basis.iter().zip(scales) {
            y = &y + &b.scale_real(s * inner_unchecked(x, b).re / 2.0);
        }
        (&left * &(&(&u * &y) * &u.transpose())).scale_real(gamma)
    })
}

fn mat_json(m: &M) -> Value {
    serde_json::to_value(m).expect("matrix serializes")
}

impl Ctx<'_> {
    fn tol(&self) -> ToleranceProfile {
        self.cfg.tol.with_seed(self.seed)
    }

    fn trials(&self) -> usize {
        self.cfg.trials_per_case
    }

    fn run(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let Case { n, field, kind, .. } = *self.case;
        match kind {
            Kind::SandwichRoundTrip(variant) => self.sandwich_round_trip(n, field, variant, rng),
            Kind::PerturbedSandwich => self.perturbed_sandwich(n, field, rng),
            Kind::DegenerateTrace => self.degenerate_trace(n, field, rng),
            Kind::UnitaryMultiple => self.unitary_multiple(n, field, rng),
            Kind::NonMultiple => self.non_multiple(n, field, rng),
            Kind::RandomPairs => self.random_pairs(n, field, rng),
            Kind::ConstructedPairs => self.constructed_pairs(n, field, rng),
            Kind::NonPairs => self.non_pairs(n, field, rng),
            Kind::ProductPreserver => self.product_preserver(n, field, rng),
            Kind::NonScalarW => self.non_scalar_w(n, field, rng),
            Kind::Transpose => self.transpose_control(n, field),
            Kind::SesquiPreserver { conj } => self.sesqui_preserver(n, field, conj, rng),
            Kind::TransposedSandwich => self.transposed_sandwich(n, field, rng),
            Kind::UnitaryPreserver => self.unitary_preserver(field, rng),
            Kind::SwapMap => self.swap_map(rng),
            Kind::RandomOperator => self.random_operator(rng),
            Kind::TracePlus => self.trace_plus_control(n, field),
            Kind::PhiC => self.phi_c_case(rng),
            Kind::MuTwist => self.mu_twist_case(rng),
            Kind::NonTwist => self.non_twist(rng),
            Kind::StarEquivalence => self.star_equivalence(field, rng),
        }
    }

    /// Applies `op` to `trials` constructed pairs of `relation` and checks the images.
    fn preserves(&self, op: &Op, relation: Relation, rng: &mut ChaCha8Rng) -> Outcome {
        let (n, field, tol) = (op.n(), op.field(), self.tol());
        for k in 0..self.trials() {
            let (a, b) = match relation.side() {
                Some(side) => gen_sesqui_pair::<f64, _>(n, field, side, rng),
                None => gen_norm_mult_pair::<f64, _>(n, field, rng),
            };
            let check = |a: &M, b: &M| match relation.side() {
                Some(side) => sesqui_direct(a, b, side, &tol),
                None => norm_mult_direct(a, b, &tol),
            };
            let src = lift(check(&a, &b))?;
            if src.residual > 1e-10 * src.rhs.max(1.0) {
                return fail_with(format!("generated {relation} pair {k} is off by {:e}", src.residual), json!({"a": mat_json(&a), "b": mat_json(&b)}));
            }
            let img = lift(check(&lift(op.apply(&a))?, &lift(op.apply(&b))?))?;
            if !img.holds {
                return fail_with(
                    format!("{relation} pair {k} not preserved: image lhs {} vs rhs {}", img.lhs, img.rhs),
                    json!({"witness_a": mat_json(&a), "witness_b": mat_json(&b), "origin": "constructed"}),
                );
            }
        }
        Ok(())
    }

    fn classify_expect(&self, op: &Op, relation: Relation, tag: &str) -> std::result::Result<FormPayload<f64>, Failure> {
        let tol = self.tol();
        let form = classify_norm_mult_preserver(op, relation, &tol);
        if form.tag() != tag {
            let mut detail = format!("{relation}: expected {tag}, got {}", form.tag());
            if let Some(d) = form.diagnostic() {
                detail.push_str(&format!(" ({d})"));
            }
            if let Ok(Some(w)) = witness_nonpreservation(op, relation, &tol, 1000) {
                return fail_with(detail, json!({"witness_a": mat_json(&w.a), "witness_b": mat_json(&w.b), "origin": w.origin}));
            }
            return fail(detail);
        }
        match form.residual {
            Some(r) if r <= tol.eq_rel => Ok(form.payload),
            r => fail(format!("{relation}: residual {r:?} above eq_rel")),
        }
    }

    fn sandwich_round_trip(&self, n: usize, field: Field, variant: Variant, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let r = rng.random_range(0.1..5.0);
        let u: M = haar_unitary(n, field, rng);
        let v: M = haar_unitary(n, field, rng);
        let op = lift(sandwich_op(r, &u, &v, variant, &tol))?;
        let check = maps_unitaries_to_multiples(&op, self.trials(), &tol);
        ensure(check.pass && check.max_spread <= 1e-8, || format!("unitary images: spread {:e}", check.max_spread))?;
        let form = lift(decompose_sandwich(&op, &tol))?;
        let FormPayload::Sandwich { r: rr, variant: vv, .. } = &form.payload else {
            return fail(format!("decomposition: {}", form.diagnostic().unwrap_or("unexpected tag")));
        };
        let expect = if field == Field::R { Variant::from_flags(false, variant.has_transpose()) } else { variant };
        ensure(*vv == expect, || format!("variant {vv:?}, expected {expect:?}"))?;
        ensure((rr - r).abs() <= 1e-9 * r, || format!("r = {rr}, expected {r}"))?;
        let res = form.residual.unwrap_or(f64::INFINITY);
        ensure(res <= tol.eq_rel, || format!("residual {res:e}"))?;
        // Rank-one matrices stay rank one.
        for _ in 0..self.trials().min(100) {
            let x: M = random_unit_vector(n, field, rng);
            let y: M = random_unit_vector(n, field, rng);
            let s = svd(&lift(op.apply(&(&x * &y.adjoint())))?).s;
            ensure(s[1] <= 1e-8 * s[0], || format!("rank-one image has s2/s1 = {:e}", s[1] / s[0]))?;
        }
        Ok(())
    }

    fn perturbed_sandwich(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let u: M = haar_unitary(n, field, rng);
        let v: M = haar_unitary(n, field, rng);
        let base = lift(sandwich_op(1.0, &u, &v, Variant::Id, &tol))?;
        let eps = rng.random_range(0.05..0.5);
        let d = base.dim();
        let g: M = gaussian_matrix(d, d, Field::R, rng);
        let noise = RMat::from_columns(d, &(0..d).map(|j| (0..d).map(|i| eps * g[(i, j)].re).collect()).collect::<Vec<_>>());
        let op = lift(Op::from_real_matrix(field, n, base.matrix().add(&noise)))?;
        let check = maps_unitaries_to_multiples(&op, self.trials(), &tol);
        ensure(!check.pass && check.counterexample.is_some(), || "perturbed sandwich passed the unitary test".into())?;
        ensure(
            matches!(decompose_sandwich(&op, &tol), Err(Error::Precondition(_))),
            || "decomposition accepted a non-preserver".into(),
        )
    }

    fn degenerate_trace(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let z: M = haar_unitary(n, field, rng);
        let op = Op::from_fn(field, n, |x| z.scale(x.trace()));
        let check = maps_unitaries_to_multiples(&op, self.trials(), &tol);
        ensure(check.pass, || "tr(A) Z must send unitaries to multiples of Z".into())?;
        ensure(!op.is_bijective(&tol), || "tr(A) Z reported bijective".into())?;
        ensure(
            matches!(decompose_sandwich(&op, &tol), Err(Error::Precondition(_))),
            || "decomposition accepted a singular operator".into(),
        )
    }

    fn unitary_multiple(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let a = haar_unitary::<f64, _>(n, field, rng).scale(nonzero_scalar(field, rng));
        ensure(is_unitary_multiple(&a, &tol).is_some(), || "unitary multiple not recognized".into())?;
        for k in 0..self.trials() {
            let mut b: M = gaussian_matrix(n, n, field, rng);
            if k % 4 == 3 && n > 1 {
                b.set_column(0, &M::zeros(n, 1, field));
            }
            let p = lift(norm_mult_direct(&a, &b, &tol))?;
            let s = lift(sesqui_direct(&a, &b, Side::StarRight, &tol))?;
            ensure(p.holds && s.holds, || format!("B #{k}: |AB| = {} vs {}", p.lhs, p.rhs))?;
        }
        Ok(())
    }

    fn non_multiple(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let a: M = with_top_vectors(n, field, None, None, rng);
        ensure(is_unitary_multiple(&a, &tol).is_none(), || "gapped matrix taken for a unitary multiple".into())?;
        let w = lam1_witness(&a);
        let p = lift(norm_mult_direct(&a, &w, &tol))?;
        let s = lift(sesqui_direct(&a, &w.adjoint(), Side::StarRight, &tol))?;
        ensure(!p.holds && !s.holds, || "witness B = Q* E_nn did not break multiplicativity".into())
    }

    fn random_pairs(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        for k in 0..self.trials() {
            let a: M = gaussian_matrix(n, n, field, rng);
            let b: M = match k % 4 {
                0 => a.clone(),
                1 => haar_unitary::<f64, _>(n, field, rng).scale_real(rng.random_range(0.5..2.0)),
                _ => gaussian_matrix(n, n, field, rng),
            };
            let d = lift(norm_mult_direct(&a, &b, &tol))?;
            let s = lift(norm_mult_structural(&a, &b, &tol))?;
            if d.holds != s.holds {
                return fail_with(format!("pair {k}: direct {} vs structural {}", d.holds, s.holds), json!({"a": mat_json(&a), "b": mat_json(&b)}));
            }
            for side in [Side::StarLeft, Side::StarRight] {
                lift(sesqui_mult(&a, &b, side, &tol))?;
            }
        }
        Ok(())
    }

    fn constructed_pairs(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        for k in 0..self.trials() {
            let (a, b) = gen_norm_mult_pair::<f64, _>(n, field, rng);
            let d = lift(norm_mult_direct(&a, &b, &tol))?;
            ensure(d.residual <= 1e-10 * d.rhs, || format!("generated pair {k} off by {:e}", d.residual))?;
            ensure(lift(norm_mult_structural(&a, &b, &tol))?.holds, || format!("structural test rejects pair {k}"))?;
            for side in [Side::StarLeft, Side::StarRight] {
                let (a, b) = gen_sesqui_pair::<f64, _>(n, field, side, rng);
                ensure(lift(sesqui_mult(&a, &b, side, &tol))?.holds, || format!("{side:?} pair {k} rejected"))?;
            }
        }
        Ok(())
    }

    fn non_pairs(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        for k in 0..self.trials() {
            for side in [Side::StarLeft, Side::StarRight] {
                let (a, b) = gen_sesqui_non_pair::<f64, _>(n, field, side, rng);
                ensure(!lift(sesqui_mult(&a, &b, side, &tol))?.holds, || format!("{side:?} non-pair {k} accepted"))?;
            }
        }
        Ok(())
    }

    fn product_preserver(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let u: M = haar_unitary(n, field, rng);
        match (n, field) {
            (2, Field::R) => {
                let gamma = nonzero_scalar(Field::R, rng).re;
                let c = rng.random_range(0.1..10.0);
                let op = phi_c_family(gamma, c, &u, &M::identity(2, Field::R), self.cfg.mutation, &tol);
                self.preserves(&op, Relation::Product, rng)?;
                self.classify_expect(&op, Relation::Product, "PhiC").map(drop)
            }
            (2, Field::C) => {
                let v: M = haar_unitary(2, field, rng);
                let op = lift(MuTwistForm::new(nonzero_scalar(field, rng), random_mu(rng), u, v, &tol))?.to_op();
                self.preserves(&op, Relation::Product, rng)?;
                self.classify_expect(&op, Relation::Product, "MuTwist").map(drop)
            }
            _ => {
                let gamma = nonzero_scalar(field, rng);
                let conj = field == Field::C && rng.random_bool(0.5);
                let variant = Variant::from_flags(conj, false);
                let ua = u.adjoint();
                let op = Op::from_fn(field, n, |x| (&(&u * &variant.apply(x)) * &ua).scale(gamma));
                self.preserves(&op, Relation::Product, rng)?;
                let FormPayload::Sandwich { gamma: Some(g), .. } = self.classify_expect(&op, Relation::Product, "Sandwich")? else {
                    return fail("product classification did not fold the scalar");
                };
                ensure((g - gamma).norm() <= 1e-9 * gamma.norm(), || format!("gamma {g}, expected {gamma}"))
            }
        }
    }

    fn non_scalar_w(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let w: M = haar_unitary(n, field, rng);
        let op = lift(sandwich_op(1.0, &M::identity(n, field), &w, Variant::Id, &tol))?;
        let Some(wt) = lift(witness_nonpreservation(&op, Relation::Product, &tol, 1000))? else {
            return fail("no witness within budget 1000");
        };
        let q = (&w * &wt.a).trace().norm();
        ensure(wt.origin == "xx*" && q < 1.0, || format!("witness {} with |x*Wx| = {q}", wt.origin))
    }

    /// Transposition against the suite's relation: `(E11, E12)` for products,
    /// `(E11, E21)` and the `Φ∘T∘Φ` partner for the star relations.
    fn transpose_control(&self, n: usize, field: Field) -> Outcome {
        let tol = self.tol();
        let op = Op::transposition(n, field);
        let e = |i, j| unit::<f64>(i, j, n, field).expect("index in range");
        let mut checks = vec![(op.clone(), Relation::Product)];
        if self.suite == SuiteId::TN2 {
            let (ta, tb) = (lift(op.apply(&e(0, 0)))?, lift(op.apply(&e(1, 0)))?);
            ensure(!lift(sesqui_direct(&ta, &tb, Side::StarRight, &tol))?.holds, || "(E11, E21) image is a star_right pair".into())?;
            checks = vec![(op.clone(), Relation::StarRight), (op.adjoint_conjugate(), Relation::StarLeft)];
        } else {
            let (ta, tb) = (lift(op.apply(&e(0, 0)))?, lift(op.apply(&e(0, 1)))?);
            let v = lift(norm_mult_direct(&ta, &tb, &tol))?;
            ensure(v.lhs == 0.0 && v.rhs == 1.0, || format!("(E11, E12) image gives {} vs {}", v.lhs, v.rhs))?;
        }
        for (t, rel) in checks {
            let form = classify_norm_mult_preserver(&t, rel, &tol);
            ensure(!form.is_classified(), || format!("transposition classified as {} under {rel}", form.tag()))?;
            ensure(lift(witness_nonpreservation(&t, rel, &tol, 1000))?.is_some(), || format!("no {rel} witness"))?;
        }
        Ok(())
    }

    fn sesqui_preserver(&self, n: usize, field: Field, conj: bool, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let u: M = haar_unitary(n, field, rng);
        let v: M = haar_unitary(n, field, rng);
        let op = lift(sandwich_op(rng.random_range(0.1..5.0), &u, &v, Variant::from_flags(conj, false), &tol))?;
        for rel in [Relation::StarLeft, Relation::StarRight] {
            self.preserves(&op, rel, rng)?;
            self.classify_expect(&op, rel, "Sandwich")?;
        }
        Ok(())
    }

    fn transposed_sandwich(&self, n: usize, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let u: M = haar_unitary(n, field, rng);
        let v: M = haar_unitary(n, field, rng);
        let op = lift(sandwich_op(rng.random_range(0.1..5.0), &u, &v, Variant::Transpose, &tol))?;
        let e = |i, j| unit::<f64>(i, j, n, field).expect("index in range");
        let (a, b) = (e(0, 0), e(1, 0));
        ensure(lift(sesqui_direct(&a, &b, Side::StarRight, &tol))?.holds, || "(E11, E21) must be a star_right pair".into())?;
        let img = lift(sesqui_direct(&lift(op.apply(&a))?, &lift(op.apply(&b))?, Side::StarRight, &tol))?;
        ensure(!img.holds, || "(E11, E21) image still a star_right pair".into())?;
        for rel in [Relation::StarLeft, Relation::StarRight] {
            ensure(!classify_norm_mult_preserver(&op, rel, &tol).is_classified(), || format!("classified under {rel}"))?;
            ensure(lift(witness_nonpreservation(&op, rel, &tol, 1000))?.is_some(), || format!("no {rel} witness"))?;
        }
        Ok(())
    }

    fn unitary_preserver(&self, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let left: M = haar_unitary(2, field, rng);
        match field {
            Field::R => {
                let u: M = haar_unitary(2, field, rng);
                let op = phi_c_family(nonzero_scalar(field, rng).re, rng.random_range(0.1..10.0), &u, &left, self.cfg.mutation, &tol);
                self.real_unitary_equivalence(&op, true)
            }
            Field::C => {
                let a1 = rng.random_range(1.0..3.0);
                let a2 = rng.random_range(0.5..a1);
                let a3 = rng.random_range(0.2..a2) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let a = [a1, a2, a3];
                let b = [0; 3].map(|_| rng.random_range(-1.0..1.0));
                let mu = random_mu(rng);
                let form = TwoByTwoForm {
                    t_identity: left.scale(nonzero_scalar(field, rng)),
                    u: haar_unitary(2, field, rng),
                    v: haar_unitary(2, field, rng),
                    mu,
                    a,
                    b,
                };
                let op = form.to_op();
                let check = maps_unitaries_to_multiples(&op, self.trials(), &tol);
                ensure(check.pass, || format!("unitary images: spread {:e}", check.max_spread))?;
                let red = lift(reduce_2x2_complex(&op, &tol))?;
                let FormPayload::TwoByTwoUnitaryForm(p) = &red.payload else {
                    return fail(format!("reduction: {}", red.diagnostic().unwrap_or("unexpected tag")));
                };
                ensure((p.mu - mu).norm() <= 1e-8, || format!("mu {} vs {mu}", p.mu))?;
                ensure(p.a.iter().zip(a).all(|(x, y)| (x - y).abs() <= 1e-8), || format!("a {:?} vs {a:?}", p.a))?;
                let nb = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>();
                ensure((nb(&p.b) - nb(&b)).abs() <= 1e-8, || format!("b {:?} vs {b:?}", p.b))?;
                ensure(red.residual.is_some_and(|r| r <= tol.eq_rel), || "reduction residual too large".into())
            }
        }
    }

    /// Both sides of the real 2x2 criterion must agree with `expect`.
    fn real_unitary_equivalence(&self, op: &Op, expect: bool) -> Outcome {
        let tol = self.tol();
        let check = maps_unitaries_to_multiples(op, self.trials(), &tol);
        let red = lift(reduce_2x2_real(op, &tol))?;
        ensure(check.pass == expect && red.preserved() == expect, || {
            format!("unitary images pass: {}, V1/V2 invariance: {}, expected {expect}", check.pass, red.preserved())
        })
    }

    fn swap_map(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let (v1, v2) = v1_v2_bases::<f64>();
        let w: M = haar_unitary(2, Field::R, rng);
        let g = nonzero_scalar(Field::R, rng).re;
        let op = Op::from_fn(Field::R, 2, |x| {
            let c = |b: &M| inner_unchecked(x, b).re / 2.0;
            let y = &(&(&v1[0].scale_real(c(&v1[0])) + &v1[1].scale_real(c(&v1[1]))) + &v2[1].scale_real(2.0 * c(&v2[0])))
                + &v2[0].scale_real(c(&v2[1]) / 2.0);
            (&w * &y).scale_real(g)
        });
        self.real_unitary_equivalence(&op, true)
    }

    fn random_operator(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let g: M = gaussian_matrix(4, 4, Field::R, rng);
        let cols: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| g[(i, j)].re).collect()).collect();
        let op = lift(Op::from_real_matrix(Field::R, 2, RMat::from_columns(4, &cols)))?;
        ensure(op.is_bijective(&self.tol()), || "random operator is singular".into())?;
        self.real_unitary_equivalence(&op, false)
    }

    fn trace_plus_control(&self, n: usize, field: Field) -> Outcome {
        let tol = self.tol();
        let op = trace_plus(n, field);
        let check = maps_unitaries_to_multiples(&op, self.trials(), &tol);
        ensure(!check.pass && check.counterexample.is_some(), || "A + E12 tr(A) passed the unitary test".into())?;
        if n == 2 && field == Field::R {
            ensure(!lift(reduce_2x2_real(&op, &tol))?.preserved(), || "V1/V2 invariance accepted A + E12 tr(A)".into())?;
        }
        if n == 2 && field == Field::C {
            ensure(reduce_2x2_complex(&op, &tol).is_err(), || "complex reduction accepted A + E12 tr(A)".into())?;
        }
        let form = classify_norm_mult_preserver(&op, Relation::Product, &tol);
        ensure(!form.is_classified(), || format!("A + E12 tr(A) classified as {}", form.tag()))?;
        ensure(lift(witness_nonpreservation(&op, Relation::Product, &tol, 1000))?.is_some(), || "no product witness".into())
    }

    fn phi_c_case(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let gamma = nonzero_scalar(Field::R, rng).re;
        let c = rng.random_range(0.1..10.0);
        let u: M = haar_unitary(2, Field::R, rng);
        let id = M::identity(2, Field::R);
        let op = phi_c_family(gamma, c, &u, &id, self.cfg.mutation, &tol);
        ensure(lift(op.apply(&id))?.approx_eq(&id.scale_real(gamma), tol.eq_abs), || "T(I) is not gamma I".into())?;
        self.preserves(&op, Relation::Product, rng)?;
        self.preserves(&op, Relation::StarRight, rng)?;
        let FormPayload::PhiC(p) = self.classify_expect(&op, Relation::Product, "PhiC")? else { unreachable!() };
        ensure((p.gamma - gamma).abs() <= 1e-9 * gamma.abs(), || format!("gamma {} vs {gamma}", p.gamma))?;
        ensure((p.c - c).abs() <= 1e-9 * c, || format!("c {} vs {c}", p.c))?;
        ensure(p.u.approx_eq(&u, 1e-9) || p.u.approx_eq(&(-&u), 1e-9), || "U not recovered up to sign".into())?;
        for _ in 0..self.trials() {
            let b: M = gaussian_matrix(2, 2, Field::R, rng);
            let rr = lift(rot_refl_decompose(&b))?;
            let back = &rr.rotation.scale_real(rr.alpha) + &rr.reflection.scale_real(rr.beta);
            ensure(back.approx_eq(&b, 1e-12 * b.max_abs().max(1.0)), || "B = alpha Q + beta U fails".into())?;
        }
        Ok(())
    }

    fn mu_twist_case(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let gamma = nonzero_scalar(Field::C, rng);
        let mu = random_mu(rng);
        let u: M = haar_unitary(2, Field::C, rng);
        let v: M = haar_unitary(2, Field::C, rng);
        let op = lift(MuTwistForm::new(gamma, mu, u, v, &tol))?.to_op();
        self.preserves(&op, Relation::Product, rng)?;
        let FormPayload::MuTwist(p) = self.classify_expect(&op, Relation::Product, "MuTwist")? else { unreachable!() };
        ensure((p.mu - mu).norm() <= 1e-8, || format!("mu {} vs {mu}", p.mu))?;
        ensure((p.gamma - gamma).norm() <= 1e-8 * gamma.norm(), || format!("gamma {} vs {gamma}", p.gamma))?;
        // |d11|^2 - |d22|^2 = (1 - t^2) Im(mu) for D = P* L0(P diag(1, t) Q*) Q.
        let pp: M = haar_unitary(2, Field::C, rng);
        let qq: M = haar_unitary(2, Field::C, rng);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let a = &(&pp * &M::diag_real(&[1.0, t], Field::C)) * &qq.adjoint();
            let d = &(&pp.adjoint() * &l0_apply(mu, &a)) * &qq;
            let lhs = d[(0, 0)].norm_sqr() - d[(1, 1)].norm_sqr();
            let rhs = (1.0 - t * t) * mu.im;
            ensure((lhs - rhs).abs() <= 1e-9, || format!("t = {t}: {lhs} vs {rhs}"))?;
            ensure(d[(0, 1)].norm() <= 1e-9 && d[(1, 0)].norm() <= 1e-9, || format!("t = {t}: D is not diagonal"))?;
        }
        Ok(())
    }

    fn non_twist(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let form = TwoByTwoForm {
            t_identity: M::identity(2, Field::C),
            u: haar_unitary(2, Field::C, rng),
            v: haar_unitary(2, Field::C, rng),
            mu: random_mu(rng),
            a: [3.0, 2.0, 1.0],
            b: [1.0, 0.0, 0.0],
        };
        let op = form.to_op();
        ensure(maps_unitaries_to_multiples(&op, self.trials(), &tol).pass, || "TwoByTwoForm failed the unitary test".into())?;
        let f = classify_norm_mult_preserver(&op, Relation::Product, &tol);
        ensure(!f.is_classified(), || format!("a = (3, 2, 1) classified as {}", f.tag()))
    }

    fn star_equivalence(&self, field: Field, rng: &mut ChaCha8Rng) -> Outcome {
        let tol = self.tol();
        let left: M = haar_unitary(2, field, rng);
        let u: M = haar_unitary(2, field, rng);
        let (op, tag) = match field {
            Field::R => (
                phi_c_family(nonzero_scalar(field, rng).re, rng.random_range(0.1..10.0), &u, &left, self.cfg.mutation, &tol),
                "PhiC",
            ),
            Field::C => {
                let v: M = haar_unitary(2, field, rng);
                let f = lift(MuTwistForm::with_left(nonzero_scalar(field, rng), random_mu(rng), u, v, left, &tol))?;
                (f.to_op(), "MuTwist")
            }
        };
        let partner = op.adjoint_conjugate();
        self.preserves(&op, Relation::StarRight, rng)?;
        self.preserves(&partner, Relation::StarLeft, rng)?;
        self.classify_expect(&op, Relation::StarRight, tag)?;
        self.classify_expect(&partner, Relation::StarLeft, tag)?;
        Ok(())
    }
}
