use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matcore::{random_unit_vector, unitary_with_first_column, Field, Mat};
use crate::scalar::{re, Real};
use crate::specnorm::Side;

/// A constructed pair with the unit vector used to build it.
#[derive(Clone, Debug)]
pub struct ConstructedPair<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    /// Norm-attaining vector of `B` (product) or the shared vector (sesquilinear).
    pub x: Mat<T>,
}

/// Singular spectrum with `s1 ∈ [1, 3)` and every other value at most `0.9 s1`.
pub fn gapped_spectrum<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    let s1: f64 = rng.random_range(1.0..3.0);
    let mut s = vec![T::lit(s1)];
    s.extend((1..n).map(|_| T::lit(rng.random_range(0.0..0.9) * s1)));
    s
}

/// `P diag(s) Q*` with `P e1 = left` and `Q e1 = right` (either may be random).
pub fn with_top_vectors<T: Real, R: Rng + ?Sized>(
    n: usize,
    field: Field,
    left: Option<&Mat<T>>,
    right: Option<&Mat<T>>,
    rng: &mut R,
) -> Mat<T>
where
    StandardNormal: Distribution<T>,
{
    let pick = |v: Option<&Mat<T>>, rng: &mut R| {
        let x = v.cloned().unwrap_or_else(|| random_unit_vector(n, field, rng));
        unitary_with_first_column(&x, rng)
    };
    let p = pick(left, rng);
    let q = pick(right, rng);
    let s = gapped_spectrum::<T, R>(n, rng);
    let d = Mat::from_fn(n, n, field, |i, j| if i == j { re(s[i]) } else { re(T::zero()) });
    &(&p * &d) * &q.adjoint()
}

/// Pair with `‖AB‖ = ‖A‖‖B‖`: `B` attains its norm at `x` and `A` at `Bx/‖Bx‖`.
pub fn gen_norm_mult_instance<T: Real, R: Rng + ?Sized>(n: usize, field: Field, rng: &mut R) -> ConstructedPair<T>
where
    StandardNormal: Distribution<T>,
{
    let x = random_unit_vector(n, field, rng);
    let b = with_top_vectors(n, field, None, Some(&x), rng);
    let y = (&b * &x).normalized();
    let a = with_top_vectors(n, field, None, Some(&y), rng);
    ConstructedPair { a, b, x }
}

pub fn gen_norm_mult_pair<T: Real, R: Rng + ?Sized>(n: usize, field: Field, rng: &mut R) -> (Mat<T>, Mat<T>)
where
    StandardNormal: Distribution<T>,
{
    let p = gen_norm_mult_instance(n, field, rng);
    (p.a, p.b)
}

/// Pair sharing a top right (`StarRight`) or top left (`StarLeft`) singular vector.
pub fn gen_sesqui_instance<T: Real, R: Rng + ?Sized>(
    n: usize,
    field: Field,
    side: Side,
    rng: &mut R,
) -> ConstructedPair<T>
where
    StandardNormal: Distribution<T>,
{
    let x = random_unit_vector(n, field, rng);
    let (a, b) = match side {
        Side::StarRight => (
            with_top_vectors(n, field, None, Some(&x), rng),
            with_top_vectors(n, field, None, Some(&x), rng),
        ),
        Side::StarLeft => (
            with_top_vectors(n, field, Some(&x), None, rng),
            with_top_vectors(n, field, Some(&x), None, rng),
        ),
    };
    ConstructedPair { a, b, x }
}

pub fn gen_sesqui_pair<T: Real, R: Rng + ?Sized>(n: usize, field: Field, side: Side, rng: &mut R) -> (Mat<T>, Mat<T>)
where
    StandardNormal: Distribution<T>,
{
    let p = gen_sesqui_instance(n, field, side, rng);
    (p.a, p.b)
}

/// Pair whose top vectors are orthogonal, so the sesquilinear relation fails.
pub fn gen_sesqui_non_pair<T: Real, R: Rng + ?Sized>(
    n: usize,
    field: Field,
    side: Side,
    rng: &mut R,
) -> (Mat<T>, Mat<T>)
where
    StandardNormal: Distribution<T>,
{
    assert!(n >= 2, "orthogonal top vectors need n >= 2");
    let x = random_unit_vector(n, field, rng);
    let frame = unitary_with_first_column(&x, rng);
    let y = frame.column(1);
    match side {
        Side::StarRight => (
            with_top_vectors(n, field, None, Some(&x), rng),
            with_top_vectors(n, field, None, Some(&y), rng),
        ),
        Side::StarLeft => (
            with_top_vectors(n, field, Some(&x), None, rng),
            with_top_vectors(n, field, Some(&y), None, rng),
        ),
    }
}
