//! Linear preservers of unitaries and of norm-multiplicative pairs on
//! `M_n(R)` and `M_n(C)`.
//!
//! The crate represents real-linear operators on square matrix spaces,
//! tests whether they map unitaries to unitary multiples or preserve
//! norm-multiplicative pairs, builds every canonical preserver family and
//! decomposes a given preserver back into canonical form.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar type for the common cases.

pub mod canonize;
pub mod error;
pub mod families;
pub mod harness;
pub mod linalg;
pub mod linop;
pub mod matcore;
pub mod scalar;
pub mod specnorm;

pub use canonize::{analyze, classify_norm_mult_preserver, decompose_sandwich, CanonicalForm, Relation, Report};
pub use error::{Error, Result};
pub use families::{sandwich_op, sigma, su2_lift, FamilyDescriptor, SandwichForm, Variant};
pub use harness::{run_suite, SuiteConfig, SuiteReport};
pub use linop::{BasisElement, LinearityClass, LinearityTag, MatLinOp};
pub use matcore::{frobenius_inner, haar_unitary, unit, Field, Mat, ToleranceProfile};
pub use scalar::{Cx, Real};
pub use specnorm::{PairVerdict, Side};

pub type Mat64 = Mat<f64>;
pub type Mat32 = Mat<f32>;
pub type MatLinOp64 = MatLinOp<f64>;
pub type MatLinOp32 = MatLinOp<f32>;
pub type Cx64 = Cx<f64>;
