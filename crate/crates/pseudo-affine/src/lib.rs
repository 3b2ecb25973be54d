//! Binary Cantor sets from gap-proportion data, pseudo-affine branch pairs,
//! and diagnostics for their periodic data, χ traces and transfer operators.
//!
//! The numeric core is generic over [`Scalar`] (`f64` and `f32`); the `*64`
//! aliases below fix the usual choice.
//!
//! ```
//! use pseudo_affine::{realize, ProportionPair64};
//!
//! let thirds = ProportionPair64::constant(1.0 / 3.0).unwrap();
//! let table = realize(&thirds, 4, 1e-12).unwrap();
//! assert!((table.scale() - 1.0 / 3.0).abs() < 1e-15);
//! ```

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cantor;
pub mod error;
pub mod examples;
pub mod ifs;
pub mod proportions;
pub mod scalar;
pub mod transfer;
pub mod words;

pub use analysis::{
    chi_trace, conjugacy_verdict, fixed_point, linearize_branch, livsic_check, pseudo_affinity_report, BranchPair,
    ChiTrace, ExternalBranch, ExternalPair, LivsicReport, PeriodicPoint, Verdict,
};
pub use cantor::{proportions_of, realize, CantorGeometry, Gap, GapTable, Interval};
pub use error::{Error, ErrorKind, Result};
pub use examples::{as_proportions, gen_case_a, gen_case_b, EpsilonSequence, Regularity};
pub use ifs::{build_branches, regularity_report, BumpProfile, IfsBranchPair};
pub use proportions::{psi, sum_psi, ProportionPair, PsiSum};
pub use scalar::Scalar;
pub use transfer::{build_system, periodic_sum_check, verify_derivative_identity, Potential, TransferSystem};
pub use words::{Coding, Word};

pub type ProportionPair64 = ProportionPair<f64>;
pub type ProportionPair32 = ProportionPair<f32>;
pub type GapTable64 = GapTable<f64>;
pub type GapTable32 = GapTable<f32>;
pub type IfsBranchPair64 = IfsBranchPair<f64>;
pub type IfsBranchPair32 = IfsBranchPair<f32>;
pub type TransferSystem64 = TransferSystem<f64>;
pub type EpsilonSequence64 = EpsilonSequence<f64>;
