//! Exact arithmetic in F_{q^2} together with the machinery to build and
//! cross-validate families of permutation polynomials of the form
//!
//! ```text
//! f(x) = (a·x^q + b·x + c)^r · φ((a·x^q + b·x + c)^((q²−1)/d)) + u·x^q + v·x
//! ```
//!
//! The crate provides:
//!
//! * [`field`]: table-driven arithmetic in F_q ⊂ F_{q^2} (exp/log/Zech
//!   tables, deterministic construction),
//! * [`poly`]: polynomials over F_{q^2}, value tables and the brute-force
//!   permutation oracles,
//! * [`agw`]: empirical checks of the commutative-diagram bijectivity
//!   criterion over explicit finite sets,
//! * [`families`]: the family builder, its reduced maps g and h, and the
//!   structural sets S and U_n,
//! * [`rules`]: the registry of closed-form permutation criteria,
//! * [`sweep`]: deterministic grid enumeration, cross-validation against the
//!   brute-force oracle, and machine-readable reports.

pub mod agw;
pub mod bitset;
pub mod families;
pub mod field;
pub mod poly;
pub mod rng;
pub mod rules;
pub mod sweep;
pub(crate) mod util;

pub use agw::{AgwError, Diagram, EquivalenceSides};
pub use families::{DerivedCoeffs, Decomposition, FamilyError, FamilyEval, FamilyParams, LambdaPartition, ReducedMap};
pub use field::{FieldCtx, FieldElem, FieldError, FieldSpec, DEFAULT_TABLE_BOUND};
pub use poly::{FuncTable, Poly, PolyError};
pub use rules::{HypothesisCheck, RuleId, RuleSemantics, Verdict};
pub use sweep::{CheckMode, CheckReport, GridError, GridSpec, SweepOptions, SweepSummary};
