//! A desk-scale global solver kernel for factorable mixed-integer nonlinear
//! programs.
//!
//! The kernel combines:
//! - an expression graph with per-operator evaluation, differentiation,
//!   interval propagation, simplification, and linear estimation,
//! - two extended formulations (one for propagation, one for the LP
//!   relaxation) built by a structure-detection loop,
//! - feasibility-based bound tightening over interval arithmetic,
//! - structure-specific relaxation handlers (quadratic, second-order cone,
//!   convex/concave, quotient),
//! - a mixing-cut separator for variable-bound relations,
//! - score-based spatial branching,
//! - a dense bounded-variable primal simplex,
//! - a spatial branch-and-bound driver.

pub mod expr;
pub mod extform;
pub mod interval;
pub mod lp;
pub mod model;
pub mod nlq;
pub mod prop;
pub mod sepa;
pub mod soc;

pub use expr::{ExprGraph, NodeId, Op, Var, VarOrigin, VarType};
pub use interval::Interval;

/// Values with absolute value at or beyond this threshold are treated as
/// infinite throughout the solver.
pub const INF: f64 = 1e20;
