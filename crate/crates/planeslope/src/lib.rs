//! Secant-plane slopes and numerical derivability for scalar fields of `n`
//! real variables.
//!
//! Given a field `f` and a base point `p`, a *frame* of `n` linearly
//! independent direction vectors determines a secant plane through the graph
//! of `f`. Its slope vector solves the linear system `slope . dir_i =
//! f(p + dir_i) - f(p)`. Shrinking the frame along a geometric ladder of
//! scales and watching the slopes stabilise yields a numerical derivative;
//! frames whose ladders stabilise to *different* limits witness that no
//! derivative exists at `p`.
//!
//! The crate is organised around that pipeline:
//!
//! - [`expr`]: parse and evaluate n-variate expressions, with exact
//!   point-value overrides for piecewise definitions.
//! - [`autodiff`]: forward-mode dual numbers, the exact gradient oracle.
//! - [`secantplane`]: increments, frame conditioning, and the slope solvers.
//! - [`probe`]: shrinking-scale ladders, limit detection, and the
//!   derivable / not-derivable / inconclusive classifier.
//! - [`rules`]: numerical checks of the calculus rules (affine, linearity,
//!   product, reciprocal, gradient agreement).
//! - [`scan`]: grid classification over a rectangle with CSV output.
//!
//! ```
//! use planeslope::expr::ScalarField;
//! use planeslope::probe::{classify, ProbeConfig, Verdict};
//!
//! let field = ScalarField::from_expr("x^2*y^3", 2).unwrap();
//! let verdict = classify(&field, &[1.0, 1.0], &ProbeConfig::default()).unwrap();
//! match verdict {
//!     Verdict::Derivable { estimate, .. } => {
//!         assert!((estimate.components()[0] - 2.0).abs() < 1e-5);
//!         assert!((estimate.components()[1] - 3.0).abs() < 1e-5);
//!     }
//!     other => panic!("expected derivable, got {other:?}"),
//! }
//! ```
//!
//! With the default `parallel` feature, frame ladders, rule trials, and scan
//! cells run on a rayon pool; results are aggregated in a fixed order, so
//! output is bit-identical to the sequential fallback
//! (`--no-default-features`).

pub mod autodiff;
pub mod expr;
mod parallel;
pub mod probe;
pub mod rules;
pub mod scan;
pub mod secantplane;

/// Schema tag stamped on every JSON document the CLI emits.
pub const JSON_SCHEMA: &str = "planeslope/1";

pub use expr::{ExprAst, ScalarField};
pub use probe::{ProbeConfig, Verdict};
pub use secantplane::{Frame, Slope};
