//! Numerical checks of the calculus rules obeyed by secant-plane limits.
//!
//! Each check runs the probe (or the direct slope solver, for the affine
//! rule) on both sides of an identity at sampled points and reports the
//! worst disagreement:
//!
//! - affine: the slope of `ax + by + c` is `(a, b)` at every point, frame,
//!   and scale, with no limit taken;
//! - linearity: `probe(af + bg) = a probe(f) + b probe(g)`;
//! - product: `probe(fg) = probe(f) g + f probe(g)`;
//! - quotient: `probe(1/f) = -probe(f) / f^2`;
//! - gradient equivalence: `probe(f)` matches the dual-number gradient.
//!
//! Points where a probe is not `Derivable` (or a value is not evaluable)
//! are skipped and recorded, never counted as passes or failures; the
//! counterexample field at its bad point shows up as a skip.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff;
use crate::expr::{BinaryOp, ExprAst, ScalarField};
use crate::parallel::map_collect;
use crate::probe::{classify, ProbeConfig, Verdict};
use crate::secantplane::{secant_slope, Frame, Slope};

/// Tolerance for the affine rule; the slope is exact up to solver rounding.
pub const TOL_AFFINE: f64 = 1e-9;
/// Tolerance for identities with a probe estimate on both sides.
pub const TOL_RULE: f64 = 1e-4;
/// Tolerance for probe-versus-gradient agreement, relative to
/// `1 + |grad|`.
pub const TOL_GRADIENT: f64 = 1e-5;
/// Sampling box half-width: points are drawn from `[-2, 2]^n`.
pub const SAMPLE_HALF_WIDTH: f64 = 2.0;
/// Quotient trials reject points where `|f|` is within this margin of the
/// singularity.
pub const QUOTIENT_MARGIN: f64 = 1e-3;

/// The curated smooth fields used for gradient-agreement sweeps. All are
/// smooth on the whole sampling box with moderate curvature.
pub const SMOOTH_SUITE_EXPRS: [&str; 10] = [
    "3*x + 2*y + 1",
    "x^2*y^3",
    "x^2 + y^2",
    "x*y",
    "sin(x)*cos(y)",
    "exp((x + y)/2)",
    "sin(x*y)",
    "sqrt(1 + x^2 + y^2)",
    "ln(x^2 + y^2 + 2)",
    "x^3 - 2*x*y + y^2",
];

pub fn smooth_suite() -> Vec<ScalarField> {
    SMOOTH_SUITE_EXPRS
        .iter()
        .map(|e| ScalarField::from_expr(e, 2).expect("suite expressions parse"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    Affine,
    Linearity,
    Product,
    Quotient,
    GradientEquivalence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleFailure {
    pub point: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub point: Vec<f64>,
    pub reason: String,
}

/// Outcome of one rule check. `passed` holds exactly when `failures` is
/// empty, which holds exactly when `max_error <= tolerance`; skips do not
/// count against the rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleReport {
    pub rule: RuleId,
    pub trials: usize,
    pub tolerance: f64,
    pub max_error: f64,
    pub failures: Vec<RuleFailure>,
    pub skipped: Vec<SkippedPoint>,
    pub passed: bool,
}

enum Trial {
    Checked {
        point: Vec<f64>,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        error: f64,
    },
    Skipped {
        point: Vec<f64>,
        reason: String,
    },
}

fn assemble(rule: RuleId, trials: usize, tolerance: f64, outcomes: Vec<Trial>) -> RuleReport {
    let mut max_error = 0.0f64;
    let mut failures = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            Trial::Checked {
                point,
                lhs,
                rhs,
                error,
            } => {
                max_error = max_error.max(error);
                if error > tolerance {
                    failures.push(RuleFailure { point, lhs, rhs });
                }
            }
            Trial::Skipped { point, reason } => skipped.push(SkippedPoint { point, reason }),
        }
    }
    let passed = failures.is_empty();
    RuleReport {
        rule,
        trials,
        tolerance,
        max_error,
        failures,
        skipped,
        passed,
    }
}

/// Uniform points in the sampling box.
pub fn sample_points(count: usize, arity: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..arity)
                .map(|_| rng.random_range(-SAMPLE_HALF_WIDTH..SAMPLE_HALF_WIDTH))
                .collect()
        })
        .collect()
}

/// Uniform points in the sampling box with `|f| >= margin`, for quotient
/// sampling away from singularities.
pub fn sample_points_with_margin(
    field: &ScalarField,
    margin: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 1000 * (count + 1) {
        attempts += 1;
        let p: Vec<f64> = (0..field.arity())
            .map(|_| rng.random_range(-SAMPLE_HALF_WIDTH..SAMPLE_HALF_WIDTH))
            .collect();
        if matches!(field.eval(&p), Ok(v) if v.abs() >= margin) {
            out.push(p);
        }
    }
    out
}

fn probe_estimate(field: &ScalarField, p: &[f64], config: &ProbeConfig) -> Result<Slope, String> {
    match classify(field, p, config) {
        Ok(Verdict::Derivable { estimate, .. }) => Ok(estimate),
        Ok(Verdict::NotDerivable { .. }) => Err("not derivable".into()),
        Ok(Verdict::Inconclusive { reason }) => Err(format!("inconclusive: {reason:?}")),
        Err(e) => Err(format!("probe error: {e}")),
    }
}

fn combine(op: BinaryOp, a: &ExprAst, b: &ExprAst) -> ExprAst {
    ExprAst::Binary(op, Box::new(a.clone()), Box::new(b.clone()))
}

fn scaled(c: f64, a: &ExprAst) -> ExprAst {
    combine(BinaryOp::Mul, &ExprAst::Constant(c), a)
}

// Rule checks combine fields through their expressions; overrides do not
// carry over into the combined field.
fn combined_field(arity: usize, ast: ExprAst) -> ScalarField {
    ScalarField::new(arity, ast).expect("combined expression stays within arity")
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// The slope of `alpha x + beta y + gamma` equals `(alpha, beta)` at random
/// points, frames, and scales: exactly, with no limit taken.
pub fn check_affine(alpha: f64, beta: f64, gamma: f64, trials: usize, seed: u64) -> RuleReport {
    let ast = combine(
        BinaryOp::Add,
        &combine(
            BinaryOp::Add,
            &scaled(alpha, &ExprAst::Variable(0)),
            &scaled(beta, &ExprAst::Variable(1)),
        ),
        &ExprAst::Constant(gamma),
    );
    let field = combined_field(2, ast);
    let expected = [alpha, beta];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(Vec<f64>, Frame)> = (0..trials)
        .map(|_| {
            let p = vec![
                rng.random_range(-SAMPLE_HALF_WIDTH..SAMPLE_HALF_WIDTH),
                rng.random_range(-SAMPLE_HALF_WIDTH..SAMPLE_HALF_WIDTH),
            ];
            let frame = loop {
                let t1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let t2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                if (t1 - t2).sin().abs() < 0.05 {
                    continue;
                }
                let scale: f64 = rng.random_range(0.01..1.0);
                break Frame::new(vec![
                    vec![scale * t1.cos(), scale * t1.sin()],
                    vec![scale * t2.cos(), scale * t2.sin()],
                ])
                .expect("unit rows are nonzero");
            };
            (p, frame)
        })
        .collect();

    let outcomes = map_collect(true, cases, |(point, frame)| {
        match secant_slope(&field, &point, &frame) {
            Ok(slope) => {
                let lhs = slope.components().to_vec();
                let error = inf_dist(&lhs, &expected);
                Trial::Checked {
                    point,
                    lhs,
                    rhs: expected.to_vec(),
                    error,
                }
            }
            Err(e) => Trial::Skipped {
                point,
                reason: format!("slope error: {e}"),
            },
        }
    });
    assemble(RuleId::Affine, trials, TOL_AFFINE, outcomes)
}

/// `probe(alpha f + beta g) = alpha probe(f) + beta probe(g)` at the given
/// points.
pub fn check_linearity(
    f: &ScalarField,
    g: &ScalarField,
    alpha: f64,
    beta: f64,
    points: &[Vec<f64>],
    seed: u64,
) -> RuleReport {
    assert_eq!(f.arity(), g.arity(), "fields must share an arity");
    let comb = combined_field(
        f.arity(),
        combine(
            BinaryOp::Add,
            &scaled(alpha, f.ast()),
            &scaled(beta, g.ast()),
        ),
    );
    let config = ProbeConfig {
        seed,
        ..ProbeConfig::default()
    };

    let outcomes = map_collect(true, points.to_vec(), |point| {
        let lhs = match probe_estimate(&comb, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("combination: {reason}"),
                }
            }
        };
        let ef = match probe_estimate(f, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("f: {reason}"),
                }
            }
        };
        let eg = match probe_estimate(g, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("g: {reason}"),
                }
            }
        };
        let rhs: Vec<f64> = ef
            .components()
            .iter()
            .zip(eg.components())
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let lhs = lhs.components().to_vec();
        let error = inf_dist(&lhs, &rhs);
        Trial::Checked {
            point,
            lhs,
            rhs,
            error,
        }
    });
    assemble(RuleId::Linearity, points.len(), TOL_RULE, outcomes)
}

/// `probe(fg) = probe(f) g + f probe(g)` at the given points.
pub fn check_product(
    f: &ScalarField,
    g: &ScalarField,
    points: &[Vec<f64>],
    seed: u64,
) -> RuleReport {
    assert_eq!(f.arity(), g.arity(), "fields must share an arity");
    let prod = combined_field(f.arity(), combine(BinaryOp::Mul, f.ast(), g.ast()));
    let config = ProbeConfig {
        seed,
        ..ProbeConfig::default()
    };

    let outcomes = map_collect(true, points.to_vec(), |point| {
        let (fv, gv) = match (f.eval(&point), g.eval(&point)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                return Trial::Skipped {
                    point,
                    reason: "value not evaluable".into(),
                }
            }
        };
        let lhs = match probe_estimate(&prod, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("product: {reason}"),
                }
            }
        };
        let ef = match probe_estimate(f, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("f: {reason}"),
                }
            }
        };
        let eg = match probe_estimate(g, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("g: {reason}"),
                }
            }
        };
        let rhs: Vec<f64> = ef
            .components()
            .iter()
            .zip(eg.components())
            .map(|(a, b)| a * gv + fv * b)
            .collect();
        let lhs = lhs.components().to_vec();
        let error = inf_dist(&lhs, &rhs);
        Trial::Checked {
            point,
            lhs,
            rhs,
            error,
        }
    });
    assemble(RuleId::Product, points.len(), TOL_RULE, outcomes)
}

/// `probe(1/f) = -probe(f) / f^2` at points with `|f| >= 1e-6`.
pub fn check_quotient(f: &ScalarField, points: &[Vec<f64>], seed: u64) -> RuleReport {
    let recip = combined_field(
        f.arity(),
        combine(BinaryOp::Div, &ExprAst::Constant(1.0), f.ast()),
    );
    let config = ProbeConfig {
        seed,
        ..ProbeConfig::default()
    };

    let outcomes = map_collect(true, points.to_vec(), |point| {
        let fv = match f.eval(&point) {
            Ok(v) => v,
            Err(e) => {
                return Trial::Skipped {
                    point,
                    reason: format!("value: {e}"),
                }
            }
        };
        if fv.abs() < 1e-6 {
            return Trial::Skipped {
                point,
                reason: "precondition |f| >= 1e-6".into(),
            };
        }
        let lhs = match probe_estimate(&recip, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("reciprocal: {reason}"),
                }
            }
        };
        let ef = match probe_estimate(f, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("f: {reason}"),
                }
            }
        };
        let rhs: Vec<f64> = ef.components().iter().map(|a| -a / (fv * fv)).collect();
        let lhs = lhs.components().to_vec();
        let error = inf_dist(&lhs, &rhs);
        Trial::Checked {
            point,
            lhs,
            rhs,
            error,
        }
    });
    assemble(RuleId::Quotient, points.len(), TOL_RULE, outcomes)
}

/// Probe estimate versus dual-number gradient, error relative to
/// `1 + |grad|`.
pub fn check_gradient_equivalence(f: &ScalarField, points: &[Vec<f64>], seed: u64) -> RuleReport {
    let config = ProbeConfig {
        seed,
        ..ProbeConfig::default()
    };
    let outcomes = map_collect(true, points.to_vec(), |point| {
        let grad = match autodiff::grad(f, &point) {
            Ok(g) => g,
            Err(e) => {
                return Trial::Skipped {
                    point,
                    reason: format!("gradient: {e}"),
                }
            }
        };
        let est = match probe_estimate(f, &point, &config) {
            Ok(s) => s,
            Err(reason) => {
                return Trial::Skipped {
                    point,
                    reason: format!("probe: {reason}"),
                }
            }
        };
        let norm = grad.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let lhs = est.components().to_vec();
        let error = inf_dist(&lhs, &grad) / (1.0 + norm);
        Trial::Checked {
            point,
            lhs,
            rhs: grad,
            error,
        }
    });
    assemble(
        RuleId::GradientEquivalence,
        points.len(),
        TOL_GRADIENT,
        outcomes,
    )
}

/// The curated run behind `rules` on the command line: one instance of each
/// rule with `trials` points per check.
pub fn curated_reports(trials: usize, seed: u64) -> Vec<RuleReport> {
    let f_lin = ScalarField::from_expr("x^2*y^3", 2).unwrap();
    let g_lin = ScalarField::from_expr("x^2 - y^2", 2).unwrap();
    let f_prod = ScalarField::from_expr("x^2", 2).unwrap();
    let g_prod = ScalarField::from_expr("y^3", 2).unwrap();
    let f_quot = ScalarField::from_expr("x^2 + y^2 + 1", 2).unwrap();
    let f_grad = ScalarField::from_expr("sin(x)*exp(y)", 2).unwrap();

    vec![
        check_affine(3.0, 2.0, 1.0, trials, seed),
        check_linearity(
            &f_lin,
            &g_lin,
            2.0,
            3.0,
            &sample_points(trials, 2, seed ^ 1),
            seed,
        ),
        check_product(&f_prod, &g_prod, &sample_points(trials, 2, seed ^ 2), seed),
        check_quotient(
            &f_quot,
            &sample_points_with_margin(&f_quot, QUOTIENT_MARGIN, trials, seed ^ 3),
            seed,
        ),
        check_gradient_equivalence(&f_grad, &sample_points(trials, 2, seed ^ 4), seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(text: &str) -> ScalarField {
        ScalarField::from_expr(text, 2).unwrap()
    }

    #[test]
    fn affine_rule_holds() {
        let report = check_affine(3.0, 2.0, 1.0, 100, 42);
        assert!(report.passed, "max error {}", report.max_error);
        assert!(report.max_error <= 1e-9);
        assert_eq!(report.trials, 100);
        assert!(report.skipped.is_empty());
    }

    #[test]
    fn affine_degenerate_instances() {
        // x' = (1, 0) and a constant has slope (0, 0).
        let report = check_affine(1.0, 0.0, 0.0, 20, 7);
        assert!(report.passed);
        let report = check_affine(0.0, 0.0, 5.0, 20, 7);
        assert!(report.passed);
    }

    #[test]
    fn linearity_with_trivial_weights_is_exact() {
        // alpha = 1, beta = 0 compares a probe against itself bit for bit.
        let f = field("x^2*y^3");
        let g = field("x^2 - y^2");
        let points = sample_points(5, 2, 11);
        let report = check_linearity(&f, &g, 1.0, 0.0, &points, 42);
        assert!(report.passed);
        assert_eq!(report.max_error, 0.0);
    }

    #[test]
    fn linearity_at_a_known_point() {
        // 2 x^2 + 3 y^2 has gradient (4, 6) at (1, 1).
        let f = field("x^2");
        let g = field("y^2");
        let report = check_linearity(&f, &g, 2.0, 3.0, &[vec![1.0, 1.0]], 42);
        assert!(report.passed);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn product_with_constant_one_is_exact() {
        let f = field("x^2*y^3");
        let one = field("1");
        let points = sample_points(5, 2, 13);
        let report = check_product(&f, &one, &points, 42);
        assert!(report.passed);
        assert!(report.max_error <= 1e-12);
    }

    #[test]
    fn product_of_coordinates() {
        // probe(xy) at (2, 5) is (5, 2) = y (1,0) + x (0,1).
        let f = field("x");
        let g = field("y");
        let report = check_product(&f, &g, &[vec![2.0, 5.0]], 42);
        assert!(report.passed, "max error {}", report.max_error);
    }

    #[test]
    fn quotient_examples() {
        // (1/y)' = (0, -1/y^2): at (1, 2) that is (0, -0.25).
        let f = field("y");
        let report = check_quotient(&f, &[vec![1.0, 2.0]], 42);
        assert!(report.passed, "max error {}", report.max_error);

        let c = field("2");
        let report = check_quotient(&c, &[vec![0.3, 0.7]], 42);
        assert!(report.passed);
        assert!(report.max_error <= 1e-12);

        let f = field("x^2 + y^2 + 1");
        let report = check_quotient(&f, &[vec![1.0, 1.0]], 42);
        assert!(report.passed, "max error {}", report.max_error);
    }

    #[test]
    fn quotient_skips_near_zero_values() {
        let f = field("y");
        let report = check_quotient(&f, &[vec![1.0, 1e-9]], 42);
        assert_eq!(report.skipped.len(), 1);
        assert!(report.passed);
    }

    #[test]
    fn gradient_equivalence_at_the_origin() {
        let f = field("sin(x)*exp(y)");
        let report = check_gradient_equivalence(&f, &[vec![0.0, 0.0]], 42);
        assert!(report.passed, "max error {}", report.max_error);
        // grad = (cos 0 e^0, sin 0 e^0) = (1, 0)
        assert!(report.failures.is_empty());
    }

    #[test]
    fn gradient_equivalence_skips_the_counterexample_origin() {
        let f = field("x^2*y/(x^4+y^2)")
            .with_override(vec![0.0, 0.0], 0.0)
            .unwrap();
        let report = check_gradient_equivalence(&f, &[vec![0.0, 0.0]], 42);
        assert_eq!(report.skipped.len(), 1);
        assert!(report.failures.is_empty());
        assert!(report.passed);
        assert_eq!(report.max_error, 0.0);
    }

    #[test]
    fn report_coherence() {
        for report in curated_reports(10, 42) {
            assert_eq!(report.passed, report.failures.is_empty());
            assert_eq!(report.passed, report.max_error <= report.tolerance);
        }
    }
}
