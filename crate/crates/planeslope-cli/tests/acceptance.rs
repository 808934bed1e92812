//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime (visible with `--nocapture`). Tolerances are pinned in the
//! constants below; every expected value is either exact arithmetic or
//! cross-checked against an independent closed form or the dual-number
//! oracle.

use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planeslope::autodiff::grad;
use planeslope::expr::ScalarField;
use planeslope::probe::{
    classify, estimate_limit, parametric_family_limit, slope_ladder, FrameKind, Ladder,
    ProbeConfig, Verdict,
};
use planeslope::rules::{
    check_linearity, check_product, check_quotient, sample_points, sample_points_with_margin,
    smooth_suite,
};
use planeslope::secantplane::{secant_slope, solve_cramer_2x2, solve_elimination, Frame};

fn counterexample() -> ScalarField {
    ScalarField::from_expr("x^2*y/(x^4+y^2)", 2)
        .unwrap()
        .with_override(vec![0.0, 0.0], 0.0)
        .unwrap()
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn report(number: usize, name: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "criterion {number} ({name}) took {elapsed:?}, budget {budget:?}"
    );
    println!("acceptance {number} ({name}): PASS in {elapsed:?}");
}

/// 1. Affine fields have exact secant slopes at random points, frames, and
///    scales: component error <= 1e-9, no limit taken.
#[test]
fn criterion_1_affine_exactness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let (alpha, beta, gamma) = (
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        let field =
            ScalarField::from_expr(&format!("({alpha})*x + ({beta})*y + ({gamma})"), 2).unwrap();
        let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let frame = loop {
            let t1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let t2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            if (t1 - t2).sin().abs() < 0.05 {
                continue;
            }
            let s: f64 = rng.random_range(0.01..1.0);
            break Frame::new(vec![
                vec![s * t1.cos(), s * t1.sin()],
                vec![s * t2.cos(), s * t2.sin()],
            ])
            .unwrap();
        };
        let slope = secant_slope(&field, &p, &frame).unwrap();
        let err = inf_dist(slope.components(), &[alpha, beta]);
        assert!(
            err <= 1e-9,
            "error {err} for ({alpha}, {beta}, {gamma}) at {p:?}"
        );
    }
    report(1, "affine exactness", started, Duration::from_secs(1));
}

/// 2. Computed secant slopes of the pathological field match its closed
///    form ( ab(a+b), s^2-ab ) / ((s^2+a^2)(s^2+b^2)) to 1e-12 for scales
///    halving from 1 down past 1e-20, with the spot value (0.6, -0.1) at
///    scale 1 for (1, 2).
#[test]
fn criterion_2_counterexample_closed_form() {
    let started = Instant::now();
    let field = counterexample();
    for (alpha, beta) in [(1.0, 2.0), (1.0, -1.0), (2.0, 3.0)] {
        let base = Frame::parametric(alpha, beta).unwrap();
        for j in 0..=67 {
            let scale = 0.5f64.powi(j);
            let slope = secant_slope(&field, &[0.0, 0.0], &base.scaled(scale)).unwrap();
            let l2 = scale * scale;
            let denom = (l2 + alpha * alpha) * (l2 + beta * beta);
            let expected = [
                alpha * beta * (alpha + beta) / denom,
                (l2 - alpha * beta) / denom,
            ];
            let err = inf_dist(slope.components(), &expected);
            assert!(
                err <= 1e-12,
                "error {err} at scale {scale} for ({alpha}, {beta})"
            );
        }
    }
    assert!(0.5f64.powi(67) <= 1e-20);
    let spot = secant_slope(&field, &[0.0, 0.0], &Frame::parametric(1.0, 2.0).unwrap()).unwrap();
    assert!(inf_dist(spot.components(), &[0.6, -0.1]) <= 1e-12);
    report(
        2,
        "counterexample closed form",
        started,
        Duration::from_secs(1),
    );
}

/// 3. The family limits ( (a+b)/ab, -1/ab ) come out of the ladder within
///    1e-6, namely (1.5, -0.5) for (1,2) and (0, 1) for (1,-1), and the
///    classifier rules the origin not derivable with witness separation at
///    least 1.5.
#[test]
fn criterion_3_counterexample_limits() {
    let started = Instant::now();
    let field = counterexample();
    let ladder = Ladder::default();
    let limit = parametric_family_limit(&field, &[0.0, 0.0], 1.0, 2.0, &ladder)
        .unwrap()
        .expect("family ladder converges");
    assert!(inf_dist(limit.components(), &[1.5, -0.5]) <= 1e-6);
    let limit = parametric_family_limit(&field, &[0.0, 0.0], 1.0, -1.0, &ladder)
        .unwrap()
        .expect("family ladder converges");
    assert!(inf_dist(limit.components(), &[0.0, 1.0]) <= 1e-6);

    match classify(&field, &[0.0, 0.0], &ProbeConfig::default()).unwrap() {
        Verdict::NotDerivable { separation, .. } => {
            assert!(separation >= 1.5 - 1e-6, "separation {separation}");
        }
        other => panic!("expected not derivable, got {other:?}"),
    }
    report(3, "counterexample limits", started, Duration::from_secs(1));
}

/// 4. Over ten smooth fields and 100 seeded points each, the classifier
///    says derivable and its estimate matches the dual-number gradient to
///    1e-5 * (1 + |grad|).
#[test]
fn criterion_4_gradient_equivalence() {
    let started = Instant::now();
    let config = ProbeConfig::default();
    let suite = smooth_suite();
    assert_eq!(suite.len(), 10);
    for (k, field) in suite.iter().enumerate() {
        let points = sample_points(100, 2, 4000 + k as u64);
        for p in &points {
            let g = grad(field, p).unwrap();
            match classify(field, p, &config).unwrap() {
                Verdict::Derivable { estimate, .. } => {
                    let tol = 1e-5 * (1.0 + inf_norm(&g));
                    let err = inf_dist(estimate.components(), &g);
                    assert!(err <= tol, "field {k} at {p:?}: error {err} over {tol}");
                }
                other => panic!("field {k} at {p:?}: expected derivable, got {other:?}"),
            }
        }
    }
    report(4, "gradient equivalence", started, Duration::from_secs(30));
}

/// 5. Linearity, product, and reciprocal rules pass at 1e-4 over 50 seeded
///    trials, and probing x^2*y^3 at (1,1) lands on (2,3) within 1e-5.
#[test]
fn criterion_5_calculus_rules() {
    let started = Instant::now();
    let seed = 42;
    let f_lin = ScalarField::from_expr("x^2*y^3", 2).unwrap();
    let g_lin = ScalarField::from_expr("x^2 - y^2", 2).unwrap();
    let report_lin = check_linearity(
        &f_lin,
        &g_lin,
        2.0,
        3.0,
        &sample_points(50, 2, seed ^ 1),
        seed,
    );
    assert!(
        report_lin.passed && report_lin.max_error <= 1e-4,
        "{report_lin:?}"
    );

    let f_prod = ScalarField::from_expr("x^2", 2).unwrap();
    let g_prod = ScalarField::from_expr("y^3", 2).unwrap();
    let report_prod = check_product(&f_prod, &g_prod, &sample_points(50, 2, seed ^ 2), seed);
    assert!(
        report_prod.passed && report_prod.max_error <= 1e-4,
        "{report_prod:?}"
    );

    let f_quot = ScalarField::from_expr("x^2 + y^2 + 1", 2).unwrap();
    let report_quot = check_quotient(
        &f_quot,
        &sample_points_with_margin(&f_quot, 1e-3, 50, seed ^ 3),
        seed,
    );
    assert!(
        report_quot.passed && report_quot.max_error <= 1e-4,
        "{report_quot:?}"
    );

    match classify(&f_lin, &[1.0, 1.0], &ProbeConfig::default()).unwrap() {
        Verdict::Derivable { estimate, .. } => {
            assert!(inf_dist(estimate.components(), &[2.0, 3.0]) <= 1e-5);
        }
        other => panic!("expected derivable, got {other:?}"),
    }
    report(5, "calculus rules", started, Duration::from_secs(60));
}

/// 6. The closed 2x2 form and pivoted elimination agree to 1e-12 on 1000
///    random frames with conditioning >= 1e-3.
#[test]
fn criterion_6_solver_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..1000 {
        let frame = loop {
            let t1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let t2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let candidate =
                Frame::new(vec![vec![t1.cos(), t1.sin()], vec![t2.cos(), t2.sin()]]).unwrap();
            if candidate.conditioning() >= 1e-3 {
                break candidate;
            }
        };
        let slope = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let deltas: Vec<f64> = frame
            .dirs()
            .iter()
            .map(|row| row[0] * slope[0] + row[1] * slope[1])
            .collect();
        let cramer = solve_cramer_2x2(&frame, &deltas).unwrap();
        let elim = solve_elimination(&frame, &deltas).unwrap();
        let diff = cramer.inf_dist(&elim);
        assert!(diff <= 1e-12, "solver disagreement {diff} on {frame:?}");
    }
    report(6, "solver equivalence", started, Duration::from_secs(1));
}

/// 7. Three variables: probing x*y*z at (1,1,1) over random 3-frames
///    reproduces the oracle gradient (1,1,1) within 1e-5.
#[test]
fn criterion_7_three_dimensional_generalisation() {
    let started = Instant::now();
    let field = ScalarField::from_expr("x*y*z", 3).unwrap();
    let p = [1.0, 1.0, 1.0];
    let g = grad(&field, &p).unwrap();
    assert_eq!(g, vec![1.0, 1.0, 1.0]);

    let config = ProbeConfig {
        frames: 20,
        ..ProbeConfig::default()
    };
    match classify(&field, &p, &config).unwrap() {
        Verdict::Derivable { estimate, .. } => {
            assert!(inf_dist(estimate.components(), &g) <= 1e-5);
        }
        other => panic!("expected derivable, got {other:?}"),
    }
    // Each random rotation ladder individually converges to the gradient.
    let battery = planeslope::probe::frame_battery(3, &config);
    let rotations: Vec<_> = battery
        .iter()
        .filter(|d| matches!(d.kind, FrameKind::Rotation { .. }))
        .collect();
    assert_eq!(rotations.len(), 20);
    for descriptor in rotations {
        let samples = slope_ladder(&field, &p, &descriptor.to_frame(), &config.ladder()).unwrap();
        let limit = estimate_limit(&samples, config.tol_conv).expect("ladder converges");
        assert!(inf_dist(limit.components(), &g) <= 1e-5);
    }
    report(
        7,
        "three-dimensional generalisation",
        started,
        Duration::from_secs(5),
    );
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planeslope"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// 8. CLI end to end: the probe examples reproduce their verdicts byte-
///    stably across two runs with seed 42, and the counterexample scan has
///    exactly one not-derivable cell, at the origin.
#[test]
fn criterion_8_cli_end_to_end() {
    let started = Instant::now();
    let probes: [(&[&str], &str); 3] = [
        (
            &["probe", "--fn", "x^2*y^3", "--at", "1,1", "--seed", "42"],
            "derivable",
        ),
        (
            &[
                "probe",
                "--fn",
                "x^2*y/(x^4+y^2)",
                "--override",
                "0,0=0",
                "--at",
                "0,0",
                "--seed",
                "42",
            ],
            "not_derivable",
        ),
        (
            &["probe", "--fn", "x", "--at", "7,7", "--seed", "42"],
            "derivable",
        ),
    ];
    for (args, expected) in probes {
        let first = run_cli(args);
        let second = run_cli(args);
        assert!(first.status.success());
        assert_eq!(first.stdout, second.stdout, "probe output not byte-stable");
        let json: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
        assert_eq!(json["verdict"], expected);
        assert_eq!(json["schema"], "planeslope/1");
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let out = run_cli(&[
        "scan",
        "--fn",
        "x^2*y/(x^4+y^2)",
        "--override",
        "0,0=0",
        "--box",
        "-1,1,-1,1",
        "--res",
        "5",
        "--seed",
        "42",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    let bad: Vec<&str> = csv
        .lines()
        .filter(|l| l.contains(",not_derivable,"))
        .collect();
    assert_eq!(bad.len(), 1, "expected exactly one not-derivable cell");
    assert!(bad[0].starts_with("0,0,not_derivable,"));
    report(8, "cli end-to-end", started, Duration::from_secs(30));
}
