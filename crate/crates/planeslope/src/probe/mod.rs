//! Shrinking-scale ladders and the derivability classifier.
//!
//! A [`Ladder`] shrinks a frame through geometric scales `s0 * rho^j` and
//! records one [`SlopeSample`] per rung. When the slopes stabilise, the tail
//! sample estimates the limit; when ladders over *different* frames
//! stabilise to separated limits, no limit can exist and the two ladders are
//! witnesses. [`classify`] runs a battery of frames (the canonical axes,
//! seeded random rotations, and in two dimensions the slanted pairs
//! `h = s(1, alpha)`, `k = s(1, beta)`) and folds the per-frame outcomes
//! into a [`Verdict`].
//!
//! Numerical honesty rules the edges. Increments that fall into the
//! floating-point cancellation floor are flagged and the flagged tail is
//! excluded from convergence detection; a probe that cannot tell is
//! [`Verdict::Inconclusive`], never a guess. `NotDerivable` requires two
//! individually convergent ladders separated by more than `tol_sep`.

mod config;

pub use config::{ConfigError, ProbeConfig};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, ScalarField};
use crate::parallel::map_collect;
use crate::secantplane::{secant_slope_detail, Frame, SecantError, Slope};

/// Number of trailing samples that must agree for a ladder to count as
/// convergent.
pub const CONV_WINDOW: usize = 4;

/// The `(alpha, beta)` pairs probed in two dimensions, alongside axes and
/// rotations.
pub const PARAMETRIC_PAIRS: [(f64, f64); 3] = [(1.0, 2.0), (1.0, -1.0), (2.0, 3.0)];

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("parametric frames are two-dimensional, field has arity {0}")]
    ParametricArity(usize),
    #[error("probe point is not evaluable: {0}")]
    Domain(EvalError),
    #[error(transparent)]
    Secant(#[from] SecantError),
}

/// Geometric scale schedule `s0 * rho^j`, `j = 0..levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    s0: f64,
    rho: f64,
    levels: usize,
}

impl Ladder {
    pub fn new(s0: f64, rho: f64, levels: usize) -> Result<Ladder, ProbeError> {
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(ProbeError::InvalidLadder("s0 must be positive".into()));
        }
        if !(rho.is_finite() && rho > 0.0 && rho < 1.0) {
            return Err(ProbeError::InvalidLadder("rho must be in (0, 1)".into()));
        }
        if levels < CONV_WINDOW {
            return Err(ProbeError::InvalidLadder(format!(
                "levels must be at least {CONV_WINDOW}"
            )));
        }
        Ok(Ladder { s0, rho, levels })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn scales(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.levels).map(|j| self.s0 * self.rho.powi(j as i32))
    }
}

impl Default for Ladder {
    fn default() -> Self {
        Ladder {
            s0: 0.1,
            rho: 0.5,
            levels: 20,
        }
    }
}

/// One rung of a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeSample {
    pub scale: f64,
    pub slope: Slope,
    pub conditioning: f64,
    pub cancellation_limited: bool,
}

/// Why a classification could not be decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    NoConvergence,
    CancellationFloor,
    DomainFailure,
}

/// How a battery frame was constructed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrameKind {
    Axes,
    Rotation { rotation: usize },
    Parametric { alpha: f64, beta: f64 },
}

/// A battery frame, self-describing for witness reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameDescriptor {
    pub index: usize,
    #[serde(flatten)]
    pub kind: FrameKind,
    pub dirs: Vec<Vec<f64>>,
}

impl FrameDescriptor {
    pub fn to_frame(&self) -> Frame {
        Frame::new(self.dirs.clone()).expect("battery frames are valid")
    }
}

/// Outcome of [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Every convergent ladder agreed; `estimate` is their mean and
    /// `residual` the largest pairwise disagreement.
    Derivable {
        estimate: Slope,
        residual: f64,
    },
    /// Two individually convergent ladders disagree by more than `tol_sep`;
    /// no limit over all frames can exist.
    NotDerivable {
        frame_a: FrameDescriptor,
        frame_b: FrameDescriptor,
        limit_a: Slope,
        limit_b: Slope,
        separation: f64,
    },
    Inconclusive {
        reason: InconclusiveReason,
    },
}

struct LadderRun {
    samples: Vec<SlopeSample>,
    domain_stopped: bool,
}

fn run_ladder(
    field: &ScalarField,
    p: &[f64],
    frame: &Frame,
    ladder: &Ladder,
) -> Result<LadderRun, ProbeError> {
    let mut samples: Vec<SlopeSample> = Vec::with_capacity(ladder.levels());
    let mut domain_stopped = false;
    for (j, scale) in ladder.scales().enumerate() {
        match secant_slope_detail(field, p, &frame.scaled(scale)) {
            Ok(detail) => {
                samples.push(SlopeSample {
                    scale,
                    slope: detail.slope,
                    conditioning: detail.conditioning,
                    cancellation_limited: detail.cancellation_limited,
                });
                let k = samples.len();
                if k >= 2
                    && samples[k - 1].cancellation_limited
                    && samples[k - 2].cancellation_limited
                {
                    // Two consecutive rungs in the rounding floor; deeper
                    // rungs are noise.
                    break;
                }
            }
            Err(SecantError::Eval(e)) => {
                if j == 0 {
                    return Err(ProbeError::Domain(e));
                }
                domain_stopped = true;
                break;
            }
            Err(other) => return Err(other.into()),
        }
    }
    Ok(LadderRun {
        samples,
        domain_stopped,
    })
}

/// Slope samples of `field` at `p` along `frame` shrunk through `ladder`.
///
/// Samples are ordered by decreasing scale. The list is shorter than
/// `ladder.levels()` when a cancellation flag fires on two consecutive rungs
/// or a deeper rung leaves the field's domain; a domain error on the *first*
/// rung is an error.
pub fn slope_ladder(
    field: &ScalarField,
    p: &[f64],
    frame: &Frame,
    ladder: &Ladder,
) -> Result<Vec<SlopeSample>, ProbeError> {
    run_ladder(field, p, frame, ladder).map(|run| run.samples)
}

enum WindowOutcome {
    Converged(Slope),
    TooShort,
    Flagged,
    Spread,
}

fn convergence_window(samples: &[SlopeSample], tol_conv: f64) -> WindowOutcome {
    let mut end = samples.len();
    // Cancellation-flagged rungs accumulate at the bottom of the ladder;
    // they carry no information about the limit, so judge the deepest
    // trustworthy window instead.
    while end > 0 && samples[end - 1].cancellation_limited {
        end -= 1;
    }
    if end < CONV_WINDOW {
        return WindowOutcome::TooShort;
    }
    let window = &samples[end - CONV_WINDOW..end];
    if window.iter().any(|s| s.cancellation_limited) {
        return WindowOutcome::Flagged;
    }
    let last = &window[CONV_WINDOW - 1].slope;
    let scale = 1.0 + last.inf_norm();
    for pair in window.windows(2) {
        if pair[0].slope.inf_dist(&pair[1].slope) > tol_conv * scale {
            return WindowOutcome::Spread;
        }
    }
    WindowOutcome::Converged(last.clone())
}

/// The final sample's slope, when the deepest [`CONV_WINDOW`] unflagged
/// samples agree step-to-step within `tol_conv * (1 + |slope|)`; `None`
/// otherwise.
pub fn estimate_limit(samples: &[SlopeSample], tol_conv: f64) -> Option<Slope> {
    match convergence_window(samples, tol_conv) {
        WindowOutcome::Converged(slope) => Some(slope),
        _ => None,
    }
}

/// Ladder limit along the slanted pair `h = s(1, alpha)`, `k = s(1, beta)`.
///
/// Two-dimensional fields only; `alpha == beta` is a collinear frame.
/// Returns `None` when the ladder does not stabilise.
pub fn parametric_family_limit(
    field: &ScalarField,
    p: &[f64],
    alpha: f64,
    beta: f64,
    ladder: &Ladder,
) -> Result<Option<Slope>, ProbeError> {
    if field.arity() != 2 {
        return Err(ProbeError::ParametricArity(field.arity()));
    }
    let frame = Frame::parametric(alpha, beta)?;
    let run = run_ladder(field, p, &frame, ladder)?;
    Ok(estimate_limit(
        &run.samples,
        ProbeConfig::default().tol_conv,
    ))
}

/// The frame battery for a field of the given arity: canonical axes,
/// `config.frames` seeded random rotations, and for arity 2 the three
/// parametric pairs. Frames below `config.kappa_min` conditioning are
/// dropped.
pub fn frame_battery(arity: usize, config: &ProbeConfig) -> Vec<FrameDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut frames: Vec<(FrameKind, Frame)> = vec![(FrameKind::Axes, Frame::axes(arity))];
    for rotation in 0..config.frames {
        frames.push((
            FrameKind::Rotation { rotation },
            random_rotation(arity, &mut rng),
        ));
    }
    if arity == 2 {
        for (alpha, beta) in PARAMETRIC_PAIRS {
            let frame = Frame::parametric(alpha, beta).expect("pairs are non-collinear");
            frames.push((FrameKind::Parametric { alpha, beta }, frame));
        }
    }
    frames
        .into_iter()
        .filter(|(_, frame)| frame.conditioning() >= config.kappa_min)
        .enumerate()
        .map(|(index, (kind, frame))| FrameDescriptor {
            index,
            kind,
            dirs: frame.dirs().to_vec(),
        })
        .collect()
}

fn random_rotation(n: usize, rng: &mut ChaCha8Rng) -> Frame {
    if n == 1 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return Frame::new(vec![vec![sign]]).expect("nonzero");
    }
    loop {
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        if let Some(rows) = gram_schmidt(&raw) {
            return Frame::new(rows).expect("orthonormal rows are nonzero");
        }
    }
}

fn gram_schmidt(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = rows.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    for row in rows {
        let mut v = row.clone();
        for q in &out {
            let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return None;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        out.push(v);
    }
    Some(out)
}

struct FrameOutcome {
    limit: Option<Slope>,
    fail: Option<InconclusiveReason>,
    first_rung_domain: Option<EvalError>,
}

/// Classify derivability of `field` at `p`.
///
/// Runs one ladder per battery frame (concurrently when configured), then:
/// all convergent ladders within `tol_agree * (1 + max |limit|)` of each
/// other give `Derivable` with their mean as the estimate; two convergent
/// ladders more than `tol_sep` apart give `NotDerivable` with the
/// worst-separated pair as witnesses; anything else is `Inconclusive` with
/// the dominant failure reason. Errors only when no frame can evaluate a
/// single rung.
pub fn classify(
    field: &ScalarField,
    p: &[f64],
    config: &ProbeConfig,
) -> Result<Verdict, ProbeError> {
    config
        .validate()
        .map_err(|e| ProbeError::InvalidConfig(e.to_string()))?;
    let battery = frame_battery(field.arity(), config);
    let ladder = config.ladder();

    let runs: Vec<Result<FrameOutcome, ProbeError>> =
        map_collect(config.parallel, battery.clone(), |descriptor| {
            let frame = descriptor.to_frame();
            match run_ladder(field, p, &frame, &ladder) {
                Ok(run) => {
                    let outcome = match convergence_window(&run.samples, config.tol_conv) {
                        WindowOutcome::Converged(slope) => FrameOutcome {
                            limit: Some(slope),
                            fail: None,
                            first_rung_domain: None,
                        },
                        WindowOutcome::TooShort => FrameOutcome {
                            limit: None,
                            fail: Some(if run.domain_stopped {
                                InconclusiveReason::DomainFailure
                            } else {
                                InconclusiveReason::CancellationFloor
                            }),
                            first_rung_domain: None,
                        },
                        WindowOutcome::Flagged => FrameOutcome {
                            limit: None,
                            fail: Some(InconclusiveReason::CancellationFloor),
                            first_rung_domain: None,
                        },
                        WindowOutcome::Spread => FrameOutcome {
                            limit: None,
                            fail: Some(InconclusiveReason::NoConvergence),
                            first_rung_domain: None,
                        },
                    };
                    Ok(outcome)
                }
                Err(ProbeError::Domain(e)) => Ok(FrameOutcome {
                    limit: None,
                    fail: Some(InconclusiveReason::DomainFailure),
                    first_rung_domain: Some(e),
                }),
                Err(other) => Err(other),
            }
        });

    let mut limits: Vec<(usize, Slope)> = Vec::new();
    let mut fails: Vec<InconclusiveReason> = Vec::new();
    let mut first_rung_failures = 0usize;
    let mut first_domain_error: Option<EvalError> = None;
    for (i, run) in runs.into_iter().enumerate() {
        let outcome = run?;
        if let Some(slope) = outcome.limit {
            limits.push((i, slope));
        }
        if let Some(reason) = outcome.fail {
            fails.push(reason);
        }
        if let Some(e) = outcome.first_rung_domain {
            first_rung_failures += 1;
            first_domain_error.get_or_insert(e);
        }
    }

    if first_rung_failures == battery.len() {
        return Err(ProbeError::Domain(
            first_domain_error.expect("at least one failure recorded"),
        ));
    }
    if limits.is_empty() {
        return Ok(Verdict::Inconclusive {
            reason: dominant(&fails),
        });
    }

    let mut worst = (0usize, 0usize, 0.0f64);
    for a in 0..limits.len() {
        for b in a + 1..limits.len() {
            let d = limits[a].1.inf_dist(&limits[b].1);
            if d > worst.2 {
                worst = (a, b, d);
            }
        }
    }
    let magnitude = limits.iter().map(|(_, s)| s.inf_norm()).fold(0.0, f64::max);

    if worst.2 <= config.tol_agree * (1.0 + magnitude) {
        let n = field.arity();
        let mut acc = vec![0.0; n];
        for (_, slope) in &limits {
            for (a, c) in acc.iter_mut().zip(slope.components()) {
                *a += c;
            }
        }
        let count = limits.len() as f64;
        for a in &mut acc {
            *a /= count;
        }
        Ok(Verdict::Derivable {
            estimate: Slope::new(acc),
            residual: worst.2,
        })
    } else if worst.2 > config.tol_sep {
        let (ia, slope_a) = &limits[worst.0];
        let (ib, slope_b) = &limits[worst.1];
        Ok(Verdict::NotDerivable {
            frame_a: battery[*ia].clone(),
            frame_b: battery[*ib].clone(),
            limit_a: slope_a.clone(),
            limit_b: slope_b.clone(),
            separation: worst.2,
        })
    } else {
        // Converged ladders disagree, but below the witness threshold:
        // neither a stable limit nor a certificate against one.
        Ok(Verdict::Inconclusive {
            reason: InconclusiveReason::NoConvergence,
        })
    }
}

fn dominant(fails: &[InconclusiveReason]) -> InconclusiveReason {
    use InconclusiveReason::*;
    let count = |r: InconclusiveReason| fails.iter().filter(|&&f| f == r).count();
    let (nc, cf, df) = (
        count(NoConvergence),
        count(CancellationFloor),
        count(DomainFailure),
    );
    if nc >= cf && nc >= df {
        NoConvergence
    } else if cf >= df {
        CancellationFloor
    } else {
        DomainFailure
    }
}
