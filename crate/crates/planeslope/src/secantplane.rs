//! Secant-plane increments and slopes.
//!
//! A [`Frame`] is an ordered set of `n` direction vectors in `R^n`. For a
//! field `f` and base point `p`, each direction `v` contributes one
//! increment `delta = f(p + v) - f(p)`, and the secant-plane slope is the
//! unique vector solving `slope . dir_i = delta_i` for every row. For `n = 2`
//! the solution has the closed Cramer form
//!
//! ```text
//! a = (k2*dh - h2*dk) / (h1*k2 - k1*h2)
//! b = (h1*dk - k1*dh) / (h1*k2 - k1*h2)
//! ```
//!
//! with `h`, `k` the two directions; `n = 1` degenerates to the scalar
//! difference quotient `delta / h`, and larger `n` goes through Gaussian
//! elimination with partial pivoting. [`solve_cramer_2x2`] and
//! [`solve_elimination`] stay independently callable so the two routes can
//! be checked against each other.
//!
//! Conditioning of a frame is the absolute determinant of its row-normalised
//! matrix: 1 for orthonormal frames, 0 for collinear ones, and invariant
//! under scaling, so shrinking a frame along a ladder never changes it.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, ScalarField};

/// Hard floor on normalised determinants; anything below is treated as
/// collinear.
pub const COLLINEAR_EPS: f64 = 1e-12;

/// Default minimum conditioning for probe-generated frames. User-supplied
/// frames are accepted down to [`COLLINEAR_EPS`]; the reported conditioning
/// value is the caller's warning signal.
pub const KAPPA_MIN_DEFAULT: f64 = 1e-3;

/// Increments smaller than `CANCELLATION_FACTOR * EPSILON * (1 + |f(p)|)`
/// are dominated by rounding in the subtraction, except for exact zeros,
/// which carry no rounding at all.
pub const CANCELLATION_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SecantError {
    #[error("direction {index} is the zero vector")]
    ZeroDirection { index: usize },
    #[error("frame directions are collinear (conditioning {conditioning:.3e})")]
    CollinearFrame { conditioning: f64 },
    #[error("frame must be {expected} directions of length {expected}, got {got}")]
    NotSquare { expected: usize, got: usize },
    #[error("frame dimension {frame} does not match point/field dimension {expected}")]
    DimensionMismatch { frame: usize, expected: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("frame entries must be finite")]
    NonFiniteDirection,
    #[error("slope solve produced a non-finite component")]
    NonFiniteSlope,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// An ordered set of `n` nonzero direction vectors in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    dirs: Vec<Vec<f64>>,
}

impl Frame {
    /// Build a frame from row vectors. Rows must be square, finite, and
    /// nonzero; collinearity is checked by the solvers, not here, so that
    /// degenerate frames can still be constructed and reported.
    pub fn new(dirs: Vec<Vec<f64>>) -> Result<Frame, SecantError> {
        let n = dirs.len();
        if n == 0 {
            return Err(SecantError::NotSquare {
                expected: 1,
                got: 0,
            });
        }
        for (index, row) in dirs.iter().enumerate() {
            if row.len() != n {
                return Err(SecantError::NotSquare {
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(SecantError::NonFiniteDirection);
            }
            if row.iter().all(|&c| c == 0.0) {
                return Err(SecantError::ZeroDirection { index });
            }
        }
        Ok(Frame { dirs })
    }

    /// The canonical axis frame `e_1..e_n`.
    pub fn axes(n: usize) -> Frame {
        let dirs = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row
            })
            .collect();
        Frame { dirs }
    }

    /// The two-direction family `h = (1, alpha)`, `k = (1, beta)`.
    pub fn parametric(alpha: f64, beta: f64) -> Result<Frame, SecantError> {
        if alpha == beta {
            return Err(SecantError::CollinearFrame { conditioning: 0.0 });
        }
        Frame::new(vec![vec![1.0, alpha], vec![1.0, beta]])
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn dirs(&self) -> &[Vec<f64>] {
        &self.dirs
    }

    /// Every direction multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Frame {
        let dirs = self
            .dirs
            .iter()
            .map(|row| row.iter().map(|c| c * s).collect())
            .collect();
        Frame { dirs }
    }

    /// Absolute determinant of the row-normalised frame matrix, in `[0, 1]`.
    pub fn conditioning(&self) -> f64 {
        let normalized: Vec<Vec<f64>> = self
            .dirs
            .iter()
            .map(|row| {
                let norm = row.iter().map(|c| c * c).sum::<f64>().sqrt();
                row.iter().map(|c| c / norm).collect()
            })
            .collect();
        determinant(&normalized).abs().min(1.0)
    }
}

/// A secant-plane slope vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Slope(Vec<f64>);

impl Slope {
    pub fn new(components: Vec<f64>) -> Slope {
        Slope(components)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn inf_dist(&self, other: &Slope) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl From<Vec<f64>> for Slope {
    fn from(v: Vec<f64>) -> Slope {
        Slope(v)
    }
}

/// A slope together with the diagnostics the probe needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeDetail {
    pub slope: Slope,
    pub conditioning: f64,
    /// Some increment was small enough that subtraction rounding dominates.
    pub cancellation_limited: bool,
}

/// Increment of the field along `v`: `f(p + v) - f(p)`, override-aware on
/// both endpoints.
pub fn delta(field: &ScalarField, p: &[f64], v: &[f64]) -> Result<f64, SecantError> {
    if p.len() != field.arity() || v.len() != p.len() {
        return Err(SecantError::DimensionMismatch {
            frame: v.len(),
            expected: field.arity(),
        });
    }
    let shifted: Vec<f64> = p.iter().zip(v).map(|(a, b)| a + b).collect();
    Ok(field.eval(&shifted)? - field.eval(p)?)
}

/// Secant-plane slope of `field` at `p` over `frame`.
pub fn secant_slope(field: &ScalarField, p: &[f64], frame: &Frame) -> Result<Slope, SecantError> {
    Ok(secant_slope_detail(field, p, frame)?.slope)
}

/// As [`secant_slope`], also reporting conditioning and the cancellation
/// flag.
pub fn secant_slope_detail(
    field: &ScalarField,
    p: &[f64],
    frame: &Frame,
) -> Result<SlopeDetail, SecantError> {
    if frame.dim() != field.arity() || p.len() != field.arity() {
        return Err(SecantError::DimensionMismatch {
            frame: frame.dim(),
            expected: field.arity(),
        });
    }
    let conditioning = frame.conditioning();
    if conditioning < COLLINEAR_EPS {
        return Err(SecantError::CollinearFrame { conditioning });
    }
    let f_p = field.eval(p)?;
    let mut deltas = Vec::with_capacity(frame.dim());
    for dir in frame.dirs() {
        let shifted: Vec<f64> = p.iter().zip(dir).map(|(a, b)| a + b).collect();
        deltas.push(field.eval(&shifted)? - f_p);
    }
    let floor = CANCELLATION_FACTOR * f64::EPSILON * (1.0 + f_p.abs());
    let cancellation_limited = deltas.iter().any(|&d| d != 0.0 && d.abs() < floor);
    let slope = solve_frame_system(frame, &deltas)?;
    Ok(SlopeDetail {
        slope,
        conditioning,
        cancellation_limited,
    })
}

/// Solve `frame . slope = deltas`.
///
/// Dispatches on dimension: the scalar difference quotient for `n = 1`, the
/// closed Cramer form for `n = 2`, partial-pivoted elimination above.
pub fn solve_frame_system(frame: &Frame, deltas: &[f64]) -> Result<Slope, SecantError> {
    let n = frame.dim();
    if deltas.len() != n {
        return Err(SecantError::LengthMismatch {
            expected: n,
            got: deltas.len(),
        });
    }
    let conditioning = frame.conditioning();
    if conditioning < COLLINEAR_EPS {
        return Err(SecantError::CollinearFrame { conditioning });
    }
    let slope = match n {
        1 => Slope(vec![deltas[0] / frame.dirs[0][0]]),
        2 => solve_cramer_2x2(frame, deltas)?,
        _ => solve_elimination(frame, deltas)?,
    };
    if slope.components().iter().any(|c| !c.is_finite()) {
        return Err(SecantError::NonFiniteSlope);
    }
    Ok(slope)
}

/// Closed-form 2x2 solve.
pub fn solve_cramer_2x2(frame: &Frame, deltas: &[f64]) -> Result<Slope, SecantError> {
    if frame.dim() != 2 || deltas.len() != 2 {
        return Err(SecantError::NotSquare {
            expected: 2,
            got: frame.dim(),
        });
    }
    let (h1, h2) = (frame.dirs[0][0], frame.dirs[0][1]);
    let (k1, k2) = (frame.dirs[1][0], frame.dirs[1][1]);
    let (dh, dk) = (deltas[0], deltas[1]);
    let det = h1 * k2 - k1 * h2;
    if det == 0.0 {
        return Err(SecantError::CollinearFrame { conditioning: 0.0 });
    }
    let a = (k2 * dh - h2 * dk) / det;
    let b = (h1 * dk - k1 * dh) / det;
    Ok(Slope(vec![a, b]))
}

/// Gaussian elimination with partial pivoting, any dimension.
pub fn solve_elimination(frame: &Frame, deltas: &[f64]) -> Result<Slope, SecantError> {
    let n = frame.dim();
    if deltas.len() != n {
        return Err(SecantError::LengthMismatch {
            expected: n,
            got: deltas.len(),
        });
    }
    let mut m: Vec<Vec<f64>> = frame.dirs.clone();
    let mut rhs = deltas.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot_row][col] == 0.0 {
            return Err(SecantError::CollinearFrame {
                conditioning: frame.conditioning(),
            });
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let (upper, lower) = m.split_at_mut(col + 1);
        let pivot = &upper[col];
        let pivot_rhs = rhs[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot[col];
            if factor == 0.0 {
                continue;
            }
            for (rk, pk) in row[col..].iter_mut().zip(&pivot[col..]) {
                *rk -= factor * pk;
            }
            rhs[col + 1 + offset] -= factor * pivot_rhs;
        }
    }
    let mut slope = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * slope[k];
        }
        slope[row] = acc / m[row][row];
    }
    Ok(Slope(slope))
}

fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[1][0] * m[0][1],
        _ => {
            let mut a: Vec<Vec<f64>> = m.to_vec();
            let mut det = 1.0;
            for col in 0..n {
                let pivot_row = (col..n)
                    .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                    .unwrap();
                if a[pivot_row][col] == 0.0 {
                    return 0.0;
                }
                if pivot_row != col {
                    a.swap(col, pivot_row);
                    det = -det;
                }
                det *= a[col][col];
                let (upper, lower) = a.split_at_mut(col + 1);
                let pivot = &upper[col];
                for row in lower.iter_mut() {
                    let factor = row[col] / pivot[col];
                    for (rk, pk) in row[col..].iter_mut().zip(&pivot[col..]) {
                        *rk -= factor * pk;
                    }
                }
            }
            det
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarField;

    fn field(text: &str, arity: usize) -> ScalarField {
        ScalarField::from_expr(text, arity).unwrap()
    }

    fn frame2(h: [f64; 2], k: [f64; 2]) -> Frame {
        Frame::new(vec![h.to_vec(), k.to_vec()]).unwrap()
    }

    #[test]
    fn delta_examples() {
        let sq = field("x^2", 2);
        assert_eq!(delta(&sq, &[1.0, 0.0], &[0.5, 0.0]).unwrap(), 1.25);
        let cx = field("x^2*y/(x^4+y^2)", 2)
            .with_override(vec![0.0, 0.0], 0.0)
            .unwrap();
        assert_eq!(delta(&cx, &[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(delta(&sq, &[1.3, 0.7], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn conditioning_examples() {
        assert_eq!(Frame::axes(2).conditioning(), 1.0);
        assert_eq!(frame2([1.0, 0.0], [2.0, 0.0]).conditioning(), 0.0);
        let c = frame2([1.0, 0.0], [1.0, 1.0]).conditioning();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn conditioning_is_scale_invariant() {
        let f = frame2([0.3, -0.8], [1.1, 0.4]);
        let base = f.conditioning();
        for s in [2.0, 0.125, 7.3, 1e-6] {
            assert!((f.scaled(s).conditioning() - base).abs() < 1e-12);
        }
        // Scaling a single row also leaves it unchanged.
        let g = Frame::new(vec![vec![0.3 * 5.0, -0.8 * 5.0], vec![1.1, 0.4]]).unwrap();
        assert!((g.conditioning() - base).abs() < 1e-12);
    }

    #[test]
    fn zero_direction_is_rejected() {
        assert!(matches!(
            Frame::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]),
            Err(SecantError::ZeroDirection { index: 0 })
        ));
    }

    #[test]
    fn affine_slope_is_exact_without_a_limit() {
        let f = field("3*x + 2*y + 1", 2);
        let fr = frame2([0.2, 0.1], [-0.1, 0.3]);
        for p in [[0.0, 0.0], [4.0, -9.0], [0.37, 2.11]] {
            let s = secant_slope(&f, &p, &fr).unwrap();
            assert!((s.components()[0] - 3.0).abs() < 1e-12);
            assert!((s.components()[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parabola_slope_closed_form() {
        // x^2 at the origin over ((s,0),(0,t)): increments are s^2 and 0,
        // so the slope is (s, 0).
        let f = field("x^2", 2);
        for (s, t) in [(0.3, 0.7), (0.1, 0.1), (1.5, 0.25)] {
            let slope = secant_slope(&f, &[0.0, 0.0], &frame2([s, 0.0], [0.0, t])).unwrap();
            assert!((slope.components()[0] - s).abs() < 1e-12);
            assert_eq!(slope.components()[1], 0.0);
        }
    }

    #[test]
    fn counterexample_slope_at_unit_scale() {
        let f = field("x^2*y/(x^4+y^2)", 2)
            .with_override(vec![0.0, 0.0], 0.0)
            .unwrap();
        let slope = secant_slope(&f, &[0.0, 0.0], &frame2([1.0, 1.0], [1.0, 2.0])).unwrap();
        assert!((slope.components()[0] - 0.6).abs() < 1e-12);
        assert!((slope.components()[1] - (-0.1)).abs() < 1e-12);
    }

    #[test]
    fn collinear_frames_are_rejected() {
        let f = field("x+y", 2);
        assert!(matches!(
            secant_slope(&f, &[0.0, 0.0], &frame2([1.0, 2.0], [2.0, 4.0])),
            Err(SecantError::CollinearFrame { .. })
        ));
    }

    #[test]
    fn solve_examples() {
        let identity = Frame::axes(2);
        let s = solve_frame_system(&identity, &[0.7, -1.3]).unwrap();
        assert_eq!(s.components(), &[0.7, -1.3]);

        let s = solve_frame_system(&frame2([1.0, 1.0], [1.0, -1.0]), &[2.0, 0.0]).unwrap();
        assert!((s.components()[0] - 1.0).abs() < 1e-15);
        assert!((s.components()[1] - 1.0).abs() < 1e-15);

        let s = solve_frame_system(&frame2([1.0, 0.0], [1.0, 1.0]), &[3.0, 5.0]).unwrap();
        assert!((s.components()[0] - 3.0).abs() < 1e-15);
        assert!((s.components()[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_difference_quotient() {
        let fr = Frame::new(vec![vec![2.0]]).unwrap();
        let s = solve_frame_system(&fr, &[3.0]).unwrap();
        assert_eq!(s.components(), &[1.5]);
        assert_eq!(fr.conditioning(), 1.0);

        let f = field("x^2", 1);
        // (f(1+h) - f(1)) / h = 2 + h for h = 0.5.
        let s = secant_slope(&f, &[1.0], &Frame::new(vec![vec![0.5]]).unwrap()).unwrap();
        assert!((s.components()[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn three_dimensional_solve() {
        let fr = Frame::new(vec![
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
        ])
        .unwrap();
        // rows . (1, 2, 3) = (3, 5, 4)
        let s = solve_frame_system(&fr, &[3.0, 5.0, 4.0]).unwrap();
        for (got, want) in s.components().iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cancellation_flag_fires_on_tiny_nonzero_increments() {
        // f(p) = 1 and an increment of 1e-14 sits in the rounding floor.
        let f = field("1 + x^2", 2);
        let d = secant_slope_detail(&f, &[0.0, 0.0], &frame2([1e-7, 0.0], [0.0, 1e-7])).unwrap();
        assert!(d.cancellation_limited);
        // Exact zeros do not flag: x^2 does not vary along y at all.
        let g = field("x^2", 2);
        let d = secant_slope_detail(&g, &[0.0, 0.0], &frame2([0.5, 0.0], [0.0, 0.5])).unwrap();
        assert!(!d.cancellation_limited);
    }
}
