//! Forward-mode automatic differentiation with vector-valued dual numbers.
//!
//! A [`DualVector`] carries a value together with all `n` partial
//! derivatives, so one evaluation pass over the expression tree yields the
//! exact gradient of the parsed form. This is the oracle the probe and rule
//! modules compare their limit estimates against.
//!
//! Gradients are defined by the expression alone: at an override point the
//! piecewise clause says nothing about smooth structure, so [`grad`] refuses
//! with [`AutodiffError::OverridePoint`] and leaves the verdict to the probe.

use thiserror::Error;

use crate::expr::{eval_ast, DomainErrorKind, EvalError, Numeric, ScalarField};

/// Tolerance on `| ||dir|| - 1 |` accepted by [`directional`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("the gradient is undefined at an override point")]
    OverridePoint,
    #[error("direction has norm {norm}, expected a unit vector")]
    NonUnitDirection { norm: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Value plus partial derivatives with respect to each of the `n` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    value: f64,
    partials: Vec<f64>,
}

impl DualVector {
    /// A constant: value `c`, all partials zero.
    pub fn constant(c: f64, arity: usize) -> Self {
        DualVector {
            value: c,
            partials: vec![0.0; arity],
        }
    }

    /// The seed for input `index`: value `v`, partials the `index`-th unit
    /// vector.
    pub fn variable(v: f64, index: usize, arity: usize) -> Self {
        let mut partials = vec![0.0; arity];
        partials[index] = 1.0;
        DualVector { value: v, partials }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn partials(&self) -> &[f64] {
        &self.partials
    }

    pub fn into_partials(self) -> Vec<f64> {
        self.partials
    }

    fn map2(&self, o: &Self, value: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let partials = self
            .partials
            .iter()
            .zip(&o.partials)
            .map(|(&a, &b)| f(a, b))
            .collect();
        DualVector { value, partials }
    }

    fn chain(&self, value: f64, dvalue: f64) -> Self {
        let partials = self.partials.iter().map(|&d| dvalue * d).collect();
        DualVector { value, partials }
    }
}

impl Numeric for DualVector {
    fn value(&self) -> f64 {
        self.value
    }

    fn constant(c: f64, template: &Self) -> Self {
        DualVector::constant(c, template.partials.len())
    }

    fn is_constant(&self) -> bool {
        self.partials.iter().all(|&d| d == 0.0)
    }

    fn ensure_finite(self) -> Result<Self, DomainErrorKind> {
        if self.value.is_finite() && self.partials.iter().all(|d| d.is_finite()) {
            Ok(self)
        } else {
            Err(DomainErrorKind::NonFinite)
        }
    }

    fn add(&self, o: &Self) -> Self {
        self.map2(o, self.value + o.value, |a, b| a + b)
    }

    fn sub(&self, o: &Self) -> Self {
        self.map2(o, self.value - o.value, |a, b| a - b)
    }

    fn mul(&self, o: &Self) -> Self {
        // (uv)' = u v' + v u', exactly the dual product rule.
        self.map2(o, self.value * o.value, |a, b| self.value * b + o.value * a)
    }

    fn div(&self, o: &Self) -> Result<Self, DomainErrorKind> {
        if o.value == 0.0 {
            return Err(DomainErrorKind::DivisionByZero);
        }
        let v2 = o.value * o.value;
        Ok(self.map2(o, self.value / o.value, |a, b| {
            (a * o.value - self.value * b) / v2
        }))
    }

    fn neg(&self) -> Self {
        DualVector {
            value: -self.value,
            partials: self.partials.iter().map(|&d| -d).collect(),
        }
    }

    fn powi(&self, k: i32) -> Result<Self, DomainErrorKind> {
        if k == 0 {
            return Ok(DualVector::constant(1.0, self.partials.len()));
        }
        if self.value == 0.0 && k < 0 {
            return Err(DomainErrorKind::ZeroToNegativePower);
        }
        let value = self.value.powi(k);
        let dvalue = f64::from(k) * self.value.powi(k - 1);
        Ok(self.chain(value, dvalue))
    }

    fn pow_general(&self, e: &Self) -> Result<Self, DomainErrorKind> {
        if self.value <= 0.0 {
            return Err(DomainErrorKind::NonIntegerPower);
        }
        let value = self.value.powf(e.value);
        let ln_base = self.value.ln();
        let partials = self
            .partials
            .iter()
            .zip(&e.partials)
            .map(|(&da, &db)| value * (db * ln_base + e.value * da / self.value))
            .collect();
        Ok(DualVector { value, partials })
    }

    fn sin(&self) -> Result<Self, DomainErrorKind> {
        Ok(self.chain(self.value.sin(), self.value.cos()))
    }

    fn cos(&self) -> Result<Self, DomainErrorKind> {
        Ok(self.chain(self.value.cos(), -self.value.sin()))
    }

    fn tan(&self) -> Result<Self, DomainErrorKind> {
        let c = self.value.cos();
        Ok(self.chain(self.value.tan(), 1.0 / (c * c)))
    }

    fn exp(&self) -> Result<Self, DomainErrorKind> {
        let v = self.value.exp();
        Ok(self.chain(v, v))
    }

    fn ln(&self) -> Result<Self, DomainErrorKind> {
        if self.value <= 0.0 {
            return Err(DomainErrorKind::LogNonPositive);
        }
        Ok(self.chain(self.value.ln(), 1.0 / self.value))
    }

    fn sqrt(&self) -> Result<Self, DomainErrorKind> {
        if self.value < 0.0 {
            return Err(DomainErrorKind::SqrtNegative);
        }
        let v = self.value.sqrt();
        // At zero the derivative blows up; ensure_finite turns it into a
        // domain error.
        Ok(self.chain(v, 0.5 / v))
    }

    fn abs(&self) -> Result<Self, DomainErrorKind> {
        if self.value == 0.0 {
            return Err(DomainErrorKind::AbsAtZero);
        }
        Ok(self.chain(self.value.abs(), self.value.signum()))
    }
}

/// Exact gradient of the field's expression at `p`, by one dual-number pass.
///
/// Errors with [`AutodiffError::OverridePoint`] when `p` carries an override
/// and propagates domain errors from evaluation.
pub fn grad(field: &ScalarField, p: &[f64]) -> Result<Vec<f64>, AutodiffError> {
    let n = field.arity();
    if p.len() != n {
        return Err(EvalError::ArityMismatch {
            expected: n,
            got: p.len(),
        }
        .into());
    }
    if field.override_at(p).is_some() {
        return Err(AutodiffError::OverridePoint);
    }
    let vars: Vec<DualVector> = p
        .iter()
        .enumerate()
        .map(|(i, &v)| DualVector::variable(v, i, n))
        .collect();
    let out = eval_ast(field.ast(), &vars).map_err(EvalError::Domain)?;
    Ok(out.into_partials())
}

/// Directional derivative `grad(field, p) . dir` for a unit direction.
pub fn directional(field: &ScalarField, p: &[f64], dir: &[f64]) -> Result<f64, AutodiffError> {
    if dir.len() != field.arity() {
        return Err(EvalError::ArityMismatch {
            expected: field.arity(),
            got: dir.len(),
        }
        .into());
    }
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(AutodiffError::NonUnitDirection { norm });
    }
    let g = grad(field, p)?;
    Ok(g.iter().zip(dir).map(|(a, b)| a * b).sum())
}
