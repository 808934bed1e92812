//! n-variate scalar-field expressions.
//!
//! An [`ExprAst`] is a plain expression tree over positional variables; a
//! [`ScalarField`] pairs a tree with its arity and a finite set of exact
//! point-value overrides, which is how piecewise definitions such as
//! "`x^2*y/(x^4+y^2)` with value `0` at `(0,0)`" are encoded.
//!
//! Evaluation is strict about the domain: division by zero, `ln` of a
//! non-positive value, `sqrt` of a negative value, and any non-finite
//! intermediate are reported as [`EvalError`]s, never returned as NaN or
//! infinity. Callers that probe limits rely on that distinction.

mod parse;

pub use parse::{parse, ParseError};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Unary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
}

/// Binary operators, standard precedence (`^` above unary minus above `*` `/`
/// above `+` `-`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in functions, all unary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn arity(self) -> usize {
        1
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Expression tree. Variables are positional indices into the evaluation
/// point; the surface syntax (`x`, `y`, `z`, `x1..xn`) is resolved by the
/// parser.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Constant(f64),
    Variable(usize),
    Unary(UnaryOp, Box<ExprAst>),
    Binary(BinaryOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Vec<ExprAst>),
}

/// Variable indices occurring in the tree.
pub fn free_vars(ast: &ExprAst) -> BTreeSet<usize> {
    fn walk(ast: &ExprAst, out: &mut BTreeSet<usize>) {
        match ast {
            ExprAst::Constant(_) => {}
            ExprAst::Variable(i) => {
                out.insert(*i);
            }
            ExprAst::Unary(_, a) => walk(a, out),
            ExprAst::Binary(_, a, b) => {
                walk(a, out);
                walk(b, out);
            }
            ExprAst::Call(_, args) => {
                for a in args {
                    walk(a, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(ast, &mut out);
    out
}

impl fmt::Display for ExprAst {
    /// Fully parenthesised form using positional names `x1..xn`; parsing the
    /// output at the original arity reproduces the evaluation semantics.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Parenthesise negative literals: `^` binds tighter than unary
            // minus, so a bare `-1.5 ^ 2` would reparse as `-(1.5^2)`.
            ExprAst::Constant(c) if c.is_sign_negative() => write!(f, "({c})"),
            ExprAst::Constant(c) => write!(f, "{c}"),
            ExprAst::Variable(i) => write!(f, "x{}", i + 1),
            ExprAst::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            ExprAst::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            ExprAst::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// What went wrong while evaluating at a concrete point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DomainErrorKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of a non-positive value")]
    LogNonPositive,
    #[error("square root of a negative value")]
    SqrtNegative,
    #[error("power with non-positive base and non-integer exponent")]
    NonIntegerPower,
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
    #[error("abs is not differentiable at zero")]
    AbsAtZero,
    #[error("non-finite intermediate value")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has {got} coordinates but the field has arity {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(DomainErrorKind),
}

/// Errors from assembling a [`ScalarField`] by hand.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("field arity must be at least 1")]
    ZeroArity,
    #[error("expression uses variable index {index} but the field has arity {arity}")]
    VariableOutOfRange { index: usize, arity: usize },
    #[error("override point has {got} coordinates, field arity is {expected}")]
    OverrideArity { expected: usize, got: usize },
    #[error("duplicate override point")]
    DuplicateOverride,
    #[error("override value must be finite")]
    NonFiniteOverride,
    #[error("override coordinates must be finite")]
    NonFiniteOverridePoint,
}

/// A parsed n-variate field plus exact point-value overrides.
///
/// Overrides shadow the expression at *exactly* the stored coordinates
/// (floating-point `==`); they model definitional clauses at isolated
/// points, not regions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    arity: usize,
    ast: ExprAst,
    overrides: Vec<(Vec<f64>, f64)>,
}

impl ScalarField {
    pub fn new(arity: usize, ast: ExprAst) -> Result<Self, FieldError> {
        if arity == 0 {
            return Err(FieldError::ZeroArity);
        }
        if let Some(&index) = free_vars(&ast).iter().find(|&&i| i >= arity) {
            return Err(FieldError::VariableOutOfRange { index, arity });
        }
        Ok(ScalarField {
            arity,
            ast,
            overrides: Vec::new(),
        })
    }

    /// Parse `text` and wrap it as a field of the given arity.
    pub fn from_expr(text: &str, arity: usize) -> Result<Self, ParseError> {
        let ast = parse(text, arity)?;
        Ok(ScalarField {
            arity,
            ast,
            overrides: Vec::new(),
        })
    }

    /// Add one override; points must be pairwise distinct.
    pub fn with_override(mut self, point: Vec<f64>, value: f64) -> Result<Self, FieldError> {
        if point.len() != self.arity {
            return Err(FieldError::OverrideArity {
                expected: self.arity,
                got: point.len(),
            });
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(FieldError::NonFiniteOverridePoint);
        }
        if !value.is_finite() {
            return Err(FieldError::NonFiniteOverride);
        }
        if self.overrides.iter().any(|(p, _)| p == &point) {
            return Err(FieldError::DuplicateOverride);
        }
        self.overrides.push((point, value));
        Ok(self)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn ast(&self) -> &ExprAst {
        &self.ast
    }

    pub fn overrides(&self) -> &[(Vec<f64>, f64)] {
        &self.overrides
    }

    /// Override value at `p`, if `p` is exactly an override point.
    pub fn override_at(&self, p: &[f64]) -> Option<f64> {
        self.overrides
            .iter()
            .find(|(q, _)| q.as_slice() == p)
            .map(|(_, v)| *v)
    }

    /// Evaluate at `p`: the override value when `p` is an override point,
    /// the expression otherwise.
    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        if p.len() != self.arity {
            return Err(EvalError::ArityMismatch {
                expected: self.arity,
                got: p.len(),
            });
        }
        if let Some(v) = self.override_at(p) {
            return Ok(v);
        }
        eval_ast(&self.ast, p).map_err(EvalError::Domain)
    }
}

/// Carrier for the shared evaluation walk. `f64` gives plain values; the
/// dual-number type in [`crate::autodiff`] reuses the same walk so the value
/// and derivative channels cannot drift apart on domain case splits.
pub(crate) trait Numeric: Sized + Clone {
    fn value(&self) -> f64;
    /// A constant shaped like `template` (duals need the arity).
    fn constant(c: f64, template: &Self) -> Self;
    /// True when the exponent carries no derivative information, which
    /// selects the integer-power case split.
    fn is_constant(&self) -> bool;
    fn ensure_finite(self) -> Result<Self, DomainErrorKind>;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Result<Self, DomainErrorKind>;
    fn neg(&self) -> Self;
    /// Integer power by repeated multiplication; valid for any base.
    fn powi(&self, k: i32) -> Result<Self, DomainErrorKind>;
    /// General power `exp(e * ln(base))`; requires a positive base.
    fn pow_general(&self, e: &Self) -> Result<Self, DomainErrorKind>;
    fn sin(&self) -> Result<Self, DomainErrorKind>;
    fn cos(&self) -> Result<Self, DomainErrorKind>;
    fn tan(&self) -> Result<Self, DomainErrorKind>;
    fn exp(&self) -> Result<Self, DomainErrorKind>;
    fn ln(&self) -> Result<Self, DomainErrorKind>;
    fn sqrt(&self) -> Result<Self, DomainErrorKind>;
    fn abs(&self) -> Result<Self, DomainErrorKind>;
}

impl Numeric for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant(c: f64, _template: &Self) -> Self {
        c
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn ensure_finite(self) -> Result<Self, DomainErrorKind> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(DomainErrorKind::NonFinite)
        }
    }

    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Result<Self, DomainErrorKind> {
        if *o == 0.0 {
            return Err(DomainErrorKind::DivisionByZero);
        }
        Ok(self / o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, k: i32) -> Result<Self, DomainErrorKind> {
        if *self == 0.0 && k < 0 {
            return Err(DomainErrorKind::ZeroToNegativePower);
        }
        Ok(f64::powi(*self, k))
    }
    fn pow_general(&self, e: &Self) -> Result<Self, DomainErrorKind> {
        if *self <= 0.0 {
            return Err(DomainErrorKind::NonIntegerPower);
        }
        Ok(f64::powf(*self, *e))
    }
    fn sin(&self) -> Result<Self, DomainErrorKind> {
        Ok(f64::sin(*self))
    }
    fn cos(&self) -> Result<Self, DomainErrorKind> {
        Ok(f64::cos(*self))
    }
    fn tan(&self) -> Result<Self, DomainErrorKind> {
        Ok(f64::tan(*self))
    }
    fn exp(&self) -> Result<Self, DomainErrorKind> {
        Ok(f64::exp(*self))
    }
    fn ln(&self) -> Result<Self, DomainErrorKind> {
        if *self <= 0.0 {
            return Err(DomainErrorKind::LogNonPositive);
        }
        Ok(f64::ln(*self))
    }
    fn sqrt(&self) -> Result<Self, DomainErrorKind> {
        if *self < 0.0 {
            return Err(DomainErrorKind::SqrtNegative);
        }
        Ok(f64::sqrt(*self))
    }
    fn abs(&self) -> Result<Self, DomainErrorKind> {
        Ok(f64::abs(*self))
    }
}

/// Power dispatch shared by both carriers: an exponent with no derivative
/// content and an integer value goes through repeated multiplication (so
/// `x^2` works for negative `x`); everything else requires a positive base.
fn pow_dispatch<T: Numeric>(base: &T, exponent: &T) -> Result<T, DomainErrorKind> {
    if exponent.is_constant() {
        let e = exponent.value();
        if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
            return base.powi(e as i32);
        }
    }
    base.pow_general(exponent)
}

/// Evaluate `ast` with variables bound to `vars`. Every intermediate is
/// checked finite.
pub(crate) fn eval_ast<T: Numeric>(ast: &ExprAst, vars: &[T]) -> Result<T, DomainErrorKind> {
    debug_assert!(!vars.is_empty());
    let template = &vars[0];
    let out = match ast {
        ExprAst::Constant(c) => T::constant(*c, template),
        ExprAst::Variable(i) => vars[*i].clone(),
        ExprAst::Unary(UnaryOp::Neg, a) => eval_ast(a, vars)?.neg(),
        ExprAst::Binary(op, a, b) => {
            let a = eval_ast(a, vars)?;
            let b = eval_ast(b, vars)?;
            match op {
                BinaryOp::Add => a.add(&b),
                BinaryOp::Sub => a.sub(&b),
                BinaryOp::Mul => a.mul(&b),
                BinaryOp::Div => a.div(&b)?,
                BinaryOp::Pow => pow_dispatch(&a, &b)?,
            }
        }
        ExprAst::Call(func, args) => {
            let a = eval_ast(&args[0], vars)?;
            match func {
                Func::Sin => a.sin()?,
                Func::Cos => a.cos()?,
                Func::Tan => a.tan()?,
                Func::Exp => a.exp()?,
                Func::Ln => a.ln()?,
                Func::Sqrt => a.sqrt()?,
                Func::Abs => a.abs()?,
            }
        }
    };
    out.ensure_finite()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(text: &str, arity: usize) -> ScalarField {
        ScalarField::from_expr(text, arity).unwrap()
    }

    #[test]
    fn eval_monomial() {
        let f = field("x^2*y^3", 2);
        assert_eq!(f.eval(&[2.0, 1.0]).unwrap(), 4.0);
        assert_eq!(f.eval(&[1.0, 2.0]).unwrap(), 8.0);
    }

    #[test]
    fn eval_rational_counterexample_form() {
        let f = field("x^2*y/(x^4+y^2)", 2);
        assert_eq!(f.eval(&[1.0, 1.0]).unwrap(), 0.5);
        // Undefined at the origin without an override.
        assert_eq!(
            f.eval(&[0.0, 0.0]),
            Err(EvalError::Domain(DomainErrorKind::DivisionByZero))
        );
        let f = f.with_override(vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(f.eval(&[0.0, 0.0]).unwrap(), 0.0);
        // Overrides shadow only the exact point.
        assert_eq!(f.eval(&[1.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let f = field("x/y", 2);
        assert_eq!(
            f.eval(&[1.0, 0.0]),
            Err(EvalError::Domain(DomainErrorKind::DivisionByZero))
        );
    }

    #[test]
    fn non_finite_intermediates_are_errors() {
        assert_eq!(
            field("exp(x)", 1).eval(&[1000.0]),
            Err(EvalError::Domain(DomainErrorKind::NonFinite))
        );
        assert_eq!(
            field("ln(x)", 1).eval(&[0.0]),
            Err(EvalError::Domain(DomainErrorKind::LogNonPositive))
        );
        assert_eq!(
            field("sqrt(x)", 1).eval(&[-1.0]),
            Err(EvalError::Domain(DomainErrorKind::SqrtNegative))
        );
    }

    #[test]
    fn power_case_split() {
        // Integer exponents go through repeated multiplication: negative
        // bases are fine and x^2 is exact.
        assert_eq!(field("x^2", 1).eval(&[-2.0]).unwrap(), 4.0);
        assert_eq!(field("x^3", 1).eval(&[-2.0]).unwrap(), -8.0);
        assert_eq!(field("x^0", 1).eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(field("x^(-2)", 1).eval(&[2.0]).unwrap(), 0.25);
        assert_eq!(
            field("x^(-1)", 1).eval(&[0.0]),
            Err(EvalError::Domain(DomainErrorKind::ZeroToNegativePower))
        );
        // Fractional exponents need a positive base.
        let r = field("x^0.5", 1).eval(&[2.0]).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            field("x^0.5", 1).eval(&[-2.0]),
            Err(EvalError::Domain(DomainErrorKind::NonIntegerPower))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(field("2*3+4*5", 1).eval(&[0.0]).unwrap(), 26.0);
        assert_eq!(field("1-2-3", 1).eval(&[0.0]).unwrap(), -4.0);
        assert_eq!(field("6/3/2", 1).eval(&[0.0]).unwrap(), 1.0);
        // ^ binds tighter than unary minus and associates right.
        assert_eq!(field("-x^2", 1).eval(&[3.0]).unwrap(), -9.0);
        assert_eq!(field("2^3^2", 1).eval(&[0.0]).unwrap(), 512.0);
        assert_eq!(field("2^-2", 1).eval(&[0.0]).unwrap(), 0.25);
        assert_eq!(field(" x ^ 2 * y ", 2).eval(&[3.0, 2.0]).unwrap(), 18.0);
    }

    #[test]
    fn free_vars_examples() {
        assert_eq!(
            free_vars(&parse("x^2*y^3", 2).unwrap()),
            BTreeSet::from([0, 1])
        );
        assert_eq!(free_vars(&ExprAst::Constant(7.0)), BTreeSet::new());
        assert_eq!(
            free_vars(&parse("x1+x3", 3).unwrap()),
            BTreeSet::from([0, 2])
        );
    }

    #[test]
    fn variable_names() {
        assert_eq!(field("x+y", 2).eval(&[1.0, 2.0]).unwrap(), 3.0);
        assert_eq!(field("x1+x2", 2).eval(&[1.0, 2.0]).unwrap(), 3.0);
        assert_eq!(field("x*y*z", 3).eval(&[2.0, 3.0, 4.0]).unwrap(), 24.0);
        assert_eq!(
            field("x1+x2+x3+x4", 4).eval(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            10.0
        );
        assert!(matches!(
            parse("z", 2),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("x", 4),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("x3", 2),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_offset() {
        match parse("x/(y", 2) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse("x +", 2) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn function_arity_is_checked() {
        assert!(matches!(
            parse("sin(x, y)", 2),
            Err(ParseError::Arity {
                expected: 1,
                got: 2,
                ..
            })
        ));
        assert!(matches!(
            parse("foo(x)", 2),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn override_constructor_validation() {
        let f = field("x+y", 2);
        assert!(matches!(
            f.clone().with_override(vec![0.0], 1.0),
            Err(FieldError::OverrideArity { .. })
        ));
        let f = f.with_override(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            f.with_override(vec![0.0, 0.0], 2.0),
            Err(FieldError::DuplicateOverride)
        ));
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let f = field("x+y", 2);
        assert_eq!(
            f.eval(&[1.0]),
            Err(EvalError::ArityMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn display_round_trips_semantics() {
        let f = parse("-x^2 + sin(x*y)/3 - 0.25", 2).unwrap();
        let printed = f.to_string();
        let g = parse(&printed, 2).unwrap();
        for &(x, y) in &[(0.3, 1.7), (-1.2, 0.5), (2.0, -2.0)] {
            let a = eval_ast(&f, &[x, y]).unwrap();
            let b = eval_ast(&g, &[x, y]).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
