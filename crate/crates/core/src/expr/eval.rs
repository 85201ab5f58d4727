//! Expression evaluation with forward-mode first- and second-order jets.
//!
//! A jet carries the value together with (optionally) the gradient and the
//! Hessian with respect to the bound coordinates, propagated exactly through
//! every operation — no finite differencing. Domain violations (division by
//! zero, `log`/`sqrt` of a non-positive argument, `abs` at its kink when
//! derivatives are requested) are reported as errors; the evaluator never
//! returns a silent NaN or infinity.

use nalgebra::{DMatrix, DVector};

use super::ast::{Expression, Function};
use super::ExprError;

/// How much derivative information [`evaluate`] should propagate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMode {
    Value,
    Gradient,
    Hessian,
}

/// Variable bindings plus the requested differentiation mode.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub vars: &'a [f64],
    pub mode: DiffMode,
}

impl<'a> EvalContext<'a> {
    pub fn value(vars: &'a [f64]) -> Self {
        EvalContext { vars, mode: DiffMode::Value }
    }

    pub fn gradient(vars: &'a [f64]) -> Self {
        EvalContext { vars, mode: DiffMode::Gradient }
    }

    pub fn hessian(vars: &'a [f64]) -> Self {
        EvalContext { vars, mode: DiffMode::Hessian }
    }
}

/// Result of a jet evaluation. `gradient`/`hessian` are populated according
/// to the [`DiffMode`] of the context.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

impl Jet {
    fn constant(v: f64, n: usize, mode: DiffMode) -> Jet {
        Jet {
            value: v,
            gradient: matches!(mode, DiffMode::Gradient | DiffMode::Hessian)
                .then(|| DVector::zeros(n)),
            hessian: matches!(mode, DiffMode::Hessian).then(|| DMatrix::zeros(n, n)),
        }
    }

    fn variable(i: usize, v: f64, n: usize, mode: DiffMode) -> Jet {
        let mut jet = Jet::constant(v, n, mode);
        if let Some(g) = jet.gradient.as_mut() {
            g[i] = 1.0;
        }
        jet
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.as_ref().is_none_or(|g| g.iter().all(|x| x.is_finite()))
            && self.hessian.as_ref().is_none_or(|h| h.iter().all(|x| x.is_finite()))
    }
}

fn check_finite(jet: Jet, op: &'static str) -> Result<Jet, ExprError> {
    if jet.is_finite() {
        Ok(jet)
    } else {
        Err(ExprError::NonFinite { op })
    }
}

fn add(a: Jet, b: Jet) -> Jet {
    Jet {
        value: a.value + b.value,
        gradient: a.gradient.zip(b.gradient).map(|(x, y)| x + y),
        hessian: a.hessian.zip(b.hessian).map(|(x, y)| x + y),
    }
}

fn sub(a: Jet, b: Jet) -> Jet {
    Jet {
        value: a.value - b.value,
        gradient: a.gradient.zip(b.gradient).map(|(x, y)| x - y),
        hessian: a.hessian.zip(b.hessian).map(|(x, y)| x - y),
    }
}

fn neg(a: Jet) -> Jet {
    Jet {
        value: -a.value,
        gradient: a.gradient.map(|g| -g),
        hessian: a.hessian.map(|h| -h),
    }
}

fn mul(a: &Jet, b: &Jet) -> Jet {
    let gradient = a
        .gradient
        .as_ref()
        .zip(b.gradient.as_ref())
        .map(|(ga, gb)| ga * b.value + gb * a.value);
    let hessian = a.hessian.as_ref().zip(b.hessian.as_ref()).map(|(ha, hb)| {
        let ga = a.gradient.as_ref().expect("hessian mode implies gradient");
        let gb = b.gradient.as_ref().expect("hessian mode implies gradient");
        ha * b.value + hb * a.value + ga * gb.transpose() + gb * ga.transpose()
    });
    Jet { value: a.value * b.value, gradient, hessian }
}

/// Compose a scalar function with value/first/second derivatives at `a.value`
/// onto the jet `a` via the chain rule.
fn compose(a: &Jet, f: f64, fp: f64, fpp: f64) -> Jet {
    let gradient = a.gradient.as_ref().map(|g| g * fp);
    let hessian = a.hessian.as_ref().map(|h| {
        let g = a.gradient.as_ref().expect("hessian mode implies gradient");
        h * fp + g * g.transpose() * fpp
    });
    Jet { value: f, gradient, hessian }
}

fn int_pow(a: &Jet, k: i32) -> Result<Jet, ExprError> {
    if k == 0 {
        let n = a.gradient.as_ref().map_or(0, |g| g.len());
        let mode = match (&a.gradient, &a.hessian) {
            (Some(_), Some(_)) => DiffMode::Hessian,
            (Some(_), None) => DiffMode::Gradient,
            _ => DiffMode::Value,
        };
        return Ok(Jet::constant(1.0, n, mode));
    }
    let u = a.value;
    if u == 0.0 && k < 0 {
        return Err(ExprError::DivisionByZero { op: "negative power of zero" });
    }
    let f = u.powi(k);
    let fp = f64::from(k) * u.powi(k - 1);
    let fpp = f64::from(k) * f64::from(k - 1) * u.powi(k - 2);
    Ok(compose(a, f, fp, fpp))
}

fn pow(a: &Jet, b: &Jet, exp_is_const: bool) -> Result<Jet, ExprError> {
    // A syntactically constant integer exponent is handled by repeated-power
    // rules so that negative and zero bases stay legal (e.g. `x1^2` at -3).
    if exp_is_const && b.value.fract() == 0.0 && b.value.abs() <= i32::MAX as f64 {
        return int_pow(a, b.value as i32);
    }
    if a.value <= 0.0 {
        return Err(ExprError::Domain {
            op: "power",
            detail: format!(
                "non-integer or variable exponent requires a positive base, got base {}",
                a.value
            ),
        });
    }
    // a^b = exp(b * log a) for positive bases.
    let log_a = compose(a, a.value.ln(), 1.0 / a.value, -1.0 / (a.value * a.value));
    let t = mul(b, &log_a);
    let v = t.value.exp();
    Ok(compose(&t, v, v, v))
}

fn apply_function(func: Function, a: &Jet, mode: DiffMode) -> Result<Jet, ExprError> {
    let u = a.value;
    let (f, fp, fpp) = match func {
        Function::Sin => (u.sin(), u.cos(), -u.sin()),
        Function::Cos => (u.cos(), -u.sin(), -u.cos()),
        Function::Tan => {
            let t = u.tan();
            let sec2 = 1.0 + t * t;
            (t, sec2, 2.0 * t * sec2)
        }
        Function::Exp => {
            let v = u.exp();
            (v, v, v)
        }
        Function::Log => {
            if u <= 0.0 {
                return Err(ExprError::Domain {
                    op: "log",
                    detail: format!("non-positive argument {u}"),
                });
            }
            (u.ln(), 1.0 / u, -1.0 / (u * u))
        }
        Function::Sqrt => {
            if u <= 0.0 {
                return Err(ExprError::Domain {
                    op: "sqrt",
                    detail: format!("non-positive argument {u}"),
                });
            }
            let s = u.sqrt();
            (s, 0.5 / s, -0.25 / (s * u))
        }
        Function::Sinh => (u.sinh(), u.cosh(), u.sinh()),
        Function::Cosh => (u.cosh(), u.sinh(), u.cosh()),
        Function::Tanh => {
            let t = u.tanh();
            let sech2 = 1.0 - t * t;
            (t, sech2, -2.0 * t * sech2)
        }
        Function::Atan => {
            let d = 1.0 + u * u;
            (u.atan(), 1.0 / d, -2.0 * u / (d * d))
        }
        Function::Abs => {
            if mode == DiffMode::Value {
                (u.abs(), 0.0, 0.0)
            } else if u == 0.0 {
                return Err(ExprError::Domain {
                    op: "abs",
                    detail: "not differentiable at 0".into(),
                });
            } else {
                (u.abs(), u.signum(), 0.0)
            }
        }
    };
    Ok(compose(a, f, fp, fpp))
}

fn eval_inner(e: &Expression, ctx: &EvalContext) -> Result<Jet, ExprError> {
    let n = ctx.vars.len();
    match e {
        Expression::Literal(v) => Ok(Jet::constant(*v, n, ctx.mode)),
        Expression::Var(i) => {
            if *i >= n {
                return Err(ExprError::UnboundVariable { index: *i, bound: n });
            }
            Ok(Jet::variable(*i, ctx.vars[*i], n, ctx.mode))
        }
        Expression::Add(a, b) => {
            check_finite(add(eval_inner(a, ctx)?, eval_inner(b, ctx)?), "add")
        }
        Expression::Sub(a, b) => {
            check_finite(sub(eval_inner(a, ctx)?, eval_inner(b, ctx)?), "subtract")
        }
        Expression::Mul(a, b) => {
            check_finite(mul(&eval_inner(a, ctx)?, &eval_inner(b, ctx)?), "multiply")
        }
        Expression::Div(a, b) => {
            let num = eval_inner(a, ctx)?;
            let den = eval_inner(b, ctx)?;
            if den.value == 0.0 {
                return Err(ExprError::DivisionByZero { op: "divide" });
            }
            let v = den.value;
            let recip = compose(&den, 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
            check_finite(mul(&num, &recip), "divide")
        }
        Expression::Pow(a, b) => {
            let base = eval_inner(a, ctx)?;
            let exp = eval_inner(b, ctx)?;
            check_finite(pow(&base, &exp, b.is_constant())?, "power")
        }
        Expression::Neg(a) => Ok(neg(eval_inner(a, ctx)?)),
        Expression::Func(f, a) => {
            let arg = eval_inner(a, ctx)?;
            check_finite(apply_function(*f, &arg, ctx.mode)?, f.name())
        }
    }
}

/// Evaluate an expression under the given context, propagating jets exactly.
pub fn evaluate(e: &Expression, ctx: &EvalContext) -> Result<Jet, ExprError> {
    eval_inner(e, ctx)
}

/// Plain value evaluation convenience wrapper.
pub fn eval_value(e: &Expression, vars: &[f64]) -> Result<f64, ExprError> {
    Ok(evaluate(e, &EvalContext::value(vars))?.value)
}
