//! Coordinate-expression DSL: parsing, printing, and exact forward-mode
//! differentiation up to second order.

mod ast;
mod eval;
mod parse;

pub use ast::{Expression, Function, Subst, MAX_VARS};
pub use eval::{eval_value, evaluate, DiffMode, EvalContext, Jet};
pub use parse::parse;

use thiserror::Error;

/// Convenience constructors for building expression trees programmatically
/// (used by the chart builders, which assemble metrics entry by entry).
pub mod build {
    use super::{Expression, Function};

    pub fn lit(v: f64) -> Expression {
        if v < 0.0 {
            Expression::Neg(Box::new(Expression::Literal(-v)))
        } else {
            Expression::Literal(v)
        }
    }

    pub fn var(i: usize) -> Expression {
        Expression::Var(i)
    }

    pub fn add(a: Expression, b: Expression) -> Expression {
        Expression::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expression, b: Expression) -> Expression {
        Expression::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expression, b: Expression) -> Expression {
        Expression::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expression, b: Expression) -> Expression {
        Expression::Div(Box::new(a), Box::new(b))
    }

    pub fn powi(a: Expression, k: i32) -> Expression {
        Expression::Pow(Box::new(a), Box::new(lit(f64::from(k))))
    }

    pub fn neg(a: Expression) -> Expression {
        Expression::Neg(Box::new(a))
    }

    pub fn func(f: Function, a: Expression) -> Expression {
        Expression::Func(f, Box::new(a))
    }

    /// Sum of a non-empty list of terms.
    pub fn sum(terms: Vec<Expression>) -> Expression {
        let mut it = terms.into_iter();
        let first = it.next().expect("sum of at least one term");
        it.fold(first, add)
    }
}

/// Errors raised while parsing or evaluating expressions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at byte {offset}: expected {expected}, found {found}")]
    Parse { offset: usize, expected: String, found: String },
    #[error("unknown identifier `{name}` at byte {offset} (coordinates are x1..x16)")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable x{} is unbound ({bound} coordinate(s) supplied)", index + 1)]
    UnboundVariable { index: usize, bound: usize },
    #[error("division by zero in `{op}`")]
    DivisionByZero { op: &'static str },
    #[error("domain error in `{op}`: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("non-finite value produced by `{op}`")]
    NonFinite { op: &'static str },
}

/// Draw a random expression tree of bounded depth over `n_vars` coordinates.
///
/// Used by the differentiation fuzz tests; the distribution leans on
/// smooth, domain-safe constructions (arguments of `log`/`sqrt` are wrapped
/// so they stay positive) but rejection against a concrete evaluation point
/// is still the caller's job.
pub fn random_expression<R: rand::Rng>(rng: &mut R, max_depth: usize, n_vars: usize) -> Expression {
    use Expression as E;
    assert!(n_vars >= 1 && n_vars <= MAX_VARS);
    if max_depth == 0 || rng.random_range(0..10) == 0 {
        return if rng.random_bool(0.6) {
            E::Var(rng.random_range(0..n_vars))
        } else {
            E::Literal(f64::from(rng.random_range(1..=4_i32)) / 2.0)
        };
    }
    let d = max_depth - 1;
    match rng.random_range(0..12_u32) {
        0 | 1 => E::Add(
            Box::new(random_expression(rng, d, n_vars)),
            Box::new(random_expression(rng, d, n_vars)),
        ),
        2 => E::Sub(
            Box::new(random_expression(rng, d, n_vars)),
            Box::new(random_expression(rng, d, n_vars)),
        ),
        3 | 4 => E::Mul(
            Box::new(random_expression(rng, d, n_vars)),
            Box::new(random_expression(rng, d, n_vars)),
        ),
        5 => {
            // Keep denominators away from zero: 1 + u^2 style.
            let den = E::Add(
                Box::new(E::Literal(1.0)),
                Box::new(E::Pow(
                    Box::new(random_expression(rng, d, n_vars)),
                    Box::new(E::Literal(2.0)),
                )),
            );
            E::Div(Box::new(random_expression(rng, d, n_vars)), Box::new(den))
        }
        6 => E::Pow(
            Box::new(random_expression(rng, d, n_vars)),
            Box::new(E::Literal(f64::from(rng.random_range(2..=3_i32)))),
        ),
        7 => E::Neg(Box::new(random_expression(rng, d, n_vars))),
        8 => {
            // Positive argument for log/sqrt: 1 + u^2.
            let func = if rng.random_bool(0.5) { Function::Log } else { Function::Sqrt };
            let arg = E::Add(
                Box::new(E::Literal(1.0)),
                Box::new(E::Pow(
                    Box::new(random_expression(rng, d, n_vars)),
                    Box::new(E::Literal(2.0)),
                )),
            );
            E::Func(func, Box::new(arg))
        }
        _ => {
            let func = match rng.random_range(0..6_u32) {
                0 => Function::Sin,
                1 => Function::Cos,
                2 => Function::Tanh,
                3 => Function::Atan,
                4 => Function::Sinh,
                _ => Function::Exp,
            };
            E::Func(func, Box::new(random_expression(rng, d, n_vars)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pythagorean_identity_evaluates_to_one() {
        let e = parse("sin(x1)^2 + cos(x1)^2").unwrap();
        let v = eval_value(&e, &[0.3]).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("2^3^2").unwrap();
        assert_abs_diff_eq!(eval_value(&e, &[]).unwrap(), 512.0);
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        let e = parse("-x1^2").unwrap();
        assert_abs_diff_eq!(eval_value(&e, &[3.0]).unwrap(), -9.0);
        // Whereas an explicitly parenthesised base squares the negative.
        let e2 = parse("(-x1)^2").unwrap();
        assert_abs_diff_eq!(eval_value(&e2, &[3.0]).unwrap(), 9.0);
    }

    #[test]
    fn integer_exponent_allows_negative_base() {
        let e = parse("x1^3").unwrap();
        assert_abs_diff_eq!(eval_value(&e, &[-2.0]).unwrap(), -8.0);
        let jet = evaluate(&e, &EvalContext::hessian(&[-2.0])).unwrap();
        assert_abs_diff_eq!(jet.gradient.unwrap()[0], 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(jet.hessian.unwrap()[(0, 0)], -12.0, epsilon = 1e-12);
    }

    #[test]
    fn fractional_power_of_negative_base_is_domain_error() {
        let e = parse("x1^0.5").unwrap();
        assert!(matches!(eval_value(&e, &[-1.0]), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn constants_pi_and_e() {
        let e = parse("sin(pi/2) + log(e)").unwrap();
        assert_abs_diff_eq!(eval_value(&e, &[]).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn jet_of_product_with_exp() {
        let e = parse("x1*exp(x2)").unwrap();
        let jet = evaluate(&e, &EvalContext::hessian(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(jet.value, 1.0, epsilon = 1e-15);
        let g = jet.gradient.unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 1.0, epsilon = 1e-15);
        let h = jet.hessian.unwrap();
        assert_abs_diff_eq!(h[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(0, 1)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(1, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(1, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = parse("1/x1").unwrap();
        assert!(matches!(
            eval_value(&e, &[0.0]),
            Err(ExprError::DivisionByZero { .. })
        ));
    }

    #[test]
    fn log_and_sqrt_of_non_positive_are_reported() {
        let log = parse("log(x1)").unwrap();
        assert!(matches!(eval_value(&log, &[-1.0]), Err(ExprError::Domain { .. })));
        assert!(matches!(eval_value(&log, &[0.0]), Err(ExprError::Domain { .. })));
        let sqrt = parse("sqrt(x1)").unwrap();
        assert!(matches!(eval_value(&sqrt, &[-0.5]), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn abs_kink_errors_only_in_derivative_mode() {
        let e = parse("abs(x1)").unwrap();
        assert_abs_diff_eq!(eval_value(&e, &[0.0]).unwrap(), 0.0);
        assert!(matches!(
            evaluate(&e, &EvalContext::gradient(&[0.0])),
            Err(ExprError::Domain { .. })
        ));
        let jet = evaluate(&e, &EvalContext::gradient(&[-2.0])).unwrap();
        assert_abs_diff_eq!(jet.gradient.unwrap()[0], -1.0);
    }

    #[test]
    fn variables_are_case_sensitive_and_capped() {
        assert!(matches!(parse("X1"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x17"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x0"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(parse("x16").is_ok());
    }

    #[test]
    fn parse_error_carries_byte_offset() {
        match parse("x1 + * x2") {
            Err(ExprError::Parse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("sin x1") {
            Err(ExprError::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = parse("x3").unwrap();
        assert!(matches!(
            eval_value(&e, &[1.0, 2.0]),
            Err(ExprError::UnboundVariable { index: 2, bound: 2 })
        ));
    }

    #[test]
    fn free_vars_are_sorted_indices() {
        let e = parse("x1*x3 + sin(x5)").unwrap();
        let vars: Vec<usize> = e.free_vars().into_iter().collect();
        assert_eq!(vars, vec![0, 2, 4]);
    }

    #[test]
    fn substitute_freezes_and_renames() {
        // Freeze x1 at pi/4 and renumber x2,x3 -> x1,x2 (a fiber-chart restriction).
        let e = parse("sin(x1)^2 * sin(x2)^2 + x3").unwrap();
        let sub = e.substitute(&[
            Subst::Const(std::f64::consts::FRAC_PI_4),
            Subst::Rename(0),
            Subst::Rename(1),
        ]);
        let vars: Vec<usize> = sub.free_vars().into_iter().collect();
        assert_eq!(vars, vec![0, 1]);
        let v = eval_value(&sub, &[0.7, 0.3]).unwrap();
        assert_abs_diff_eq!(v, 0.5 * 0.7f64.sin().powi(2) + 0.3, epsilon = 1e-15);
    }

    #[test]
    fn print_parse_round_trips_structurally() {
        for src in [
            "x1 + x2*x3",
            "-x1^2",
            "(x1 + x2)*x3",
            "x1 - (x2 - x3)",
            "x1/(x2/x3)",
            "x1^x2^x3",
            "(x1^x2)^x3",
            "2.5*sin(x1) - sqrt(1 + x2^2)",
            "x1*-x2",
            "--x1",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap_or_else(|err| {
                panic!("printed form `{printed}` failed to parse: {err}")
            });
            assert_eq!(e, reparsed, "round-trip mismatch for `{src}` -> `{printed}`");
        }
    }

    /// Central-difference oracle for gradients and Hessians.
    fn fd_gradient(e: &Expression, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            g[i] = (eval_value(e, &xp).unwrap() - eval_value(e, &xm).unwrap()) / (2.0 * h);
        }
        g
    }

    fn fd_hessian(e: &Expression, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut hess = vec![vec![0.0; n]; n];
        let f0 = eval_value(e, x).unwrap();
        for i in 0..n {
            let hi = 2e-4 * (1.0 + x[i].abs());
            for j in 0..n {
                let hj = 2e-4 * (1.0 + x[j].abs());
                if i == j {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[i] += hi;
                    xm[i] -= hi;
                    hess[i][j] = (eval_value(e, &xp).unwrap() - 2.0 * f0
                        + eval_value(e, &xm).unwrap())
                        / (hi * hi);
                } else {
                    let mut xpp = x.to_vec();
                    let mut xpm = x.to_vec();
                    let mut xmp = x.to_vec();
                    let mut xmm = x.to_vec();
                    xpp[i] += hi;
                    xpp[j] += hj;
                    xpm[i] += hi;
                    xpm[j] -= hj;
                    xmp[i] -= hi;
                    xmp[j] += hj;
                    xmm[i] -= hi;
                    xmm[j] -= hj;
                    hess[i][j] = (eval_value(e, &xpp).unwrap() - eval_value(e, &xpm).unwrap()
                        - eval_value(e, &xmp).unwrap()
                        + eval_value(e, &xmm).unwrap())
                        / (4.0 * hi * hj);
                }
            }
        }
        hess
    }

    /// Jets must agree with central finite differences on random expressions.
    /// Gradient relative tolerance 1e-6, Hessian 1e-3 (FD truncation dominates).
    #[test]
    fn jets_match_finite_differences_on_random_expressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut accepted = 0;
        while accepted < 200 {
            let e = random_expression(&mut rng, 6, 3);
            let x: Vec<f64> = (0..3)
                .map(|_| rand::Rng::random_range(&mut rng, -1.5..1.5))
                .collect();
            // Reject draws whose value is out of well-conditioned range.
            let Ok(jet) = evaluate(&e, &EvalContext::hessian(&x)) else { continue };
            if jet.value.abs() > 1e4 {
                continue;
            }
            let g = jet.gradient.as_ref().unwrap();
            let h = jet.hessian.as_ref().unwrap();
            if g.amax() > 1e4 || h.amax() > 1e4 {
                continue;
            }
            accepted += 1;

            let fd_g = fd_gradient(&e, &x);
            let scale_g = fd_g.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                assert!(
                    (g[i] - fd_g[i]).abs() <= 1e-6 * scale_g,
                    "gradient mismatch on `{e}` at {x:?}: jet {} vs fd {}",
                    g[i],
                    fd_g[i]
                );
            }

            let fd_h = fd_hessian(&e, &x);
            let scale_h = fd_h
                .iter()
                .flatten()
                .fold(1.0_f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (h[(i, j)] - fd_h[i][j]).abs() <= 1e-3 * scale_h,
                        "hessian mismatch on `{e}` at {x:?}: jet {} vs fd {}",
                        h[(i, j)],
                        fd_h[i][j]
                    );
                }
            }
        }
    }
}
