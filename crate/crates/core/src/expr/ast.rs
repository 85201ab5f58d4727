//! Expression tree for scalar fields on chart domains.
//!
//! Expressions are closed under the arithmetic operators `+ - * / ^`, unary
//! minus, and a fixed set of elementary functions. Variables are the chart
//! coordinates `x1..x16` (stored 0-based).

use std::collections::BTreeSet;
use std::fmt;

/// Hard cap on the number of chart coordinates an expression may reference.
pub const MAX_VARS: usize = 16;

/// Unary elementary functions available in the DSL.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
    Abs,
}

impl Function {
    pub const ALL: [Function; 11] = [
        Function::Sin,
        Function::Cos,
        Function::Tan,
        Function::Exp,
        Function::Log,
        Function::Sqrt,
        Function::Sinh,
        Function::Cosh,
        Function::Tanh,
        Function::Atan,
        Function::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Tan => "tan",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sqrt => "sqrt",
            Function::Sinh => "sinh",
            Function::Cosh => "cosh",
            Function::Tanh => "tanh",
            Function::Atan => "atan",
            Function::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Substitution action for one variable slot, used by [`Expression::substitute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Subst {
    /// Leave the variable untouched.
    Keep,
    /// Replace the variable by a constant.
    Const(f64),
    /// Renumber the variable to a new 0-based index.
    Rename(usize),
}

/// Parsed scalar expression over chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Literal(f64),
    /// 0-based coordinate index; `Var(0)` is `x1`.
    Var(usize),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    /// Right-associative power, binding tighter than unary minus.
    Pow(Box<Expression>, Box<Expression>),
    Neg(Box<Expression>),
    Func(Function, Box<Expression>),
}

impl Expression {
    /// Sorted set of 0-based variable indices that occur in the expression.
    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expression::Literal(_) => {}
            Expression::Var(i) => {
                out.insert(*i);
            }
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b)
            | Expression::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expression::Neg(a) | Expression::Func(_, a) => a.collect_vars(out),
        }
    }

    /// True when the expression references no variables at all.
    pub fn is_constant(&self) -> bool {
        match self {
            Expression::Literal(_) => true,
            Expression::Var(_) => false,
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b)
            | Expression::Pow(a, b) => a.is_constant() && b.is_constant(),
            Expression::Neg(a) | Expression::Func(_, a) => a.is_constant(),
        }
    }

    /// Apply per-variable substitutions (freeze to a constant or renumber).
    ///
    /// Slots beyond `subs.len()` are kept as-is.
    pub fn substitute(&self, subs: &[Subst]) -> Expression {
        match self {
            Expression::Literal(v) => Expression::Literal(*v),
            Expression::Var(i) => match subs.get(*i).copied().unwrap_or(Subst::Keep) {
                Subst::Keep => Expression::Var(*i),
                Subst::Const(c) => Expression::Literal(c),
                Subst::Rename(j) => Expression::Var(j),
            },
            Expression::Add(a, b) => Expression::Add(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Sub(a, b) => Expression::Sub(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Mul(a, b) => Expression::Mul(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Div(a, b) => Expression::Div(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Pow(a, b) => Expression::Pow(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Neg(a) => Expression::Neg(Box::new(a.substitute(subs))),
            Expression::Func(f, a) => Expression::Func(*f, Box::new(a.substitute(subs))),
        }
    }

    /// Printing precedence used to insert the minimal parentheses that keep
    /// `parse(print(e))` structurally equal to `e`.
    fn prec(&self) -> u8 {
        match self {
            Expression::Add(..) | Expression::Sub(..) => 1,
            Expression::Mul(..) | Expression::Div(..) => 2,
            Expression::Neg(..) => 3,
            Expression::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let me = self.prec();
        if me < min {
            write!(f, "(")?;
        }
        match self {
            Expression::Literal(v) => {
                if v.is_sign_negative() {
                    // Negative literals only arise from programmatic construction;
                    // keep them reparseable as Neg(Literal).
                    write!(f, "(-{:?})", -v)?;
                } else {
                    write!(f, "{:?}", v)?;
                }
            }
            Expression::Var(i) => write!(f, "x{}", i + 1)?,
            Expression::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            Expression::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            Expression::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            Expression::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            Expression::Pow(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^")?;
                b.fmt_prec(f, 3)?;
            }
            Expression::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3)?;
            }
            Expression::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if me < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
