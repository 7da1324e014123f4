use std::fmt;

use super::FormulaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Log,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Exp => "exp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sqrt" => Some(Func::Sqrt),
            "log" => Some(Func::Log),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }
}

/// Expression node. Parameters and covariates are indices into the owning
/// formula's symbol tables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Param(usize),
    Covar(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn domain(msg: impl Into<String>) -> FormulaError {
    FormulaError::Domain(msg.into())
}

pub(crate) fn pow_checked(base: f64, exponent: f64) -> Result<f64, FormulaError> {
    if base < 0.0 {
        return Err(domain(format!("negative base {base} raised to a power")));
    }
    if base == 0.0 {
        if exponent == 0.0 {
            return Ok(1.0);
        }
        if exponent < 0.0 {
            return Err(domain("zero raised to a negative power"));
        }
        return Ok(0.0);
    }
    Ok(base.powf(exponent))
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval(&self, params: &[f64], covars: &[f64]) -> Result<f64, FormulaError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Param(i) => params[*i],
            Expr::Covar(j) => covars[*j],
            Expr::Neg(a) => -a.eval(params, covars)?,
            Expr::Add(a, b) => a.eval(params, covars)? + b.eval(params, covars)?,
            Expr::Sub(a, b) => a.eval(params, covars)? - b.eval(params, covars)?,
            Expr::Mul(a, b) => a.eval(params, covars)? * b.eval(params, covars)?,
            Expr::Div(a, b) => {
                let num = a.eval(params, covars)?;
                let den = b.eval(params, covars)?;
                if den == 0.0 {
                    return Err(domain("division by zero"));
                }
                num / den
            }
            Expr::Pow(a, b) => pow_checked(a.eval(params, covars)?, b.eval(params, covars)?)?,
            Expr::Call(f, a) => {
                let x = a.eval(params, covars)?;
                match f {
                    Func::Sqrt if x < 0.0 => return Err(domain(format!("sqrt of negative value {x}"))),
                    Func::Sqrt => x.sqrt(),
                    Func::Log if x <= 0.0 => return Err(domain(format!("log of non-positive value {x}"))),
                    Func::Log => x.ln(),
                    Func::Exp => x.exp(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain("expression evaluated to a non-finite value"))
        }
    }

    pub fn depends_on_param(&self, idx: usize) -> bool {
        self.any_leaf(&|e| matches!(e, Expr::Param(i) if *i == idx))
    }

    pub fn depends_on_covar(&self, idx: usize) -> bool {
        self.any_leaf(&|e| matches!(e, Expr::Covar(j) if *j == idx))
    }

    pub fn has_params(&self) -> bool {
        self.any_leaf(&|e| matches!(e, Expr::Param(_)))
    }

    fn any_leaf(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        match self {
            Expr::Const(_) | Expr::Param(_) | Expr::Covar(_) => pred(self),
            Expr::Neg(a) | Expr::Call(_, a) => a.any_leaf(pred),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.any_leaf(pred) || b.any_leaf(pred)
            }
        }
    }

    pub(crate) fn display<'a>(&'a self, params: &'a [String], covars: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, params, covars }
    }
}

pub(crate) struct ExprDisplay<'a> {
    expr: &'a Expr,
    params: &'a [String],
    covars: &'a [String],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.params, self.covars)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, params: &[String], covars: &[String]) -> fmt::Result {
    let bin = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr| -> fmt::Result {
        write!(f, "(")?;
        write_expr(f, a, params, covars)?;
        write!(f, " {op} ")?;
        write_expr(f, b, params, covars)?;
        write!(f, ")")
    };
    match e {
        Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
        Expr::Const(c) => write!(f, "{c}"),
        Expr::Param(i) => write!(f, "{}", params[*i]),
        Expr::Covar(j) => write!(f, "{}", covars[*j]),
        Expr::Neg(a) => {
            write!(f, "(-")?;
            write_expr(f, a, params, covars)?;
            write!(f, ")")
        }
        Expr::Add(a, b) => bin(f, a, "+", b),
        Expr::Sub(a, b) => bin(f, a, "-", b),
        Expr::Mul(a, b) => bin(f, a, "*", b),
        Expr::Div(a, b) => bin(f, a, "/", b),
        Expr::Pow(a, b) => bin(f, a, "^", b),
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, params, covars)?;
            write!(f, ")")
        }
    }
}
