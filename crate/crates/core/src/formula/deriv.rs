//! Symbolic differentiation with local simplification.

use nalgebra::{DMatrix, DVector};

use super::expr::{Expr, Func};
use super::FormulaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Param(usize),
    Covar(usize),
}

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(v) => c(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => c(x + y),
        (Some(x), None) if x == 0.0 => b,
        (None, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => c(x - y),
        (Some(x), None) if x == 0.0 => neg(b),
        (None, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        return c(0.0);
    }
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => c(x * y),
        (Some(x), None) if x == 1.0 => b,
        (None, Some(y)) if y == 1.0 => a,
        (Some(x), None) if x == -1.0 => neg(b),
        (None, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return c(0.0);
    }
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => c(x / y),
        (None, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match b.as_const() {
        Some(y) if y == 1.0 => a,
        Some(y) if y == 0.0 => c(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

fn depends(e: &Expr, v: Var) -> bool {
    match v {
        Var::Param(i) => e.depends_on_param(i),
        Var::Covar(j) => e.depends_on_covar(j),
    }
}

/// ∂e/∂v as a new tree.
pub fn diff(e: &Expr, v: Var) -> Expr {
    if !depends(e, v) {
        return c(0.0);
    }
    match e {
        Expr::Const(_) => c(0.0),
        Expr::Param(i) => c(if v == Var::Param(*i) { 1.0 } else { 0.0 }),
        Expr::Covar(j) => c(if v == Var::Covar(*j) { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff(a, v)),
        Expr::Add(a, b) => add(diff(a, v), diff(b, v)),
        Expr::Sub(a, b) => sub(diff(a, v), diff(b, v)),
        Expr::Mul(a, b) => add(mul(diff(a, v), (**b).clone()), mul((**a).clone(), diff(b, v))),
        Expr::Div(a, b) => {
            let da = diff(a, v);
            let db = diff(b, v);
            if db.is_zero() {
                div(da, (**b).clone())
            } else {
                let num = sub(mul(da, (**b).clone()), mul((**a).clone(), db));
                // b·b, not b^2: a negative denominator is valid, a negative base is not.
                div(num, mul((**b).clone(), (**b).clone()))
            }
        }
        Expr::Pow(a, b) => {
            let da = diff(a, v);
            let db = diff(b, v);
            if db.is_zero() {
                // b·a^(b−1)·a'
                let reduced = match b.as_const() {
                    Some(k) => c(k - 1.0),
                    None => sub((**b).clone(), c(1.0)),
                };
                mul(mul((**b).clone(), pow((**a).clone(), reduced)), da)
            } else if da.is_zero() {
                // a^b·ln(a)·b'
                mul(mul(e.clone(), call(Func::Log, (**a).clone())), db)
            } else {
                let t1 = mul(db, call(Func::Log, (**a).clone()));
                let t2 = div(mul((**b).clone(), da), (**a).clone());
                mul(e.clone(), add(t1, t2))
            }
        }
        Expr::Call(f, a) => {
            let da = diff(a, v);
            match f {
                Func::Sqrt => div(da, mul(c(2.0), e.clone())),
                Func::Log => div(da, (**a).clone()),
                Func::Exp => mul(e.clone(), da),
            }
        }
    }
}

/// Derivatives of one formula, evaluated at a single observation row.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad_params: DVector<f64>,
    /// Exactly symmetric: each off-diagonal entry is evaluated once and mirrored.
    pub hess_params: DMatrix<f64>,
    /// ∂f/∂x for the perturbed covariate (zero when none was requested or
    /// the covariate does not occur in the formula).
    pub d_covariate: f64,
    /// ∂²f/∂β∂x for the perturbed covariate.
    pub mixed_param_covariate: DVector<f64>,
}

/// Pre-built derivative trees for repeated evaluation across observations.
#[derive(Debug, Clone)]
pub struct CompiledDerivatives {
    value: Expr,
    grad: Vec<Expr>,
    /// Packed upper triangle, row-major: (0,0), (0,1), …, (1,1), …
    hess: Vec<Expr>,
    covariate: Option<(Expr, Vec<Expr>)>,
    n_params: usize,
    linear: bool,
}

impl CompiledDerivatives {
    pub(crate) fn build(expr: &Expr, n_params: usize, covariate: Option<usize>) -> Self {
        let grad: Vec<Expr> = (0..n_params).map(|i| diff(expr, Var::Param(i))).collect();
        let mut hess = Vec::with_capacity(n_params * (n_params + 1) / 2);
        for i in 0..n_params {
            for j in i..n_params {
                hess.push(diff(&grad[i], Var::Param(j)));
            }
        }
        let linear = hess.iter().all(Expr::is_zero);
        let covariate = covariate.map(|j| {
            let dx = diff(expr, Var::Covar(j));
            let mixed = grad.iter().map(|g| diff(g, Var::Covar(j))).collect();
            (dx, mixed)
        });
        Self { value: expr.clone(), grad, hess, covariate, n_params, linear }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// True when every second parameter derivative simplified to zero.
    pub fn is_linear_in_params(&self) -> bool {
        self.linear
    }

    pub fn value(&self, params: &[f64], covars: &[f64]) -> Result<f64, FormulaError> {
        self.value.eval(params, covars)
    }

    pub fn gradient(&self, params: &[f64], covars: &[f64]) -> Result<DVector<f64>, FormulaError> {
        let mut g = DVector::zeros(self.n_params);
        for (i, e) in self.grad.iter().enumerate() {
            g[i] = e.eval(params, covars)?;
        }
        Ok(g)
    }

    pub fn hessian(&self, params: &[f64], covars: &[f64]) -> Result<DMatrix<f64>, FormulaError> {
        let k = self.n_params;
        let mut h = DMatrix::zeros(k, k);
        if self.linear {
            return Ok(h);
        }
        let mut idx = 0;
        for i in 0..k {
            for j in i..k {
                let v = self.hess[idx].eval(params, covars)?;
                h[(i, j)] = v;
                h[(j, i)] = v;
                idx += 1;
            }
        }
        Ok(h)
    }

    pub fn evaluate(&self, params: &[f64], covars: &[f64]) -> Result<DerivativeBundle, FormulaError> {
        let value = self.value(params, covars)?;
        let grad_params = self.gradient(params, covars)?;
        let hess_params = self.hessian(params, covars)?;
        let (d_covariate, mixed_param_covariate) = match &self.covariate {
            Some((dx, mixed)) => {
                let mut m = DVector::zeros(self.n_params);
                for (i, e) in mixed.iter().enumerate() {
                    m[i] = e.eval(params, covars)?;
                }
                (dx.eval(params, covars)?, m)
            }
            None => (0.0, DVector::zeros(self.n_params)),
        };
        Ok(DerivativeBundle { value, grad_params, hess_params, d_covariate, mixed_param_covariate })
    }
}
