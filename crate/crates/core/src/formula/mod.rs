//! Predictor formulas: parsing, evaluation and exact differentiation.
//!
//! A formula such as `b1 + b2*steam/(steam + b3)` is split into parameters
//! and covariates at parse time. Symbol tables are fixed afterwards, and
//! the tree refers to symbols by index.

mod deriv;
mod expr;
mod parser;

use std::fmt;

use thiserror::Error;

pub use deriv::{diff, CompiledDerivatives, DerivativeBundle, Var};
pub use expr::{Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulaError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown function '{name}' at position {position}")]
    UnknownFunction { name: String, position: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound name '{0}'")]
    Unbound(String),
}

/// How identifiers are split into parameters and covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamRule {
    /// Exactly these names are parameters, in this order. Authoritative.
    Declared(Vec<String>),
    /// Identifiers starting with the prefix are parameters, ordered by first
    /// appearance.
    Prefix(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    text: String,
    expr: Expr,
    params: Vec<String>,
    covariates: Vec<String>,
}

fn push_unique(v: &mut Vec<String>, s: &str) {
    if !v.iter().any(|x| x == s) {
        v.push(s.to_string());
    }
}

impl Formula {
    pub fn parse(text: &str, rule: &ParamRule) -> Result<Self, FormulaError> {
        let raw = parser::parse_raw(text)?;
        let mut idents = Vec::new();
        raw.visit_idents(&mut idents);
        let mut params = match rule {
            ParamRule::Declared(names) => {
                let mut out = Vec::new();
                for n in names {
                    push_unique(&mut out, n);
                }
                out
            }
            ParamRule::Prefix(_) => Vec::new(),
        };
        let mut covariates = Vec::new();
        for id in idents {
            let is_param = match rule {
                ParamRule::Declared(names) => names.iter().any(|n| n == id),
                ParamRule::Prefix(p) => id.starts_with(p.as_str()),
            };
            if is_param {
                push_unique(&mut params, id);
            } else {
                push_unique(&mut covariates, id);
            }
        }
        let expr = raw.resolve(&params, &covariates);
        Ok(Self { text: text.to_string(), expr, params, covariates })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    /// Declared parameters that never occur in the expression.
    pub fn unused_params(&self) -> Vec<&str> {
        (0..self.params.len()).filter(|&i| !self.expr.depends_on_param(i)).map(|i| self.params[i].as_str()).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name)
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c == name)
    }

    /// Builds derivative trees. `perturbed` names a covariate for the
    /// covariate derivatives; a name absent from the formula yields zeros.
    pub fn compile(&self, perturbed: Option<&str>) -> CompiledDerivatives {
        let cov = perturbed.and_then(|n| self.covariate_index(n));
        CompiledDerivatives::build(&self.expr, self.params.len(), cov)
    }

    pub fn is_linear_in_params(&self) -> bool {
        self.compile(None).is_linear_in_params()
    }

    /// Evaluates value and derivatives at named parameter and covariate
    /// values. Convenience for one-off use; bulk code should `compile` once.
    pub fn differentiate(
        &self,
        params: &[(&str, f64)],
        row: &[(&str, f64)],
        perturbed: Option<&str>,
    ) -> Result<DerivativeBundle, FormulaError> {
        let lookup = |table: &[(&str, f64)], name: &str| {
            table
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| FormulaError::Unbound(name.to_string()))
        };
        let p = self.params.iter().map(|n| lookup(params, n)).collect::<Result<Vec<_>, _>>()?;
        let x = self.covariates.iter().map(|n| lookup(row, n)).collect::<Result<Vec<_>, _>>()?;
        self.compile(perturbed).evaluate(&p, &x)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr.display(&self.params, &self.covariates))
    }
}
