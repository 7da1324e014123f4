use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use super::ModelError;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Link functions. The first four map (0, 1) to ℝ and serve the mean; the
/// last three map (0, ∞) to ℝ and serve the dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Logit,
    Probit,
    Cloglog,
    /// log(−log μ), decreasing in μ.
    Loglog,
    Log,
    Sqrt,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    Forward,
    Inverse,
    D1,
    D2,
}

impl LinkKind {
    pub const ALL: [LinkKind; 7] = [
        LinkKind::Logit,
        LinkKind::Probit,
        LinkKind::Cloglog,
        LinkKind::Loglog,
        LinkKind::Log,
        LinkKind::Sqrt,
        LinkKind::Identity,
    ];

    pub fn is_mean_link(self) -> bool {
        matches!(self, LinkKind::Logit | LinkKind::Probit | LinkKind::Cloglog | LinkKind::Loglog)
    }

    pub fn is_dispersion_link(self) -> bool {
        !self.is_mean_link()
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Logit => "logit",
            LinkKind::Probit => "probit",
            LinkKind::Cloglog => "cloglog",
            LinkKind::Loglog => "loglog",
            LinkKind::Log => "log",
            LinkKind::Sqrt => "sqrt",
            LinkKind::Identity => "identity",
        }
    }

    fn check_domain(self, x: f64) -> Result<(), ModelError> {
        let ok = if self.is_mean_link() { x > 0.0 && x < 1.0 } else { x > 0.0 && x.is_finite() };
        if ok {
            Ok(())
        } else {
            let range = if self.is_mean_link() { "(0, 1)" } else { "(0, ∞)" };
            Err(ModelError::Link(format!("{} link needs an argument in {range}, got {x}", self.name())))
        }
    }

    pub fn forward(self, x: f64) -> Result<f64, ModelError> {
        self.check_domain(x)?;
        Ok(match self {
            LinkKind::Logit => (x / (1.0 - x)).ln(),
            LinkKind::Probit => probit_quantile(x),
            LinkKind::Cloglog => (-(-x).ln_1p()).ln(),
            LinkKind::Loglog => (-x.ln()).ln(),
            LinkKind::Log => x.ln(),
            LinkKind::Sqrt => x.sqrt(),
            LinkKind::Identity => x,
        })
    }

    /// Inverse link. Mean links error if the result rounds to 0 or 1;
    /// dispersion links error unless the result is positive and finite.
    pub fn inverse(self, eta: f64) -> Result<f64, ModelError> {
        if !eta.is_finite() {
            return Err(ModelError::Link(format!("non-finite linear predictor {eta}")));
        }
        let v = match self {
            LinkKind::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            LinkKind::Probit => 0.5 * erfc(-eta * FRAC_1_SQRT_2),
            LinkKind::Cloglog => -(-eta.exp()).exp_m1(),
            LinkKind::Loglog => (-eta.exp()).exp(),
            LinkKind::Log => eta.exp(),
            LinkKind::Sqrt => {
                if eta <= 0.0 {
                    return Err(ModelError::Link(format!("sqrt link needs a positive predictor, got {eta}")));
                }
                eta * eta
            }
            LinkKind::Identity => eta,
        };
        self.check_domain(v).map_err(|_| {
            ModelError::Link(format!("inverse {} link at {eta} gives {v}, outside the parameter space", self.name()))
        })?;
        Ok(v)
    }

    pub fn d1(self, x: f64) -> Result<f64, ModelError> {
        self.check_domain(x)?;
        Ok(match self {
            LinkKind::Logit => 1.0 / (x * (1.0 - x)),
            LinkKind::Probit => 1.0 / phi(self.forward(x)?),
            LinkKind::Cloglog => {
                let l = -(-x).ln_1p();
                1.0 / ((1.0 - x) * l)
            }
            LinkKind::Loglog => {
                let l = -x.ln();
                -1.0 / (x * l)
            }
            LinkKind::Log => 1.0 / x,
            LinkKind::Sqrt => 0.5 / x.sqrt(),
            LinkKind::Identity => 1.0,
        })
    }

    pub fn d2(self, x: f64) -> Result<f64, ModelError> {
        self.check_domain(x)?;
        Ok(match self {
            LinkKind::Logit => {
                let m = x * (1.0 - x);
                (2.0 * x - 1.0) / (m * m)
            }
            LinkKind::Probit => {
                let z = self.forward(x)?;
                let p = phi(z);
                z / (p * p)
            }
            LinkKind::Cloglog => {
                let l = -(-x).ln_1p();
                let r = (1.0 - x) * l;
                (l - 1.0) / (r * r)
            }
            LinkKind::Loglog => {
                let l = -x.ln();
                let r = x * l;
                (l - 1.0) / (r * r)
            }
            LinkKind::Log => -1.0 / (x * x),
            LinkKind::Sqrt => -0.25 / (x * x.sqrt()),
            LinkKind::Identity => 0.0,
        })
    }
}

/// Φ⁻¹(p): the library inverse is only good to ~1e-10, so two Halley
/// steps against the accurate `erfc` restore full precision.
fn probit_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let f = phi(z);
        if f == 0.0 {
            break;
        }
        let r = (0.5 * erfc(-z * FRAC_1_SQRT_2) - p) / f;
        z -= r / (1.0 + 0.5 * z * r);
    }
    z
}

fn phi(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Single entry point over all links and modes.
pub fn link_eval(kind: LinkKind, mode: LinkMode, x: f64) -> Result<f64, ModelError> {
    match mode {
        LinkMode::Forward => kind.forward(x),
        LinkMode::Inverse => kind.inverse(x),
        LinkMode::D1 => kind.d1(x),
        LinkMode::D2 => kind.d2(x),
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LinkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::InvalidSpec(format!("unknown link '{s}'")))
    }
}
