use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// The exponent `p` of an ℓp norm. `p = ∞` is its own case rather than a
/// large float.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentRepr", into = "ExponentRepr")]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return domain(format!("lp exponent must be >= 1, got {p}"));
        }
        if p.is_infinite() {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(p))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// `p` as a float, `f64::INFINITY` for the sup norm.
    pub fn value(&self) -> f64 {
        match *self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, which is 0 for the sup norm.
    pub fn reciprocal(&self) -> f64 {
        match *self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            Exponent::Finite(p) => Exponent::new(p),
            Exponent::Infinity => Ok(self),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Format(format!("not an lp exponent: {s:?}")))?;
                Exponent::new(p)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<ExponentRepr> for Exponent {
    type Error = Error;

    fn try_from(repr: ExponentRepr) -> Result<Self> {
        match repr {
            ExponentRepr::Number(p) => Exponent::Finite(p).validate(),
            ExponentRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Exponent> for ExponentRepr {
    fn from(p: Exponent) -> Self {
        match p {
            Exponent::Finite(p) => ExponentRepr::Number(p),
            Exponent::Infinity => ExponentRepr::Text("inf".into()),
        }
    }
}

/// ℓp norm of `x`, rescaled by `max |x_i|` so that large or tiny entries
/// neither overflow nor underflow.
pub fn lp_norm(x: &[f64], p: Exponent) -> Result<f64> {
    let p = p.validate()?;
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return domain(format!("lp_norm of a non-finite vector (entry {bad})"));
    }
    let max = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let p = match p {
        Exponent::Infinity => return Ok(max),
        Exponent::Finite(p) => p,
    };
    let sum: f64 = if p == 2.0 {
        x.iter().map(|v| (v / max) * (v / max)).sum()
    } else if p == 1.0 {
        x.iter().map(|v| (v / max).abs()).sum()
    } else {
        x.iter().map(|v| (v.abs() / max).powf(p)).sum()
    };
    Ok(max * sum.powf(1.0 / p))
}
