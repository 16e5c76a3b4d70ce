//! Closed-form error bounds for the normal approximation of `W = ⟨X, θ⟩`,
//! plus exact moment and density formulas used as oracles.
//!
//! Every bound returns a [`BoundValue`] carrying its terms, any configurable
//! constants it consumed, and flags for conditions worth surfacing (a
//! radicand clamped at zero, a constant left at its default).

mod exact;
mod frame;
mod simplex;
mod spherical;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use exact::{
    ball_norm2_variance, exact_coordinate_moments, exact_projection_cdf,
    exact_projection_density, exact_tv_vs_normal, linf_exponential_square_cov,
    spherical_exponential_norm2_variance, sphere_coordinate_abs_moment, CoordinateMoments,
    MarginalKind,
};
pub use frame::{
    bound_frame_bounded, bound_frame_general, bound_lp, bound_sncp_bounded, bound_sncp_moments,
    bound_unconditional, bound_unconditional_bounded, BoundInputs, PairMoments,
    THIRD_MOMENT_CONSTANT,
};
pub use simplex::{
    bound_simplex, bound_simplex_assembled, simplex_pair_moment, simplex_third_moment_bound,
    simplex_y_moment,
};
pub use spherical::{bound_euclidean, bound_poincare, bound_sph_symm, EuclideanBody, SphSymmVariant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `sup_t |P[W ≤ t] − Φ(t)|`.
    Kolmogorov,
    /// `L¹` distance of densities (twice the supremum over sets).
    TotalVariation,
}

impl DistanceKind {
    /// Distance value at or above which a bound says nothing.
    pub fn trivial_value(self) -> f64 {
        match self {
            DistanceKind::Kolmogorov => 1.0,
            DistanceKind::TotalVariation => 2.0,
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Kolmogorov => "kolmogorov",
            DistanceKind::TotalVariation => "total_variation",
        })
    }
}

/// A configurable constant as it was used in one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantUse {
    pub name: String,
    pub value: f64,
    /// True when no value was supplied and the default 1.0 was used.
    pub defaulted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum BoundFlag {
    /// A radicand came out negative (Monte Carlo noise) and was set to 0.
    RadicandClamped { raw: f64 },
    /// A constant with no known value was left at the default.
    DefaultConstant { name: String },
    /// Which branch of a minimum was selected.
    Branch { name: String },
    /// The bound is at least the trivial distance.
    Vacuous,
}

/// User-supplied values for the constants the theory leaves unspecified.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Constants(pub BTreeMap<String, f64>);

pub const DEFAULT_CONSTANT: f64 = 1.0;

impl Constants {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn resolve(&self, name: &str) -> Result<ConstantUse> {
        match self.0.get(name) {
            Some(&value) if value.is_finite() && value > 0.0 => Ok(ConstantUse {
                name: name.to_string(),
                value,
                defaulted: false,
            }),
            Some(&value) => domain(format!("constant {name} must be positive, got {value}")),
            None => Ok(ConstantUse {
                name: name.to_string(),
                value: DEFAULT_CONSTANT,
                defaulted: true,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    /// Short identifier of the formula, e.g. `frame_general`.
    pub bound: String,
    pub kind: DistanceKind,
    pub value: f64,
    /// Named additive pieces (or inputs) of the value, in formula order.
    pub terms: Vec<(String, f64)>,
    pub constants_used: Vec<ConstantUse>,
    pub flags: Vec<BoundFlag>,
}

impl BoundValue {
    pub(crate) fn new(bound: &str, kind: DistanceKind, value: f64) -> Self {
        let mut b = BoundValue {
            bound: bound.to_string(),
            kind,
            value,
            terms: Vec::new(),
            constants_used: Vec::new(),
            flags: Vec::new(),
        };
        if value >= kind.trivial_value() {
            b.flags.push(BoundFlag::Vacuous);
        }
        b
    }

    pub(crate) fn term(mut self, name: &str, value: f64) -> Self {
        self.terms.push((name.to_string(), value));
        self
    }

    pub(crate) fn flag(mut self, flag: BoundFlag) -> Self {
        self.flags.push(flag);
        self
    }

    pub(crate) fn constant(mut self, c: ConstantUse) -> Self {
        if c.defaulted {
            self.flags.push(BoundFlag::DefaultConstant {
                name: c.name.clone(),
            });
        }
        self.constants_used.push(c);
        self
    }

    /// Whether every constant in the formula is a known number.
    pub fn is_explicit(&self) -> bool {
        self.constants_used.is_empty()
    }

    pub fn is_vacuous(&self) -> bool {
        self.value >= self.kind.trivial_value()
    }

    pub fn term_value(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn clamped(&self) -> bool {
        self.flags
            .iter()
            .any(|f| matches!(f, BoundFlag::RadicandClamped { .. }))
    }
}

/// `√max(x, 0)`, reporting a clamp when `x < 0`.
pub(crate) fn clamped_sqrt(x: f64) -> (f64, Option<BoundFlag>) {
    if x < 0.0 {
        (0.0, Some(BoundFlag::RadicandClamped { raw: x }))
    } else {
        (x.sqrt(), None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_default_with_flag() {
        let c = Constants::new().with("c1", 2.5);
        assert_eq!(c.resolve("c1").unwrap().value, 2.5);
        let d = c.resolve("d1p").unwrap();
        assert!(d.defaulted && d.value == 1.0);
        assert!(Constants::new().with("c1", -1.0).resolve("c1").is_err());
        let b = BoundValue::new("x", DistanceKind::Kolmogorov, 0.1).constant(d);
        assert!(!b.is_explicit());
        assert!(matches!(b.flags[0], BoundFlag::DefaultConstant { .. }));
    }

    #[test]
    fn vacuity() {
        assert!(BoundValue::new("x", DistanceKind::Kolmogorov, 1.5).is_vacuous());
        assert!(!BoundValue::new("x", DistanceKind::TotalVariation, 1.5).is_vacuous());
    }
}
