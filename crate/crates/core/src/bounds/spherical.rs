//! Total-variation bounds for spherically symmetric vectors.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

use super::{BoundValue, DistanceKind};

/// Which statistic feeds the spherically symmetric bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphSymmVariant {
    /// statistic = `E|1 − E[X₂² | X₁]|`; bound `4 · statistic`.
    ConditionalL1,
    /// statistic = `E|‖X‖₂² − n|`; bound `4/(n−1) · statistic + 8/(n−1)`.
    AbsDeviation,
    /// statistic = `√Var ‖X‖₂²`; bound `4/(n−1) · statistic + 8/(n−1)`.
    StdDev,
}

pub fn bound_sph_symm(n: usize, variant: SphSymmVariant, statistic: f64) -> Result<BoundValue> {
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    if !(statistic >= 0.0) {
        return domain(format!("statistic must be nonnegative, got {statistic}"));
    }
    let k = 1.0 / (n as f64 - 1.0);
    let (name, value) = match variant {
        SphSymmVariant::ConditionalL1 => ("sph_symm_conditional", 4.0 * statistic),
        SphSymmVariant::AbsDeviation => ("sph_symm_absdev", 4.0 * k * statistic + 8.0 * k),
        SphSymmVariant::StdDev => ("sph_symm_stddev", 4.0 * k * statistic + 8.0 * k),
    };
    Ok(BoundValue::new(name, DistanceKind::TotalVariation, value).term("statistic", statistic))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EuclideanBody {
    /// Sphere of radius `√n`: `a = 8`.
    Sphere,
    /// Ball of radius `√(n+2)`: `a = 16`.
    Ball,
}

/// `a/(n−1)` with the constants stated for the Euclidean sphere and ball.
pub fn bound_euclidean(n: usize, body: EuclideanBody) -> Result<BoundValue> {
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    let a = match body {
        EuclideanBody::Sphere => 8.0,
        EuclideanBody::Ball => 16.0,
    };
    Ok(
        BoundValue::new("euclidean", DistanceKind::TotalVariation, a / (n as f64 - 1.0))
            .term("a", a),
    )
}

/// `10/√(n λ₁)` from a Poincaré constant `λ₁ ∈ (0, 1]`, for `n > 25`.
pub fn bound_poincare(n: usize, lambda1: f64) -> Result<BoundValue> {
    if n <= 25 {
        return domain(format!(
            "the Poincaré route only yields a bound for n > 25, got n = {n}"
        ));
    }
    if !(lambda1 > 0.0 && lambda1 <= 1.0) {
        return domain(format!(
            "an isotropic vector has spectral gap in (0, 1], got {lambda1}"
        ));
    }
    let value = 10.0 / (n as f64 * lambda1).sqrt();
    Ok(BoundValue::new("poincare", DistanceKind::TotalVariation, value).term("lambda1", lambda1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{ball_norm2_variance, spherical_exponential_norm2_variance};

    #[test]
    fn sphere_shell_has_zero_statistic() {
        let b = bound_sph_symm(100, SphSymmVariant::StdDev, 0.0).unwrap();
        assert!((b.value - 8.0 / 99.0).abs() < 1e-15);
    }

    #[test]
    fn ball_exact_variance_route() {
        let stat = ball_norm2_variance(100).sqrt();
        let b = bound_sph_symm(100, SphSymmVariant::StdDev, stat).unwrap();
        let expected = 4.0 / 99.0 * (400.0f64 / 104.0).sqrt() + 8.0 / 99.0;
        assert!((b.value - expected).abs() < 1e-14);
        assert!((b.value - 0.160_047).abs() < 1e-6);
        let coarse = bound_euclidean(100, EuclideanBody::Ball).unwrap();
        assert!((coarse.value - 16.0 / 99.0).abs() < 1e-15);
        assert!(b.value <= coarse.value);
    }

    #[test]
    fn spherical_exponential_route() {
        let stat = spherical_exponential_norm2_variance(100).sqrt();
        assert!((stat - 20.0494).abs() < 1e-4);
        let b = bound_sph_symm(100, SphSymmVariant::StdDev, stat).unwrap();
        assert!((b.value - 0.8909).abs() < 1e-4, "{}", b.value);
    }

    #[test]
    fn conditional_variant_and_errors() {
        let b = bound_sph_symm(10, SphSymmVariant::ConditionalL1, 0.01).unwrap();
        assert_eq!(b.value, 0.04);
        assert!(bound_sph_symm(10, SphSymmVariant::AbsDeviation, -0.1).is_err());
    }

    #[test]
    fn poincare() {
        assert!((bound_poincare(100, 1.0).unwrap().value - 1.0).abs() < 1e-15);
        let b = bound_poincare(2600, 1.0 / 13.0).unwrap();
        assert!((b.value - 10.0 / 200f64.sqrt()).abs() < 1e-12);
        assert!(bound_poincare(25, 1.0).is_err());
        assert!(bound_poincare(100, 1.5).is_err());
        let n = 400;
        let v = bound_poincare(n, 1.0 / 13.0).unwrap().value;
        assert!((v - 10.0 * 13f64.sqrt() / (n as f64).sqrt()).abs() < 1e-12);
    }
}
