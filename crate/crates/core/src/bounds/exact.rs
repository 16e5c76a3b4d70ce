//! Closed-form marginals and moments used as oracles.

use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;

use crate::error::{domain, Result};
use crate::normal::{normal_pdf, normal_sf};
use crate::norms::Exponent;
use crate::quad::integrate;
use crate::samplers::{DistributionKind, DistributionSpec};

/// Laws whose one-dimensional marginal has a closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalKind {
    /// Uniform on the sphere of radius `√n`.
    SphereShell,
    /// Uniform on the ball of radius `√(n+2)`.
    BallUniform,
}

impl MarginalKind {
    /// `(support radius², exponent, log normalizing constant)` of the
    /// density `C (1 − t²/R²)^e`.
    fn shape(self, n: usize) -> Result<(f64, f64, f64)> {
        let nf = n as f64;
        match self {
            MarginalKind::SphereShell => {
                if n < 3 {
                    return domain("the sphere marginal density needs n >= 3");
                }
                let log_c = ln_gamma(nf / 2.0)
                    - 0.5 * (nf * std::f64::consts::PI).ln()
                    - ln_gamma((nf - 1.0) / 2.0);
                Ok((nf, (nf - 3.0) / 2.0, log_c))
            }
            MarginalKind::BallUniform => {
                if n < 2 {
                    return domain("dimension must be >= 2");
                }
                let r2 = nf + 2.0;
                let log_c = ln_gamma(nf / 2.0 + 1.0)
                    - 0.5 * (r2 * std::f64::consts::PI).ln()
                    - ln_gamma((nf + 1.0) / 2.0);
                Ok((r2, (nf - 1.0) / 2.0, log_c))
            }
        }
    }
}

fn density_with(shape: (f64, f64, f64), t: f64) -> f64 {
    let (r2, e, log_c) = shape;
    let x = t * t / r2;
    if x >= 1.0 {
        return if x == 1.0 && e == 0.0 { log_c.exp() } else { 0.0 };
    }
    (log_c + e * (-x).ln_1p()).exp()
}

/// Density of `⟨X, θ⟩` for a unit `θ`; zero outside the support.
pub fn exact_projection_density(kind: MarginalKind, n: usize, t: f64) -> Result<f64> {
    Ok(density_with(kind.shape(n)?, t))
}

/// Distribution function of `⟨X, θ⟩`, by quadrature of the density.
pub fn exact_projection_cdf(kind: MarginalKind, n: usize, t: f64) -> Result<f64> {
    let shape = kind.shape(n)?;
    let r = shape.0.sqrt();
    let s = t.abs().min(r);
    let half = integrate(|x| density_with(shape, x), 0.0, s, 1e-13)?.value;
    Ok(if t >= 0.0 { 0.5 + half } else { 0.5 - half }.clamp(0.0, 1.0))
}

/// `∫ |f − φ|`, the total-variation (L¹) distance of the marginal from the
/// standard normal, to absolute error about 1e-10.
///
/// `f − φ` is split at its sign changes on `[0, R]` (located on a grid and
/// refined by bisection) so each piece integrates a smooth function; the
/// normal mass beyond the support adds `2Φ(−R)`.
pub fn exact_tv_vs_normal(kind: MarginalKind, n: usize) -> Result<f64> {
    let shape = kind.shape(n)?;
    let r = shape.0.sqrt();
    let g = |t: f64| density_with(shape, t) - normal_pdf(t);

    const GRID: usize = 4000;
    let mut cuts = vec![0.0];
    let mut prev_t = 0.0;
    let mut prev = g(0.0);
    for k in 1..=GRID {
        let t = r * k as f64 / GRID as f64;
        let v = g(t);
        if prev != 0.0 && v != 0.0 && (prev < 0.0) != (v < 0.0) {
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) < 0.0) == (prev < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev = v;
    }
    cuts.push(r);

    let mut half = 0.0;
    for w in cuts.windows(2) {
        half += integrate(g, w[0], w[1], 1e-12)?.value.abs();
    }
    Ok(2.0 * half + 2.0 * normal_sf(r))
}

/// `E|u₁|^q` for `u` uniform on the unit sphere `S^{n−1}`:
/// `Γ((q+1)/2) Γ(n/2) / (√π Γ((n+q)/2))`.
pub fn sphere_coordinate_abs_moment(n: usize, q: f64) -> f64 {
    let nf = n as f64;
    (ln_gamma((q + 1.0) / 2.0) + ln_gamma(nf / 2.0)
        - 0.5 * std::f64::consts::PI.ln()
        - ln_gamma((nf + q) / 2.0))
    .exp()
}

/// `Var ‖X‖₂² = 4n/(n+4)` for the uniform ball of radius `√(n+2)`.
pub fn ball_norm2_variance(n: usize) -> f64 {
    let nf = n as f64;
    4.0 * nf / (nf + 4.0)
}

/// `Var ‖X‖₂² = n(4n+6)/(n+1)` for the isotropic density `∝ e^{−√(n+1)‖x‖₂}`.
pub fn spherical_exponential_norm2_variance(n: usize) -> f64 {
    let nf = n as f64;
    nf * (4.0 * nf + 6.0) / (nf + 1.0)
}

/// `Cov(X₁², X₂²) = (4n+10)/((n+1)(n+2))` for the isotropic density
/// `∝ e^{−b‖x‖_∞}`.
///
/// With `r = ‖X‖_∞ ~ Gamma(n, 1/b)` and `b² = (n+1)(n+2)/3`: a pair of
/// coordinates contains the facet coordinate with probability `2/n`, giving
/// `E X₁²X₂² = E r⁴ [2/(3n) + (n−2)/(9n)] = E r⁴ (n+4)/(9n)`, and
/// `E r⁴ = n(n+1)(n+2)(n+3)/b⁴`.
pub fn linf_exponential_square_cov(n: usize) -> f64 {
    let nf = n as f64;
    let b2 = (nf + 1.0) * (nf + 2.0) / 3.0;
    let r4 = nf * (nf + 1.0) * (nf + 2.0) * (nf + 3.0) / (b2 * b2);
    r4 * (nf + 4.0) / (9.0 * nf) - 1.0
}

/// Exact per-coordinate moments of a law, all coordinates alike.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMoments {
    pub second: f64,
    pub third_abs: f64,
    pub fourth: f64,
    /// `Cov(Xᵢ², Xⱼ²)`, `i ≠ j`.
    pub square_cov: f64,
}

/// Closed-form coordinate moments where available: the cube, the sphere
/// and the Euclidean ball, at the requested scale.
pub fn exact_coordinate_moments(spec: &DistributionSpec) -> Option<CoordinateMoments> {
    let n = spec.n;
    let nf = n as f64;
    let s = spec.scale;
    match spec.kind {
        DistributionKind::LpBallUniform {
            p: Exponent::Infinity,
        } => Some(CoordinateMoments {
            second: s * s / 3.0,
            third_abs: s.powi(3) / 4.0,
            fourth: s.powi(4) / 5.0,
            square_cov: 0.0,
        }),
        DistributionKind::SphereShell | DistributionKind::BallUniform => {
            // radial moments E r^k of X = r·u
            let radial = |k: f64| match spec.kind {
                DistributionKind::SphereShell => s.powf(k),
                _ => nf * s.powf(k) / (nf + k),
            };
            let u4 = 3.0 / (nf * (nf + 2.0));
            let u22 = 1.0 / (nf * (nf + 2.0));
            let second = radial(2.0) / nf;
            Some(CoordinateMoments {
                second,
                third_abs: radial(3.0) * sphere_coordinate_abs_moment(n, 3.0),
                fourth: radial(4.0) * u4,
                square_cov: radial(4.0) * u22 - second * second,
            })
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // scipy.integrate.quad of |f − φ| with mpmath-checked constants
    const SPHERE_TV: [(usize, f64); 10] = [
        (10, 0.079_396_294_680_236_93),
        (20, 0.037_154_764_976_550_55),
        (25, 0.029_357_510_832_775_404),
        (50, 0.014_330_078_336_978_823),
        (100, 0.007_081_987_076_360_426),
        (200, 0.003_520_715_565_246_595_4),
        (250, 0.002_813_358_205_954_378),
        (400, 0.001_755_347_178_222_588_8),
        (500, 0.001_403_479_764_543_001),
        (1000, 0.000_700_943_752_248_350_7),
    ];

    #[test]
    fn densities_integrate_to_one() {
        for kind in [MarginalKind::SphereShell, MarginalKind::BallUniform] {
            for n in [3usize, 10, 100] {
                let shape = kind.shape(n).unwrap();
                let r = shape.0.sqrt();
                let total = integrate(|t| density_with(shape, t), -r, r, 1e-13).unwrap();
                assert!((total.value - 1.0).abs() < 1e-10, "{kind:?} n = {n}");
            }
        }
    }

    #[test]
    fn three_dimensional_sphere_marginal_is_uniform() {
        let expected = 1.0 / (2.0 * 3f64.sqrt());
        for t in [-1.7, -0.3, 0.0, 1.2] {
            let f = exact_projection_density(MarginalKind::SphereShell, 3, t).unwrap();
            assert!((f - expected).abs() < 1e-14);
        }
        assert_eq!(exact_projection_density(MarginalKind::SphereShell, 3, 2.0).unwrap(), 0.0);
        assert!(exact_projection_density(MarginalKind::SphereShell, 2, 0.0).is_err());
    }

    #[test]
    fn cdf_is_consistent() {
        let f = |t| exact_projection_cdf(MarginalKind::BallUniform, 6, t).unwrap();
        assert!((f(0.0) - 0.5).abs() < 1e-15);
        assert!((f(10.0) - 1.0).abs() < 1e-13);
        assert!((f(0.7) + f(-0.7) - 1.0).abs() < 1e-13);
        // n = 3 sphere: uniform on [−√3, √3]
        let g = exact_projection_cdf(MarginalKind::SphereShell, 3, 1.0).unwrap();
        assert!((g - (1.0 + 3f64.sqrt()) / (2.0 * 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn sphere_tv_matches_reference() {
        for (n, expected) in SPHERE_TV {
            let tv = exact_tv_vs_normal(MarginalKind::SphereShell, n).unwrap();
            assert!((tv - expected).abs() < 1e-8, "n = {n}: {tv} vs {expected}");
        }
    }

    #[test]
    fn sphere_tv_below_bound_and_order_one_over_n() {
        for n in (10..=500).step_by(10) {
            let tv = exact_tv_vs_normal(MarginalKind::SphereShell, n).unwrap();
            assert!(tv <= 8.0 / (n as f64 - 1.0));
        }
        for n in [50usize, 100, 200] {
            let a = exact_tv_vs_normal(MarginalKind::SphereShell, n).unwrap();
            let b = exact_tv_vs_normal(MarginalKind::SphereShell, 2 * n).unwrap();
            assert!((a / b - 2.0).abs() < 0.2);
        }
    }

    #[test]
    fn ball_tv_is_small() {
        let tv = exact_tv_vs_normal(MarginalKind::BallUniform, 100).unwrap();
        assert!(tv > 0.0 && tv < 16.0 / 99.0);
    }

    #[test]
    fn sphere_coordinate_moments() {
        // E u₁² = 1/n and E u₁⁴ = 3/(n(n+2))
        for n in [3usize, 5, 40] {
            let nf = n as f64;
            assert!((sphere_coordinate_abs_moment(n, 2.0) - 1.0 / nf).abs() < 1e-14);
            assert!((sphere_coordinate_abs_moment(n, 4.0) - 3.0 / (nf * (nf + 2.0))).abs() < 1e-14);
        }
        // n = 3: uniform marginal on [−1, 1], E|u|³ = 1/4
        assert!((sphere_coordinate_abs_moment(3, 3.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cube_and_ball_moments() {
        let cube = DistributionSpec::new(
            DistributionKind::LpBallUniform {
                p: Exponent::Infinity,
            },
            4,
        )
        .unwrap();
        let m = exact_coordinate_moments(&cube).unwrap();
        assert!((m.second - 1.0).abs() < 1e-15);
        assert!((m.fourth - 1.8).abs() < 1e-14);
        assert!((m.third_abs - 9.0 / (4.0 * 3f64.sqrt())).abs() < 1e-14);

        let ball = DistributionSpec::new(DistributionKind::BallUniform, 10).unwrap();
        let b = exact_coordinate_moments(&ball).unwrap();
        assert!((b.second - 1.0).abs() < 1e-14);
        assert!((b.fourth - 3.0 * 12.0 / 14.0).abs() < 1e-13);
        assert!((b.square_cov + 2.0 / 14.0).abs() < 1e-13);

        let sphere = DistributionSpec::new(DistributionKind::SphereShell, 10).unwrap();
        let s = exact_coordinate_moments(&sphere).unwrap();
        assert!((s.square_cov + 2.0 / 12.0).abs() < 1e-13);
    }

    #[test]
    fn linf_exponential_covariance_decays_like_one_over_n() {
        assert!((linf_exponential_square_cov(10) - 50.0 / 132.0).abs() < 1e-14);
        for n in [10usize, 20, 40, 80] {
            let c = linf_exponential_square_cov(n);
            let scaled = c * n as f64;
            assert!(c > 0.0 && scaled > 3.5 && scaled < 4.0);
        }
    }
}
