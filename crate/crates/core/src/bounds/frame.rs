//! Bounds built on a normalized tight frame and reflection symmetry, and
//! their specializations to unconditional vectors.

use crate::batch::Vector;
use crate::error::{domain, Error, Result};
use crate::frames::{frame_coeffs, TightFrame};
use crate::norms::{lp_norm, Exponent};

use super::{clamped_sqrt, BoundFlag, BoundValue, Constants, DistanceKind};

/// `(8/π)^{1/4}`, the constant of the third-moment term.
pub const THIRD_MOMENT_CONSTANT: f64 = 1.263_237_555_492_129_4;

/// The `m × m` table `E[X₍ᵢ₎² X₍ⱼ₎²]`, in one of several encodings.
#[derive(Clone, Debug, PartialEq)]
pub enum PairMoments {
    /// Row-major `m × m`.
    Dense(Vec<f64>),
    /// `diagonal` on `i = j`, `off_diagonal` elsewhere (exchangeable
    /// coordinates).
    Exchangeable { diagonal: f64, off_diagonal: f64 },
    /// The exact simplex edge-frame moments; reduced in O(m) through the
    /// overlap classes of vertex pairs.
    SimplexExact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    /// Frame coefficients `θ₍ᵢ₎ = ⟨θ, uᵢ⟩` of a unit `θ`.
    pub theta_coeffs: Vec<f64>,
    pub pair_moments: PairMoments,
    /// `maxᵢ E|X₍ᵢ₎|³`.
    pub third_abs_max: Option<f64>,
    /// Almost-sure bound `a ≥ maxᵢ |X₍ᵢ₎|`.
    pub sup_bound: Option<f64>,
}

impl BoundInputs {
    pub fn new(frame: &TightFrame, theta: &Vector, pair_moments: PairMoments) -> Result<Self> {
        theta.ensure_unit(1e-9)?;
        let inputs = BoundInputs {
            n: frame.dim(),
            theta_coeffs: frame_coeffs(frame, theta)?,
            pair_moments,
            third_abs_max: None,
            sup_bound: None,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_third_abs(mut self, max_third_abs: f64) -> Self {
        self.third_abs_max = Some(max_third_abs);
        self
    }

    pub fn with_sup_bound(mut self, a: f64) -> Self {
        self.sup_bound = Some(a);
        self
    }

    pub fn m(&self) -> usize {
        self.theta_coeffs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        let target = m as f64 / self.n as f64;
        let s: f64 = self.theta_coeffs.iter().map(|t| t * t).sum();
        if (s - target).abs() > 1e-9 * target {
            return domain(format!(
                "Σθ₍ᵢ₎² = {s}, expected m/n = {target} (θ not unit or frame not tight)"
            ));
        }
        match &self.pair_moments {
            PairMoments::Dense(v) => {
                if v.len() != m * m {
                    return Err(Error::DimensionMismatch {
                        expected: m * m,
                        got: v.len(),
                    });
                }
                for i in 0..m {
                    for j in 0..i {
                        let (a, b) = (v[i * m + j], v[j * m + i]);
                        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                            return domain(format!("pair moments not symmetric at ({i}, {j})"));
                        }
                    }
                }
                if v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                    return domain("pair moments must be finite and nonnegative");
                }
            }
            PairMoments::Exchangeable {
                diagonal,
                off_diagonal,
            } => {
                if *diagonal < 0.0 || *off_diagonal < 0.0 {
                    return domain("pair moments must be nonnegative");
                }
            }
            PairMoments::SimplexExact => {
                if m != self.n * (self.n + 1) {
                    return domain("simplex pair moments need the ordered edge frame");
                }
            }
        }
        Ok(())
    }

    /// `Σᵢⱼ θ₍ᵢ₎² θ₍ⱼ₎² E[X₍ᵢ₎² X₍ⱼ₎²]`.
    pub fn weighted_pair_sum(&self) -> f64 {
        let a: Vec<f64> = self.theta_coeffs.iter().map(|t| t * t).collect();
        let m = a.len();
        match &self.pair_moments {
            PairMoments::Dense(v) => {
                let mut total = 0.0;
                for i in 0..m {
                    let row: f64 = (0..m).map(|j| v[i * m + j] * a[j]).sum();
                    total += a[i] * row;
                }
                total
            }
            PairMoments::Exchangeable {
                diagonal,
                off_diagonal,
            } => {
                let s: f64 = a.iter().sum();
                let s2: f64 = a.iter().map(|x| x * x).sum();
                off_diagonal * s * s + (diagonal - off_diagonal) * s2
            }
            PairMoments::SimplexExact => super::simplex::simplex_weighted_pair_sum(self.n, &a),
        }
    }

    /// `(n²/m²) Σᵢⱼ θ₍ᵢ₎²θ₍ⱼ₎² E[X₍ᵢ₎²X₍ⱼ₎²] − 1`, unclamped.
    pub fn radicand(&self) -> f64 {
        let ratio = self.n as f64 / self.m() as f64;
        ratio * ratio * self.weighted_pair_sum() - 1.0
    }

    pub fn sum_abs_cubed(&self) -> f64 {
        self.theta_coeffs.iter().map(|t| t.abs().powi(3)).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.theta_coeffs.iter().fold(0.0, |m, t| m.max(t.abs()))
    }
}

/// `2√(radicand) + (8/π)^{1/4} √((n/m) · maxᵢ E|X₍ᵢ₎|³ · Σᵢ |θ₍ᵢ₎|³)`.
pub fn bound_frame_general(inputs: &BoundInputs) -> Result<BoundValue> {
    inputs.validate()?;
    let third = inputs
        .third_abs_max
        .ok_or_else(|| Error::MissingInput("max E|X₍ᵢ₎|³".into()))?;
    let raw = inputs.radicand();
    let (root, clamp) = clamped_sqrt(raw);
    let first = 2.0 * root;
    let ratio = inputs.n as f64 / inputs.m() as f64;
    let second = THIRD_MOMENT_CONSTANT * (ratio * third * inputs.sum_abs_cubed()).sqrt();
    let mut b = BoundValue::new("frame_general", DistanceKind::Kolmogorov, first + second)
        .term("variance", first)
        .term("third_moment", second)
        .term("radicand", raw);
    if let Some(f) = clamp {
        b = b.flag(f);
    }
    Ok(b)
}

/// `24√(radicand) + 172 n a³ maxᵢ |θ₍ᵢ₎|³`.
pub fn bound_frame_bounded(inputs: &BoundInputs) -> Result<BoundValue> {
    inputs.validate()?;
    let a = inputs
        .sup_bound
        .ok_or_else(|| Error::MissingInput("almost-sure bound a".into()))?;
    let raw = inputs.radicand();
    let (root, clamp) = clamped_sqrt(raw);
    let first = 24.0 * root;
    let second = 172.0 * inputs.n as f64 * a.powi(3) * inputs.max_abs_coeff().powi(3);
    let mut b = BoundValue::new("frame_bounded", DistanceKind::Kolmogorov, first + second)
        .term("variance", first)
        .term("sup", second)
        .term("radicand", raw);
    if let Some(f) = clamp {
        b = b.flag(f);
    }
    Ok(b)
}

fn theta_norms(theta: &Vector) -> Result<(f64, f64, f64)> {
    theta.ensure_unit(1e-9)?;
    let l4 = lp_norm(theta, Exponent::Finite(4.0))?;
    let l3 = lp_norm(theta, Exponent::Finite(3.0))?;
    let linf = lp_norm(theta, Exponent::Infinity)?;
    Ok((l4.powi(4), l3.powf(1.5), linf))
}

/// Unconditional isotropic `X`:
/// `2√(max E Xᵢ⁴ ‖θ‖₄⁴ + max_{i≠j} Cov(Xᵢ², Xⱼ²)) + (8/π)^{1/4} √(max E|Xᵢ|³) ‖θ‖₃^{3/2}`.
pub fn bound_unconditional(
    theta: &Vector,
    max_fourth: f64,
    max_square_cov: f64,
    max_third_abs: f64,
) -> Result<BoundValue> {
    let (l4_4, l3_32, _) = theta_norms(theta)?;
    let raw = max_fourth * l4_4 + max_square_cov;
    let (root, clamp) = clamped_sqrt(raw);
    let first = 2.0 * root;
    let second = THIRD_MOMENT_CONSTANT * max_third_abs.max(0.0).sqrt() * l3_32;
    let mut b = BoundValue::new("unconditional", DistanceKind::Kolmogorov, first + second)
        .term("variance", first)
        .term("third_moment", second)
        .term("radicand", raw);
    if let Some(f) = clamp {
        b = b.flag(f);
    }
    Ok(b)
}

/// Unconditional `X ∈ [−a, a]ⁿ`: constants 24 and 172.
pub fn bound_unconditional_bounded(
    theta: &Vector,
    max_fourth: f64,
    max_square_cov: f64,
    a: f64,
) -> Result<BoundValue> {
    let (l4_4, _, linf) = theta_norms(theta)?;
    let n = theta.dim() as f64;
    let raw = max_fourth * l4_4 + max_square_cov;
    let (root, clamp) = clamped_sqrt(raw);
    let first = 24.0 * root;
    let second = 172.0 * n * a.powi(3) * linf.powi(3);
    let mut b = BoundValue::new("unconditional_bounded", DistanceKind::Kolmogorov, first + second)
        .term("variance", first)
        .term("sup", second)
        .term("radicand", raw);
    if let Some(f) = clamp {
        b = b.flag(f);
    }
    Ok(b)
}

/// Square-negatively-correlated `X` with `E|Xᵢ|³ ≤ a`, `E Xᵢ⁴ ≤ b`:
/// `2(√b ‖θ‖₄² + √a ‖θ‖₃^{3/2})`.
pub fn bound_sncp_moments(theta: &Vector, a: f64, b: f64) -> Result<BoundValue> {
    let (l4_4, l3_32, _) = theta_norms(theta)?;
    if a < 0.0 || b < 0.0 {
        return domain("moment bounds must be nonnegative");
    }
    let first = 2.0 * b.sqrt() * l4_4.sqrt();
    let second = 2.0 * a.sqrt() * l3_32;
    Ok(
        BoundValue::new("sncp_moments", DistanceKind::Kolmogorov, first + second)
            .term("fourth_moment", first)
            .term("third_moment", second),
    )
}

/// Square-negatively-correlated `X ∈ [−a, a]ⁿ`: `196 n a³ ‖θ‖_∞³`.
pub fn bound_sncp_bounded(theta: &Vector, a: f64) -> Result<BoundValue> {
    let (_, _, linf) = theta_norms(theta)?;
    if !(a >= 1.0) {
        return domain(format!(
            "a = {a} < 1 is impossible for an isotropic vector in [-a, a]^n"
        ));
    }
    let n = theta.dim() as f64;
    let value = 196.0 * n * a.powi(3) * linf.powi(3);
    Ok(BoundValue::new("sncp_bounded", DistanceKind::Kolmogorov, value).term("sup", value))
}

/// ℓp bodies: `min{c1 ‖θ‖₃^{3/2}, d1p n^{1+3/p} ‖θ‖_∞³}` with configurable
/// `c1` and `d1p`.
pub fn bound_lp(theta: &Vector, p: Exponent, constants: &Constants) -> Result<BoundValue> {
    let (_, l3_32, linf) = theta_norms(theta)?;
    let c1 = constants.resolve("c1")?;
    let d1p = constants.resolve("d1p")?;
    let n = theta.dim() as f64;
    let first = c1.value * l3_32;
    let second = d1p.value * n.powf(1.0 + 3.0 * p.reciprocal()) * linf.powi(3);
    let (value, branch) = if first <= second {
        (first, "third_moment")
    } else {
        (second, "sup")
    };
    Ok(BoundValue::new("lp", DistanceKind::Kolmogorov, value)
        .term("third_moment", first)
        .term("sup", second)
        .flag(BoundFlag::Branch {
            name: branch.to_string(),
        })
        .constant(c1)
        .constant(d1p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::standard_frame;

    const CUBE_FOURTH: f64 = 1.8;
    // 9/(4√3)
    const CUBE_THIRD: f64 = 1.299_038_105_676_658;

    fn cube_inputs(theta: &Vector) -> BoundInputs {
        let frame = standard_frame(theta.dim()).unwrap();
        BoundInputs::new(
            &frame,
            theta,
            PairMoments::Exchangeable {
                diagonal: CUBE_FOURTH,
                off_diagonal: 1.0,
            },
        )
        .unwrap()
        .with_third_abs(CUBE_THIRD)
        .with_sup_bound(3f64.sqrt())
    }

    #[test]
    fn third_moment_constant() {
        assert!((THIRD_MOMENT_CONSTANT - (8.0 / std::f64::consts::PI).powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn cube_e1() {
        let theta = Vector::basis(10, 0).unwrap();
        let b = bound_frame_general(&cube_inputs(&theta)).unwrap();
        assert!((b.term_value("radicand").unwrap() - 0.8).abs() < 1e-12);
        let expected = 2.0 * 0.8f64.sqrt() + THIRD_MOMENT_CONSTANT * CUBE_THIRD.sqrt();
        assert!((b.value - expected).abs() < 1e-12);
        assert!((b.value - 3.2286).abs() < 1e-4);
    }

    #[test]
    fn cube_diagonal() {
        let theta = Vector::diagonal(100).unwrap();
        let b = bound_frame_general(&cube_inputs(&theta)).unwrap();
        assert!((b.term_value("radicand").unwrap() - 0.008).abs() < 1e-12);
        assert!((b.value - 0.6342).abs() < 1e-4, "{}", b.value);
    }

    #[test]
    fn unit_pair_moments_kill_the_variance_term() {
        let theta = Vector::random_unit(7, 3).unwrap();
        let frame = standard_frame(7).unwrap();
        let inputs = BoundInputs::new(
            &frame,
            &theta,
            PairMoments::Exchangeable {
                diagonal: 1.0,
                off_diagonal: 1.0,
            },
        )
        .unwrap()
        .with_third_abs(1.0);
        let b = bound_frame_general(&inputs).unwrap();
        assert!(b.term_value("variance").unwrap() < 1e-7);
    }

    #[test]
    fn missing_third_moment_is_an_error() {
        let theta = Vector::basis(3, 0).unwrap();
        let mut inputs = cube_inputs(&theta);
        inputs.third_abs_max = None;
        assert!(matches!(
            bound_frame_general(&inputs),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn bounded_cube_diagonal() {
        let theta = Vector::diagonal(100).unwrap();
        let b = bound_frame_bounded(&cube_inputs(&theta)).unwrap();
        assert!((b.term_value("sup").unwrap() - 89.3738).abs() < 1e-3);
        assert!(b.is_vacuous());

        let mut zero = cube_inputs(&theta);
        zero.pair_moments = PairMoments::Exchangeable {
            diagonal: 1.0,
            off_diagonal: 1.0,
        };
        let z = bound_frame_bounded(&zero).unwrap();
        assert!((z.value - z.term_value("sup").unwrap()).abs() < 1e-6);
    }

    #[test]
    fn dense_and_exchangeable_agree() {
        let n = 5;
        let theta = Vector::random_unit(n, 8).unwrap();
        let mut dense = vec![1.0; n * n];
        for i in 0..n {
            dense[i * n + i] = CUBE_FOURTH;
        }
        let frame = standard_frame(n).unwrap();
        let a = BoundInputs::new(&frame, &theta, PairMoments::Dense(dense)).unwrap();
        let b = cube_inputs(&theta);
        assert!((a.radicand() - b.radicand()).abs() < 1e-13);
    }

    #[test]
    fn unconditional_cube() {
        let e1 = Vector::basis(50, 0).unwrap();
        let b = bound_unconditional(&e1, CUBE_FOURTH, 0.0, CUBE_THIRD).unwrap();
        assert!((b.value - 4.123_061_034_177_053).abs() < 1e-12, "{}", b.value);

        let clamped = bound_unconditional(&e1, 0.5, -1.0, CUBE_THIRD).unwrap();
        assert!(clamped.clamped());
        assert_eq!(clamped.term_value("variance"), Some(0.0));
    }

    #[test]
    fn unconditional_dominates_frame_general() {
        for seed in 0..20 {
            let theta = Vector::random_unit(12, seed).unwrap();
            let general = bound_frame_general(&cube_inputs(&theta)).unwrap();
            let uncon = bound_unconditional(&theta, CUBE_FOURTH, 0.0, CUBE_THIRD).unwrap();
            assert!(uncon.value >= general.value - 1e-12);
            // third-moment terms coincide for the standard frame
            assert!(
                (uncon.term_value("third_moment").unwrap()
                    - general.term_value("third_moment").unwrap())
                .abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn sncp_bounded_values() {
        let theta = Vector::diagonal(100).unwrap();
        let b = bound_sncp_bounded(&theta, 3f64.sqrt()).unwrap();
        assert!((b.value - 101.8446).abs() < 1e-3);
        assert!(bound_sncp_bounded(&theta, 0.5).is_err());
        let e1 = Vector::basis(10, 0).unwrap();
        let v = bound_sncp_bounded(&e1, 2.0).unwrap().value;
        assert!((v - 196.0 * 10.0 * 8.0).abs() < 1e-9);
        // cubic in a
        let v3 = bound_sncp_bounded(&e1, 4.0).unwrap().value;
        assert!((v3 / v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn lp_branches() {
        let c = Constants::new();
        let e1 = Vector::basis(1000, 0).unwrap();
        let b = bound_lp(&e1, Exponent::Finite(4.0), &c).unwrap();
        assert_eq!(b.value, 1.0);
        assert!(!b.is_explicit());

        let diag = Vector::diagonal(10_000).unwrap();
        let inf = bound_lp(&diag, Exponent::Infinity, &c).unwrap();
        assert!((inf.value - 0.01).abs() < 1e-12);
        assert!(inf.flags.contains(&BoundFlag::Branch { name: "sup".into() }));

        let one = bound_lp(&Vector::diagonal(50).unwrap(), Exponent::Finite(1.0), &c).unwrap();
        assert!(one.flags.contains(&BoundFlag::Branch {
            name: "third_moment".into()
        }));
    }

    #[test]
    fn rejects_non_unit_theta() {
        let theta = Vector::new(vec![1.0, 1.0]).unwrap();
        assert!(bound_unconditional(&theta, 1.8, 0.0, 1.3).is_err());
    }
}
