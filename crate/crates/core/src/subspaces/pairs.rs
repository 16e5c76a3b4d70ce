//! Exchangeable pairs `(W, W′)` built from the symmetries of `X`, and the
//! Stein-type bound assembled from their moments.
//!
//! Reflection pairs pick a uniform frame vector `u_I` and set
//! `X′ = X − 2X₍ᵢ₎u_I`, so `W − W′ = 2X₍ᵢ₎θ₍ᵢ₎` and `E[W − W′ | W] = (2/n)W`.
//! Rotation pairs turn `X` by `arcsin ε` inside a uniformly random 2-plane.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{dot, SampleBatch, Vector};
use crate::bounds::{clamped_sqrt, BoundInputs, BoundValue, DistanceKind, PairMoments};
use crate::empirical::default_bins;
use crate::error::{domain, Error, Result};
use crate::frames::{frame_coeffs, FrameLabel, TightFrame};
use crate::rng::{derive_seed, stream_rng, BLOCK_ROWS};
use crate::samplers::{map_sample_blocks, DistributionSpec};
use crate::stats::{linear_fit, CompensatedSum, RunningStats};

/// `(2π)^{−1/4}`.
pub const STEIN_THIRD_CONSTANT: f64 = 0.631_618_777_746_064_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub lambda: f64,
    pub samples: usize,
    /// Least-squares slope of `W − W′` on `W`, with HC0 standard error.
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    /// Equal-count binned estimate of `Var E[(W−W′)² | W]`.
    pub cond_var: f64,
    /// `Var E[(W−W′)² | X]`, an upper bound on `cond_var`, when exact pair
    /// moments are supplied.
    pub cond_var_upper: Option<f64>,
    /// Sample mean of `|W − W′|³`.
    pub third_abs: f64,
    pub third_abs_se: f64,
    pub sup_observed: f64,
    /// Almost-sure bound on `|W − W′|`, when one is known.
    pub sup_bound: Option<f64>,
}

/// Summarize sampled `W` and `d = W − W′` with the given `λ`.
pub fn analyze_pairs(w: &[f64], d: &[f64], lambda: f64) -> Result<PairDiagnostics> {
    if w.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: d.len(),
        });
    }
    let fit = linear_fit(w, d).ok_or(Error::InsufficientData {
        needed: 3,
        got: w.len(),
    })?;
    let d2: Vec<f64> = d.iter().map(|x| x * x).collect();
    let third: RunningStats = d.iter().map(|x| x.abs().powi(3)).collect();
    Ok(PairDiagnostics {
        lambda,
        samples: w.len(),
        slope: fit.slope,
        slope_se: fit.slope_se,
        intercept: fit.intercept,
        intercept_se: fit.intercept_se,
        cond_var: binned_conditional_variance(w, &d2),
        cond_var_upper: None,
        third_abs: third.mean(),
        third_abs_se: third.std_error(),
        sup_observed: d.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        sup_bound: None,
    })
}

/// `Σ_b (c_b/N)(mean_b(y) − mean(y))²` over `⌈N^{1/3}⌉` equal-count bins of
/// `x`. Within-bin noise biases this upward by about `bins · Var(y) / N`.
fn binned_conditional_variance(x: &[f64], y: &[f64]) -> f64 {
    let count = x.len();
    let mut order: Vec<usize> = (0..count).collect();
    order.par_sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]));
    let overall = y.iter().copied().collect::<CompensatedSum>().value() / count as f64;
    let bins = default_bins(count);
    let mut total = CompensatedSum::new();
    for b in 0..bins {
        let lo = b * count / bins;
        let hi = (b + 1) * count / bins;
        if hi == lo {
            continue;
        }
        let mean = order[lo..hi].iter().map(|&k| y[k]).collect::<CompensatedSum>().value()
            / (hi - lo) as f64;
        total.add((hi - lo) as f64 / count as f64 * (mean - overall).powi(2));
    }
    total.value()
}

struct ReflectionSetup {
    coeffs: Vec<f64>,
    lambda: f64,
    cond_var_upper: Option<f64>,
    sup_bound: Option<f64>,
}

fn reflection_setup(
    n: usize,
    spec: Option<&DistributionSpec>,
    frame: &TightFrame,
    theta: &Vector,
    exact: Option<&PairMoments>,
) -> Result<ReflectionSetup> {
    if frame.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: frame.dim(),
        });
    }
    theta.ensure_unit(1e-9)?;
    let coeffs = frame_coeffs(frame, theta)?;
    let nf = n as f64;
    let cond_var_upper = match exact {
        Some(pm) => {
            let inputs = BoundInputs::new(frame, theta, pm.clone())?;
            let m = frame.len() as f64;
            Some(16.0 / (m * m) * inputs.weighted_pair_sum() - 16.0 / (nf * nf))
        }
        None => None,
    };
    // |W − W′| = 2|X₍ᵢ₎θ₍ᵢ₎| ≤ 2a max|θ₍ᵢ₎| when the coordinates are bounded
    let sup_bound = match (frame.label(), spec.and_then(DistributionSpec::sup_bound)) {
        (FrameLabel::StandardBasis, Some(a)) => {
            Some(2.0 * a * coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())))
        }
        _ => None,
    };
    Ok(ReflectionSetup {
        coeffs,
        lambda: 2.0 / nf,
        cond_var_upper,
        sup_bound,
    })
}

fn reflect_rows<R: Rng>(
    rows: &[f64],
    frame: &TightFrame,
    theta: &[f64],
    coeffs: &[f64],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let n = theta.len();
    let m = frame.len();
    rows.chunks_exact(n)
        .map(|row| {
            let i = rng.random_range(0..m);
            (dot(row, theta), 2.0 * dot(row, frame.vector(i)) * coeffs[i])
        })
        .unzip()
}

fn finish(setup: ReflectionSetup, w: &[f64], d: &[f64]) -> Result<PairDiagnostics> {
    let mut diag = analyze_pairs(w, d, setup.lambda)?;
    diag.cond_var_upper = setup.cond_var_upper;
    diag.sup_bound = setup.sup_bound;
    Ok(diag)
}

/// Reflection-pair diagnostics on a stored batch. The caller asserts that
/// the law of the batch is invariant under the frame's reflections.
pub fn reflection_pair_diagnostics(
    batch: &SampleBatch,
    frame: &TightFrame,
    theta: &Vector,
    seed: u64,
    exact: Option<&PairMoments>,
) -> Result<PairDiagnostics> {
    if batch.weights().is_some() {
        return Err(Error::WeightedInput);
    }
    let n = batch.dim();
    let setup = reflection_setup(n, batch.spec(), frame, theta, exact)?;
    let pair_seed = derive_seed(seed, "reflection");
    let parts: Vec<(Vec<f64>, Vec<f64>)> = batch
        .data()
        .par_chunks(BLOCK_ROWS * n)
        .enumerate()
        .map(|(k, rows)| {
            let mut rng = stream_rng(pair_seed, k as u64);
            reflect_rows(rows, frame, theta, &setup.coeffs, &mut rng)
        })
        .collect();
    let (w, d) = concat(parts);
    finish(setup, &w, &d)
}

/// Same as sampling `count` rows of `spec` with `seed` and calling
/// [`reflection_pair_diagnostics`] with that seed, without storing the rows.
pub fn reflection_pair_diagnostics_stream(
    spec: &DistributionSpec,
    frame: &TightFrame,
    theta: &Vector,
    count: usize,
    seed: u64,
    exact: Option<&PairMoments>,
) -> Result<PairDiagnostics> {
    if spec.kind.is_weighted() {
        return Err(Error::WeightedInput);
    }
    let setup = reflection_setup(spec.n, Some(spec), frame, theta, exact)?;
    let pair_seed = derive_seed(seed, "reflection");
    let parts = map_sample_blocks(spec, count, seed, |b| {
        let mut rng = stream_rng(pair_seed, b.range.index as u64);
        reflect_rows(b.rows, frame, theta, &setup.coeffs, &mut rng)
    })?;
    let (w, d) = concat(parts);
    finish(setup, &w, &d)
}

fn concat(parts: Vec<(Vec<f64>, Vec<f64>)>) -> (Vec<f64>, Vec<f64>) {
    let total = parts.iter().map(|p| p.0.len()).sum();
    let mut w = Vec::with_capacity(total);
    let mut d = Vec::with_capacity(total);
    for (a, b) in parts {
        w.extend_from_slice(&a);
        d.extend_from_slice(&b);
    }
    (w, d)
}

/// Ratios of rotation-pair moments to their small-`ε` limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationRatios {
    pub eps: f64,
    /// Slope of `W − W_ε` on `W` over `ε²/n`.
    pub r1: f64,
    pub r1_se: f64,
    /// `2(1 − √(1−ε²))/ε²`, the exact value of `r1` for spherically
    /// symmetric `X`.
    pub r1_limit: f64,
    /// `E(W − W_ε)²` over `(2ε²/n) E X₂²`.
    pub r2: f64,
    pub r2_se: f64,
    /// `E|W − W_ε|³ / ε³`.
    pub r3: f64,
    pub r3_se: f64,
}

/// `2(1 − √(1−ε²))/ε²`.
pub fn rotation_limit_slope(eps: f64) -> f64 {
    2.0 * (1.0 - (1.0 - eps * eps).sqrt()) / (eps * eps)
}

/// Per row: `W = X₁`, the symmetric part `s` and antisymmetric part `t` of
/// the displacement, and `X₂²`.
///
/// Only the first two rows `u₁, u₂` of the Haar matrix `U` enter
/// `⟨UᵀA_εU X, e₁⟩`; they are drawn as an orthonormalized Gaussian pair.
/// With `a = ⟨u₁,X⟩`, `b = ⟨u₂,X⟩`, `p = u₁[0]`, `q = u₂[0]`:
/// `W − W_ε = (1 − √(1−ε²)) s − ε t`, `s = ap + bq`, `t = bp − aq`.
fn rotate_rows<R: Rng>(rows: &[f64], n: usize, rng: &mut R) -> Vec<[f64; 4]> {
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    rows.chunks_exact(n)
        .map(|x| {
            for v in g1.iter_mut().chain(g2.iter_mut()) {
                *v = StandardNormal.sample(rng);
            }
            let n1 = dot(&g1, &g1).sqrt();
            let c12 = dot(&g1, &g2) / n1;
            let a = dot(&g1, x) / n1;
            let p = g1[0] / n1;
            // u₂ = (g₂ − c₁₂ u₁)/‖·‖, ‖·‖² = ‖g₂‖² − c₁₂²
            let n2 = (dot(&g2, &g2) - c12 * c12).sqrt();
            let b = (dot(&g2, x) - c12 * a) / n2;
            let q = (g2[0] - c12 * p) / n2;
            [x[0], a * p + b * q, b * p - a * q, x[1] * x[1]]
        })
        .collect()
}

fn rotation_ratios(n: usize, rows: &[[f64; 4]], eps_list: &[f64]) -> Result<Vec<RotationRatios>> {
    let w: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let s: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    // E[W − W_ε | W] = (1 − √(1−ε²)) E[s | W]: the ε t part has conditional
    // mean zero (flip the sign of u₂), so the slope is fitted on s alone.
    let fit = linear_fit(&w, &s).ok_or(Error::InsufficientData {
        needed: 3,
        got: rows.len(),
    })?;
    let x2: RunningStats = rows.iter().map(|r| r[3]).collect();
    let nf = n as f64;
    eps_list
        .iter()
        .map(|&eps| {
            let shrink = 1.0 - (1.0 - eps * eps).sqrt();
            let r1_scale = shrink * nf / (eps * eps);
            // average over the mirrored pair (t ↦ −t), which has the same law
            let second: RunningStats = rows
                .iter()
                .map(|r| shrink * shrink * r[1] * r[1] + eps * eps * r[2] * r[2])
                .collect();
            let third: RunningStats = rows
                .iter()
                .map(|r| {
                    let plus = (shrink * r[1] - eps * r[2]).abs().powi(3);
                    let minus = (shrink * r[1] + eps * r[2]).abs().powi(3);
                    0.5 * (plus + minus)
                })
                .collect();
            let r2_scale = 2.0 * eps * eps / nf * x2.mean();
            Ok(RotationRatios {
                eps,
                r1: fit.slope * r1_scale,
                r1_se: fit.slope_se * r1_scale,
                r1_limit: rotation_limit_slope(eps),
                r2: second.mean() / r2_scale,
                r2_se: second.std_error() / r2_scale,
                r3: third.mean() / eps.powi(3),
                r3_se: third.std_error() / eps.powi(3),
            })
        })
        .collect()
}

fn check_eps(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return domain("eps list is empty");
    }
    for &e in eps_list {
        if !(e > 0.0 && e < 0.5) {
            return domain(format!("eps must lie in (0, 1/2), got {e}"));
        }
    }
    Ok(())
}

fn check_spherical(spec: Option<&DistributionSpec>) -> Result<()> {
    match spec {
        Some(s) if !s.kind.is_spherically_symmetric() => Err(Error::Unsupported(format!(
            "rotation pairs need a spherically symmetric law, got {}",
            s.kind
        ))),
        _ => Ok(()),
    }
}

/// Rotation-pair ratios at `θ = e₁`, with a fresh Haar rotation per row and
/// the same rotations reused across `eps_list`.
pub fn rotation_pair_diagnostics(
    batch: &SampleBatch,
    eps_list: &[f64],
    seed: u64,
) -> Result<Vec<RotationRatios>> {
    check_eps(eps_list)?;
    check_spherical(batch.spec())?;
    let n = batch.dim();
    let pair_seed = derive_seed(seed, "rotation");
    let rows: Vec<[f64; 4]> = batch
        .data()
        .par_chunks(BLOCK_ROWS * n)
        .enumerate()
        .flat_map_iter(|(k, rows)| {
            let mut rng = stream_rng(pair_seed, k as u64);
            rotate_rows(rows, n, &mut rng)
        })
        .collect();
    rotation_ratios(n, &rows, eps_list)
}

/// Streaming form of [`rotation_pair_diagnostics`] on fresh draws of `spec`.
pub fn rotation_pair_diagnostics_stream(
    spec: &DistributionSpec,
    count: usize,
    eps_list: &[f64],
    seed: u64,
) -> Result<Vec<RotationRatios>> {
    check_eps(eps_list)?;
    check_spherical(Some(spec))?;
    let n = spec.n;
    let pair_seed = derive_seed(seed, "rotation");
    let rows: Vec<[f64; 4]> = map_sample_blocks(spec, count, seed, |b| {
        let mut rng = stream_rng(pair_seed, b.range.index as u64);
        rotate_rows(b.rows, n, &mut rng)
    })?
    .into_iter()
    .flatten()
    .collect();
    rotation_ratios(n, &rows, eps_list)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    Ok(())
}

/// `(1/λ)√V + (2π)^{−1/4} √(E|W−W′|³ / λ)` with `V = Var E[(W−W′)²|W]`.
pub fn stein_rr_bound(lambda: f64, cond_var: f64, third_abs: f64) -> Result<BoundValue> {
    check_lambda(lambda)?;
    if !(third_abs >= 0.0) {
        return domain(format!("E|W−W′|³ must be nonnegative, got {third_abs}"));
    }
    let (root, clamp) = clamped_sqrt(cond_var);
    let first = root / lambda;
    let second = STEIN_THIRD_CONSTANT * (third_abs / lambda).sqrt();
    let mut b = BoundValue::new("stein_rr", DistanceKind::Kolmogorov, first + second)
        .term("variance", first)
        .term("third_moment", second);
    if let Some(f) = clamp {
        b = b.flag(f);
    }
    Ok(b)
}

/// `(12/λ)√V + (43/λ) s³` for `|W − W′| ≤ s` almost surely.
pub fn stein_rr_bound_bounded(lambda: f64, cond_var: f64, sup: f64) -> Result<BoundValue> {
    check_lambda(lambda)?;
    if !(sup >= 0.0) {
        return domain(format!("sup |W−W′| must be nonnegative, got {sup}"));
    }
    let (root, clamp) = clamped_sqrt(cond_var);
    let first = 12.0 * root / lambda;
    let second = 43.0 / lambda * sup.powi(3);
    let mut b = BoundValue::new("stein_rr_bounded", DistanceKind::Kolmogorov, first + second)
        .term("variance", first)
        .term("sup", second);
    if let Some(f) = clamp {
        b = b.flag(f);
    }
    Ok(b)
}

/// The bound from diagnostics, preferring the exact conditional-variance
/// bound over the binned estimate when present.
pub fn stein_rr_assemble(diag: &PairDiagnostics) -> Result<BoundValue> {
    let v = diag.cond_var_upper.unwrap_or(diag.cond_var);
    stein_rr_bound(diag.lambda, v, diag.third_abs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bound_frame_bounded, bound_frame_general};
    use crate::frames::standard_frame;
    use crate::samplers::{sample, sample_sphere_shell, DistributionKind};
    use crate::Exponent;

    const CUBE_THIRD: f64 = 1.299_038_105_676_658;

    fn cube(n: usize) -> DistributionSpec {
        DistributionSpec::new(DistributionKind::LpBallUniform { p: Exponent::Infinity }, n).unwrap()
    }

    fn cube_moments() -> PairMoments {
        PairMoments::Exchangeable {
            diagonal: 1.8,
            off_diagonal: 1.0,
        }
    }

    #[test]
    fn constant() {
        let c = (2.0 * std::f64::consts::PI).powf(-0.25);
        assert!((STEIN_THIRD_CONSTANT - c).abs() < 1e-16);
    }

    #[test]
    fn zero_inputs_give_zero() {
        assert_eq!(stein_rr_bound(0.1, 0.0, 0.0).unwrap().value, 0.0);
        assert!(stein_rr_bound(0.0, 0.0, 0.0).is_err());
        let b = stein_rr_bound_bounded(0.5, 0.0, 0.3).unwrap();
        assert!((b.term_value("sup").unwrap() - 86.0 * 0.027).abs() < 1e-12);
    }

    #[test]
    fn exact_assembly_equals_frame_bound() {
        for (n, theta) in [
            (10, Vector::basis(10, 0).unwrap()),
            (100, Vector::diagonal(100).unwrap()),
            (30, Vector::random_unit(30, 5).unwrap()),
        ] {
            let frame = standard_frame(n).unwrap();
            let inputs = BoundInputs::new(&frame, &theta, cube_moments())
                .unwrap()
                .with_third_abs(CUBE_THIRD)
                .with_sup_bound(3f64.sqrt());
            let nf = n as f64;
            let m = frame.len() as f64;
            let v = 16.0 / (nf * nf) * inputs.radicand();
            let e3 = 8.0 / m * CUBE_THIRD * inputs.sum_abs_cubed();
            let stein = stein_rr_bound(2.0 / nf, v, e3).unwrap();
            let frame_bound = bound_frame_general(&inputs).unwrap();
            assert!((stein.value - frame_bound.value).abs() < 1e-9);
            let s = 2.0 * 3f64.sqrt() * inputs.max_abs_coeff();
            let bounded = stein_rr_bound_bounded(2.0 / nf, v, s).unwrap();
            assert!((bounded.value - bound_frame_bounded(&inputs).unwrap().value).abs() < 1e-9);
        }
        let e1 = bound_frame_general(
            &BoundInputs::new(&standard_frame(10).unwrap(), &Vector::basis(10, 0).unwrap(), cube_moments())
                .unwrap()
                .with_third_abs(CUBE_THIRD),
        )
        .unwrap();
        assert!((e1.value - 3.229).abs() < 1e-3);
    }

    #[test]
    fn cube_reflection_slope() {
        let n = 10;
        let theta = Vector::random_unit(n, 2).unwrap();
        let diag = reflection_pair_diagnostics_stream(
            &cube(n),
            &standard_frame(n).unwrap(),
            &theta,
            200_000,
            3,
            Some(&cube_moments()),
        )
        .unwrap();
        assert!((diag.slope - 0.2).abs() < 3.0 * diag.slope_se, "{diag:?}");
        assert!(diag.intercept.abs() < 3.0 * diag.intercept_se);
        // for the cube every coordinate has the same E|X|³, so (E:3rd) is exact
        let expected: f64 = 8.0 / n as f64
            * CUBE_THIRD
            * theta.iter().map(|t| t.abs().powi(3)).sum::<f64>();
        assert!((diag.third_abs - expected).abs() < 3.0 * diag.third_abs_se);
        assert!(diag.sup_observed <= diag.sup_bound.unwrap());
        let upper = diag.cond_var_upper.unwrap();
        assert!(upper >= 0.0);
        let assembled = stein_rr_assemble(&diag).unwrap();
        assert!(assembled.value > 0.0);
    }

    #[test]
    fn stream_equals_stored_batch() {
        let spec = cube(6);
        let theta = Vector::diagonal(6).unwrap();
        let frame = standard_frame(6).unwrap();
        let batch = sample(&spec, 9_000, 4).unwrap();
        let a = reflection_pair_diagnostics(&batch, &frame, &theta, 4, None).unwrap();
        let b = reflection_pair_diagnostics_stream(&spec, &frame, &theta, 9_000, 4, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rotation_ratios_on_sphere() {
        let n = 20;
        let eps = [0.2, 0.1, 0.05];
        let spec = DistributionSpec::new(DistributionKind::SphereShell, n).unwrap();
        let r = rotation_pair_diagnostics_stream(&spec, 200_000, &eps, 9).unwrap();
        for x in &r {
            assert!((x.r1 - x.r1_limit).abs() < 4.0 * x.r1_se, "{x:?}");
            assert!((x.r2 - 1.0).abs() < 0.1_f64.max(3.0 * x.r2_se), "{x:?}");
        }
        assert!((0.5..=2.0).contains(&(r[1].r3 / r[2].r3)));
        let batch = sample_sphere_shell(n, 20_000, 9).unwrap();
        let stored = rotation_pair_diagnostics(&batch, &eps, 9).unwrap();
        let streamed = rotation_pair_diagnostics_stream(&spec, 20_000, &eps, 9).unwrap();
        assert_eq!(stored, streamed);
    }

    #[test]
    fn rotation_errors() {
        let batch = sample_sphere_shell(5, 100, 1).unwrap();
        assert!(rotation_pair_diagnostics(&batch, &[0.5], 1).is_err());
        assert!(rotation_pair_diagnostics(&batch, &[], 1).is_err());
        let cube_batch = sample(&cube(5), 100, 1).unwrap();
        assert!(rotation_pair_diagnostics(&cube_batch, &[0.1], 1).is_err());
    }
}
