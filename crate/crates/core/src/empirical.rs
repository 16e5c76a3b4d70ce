//! Distances between sampled projections and the standard normal.
//!
//! The Kolmogorov estimate is the exact supremum of `|F_N − Φ|` over the
//! order statistics, reported with the DKW slack `√(ln(2/δ)/(2N))` so that
//! `estimate − slack` is a lower confidence bound on the true distance.
//! The histogram TV estimate has no such guarantee and is labelled as a
//! lower-bound-flavoured estimate.

use std::io::Write;

use rayon::slice::ParallelSliceMut;
use serde::{Deserialize, Serialize};

use crate::batch::{dot, SampleBatch, Vector};
use crate::bounds::DistanceKind;
use crate::error::{domain, Error, Result};
use crate::normal::{normal_cdf, normal_mass, normal_sf};
use crate::samplers::{map_sample_blocks, DistributionSpec};
use crate::stats::CompensatedSum;

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const MIN_KOLMOGOROV_SAMPLES: usize = 100;
pub const MIN_HISTOGRAM_SAMPLES: usize = 10_000;
pub const MIN_CONDITIONAL_SAMPLES: usize = 100_000;
/// Histogram bins cover `[−HISTOGRAM_RANGE, HISTOGRAM_RANGE]` plus two tails.
pub const HISTOGRAM_RANGE: f64 = 6.0;

pub const QUALIFIER_WEIGHTED: &str = "weighted ECDF; DKW slack inapplicable";
pub const QUALIFIER_HISTOGRAM: &str = "histogram lower bound";

/// Draws of `W = ⟨X, θ⟩`, with the importance weights of the batch if any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSample {
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub theta: Vector,
    pub source: Option<DistributionSpec>,
}

impl ProjectionSample {
    pub fn new(values: Vec<f64>, theta: Vector) -> Self {
        ProjectionSample {
            values,
            weights: None,
            theta,
            source: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Weights rescaled to sum to one (uniform when unweighted).
    pub fn normalized_weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => {
                let total = w.iter().copied().collect::<CompensatedSum>().value();
                w.iter().map(|x| x / total).collect()
            }
            None => vec![1.0 / self.len() as f64; self.len()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub kind: DistanceKind,
    pub point_estimate: f64,
    /// DKW half-width at confidence `1 − δ`; absent when it does not apply.
    pub dkw_slack: Option<f64>,
    pub samples: usize,
    pub delta: f64,
    pub qualifier: Option<String>,
}

impl DistanceEstimate {
    /// `point_estimate − dkw_slack`, the value compared against a bound.
    pub fn lower_confidence(&self) -> f64 {
        self.point_estimate - self.dkw_slack.unwrap_or(0.0)
    }
}

/// `√(ln(2/δ)/(2N))`.
pub fn dkw_slack(samples: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * samples as f64)).sqrt()
}

fn check_theta(theta: &Vector, n: usize) -> Result<()> {
    if theta.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta.dim(),
        });
    }
    theta.ensure_unit(1e-9)
}

pub fn project(batch: &SampleBatch, theta: &Vector) -> Result<ProjectionSample> {
    check_theta(theta, batch.dim())?;
    let values = batch.rows().map(|row| dot(row, theta)).collect();
    Ok(ProjectionSample {
        values,
        weights: batch.weights().map(<[f64]>::to_vec),
        theta: theta.clone(),
        source: batch.spec().copied(),
    })
}

/// Project `count` fresh draws of `spec` onto every `theta` in one streaming
/// pass; equal to sampling with the same seed and projecting, without
/// holding the full batch.
pub fn project_stream(
    spec: &DistributionSpec,
    thetas: &[Vector],
    count: usize,
    seed: u64,
) -> Result<Vec<ProjectionSample>> {
    if count == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    for theta in thetas {
        check_theta(theta, spec.n)?;
    }
    let parts = map_sample_blocks(spec, count, seed, |b| {
        let values: Vec<Vec<f64>> = thetas
            .iter()
            .map(|t| b.rows.chunks_exact(b.n).map(|r| dot(r, t)).collect())
            .collect();
        (values, b.weights.map(<[f64]>::to_vec))
    })?;
    let weighted = spec.kind.is_weighted();
    let mut out: Vec<ProjectionSample> = thetas
        .iter()
        .map(|t| ProjectionSample {
            values: Vec::with_capacity(count),
            weights: weighted.then(|| Vec::with_capacity(count)),
            theta: t.clone(),
            source: Some(*spec),
        })
        .collect();
    for (values, weights) in parts {
        for (ps, v) in out.iter_mut().zip(values) {
            ps.values.extend_from_slice(&v);
            if let (Some(dst), Some(w)) = (ps.weights.as_mut(), weights.as_ref()) {
                dst.extend_from_slice(w);
            }
        }
    }
    Ok(out)
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return domain("projection values must be finite");
    }
    let mut s = values.to_vec();
    s.par_sort_unstable_by(f64::total_cmp);
    Ok(s)
}

/// `sup_t |F_N(t) − Φ(t)|` for an unweighted sample, with DKW slack at `delta`.
pub fn kolmogorov_vs_normal(ps: &ProjectionSample, delta: f64) -> Result<DistanceEstimate> {
    if ps.is_weighted() {
        return Err(Error::WeightedInput);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    let count = ps.len();
    if count < MIN_KOLMOGOROV_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_KOLMOGOROV_SAMPLES,
            got: count,
        });
    }
    Ok(DistanceEstimate {
        kind: DistanceKind::Kolmogorov,
        point_estimate: kolmogorov_statistic(&ps.values)?,
        dkw_slack: Some(dkw_slack(count, delta)),
        samples: count,
        delta,
        qualifier: None,
    })
}

/// The exact supremum `max_i max(i/N − Φ(x₍ᵢ₎), Φ(x₍ᵢ₎) − (i−1)/N)`.
pub fn kolmogorov_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let s = sorted(values)?;
    let nf = s.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let phi = normal_cdf(x);
        sup = sup.max((i + 1) as f64 / nf - phi).max(phi - i as f64 / nf);
    }
    Ok(sup)
}

/// Kolmogorov distance of the self-normalized weighted ECDF. No DKW slack is
/// attached: the effective sample size of a weighted sample is not `N`.
pub fn weighted_kolmogorov_vs_normal(ps: &ProjectionSample, delta: f64) -> Result<DistanceEstimate> {
    let count = ps.len();
    if count < MIN_KOLMOGOROV_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_KOLMOGOROV_SAMPLES,
            got: count,
        });
    }
    let mut sup = 0.0f64;
    for (t, before, after) in weighted_steps(ps)? {
        let phi = normal_cdf(t);
        sup = sup.max(after - phi).max(phi - before);
    }
    Ok(DistanceEstimate {
        kind: DistanceKind::Kolmogorov,
        point_estimate: sup,
        dkw_slack: None,
        samples: count,
        delta,
        qualifier: Some(QUALIFIER_WEIGHTED.into()),
    })
}

/// Distinct sample points with the ECDF value just before and at each.
fn weighted_steps(ps: &ProjectionSample) -> Result<Vec<(f64, f64, f64)>> {
    let w = ps.normalized_weights();
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return domain("weights must be finite and nonnegative");
    }
    let mut pairs: Vec<(f64, f64)> = ps.values.iter().copied().zip(w).collect();
    if pairs.iter().any(|(v, _)| !v.is_finite()) {
        return domain("projection values must be finite");
    }
    pairs.par_sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut steps: Vec<(f64, f64, f64)> = Vec::new();
    let mut cum = CompensatedSum::new();
    for (v, w) in pairs {
        let before = cum.value();
        cum.add(w);
        match steps.last_mut() {
            Some(last) if last.0 == v => last.2 = cum.value(),
            _ => steps.push((v, before, cum.value())),
        }
    }
    Ok(steps)
}

/// `⌈N^{1/3}⌉`.
pub fn default_bins(samples: usize) -> usize {
    ((samples as f64).cbrt().ceil() as usize).max(1)
}

/// `Σ_bins |empirical mass − Φ mass|` over `bins` equal cells on `[−6, 6]`
/// and the two tails. Binning can only merge mass, so this is biased low
/// relative to the `L¹` distance of densities.
pub fn tv_vs_normal_histogram(ps: &ProjectionSample, bins: Option<usize>) -> Result<DistanceEstimate> {
    let count = ps.len();
    if count < MIN_HISTOGRAM_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_HISTOGRAM_SAMPLES,
            got: count,
        });
    }
    let bins = bins.unwrap_or_else(|| default_bins(count));
    if bins == 0 {
        return domain("histogram needs at least one bin");
    }
    let width = 2.0 * HISTOGRAM_RANGE / bins as f64;
    // cell 0 is the lower tail, cell bins + 1 the upper tail
    let mut mass = vec![CompensatedSum::new(); bins + 2];
    let weights = ps.normalized_weights();
    for (&x, &w) in ps.values.iter().zip(&weights) {
        if !x.is_finite() {
            return domain("projection values must be finite");
        }
        let cell = if x < -HISTOGRAM_RANGE {
            0
        } else if x > HISTOGRAM_RANGE {
            bins + 1
        } else {
            (((x + HISTOGRAM_RANGE) / width) as usize).min(bins - 1) + 1
        };
        mass[cell].add(w);
    }
    let mut total = CompensatedSum::new();
    for (cell, m) in mass.iter().enumerate() {
        let expected = if cell == 0 {
            normal_cdf(-HISTOGRAM_RANGE)
        } else if cell == bins + 1 {
            normal_sf(HISTOGRAM_RANGE)
        } else {
            let lo = -HISTOGRAM_RANGE + (cell - 1) as f64 * width;
            let hi = if cell == bins { HISTOGRAM_RANGE } else { lo + width };
            normal_mass(lo, hi)
        };
        total.add((m.value() - expected).abs());
    }
    Ok(DistanceEstimate {
        kind: DistanceKind::TotalVariation,
        point_estimate: total.value().min(2.0),
        dkw_slack: None,
        samples: count,
        delta: 0.0,
        qualifier: Some(QUALIFIER_HISTOGRAM.into()),
    })
}

/// Write the ECDF at each distinct sample point as CSV `t,F_N,Phi`.
pub fn write_ecdf_csv<W: Write>(ps: &ProjectionSample, mut w: W) -> Result<()> {
    writeln!(w, "t,F_N,Phi")?;
    for (t, _, after) in weighted_steps(ps)? {
        writeln!(w, "{t},{after},{}", normal_cdf(t))?;
    }
    Ok(())
}

/// Estimate of `E|1 − E[X₂² | X₁]|` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub value: f64,
    pub std_error: f64,
    pub bins: usize,
    pub samples: usize,
}

/// `E|1 − E[X₂² | X₁]|` for a spherically symmetric batch, through
/// `E[X₂² | X₁] = E[(‖X‖² − X₁²)/(n−1) | X₁]`.
pub fn conditional_second_moment(batch: &SampleBatch) -> Result<ConditionalEstimate> {
    match batch.spec() {
        Some(spec) if spec.kind.is_spherically_symmetric() => {}
        Some(spec) => {
            return domain(format!(
                "{} is not spherically symmetric; E[X₂²|X₁] cannot be read off ‖X‖²",
                spec.kind
            ))
        }
        None => {
            return Err(Error::MissingInput(
                "batch carries no distribution spec to confirm spherical symmetry".into(),
            ))
        }
    }
    let (x1, v) = conditional_pairs(batch.data(), batch.dim());
    conditional_from_pairs(&x1, &v)
}

/// `(X₁, (‖X‖² − X₁²)/(n−1))` for each row of a row-major block.
pub fn conditional_pairs(rows: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let scale = 1.0 / (n as f64 - 1.0);
    rows.chunks_exact(n)
        .map(|r| {
            let rest: f64 = r[1..].iter().map(|x| x * x).sum();
            (r[0], rest * scale)
        })
        .unzip()
}

/// Equal-count binning of `v` by `x1` into `⌈N^{1/3}⌉` bins; the estimate is
/// `Σ_b (c_b/N) |1 − mean_b(v)|`. No symmetry check is made here.
pub fn conditional_from_pairs(x1: &[f64], v: &[f64]) -> Result<ConditionalEstimate> {
    let count = x1.len();
    if v.len() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            got: v.len(),
        });
    }
    if count < MIN_CONDITIONAL_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_CONDITIONAL_SAMPLES,
            got: count,
        });
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.par_sort_unstable_by(|&a, &b| x1[a].total_cmp(&x1[b]));
    let bins = default_bins(count);
    let nf = count as f64;
    let mut value = CompensatedSum::new();
    let mut var = 0.0;
    for b in 0..bins {
        let lo = b * count / bins;
        let hi = (b + 1) * count / bins;
        let c = hi - lo;
        if c == 0 {
            continue;
        }
        let stats: crate::stats::RunningStats = order[lo..hi].iter().map(|&k| v[k]).collect();
        let share = c as f64 / nf;
        value.add(share * (1.0 - stats.mean()).abs());
        var += share * share * stats.variance() / c as f64;
    }
    Ok(ConditionalEstimate {
        value: value.value(),
        std_error: var.sqrt(),
        bins,
        samples: count,
    })
}
