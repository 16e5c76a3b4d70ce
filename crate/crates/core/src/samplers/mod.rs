//! Seeded samplers for the symmetric isotropic laws.
//!
//! Every law is drawn as `scale · Z` for a fixed base vector `Z`; the
//! [`DistributionSpec::scale`] puts it in isotropic position. Scales are exact
//! where a closed form is cheap and Monte Carlo calibrated otherwise (the ℓp
//! families with finite `p`).
//!
//! Rows are produced in fixed blocks of [`BLOCK_ROWS`](crate::rng::BLOCK_ROWS),
//! block `k` drawing from its own substream, so output is bit-identical for
//! any thread count.

mod calibrate;
mod draw;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::error::{domain, Error, Result};
use crate::norms::Exponent;
use crate::rng::{derive_seed, map_blocks, stream_rng, BlockRange};

pub use calibrate::{
    calibrate_isotropic, calibration_estimate, CalibrationEstimate, DEFAULT_CALIBRATION_SAMPLES,
};
pub use draw::{sample_generalized_gaussian, simplex_barycentric, RowSampler};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistributionKind {
    /// Uniform on the ℓp unit ball (`p = ∞` is the cube).
    LpBallUniform { p: Exponent },
    /// Cone measure on the ℓp unit sphere.
    LpConeMeasure { p: Exponent },
    /// Surface measure on the ℓp unit sphere, drawn as weighted cone samples.
    LpSurfaceMeasure { p: Exponent },
    /// Uniform on the regular simplex.
    SimplexUniform,
    /// Uniform on the Euclidean sphere.
    SphereShell,
    /// Uniform on the Euclidean ball.
    BallUniform,
    /// Density `∝ exp(−b‖x‖₂)`.
    SphericalExponential,
    /// Density `∝ exp(−b‖x‖_∞)`.
    LinfExponential,
}

impl DistributionKind {
    pub fn exponent(&self) -> Option<Exponent> {
        match *self {
            DistributionKind::LpBallUniform { p }
            | DistributionKind::LpConeMeasure { p }
            | DistributionKind::LpSurfaceMeasure { p } => Some(p),
            _ => None,
        }
    }

    /// Invariant under sign changes of single coordinates.
    pub fn is_unconditional(&self) -> bool {
        !matches!(self, DistributionKind::SimplexUniform)
    }

    pub fn is_spherically_symmetric(&self) -> bool {
        match self {
            DistributionKind::SphereShell
            | DistributionKind::BallUniform
            | DistributionKind::SphericalExponential => true,
            other => other.exponent() == Some(Exponent::Finite(2.0)),
        }
    }

    pub fn is_weighted(&self) -> bool {
        matches!(self, DistributionKind::LpSurfaceMeasure { p: Exponent::Finite(p) } if *p > 1.0)
    }

    /// Whether the isotropic scale comes from Monte Carlo calibration.
    pub fn needs_calibration(&self) -> bool {
        matches!(self.exponent(), Some(Exponent::Finite(_)))
    }

    /// Almost-sure bound on `max |Xᵢ|` for the unit-scale base vector, if any.
    fn base_sup(&self) -> Option<f64> {
        match self {
            DistributionKind::LpBallUniform { .. }
            | DistributionKind::LpConeMeasure { .. }
            | DistributionKind::LpSurfaceMeasure { .. }
            | DistributionKind::SphereShell
            | DistributionKind::BallUniform => Some(1.0),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if let DistributionKind::LpSurfaceMeasure { p } | DistributionKind::LpBallUniform { p } | DistributionKind::LpConeMeasure { p } = self {
            if p.value() < 1.0 {
                return domain(format!("lp exponent must be >= 1, got {p}"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionKind::LpBallUniform { p: Exponent::Infinity } => write!(f, "cube"),
            DistributionKind::LpBallUniform { p } => write!(f, "lp_ball(p={p})"),
            DistributionKind::LpConeMeasure { p } => write!(f, "lp_cone(p={p})"),
            DistributionKind::LpSurfaceMeasure { p } => write!(f, "lp_surface(p={p})"),
            DistributionKind::SimplexUniform => write!(f, "simplex"),
            DistributionKind::SphereShell => write!(f, "sphere"),
            DistributionKind::BallUniform => write!(f, "ball"),
            DistributionKind::SphericalExponential => write!(f, "spherical_exponential"),
            DistributionKind::LinfExponential => write!(f, "linf_exponential"),
        }
    }
}

/// Which law to sample, in which dimension, at which scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub n: usize,
    pub scale: f64,
}

impl DistributionSpec {
    /// Spec at the exact isotropic scale when one is known in closed form,
    /// otherwise at scale 1 (awaiting [`calibrate_isotropic`]).
    pub fn new(kind: DistributionKind, n: usize) -> Result<Self> {
        let spec = DistributionSpec {
            kind,
            n,
            scale: exact_scale(kind, n).unwrap_or(1.0),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Exactly scaled spec, or a calibrated one with the default sample size.
    pub fn isotropic(kind: DistributionKind, n: usize, seed: u64) -> Result<Self> {
        let spec = DistributionSpec::new(kind, n)?;
        calibrate_isotropic(&spec, DEFAULT_CALIBRATION_SAMPLES, derive_seed(seed, "calibration"))
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        let spec = DistributionSpec { scale, ..self };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return domain(format!("dimension must be >= 2, got {}", self.n));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return domain(format!("scale must be positive, got {}", self.scale));
        }
        self.kind.validate()
    }

    /// Almost-sure bound on `max |Xᵢ|`, for the bounded-variable bounds.
    pub fn sup_bound(&self) -> Option<f64> {
        self.kind.base_sup().map(|s| s * self.scale)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} n={} scale={}", self.kind, self.n, self.scale)
    }
}

/// Closed-form isotropic scale, where one is cheap to state.
pub fn exact_scale(kind: DistributionKind, n: usize) -> Option<f64> {
    let nf = n as f64;
    match kind {
        DistributionKind::SphereShell => Some(nf.sqrt()),
        DistributionKind::BallUniform => Some((nf + 2.0).sqrt()),
        DistributionKind::SimplexUniform => Some(1.0),
        DistributionKind::SphericalExponential => Some(1.0 / (nf + 1.0).sqrt()),
        DistributionKind::LinfExponential => Some((3.0 / ((nf + 1.0) * (nf + 2.0))).sqrt()),
        DistributionKind::LpBallUniform { p: Exponent::Infinity } => Some(3f64.sqrt()),
        // one coordinate sits on a facet (E = 1), the others are uniform (E = 1/3)
        DistributionKind::LpConeMeasure { p: Exponent::Infinity }
        | DistributionKind::LpSurfaceMeasure { p: Exponent::Infinity } => {
            Some((3.0 * nf / (nf + 2.0)).sqrt())
        }
        _ => None,
    }
}

/// One generated block: `rows` is row-major with `range.len` rows.
pub struct Block<'a> {
    pub range: BlockRange,
    pub n: usize,
    pub rows: &'a [f64],
    pub weights: Option<&'a [f64]>,
}

impl Block<'_> {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }
}

/// Generate `total` rows of `spec` block by block and hand each block to
/// `f`, without materializing the whole sample. Results come back in block
/// order.
pub fn map_sample_blocks<T, F>(spec: &DistributionSpec, total: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Block<'_>) -> T + Sync + Send,
{
    spec.validate()?;
    let sampler = RowSampler::new(spec)?;
    let n = spec.n;
    let weighted = spec.kind.is_weighted();
    Ok(map_blocks(total, |range| {
        let mut rng = stream_rng(seed, range.index as u64);
        let mut rows = vec![0.0; range.len * n];
        let mut weights = if weighted { vec![0.0; range.len] } else { Vec::new() };
        for (i, row) in rows.chunks_exact_mut(n).enumerate() {
            let w = sampler.draw(&mut rng, row);
            if weighted {
                weights[i] = w;
            }
        }
        f(Block {
            range,
            n,
            rows: &rows,
            weights: weighted.then_some(&weights[..]),
        })
    }))
}

/// `count` rows of `spec`, reproducible from `seed`.
pub fn sample(spec: &DistributionSpec, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let parts = map_sample_blocks(spec, count, seed, |b| {
        (b.rows.to_vec(), b.weights.map(<[f64]>::to_vec))
    })?;
    let mut data = Vec::with_capacity(count * spec.n);
    let mut weights = Vec::new();
    for (rows, w) in parts {
        data.extend_from_slice(&rows);
        if let Some(w) = w {
            weights.extend_from_slice(&w);
        }
    }
    let batch = SampleBatch::from_rows(data, spec.n, seed)?.with_spec(*spec);
    if spec.kind.is_weighted() {
        batch.with_weights(weights)
    } else {
        Ok(batch)
    }
}

pub fn sample_sphere_shell(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(&DistributionSpec::new(DistributionKind::SphereShell, n)?, count, seed)
}

pub fn sample_ball_uniform(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(&DistributionSpec::new(DistributionKind::BallUniform, n)?, count, seed)
}

pub fn sample_simplex(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(&DistributionSpec::new(DistributionKind::SimplexUniform, n)?, count, seed)
}

pub fn sample_spherical_exponential(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    let spec = DistributionSpec::new(DistributionKind::SphericalExponential, n)?;
    sample(&spec, count, seed)
}

pub fn sample_linf_exponential(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(&DistributionSpec::new(DistributionKind::LinfExponential, n)?, count, seed)
}

/// Isotropic uniform ℓp ball; `p = ∞` is the cube `[−√3, √3]ⁿ`.
pub fn sample_lp_ball(p: Exponent, n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    let spec = DistributionSpec::isotropic(DistributionKind::LpBallUniform { p }, n, seed)?;
    sample(&spec, count, seed)
}

/// Isotropic cone measure on the ℓp sphere.
pub fn sample_lp_cone(p: Exponent, n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    let spec = DistributionSpec::isotropic(DistributionKind::LpConeMeasure { p }, n, seed)?;
    sample(&spec, count, seed)
}

/// Surface measure on the ℓp sphere at the cone-isotropic scale, as cone
/// samples carrying importance weights (unit weights for `p ∈ {1, ∞}`).
pub fn sample_lp_surface(p: Exponent, n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    let spec = DistributionSpec::isotropic(DistributionKind::LpSurfaceMeasure { p }, n, seed)?;
    let batch = sample(&spec, count, seed)?;
    if batch.weights().is_none() {
        let len = batch.len();
        return batch.with_weights(vec![1.0; len]);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::summarize;

    #[test]
    fn spec_serde_round_trip() {
        let spec = DistributionSpec::new(
            DistributionKind::LpConeMeasure {
                p: Exponent::Infinity,
            },
            5,
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"type\":\"lp_cone_measure\""));
        assert!(json.contains("\"p\":\"inf\""));
        let back: DistributionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn exact_scales() {
        let sphere = DistributionSpec::new(DistributionKind::SphereShell, 10).unwrap();
        assert_eq!(sphere.scale, 10f64.sqrt());
        let ball = DistributionSpec::new(DistributionKind::BallUniform, 10).unwrap();
        assert_eq!(ball.scale, 12f64.sqrt());
        assert!(DistributionSpec::new(DistributionKind::SphereShell, 1).is_err());
    }

    #[test]
    fn zero_rows_rejected() {
        assert!(matches!(
            sample_sphere_shell(3, 0, 1),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_across_block_boundaries() {
        let a = sample_sphere_shell(4, 10_000, 42).unwrap();
        let b = sample_sphere_shell(4, 10_000, 42).unwrap();
        assert_eq!(a.data(), b.data());
        // a prefix sample agrees with the longer one block by block
        let c = sample_sphere_shell(4, 5_000, 42).unwrap();
        assert_eq!(&a.data()[..4 * 4096], &c.data()[..4 * 4096]);
    }

    #[test]
    fn sphere_rows_have_norm_root_n() {
        let batch = sample_sphere_shell(7, 2000, 3).unwrap();
        for row in batch.rows() {
            let r2: f64 = row.iter().map(|x| x * x).sum();
            assert!((r2 / 7.0 - 1.0).abs() < 1e-12);
        }
        assert!(summarize(&batch).unwrap().norm2_var() < 1e-20);
    }

    #[test]
    fn ball_rows_stay_inside() {
        let batch = sample_ball_uniform(5, 5000, 3).unwrap();
        let r = 7f64.sqrt();
        assert!(batch
            .rows()
            .all(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt() <= r * (1.0 + 1e-12)));
    }
}
