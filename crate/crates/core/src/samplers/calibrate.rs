use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::RunningStats;

use super::{map_sample_blocks, DistributionKind, DistributionSpec};

pub const DEFAULT_CALIBRATION_SAMPLES: usize = 1_000_000;

/// Outcome of a Monte Carlo isotropy calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEstimate {
    /// Calibrated scale.
    pub scale: f64,
    /// Mean per-coordinate second moment at the input scale.
    pub second_moment: f64,
    /// Standard error of `second_moment`.
    pub std_error: f64,
    /// Relative standard error of `scale` (delta method: half that of the
    /// second moment).
    pub scale_rel_error: f64,
}

type CacheKey = (String, usize, u64, usize, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, CalibrationEstimate>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, CalibrationEstimate>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Estimate the scale that makes `spec` isotropic from `samples` draws.
///
/// Surface-measure specs calibrate on their unweighted cone rows, so the
/// scale is the one that makes the cone measure isotropic. Results are
/// memoized per `(kind, n, scale, samples, seed)`.
pub fn calibration_estimate(
    spec: &DistributionSpec,
    samples: usize,
    seed: u64,
) -> Result<CalibrationEstimate> {
    spec.validate()?;
    if samples < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: samples,
        });
    }
    let mut cone = *spec;
    if let DistributionKind::LpSurfaceMeasure { p } = spec.kind {
        cone.kind = DistributionKind::LpConeMeasure { p };
    }
    let key = (
        cone.kind.to_string(),
        cone.n,
        cone.scale.to_bits(),
        samples,
        seed,
    );
    if let Some(hit) = cache().lock().expect("calibration cache").get(&key) {
        return Ok(*hit);
    }

    let nf = cone.n as f64;
    let parts = map_sample_blocks(&cone, samples, seed, |block| {
        let mut acc = RunningStats::new();
        for i in 0..block.range.len {
            acc.push(block.row(i).iter().map(|x| x * x).sum::<f64>() / nf);
        }
        acc
    })?;
    let mut stats = RunningStats::new();
    for part in &parts {
        stats.merge(part);
    }
    let m = stats.mean();
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Calibration(format!(
            "degenerate second moment {m} for {cone}"
        )));
    }
    let estimate = CalibrationEstimate {
        scale: spec.scale / m.sqrt(),
        second_moment: m,
        std_error: stats.std_error(),
        scale_rel_error: 0.5 * stats.std_error() / m,
    };
    cache()
        .lock()
        .expect("calibration cache")
        .insert(key, estimate);
    Ok(estimate)
}

/// Rescale `spec` to isotropic position. Kinds whose isotropic scale is
/// known exactly are returned unchanged.
pub fn calibrate_isotropic(
    spec: &DistributionSpec,
    samples: usize,
    seed: u64,
) -> Result<DistributionSpec> {
    if !spec.kind.needs_calibration() {
        spec.validate()?;
        return Ok(*spec);
    }
    let estimate = calibration_estimate(spec, samples, seed)?;
    spec.with_scale(estimate.scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::Exponent;

    #[test]
    fn exact_kinds_are_untouched() {
        let spec = DistributionSpec::new(DistributionKind::SphereShell, 9).unwrap();
        assert_eq!(calibrate_isotropic(&spec, 100, 1).unwrap(), spec);
    }

    #[test]
    fn euclidean_ball_calibrates_to_its_exact_scale() {
        let n = 8;
        let spec = DistributionSpec::new(
            DistributionKind::LpBallUniform {
                p: Exponent::Finite(2.0),
            },
            n,
        )
        .unwrap();
        let est = calibration_estimate(&spec, 200_000, 7).unwrap();
        let target = ((n + 2) as f64).sqrt();
        assert!(
            (est.scale / target - 1.0).abs() < 3.0 * est.scale_rel_error,
            "{} vs {target} (rel s.e. {})",
            est.scale,
            est.scale_rel_error
        );
    }

    #[test]
    fn surface_uses_the_cone_scale() {
        let p = Exponent::Finite(4.0);
        let cone = DistributionSpec::new(DistributionKind::LpConeMeasure { p }, 6).unwrap();
        let surface = DistributionSpec::new(DistributionKind::LpSurfaceMeasure { p }, 6).unwrap();
        let a = calibrate_isotropic(&cone, 50_000, 3).unwrap();
        let b = calibrate_isotropic(&surface, 50_000, 3).unwrap();
        assert_eq!(a.scale, b.scale);
    }

    #[test]
    fn seeds_agree_within_error() {
        let spec = DistributionSpec::new(
            DistributionKind::LpConeMeasure {
                p: Exponent::Finite(1.0),
            },
            12,
        )
        .unwrap();
        let a = calibration_estimate(&spec, 100_000, 1).unwrap();
        let b = calibration_estimate(&spec, 100_000, 2).unwrap();
        let se = (a.scale_rel_error.powi(2) + b.scale_rel_error.powi(2)).sqrt();
        assert!((a.scale / b.scale - 1.0).abs() <= 3.0 * se);
    }
}
