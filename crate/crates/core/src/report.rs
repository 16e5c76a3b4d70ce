//! Certification: evaluate every applicable bound for a distribution and a
//! set of directions, measure the matching empirical distance, and decide
//! whether the data contradict the bound.
//!
//! A Kolmogorov bound passes when `estimate − DKW slack ≤ bound`; a
//! total-variation bound passes when the histogram estimate is at most the
//! bound plus [`TV_ALLOWANCE`]. Bounds with an unknown constant are
//! evaluated and reported but never decide a verdict.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::batch::{dot, Vector};
use crate::bounds::{
    ball_norm2_variance, bound_euclidean, bound_lp, bound_poincare, bound_simplex,
    bound_frame_general, bound_simplex_assembled, bound_sncp_bounded, bound_sncp_moments, bound_sph_symm,
    bound_unconditional, bound_unconditional_bounded, exact_coordinate_moments,
    exact_tv_vs_normal, spherical_exponential_norm2_variance, BoundValue, Constants,
    BoundInputs, DistanceKind, EuclideanBody, MarginalKind, PairMoments, SphSymmVariant,
};
use crate::empirical::{
    kolmogorov_vs_normal, tv_vs_normal_histogram, weighted_kolmogorov_vs_normal,
    DistanceEstimate, ProjectionSample, DEFAULT_DELTA,
};
use crate::error::{domain, Error, Result};
use crate::frames::{simplex_geometry, standard_frame};
use crate::moments::{MomentSummary, PairCoverage};
use crate::rng::derive_seed;
use crate::samplers::{exact_scale, map_sample_blocks, DistributionKind, DistributionSpec};

/// Slack granted to histogram TV estimates against a TV bound.
pub const TV_ALLOWANCE: f64 = 0.02;
/// Above this dimension the square-covariance scan uses a coordinate subset.
pub const FULL_PAIR_SCAN_MAX_DIM: usize = 500;
/// Lower bound on the spectral gap of the isotropic spherically symmetric
/// exponential law.
pub const SPHERICAL_EXPONENTIAL_GAP: f64 = 1.0 / 13.0;

/// A named or explicit direction.
#[derive(Clone, Debug, PartialEq)]
pub enum ThetaSpec {
    /// First basis vector (also used for the simplex).
    E1,
    /// `n^{−1/2} (1, …, 1)`.
    Diagonal,
    /// Uniform on the sphere, from a seed.
    Random(u64),
    /// Normalized on resolution.
    Explicit(Vec<f64>),
}

impl ThetaSpec {
    pub fn resolve(&self, n: usize) -> Result<Vector> {
        match self {
            ThetaSpec::E1 => Vector::basis(n, 0),
            ThetaSpec::Diagonal => Vector::diagonal(n),
            ThetaSpec::Random(seed) => Vector::random_unit(n, *seed),
            ThetaSpec::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: v.len(),
                    });
                }
                Vector::new(v.clone())?.normalized()
            }
        }
    }
}

impl fmt::Display for ThetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaSpec::E1 => f.write_str("e1"),
            ThetaSpec::Diagonal => f.write_str("diagonal"),
            ThetaSpec::Random(s) => write!(f, "random({s})"),
            ThetaSpec::Explicit(v) => write!(f, "explicit[{}]", v.len()),
        }
    }
}

impl FromStr for ThetaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "e1" => return Ok(ThetaSpec::E1),
            "diagonal" => return Ok(ThetaSpec::Diagonal),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("random(").and_then(|r| r.strip_suffix(')')) {
            return inner
                .trim()
                .parse()
                .map(ThetaSpec::Random)
                .map_err(|_| Error::Format(format!("bad seed in {s:?}")));
        }
        Err(Error::Format(format!(
            "unknown direction {s:?}; expected e1, diagonal, random(SEED) or a vector"
        )))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThetaRepr {
    Named(String),
    Vector(Vec<f64>),
}

impl Serialize for ThetaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThetaSpec::Explicit(v) => ThetaRepr::Vector(v.clone()),
            other => ThetaRepr::Named(other.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ThetaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ThetaRepr::deserialize(d)? {
            ThetaRepr::Named(s) => s.parse().map_err(serde::de::Error::custom),
            ThetaRepr::Vector(v) => Ok(ThetaSpec::Explicit(v)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// The bound is at least the trivial distance, so it holds regardless.
    VacuousPass,
    Fail,
    /// Nothing decides: only bounds with unknown constants, or an estimate
    /// without a confidence band.
    Informational,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::VacuousPass => "vacuous bound, trivially passes",
            Verdict::Fail => "FAIL",
            Verdict::Informational => "informational",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Exact,
    MonteCarlo,
}

/// The outcome for one distribution, direction and distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub spec: DistributionSpec,
    pub theta: ThetaSpec,
    pub kind: DistanceKind,
    /// The smallest bound with fully known constants, if any.
    pub bound: Option<BoundValue>,
    pub empirical: DistanceEstimate,
    /// Quadrature value of the distance when the marginal is known exactly.
    pub exact_distance: Option<f64>,
    pub verdict: Verdict,
    pub moments: MomentSource,
    /// Every other bound evaluated for this cell.
    pub other_bounds: Vec<BoundValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyRequest {
    /// Already at isotropic scale.
    pub spec: DistributionSpec,
    pub thetas: Vec<ThetaSpec>,
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub constants: Constants,
    /// Histogram bins; `⌈N^{1/3}⌉` when absent.
    #[serde(default)]
    pub bins: Option<usize>,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

/// Projections onto every direction plus moment summary of one stream.
pub struct CellSample {
    pub projections: Vec<ProjectionSample>,
    pub moments: Option<MomentSummary>,
}

/// One streaming pass over `count` draws of `spec`: projections onto every
/// `theta`, and the moment summary when `with_moments` is set.
pub fn sample_cell(
    spec: &DistributionSpec,
    thetas: &[Vector],
    count: usize,
    seed: u64,
    with_moments: bool,
) -> Result<CellSample> {
    if count < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: count,
        });
    }
    let n = spec.n;
    for t in thetas {
        if t.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.dim(),
            });
        }
        t.ensure_unit(1e-9)?;
    }
    let coverage = if n <= FULL_PAIR_SCAN_MAX_DIM {
        PairCoverage::All
    } else {
        PairCoverage::Subset {
            coords: FULL_PAIR_SCAN_MAX_DIM,
            seed: derive_seed(seed, "pair-subset"),
        }
    };
    let parts = map_sample_blocks(spec, count, seed, |b| {
        let values: Vec<Vec<f64>> = thetas
            .iter()
            .map(|t| b.rows.chunks_exact(n).map(|r| dot(r, t)).collect())
            .collect();
        let moments = if with_moments {
            Some(MomentSummary::from_rows(b.rows, n, b.weights, coverage))
        } else {
            None
        };
        (values, b.weights.map(<[f64]>::to_vec), moments)
    })?;
    let weighted = spec.kind.is_weighted();
    let mut projections: Vec<ProjectionSample> = thetas
        .iter()
        .map(|t| ProjectionSample {
            values: Vec::with_capacity(count),
            weights: weighted.then(|| Vec::with_capacity(count)),
            theta: t.clone(),
            source: Some(*spec),
        })
        .collect();
    let mut summary: Option<MomentSummary> = None;
    for (values, weights, moments) in parts {
        for (ps, v) in projections.iter_mut().zip(values) {
            ps.values.extend_from_slice(&v);
            if let (Some(dst), Some(w)) = (ps.weights.as_mut(), weights.as_ref()) {
                dst.extend_from_slice(w);
            }
        }
        if let Some(m) = moments {
            let m = m?;
            summary = Some(match summary {
                Some(s) => s.merge(&m)?,
                None => m,
            });
        }
    }
    Ok(CellSample {
        projections,
        moments: summary,
    })
}

/// Coordinate moment inputs for the unconditional bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
struct UnconditionalMoments {
    max_second: f64,
    max_fourth: f64,
    max_square_cov: f64,
    max_third_abs: f64,
}

fn has_exact_scale(spec: &DistributionSpec) -> bool {
    exact_scale(spec.kind, spec.n) == Some(spec.scale)
}

fn kolmogorov_bounds(
    spec: &DistributionSpec,
    theta: &Vector,
    moments: Option<UnconditionalMoments>,
    constants: &Constants,
) -> Result<Vec<BoundValue>> {
    let mut out = Vec::new();
    if spec.kind == DistributionKind::SimplexUniform {
        let geometry = simplex_geometry(spec.n)?;
        out.push(bound_simplex_assembled(theta, &geometry)?);
        out.push(bound_simplex(theta, &geometry, constants)?);
        return Ok(out);
    }
    if !spec.kind.is_unconditional() {
        return Ok(out);
    }
    let m = moments.ok_or_else(|| Error::MissingInput("coordinate moments".into()))?;
    // the general frame bound on the standard basis, with every off-diagonal
    // E[Xᵢ²Xⱼ²] bounded by maxCov + (max E Xᵢ²)²
    let pairs = PairMoments::Exchangeable {
        diagonal: m.max_fourth,
        off_diagonal: (m.max_square_cov + m.max_second * m.max_second).max(0.0),
    };
    let inputs = BoundInputs::new(&standard_frame(spec.n)?, theta, pairs)?
        .with_third_abs(m.max_third_abs);
    out.push(bound_frame_general(&inputs)?);
    out.push(bound_unconditional(
        theta,
        m.max_fourth,
        m.max_square_cov,
        m.max_third_abs,
    )?);
    let sup = spec.sup_bound();
    if let Some(a) = sup {
        out.push(bound_unconditional_bounded(
            theta,
            m.max_fourth,
            m.max_square_cov,
            a,
        )?);
    }
    if m.max_square_cov <= 0.0 {
        out.push(bound_sncp_moments(theta, m.max_third_abs, m.max_fourth)?);
        if let Some(a) = sup {
            out.push(bound_sncp_bounded(theta, a)?);
        }
    }
    if let Some(p) = spec.kind.exponent() {
        out.push(bound_lp(theta, p, constants)?);
    }
    Ok(out)
}

fn tv_bounds(spec: &DistributionSpec, moments: Option<&MomentSummary>) -> Result<Vec<BoundValue>> {
    let n = spec.n;
    let exact = has_exact_scale(spec);
    let exact_var = match spec.kind {
        DistributionKind::SphereShell if exact => Some(0.0),
        DistributionKind::BallUniform if exact => Some(ball_norm2_variance(n)),
        DistributionKind::SphericalExponential if exact => {
            Some(spherical_exponential_norm2_variance(n))
        }
        _ => None,
    };
    let mut out = Vec::new();
    match (exact_var, moments) {
        (Some(v), _) => out.push(bound_sph_symm(n, SphSymmVariant::StdDev, v.sqrt())?),
        (None, Some(m)) => {
            out.push(bound_sph_symm(n, SphSymmVariant::StdDev, m.norm2_var().max(0.0).sqrt())?);
            out.push(bound_sph_symm(n, SphSymmVariant::AbsDeviation, m.norm2_absdev())?);
        }
        (None, None) => return Err(Error::MissingInput("Var ‖X‖² for the TV bound".into())),
    }
    match spec.kind {
        DistributionKind::SphereShell if exact => out.push(bound_euclidean(n, EuclideanBody::Sphere)?),
        DistributionKind::BallUniform if exact => out.push(bound_euclidean(n, EuclideanBody::Ball)?),
        DistributionKind::SphericalExponential if exact && n > 25 => {
            out.push(bound_poincare(n, SPHERICAL_EXPONENTIAL_GAP)?)
        }
        _ => {}
    }
    Ok(out)
}

/// Split into the smallest explicit bound and the rest.
fn select(mut bounds: Vec<BoundValue>) -> (Option<BoundValue>, Vec<BoundValue>) {
    let best = bounds
        .iter()
        .enumerate()
        .filter(|(_, b)| b.is_explicit())
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map(|(i, _)| i);
    match best {
        Some(i) => {
            let b = bounds.remove(i);
            (Some(b), bounds)
        }
        None => (None, bounds),
    }
}

/// Verdict of `empirical` against `bound`.
pub fn judge(bound: Option<&BoundValue>, empirical: &DistanceEstimate) -> Verdict {
    let Some(bound) = bound else {
        return Verdict::Informational;
    };
    if bound.is_vacuous() {
        return Verdict::VacuousPass;
    }
    let holds = match bound.kind {
        DistanceKind::Kolmogorov => match empirical.dkw_slack {
            Some(_) => empirical.lower_confidence() <= bound.value,
            None => return Verdict::Informational,
        },
        DistanceKind::TotalVariation => empirical.point_estimate <= bound.value + TV_ALLOWANCE,
    };
    if holds {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn marginal_kind(spec: &DistributionSpec) -> Option<MarginalKind> {
    if !has_exact_scale(spec) {
        return None;
    }
    match spec.kind {
        DistributionKind::SphereShell => Some(MarginalKind::SphereShell),
        DistributionKind::BallUniform => Some(MarginalKind::BallUniform),
        _ => None,
    }
}

/// Certify every direction of `req`. Fails with [`Error::Unsupported`] when
/// no bound applies to the distribution.
pub fn certify(req: &CertifyRequest) -> Result<Vec<BoundReport>> {
    let spec = req.spec;
    spec.validate()?;
    if req.thetas.is_empty() {
        return domain("no directions to certify");
    }
    if !(req.delta > 0.0 && req.delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {}", req.delta));
    }
    let kind = spec.kind;
    let wants_kolmogorov = kind.is_unconditional() || kind == DistributionKind::SimplexUniform;
    let wants_tv = kind.is_spherically_symmetric();
    if !wants_kolmogorov && !wants_tv {
        return Err(Error::Unsupported(format!(
            "no bound applies to {kind}: it is neither unconditional, a simplex, nor spherically symmetric"
        )));
    }
    let exact = exact_coordinate_moments(&spec);
    let need_mc = (wants_kolmogorov && kind.is_unconditional() && exact.is_none())
        || (wants_tv && !has_exact_scale(&spec));
    let thetas = req
        .thetas
        .iter()
        .map(|t| t.resolve(spec.n))
        .collect::<Result<Vec<_>>>()?;
    let cell = sample_cell(&spec, &thetas, req.samples, req.seed, need_mc)?;
    let (uncon, source) = match (exact, cell.moments.as_ref()) {
        (Some(e), _) => (
            Some(UnconditionalMoments {
                max_second: e.second,
                max_fourth: e.fourth,
                max_square_cov: e.square_cov,
                max_third_abs: e.third_abs,
            }),
            MomentSource::Exact,
        ),
        (None, Some(m)) => (
            Some(UnconditionalMoments {
                max_second: m.seconds().into_iter().fold(0.0, f64::max),
                max_fourth: m.max_fourth(),
                max_square_cov: m.max_square_cov().map_or(0.0, |c| c.value),
                max_third_abs: m.max_third_abs(),
            }),
            MomentSource::MonteCarlo,
        ),
        (None, None) => (None, MomentSource::Exact),
    };
    let exact_tv = match marginal_kind(&spec) {
        Some(k) if wants_tv => Some(exact_tv_vs_normal(k, spec.n)?),
        _ => None,
    };

    let mut reports = Vec::new();
    for ((theta_spec, theta), ps) in req.thetas.iter().zip(&thetas).zip(&cell.projections) {
        if wants_kolmogorov {
            let bounds = kolmogorov_bounds(&spec, theta, uncon, &req.constants)?;
            let empirical = if ps.is_weighted() {
                weighted_kolmogorov_vs_normal(ps, req.delta)?
            } else {
                kolmogorov_vs_normal(ps, req.delta)?
            };
            let (bound, other_bounds) = select(bounds);
            reports.push(BoundReport {
                spec,
                theta: theta_spec.clone(),
                kind: DistanceKind::Kolmogorov,
                verdict: judge(bound.as_ref(), &empirical),
                bound,
                empirical,
                exact_distance: None,
                moments: if kind == DistributionKind::SimplexUniform {
                    MomentSource::Exact
                } else {
                    source
                },
                other_bounds,
            });
        }
        if wants_tv {
            let bounds = tv_bounds(&spec, cell.moments.as_ref())?;
            let mut empirical = tv_vs_normal_histogram(ps, req.bins)?;
            empirical.delta = req.delta;
            let (bound, other_bounds) = select(bounds);
            reports.push(BoundReport {
                spec,
                theta: theta_spec.clone(),
                kind: DistanceKind::TotalVariation,
                verdict: judge(bound.as_ref(), &empirical),
                bound,
                empirical,
                // TV of an exactly known marginal does not depend on θ
                exact_distance: exact_tv,
                moments: if has_exact_scale(&spec) {
                    MomentSource::Exact
                } else {
                    MomentSource::MonteCarlo
                },
                other_bounds,
            });
        }
    }
    Ok(reports)
}

/// Whether any report failed.
pub fn any_failure(reports: &[BoundReport]) -> bool {
    reports.iter().any(|r| r.verdict.is_failure())
}

pub fn write_reports_csv<W: Write>(reports: &[BoundReport], mut w: W) -> Result<()> {
    writeln!(
        w,
        "distribution,n,scale,theta,distance,bound_name,bound,empirical,dkw_slack,exact_distance,verdict"
    )?;
    for r in reports {
        let (name, value) = match &r.bound {
            Some(b) => (b.bound.as_str(), b.value.to_string()),
            None => ("", String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},\"{}\"",
            r.spec.kind,
            r.spec.n,
            r.spec.scale,
            r.theta,
            r.kind,
            name,
            value,
            r.empirical.point_estimate,
            r.empirical.dkw_slack.map(|s| s.to_string()).unwrap_or_default(),
            r.exact_distance.map(|s| s.to_string()).unwrap_or_default(),
            r.verdict
        )?;
    }
    Ok(())
}
