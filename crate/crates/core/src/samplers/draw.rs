use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::norms::Exponent;
use crate::rng::stream_rng;

use super::{DistributionKind, DistributionSpec};

/// Draws `e^{−|t|^p}` variates as `±G^{1/p}`, `G ~ Gamma(1/p, 1)`.
#[derive(Clone, Debug)]
enum GenGaussian {
    Laplace,
    /// `e^{−t²}` is `N(0, 1/2)`.
    HalfVarianceNormal,
    General { gamma: Gamma<f64>, inv_p: f64 },
}

impl GenGaussian {
    fn new(p: f64) -> Result<Self> {
        Ok(if p == 1.0 {
            GenGaussian::Laplace
        } else if p == 2.0 {
            GenGaussian::HalfVarianceNormal
        } else {
            let gamma = Gamma::new(1.0 / p, 1.0)
                .map_err(|e| Error::Domain(format!("gamma shape 1/{p}: {e}")))?;
            GenGaussian::General {
                gamma,
                inv_p: 1.0 / p,
            }
        })
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            GenGaussian::HalfVarianceNormal => {
                let z: f64 = StandardNormal.sample(rng);
                z * std::f64::consts::FRAC_1_SQRT_2
            }
            GenGaussian::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
            GenGaussian::General { gamma, inv_p } => {
                let g = gamma.sample(rng).powf(*inv_p);
                if rng.random::<bool>() {
                    g
                } else {
                    -g
                }
            }
        }
    }
}

/// `N` i.i.d. draws with density proportional to `e^{−|t|^p}`.
pub fn sample_generalized_gaussian(p: Exponent, count: usize, seed: u64) -> Result<Vec<f64>> {
    let p = match p {
        Exponent::Infinity => {
            return Err(Error::Unsupported(
                "generalized Gaussian with p = inf; sample the uniform law directly".into(),
            ))
        }
        Exponent::Finite(p) => Exponent::new(p)?.value(),
    };
    let gen = GenGaussian::new(p)?;
    let mut rng = stream_rng(seed, 0);
    Ok((0..count).map(|_| gen.draw(&mut rng)).collect())
}

#[derive(Clone, Debug)]
enum Kernel {
    LpBall { gen: GenGaussian, p: f64 },
    LpCone { gen: GenGaussian, p: f64, weighted: bool },
    Cube,
    CubeBoundary,
    Simplex { factor: f64 },
    Sphere,
    Ball { inv_n: f64 },
    SphericalExp { radius: Gamma<f64> },
    LinfExp { radius: Gamma<f64> },
}

/// Per-row sampler for one [`DistributionSpec`]; holds the precomputed
/// constants so the inner loop is allocation free.
#[derive(Clone, Debug)]
pub struct RowSampler {
    kernel: Kernel,
    scale: f64,
}

fn radius_gamma(n: usize) -> Result<Gamma<f64>> {
    Gamma::new(n as f64, 1.0).map_err(|e| Error::Domain(format!("gamma shape {n}: {e}")))
}

impl RowSampler {
    pub fn new(spec: &DistributionSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let kernel = match spec.kind {
            DistributionKind::LpBallUniform { p: Exponent::Infinity } => Kernel::Cube,
            DistributionKind::LpBallUniform { p: Exponent::Finite(p) } => Kernel::LpBall {
                gen: GenGaussian::new(p)?,
                p,
            },
            DistributionKind::LpConeMeasure { p: Exponent::Infinity }
            | DistributionKind::LpSurfaceMeasure { p: Exponent::Infinity } => Kernel::CubeBoundary,
            DistributionKind::LpConeMeasure { p: Exponent::Finite(p) } => Kernel::LpCone {
                gen: GenGaussian::new(p)?,
                p,
                weighted: false,
            },
            DistributionKind::LpSurfaceMeasure { p: Exponent::Finite(p) } => Kernel::LpCone {
                gen: GenGaussian::new(p)?,
                p,
                weighted: p > 1.0,
            },
            DistributionKind::SimplexUniform => Kernel::Simplex {
                factor: (((n + 1) * (n + 2)) as f64).sqrt(),
            },
            DistributionKind::SphereShell => Kernel::Sphere,
            DistributionKind::BallUniform => Kernel::Ball {
                inv_n: 1.0 / n as f64,
            },
            DistributionKind::SphericalExponential => Kernel::SphericalExp {
                radius: radius_gamma(n)?,
            },
            DistributionKind::LinfExponential => Kernel::LinfExp {
                radius: radius_gamma(n)?,
            },
        };
        Ok(RowSampler {
            kernel,
            scale: spec.scale,
        })
    }

    /// Fill `out` with one sample; returns its importance weight (1 for
    /// unweighted laws).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        let scale = self.scale;
        let mut weight = 1.0;
        match &self.kernel {
            Kernel::Cube => {
                for x in out.iter_mut() {
                    *x = scale * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            Kernel::CubeBoundary => {
                cube_boundary(rng, out, 1.0);
                scale_in_place(out, scale);
            }
            Kernel::LpBall { gen, p } => {
                let mut sum = 0.0;
                for x in out.iter_mut() {
                    *x = gen.draw(rng);
                    sum += abs_pow(*x, *p);
                }
                let y: f64 = Exp1.sample(rng);
                let factor = scale / (sum + y).powf(1.0 / p);
                scale_in_place(out, factor);
            }
            Kernel::LpCone { gen, p, weighted } => {
                let mut sum = 0.0;
                for x in out.iter_mut() {
                    *x = gen.draw(rng);
                    sum += abs_pow(*x, *p);
                }
                let inv = 1.0 / sum.powf(1.0 / p);
                if *weighted {
                    // |∇‖x‖_p^p| on the unit sphere, up to the constant p
                    let q = 2.0 * (p - 1.0);
                    weight = out
                        .iter()
                        .map(|x| abs_pow(x * inv, q))
                        .sum::<f64>()
                        .sqrt();
                }
                scale_in_place(out, scale * inv);
            }
            Kernel::Simplex { factor } => draw_simplex(rng, out, *factor),
            Kernel::Sphere => {
                let r = gaussian_direction(rng, out);
                scale_in_place(out, scale / r);
            }
            Kernel::Ball { inv_n } => {
                let r = gaussian_direction(rng, out);
                let u: f64 = rng.random();
                scale_in_place(out, scale * u.powf(*inv_n) / r);
            }
            Kernel::SphericalExp { radius } => {
                let r = gaussian_direction(rng, out);
                let rho = radius.sample(rng);
                scale_in_place(out, scale * rho / r);
            }
            Kernel::LinfExp { radius } => {
                let rho = radius.sample(rng);
                cube_boundary(rng, out, rho);
                scale_in_place(out, scale);
            }
        }
        weight
    }
}

#[inline]
fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

#[inline]
fn scale_in_place(out: &mut [f64], factor: f64) {
    for x in out.iter_mut() {
        *x *= factor;
    }
}

/// Fill with standard Gaussians; returns their Euclidean norm.
fn gaussian_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) -> f64 {
    loop {
        let mut sq = 0.0;
        for x in out.iter_mut() {
            *x = StandardNormal.sample(rng);
            sq += *x * *x;
        }
        if sq > 0.0 {
            return sq.sqrt();
        }
    }
}

/// Uniform point on the boundary of `[−r, r]ⁿ`: a uniform facet, that
/// coordinate at `±r`, the others uniform.
fn cube_boundary<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64], r: f64) {
    let n = out.len();
    let facet = rng.random_range(0..2 * n);
    for x in out.iter_mut() {
        *x = r * (2.0 * rng.random::<f64>() - 1.0);
    }
    out[facet / 2] = if facet % 2 == 0 { r } else { -r };
}

/// Uniform point of the isotropic regular simplex.
///
/// `Y = factor · D` with `D ~ Dirichlet(1, …, 1)` on `n + 1` coordinates is
/// uniform on the scaled standard simplex; `X = H Y` with the Helmert rows
/// `h_k = (1, …, 1, −k, 0, …) / √(k(k+1))` drops the `𝟙` direction. Both
/// steps run in place in O(n).
fn draw_simplex<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64], factor: f64) {
    let n = out.len();
    let mut total = 0.0;
    for x in out.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        *x = e;
        total += e;
    }
    let last_e: f64 = Exp1.sample(rng);
    total += last_e;
    let c = factor / total;
    let last = last_e * c;
    let mut prefix = 0.0;
    for k in 1..=n {
        let y_k = out[k - 1] * c;
        prefix += y_k;
        let y_next = if k < n { out[k] * c } else { last };
        let kf = k as f64;
        out[k - 1] = (prefix - kf * y_next) / (kf * (kf + 1.0)).sqrt();
    }
}

/// Barycentric coordinates `Y ∈ ℝ^{n+1}` of a simplex sample `X`, inverting
/// the Helmert map: `Y = Hᵀ X + (factor/(n+1)) 𝟙`.
pub fn simplex_barycentric(x: &[f64], out: &mut Vec<f64>) {
    let n = x.len();
    let factor = (((n + 1) * (n + 2)) as f64).sqrt();
    out.clear();
    out.resize(n + 1, factor / (n + 1) as f64);
    // (Hᵀx)_i = Σ_{k ≥ i} x_k/√(k(k+1)) − (i−1) x_{i−1}/√((i−1)i), 1-based
    let mut suffix = 0.0;
    for i in (1..=n + 1).rev() {
        if i <= n {
            let kf = i as f64;
            suffix += x[i - 1] / (kf * (kf + 1.0)).sqrt();
        }
        let mut v = suffix;
        if i >= 2 {
            let kf = (i - 1) as f64;
            v -= kf * x[i - 2] / (kf * (kf + 1.0)).sqrt();
        }
        out[i - 1] += v;
    }
}
