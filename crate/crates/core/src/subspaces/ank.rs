//! Direction-sampled estimate of `λ_{n,k}(A_{n,k}(ε))`, the share of
//! `k`-dimensional subspaces on which every projection is `ε`-close to normal
//! in Kolmogorov distance.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::kolmogorov_statistic;
use crate::error::{domain, Error, Result};
use crate::rng::{derive_seed, stream_rng, substream_seed};
use crate::samplers::{sample, DistributionSpec};

use super::random_subspace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnkParams {
    pub k: usize,
    pub n_subspaces: usize,
    /// Directions sampled per subspace (ignored for `k = 1`, where the two
    /// unit vectors of the line are both evaluated).
    pub n_dirs: usize,
    /// Size of the sample shared by every subspace and direction.
    pub samples: usize,
    pub seed: u64,
}

/// Per-subspace maxima of the sampled Kolmogorov distances. These are lower
/// approximations of the supremum over the unit sphere of each subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnkEstimate {
    pub spec: DistributionSpec,
    pub params: AnkParams,
    pub sups: Vec<f64>,
}

impl AnkEstimate {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Share of subspaces whose sampled supremum is at most `eps`.
    pub fn fraction(&self, eps: f64) -> f64 {
        let hits = self.sups.iter().filter(|&&s| s <= eps).count();
        hits as f64 / self.sups.len() as f64
    }

    pub fn directions_per_subspace(&self) -> usize {
        if self.params.k == 1 {
            2
        } else {
            self.params.n_dirs
        }
    }
}

pub fn estimate_ank(spec: &DistributionSpec, params: AnkParams) -> Result<AnkEstimate> {
    let n = spec.n;
    let AnkParams {
        k,
        n_subspaces,
        n_dirs,
        samples,
        seed,
    } = params;
    if k == 0 || k > n {
        return domain(format!("subspace rank must lie in 1..={n}, got {k}"));
    }
    if n_subspaces == 0 || (k > 1 && n_dirs == 0) {
        return domain("need at least one subspace and one direction");
    }
    if spec.kind.is_weighted() {
        return Err(Error::WeightedInput);
    }
    let batch = sample(spec, samples, derive_seed(seed, "ank-sample"))?;
    let subspace_seed = derive_seed(seed, "ank-subspaces");
    let direction_seed = derive_seed(seed, "ank-directions");
    let sups = (0..n_subspaces)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let e = random_subspace(n, k, substream_seed(subspace_seed, s as u64))?;
            // coordinates of every sample in the basis of E, N × k
            let mut coords = Vec::with_capacity(samples * k);
            for row in batch.rows() {
                for b in e.basis() {
                    coords.push(row.iter().zip(b).map(|(x, y)| x * y).sum::<f64>());
                }
            }
            let mut sup = 0.0f64;
            if k == 1 {
                sup = sup.max(kolmogorov_statistic(&coords)?);
                let flipped: Vec<f64> = coords.iter().map(|x| -x).collect();
                sup = sup.max(kolmogorov_statistic(&flipped)?);
            } else {
                let mut rng = stream_rng(direction_seed, s as u64);
                for _ in 0..n_dirs {
                    let mut g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                    g.iter_mut().for_each(|x| *x /= norm);
                    let w: Vec<f64> = coords
                        .chunks_exact(k)
                        .map(|c| c.iter().zip(&g).map(|(x, y)| x * y).sum())
                        .collect();
                    sup = sup.max(kolmogorov_statistic(&w)?);
                }
            }
            Ok(sup)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AnkEstimate {
        spec: *spec,
        params,
        sups,
    })
}

/// CSV rows `n,k,eps,fraction,n_subspaces,n_dirs,N,seed`, one per `eps`.
pub fn write_ank_csv<W: Write>(estimates: &[AnkEstimate], eps: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "n,k,eps,fraction,n_subspaces,n_dirs,N,seed")?;
    for e in estimates {
        for &eps in eps {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                e.n(),
                e.params.k,
                eps,
                e.fraction(eps),
                e.params.n_subspaces,
                e.directions_per_subspace(),
                e.params.samples,
                e.params.seed
            )?;
        }
    }
    Ok(())
}
