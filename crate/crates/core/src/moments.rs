//! Mergeable moment summaries of sample batches.
//!
//! A [`MomentSummary`] holds compensated power sums, so two summaries of
//! disjoint batches merge into the summary of their union. The square
//! cross-product sums `Σ w·Xᵢ²Xⱼ²` are kept internally for that reason; the
//! public surface only exposes their extreme covariance.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, BLOCK_ROWS};
use crate::stats::CompensatedSum;

/// Which coordinate pairs enter the square-covariance extremes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairCoverage {
    /// All `i ≠ j`; O(n²N).
    All,
    /// Pairs among a seeded random subset of `coords` coordinates.
    Subset { coords: usize, seed: u64 },
}

/// `max_{i≠j} Cov(Xᵢ², Xⱼ²)` on the sample measure and where it occurs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareCovariance {
    pub value: f64,
    pub pair: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentSummary {
    n: usize,
    count: u64,
    weight: CompensatedSum,
    first: Vec<CompensatedSum>,
    second: Vec<CompensatedSum>,
    third_abs: Vec<CompensatedSum>,
    fourth: Vec<CompensatedSum>,
    pair_coords: Vec<usize>,
    cross: Vec<CompensatedSum>,
    norm2: CompensatedSum,
    norm4: CompensatedSum,
    norm2_absdev: CompensatedSum,
    square_cov_max: Option<SquareCovariance>,
}

impl MomentSummary {
    /// Empty summary for dimension `n`.
    pub fn empty(n: usize, coverage: PairCoverage) -> Self {
        let pair_coords = match coverage {
            PairCoverage::All => (0..n).collect(),
            PairCoverage::Subset { coords, seed } => {
                let mut all: Vec<usize> = (0..n).collect();
                let mut rng = stream_rng(seed, 0x5eed);
                all.shuffle(&mut rng);
                let mut chosen = all[..coords.min(n)].to_vec();
                chosen.sort_unstable();
                chosen
            }
        };
        let k = pair_coords.len();
        MomentSummary {
            n,
            count: 0,
            weight: CompensatedSum::new(),
            first: vec![CompensatedSum::new(); n],
            second: vec![CompensatedSum::new(); n],
            third_abs: vec![CompensatedSum::new(); n],
            fourth: vec![CompensatedSum::new(); n],
            pair_coords,
            cross: vec![CompensatedSum::new(); k * k],
            norm2: CompensatedSum::new(),
            norm4: CompensatedSum::new(),
            norm2_absdev: CompensatedSum::new(),
            square_cov_max: None,
        }
    }

    /// Accumulate row-major `rows` (optionally weighted) without the
    /// `N ≥ 2` check; used for per-block partial summaries.
    pub fn from_rows(
        rows: &[f64],
        n: usize,
        weights: Option<&[f64]>,
        coverage: PairCoverage,
    ) -> Result<Self> {
        if n == 0 || rows.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        let count = rows.len() / n;
        if let Some(w) = weights {
            if w.len() != count {
                return Err(Error::DimensionMismatch {
                    expected: count,
                    got: w.len(),
                });
            }
        }
        let mut summary = MomentSummary::empty(n, coverage);
        for start in (0..count).step_by(BLOCK_ROWS) {
            let end = (start + BLOCK_ROWS).min(count);
            summary.accumulate(&rows[start * n..end * n], weights.map(|w| &w[start..end]));
        }
        summary.refresh_extremes();
        Ok(summary)
    }

    fn accumulate(&mut self, rows: &[f64], weights: Option<&[f64]>) {
        let n = self.n;
        let count = rows.len() / n;
        let nf = n as f64;
        let mut s1 = vec![0.0; n];
        let mut s2 = vec![0.0; n];
        let mut s3 = vec![0.0; n];
        let mut s4 = vec![0.0; n];
        let (mut w_sum, mut nrm2, mut nrm4, mut dev) = (0.0, 0.0, 0.0, 0.0);
        for (r, row) in rows.chunks_exact(n).enumerate() {
            let w = weights.map_or(1.0, |w| w[r]);
            let mut sq = 0.0;
            for (j, &x) in row.iter().enumerate() {
                let x2 = x * x;
                s1[j] += w * x;
                s2[j] += w * x2;
                s3[j] += w * x2 * x.abs();
                s4[j] += w * x2 * x2;
                sq += x2;
            }
            w_sum += w;
            nrm2 += w * sq;
            nrm4 += w * sq * sq;
            dev += w * (sq - nf).abs();
        }
        self.count += count as u64;
        self.weight.add(w_sum);
        for j in 0..n {
            self.first[j].add(s1[j]);
            self.second[j].add(s2[j]);
            self.third_abs[j].add(s3[j]);
            self.fourth[j].add(s4[j]);
        }
        self.norm2.add(nrm2);
        self.norm4.add(nrm4);
        self.norm2_absdev.add(dev);

        let k = self.pair_coords.len();
        if k >= 2 && count > 0 {
            let coords = &self.pair_coords;
            let squares = DMatrix::from_fn(count, k, |r, c| {
                let x = rows[r * n + coords[c]];
                x * x
            });
            let weighted = match weights {
                None => squares.clone(),
                Some(w) => DMatrix::from_fn(count, k, |r, c| w[r] * squares[(r, c)]),
            };
            let gram = squares.transpose() * weighted;
            for a in 0..k {
                for b in 0..k {
                    self.cross[a * k + b].add(gram[(a, b)]);
                }
            }
        }
    }

    fn refresh_extremes(&mut self) {
        let k = self.pair_coords.len();
        let w = self.weight.value();
        self.square_cov_max = None;
        if k < 2 || w <= 0.0 {
            return;
        }
        let mut best: Option<SquareCovariance> = None;
        for a in 0..k {
            for b in (a + 1)..k {
                let (i, j) = (self.pair_coords[a], self.pair_coords[b]);
                let cov = self.cross[a * k + b].value() / w
                    - (self.second[i].value() / w) * (self.second[j].value() / w);
                if best.is_none_or(|c| cov > c.value) {
                    best = Some(SquareCovariance {
                        value: cov,
                        pair: (i, j),
                    });
                }
            }
        }
        self.square_cov_max = best;
    }

    /// Summary of the union of both underlying batches.
    pub fn merge(&self, other: &MomentSummary) -> Result<MomentSummary> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        if self.pair_coords != other.pair_coords {
            return Err(Error::Domain(
                "cannot merge summaries tracking different coordinate pairs".into(),
            ));
        }
        let mut out = self.clone();
        out.count += other.count;
        out.weight.merge(&other.weight);
        let zip_merge = |a: &mut Vec<CompensatedSum>, b: &[CompensatedSum]| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        };
        zip_merge(&mut out.first, &other.first);
        zip_merge(&mut out.second, &other.second);
        zip_merge(&mut out.third_abs, &other.third_abs);
        zip_merge(&mut out.fourth, &other.fourth);
        zip_merge(&mut out.cross, &other.cross);
        out.norm2.merge(&other.norm2);
        out.norm4.merge(&other.norm4);
        out.norm2_absdev.merge(&other.norm2_absdev);
        out.refresh_extremes();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn norm(&self, s: &CompensatedSum) -> f64 {
        s.value() / self.weight.value()
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.norm(&self.first[i])
    }

    /// `E Xᵢ²` on the (weighted) sample measure.
    pub fn second(&self, i: usize) -> f64 {
        self.norm(&self.second[i])
    }

    pub fn third_abs(&self, i: usize) -> f64 {
        self.norm(&self.third_abs[i])
    }

    pub fn fourth(&self, i: usize) -> f64 {
        self.norm(&self.fourth[i])
    }

    pub fn seconds(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.second(i)).collect()
    }

    pub fn mean_second(&self) -> f64 {
        self.seconds().iter().sum::<f64>() / self.n as f64
    }

    pub fn max_fourth(&self) -> f64 {
        (0..self.n).map(|i| self.fourth(i)).fold(f64::MIN, f64::max)
    }

    pub fn max_third_abs(&self) -> f64 {
        (0..self.n).map(|i| self.third_abs(i)).fold(f64::MIN, f64::max)
    }

    pub fn max_square_cov(&self) -> Option<SquareCovariance> {
        self.square_cov_max
    }

    /// Sample `Cov(Xᵢ², Xⱼ²)` for a tracked pair.
    pub fn square_cov(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.pair_coords.len();
        let a = self.pair_coords.iter().position(|&c| c == i)?;
        let b = self.pair_coords.iter().position(|&c| c == j)?;
        Some(self.norm(&self.cross[a * k + b]) - self.second(i) * self.second(j))
    }

    pub fn norm2_mean(&self) -> f64 {
        self.norm(&self.norm2)
    }

    /// Sample variance of `‖X‖₂²` (population normalization).
    pub fn norm2_var(&self) -> f64 {
        let m = self.norm2_mean();
        (self.norm(&self.norm4) - m * m).max(0.0)
    }

    /// Sample mean of `|‖X‖₂² − n|`.
    pub fn norm2_absdev(&self) -> f64 {
        self.norm(&self.norm2_absdev)
    }
}

/// Moment summary of a whole batch, over all coordinate pairs.
pub fn summarize(batch: &SampleBatch) -> Result<MomentSummary> {
    summarize_with(batch, PairCoverage::All)
}

pub fn summarize_with(batch: &SampleBatch, coverage: PairCoverage) -> Result<MomentSummary> {
    if batch.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: batch.len(),
        });
    }
    MomentSummary::from_rows(batch.data(), batch.dim(), batch.weights(), coverage)
}
