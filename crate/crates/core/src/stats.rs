//! Small mergeable accumulators shared by the estimators.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Streaming mean and variance (Welford), mergeable with Chan's update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let weight = other.count as f64 / total as f64;
        self.mean += delta * weight;
        self.m2 += other.m2 + delta * delta * self.count as f64 * weight;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = RunningStats::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Ordinary least squares of `y` on `x` with heteroskedasticity-robust
/// (HC0 sandwich) standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

/// Least-squares fit of `y` on `x`; `None` with fewer than three points or a
/// constant `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let count = x.len();
    if count < 3 || y.len() != count {
        return None;
    }
    let nf = count as f64;
    let mean_x = x.iter().copied().collect::<CompensatedSum>().value() / nf;
    let mean_y = y.iter().copied().collect::<CompensatedSum>().value() / nf;
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        sxx.add(dx * dx);
        sxy.add(dx * (yi - mean_y));
    }
    let sxx = sxx.value();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy.value() / sxx;
    let intercept = mean_y - slope * mean_x;

    // HC0: Var(slope) = Σ dx² e² / Sxx², Var(intercept) from the full
    // sandwich on the centered design.
    let mut meat_xx = CompensatedSum::new();
    let mut meat_11 = CompensatedSum::new();
    for (&xi, &yi) in x.iter().zip(y) {
        let e = yi - intercept - slope * xi;
        let dx = xi - mean_x;
        meat_xx.add(dx * dx * e * e);
        meat_11.add(e * e);
    }
    let slope_var = meat_xx.value() / (sxx * sxx);
    let intercept_var = meat_11.value() / (nf * nf) + mean_x * mean_x * slope_var;
    Some(LinearFit {
        slope,
        intercept,
        slope_se: slope_var.sqrt(),
        intercept_se: intercept_var.sqrt(),
    })
}
