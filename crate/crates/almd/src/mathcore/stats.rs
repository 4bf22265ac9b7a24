//! 1-D distribution tools: exact Wasserstein-1 between empirical samples,
//! Gaussian kernel density estimates, and fixed-range histograms.

use crate::error::{Error, Result};
use crate::mathcore::sum::{pairwise_mean, pairwise_sum};

fn check_finite(op: &'static str, samples: &[f64]) -> Result<()> {
    for (i, &x) in samples.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                op,
                detail: Some(format!("sample {i} = {x}")),
            });
        }
    }
    Ok(())
}

/// Sample mean.
pub fn sample_mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptySample { op: "sample_mean" });
    }
    Ok(pairwise_mean(xs))
}

/// Unbiased sample variance (n−1 denominator); 0 for a single sample.
pub fn sample_variance(xs: &[f64]) -> Result<f64> {
    let m = sample_mean(xs)?;
    if xs.len() < 2 {
        return Ok(0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    Ok(pairwise_sum(&sq) / (xs.len() - 1) as f64)
}

/// Exact Wasserstein-1 distance between the empirical distributions of two
/// samples: ∫|F_a(x) − F_b(x)| dx over the merged support.
///
/// Sample sizes may differ. For equal sizes this reduces to the mean
/// absolute difference of the order statistics.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample {
            op: "wasserstein1_1d",
        });
    }
    check_finite("wasserstein1_1d", a)?;
    check_finite("wasserstein1_1d", b)?;

    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let (m, n) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = f64::NAN;
    let mut w = 0.0;
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        if prev.is_finite() {
            w += (i as f64 / m - j as f64 / n).abs() * (x - prev);
        }
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        prev = x;
    }
    Ok(w)
}

/// Gaussian kernel density estimate over a fixed sample set.
#[derive(Debug, Clone)]
pub struct GaussianKde {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl GaussianKde {
    /// Build a KDE with an explicit bandwidth (must be positive and finite).
    pub fn new(samples: &[f64], bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample { op: "gaussian_kde" });
        }
        check_finite("gaussian_kde", samples)?;
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::BadBandwidth(bandwidth));
        }
        Ok(GaussianKde {
            samples: samples.to_vec(),
            bandwidth,
        })
    }

    /// Build a KDE with Scott's-rule bandwidth h = σ̂ · n^(−1/5).
    pub fn with_scott_bandwidth(samples: &[f64]) -> Result<Self> {
        let sigma = sample_variance(samples)?.sqrt();
        let h = sigma * (samples.len() as f64).powf(-0.2);
        Self::new(samples, h)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Density at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        let terms: Vec<f64> = self
            .samples
            .iter()
            .map(|&s| {
                let z = (x - s) / h;
                (-0.5 * z * z).exp()
            })
            .collect();
        norm * pairwise_sum(&terms)
    }

    /// Evaluate on a uniform grid of `n` points spanning [lo, hi].
    pub fn evaluate_grid(&self, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
        if !(lo < hi) {
            return Err(Error::BadRange { lo, hi });
        }
        if n < 2 {
            return Err(Error::EmptySample {
                op: "kde_evaluate_grid",
            });
        }
        let step = (hi - lo) / (n - 1) as f64;
        Ok((0..n)
            .map(|k| {
                let x = lo + k as f64 * step;
                (x, self.evaluate(x))
            })
            .collect())
    }
}

/// Fixed-range histogram with half-open-below bins (lo, hi]: a sample lands
/// in bin i when edge_i < x ≤ edge_{i+1}; x ≤ lo counts as underflow and
/// x > hi as overflow.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// Per-bin probability density normalized over in-range samples.
    pub fn density(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let w = self.bin_width();
        self.counts
            .iter()
            .map(|&c| c as f64 / (total as f64 * w))
            .collect()
    }

    /// Midpoint of bin `i`.
    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }
}

/// Histogram `samples` into `n_bins` equal bins over (lo, hi].
pub fn histogram(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::NoBins);
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::BadRange { lo, hi });
    }
    check_finite("histogram", samples)?;

    let w = (hi - lo) / n_bins as f64;
    // Explicit edge array keeps the boundary comparisons bit-consistent.
    let edges: Vec<f64> = (0..=n_bins).map(|k| lo + k as f64 * w).collect();
    let mut h = Histogram {
        lo,
        hi,
        counts: vec![0; n_bins],
        underflow: 0,
        overflow: 0,
    };
    for &x in samples {
        if x <= edges[0] {
            h.underflow += 1;
        } else if x > edges[n_bins] {
            h.overflow += 1;
        } else {
            // Smallest bin whose upper edge is ≥ x.
            let i = edges[1..n_bins].partition_point(|&e| e < x);
            h.counts[i] += 1;
        }
    }
    Ok(h)
}
