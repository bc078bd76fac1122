//! Density machinery for the Tree-structured Parzen Estimator: truncated
//! normal kernel mixtures for continuous parameters and Laplace-smoothed
//! frequencies for categorical ones.

use rand::rngs::StdRng;
use rand::Rng;

/// Error function, Abramowitz & Stegun 7.1.26 (|error| < 1.5e-7), which is
/// far below the resolution the candidate scoring needs.
pub fn erf(x: f64) -> f64 {
    const A1: f64 = 0.254829592;
    const A2: f64 = -0.284496736;
    const A3: f64 = 1.421413741;
    const A4: f64 = -1.453152027;
    const A5: f64 = 1.061405429;
    const P: f64 = 0.3275911;

    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let poly = ((((A5 * t + A4) * t + A3) * t + A2) * t + A1) * t;
    sign * (1.0 - poly * (-x * x).exp())
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal draw (Box-Muller).
fn sample_standard_normal(rng: &mut StdRng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Parzen density over a bounded interval: one truncated-normal kernel per
/// observation plus a uniform prior component of the same weight. With no
/// observations it degenerates to the uniform alone.
#[derive(Debug, Clone)]
pub struct TruncatedNormalMixture {
    lo: f64,
    hi: f64,
    centers: Vec<f64>,
    bandwidth: f64,
}

impl TruncatedNormalMixture {
    /// Bandwidth shrinks with the group size:
    /// `b = max((hi-lo)/sqrt(n), 0.001*(hi-lo))`.
    pub fn fit(lo: f64, hi: f64, observations: &[f64]) -> Self {
        let range = hi - lo;
        let n = observations.len();
        let bandwidth = if n == 0 {
            range
        } else {
            (range / (n as f64).sqrt()).max(0.001 * range)
        };
        Self {
            lo,
            hi,
            centers: observations.to_vec(),
            bandwidth,
        }
    }

    fn kernel_pdf(&self, center: f64, x: f64) -> f64 {
        let b = self.bandwidth;
        let z = (x - center) / b;
        let mass = normal_cdf((self.hi - center) / b) - normal_cdf((self.lo - center) / b);
        if mass <= 0.0 {
            return 0.0;
        }
        normal_pdf(z) / (b * mass)
    }

    /// Density at x; strictly positive inside [lo, hi] thanks to the
    /// uniform component.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        let uniform = 1.0 / (self.hi - self.lo);
        let kernels: f64 = self.centers.iter().map(|&c| self.kernel_pdf(c, x)).sum();
        (uniform + kernels) / (self.centers.len() as f64 + 1.0)
    }

    pub fn sample(&self, rng: &mut StdRng) -> f64 {
        // Components are equally weighted: index 0 is the uniform prior,
        // 1..=n the kernels.
        let component = rng.gen_range(0..=self.centers.len());
        if component == 0 {
            return rng.gen_range(self.lo..self.hi);
        }
        let center = self.centers[component - 1];
        for _ in 0..64 {
            let candidate = center + self.bandwidth * sample_standard_normal(rng);
            if candidate >= self.lo && candidate <= self.hi {
                return candidate;
            }
        }
        // Centers lie inside the interval, so rejection virtually always
        // terminates; clamp as a last resort.
        center.clamp(self.lo, self.hi)
    }
}

/// Add-one smoothed categorical frequency over a fixed choice count.
#[derive(Debug, Clone)]
pub struct SmoothedCategorical {
    counts: Vec<u64>,
    total: u64,
}

impl SmoothedCategorical {
    pub fn fit(n_choices: usize, observed: &[usize]) -> Self {
        let mut counts = vec![0u64; n_choices];
        for &index in observed {
            counts[index] += 1;
        }
        let total = observed.len() as u64;
        Self { counts, total }
    }

    pub fn pmf(&self, index: usize) -> f64 {
        let k = self.counts.len() as f64;
        (self.counts[index] as f64 + 1.0) / (self.total as f64 + k)
    }

    pub fn sample(&self, rng: &mut StdRng) -> usize {
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        for index in 0..self.counts.len() {
            cumulative += self.pmf(index);
            if u < cumulative {
                return index;
            }
        }
        self.counts.len() - 1
    }
}
