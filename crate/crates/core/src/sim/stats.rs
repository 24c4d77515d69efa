use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Count, mean, variance and range of a stream of values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
    pub min: f64,
    pub max: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            libm::sqrt(self.variance() / self.count as f64)
        }
    }
}

fn nearest_rank(n: usize, zeta: f64) -> usize {
    // The guard keeps 0.99 * 100 = 99.00000000000001 at rank 99.
    let r = libm::ceil(zeta * n as f64 - 1e-9) as usize;
    r.clamp(1, n)
}

/// Nearest-rank percentile: the ⌈ζn⌉-th smallest sample.
pub fn empirical_percentile(samples: &[f64], zeta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::arg(alloc::format!(
            "percentile level must lie in (0, 1], got {zeta}"
        )));
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[nearest_rank(sorted.len(), zeta) - 1])
}

/// Queuing delays stored compactly: most SRs never wait.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelaySamples {
    pub zeros: u64,
    /// Strictly positive delays, sorted ascending once the run finishes.
    pub positive: Vec<f64>,
}

impl DelaySamples {
    pub fn push(&mut self, x: f64) {
        if x > 0.0 {
            self.positive.push(x);
        } else {
            self.zeros += 1;
        }
    }

    pub fn len(&self) -> u64 {
        self.zeros + self.positive.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn finish(&mut self) {
        self.positive.sort_by(f64::total_cmp);
    }

    /// Nearest-rank percentile.
    pub fn percentile(&self, zeta: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySamples);
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::arg(alloc::format!(
                "percentile level must lie in (0, 1], got {zeta}"
            )));
        }
        let r = nearest_rank(self.len() as usize, zeta) as u64;
        if r <= self.zeros {
            Ok(0.0)
        } else {
            Ok(self.positive[(r - self.zeros - 1) as usize])
        }
    }

    /// Empirical Pr(t₂ ≤ t).
    pub fn cdf(&self, t: f64) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let below = if t < 0.0 {
            0
        } else {
            self.zeros + self.positive.partition_point(|x| *x <= t) as u64
        };
        below as f64 / self.len() as f64
    }

    /// Empirical Pr(t₂ < t).
    pub fn fraction_below(&self, t: f64) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let below = if t <= 0.0 {
            0
        } else {
            self.zeros + self.positive.partition_point(|x| *x < t) as u64
        };
        below as f64 / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.positive.iter().sum::<f64>() / self.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nearest_rank_examples() {
        assert_eq!(
            empirical_percentile(&[0.0, 0.0, 0.0, 10.0], 0.5).unwrap(),
            0.0
        );
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_percentile(&v, 0.99).unwrap(), 99.0);
        assert_eq!(empirical_percentile(&[3.5], 0.01).unwrap(), 3.5);
        assert_eq!(empirical_percentile(&[3.5], 0.999).unwrap(), 3.5);
        assert!(matches!(
            empirical_percentile(&[], 0.5),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn compact_samples_agree_with_plain() {
        let raw = vec![0.0, 2.0, 0.0, 1.0, 5.0, 0.0, 0.5, 0.0, 0.0, 3.0];
        let mut d = DelaySamples::default();
        raw.iter().for_each(|x| d.push(*x));
        d.finish();
        for &z in &[0.1, 0.5, 0.6, 0.7, 0.9, 0.99, 1.0] {
            assert_eq!(
                d.percentile(z).unwrap(),
                empirical_percentile(&raw, z).unwrap(),
                "{z}"
            );
        }
        assert_eq!(d.fraction_below(1.0), 0.6);
        assert_eq!(d.cdf(1.0), 0.7);
        assert_eq!(d.cdf(0.0), 0.5);
    }

    #[test]
    fn running_stats() {
        let mut s = RunningStats::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            s.push(x);
        }
        assert_eq!(s.mean, 2.5);
        assert!((s.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!((s.min, s.max), (1.0, 4.0));
    }
}
