//! Monte Carlo estimates and order-independent reductions.

use num_complex::Complex64;
use rayon::prelude::*;

/// A Monte Carlo mean with its standard error and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: Complex64,
    /// `sqrt((var(re) + var(im)) / n)`, with unbiased sample variances.
    pub std_error: f64,
    pub n: u64,
    /// Number of clamped field evaluations behind this estimate.
    pub clamps: u64,
    pub seed: u64,
    pub warning: Option<String>,
}

impl McEstimate {
    pub fn from_real(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        Self {
            mean: Complex64::new(mean, 0.0),
            std_error: std_error(pairwise_sum(&dev), n),
            n: n as u64,
            clamps: 0,
            seed,
            warning: None,
        }
    }

    pub fn from_complex(samples: &[Complex64], seed: u64) -> Self {
        let n = samples.len();
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let mean = Complex64::new(pairwise_sum(&re) / n as f64, pairwise_sum(&im) / n as f64);
        let dev: Vec<f64> = samples.iter().map(|z| (z - mean).norm_sqr()).collect();
        Self {
            mean,
            std_error: std_error(pairwise_sum(&dev), n),
            n: n as u64,
            clamps: 0,
            seed,
            warning: None,
        }
    }

    /// An exactly known value with no sampling error.
    pub fn exact(value: f64, n: u64, seed: u64) -> Self {
        Self {
            mean: Complex64::new(value, 0.0),
            std_error: 0.0,
            n,
            clamps: 0,
            seed,
            warning: None,
        }
    }

    /// Real part of the mean.
    pub fn value(&self) -> f64 {
        self.mean.re
    }

    /// Number of standard errors between the estimate and `expected`.
    pub fn z_score(&self, expected: Complex64) -> f64 {
        let diff = (self.mean - expected).norm();
        if self.std_error == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.std_error
        }
    }

    /// Records clamping and raises a warning when the clamp rate exceeds `max_rate`.
    pub fn with_clamps(mut self, clamps: u64, evaluations: u64, max_rate: f64) -> Self {
        self.clamps = clamps;
        if evaluations > 0 {
            let rate = clamps as f64 / evaluations as f64;
            if rate > max_rate {
                self.warning = Some(format!(
                    "clamp rate {rate:.3e} exceeds threshold {max_rate:.3e} ({clamps} of {evaluations} evaluations)"
                ));
            }
        }
        self
    }
}

fn std_error(sum_sq_dev: f64, n: usize) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    (sum_sq_dev / (n - 1) as f64 / n as f64).sqrt()
}

/// Sum in a fixed binary-tree order; the result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Evaluates `f` for every index in parallel and returns the results in index order.
pub(crate) fn par_indexed<T, S, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map_init(init, f).collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 45.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn estimate_statistics() {
        let e = McEstimate::from_real(&[1.0, 2.0, 3.0, 4.0], 9);
        assert_eq!(e.value(), 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.seed, 9);
        let c = McEstimate::from_complex(&[Complex64::new(1.0, 1.0), Complex64::new(-1.0, -1.0)], 0);
        assert_eq!(c.mean, Complex64::new(0.0, 0.0));
        assert!((c.std_error - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clamp_warning() {
        let e = McEstimate::exact(1.0, 10, 0).with_clamps(5, 100, 0.01);
        assert!(e.warning.is_some());
        let e = McEstimate::exact(1.0, 10, 0).with_clamps(0, 100, 0.01);
        assert!(e.warning.is_none());
    }

    #[test]
    fn par_indexed_preserves_order() {
        let v = par_indexed(1000, || (), |_, i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
