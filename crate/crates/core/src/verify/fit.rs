use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};

/// Minimum number of distinct distances for a Hölder fit.
pub const MIN_SCALES: usize = 4;
/// Resamples used by every bootstrap in this module.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Pairs `(x, y)` whose distances span several scales.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    distances: Vec<f64>,
}

impl PairSet {
    /// `x = b + δ_j e/2`, `y = b - δ_j e/2` with `δ_j = δ₀ 2^{-j}` around every base point.
    pub fn ladder(bases: &[Vec<f64>], direction: &[f64], delta0: f64, levels: usize) -> Result<Self> {
        if bases.is_empty() {
            return domain("pair ladder needs at least one base point");
        }
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return domain(format!("δ₀ must be positive, got {delta0}"));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return domain("ladder direction must be a non-zero vector");
        }
        let e: Vec<f64> = direction.iter().map(|v| v / norm).collect();
        let mut pairs = Vec::with_capacity(bases.len() * levels);
        for j in 0..levels {
            let delta = delta0 * 0.5f64.powi(j as i32);
            for b in bases {
                if b.len() != e.len() {
                    return domain("base point and direction differ in dimension");
                }
                let x = b.iter().zip(&e).map(|(b, e)| b + 0.5 * delta * e).collect();
                let y = b.iter().zip(&e).map(|(b, e)| b - 0.5 * delta * e).collect();
                pairs.push((x, y));
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn from_pairs(pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let mut distances = Vec::with_capacity(pairs.len());
        for (x, y) in &pairs {
            if x.len() != y.len() {
                return domain("pair points differ in dimension");
            }
            let d = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if !(d > 0.0 && d.is_finite()) {
                return domain(format!("pair {x:?}, {y:?} has no positive finite distance"));
            }
            distances.push(d);
        }
        let set = Self { pairs, distances };
        let scales = set.scales(&vec![true; set.len()]);
        if scales < MIN_SCALES {
            return Err(Error::InsufficientScales {
                usable: scales,
                required: MIN_SCALES,
            });
        }
        Ok(set)
    }

    pub fn pairs(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.pairs
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn scales(&self, keep: &[bool]) -> usize {
        distinct(self.distances.iter().zip(keep).filter(|(_, k)| **k).map(|(d, _)| *d))
    }
}

/// Number of distinct values up to a relative `1e-9`.
fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mut n = 0;
    let mut last = f64::NAN;
    for x in v {
        if !((x - last).abs() <= 1e-9 * x.abs()) {
            n += 1;
            last = x;
        }
    }
    n
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LineFit { slope, intercept, r2 })
}

/// Least squares of `ln y` against `ln x` over the entries with `x, y > 0`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    least_squares(&lx, &ly)
}

/// Percentile interval `[2.5%, 97.5%]` of bootstrap replicates.
pub fn percentile_interval(mut reps: Vec<f64>) -> (f64, f64) {
    reps.retain(|v| v.is_finite());
    if reps.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    reps.sort_by(f64::total_cmp);
    let at = |p: f64| reps[((p * (reps.len() - 1) as f64).round() as usize).min(reps.len() - 1)];
    (at(0.025), at(0.975))
}

/// Empirical Hölder exponent of a function sampled on a [`PairSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    /// Slope of `ln|Δf|` against `ln|x-y|`.
    pub beta_hat: f64,
    /// `exp(intercept)`.
    pub c_hat: f64,
    pub r2: f64,
    /// 95% pair-bootstrap interval for `beta_hat`.
    pub beta_ci: (f64, f64),
    pub used: usize,
    /// Pairs with `Δf = 0`, left out of the log fit.
    pub excluded: usize,
    pub scales: usize,
    /// `max |Δf| / |x-y|^β` for the requested `β`.
    pub max_quotient: Option<(f64, f64)>,
}

/// Fits `|Δf| ≈ c |x-y|^β` from the differences `values[i] = f(x_i) - f(y_i)`.
pub fn holder_fit(pairs: &PairSet, values: &[f64], quotient_beta: Option<f64>, seed: u64) -> Result<HolderFit> {
    if values.len() != pairs.len() {
        return domain(format!("{} values for {} pairs", values.len(), pairs.len()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "pair difference",
            point: pairs.pairs[i].0.clone(),
        });
    }
    let keep: Vec<bool> = values.iter().map(|v| *v != 0.0).collect();
    let used = keep.iter().filter(|k| **k).count();
    let scales = pairs.scales(&keep);
    if scales < MIN_SCALES {
        return Err(Error::InsufficientScales {
            usable: scales,
            required: MIN_SCALES,
        });
    }
    let idx: Vec<usize> = (0..values.len()).filter(|i| keep[*i]).collect();
    let fit_on = |ids: &[usize]| {
        let xs: Vec<f64> = ids.iter().map(|&i| pairs.distances[i]).collect();
        let ys: Vec<f64> = ids.iter().map(|&i| values[i].abs()).collect();
        loglog_fit(&xs, &ys)
    };
    let fit = fit_on(&idx).expect("at least four distinct scales");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let ids: Vec<usize> = (0..idx.len()).map(|_| idx[rng.random_range(0..idx.len())]).collect();
            fit_on(&ids).map_or(f64::NAN, |f| f.slope)
        })
        .collect();
    let max_quotient = quotient_beta.map(|b| {
        let q = values
            .iter()
            .zip(&pairs.distances)
            .map(|(v, d)| v.abs() / d.powf(b))
            .fold(0.0, f64::max);
        (b, q)
    });
    Ok(HolderFit {
        beta_hat: fit.slope,
        c_hat: fit.intercept.exp(),
        r2: fit.r2,
        beta_ci: percentile_interval(reps),
        used,
        excluded: values.len() - used,
        scales,
        max_quotient,
    })
}

/// Block bootstrap of a log-log slope fitted to cell means.
///
/// Each cell's samples are cut into `blocks` contiguous blocks; a replicate
/// redraws the blocks of every cell with replacement and refits the slope.
pub fn block_bootstrap_slope(xs: &[f64], cells: &[&[f64]], blocks: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block_sums: Vec<Vec<(f64, usize)>> = cells
        .iter()
        .map(|s| {
            let b = blocks.clamp(1, s.len().max(1));
            (0..b)
                .map(|k| {
                    let (lo, hi) = (k * s.len() / b, (k + 1) * s.len() / b);
                    (s[lo..hi].iter().sum::<f64>(), hi - lo)
                })
                .collect()
        })
        .collect();
    let reps: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let ys: Vec<f64> = block_sums
                .iter()
                .map(|bs| {
                    let (mut sum, mut n) = (0.0, 0);
                    for _ in 0..bs.len() {
                        let (s, c) = bs[rng.random_range(0..bs.len())];
                        sum += s;
                        n += c;
                    }
                    if n == 0 {
                        f64::NAN
                    } else {
                        sum / n as f64
                    }
                })
                .collect();
            loglog_fit(xs, &ys).map_or(f64::NAN, |f| f.slope)
        })
        .collect();
    percentile_interval(reps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.5 * x).collect();
        let f = least_squares(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 1.5).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn distinct_counts_scales() {
        assert_eq!(distinct([1.0, 1.0 + 1e-12, 2.0, 0.5].into_iter()), 3);
    }

    #[test]
    fn ladder_shape() {
        let p = PairSet::ladder(&[vec![0.0, 0.0], vec![1.0, 1.0]], &[3.0, 4.0], 1.0, 4).unwrap();
        assert_eq!(p.len(), 8);
        assert!((p.distances()[7] - 0.125).abs() < 1e-15);
        assert!(PairSet::ladder(&[vec![0.0]], &[1.0], 1.0, 3).is_err());
    }

    #[test]
    fn interval_of_constant_replicates() {
        assert_eq!(percentile_interval(vec![2.0; 10]), (2.0, 2.0));
    }
}
