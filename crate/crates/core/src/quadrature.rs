//! Gauss rules, composite panels and node doubling.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Nodes and weights of a Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type Cache = Mutex<HashMap<(u8, usize), Arc<Rule>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: u8, n: usize, build: impl FnOnce(NonZeroUsize) -> Vec<(f64, f64)>) -> Arc<Rule> {
    let n = n.max(1);
    if let Some(r) = cache().lock().expect("rule cache poisoned").get(&(kind, n)) {
        return r.clone();
    }
    let pairs = build(NonZeroUsize::new(n).expect("n >= 1"));
    let rule = Arc::new(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    });
    cache()
        .lock()
        .expect("rule cache poisoned")
        .entry((kind, n))
        .or_insert(rule)
        .clone()
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    cached(0, n, |n| GaussLegendre::new(n).as_node_weight_pairs().to_vec())
}

/// Gauss–Hermite rule for the weight `exp(-x²)` on the real line.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    cached(1, n, |n| GaussHermite::new(n).as_node_weight_pairs().to_vec())
}

/// `∫_a^b f` with an `n`-point Gauss–Legendre rule.
pub fn gl_panel<F>(f: &mut F, a: f64, b: f64, n: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let rule = gauss_legendre(n);
    let (half, mid) = (0.5 * (b - a), 0.5 * (b + a));
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * f(mid + half * x)?;
    }
    Ok(acc * half)
}

/// Sum of `n`-point panels over consecutive breakpoints.
pub fn gl_composite<F>(f: &mut F, breaks: &[f64], n: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            acc += gl_panel(f, w[0], w[1], n)?;
        }
    }
    Ok(acc)
}

/// Panels are halved toward 0 until the geometric tail estimate is negligible.
const GRADED_MAX_DEPTH: usize = 100;
const GRADED_TAIL_TOL: f64 = 1e-11;
/// Consecutive panel ratios at or above this are read as non-integrable behaviour at 0.
const GRADED_DIVERGENT_RATIO: f64 = 0.99;
const GRADED_DIVERGENT_RUN: usize = 24;

/// `∫_0^w f` on geometrically graded panels `[w 2^{-j-1}, w 2^{-j}]`.
///
/// Handles integrable endpoint singularities. When panel contributions stop
/// shrinking the integral is reported as divergent with its partial value.
pub fn graded_to_zero<F>(f: &mut F, w: f64, n: usize, context: &str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut run = 0;
    let mut hi = w;
    let mut ratio = f64::NAN;
    let mut last_ratio = f64::NAN;
    let mut stable = 0;
    for j in 0..GRADED_MAX_DEPTH {
        let lo = 0.5 * hi;
        let c = gl_panel(f, lo, hi, n)?;
        total += c;
        hi = lo;
        if j > 0 {
            ratio = if prev == 0.0 {
                if c == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (c / prev).abs()
            };
            if ratio >= GRADED_DIVERGENT_RATIO {
                run += 1;
                if run >= GRADED_DIVERGENT_RUN {
                    return Err(Error::Divergent {
                        context: context.to_string(),
                        partial: total,
                    });
                }
            } else {
                run = 0;
                let tail = if ratio == 0.0 { 0.0 } else { c.abs() * ratio / (1.0 - ratio) };
                if j >= 3 && tail <= GRADED_TAIL_TOL * total.abs().max(f64::MIN_POSITIVE) {
                    return Ok(total);
                }
                // power-law behaviour at 0 gives an exactly geometric tail: sum it
                if (ratio - last_ratio).abs() <= 1e-7 * ratio {
                    stable += 1;
                } else {
                    stable = 0;
                }
                if stable >= 3 && tail <= 1e-3 * total.abs() {
                    return Ok(total + c * ratio / (1.0 - ratio));
                }
            }
            last_ratio = ratio;
        }
        if c == 0.0 && prev == 0.0 && j >= 3 {
            return Ok(total);
        }
        prev = c;
    }
    if ratio >= GRADED_DIVERGENT_RATIO {
        Err(Error::Divergent {
            context: context.to_string(),
            partial: total,
        })
    } else {
        Err(Error::Quadrature {
            context: format!("{context}: graded panels did not settle"),
            coarse: total - prev,
            fine: total,
            tol: GRADED_TAIL_TOL,
        })
    }
}

/// Node-doubling acceptance rule shared by every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doubling {
    pub start: usize,
    pub max: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Doubling {
    fn default() -> Self {
        Self {
            start: 8,
            max: 256,
            rel_tol: 1e-6,
            abs_tol: 1e-15,
        }
    }
}

/// Result of a converged doubling sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converged {
    pub value: f64,
    /// `|fine - coarse|` of the accepted pair.
    pub error: f64,
    pub nodes: usize,
}

impl Doubling {
    /// Evaluates `f(n)`, `f(2n)`, ... until two successive values agree.
    pub fn run<F>(&self, mut f: F, context: &str) -> Result<Converged>
    where
        F: FnMut(usize) -> Result<f64>,
    {
        let mut n = self.start.max(1).min(self.max.max(1));
        let mut coarse = f(n)?;
        loop {
            let next = (n * 2).min(self.max);
            if next <= n {
                return Err(Error::Quadrature {
                    context: context.to_string(),
                    coarse,
                    fine: coarse,
                    tol: self.rel_tol,
                });
            }
            let fine = f(next)?;
            let diff = (fine - coarse).abs();
            if diff <= self.rel_tol * fine.abs() || diff <= self.abs_tol {
                return Ok(Converged {
                    value: fine,
                    error: diff,
                    nodes: next,
                });
            }
            if next >= self.max {
                return Err(Error::Quadrature {
                    context: context.to_string(),
                    coarse,
                    fine,
                    tol: self.rel_tol,
                });
            }
            coarse = fine;
            n = next;
        }
    }
}
