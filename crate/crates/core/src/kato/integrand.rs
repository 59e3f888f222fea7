use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `y ↦ g(|y - center|)`.
#[derive(Clone)]
pub struct RadialProfile {
    center: Vec<f64>,
    g: RadialFn,
    /// Radii where `g` is not smooth (support edges, kinks); quadrature splits there.
    breakpoints: Vec<f64>,
}

impl RadialProfile {
    pub fn new(center: Vec<f64>, g: RadialFn, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.retain(|b| b.is_finite() && *b > 0.0);
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Self {
            center,
            g,
            breakpoints,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        (self.g)(r)
    }

    pub fn radius_of(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("center", &self.center)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

/// A scalar function on `ℝ^d` in the form the Gaussian smoothing routines understand.
#[derive(Clone)]
pub enum Integrand {
    /// Radially symmetric about a centre; integrated with a 1-D radial rule.
    Radial { dim: usize, profile: RadialProfile },
    /// Sum of parts that share one sign, so `|Σ f_i| = Σ |f_i|` and expectations add.
    Sum { dim: usize, parts: Vec<Integrand> },
    /// Anything else; integrated with tensor Gauss–Hermite.
    General { dim: usize, f: ScalarFn },
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrand::Radial { dim, profile } => f
                .debug_struct("Radial")
                .field("dim", dim)
                .field("profile", profile)
                .finish(),
            Integrand::Sum { dim, parts } => f
                .debug_struct("Sum")
                .field("dim", dim)
                .field("parts", parts)
                .finish(),
            Integrand::General { dim, .. } => {
                f.debug_struct("General").field("dim", dim).finish_non_exhaustive()
            }
        }
    }
}

impl Integrand {
    pub fn radial(
        dim: usize,
        center: Vec<f64>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || center.len() != dim {
            return domain(format!(
                "radial integrand needs a centre in ℝ^{dim}, got {} coordinates",
                center.len()
            ));
        }
        Ok(Integrand::Radial {
            dim,
            profile: RadialProfile::new(center, Arc::new(g), breakpoints),
        })
    }

    pub fn general(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Integrand::General {
            dim,
            f: Arc::new(f),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Integrand::Radial {
            dim,
            profile: RadialProfile::new(vec![0.0; dim], Arc::new(move |_| c), vec![]),
        }
    }

    /// Same-sign parts; the caller guarantees the sign condition.
    pub fn sum(parts: Vec<Integrand>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return domain("sum integrand needs at least one part");
        };
        let dim = first.dim();
        if parts.iter().any(|p| p.dim() != dim) {
            return domain("sum integrand parts must share a dimension");
        }
        Ok(Integrand::Sum { dim, parts })
    }

    pub fn dim(&self) -> usize {
        match self {
            Integrand::Radial { dim, .. }
            | Integrand::Sum { dim, .. }
            | Integrand::General { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Integrand::Radial { profile, .. } => profile.g(profile.radius_of(y)),
            Integrand::Sum { parts, .. } => parts.iter().map(|p| p.eval(y)).sum(),
            Integrand::General { f, .. } => f(y),
        }
    }

    /// `|f|^p`, keeping the radial structure where possible.
    pub fn abs_pow(&self, p: f64) -> Self {
        match self {
            Integrand::Radial { dim, profile } => {
                let inner = profile.g.clone();
                Integrand::Radial {
                    dim: *dim,
                    profile: RadialProfile {
                        center: profile.center.clone(),
                        g: Arc::new(move |r| inner(r).abs().powf(p)),
                        breakpoints: profile.breakpoints.clone(),
                    },
                }
            }
            Integrand::Sum { dim, parts } if p == 1.0 => Integrand::Sum {
                dim: *dim,
                parts: parts.iter().map(|q| q.abs_pow(1.0)).collect(),
            },
            other => {
                let inner = other.clone();
                Integrand::general(other.dim(), move |y| inner.eval(y).abs().powf(p))
            }
        }
    }

    /// `c·f`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Integrand::Radial { dim, profile } => {
                let inner = profile.g.clone();
                Integrand::Radial {
                    dim: *dim,
                    profile: RadialProfile {
                        center: profile.center.clone(),
                        g: Arc::new(move |r| c * inner(r)),
                        breakpoints: profile.breakpoints.clone(),
                    },
                }
            }
            Integrand::Sum { dim, parts } => Integrand::Sum {
                dim: *dim,
                parts: parts.iter().map(|q| q.scaled(c)).collect(),
            },
            Integrand::General { dim, f } => {
                let f = f.clone();
                Integrand::general(*dim, move |y| c * f(y))
            }
        }
    }

    /// `f ∘ π_block` on `ℝ^{dim·n_blocks}`, where `π_block` picks one coordinate block.
    pub fn lift(&self, block: usize, n_blocks: usize) -> Result<Self> {
        if block >= n_blocks {
            return domain(format!("block {block} out of range for {n_blocks} blocks"));
        }
        let d = self.dim();
        let inner = self.clone();
        Ok(Integrand::general(d * n_blocks, move |y| {
            inner.eval(&y[block * d..(block + 1) * d])
        }))
    }
}
