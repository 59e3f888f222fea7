//! Shipped fields: molecular Coulomb potentials, lifted one-body vector
//! potentials, the constant magnetic field in the plane and a smooth bump.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::action::{FieldSpec, ScalarFn, VectorFn};
use crate::error::{domain, Error, Result};
use crate::kato::{Integrand, QuadSpec, RadialProfile};
use crate::quadrature::{gl_panel, graded_to_zero};

/// Cap on `|V|` used by [`coulomb_potential`] until an experiment sets its own.
pub const DEFAULT_COULOMB_CAP: f64 = 1e8;

/// Cap `dt^{-1/2}` on `|V|` for a time step `dt`.
pub fn coulomb_cap(dt: f64) -> f64 {
    dt.powf(-0.5)
}

/// `n` electrons and `l` nuclei at positions `R_j` with charges `Z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    n: usize,
    nuclei: Vec<[f64; 3]>,
    charges: Vec<f64>,
}

impl ParticleConfig {
    pub fn new(n: usize, nuclei: Vec<[f64; 3]>, charges: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return domain("at least one electron is required");
        }
        if nuclei.len() != charges.len() {
            return domain(format!(
                "{} nuclei but {} charges",
                nuclei.len(),
                charges.len()
            ));
        }
        if charges.iter().any(|z| !(*z >= 0.0 && z.is_finite())) {
            return domain("nuclear charges must be finite and non-negative");
        }
        for i in 0..nuclei.len() {
            for j in 0..i {
                if nuclei[i] == nuclei[j] {
                    return domain(format!("nuclei {j} and {i} coincide"));
                }
            }
        }
        Ok(Self { n, nuclei, charges })
    }

    pub fn electrons(&self) -> usize {
        self.n
    }

    pub fn nuclei(&self) -> &[[f64; 3]] {
        &self.nuclei
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }
}

fn dist3(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `V(x) = -Σ_i Σ_j Z_j/|x_i - R_j| + Σ_{i<j} 1/|x_i - x_j|` on `ℝ^{3n}`.
pub fn coulomb_potential(config: &ParticleConfig) -> Result<FieldSpec> {
    let cfg = config.clone();
    let n = cfg.n;
    let v = move |x: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            let xi = &x[3 * i..3 * i + 3];
            for (r, z) in cfg.nuclei.iter().zip(&cfg.charges) {
                acc -= z / dist3(xi, r);
            }
            for j in i + 1..n {
                acc += 1.0 / dist3(xi, &x[3 * j..3 * j + 3]);
            }
        }
        acc
    };
    let mut candidates = vec![vec![0.0; 3 * n]];
    for r in &config.nuclei {
        let c: Vec<f64> = (0..n).flat_map(|_| r.iter().copied()).collect();
        if !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    let mut field = FieldSpec::zero(3 * n)?
        .named("coulomb")
        .with_scalar_potential(v)
        .with_v_cap(DEFAULT_COULOMB_CAP)?
        .with_candidates(candidates)?
        .with_note("V is in the β-Kato class for every β in (0,1)");
    if n == 1 && !config.nuclei.is_empty() {
        // all one-body terms are ≤ 0, so |V| is the sum of the radial parts
        let parts = config
            .nuclei
            .iter()
            .zip(&config.charges)
            .map(|(r, &z)| Integrand::radial(3, r.to_vec(), move |s| -z / s, vec![]))
            .collect::<Result<Vec<_>>>()?;
        let profile = if parts.len() == 1 {
            parts.into_iter().next().expect("one part")
        } else {
            Integrand::sum(parts)?
        };
        field = field.with_v_profile(profile);
    }
    Ok(field)
}

/// `A = Σ_i a∘π_i` on `ℝ^{3n}`: block `i` of `A(x)` is `a(x_i)`.
pub fn lift_single_particle(
    a: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    div_a: Option<ScalarFn>,
    n: usize,
) -> Result<FieldSpec> {
    if n == 0 {
        return domain("lift needs at least one particle");
    }
    let a: VectorFn = Arc::new(a);
    let lifted = move |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            a(&x[3 * i..3 * i + 3], &mut out[3 * i..3 * i + 3]);
        }
    };
    let base = FieldSpec::zero(3 * n)?.named(format!("lift{n}"));
    Ok(match div_a {
        Some(d) => base.with_vector_potential(lifted, move |x: &[f64]| {
            (0..n).map(|i| d(&x[3 * i..3 * i + 3])).sum()
        }),
        None => base.with_solenoidal_potential(lifted),
    })
}

/// Symmetric gauge `A(x) = (-B x₂/2, B x₁/2)` of a constant field of strength `B`.
///
/// `|A|^{2q}` grows at infinity, so the field is Kato only on bounded windows.
pub fn constant_field_2d(b: f64) -> Result<FieldSpec> {
    if !b.is_finite() {
        return domain("field strength must be finite");
    }
    let mut field = FieldSpec::zero(2)?
        .named("constant_field_2d")
        .with_solenoidal_potential(move |x, o| {
            o[0] = -0.5 * b * x[1];
            o[1] = 0.5 * b * x[0];
        })
        .with_a_norm_profile(Integrand::radial(2, vec![0.0, 0.0], move |r| 0.5 * b.abs() * r, vec![])?)
        .with_note("|A|^{2q} is only locally Kato; suprema are taken over a bounded window");
    field.meta_mut().locally_kato_only = true;
    Ok(field)
}

/// Maximiser `ρ* = (√6 - √2)/2` of `h(ρ) = ρ exp(-ρ²/(1-ρ²))`.
const BUMP_RHO_STAR: f64 = 0.517_638_090_205_041_5;

fn bump_h(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        rho * (-rho * rho / (1.0 - rho * rho)).exp()
    }
}

fn bump_h_max() -> f64 {
    BUMP_RHO_STAR * (-BUMP_RHO_STAR / SQRT_2).exp()
}

/// Compactly supported rotational field `A(x) = c·exp(-ρ²/(1-ρ²))·(-x₂, x₁, 0, …)`, `ρ = |x|/R`.
///
/// `div A ≡ 0` and `max |A| = amplitude` (attained on the circle `ρ = ρ*` of the `x₁x₂`-plane).
pub fn smooth_bump(amplitude: f64, radius: f64, dim: usize) -> Result<FieldSpec> {
    if !(radius > 0.0 && radius.is_finite()) {
        return domain(format!("bump radius must be positive, got {radius}"));
    }
    if dim < 2 {
        return domain("a rotational bump needs at least two dimensions");
    }
    if !amplitude.is_finite() {
        return domain("bump amplitude must be finite");
    }
    let c = amplitude / (bump_h_max() * radius);
    let r2max = radius * radius;
    let a = move |x: &[f64], o: &mut [f64]| {
        o.fill(0.0);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < r2max {
            let p2 = r2 / r2max;
            let w = c * (-p2 / (1.0 - p2)).exp();
            o[0] = -w * x[1];
            o[1] = w * x[0];
        }
    };
    let candidates: Vec<Vec<f64>> = (0..31)
        .map(|i| {
            let mut z = vec![0.0; dim];
            z[0] = 1.5 * radius * i as f64 / 30.0;
            z
        })
        .collect();
    let mut field = FieldSpec::zero(dim)?
        .named("smooth_bump")
        .with_solenoidal_potential(a)
        .with_candidates(candidates)?;
    if dim == 2 {
        let hmax = bump_h_max();
        let amp = amplitude.abs();
        field = field.with_a_norm_profile(Integrand::radial(
            2,
            vec![0.0, 0.0],
            move |r| amp * bump_h(r / radius) / hmax,
            vec![radius],
        )?);
    }
    Ok(field)
}

/// `A ≡ c`.
pub fn constant_vector_potential(c: Vec<f64>) -> Result<FieldSpec> {
    let d = c.len();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cc = c.clone();
    Ok(FieldSpec::zero(d)?
        .named("constant_a")
        .with_solenoidal_potential(move |_, o| o.copy_from_slice(&cc))
        .with_a_norm_profile(Integrand::constant(d, norm)))
}

/// `V ≡ c`.
pub fn constant_potential(dim: usize, c: f64) -> Result<FieldSpec> {
    Ok(FieldSpec::zero(dim)?
        .named("constant_v")
        .with_scalar_potential(move |_| c)
        .with_v_profile(Integrand::constant(dim, c)))
}

/// Splitting `f = f·1_{|f|>c} + f·1_{|f|≤c}` at a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub threshold: f64,
    /// `‖f·1_{|f|>c}‖_{L^s}`; `+∞` when the integral diverges.
    pub ls_norm: f64,
    /// Largest `|f|` on `{|f| ≤ c}` over the scan and the crossing radii.
    pub linf_bound: f64,
    pub s: f64,
    /// `∫|f|^s` accumulated before divergence was detected.
    pub partial: Option<f64>,
}

/// Radial scan used to locate `{|g| > c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScan {
    pub radius: f64,
    pub points: usize,
}

impl Default for SplitScan {
    fn default() -> Self {
        Self {
            radius: 100.0,
            points: 20_000,
        }
    }
}

/// `L^s + L^∞` split of a radial integrand.
pub fn lq_split_norm(
    f: &Integrand,
    s: f64,
    threshold: f64,
    scan: SplitScan,
    quad: &QuadSpec,
) -> Result<SplitReport> {
    if !(s >= 1.0 && s.is_finite()) {
        return domain(format!("exponent s must be ≥ 1, got {s}"));
    }
    if !(threshold >= 0.0) {
        return domain("threshold must be non-negative");
    }
    let Integrand::Radial { dim, profile } = f else {
        return domain("the L^s split is implemented for radial integrands");
    };
    let dim = *dim;
    let above = |r: f64| profile.g(r).abs() > threshold;

    // log-spaced scan so singular behaviour near 0 is seen
    let r_min = scan.radius * 1e-9;
    let ratio = (scan.radius / r_min).powf(1.0 / (scan.points - 1) as f64);
    let radii: Vec<f64> = (0..scan.points).map(|i| r_min * ratio.powi(i as i32)).collect();
    let mut linf: f64 = 0.0;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut start = if above(radii[0]) { Some(0.0) } else { None };
    for w in radii.windows(2) {
        let g = profile.g(w[1]).abs();
        if g <= threshold {
            linf = linf.max(g);
        }
        match (start, above(w[0]), above(w[1])) {
            (None, false, true) => {
                let b = bisect(&above, w[0], w[1], false);
                linf = linf.max(profile.g(b).abs().min(threshold));
                start = Some(b);
            }
            (Some(a), true, false) => {
                let b = bisect(&above, w[0], w[1], true);
                linf = linf.max(profile.g(b).abs().min(threshold));
                intervals.push((a, b));
                start = None;
            }
            _ => {}
        }
    }
    if profile.g(radii[0]).abs() <= threshold {
        linf = linf.max(profile.g(radii[0]).abs());
    }
    if start.is_some() {
        return domain(format!(
            "|f| exceeds the threshold up to the scan radius {}",
            scan.radius
        ));
    }

    let area = 2.0 * PI.powf(dim as f64 / 2.0) / libm::tgamma(dim as f64 / 2.0);
    let mut integrand = |r: f64| -> Result<f64> {
        let g = profile.g(r).abs();
        if g <= threshold {
            return Ok(0.0);
        }
        Ok(area * r.powi(dim as i32 - 1) * g.powf(s))
    };
    let ctx = "L^s norm of the unbounded part";
    let mut total = 0.0;
    for (a, b) in intervals {
        let res = quad.doubling.run(
            |n| {
                if a == 0.0 {
                    graded_to_zero(&mut integrand, b, n, ctx)
                } else {
                    gl_panel(&mut integrand, a, b, n)
                }
            },
            ctx,
        );
        match res {
            Ok(c) => total += c.value,
            Err(Error::Divergent { partial, .. }) => {
                return Ok(SplitReport {
                    threshold,
                    ls_norm: f64::INFINITY,
                    linf_bound: linf,
                    s,
                    partial: Some(total + partial),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SplitReport {
        threshold,
        ls_norm: total.powf(1.0 / s),
        linf_bound: linf,
        s,
        partial: None,
    })
}

fn bisect(above: &impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, lo_above: bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Radial profile of `|A|` for the two-dimensional bump, exposed for oracle tests.
pub fn smooth_bump_profile(amplitude: f64, radius: f64) -> RadialProfile {
    let hmax = bump_h_max();
    RadialProfile::new(
        vec![0.0, 0.0],
        Arc::new(move |r| amplitude.abs() * bump_h(r / radius) / hmax),
        vec![radius],
    )
}
