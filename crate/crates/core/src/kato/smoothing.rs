//! Gaussian smoothing `E_z|f(B_s)| = (2πs)^{-d/2} ∫ e^{-|z-y|²/(2s)} |f(y)| dy`.

use std::f64::consts::PI;

use super::integrand::{Integrand, RadialProfile};
use crate::error::{domain, Error, Result};
use crate::quadrature::{gauss_hermite, gauss_legendre, gl_panel, graded_to_zero, Doubling};

/// Quadrature controls for the smoothing and Kato integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Gauss–Legendre node doubling for radial and time integrals.
    pub doubling: Doubling,
    /// Radial window `|r - |z-c|| ≤ cutoff·√s`.
    pub radial_cutoff: f64,
    /// Initial Gauss–Hermite nodes per axis for general integrands.
    pub hermite_start: usize,
    /// Upper bound on the tensor Gauss–Hermite grid size.
    pub hermite_max_points: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            doubling: Doubling::default(),
            radial_cutoff: 12.0,
            hermite_start: 8,
            hermite_max_points: 1 << 22,
        }
    }
}

/// Smoothing of `|f|` at `z` after time `s`.
pub fn gaussian_expectation(f: &Integrand, z: &[f64], s: f64, quad: &QuadSpec) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!("smoothing time must be positive, got {s}"));
    }
    if z.len() != f.dim() {
        return domain(format!(
            "point in ℝ^{} for an integrand on ℝ^{}",
            z.len(),
            f.dim()
        ));
    }
    match f {
        Integrand::Radial { dim, profile } => radial(*dim, profile, z, s, quad),
        Integrand::Sum { parts, .. } => {
            let mut acc = 0.0;
            for p in parts {
                acc += gaussian_expectation(p, z, s, quad)?;
            }
            Ok(acc)
        }
        Integrand::General { .. } => hermite(f, z, s, quad),
    }
}

/// `|S^{d-2}| = 2π^{(d-1)/2} / Γ((d-1)/2)`.
fn sphere_area(dim_minus_one: usize) -> f64 {
    let k = dim_minus_one as f64;
    2.0 * PI.powf(k / 2.0) / libm::tgamma(k / 2.0)
}

/// `K_d(λ) = ∫_0^π e^{-λ(1-cos φ)} sin^{d-2} φ dφ`.
pub(crate) fn angular_kernel(dim: usize, lambda: f64) -> f64 {
    let p = (dim - 2) as i32;
    if dim == 2 {
        return PI * scaled_i0(lambda.max(0.0));
    }
    if dim == 3 {
        return if lambda < 1e-12 {
            2.0 - 2.0 * lambda
        } else {
            -libm::expm1(-2.0 * lambda) / lambda
        };
    }
    if lambda == 0.0 {
        let k = dim as f64;
        return PI.sqrt() * libm::tgamma((k - 1.0) / 2.0) / libm::tgamma(k / 2.0);
    }
    let upper = if lambda > 0.0 {
        PI.min(12.0 / lambda.sqrt())
    } else {
        PI
    };
    let rule = gauss_legendre(24);
    let mut acc = 0.0;
    let panels = 3;
    let h = upper / panels as f64;
    for j in 0..panels {
        let mid = (j as f64 + 0.5) * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let phi = mid + 0.5 * h * x;
            let half = (0.5 * phi).sin();
            acc += w * (-2.0 * lambda * half * half).exp() * phi.sin().powi(p);
        }
    }
    acc * 0.5 * h
}

/// `e^{-x} I_0(x)` for `x ≥ 0`.
fn scaled_i0(x: f64) -> f64 {
    if x <= 15.0 {
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // asymptotic series, truncated at its smallest term
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        for k in 1..60 {
            let m = (2 * k - 1) as f64;
            let next = term * m * m / (8.0 * k as f64 * x);
            if next >= term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

fn radial(dim: usize, profile: &RadialProfile, z: &[f64], s: f64, quad: &QuadSpec) -> Result<f64> {
    let a = profile.radius_of(z);
    let sigma = s.sqrt();
    let lo = (a - quad.radial_cutoff * sigma).max(0.0);
    let hi = a + quad.radial_cutoff * sigma;
    let mut cuts = vec![lo, hi];
    if a > lo && a < hi {
        cuts.push(a);
    }
    cuts.extend(profile.breakpoints().iter().copied().filter(|b| *b > lo && *b < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // no panel wider than 2σ, so the Gaussian factor is well resolved on each
    let mut edges = vec![cuts[0]];
    for w in cuts.windows(2) {
        let pieces = ((w[1] - w[0]) / (2.0 * sigma)).ceil().max(1.0) as usize;
        for j in 1..=pieces {
            edges.push(w[0] + (w[1] - w[0]) * j as f64 / pieces as f64);
        }
    }

    let pref = if dim == 1 {
        1.0 / (2.0 * PI * s).sqrt()
    } else {
        sphere_area(dim - 1) * (2.0 * PI * s).powf(-(dim as f64) / 2.0)
    };
    let two_s = 2.0 * s;
    let mut integrand = |r: f64| -> Result<f64> {
        let g = profile.g(r).abs();
        if g == 0.0 {
            return Ok(0.0);
        }
        if !g.is_finite() {
            return Err(Error::NonFinite {
                what: "radial profile",
                point: vec![r],
            });
        }
        let v = if dim == 1 {
            g * ((-(r - a) * (r - a) / two_s).exp() + (-(r + a) * (r + a) / two_s).exp())
        } else {
            r.powi(dim as i32 - 1)
                * g
                * (-(r - a) * (r - a) / two_s).exp()
                * angular_kernel(dim, r * a / s)
        };
        Ok(pref * v)
    };
    let ctx = format!("radial smoothing at |z-c|={a:.6e}, s={s:.6e}");
    let conv = quad.doubling.run(
        |n| {
            let mut acc = 0.0;
            for (j, w) in edges.windows(2).enumerate() {
                if j == 0 && w[0] == 0.0 {
                    acc += graded_to_zero(&mut integrand, w[1], n, &ctx)?;
                } else {
                    acc += gl_panel(&mut integrand, w[0], w[1], n)?;
                }
            }
            Ok(acc)
        },
        &ctx,
    )?;
    Ok(conv.value)
}

fn hermite(f: &Integrand, z: &[f64], s: f64, quad: &QuadSpec) -> Result<f64> {
    let d = z.len();
    let max_per_axis = (quad.hermite_max_points as f64).powf(1.0 / d as f64).floor() as usize;
    let scale = (2.0 * s).sqrt();
    let norm = PI.powf(-(d as f64) / 2.0);
    let doubling = Doubling {
        start: quad.hermite_start.min(max_per_axis).max(1),
        max: max_per_axis,
        ..quad.doubling
    };
    let ctx = format!("tensor Gauss-Hermite smoothing in ℝ^{d}, s={s:.6e}");
    let conv = doubling.run(
        |n| {
            let rule = gauss_hermite(n);
            let mut idx = vec![0usize; d];
            let mut y = vec![0.0; d];
            let mut acc = 0.0;
            loop {
                let mut w = norm;
                for j in 0..d {
                    y[j] = z[j] + scale * rule.nodes[idx[j]];
                    w *= rule.weights[idx[j]];
                }
                let v = f.eval(&y).abs();
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: "integrand",
                        point: y.clone(),
                    });
                }
                acc += w * v;
                // odometer over the tensor grid
                let mut j = 0;
                loop {
                    if j == d {
                        return Ok(acc);
                    }
                    idx[j] += 1;
                    if idx[j] < n {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
            }
        },
        &ctx,
    )?;
    Ok(conv.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `∫_0^π e^{-λ(1-cos φ)} dφ` by the midpoint rule.
    fn k2_midpoint(lambda: f64) -> f64 {
        let n = 400_000;
        let h = PI / n as f64;
        (0..n)
            .map(|i| (-lambda * (1.0 - ((i as f64 + 0.5) * h).cos())).exp())
            .sum::<f64>()
            * h
    }

    #[test]
    fn angular_kernel_matches_closed_forms() {
        for &l in &[0.0, 1e-6, 0.3, 2.0, 14.9, 15.1, 60.0, 400.0] {
            let k2 = angular_kernel(2, l);
            let m = k2_midpoint(l);
            assert!((k2 - m).abs() < 1e-11 * k2, "λ={l}: {k2} vs {m}");
        }
        assert!((angular_kernel(2, 0.0) - PI).abs() < 1e-14);
        assert!((angular_kernel(3, 0.0) - 2.0).abs() < 1e-14);
        // K_4(0) = ∫ sin² = π/2; numeric branch against a plain Riemann sum
        assert!((angular_kernel(4, 0.0) - PI / 2.0).abs() < 1e-13);
        let l = 0.7;
        let n = 200_000;
        let h = PI / n as f64;
        let riemann: f64 = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) * h;
                (-l * (1.0 - p.cos())).exp() * p.sin().powi(3)
            })
            .sum::<f64>()
            * h;
        assert!((angular_kernel(5, l) - riemann).abs() < 1e-9);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
