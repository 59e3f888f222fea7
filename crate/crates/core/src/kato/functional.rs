use rayon::prelude::*;

use super::integrand::Integrand;
use super::smoothing::{gaussian_expectation, QuadSpec};
use crate::action::FieldSpec;
use crate::error::{domain, Error, Result};
use crate::quadrature::graded_to_zero;

/// Regular lattice of extra sup candidates: `per_axis^d` points in a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub per_axis: usize,
}

impl Lattice {
    pub fn points(&self) -> Vec<Vec<f64>> {
        let d = self.center.len();
        let n = self.per_axis.max(1);
        let step = if n > 1 {
            2.0 * self.half_width / (n - 1) as f64
        } else {
            0.0
        };
        let offset = if n > 1 { self.half_width } else { 0.0 };
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut k| {
                (0..d)
                    .map(|j| {
                        let i = k % n;
                        k /= n;
                        self.center[j] - offset + step * i as f64
                    })
                    .collect()
            })
            .collect()
    }
}

/// Parameters of `sup_z ∫_0^t s^{-α/2} E_z|f(B_s)| ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct KatoQuery {
    pub alpha: f64,
    pub t: f64,
    pub candidates: Vec<Vec<f64>>,
    pub lattice: Option<Lattice>,
    pub quad: QuadSpec,
}

impl KatoQuery {
    pub fn new(alpha: f64, t: f64, candidates: Vec<Vec<f64>>) -> Result<Self> {
        let q = Self {
            alpha,
            t,
            candidates,
            lattice: None,
            quad: QuadSpec::default(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_lattice(mut self, lattice: Lattice) -> Result<Self> {
        self.lattice = Some(lattice);
        self.validate()?;
        Ok(self)
    }

    pub fn with_quad(mut self, quad: QuadSpec) -> Self {
        self.quad = quad;
        self
    }

    /// Same candidates and quadrature with a different `α` and horizon.
    pub fn at(&self, alpha: f64, t: f64) -> Result<Self> {
        let q = Self {
            alpha,
            t,
            ..self.clone()
        };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return domain(format!("α must lie in [0,1], got {}", self.alpha));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return domain(format!("Kato horizon must be positive, got {}", self.t));
        }
        if self.candidates.is_empty() && self.lattice.is_none() {
            return domain("Kato query needs at least one candidate point");
        }
        let d = self
            .candidates
            .first()
            .map(Vec::len)
            .or(self.lattice.as_ref().map(|l| l.center.len()))
            .unwrap_or(0);
        if self.candidates.iter().any(|c| c.len() != d)
            || self.lattice.as_ref().is_some_and(|l| l.center.len() != d)
        {
            return domain("candidate points must share one dimension");
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts = self.candidates.clone();
        if let Some(l) = &self.lattice {
            pts.extend(l.points());
        }
        pts
    }
}

/// Maximum of the Kato integral over the candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct KatoValue {
    pub value: f64,
    pub maximizer: Vec<f64>,
    /// Node-doubling discrepancy at the maximiser.
    pub error_estimate: f64,
    /// Integral at every evaluated point, in candidate order.
    pub per_point: Vec<f64>,
}

/// `∫_0^t s^{-α/2} E_z|f(B_s)| ds`, written as `∫_0^{√t} 2 r^{1-α} E_z|f(B_{r²})| dr`.
pub fn kato_integral(f: &Integrand, z: &[f64], alpha: f64, t: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    let ctx = format!("Kato integral at z={z:?}, α={alpha}, t={t}");
    let conv = quad.doubling.run(
        |n| {
            let mut g = |r: f64| -> Result<f64> {
                if r == 0.0 {
                    return Ok(0.0);
                }
                Ok(2.0 * r.powf(1.0 - alpha) * gaussian_expectation(f, z, r * r, quad)?)
            };
            graded_to_zero(&mut g, t.sqrt(), n, &ctx)
        },
        &ctx,
    )?;
    Ok((conv.value, conv.error))
}

pub fn kato_functional(f: &Integrand, query: &KatoQuery) -> Result<KatoValue> {
    query.validate()?;
    let pts = query.points();
    if pts[0].len() != f.dim() {
        return domain(format!(
            "candidates in ℝ^{} for an integrand on ℝ^{}",
            pts[0].len(),
            f.dim()
        ));
    }
    let vals: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|z| kato_integral(f, z, query.alpha, query.t, &query.quad))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if v.0 > vals[best].0 {
            best = i;
        }
    }
    Ok(KatoValue {
        value: vals[best].0,
        maximizer: pts[best].clone(),
        error_estimate: vals[best].1,
        per_point: vals.iter().map(|v| v.0).collect(),
    })
}

/// Fitted decay below which a probe is not considered to tend to 0.
pub const PROBE_MIN_DECAY: f64 = 0.05;

/// The Kato functional along a decreasing ladder of horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct KatoProbe {
    pub t_ladder: Vec<f64>,
    /// `+∞` where the integral diverges.
    pub values: Vec<f64>,
    pub maximizers: Vec<Option<Vec<f64>>>,
    /// Log-log slope of value against `t` over the finite entries.
    pub decay_exponent: Option<f64>,
    /// All values finite, strictly decreasing, with decay exponent above [`PROBE_MIN_DECAY`].
    pub passes: bool,
}

pub fn kato_membership_probe(
    f: &Integrand,
    alpha: f64,
    t_ladder: &[f64],
    query: &KatoQuery,
) -> Result<KatoProbe> {
    if t_ladder.len() < 2 || t_ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return domain("probe ladder must have at least two strictly decreasing horizons");
    }
    let mut values = Vec::with_capacity(t_ladder.len());
    let mut maximizers = Vec::with_capacity(t_ladder.len());
    for &t in t_ladder {
        match kato_functional(f, &query.at(alpha, t)?) {
            Ok(v) => {
                values.push(v.value);
                maximizers.push(Some(v.maximizer));
            }
            Err(Error::Divergent { .. }) => {
                values.push(f64::INFINITY);
                maximizers.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let finite: Vec<(f64, f64)> = t_ladder
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_finite() && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let decay_exponent = (finite.len() >= 2).then(|| slope(&finite));
    let passes = values.iter().all(|v| v.is_finite())
        && values.windows(2).all(|w| w[1] < w[0])
        && decay_exponent.is_some_and(|e| e > PROBE_MIN_DECAY);
    Ok(KatoProbe {
        t_ladder: t_ladder.to_vec(),
        values,
        maximizers,
        decay_exponent,
        passes,
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// The two summands of the magnetic constant `C(A,t,q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticConstant {
    /// `(sup_z ∫_0^t E_z|A(B_s)|^{2q} ds)^{1/q}`.
    pub a_term: f64,
    /// `(sup_z ∫_0^t E_z|½ div A(B_s)|^q ds)^{1/q}`; zero for divergence-free fields.
    pub div_term: f64,
    pub value: f64,
    pub a_maximizer: Option<Vec<f64>>,
}

/// `C(A,t,q)` over the query's candidates; the query's `α` and `t` are replaced by `0` and `t`.
pub fn magnetic_constant(field: &FieldSpec, t: f64, q: f64, query: &KatoQuery) -> Result<MagneticConstant> {
    if !(q > 1.0 && q.is_finite()) {
        return domain(format!("q must lie in (1,∞), got {q}"));
    }
    let query = query.at(0.0, t)?;
    let (a_term, a_maximizer) = match field.a_norm_integrand() {
        Some(a) => {
            let v = kato_functional(&a.abs_pow(2.0 * q), &query)?;
            (v.value.powf(1.0 / q), Some(v.maximizer))
        }
        None => (0.0, None),
    };
    let div_term = match field.half_div_integrand() {
        Some(d) => kato_functional(&d.abs_pow(q), &query)?.value.powf(1.0 / q),
        None => 0.0,
    };
    Ok(MagneticConstant {
        a_term,
        div_term,
        value: a_term + div_term,
        a_maximizer,
    })
}

/// `D_V(s) = sup_z E_z|V(B_s)|` over the candidates.
pub fn dv_profile(field: &FieldSpec, s: f64, candidates: &[Vec<f64>], quad: &QuadSpec) -> Result<KatoValue> {
    if candidates.is_empty() {
        return domain("D_V needs at least one candidate point");
    }
    let Some(v) = field.v_integrand() else {
        return Ok(KatoValue {
            value: 0.0,
            maximizer: candidates[0].clone(),
            error_estimate: 0.0,
            per_point: vec![0.0; candidates.len()],
        });
    };
    let vals: Vec<f64> = candidates
        .par_iter()
        .map(|z| gaussian_expectation(&v, z, s, quad))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, x) in vals.iter().enumerate() {
        if *x > vals[best] {
            best = i;
        }
    }
    Ok(KatoValue {
        value: vals[best],
        maximizer: candidates[best].clone(),
        error_estimate: 0.0,
        per_point: vals,
    })
}
