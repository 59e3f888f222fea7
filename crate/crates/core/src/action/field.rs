use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::kato::Integrand;

pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Declared properties of a field that the numerics rely on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldMeta {
    /// Target Hölder exponent; the derived integrability exponent is `q = 1/(1-β)`.
    pub beta: Option<f64>,
    /// `|A|` is capped at this value; each capped evaluation is counted.
    pub a_cap: Option<f64>,
    /// `|V|` is capped at this value; each capped evaluation is counted.
    pub v_cap: Option<f64>,
    /// `div A ≡ 0`, so the divergence term of the action and the constant can be skipped.
    pub divergence_free: bool,
    /// Positions at which suprema over `z` are evaluated.
    pub candidates: Vec<Vec<f64>>,
    /// `|A|^{2q}` is Kato only on bounded windows (grows at infinity).
    pub locally_kato_only: bool,
    pub notes: Vec<String>,
}

/// Vector potential `A`, its divergence and a scalar potential `V` on `ℝ^d`.
#[derive(Clone)]
pub struct FieldSpec {
    name: String,
    dim: usize,
    a: Option<VectorFn>,
    div_a: Option<ScalarFn>,
    v: Option<ScalarFn>,
    a_norm: Option<Integrand>,
    v_profile: Option<Integrand>,
    meta: FieldMeta,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_a", &self.a.is_some())
            .field("has_v", &self.v.is_some())
            .field("meta", &self.meta)
            .finish()
    }
}

impl FieldSpec {
    /// The zero field on `ℝ^dim`.
    pub fn zero(dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("field dimension must be positive");
        }
        Ok(Self {
            name: "zero".into(),
            dim,
            a: None,
            div_a: None,
            v: None,
            a_norm: None,
            v_profile: None,
            meta: FieldMeta {
                divergence_free: true,
                candidates: vec![vec![0.0; dim]],
                ..FieldMeta::default()
            },
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Installs `A` and its analytic divergence.
    pub fn with_vector_potential(
        mut self,
        a: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        div_a: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.a = Some(Arc::new(a));
        self.div_a = Some(Arc::new(div_a));
        self.meta.divergence_free = false;
        self.a_norm = None;
        self
    }

    /// Installs a divergence-free `A`.
    pub fn with_solenoidal_potential(
        mut self,
        a: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.a = Some(Arc::new(a));
        self.div_a = None;
        self.meta.divergence_free = true;
        self.a_norm = None;
        self
    }

    pub fn with_scalar_potential(mut self, v: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.v = Some(Arc::new(v));
        self.v_profile = None;
        self
    }

    /// Declares `|A|` in a structured form (e.g. radial) for the Kato quadrature.
    pub fn with_a_norm_profile(mut self, profile: Integrand) -> Self {
        self.a_norm = Some(profile);
        self
    }

    /// Declares `V` in a structured form for the Kato quadrature.
    pub fn with_v_profile(mut self, profile: Integrand) -> Self {
        self.v_profile = Some(profile);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return domain(format!("β must lie in (0,1), got {beta}"));
        }
        self.meta.beta = Some(beta);
        Ok(self)
    }

    pub fn with_a_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return domain(format!("A cap must be positive, got {cap}"));
        }
        self.meta.a_cap = Some(cap);
        Ok(self)
    }

    pub fn with_v_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return domain(format!("V cap must be positive, got {cap}"));
        }
        self.meta.v_cap = Some(cap);
        Ok(self)
    }

    pub fn with_candidates(mut self, candidates: Vec<Vec<f64>>) -> Result<Self> {
        if candidates.is_empty() || candidates.iter().any(|c| c.len() != self.dim) {
            return domain(format!(
                "candidates must be a non-empty set of points in ℝ^{}",
                self.dim
            ));
        }
        self.meta.candidates = candidates;
        Ok(self)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.meta.notes.push(note.into());
        self
    }

    pub(crate) fn meta_mut(&mut self) -> &mut FieldMeta {
        &mut self.meta
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> &FieldMeta {
        &self.meta
    }

    pub fn has_a(&self) -> bool {
        self.a.is_some()
    }

    pub fn has_v(&self) -> bool {
        self.v.is_some()
    }

    /// `q = 1/(1-β)` for the declared `β`.
    pub fn q(&self) -> Option<f64> {
        self.meta.beta.map(|b| 1.0 / (1.0 - b))
    }

    /// Writes `A(x)` into `out`; returns whether the value was capped.
    #[inline]
    pub fn eval_a(&self, x: &[f64], out: &mut [f64]) -> Result<bool> {
        let Some(a) = &self.a else {
            out.fill(0.0);
            return Ok(false);
        };
        a(x, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "vector potential",
                point: x.to_vec(),
            });
        }
        if let Some(cap) = self.meta.a_cap {
            let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > cap {
                let s = cap / n;
                out.iter_mut().for_each(|v| *v *= s);
                return Ok(true);
            }
        }
        Ok(false)
    }

    #[inline]
    pub fn eval_div(&self, x: &[f64]) -> Result<f64> {
        let Some(d) = &self.div_a else {
            return Ok(0.0);
        };
        let v = d(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "divergence of the vector potential",
                point: x.to_vec(),
            });
        }
        Ok(v)
    }

    /// `V(x)`, capped at the declared clamp; returns the value and whether it was capped.
    #[inline]
    pub fn eval_v(&self, x: &[f64]) -> Result<(f64, bool)> {
        let Some(v) = &self.v else {
            return Ok((0.0, false));
        };
        let val = v(x);
        if val.is_nan() {
            return Err(Error::NonFinite {
                what: "scalar potential",
                point: x.to_vec(),
            });
        }
        match self.meta.v_cap {
            Some(cap) if val.abs() > cap => Ok((cap.copysign(val), true)),
            None if val.is_infinite() => Err(Error::NonFinite {
                what: "scalar potential",
                point: x.to_vec(),
            }),
            _ => Ok((val, false)),
        }
    }

    /// `|A|` as an integrand (declared profile, or the pointwise norm).
    pub fn a_norm_integrand(&self) -> Option<Integrand> {
        if let Some(p) = &self.a_norm {
            return Some(p.clone());
        }
        let a = self.a.clone()?;
        let d = self.dim;
        Some(Integrand::general(d, move |x| {
            let mut buf = vec![0.0; d];
            a(x, &mut buf);
            buf.iter().map(|v| v * v).sum::<f64>().sqrt()
        }))
    }

    /// `|½ div A|` as an integrand; `None` when the field is divergence free.
    pub fn half_div_integrand(&self) -> Option<Integrand> {
        if self.meta.divergence_free {
            return None;
        }
        let d = self.div_a.clone()?;
        Some(Integrand::general(self.dim, move |x| (0.5 * d(x)).abs()))
    }

    /// `V` as an integrand (declared profile, or the evaluator).
    pub fn v_integrand(&self) -> Option<Integrand> {
        if let Some(p) = &self.v_profile {
            return Some(p.clone());
        }
        let v = self.v.clone()?;
        Some(Integrand::general(self.dim, move |x| v(x)))
    }

    /// Field with `A` replaced by `c·A` (and `div A` by `c·div A`); `V` is kept.
    pub fn scale_a(&self, c: f64) -> Self {
        let mut out = self.clone();
        if let Some(a) = self.a.clone() {
            out.a = Some(Arc::new(move |x: &[f64], o: &mut [f64]| {
                a(x, o);
                o.iter_mut().for_each(|v| *v *= c);
            }));
        }
        if let Some(d) = self.div_a.clone() {
            out.div_a = Some(Arc::new(move |x: &[f64]| c * d(x)));
        }
        out.a_norm = self.a_norm.as_ref().map(|p| p.scaled(c.abs()));
        out.name = format!("{}*{c}", self.name);
        out
    }

    /// Pointwise sum of two fields on the same space.
    pub fn superpose(&self, other: &FieldSpec) -> Result<Self> {
        if self.dim != other.dim {
            return domain(format!(
                "cannot superpose fields on ℝ^{} and ℝ^{}",
                self.dim, other.dim
            ));
        }
        let d = self.dim;
        let a = match (self.a.clone(), other.a.clone()) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some(a),
            (Some(a1), Some(a2)) => {
                let f: VectorFn = Arc::new(move |x: &[f64], o: &mut [f64]| {
                    let mut tmp = vec![0.0; d];
                    a1(x, o);
                    a2(x, &mut tmp);
                    o.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
                });
                Some(f)
            }
        };
        let add = |f: Option<ScalarFn>, g: Option<ScalarFn>| -> Option<ScalarFn> {
            match (f, g) {
                (None, None) => None,
                (Some(f), None) | (None, Some(f)) => Some(f),
                (Some(f), Some(g)) => Some(Arc::new(move |x: &[f64]| f(x) + g(x))),
            }
        };
        let mut candidates = self.meta.candidates.clone();
        for c in &other.meta.candidates {
            if !candidates.contains(c) {
                candidates.push(c.clone());
            }
        }
        Ok(Self {
            name: format!("{}+{}", self.name, other.name),
            dim: d,
            a,
            div_a: add(self.div_a.clone(), other.div_a.clone()),
            v: add(self.v.clone(), other.v.clone()),
            a_norm: None,
            v_profile: None,
            meta: FieldMeta {
                beta: self.meta.beta.or(other.meta.beta),
                a_cap: None,
                v_cap: None,
                divergence_free: self.meta.divergence_free && other.meta.divergence_free,
                candidates,
                locally_kato_only: self.meta.locally_kato_only || other.meta.locally_kato_only,
                notes: self.meta.notes.iter().chain(&other.meta.notes).cloned().collect(),
            },
        })
    }
}
