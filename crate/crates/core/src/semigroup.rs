//! Feynman-Kac-Itô estimators of `e^{-tH(A,V)}Ψ` and coupled pair differences.
//!
//! With `H(A,V) = ½(i∇ + A)² + V` the semigroup is
//! `e^{-tH}Ψ(x) = E[e^{-iθ - ∫V(Z)ds} Ψ(Z_t)]` over Brownian paths from `x`,
//! where `θ` is the phase of the action along the path.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::action::{phase_factor, FieldSpec, PhaseAcc, ScalarFn};
use crate::error::{domain, Error, Result};
use crate::estimate::{par_indexed, CompensatedSum, McEstimate};
use crate::kato::{magnetic_constant, KatoQuery, EXP_CEILING};
use crate::stochastic::{derive_seed, CoupledWalk, MirrorGeometry, RngStream, StepKind, TimeGrid};

pub type ComplexFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
enum PsiFn {
    Real(ScalarFn),
    Complex(ComplexFn),
}

/// Initial function `Ψ`, real or complex valued.
#[derive(Clone)]
pub struct Psi {
    name: String,
    f: PsiFn,
    sup: Option<f64>,
}

impl std::fmt::Debug for Psi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Psi")
            .field("name", &self.name)
            .field("real", &self.is_real())
            .field("sup", &self.sup)
            .finish()
    }
}

impl Psi {
    pub fn real(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: PsiFn::Real(Arc::new(f)),
            sup: None,
        }
    }

    pub fn complex(
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: PsiFn::Complex(Arc::new(f)),
            sup: None,
        }
    }

    /// Declares `‖Ψ‖_∞`.
    pub fn with_sup(mut self, sup: f64) -> Self {
        self.sup = Some(sup);
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::real("constant", move |_| c).with_sup(c.abs())
    }

    /// `e^{-|x|²/2}`.
    pub fn gaussian() -> Self {
        Self::real("gaussian", |x| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()).with_sup(1.0)
    }

    /// `1_{x_axis > 0}`.
    pub fn half_space(axis: usize) -> Self {
        Self::real("half_space", move |x| if x[axis] > 0.0 { 1.0 } else { 0.0 }).with_sup(1.0)
    }

    /// Landau ground state `e^{-B|x|²/4}` of the constant field of strength `B` in the plane.
    pub fn landau(b: f64) -> Self {
        Self::real("landau", move |x| {
            (-0.25 * b.abs() * x.iter().map(|v| v * v).sum::<f64>()).exp()
        })
        .with_sup(1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup(&self) -> Option<f64> {
        self.sup
    }

    pub fn is_real(&self) -> bool {
        matches!(self.f, PsiFn::Real(_))
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        match &self.f {
            PsiFn::Real(f) => Complex64::new(f(x), 0.0),
            PsiFn::Complex(f) => f(x),
        }
    }

    fn eval_real(&self, x: &[f64]) -> f64 {
        match &self.f {
            PsiFn::Real(f) => f(x),
            PsiFn::Complex(f) => f(x).re,
        }
    }
}

/// Default clamp rate above which an estimate carries a warning.
pub const DEFAULT_CLAMP_WARN_RATE: f64 = 1e-3;

/// Evaluation of `e^{-tH(A,V)}Ψ` at a set of points.
#[derive(Debug, Clone)]
pub struct SemigroupQuery {
    pub field: FieldSpec,
    pub psi: Psi,
    pub points: Vec<Vec<f64>>,
    pub n_paths: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    pub clamp_warn_rate: f64,
}

impl SemigroupQuery {
    pub fn new(
        field: FieldSpec,
        psi: Psi,
        points: Vec<Vec<f64>>,
        n_paths: usize,
        grid: TimeGrid,
        seed: u64,
    ) -> Result<Self> {
        if n_paths < 2 {
            return domain("at least two paths are needed for an error bar");
        }
        if points.is_empty() {
            return domain("no evaluation points");
        }
        if let Some(p) = points.iter().find(|p| p.len() != field.dim()) {
            return domain(format!(
                "point {p:?} does not lie in ℝ^{} of the field",
                field.dim()
            ));
        }
        if let Some(p) = points.iter().find(|p| p.iter().any(|v| !v.is_finite())) {
            return domain(format!("point {p:?} is not finite"));
        }
        Ok(Self {
            field,
            psi,
            points,
            n_paths,
            grid,
            seed,
            clamp_warn_rate: DEFAULT_CLAMP_WARN_RATE,
        })
    }

    pub fn t(&self) -> f64 {
        self.grid.t_end()
    }
}

/// Scratch buffers for one path.
struct Walk {
    z: Vec<f64>,
    prev: Vec<f64>,
    acc: PhaseAcc,
}

impl Walk {
    fn new(d: usize) -> Self {
        Self {
            z: vec![0.0; d],
            prev: vec![0.0; d],
            acc: PhaseAcc::new(d),
        }
    }
}

/// `(weight, clamped evaluations)` of one Feynman-Kac-Itô path.
fn fki_path(
    field: &FieldSpec,
    psi: &Psi,
    x: &[f64],
    grid: TimeGrid,
    rng: RngStream,
    w: &mut Walk,
    complex: bool,
) -> Result<(Complex64, u64)> {
    let mut normals = rng.normals();
    let sd = grid.dt().sqrt();
    w.z.copy_from_slice(x);
    w.acc.reset();
    let mut v_int = CompensatedSum::new();
    let mut clamps = 0u64;
    for _ in 0..grid.n_steps() {
        if field.has_v() {
            let (v, c) = field.eval_v(&w.z)?;
            v_int.add(v);
            clamps += u64::from(c);
        }
        std::mem::swap(&mut w.z, &mut w.prev);
        for i in 0..w.z.len() {
            let n: f64 = normals.sample(StandardNormal);
            w.z[i] = w.prev[i] + sd * n;
        }
        if complex {
            w.acc.step(field, &w.prev, &w.z)?;
        }
    }
    let mut log_w = -v_int.value() * grid.dt();
    if log_w > EXP_CEILING {
        log_w = EXP_CEILING;
        clamps += 1;
    }
    let damp = log_w.exp();
    if complex {
        clamps += w.acc.clamps;
        let weight = phase_factor(w.acc.phase(grid.dt())) * damp;
        Ok((weight * psi.eval(&w.z), clamps))
    } else {
        Ok((Complex64::new(damp * psi.eval_real(&w.z), 0.0), clamps))
    }
}

fn evaluations(field: &FieldSpec, n_paths: usize, grid: TimeGrid) -> u64 {
    let per_step = u64::from(field.has_a()) + u64::from(field.has_v());
    (n_paths as u64) * (grid.n_steps() as u64) * per_step.max(1)
}

/// Monte Carlo `e^{-tH(A,V)}Ψ` at every query point.
///
/// Point `i` uses the global seed `derive_seed(seed, i)`, path `j` its stream `j`.
/// Without a vector potential and with real `Ψ` the weights are real and the
/// phase is never formed.
pub fn evaluate(query: &SemigroupQuery) -> Result<Vec<McEstimate>> {
    let field = &query.field;
    let complex = field.has_a() || !query.psi.is_real();
    let d = field.dim();
    query
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let seed = derive_seed(query.seed, i as u64);
            let out = par_indexed(
                query.n_paths,
                || Walk::new(d),
                |w, j| fki_path(field, &query.psi, x, query.grid, RngStream::new(seed, j as u64), w, complex),
            );
            let mut clamps = 0;
            let est = if complex {
                let mut vals = Vec::with_capacity(out.len());
                for r in out {
                    let (v, c) = r?;
                    vals.push(v);
                    clamps += c;
                }
                McEstimate::from_complex(&vals, seed)
            } else {
                let mut vals = Vec::with_capacity(out.len());
                for r in out {
                    let (v, c) = r?;
                    vals.push(v.re);
                    clamps += c;
                }
                McEstimate::from_real(&vals, seed)
            };
            Ok(est.with_clamps(clamps, evaluations(field, query.n_paths, query.grid), query.clamp_warn_rate))
        })
        .collect()
}

/// How the two paths of a pair difference are driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// Mirror-coupled pairs sharing one Brownian driver.
    Coupled,
    /// Independent paths from `x` and `y`; only for variance comparisons.
    Independent,
}

/// `e^{-tH(A,0)}Ψ(x) - e^{-tH(A,0)}Ψ(y)` with the two terms of the coupling bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDifference {
    pub difference: McEstimate,
    /// `E |e^{-𝒮(X)} - e^{-𝒮(Y)}| |Ψ(X_t)|`.
    pub phase_term: McEstimate,
    /// `E |Ψ(X_t) - Ψ(Y_t)| 1_{t < τ}`.
    pub rough_term: McEstimate,
}

struct PairSample {
    diff: Complex64,
    phase: f64,
    rough: f64,
    clamps: u64,
}

fn coupled_pair(
    field: &FieldSpec,
    psi: &Psi,
    geom: &MirrorGeometry,
    grid: TimeGrid,
    rng: RngStream,
    acc: &mut (PhaseAcc, PhaseAcc),
) -> Result<PairSample> {
    let (ax, ay) = acc;
    ax.reset();
    ay.reset();
    let mut walk = CoupledWalk::new(geom, grid, rng);
    let dt = grid.dt();
    // after coupling both paths take the same steps: one shared tail phase
    let mut tail = PhaseAcc::new(geom.dim());
    while !walk.done() {
        match walk.advance() {
            StepKind::Reflected | StepKind::Crossing => {
                if field.has_a() {
                    ax.step(field, &walk.x_prev, &walk.x)?;
                    ay.step(field, &walk.y_prev, &walk.y)?;
                }
            }
            StepKind::Shared => {
                if field.has_a() {
                    tail.step(field, &walk.x_prev, &walk.x)?;
                }
            }
        }
    }
    let shared = tail.phase(dt);
    let wx = phase_factor(ax.phase(dt) + shared);
    let wy = phase_factor(ay.phase(dt) + shared);
    let (px, py) = (psi.eval(&walk.x), psi.eval(&walk.y));
    let rough = if walk.coupled() { 0.0 } else { (px - py).norm() };
    Ok(PairSample {
        diff: wx * px - wy * py,
        phase: (wx - wy).norm() * px.norm(),
        rough,
        clamps: ax.clamps + ay.clamps + tail.clamps,
    })
}

fn free_path(
    field: &FieldSpec,
    x: &[f64],
    grid: TimeGrid,
    rng: RngStream,
    acc: &mut PhaseAcc,
) -> Result<(Vec<f64>, f64)> {
    let mut normals = rng.normals();
    let sd = grid.dt().sqrt();
    acc.reset();
    let mut z = x.to_vec();
    let mut prev = x.to_vec();
    for _ in 0..grid.n_steps() {
        std::mem::swap(&mut z, &mut prev);
        for i in 0..z.len() {
            let n: f64 = normals.sample(StandardNormal);
            z[i] = prev[i] + sd * n;
        }
        if field.has_a() {
            acc.step(field, &prev, &z)?;
        }
    }
    Ok((z, acc.phase(grid.dt())))
}

fn independent_pair(
    field: &FieldSpec,
    psi: &Psi,
    geom: &MirrorGeometry,
    grid: TimeGrid,
    seed: u64,
    j: u64,
    acc: &mut (PhaseAcc, PhaseAcc),
) -> Result<PairSample> {
    let (zx, tx) = free_path(field, geom.x(), grid, RngStream::new(seed, 2 * j), &mut acc.0)?;
    let (zy, ty) = free_path(field, geom.y(), grid, RngStream::new(seed, 2 * j + 1), &mut acc.1)?;
    let (wx, wy) = (phase_factor(tx), phase_factor(ty));
    let (px, py) = (psi.eval(&zx), psi.eval(&zy));
    Ok(PairSample {
        diff: wx * px - wy * py,
        phase: (wx - wy).norm() * px.norm(),
        rough: (px - py).norm(),
        clamps: acc.0.clamps + acc.1.clamps,
    })
}

/// Pair difference of `e^{-tH(A,0)}Ψ` at `x` and `y`; `V` of the field is not used.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_pair_difference(
    field: &FieldSpec,
    grid: TimeGrid,
    x: &[f64],
    y: &[f64],
    psi: &Psi,
    n_paths: usize,
    seed: u64,
    mode: PairMode,
) -> Result<PairDifference> {
    if n_paths < 2 {
        return domain("at least two pairs are needed for an error bar");
    }
    if x.len() != field.dim() {
        return domain(format!("points in ℝ^{} for a field on ℝ^{}", x.len(), field.dim()));
    }
    let geom = MirrorGeometry::new(x, y)?;
    let d = field.dim();
    let out = par_indexed(
        n_paths,
        || (PhaseAcc::new(d), PhaseAcc::new(d)),
        |acc, j| match mode {
            PairMode::Coupled => coupled_pair(field, psi, &geom, grid, RngStream::new(seed, j as u64), acc),
            PairMode::Independent => independent_pair(field, psi, &geom, grid, seed, j as u64, acc),
        },
    );
    let mut diff = Vec::with_capacity(n_paths);
    let mut phase = Vec::with_capacity(n_paths);
    let mut rough = Vec::with_capacity(n_paths);
    let mut clamps = 0;
    for r in out {
        let s = r?;
        diff.push(s.diff);
        phase.push(s.phase);
        rough.push(s.rough);
        clamps += s.clamps;
    }
    let per_pair = if field.has_a() { 2 * grid.n_steps() as u64 } else { 0 };
    let evals = per_pair * n_paths as u64;
    let difference = if diff.iter().all(|z| z.im == 0.0) {
        let re: Vec<f64> = diff.iter().map(|z| z.re).collect();
        McEstimate::from_real(&re, seed)
    } else {
        McEstimate::from_complex(&diff, seed)
    };
    Ok(PairDifference {
        difference: difference.with_clamps(clamps, evals, DEFAULT_CLAMP_WARN_RATE),
        phase_term: McEstimate::from_real(&phase, seed),
        rough_term: McEstimate::from_real(&rough, seed),
    })
}

/// Phase difference `θ(X) - θ(Y)` after every step of one coupled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    /// Entry `k` is the difference of the phases accumulated over the first `k` steps.
    pub difference: Vec<f64>,
    pub tau_step: Option<usize>,
}

/// Runs the two phases of a coupled pair separately, without sharing the tail.
pub fn phase_difference_trace(
    field: &FieldSpec,
    geom: &MirrorGeometry,
    grid: TimeGrid,
    rng: RngStream,
) -> Result<PhaseTrace> {
    let d = geom.dim();
    let (mut ax, mut ay) = (PhaseAcc::new(d), PhaseAcc::new(d));
    let mut walk = CoupledWalk::new(geom, grid, rng);
    let mut difference = vec![0.0];
    while !walk.done() {
        walk.advance();
        ax.step(field, &walk.x_prev, &walk.x)?;
        ay.step(field, &walk.y_prev, &walk.y)?;
        difference.push(ax.phase(grid.dt()) - ay.phase(grid.dt()));
    }
    Ok(PhaseTrace {
        difference,
        tau_step: walk.crossing.map(|c| c.step),
    })
}

/// Per-pair samples of `|e^{-𝒮(X)} - e^{-𝒮(Y)}|` and the total clamp count.
///
/// The phase difference is frozen after coupling, so each walk stops at `τ`.
pub fn coupling_lhs_samples(
    field: &FieldSpec,
    grid: TimeGrid,
    x: &[f64],
    y: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<f64>, u64)> {
    if x.len() != field.dim() {
        return domain(format!("points in ℝ^{} for a field on ℝ^{}", x.len(), field.dim()));
    }
    let geom = MirrorGeometry::new(x, y)?;
    if !field.has_a() {
        return Ok((vec![0.0; n_paths], 0));
    }
    let d = field.dim();
    let out = par_indexed(
        n_paths,
        || (PhaseAcc::new(d), PhaseAcc::new(d)),
        |(ax, ay), j| -> Result<(f64, u64)> {
            ax.reset();
            ay.reset();
            let mut walk = CoupledWalk::new(&geom, grid, RngStream::new(seed, j as u64));
            while !walk.done() && !walk.coupled() {
                walk.advance();
                ax.step(field, &walk.x_prev, &walk.x)?;
                ay.step(field, &walk.y_prev, &walk.y)?;
            }
            let dphi = ax.phase(grid.dt()) - ay.phase(grid.dt());
            // |e^{-ia} - e^{-ib}| = 2|sin((a-b)/2)|
            Ok((2.0 * (0.5 * dphi).sin().abs(), ax.clamps + ay.clamps))
        },
    );
    let mut vals = Vec::with_capacity(n_paths);
    let mut clamps = 0;
    for r in out {
        let (v, c) = r?;
        vals.push(v);
        clamps += c;
    }
    Ok((vals, clamps))
}

/// Monte Carlo `E|e^{-𝒮ₜ(A|X)} - e^{-𝒮ₜ(A|Y)}|` over mirror-coupled pairs.
pub fn coupling_lhs(
    field: &FieldSpec,
    grid: TimeGrid,
    x: &[f64],
    y: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths < 2 {
        return domain("at least two pairs are needed for an error bar");
    }
    let (vals, clamps) = coupling_lhs_samples(field, grid, x, y, n_paths, seed)?;
    let evals = 2 * n_paths as u64 * grid.n_steps() as u64;
    Ok(McEstimate::from_real(&vals, seed).with_clamps(clamps, evals, DEFAULT_CLAMP_WARN_RATE))
}

/// Conjugate exponent `q* = q/(q-1)`.
pub fn conjugate(q: f64) -> f64 {
    q / (q - 1.0)
}

/// `c₀ C(A,t,q) t^{-1/(2q*)}`: the bound per unit `|x-y|^{1/q*}`.
pub fn coupling_rhs(field: &FieldSpec, t: f64, q: f64, c0: f64, query: &KatoQuery) -> Result<f64> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return domain(format!("c0 must be positive, got {c0}"));
    }
    let c = magnetic_constant(field, t, q, query)?.value;
    Ok(c0 * c * t.powf(-1.0 / (2.0 * conjugate(q))))
}

/// `|e^{-tH}Ψ(x) - e^{-t·E}Ψ(x)|` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResidual {
    pub point: Vec<f64>,
    pub estimate: McEstimate,
    pub expected: Complex64,
    pub residual: f64,
    pub std_error: f64,
    /// `residual / |expected|`.
    pub relative: f64,
}

impl EigenResidual {
    pub fn z_score(&self) -> f64 {
        self.estimate.z_score(self.expected)
    }
}

/// Checks `e^{-tH}Ψ = e^{-tE}Ψ` for a claimed eigenpair `(E, Ψ)`.
pub fn eigen_residual(query: &SemigroupQuery, energy: f64) -> Result<Vec<EigenResidual>> {
    if !energy.is_finite() {
        return domain("energy must be finite");
    }
    let factor = (-query.t() * energy).exp();
    let ests = evaluate(query)?;
    Ok(ests
        .into_iter()
        .zip(&query.points)
        .map(|(estimate, p)| {
            let expected = query.psi.eval(p) * factor;
            let residual = (estimate.mean - expected).norm();
            EigenResidual {
                point: p.clone(),
                std_error: estimate.std_error,
                relative: residual / expected.norm(),
                residual,
                expected,
                estimate,
            }
        })
        .collect())
}

/// `HΨ(x)` with `H = ½(i∇ + A)² + V` by central differences of step `h`.
///
/// Uses `(i∇ + A)²Ψ = -ΔΨ + 2i A·∇Ψ + i (div A) Ψ + |A|²Ψ`.
pub fn hamiltonian_fd(field: &FieldSpec, psi: &Psi, x: &[f64], h: f64) -> Result<Complex64> {
    if !(h > 0.0) {
        return domain("finite-difference step must be positive");
    }
    if x.len() != field.dim() {
        return domain(format!("point in ℝ^{} for a field on ℝ^{}", x.len(), field.dim()));
    }
    let d = x.len();
    let p0 = psi.eval(x);
    let mut a = vec![0.0; d];
    field.eval_a(x, &mut a)?;
    let mut lap = Complex64::new(0.0, 0.0);
    let mut a_grad = Complex64::new(0.0, 0.0);
    let mut p = x.to_vec();
    for i in 0..d {
        p[i] = x[i] + h;
        let up = psi.eval(&p);
        p[i] = x[i] - h;
        let dn = psi.eval(&p);
        p[i] = x[i];
        lap += (up - 2.0 * p0 + dn) / (h * h);
        a_grad += (up - dn) / (2.0 * h) * a[i];
    }
    let i = Complex64::i();
    let a2: f64 = a.iter().map(|v| v * v).sum();
    let kinetic = -lap + 2.0 * i * a_grad + i * field.eval_div(x)? * p0 + a2 * p0;
    let (v, _) = field.eval_v(x)?;
    let out = 0.5 * kinetic + v * p0;
    if !(out.re.is_finite() && out.im.is_finite()) {
        return Err(Error::NonFinite {
            what: "finite-difference Hamiltonian",
            point: x.to_vec(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_exponents() {
        assert_eq!(conjugate(2.0), 2.0);
        assert!((1.0 / conjugate(3.0) + 1.0 / 3.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_constructors() {
        assert_eq!(Psi::half_space(0).eval(&[0.1, -4.0]).re, 1.0);
        assert_eq!(Psi::half_space(0).eval(&[0.0, 4.0]).re, 0.0);
        assert!((Psi::landau(2.0).eval(&[1.0, 1.0]).re - (-1.0f64).exp()).abs() < 1e-15);
        let z = Psi::complex("plane", |x| Complex64::new(0.0, x[0]).exp());
        assert!(!z.is_real());
        assert!((z.eval(&[1.0]).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn query_validation() {
        let f = FieldSpec::zero(2).unwrap();
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(SemigroupQuery::new(f.clone(), Psi::constant(1.0), vec![vec![0.0, 0.0]], 1, g, 0).is_err());
        assert!(SemigroupQuery::new(f.clone(), Psi::constant(1.0), vec![vec![0.0]], 4, g, 0).is_err());
        assert!(SemigroupQuery::new(f.clone(), Psi::constant(1.0), vec![], 4, g, 0).is_err());
        assert!(SemigroupQuery::new(f, Psi::constant(1.0), vec![vec![0.0, 1.0]], 4, g, 0).is_ok());
    }
}
