//! Mirror coupling of two Brownian motions.
//!
//! `Y` is the reflection of `X` across the hyperplane bisecting `x` and `y`
//! until `X` hits that hyperplane, and coincides with `X` afterwards. On a grid
//! the hitting is detected from the signed distance `s_k = <X_k - m, u>`: a sign
//! change, or (when both endpoints lie on the starting side) a Brownian-bridge
//! crossing with probability `exp(-2 s_k s_{k+1} / dt)`. The coupling time is
//! placed at the end of the crossing step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::path::{fill_path, BrownianPath, TimeGrid};
use super::rng::RngStream;
use crate::error::{domain, Result};
use crate::estimate::{par_indexed, McEstimate};

/// Reflection data for the hyperplane bisecting the segment `xy`.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorGeometry {
    x: Vec<f64>,
    y: Vec<f64>,
    midpoint: Vec<f64>,
    normal: Vec<f64>,
    separation: f64,
}

impl MirrorGeometry {
    /// Rejects `x == y`: coincident starts are the trivial coupling.
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return domain(format!(
                "mirror geometry needs two points of equal positive dimension, got {} and {}",
                x.len(),
                y.len()
            ));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return domain("mirror geometry needs finite points");
        }
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let separation = norm(&diff);
        if separation == 0.0 {
            return domain("mirror coupling needs distinct starting points");
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            midpoint: x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect(),
            normal: diff.iter().map(|v| v / separation).collect(),
            separation,
        })
    }

    /// Pair `(c + δ/2 e, c - δ/2 e)` centred at `c` along the direction `e`.
    pub fn centered(center: &[f64], direction: &[f64], delta: f64) -> Result<Self> {
        let len = norm(direction);
        if direction.len() != center.len() || len == 0.0 {
            return domain("direction must be a non-zero vector of the centre's dimension");
        }
        let x: Vec<f64> = center
            .iter()
            .zip(direction)
            .map(|(c, e)| c + 0.5 * delta * e / len)
            .collect();
        let y: Vec<f64> = center
            .iter()
            .zip(direction)
            .map(|(c, e)| c - 0.5 * delta * e / len)
            .collect();
        Self::new(&x, &y)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn midpoint(&self) -> &[f64] {
        &self.midpoint
    }

    pub fn unit_normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `<v - m, u>`; positive on the side of `x`.
    pub fn signed_distance(&self, v: &[f64]) -> f64 {
        v.iter()
            .zip(&self.midpoint)
            .zip(&self.normal)
            .map(|((a, m), u)| (a - m) * u)
            .sum()
    }

    /// `R v = v - 2 <v - m, u> u`.
    pub fn reflect(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.reflect_into(v, &mut out);
        out
    }

    pub fn reflect_into(&self, v: &[f64], out: &mut [f64]) {
        let s = 2.0 * self.signed_distance(v);
        for ((o, a), u) in out.iter_mut().zip(v).zip(&self.normal) {
            *o = a - s * u;
        }
    }

    /// Linear part `L v = v - 2 <v, u> u` of the reflection.
    pub fn linear_part(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.linear_part_into(v, &mut out);
        out
    }

    pub fn linear_part_into(&self, v: &[f64], out: &mut [f64]) {
        let s: f64 = 2.0 * v.iter().zip(&self.normal).map(|(a, u)| a * u).sum::<f64>();
        for ((o, a), u) in out.iter_mut().zip(v).zip(&self.normal) {
            *o = a - s * u;
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Reflection of `v` across the hyperplane of `geom`.
pub fn reflect(geom: &MirrorGeometry, v: &[f64]) -> Vec<f64> {
    geom.reflect(v)
}

/// Where the coupling happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// First grid index at which `Y == X`.
    pub step: usize,
    pub time: f64,
    /// The crossing was found by the bridge test rather than a sign change.
    pub via_bridge: bool,
}

/// A mirror-coupled pair on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPaths {
    geometry: MirrorGeometry,
    x: BrownianPath,
    y: BrownianPath,
    crossing: Option<Crossing>,
}

impl CoupledPaths {
    pub fn geometry(&self) -> &MirrorGeometry {
        &self.geometry
    }

    pub fn x(&self) -> &BrownianPath {
        &self.x
    }

    pub fn y(&self) -> &BrownianPath {
        &self.y
    }

    pub fn crossing(&self) -> Option<Crossing> {
        self.crossing
    }

    pub fn tau_step(&self) -> Option<usize> {
        self.crossing.map(|c| c.step)
    }

    pub fn tau_time(&self) -> Option<f64> {
        self.crossing.map(|c| c.time)
    }

    /// Number of leading grid points on which `Y = R X` (all of them if never coupled).
    pub fn reflected_len(&self) -> usize {
        self.tau_step().unwrap_or(self.x.len())
    }
}

#[inline]
fn crossing_test<R: Rng>(s_prev: f64, s_next: f64, dt: f64, bridge: &mut R) -> Option<bool> {
    if s_next <= 0.0 {
        return Some(false);
    }
    let p = (-2.0 * s_prev * s_next / dt).exp();
    let u: f64 = bridge.random();
    (u < p).then_some(true)
}

/// Scans `path` (started on the `x` side) for the first crossing of the hyperplane.
pub fn detect_crossing<R: Rng>(
    geom: &MirrorGeometry,
    path: &BrownianPath,
    bridge: &mut R,
) -> Option<Crossing> {
    let dt = path.grid().dt();
    let mut s_prev = geom.signed_distance(path.start());
    if s_prev <= 0.0 {
        return Some(Crossing {
            step: 0,
            time: 0.0,
            via_bridge: false,
        });
    }
    for k in 0..path.grid().n_steps() {
        let s_next = geom.signed_distance(path.point(k + 1));
        if let Some(via_bridge) = crossing_test(s_prev, s_next, dt, bridge) {
            return Some(Crossing {
                step: k + 1,
                time: path.grid().time(k + 1),
                via_bridge,
            });
        }
        s_prev = s_next;
    }
    None
}

/// Couples a given `X` path, drawing bridge uniforms from `bridge`.
pub fn couple_path<R: Rng>(
    geom: &MirrorGeometry,
    x: BrownianPath,
    bridge: &mut R,
) -> Result<CoupledPaths> {
    if x.dim() != geom.dim() {
        return domain(format!(
            "path dimension {} does not match geometry dimension {}",
            x.dim(),
            geom.dim()
        ));
    }
    let crossing = detect_crossing(geom, &x, bridge);
    let split = crossing.map_or(x.len(), |c| c.step);
    let mut y = x.clone();
    let d = x.dim();
    {
        let raw = y.raw_mut();
        for k in 0..split {
            geom.reflect_into(x.point(k), &mut raw[k * d..(k + 1) * d]);
        }
    }
    Ok(CoupledPaths {
        geometry: geom.clone(),
        x,
        y,
        crossing,
    })
}

/// Samples `X` from `geom.x()` and builds its mirror partner.
pub fn mirror_couple(geom: &MirrorGeometry, grid: TimeGrid, rng: RngStream) -> CoupledPaths {
    let d = geom.dim();
    let mut x = BrownianPath::from_points(grid, d, vec![0.0; (grid.n_steps() + 1) * d])
        .expect("buffer sized from grid");
    fill_path(&mut x, geom.x(), &mut rng.normals());
    couple_path(geom, x, &mut rng.bridge()).expect("dimensions agree by construction")
}

/// Step-by-step mirror coupling for kernels that do not need stored paths.
///
/// Consumes the random lanes in exactly the same order as [`mirror_couple`],
/// so both produce the same pair for the same stream.
pub(crate) struct CoupledWalk<'g> {
    geom: &'g MirrorGeometry,
    dt: f64,
    sd: f64,
    n_steps: usize,
    normals: ChaCha8Rng,
    bridge: ChaCha8Rng,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub y_prev: Vec<f64>,
    s: f64,
    pub step: usize,
    pub crossing: Option<Crossing>,
    grid: TimeGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepKind {
    /// Both endpoints of the step are reflected pairs.
    Reflected,
    /// The step on which the crossing was detected; `Y` jumps onto `X` at its end.
    Crossing,
    /// `X` and `Y` share this step.
    Shared,
}

impl<'g> CoupledWalk<'g> {
    pub fn new(geom: &'g MirrorGeometry, grid: TimeGrid, rng: RngStream) -> Self {
        let s = geom.signed_distance(geom.x());
        Self {
            geom,
            dt: grid.dt(),
            sd: grid.dt().sqrt(),
            n_steps: grid.n_steps(),
            normals: rng.normals(),
            bridge: rng.bridge(),
            x: geom.x().to_vec(),
            y: geom.y().to_vec(),
            x_prev: geom.x().to_vec(),
            y_prev: geom.y().to_vec(),
            s,
            step: 0,
            crossing: None,
            grid,
        }
    }

    pub fn done(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn coupled(&self) -> bool {
        self.crossing.is_some()
    }

    pub fn advance(&mut self) -> StepKind {
        std::mem::swap(&mut self.x, &mut self.x_prev);
        std::mem::swap(&mut self.y, &mut self.y_prev);
        for i in 0..self.x.len() {
            let z: f64 = self.normals.sample(StandardNormal);
            self.x[i] = self.x_prev[i] + self.sd * z;
        }
        self.step += 1;
        if self.crossing.is_some() {
            self.y.copy_from_slice(&self.x);
            return StepKind::Shared;
        }
        // recomputed from the point so the test matches `detect_crossing` bit for bit
        let s_next = self.geom.signed_distance(&self.x);
        match crossing_test(self.s, s_next, self.dt, &mut self.bridge) {
            Some(via_bridge) => {
                self.crossing = Some(Crossing {
                    step: self.step,
                    time: self.grid.time(self.step),
                    via_bridge,
                });
                self.y.copy_from_slice(&self.x);
                StepKind::Crossing
            }
            None => {
                self.s = s_next;
                self.geom.reflect_into(&self.x, &mut self.y);
                StepKind::Reflected
            }
        }
    }

    /// Runs until coupled or out of steps; returns the crossing step if any.
    pub fn run_to_coupling(&mut self) -> Option<usize> {
        while !self.done() && !self.coupled() {
            self.advance();
        }
        self.crossing.map(|c| c.step)
    }
}

/// Closed-form coupling-time survival `P(τ > t) = erf(δ / (2 sqrt(2t)))`.
///
/// This is the value of `(2/sqrt(2πt)) ∫_0^{δ/2} exp(-u²/(2t)) du`, i.e. half the
/// total variation distance between the transition densities from `x` and `y`.
pub fn coupling_survival_exact(t: f64, delta: f64) -> Result<f64> {
    if !(t > 0.0) || !(delta >= 0.0) {
        return domain(format!("survival needs t > 0 and δ >= 0, got t={t}, δ={delta}"));
    }
    Ok(libm::erf(delta / (2.0 * (2.0 * t).sqrt())))
}

/// Upper bound `(2π)^{-1/2} δ t^{-1/2}` on the survival probability.
pub fn coupling_survival_bound(t: f64, delta: f64) -> f64 {
    delta / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// Crossing step of each of `n_paths` coupled pairs (`None` if never coupled).
pub fn coupling_steps(
    geom: &MirrorGeometry,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Vec<Option<usize>> {
    par_indexed(
        n_paths,
        || (),
        |_, i| CoupledWalk::new(geom, grid, RngStream::new(seed, i as u64)).run_to_coupling(),
    )
}

/// Empirical `P(τ > t_k)` at the given grid indices from one set of pairs.
pub fn survival_curve(
    geom: &MirrorGeometry,
    grid: TimeGrid,
    at_steps: &[usize],
    n_paths: usize,
    seed: u64,
) -> Vec<McEstimate> {
    let steps = coupling_steps(geom, grid, n_paths, seed);
    at_steps
        .iter()
        .map(|&k| {
            let ind: Vec<f64> = steps
                .iter()
                .map(|s| if s.is_none_or(|s| s > k) { 1.0 } else { 0.0 })
                .collect();
            McEstimate::from_real(&ind, seed)
        })
        .collect()
}

/// `|empirical P(τ ≥ t_end) - erf(δ/(2 sqrt(2 t_end)))|` with the binomial standard error.
pub fn maximality_deficit(
    geom: &MirrorGeometry,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths == 0 {
        return domain("maximality check needs at least one path");
    }
    let exact = coupling_survival_exact(grid.t_end(), geom.separation())?;
    let emp = survival_curve(geom, grid, &[grid.n_steps()], n_paths, seed).remove(0);
    let mut out = emp.clone();
    out.mean = num_complex::Complex64::new((emp.value() - exact).abs(), 0.0);
    Ok(out)
}
