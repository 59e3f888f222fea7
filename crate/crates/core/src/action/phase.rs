use num_complex::Complex64;

use super::field::FieldSpec;
use crate::error::{domain, Result};
use crate::estimate::CompensatedSum;
use crate::stochastic::{BrownianPath, CoupledPaths};

/// Running left-point sums for `∫<A, dZ>` and `∫ div A ds`.
#[derive(Debug, Clone)]
pub(crate) struct PhaseAcc {
    ito: CompensatedSum,
    div: CompensatedSum,
    steps: usize,
    pub clamps: u64,
    buf: Vec<f64>,
}

impl PhaseAcc {
    pub fn new(dim: usize) -> Self {
        Self {
            ito: CompensatedSum::new(),
            div: CompensatedSum::new(),
            steps: 0,
            clamps: 0,
            buf: vec![0.0; dim],
        }
    }

    pub fn reset(&mut self) {
        self.ito = CompensatedSum::new();
        self.div = CompensatedSum::new();
        self.steps = 0;
        self.clamps = 0;
    }

    /// Adds the step `z → z_next`, evaluating the field at `z`.
    #[inline]
    pub fn step(&mut self, field: &FieldSpec, z: &[f64], z_next: &[f64]) -> Result<()> {
        self.steps += 1;
        if !field.has_a() {
            return Ok(());
        }
        if field.eval_a(z, &mut self.buf)? {
            self.clamps += 1;
        }
        let mut inc = 0.0;
        for i in 0..z.len() {
            inc += self.buf[i] * (z_next[i] - z[i]);
        }
        self.ito.add(inc);
        if !field.meta().divergence_free {
            self.div.add(field.eval_div(z)?);
        }
        Ok(())
    }

    pub fn ito(&self) -> f64 {
        self.ito.value()
    }

    /// `Σ div A(Z_k) dt` for the uniform step `dt`.
    pub fn divergence(&self, dt: f64) -> f64 {
        self.div.value() * dt
    }

    pub fn phase(&self, dt: f64) -> f64 {
        self.ito() + 0.5 * self.divergence(dt)
    }
}

/// The action `𝒮 = iθ` of one path, stored through its real phase `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub phase: f64,
    /// Capped field evaluations along the path.
    pub clamps: u64,
}

impl ActionSample {
    /// `e^{-𝒮} = cos θ - i sin θ`.
    pub fn weight(&self) -> Complex64 {
        phase_factor(self.phase)
    }
}

#[inline]
pub(crate) fn phase_factor(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, -s)
}

fn check_dim(field: &FieldSpec, path: &BrownianPath) -> Result<()> {
    if field.dim() != path.dim() {
        return domain(format!(
            "field on ℝ^{} evaluated along a path in ℝ^{}",
            field.dim(),
            path.dim()
        ));
    }
    Ok(())
}

fn accumulate(field: &FieldSpec, path: &BrownianPath) -> Result<PhaseAcc> {
    check_dim(field, path)?;
    let mut acc = PhaseAcc::new(path.dim());
    for k in 0..path.grid().n_steps() {
        acc.step(field, path.point(k), path.point(k + 1))?;
    }
    Ok(acc)
}

/// Left-point Itô sum `Σ <A(Z_k), Z_{k+1} - Z_k>`.
pub fn ito_integral(field: &FieldSpec, path: &BrownianPath) -> Result<f64> {
    Ok(accumulate(field, path)?.ito())
}

/// Left-point sum `Σ div A(Z_k) dt` (without the factor ½ of the action).
pub fn divergence_integral(field: &FieldSpec, path: &BrownianPath) -> Result<f64> {
    check_dim(field, path)?;
    let mut acc = CompensatedSum::new();
    if field.has_a() {
        for k in 0..path.grid().n_steps() {
            acc.add(field.eval_div(path.point(k))?);
        }
    }
    Ok(acc.value() * path.grid().dt())
}

/// `θ = Σ <A, ΔZ> + ½ Σ div A dt`.
pub fn action_phase(field: &FieldSpec, path: &BrownianPath) -> Result<ActionSample> {
    let acc = accumulate(field, path)?;
    Ok(ActionSample {
        phase: acc.phase(path.grid().dt()),
        clamps: acc.clamps,
    })
}

/// Phases of a coupled pair and the martingale / Lebesgue split of their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDecomposition {
    pub phase_x: f64,
    pub phase_y: f64,
    /// `Σ_{t_k < τ} <Ã(X_k), ΔX_k>` with `Ã(x) = A(x) - L A(Rx)`.
    pub m: f64,
    /// `Σ_{t_k < τ} ½ (div A(X_k) - div A(R X_k)) dt`.
    pub i: f64,
    /// `(phase_x - phase_y) - (m + i)`.
    pub residual: f64,
    pub clamps: u64,
}

pub fn decompose_coupled_action(
    field: &FieldSpec,
    coupled: &CoupledPaths,
) -> Result<ActionDecomposition> {
    let x = coupled.x();
    let sx = action_phase(field, x)?;
    let sy = action_phase(field, coupled.y())?;
    let geom = coupled.geometry();
    let d = x.dim();
    let dt = x.grid().dt();
    let stop = coupled.tau_step().unwrap_or(x.grid().n_steps());
    let (mut m, mut i) = (CompensatedSum::new(), CompensatedSum::new());
    let mut clamps = sx.clamps + sy.clamps;
    if field.has_a() {
        let (mut ax, mut arx, mut larx, mut rx) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        for k in 0..stop {
            let xk = x.point(k);
            let xn = x.point(k + 1);
            geom.reflect_into(xk, &mut rx);
            clamps += u64::from(field.eval_a(xk, &mut ax)?);
            clamps += u64::from(field.eval_a(&rx, &mut arx)?);
            geom.linear_part_into(&arx, &mut larx);
            let mut inc = 0.0;
            for j in 0..d {
                inc += (ax[j] - larx[j]) * (xn[j] - xk[j]);
            }
            m.add(inc);
            if !field.meta().divergence_free {
                i.add(field.eval_div(xk)? - field.eval_div(&rx)?);
            }
        }
    }
    let (m, i) = (m.value(), 0.5 * i.value() * dt);
    Ok(ActionDecomposition {
        phase_x: sx.phase,
        phase_y: sy.phase,
        m,
        i,
        residual: (sx.phase - sy.phase) - (m + i),
        clamps,
    })
}
