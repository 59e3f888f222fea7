use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::RngStream;
use crate::error::{domain, Result};

/// Uniform time grid `t_k = k * dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return domain(format!("grid horizon must be positive and finite, got {t_end}"));
        }
        if n_steps == 0 {
            return domain("grid needs at least one step");
        }
        Ok(Self { t_end, n_steps })
    }

    /// Grid on `[0, t_end]` whose step is the closest to `dt` that divides `t_end`.
    pub fn with_step(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        let n = (t_end / dt).round().max(1.0);
        Self::new(t_end, n as usize)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    /// Coarser grid using every `factor`-th point; `factor` must divide `n_steps`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return domain(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.n_steps
            ));
        }
        Self::new(self.t_end, self.n_steps / factor)
    }
}

/// A sampled Brownian trajectory, stored as `(n_steps + 1) * dim` row-major coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    dim: usize,
    points: Vec<f64>,
}

impl BrownianPath {
    /// Builds a path from explicit points (one `dim`-vector per grid time).
    pub fn from_points(grid: TimeGrid, dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return domain("path dimension must be positive");
        }
        if points.len() != (grid.n_steps() + 1) * dim {
            return domain(format!(
                "expected {} coordinates, got {}",
                (grid.n_steps() + 1) * dim,
                points.len()
            ));
        }
        Ok(Self { grid, dim, points })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> &[f64] {
        self.point(0)
    }

    pub fn end(&self) -> &[f64] {
        self.point(self.grid.n_steps())
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn len(&self) -> usize {
        self.grid.n_steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Keeps every `factor`-th point; the coarse path shares the fine path's increments.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let points = (0..=grid.n_steps())
            .flat_map(|k| self.point(k * factor).iter().copied())
            .collect();
        Ok(Self {
            grid,
            dim: self.dim,
            points,
        })
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.points
    }
}

/// Samples a Brownian path from `start` on `grid`, drawing increments from `rng.normals()`.
pub fn sample_path(start: &[f64], grid: TimeGrid, rng: RngStream) -> BrownianPath {
    let mut path = BrownianPath {
        grid,
        dim: start.len(),
        points: vec![0.0; (grid.n_steps() + 1) * start.len()],
    };
    let mut normals = rng.normals();
    fill_path(&mut path, start, &mut normals);
    path
}

/// Overwrites `path` with a fresh sample; the buffer keeps its grid and dimension.
pub(crate) fn fill_path<R: Rng>(path: &mut BrownianPath, start: &[f64], normals: &mut R) {
    let d = path.dim;
    let sd = path.grid.dt().sqrt();
    let pts = &mut path.points;
    pts[..d].copy_from_slice(start);
    for k in 0..path.grid.n_steps() {
        let (head, tail) = pts.split_at_mut((k + 1) * d);
        let prev = &head[k * d..];
        for i in 0..d {
            let z: f64 = normals.sample(StandardNormal);
            tail[i] = prev[i] + sd * z;
        }
    }
}

/// Transition density `(2πt)^{-d/2} exp(-|a-b|²/(2t))` of Brownian motion.
pub fn heat_kernel(t: f64, a: &[f64], b: &[f64]) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    if a.len() != b.len() {
        return domain(format!("dimension mismatch: {} vs {}", a.len(), b.len()));
    }
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let d = a.len() as f64;
    Ok((2.0 * std::f64::consts::PI * t).powf(-d / 2.0) * (-r2 / (2.0 * t)).exp())
}
