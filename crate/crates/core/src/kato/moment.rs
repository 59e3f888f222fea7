use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::estimate::{par_indexed, CompensatedSum, McEstimate};
use crate::stochastic::{RngStream, TimeGrid};

/// Default ceiling on the per-path exponent; `e^{700}` is still finite.
pub const EXP_CEILING: f64 = 700.0;

/// Monte Carlo `E_z exp(∫_0^t W(B_s) ds)` with a left-point time integral.
///
/// Exponents above `ceiling` are clamped to it and counted in the estimate.
pub fn exp_moment<W>(
    w: W,
    z: &[f64],
    n_paths: usize,
    grid: TimeGrid,
    seed: u64,
    ceiling: f64,
) -> Result<McEstimate>
where
    W: Fn(&[f64]) -> f64 + Sync,
{
    if n_paths == 0 {
        return domain("exponential moment needs at least one path");
    }
    if z.is_empty() {
        return domain("starting point must have positive dimension");
    }
    let d = z.len();
    let dt = grid.dt();
    let sd = dt.sqrt();
    let samples: Vec<Result<(f64, bool)>> = par_indexed(
        n_paths,
        || vec![0.0; d],
        |x, i| {
            let mut normals = RngStream::new(seed, i as u64).normals();
            x.copy_from_slice(z);
            let mut acc = CompensatedSum::new();
            for _ in 0..grid.n_steps() {
                let v = w(x);
                if v.is_nan() {
                    return Err(Error::NonFinite {
                        what: "exponent integrand",
                        point: x.clone(),
                    });
                }
                acc.add(v);
                for xi in x.iter_mut() {
                    let n: f64 = normals.sample(StandardNormal);
                    *xi += sd * n;
                }
            }
            let e = acc.value() * dt;
            Ok(if e > ceiling { (ceiling.exp(), true) } else { (e.exp(), false) })
        },
    );
    let mut vals = Vec::with_capacity(n_paths);
    let mut clamps = 0u64;
    for s in samples {
        let (v, c) = s?;
        vals.push(v);
        clamps += u64::from(c);
    }
    Ok(McEstimate::from_real(&vals, seed).with_clamps(clamps, n_paths as u64, 0.0))
}
