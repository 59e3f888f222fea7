use crate::action::{decompose_coupled_action, FieldSpec};
use crate::error::{domain, Result};
use crate::estimate::{par_indexed, McEstimate};
use crate::kato::{magnetic_constant, KatoQuery};
use crate::report::Table;
use crate::semigroup::{conjugate, coupling_lhs_samples, evaluate_pair_difference, PairMode, Psi};
use crate::stochastic::{couple_path, derive_seed, sample_path, MirrorGeometry, RngStream, TimeGrid};

use super::fit::{block_bootstrap_slope, loglog_fit, LineFit, PairSet};

/// Blocks per cell in the bootstrap of the coupling exponents.
pub const BOOTSTRAP_BLOCKS: usize = 20;

pub const MAIN_TARGET: &str = "E|exp(-S_t(A|X)) - exp(-S_t(A|Y))| <= c0 C(A,t,q) t^(-1/(2q*)) |x-y|^(1/q*)";
pub const SMOOTHING_TARGET: &str =
    "||exp(-tH(A,0))||_(L^inf -> C^(0,beta)) <= c0 C(A,t,1/(1-beta)) t^(-beta/2) + c0 t^(-beta/2)";
pub const NASE_TARGET: &str = "S_t(X) - S_t(Y) = M_t + I_t almost surely";

/// A log-log slope at a fixed value of the other parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    /// The `t` (for δ-exponents) or `δ` (for t-exponents) held fixed.
    pub at: f64,
    pub fit: Option<LineFit>,
    pub ci: (f64, f64),
}

impl ExponentFit {
    pub fn slope(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.slope)
    }
}

/// Scan of the coupling inequality over a `(t, δ)` lattice.
#[derive(Debug, Clone)]
pub struct MainExperiment {
    pub field: FieldSpec,
    pub t_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub q: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub c0: f64,
    /// Candidates and quadrature for `C(A,t,q)`.
    pub kato: KatoQuery,
    /// Midpoint of every pair; the pair is `center ± (δ/2) e₁`.
    pub center: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MainReport {
    /// Columns `t, delta, lhs, lhs_se, rhs, ratio`.
    pub table: Table,
    pub delta_fits: Vec<ExponentFit>,
    pub t_fits: Vec<ExponentFit>,
    pub clamps: u64,
}

impl MainReport {
    /// Whether `lhs <= rhs` in every cell.
    pub fn bound_holds(&self) -> bool {
        let (l, r) = (self.table.column("lhs").unwrap(), self.table.column("rhs").unwrap());
        l.iter().zip(&r).all(|(l, r)| l <= r)
    }
}

fn check_positive(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return domain(format!("{name} is empty"));
    }
    if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return domain(format!("{name} entries must be positive, got {x}"));
    }
    Ok(())
}

pub fn theorem_main_experiment(exp: &MainExperiment) -> Result<MainReport> {
    check_positive("t list", &exp.t_list)?;
    check_positive("δ list", &exp.delta_list)?;
    if exp.n_paths < 2 {
        return domain("at least two pairs are needed for an error bar");
    }
    if exp.center.len() != exp.field.dim() {
        return domain("center and field differ in dimension");
    }
    let qs = conjugate(exp.q);
    let nd = exp.delta_list.len();
    let mut table = Table::new(&["t", "delta", "lhs", "lhs_se", "rhs", "ratio"]);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut clamps = 0;
    let mut c_values = Vec::new();
    for (ti, &t) in exp.t_list.iter().enumerate() {
        let grid = TimeGrid::with_step(t, exp.dt)?;
        let c = magnetic_constant(&exp.field, t, exp.q, &exp.kato)?.value;
        c_values.push(c);
        let per_unit = exp.c0 * c * t.powf(-1.0 / (2.0 * qs));
        for (di, &delta) in exp.delta_list.iter().enumerate() {
            let mut x = exp.center.clone();
            let mut y = exp.center.clone();
            x[0] += 0.5 * delta;
            y[0] -= 0.5 * delta;
            let cell_seed = derive_seed(exp.seed, (ti * nd + di) as u64);
            let (vals, cl) = coupling_lhs_samples(&exp.field, grid, &x, &y, exp.n_paths, cell_seed)?;
            clamps += cl;
            let est = McEstimate::from_real(&vals, cell_seed);
            let lhs = est.value();
            let rhs = per_unit * delta.powf(1.0 / qs);
            let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
            table.push(vec![t, delta, lhs, est.std_error, rhs, ratio]);
            samples.push(vals);
        }
    }
    let lhs = table.column("lhs").unwrap();
    let fit_over = |cells: &[usize], xs: &[f64], at: f64, tag: u64| {
        let ys: Vec<f64> = cells.iter().map(|&k| lhs[k]).collect();
        let fit = loglog_fit(xs, &ys);
        let ci = match fit {
            Some(_) => {
                let refs: Vec<&[f64]> = cells.iter().map(|&k| samples[k].as_slice()).collect();
                block_bootstrap_slope(xs, &refs, BOOTSTRAP_BLOCKS, derive_seed(exp.seed, tag))
            }
            None => (f64::NAN, f64::NAN),
        };
        ExponentFit { at, fit, ci }
    };
    let ncells = (exp.t_list.len() * nd) as u64;
    let delta_fits: Vec<ExponentFit> = exp
        .t_list
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let cells: Vec<usize> = (0..nd).map(|di| ti * nd + di).collect();
            fit_over(&cells, &exp.delta_list, t, ncells + ti as u64)
        })
        .collect();
    let t_fits: Vec<ExponentFit> = exp
        .delta_list
        .iter()
        .enumerate()
        .map(|(di, &d)| {
            let cells: Vec<usize> = (0..exp.t_list.len()).map(|ti| ti * nd + di).collect();
            fit_over(&cells, &exp.t_list, d, 2 * ncells + di as u64)
        })
        .collect();

    table.push_meta("experiment", "theorem-main");
    table.push_meta("target", MAIN_TARGET);
    table.push_meta("field", exp.field.name());
    table.push_meta("seed", exp.seed);
    table.push_meta("dt", exp.dt);
    table.push_meta("n_paths", exp.n_paths);
    table.push_meta("q", exp.q);
    table.push_meta("c0", exp.c0);
    table.push_meta("clamps", clamps);
    for (t, c) in exp.t_list.iter().zip(&c_values) {
        table.push_meta(&format!("C(A,t={t},q)"), c);
    }
    for f in &delta_fits {
        table.push_meta(&format!("delta_slope[t={}]", f.at), fmt_fit(f));
    }
    for f in &t_fits {
        table.push_meta(&format!("t_slope[delta={}]", f.at), fmt_fit(f));
    }
    Ok(MainReport {
        table,
        delta_fits,
        t_fits,
        clamps,
    })
}

fn fmt_fit(f: &ExponentFit) -> String {
    match f.fit {
        Some(l) => format!("{} ci=[{}, {}] r2={}", l.slope, f.ci.0, f.ci.1, l.r2),
        None => "none".to_string(),
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// How `e^{-tH}Ψ` is evaluated at the pair points.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SmoothingBackend {
    /// `A = 0`, `Ψ = 1_{x₁ > 0}`: the heat semigroup gives `Φ(x₁/√t)` exactly.
    ClosedFormHeat,
    /// Coupled pair differences of `e^{-tH(A,0)}Ψ`.
    MonteCarlo {
        field: FieldSpec,
        psi: Psi,
        n_paths: usize,
        dt: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct SmoothingReport {
    /// Columns `t, seminorm, seminorm_se, argmax_delta`.
    pub table: Table,
    /// Fit of `ln seminorm` against `ln t`.
    pub fit: Option<LineFit>,
    /// `-β/2`.
    pub target_slope: f64,
}

impl SmoothingReport {
    pub fn slope(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.slope)
    }
}

/// Empirical `β`-seminorm of `e^{-tH}Ψ` on `pairs` for every `t`, and its slope in `t`.
pub fn smoothing_experiment(
    backend: &SmoothingBackend,
    beta: f64,
    t_list: &[f64],
    pairs: &PairSet,
) -> Result<SmoothingReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("β must lie in (0,1), got {beta}"));
    }
    check_positive("t list", t_list)?;
    let np = pairs.len();
    let mut table = Table::new(&["t", "seminorm", "seminorm_se", "argmax_delta"]);
    let mut clamps = 0;
    for (ti, &t) in t_list.iter().enumerate() {
        let diffs: Vec<(f64, f64)> = match backend {
            SmoothingBackend::ClosedFormHeat => pairs
                .pairs()
                .iter()
                .map(|(x, y)| {
                    let s = t.sqrt();
                    ((normal_cdf(x[0] / s) - normal_cdf(y[0] / s)).abs(), 0.0)
                })
                .collect(),
            SmoothingBackend::MonteCarlo {
                field,
                psi,
                n_paths,
                dt,
                seed,
            } => {
                if psi.sup().is_none() {
                    return domain("the initial function must declare its sup norm");
                }
                let grid = TimeGrid::with_step(t, *dt)?;
                let mut out = Vec::with_capacity(np);
                for (pi, (x, y)) in pairs.pairs().iter().enumerate() {
                    let cell_seed = derive_seed(*seed, (ti * np + pi) as u64);
                    let d = evaluate_pair_difference(field, grid, x, y, psi, *n_paths, cell_seed, PairMode::Coupled)?;
                    clamps += d.difference.clamps;
                    out.push((d.difference.mean.norm(), d.difference.std_error));
                }
                out
            }
        };
        let mut best = (0.0, 0.0, f64::NAN);
        for ((v, se), delta) in diffs.iter().zip(pairs.distances()) {
            let scale = delta.powf(beta);
            if v / scale > best.0 {
                best = (v / scale, se / scale, *delta);
            }
        }
        table.push(vec![t, best.0, best.1, best.2]);
    }
    let fit = loglog_fit(t_list, &table.column("seminorm").unwrap());
    table.push_meta("experiment", "smoothing");
    table.push_meta("target", SMOOTHING_TARGET);
    table.push_meta("beta", beta);
    table.push_meta("pairs", np);
    table.push_meta("target_slope", -0.5 * beta);
    match backend {
        SmoothingBackend::ClosedFormHeat => {
            table.push_meta("backend", "closed-form heat, psi = 1{x1 > 0}");
        }
        SmoothingBackend::MonteCarlo {
            field,
            psi,
            n_paths,
            dt,
            seed,
        } => {
            table.push_meta("backend", "monte-carlo");
            table.push_meta("field", field.name());
            table.push_meta("psi", psi.name());
            table.push_meta("seed", seed);
            table.push_meta("dt", dt);
            table.push_meta("n_paths", n_paths);
            table.push_meta("clamps", clamps);
        }
    }
    table.push_meta("slope", fit.map_or(f64::NAN, |f| f.slope));
    Ok(SmoothingReport {
        table,
        fit,
        target_slope: -0.5 * beta,
    })
}

/// Refinement ladder for the residual of the coupled action decomposition.
#[derive(Debug, Clone)]
pub struct NaseExperiment {
    pub field: FieldSpec,
    pub geom: MirrorGeometry,
    pub t: f64,
    /// Step sizes; each must be an integer multiple of the smallest.
    pub dt_ladder: Vec<f64>,
    pub n_pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct NaseReport {
    /// Columns `dt, ms_residual, ms_se, max_abs, crossed_fraction`, coarse to fine.
    pub table: Table,
    /// Mean square residual does not increase as `dt` decreases.
    pub monotone: bool,
    /// Fit of `ln ms_residual` against `ln dt`.
    pub decay: Option<LineFit>,
}

/// Mean-square residual of `θ(X) - θ(Y) = M + I` per step size on matched drivers.
///
/// Each pair samples its finest path once; coarser levels keep every `k`-th point.
pub fn nase_residual_experiment(exp: &NaseExperiment) -> Result<NaseReport> {
    check_positive("dt ladder", &exp.dt_ladder)?;
    if exp.n_pairs < 2 {
        return domain("at least two pairs are needed for an error bar");
    }
    if exp.geom.dim() != exp.field.dim() {
        return domain("geometry and field differ in dimension");
    }
    let mut dts = exp.dt_ladder.clone();
    dts.sort_by(|a, b| b.total_cmp(a));
    let finest = *dts.last().unwrap();
    let fine_grid = TimeGrid::with_step(exp.t, finest)?;
    let factors: Vec<usize> = dts
        .iter()
        .map(|dt| {
            let k = (dt / finest).round();
            if (k * finest - dt).abs() > 1e-9 * dt || fine_grid.n_steps() % (k as usize) != 0 {
                return domain(format!("dt = {dt} is not a multiple of {finest} that divides the grid"));
            }
            Ok(k as usize)
        })
        .collect::<Result<_>>()?;
    let levels = dts.len();
    let per_pair = par_indexed(
        exp.n_pairs,
        || (),
        |_, j| -> Result<Vec<(f64, bool, u64)>> {
            let fine = sample_path(exp.geom.x(), fine_grid, RngStream::new(exp.seed, j as u64));
            factors
                .iter()
                .enumerate()
                .map(|(l, &k)| {
                    let path = if k == 1 { fine.clone() } else { fine.coarsen(k)? };
                    let mut bridge = RngStream::new(derive_seed(exp.seed, 1 + l as u64), j as u64).bridge();
                    let pair = couple_path(&exp.geom, path, &mut bridge)?;
                    let dec = decompose_coupled_action(&exp.field, &pair)?;
                    Ok((dec.residual, pair.tau_step().is_some(), dec.clamps))
                })
                .collect()
        },
    );
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(exp.n_pairs); levels];
    let mut crossed = vec![0usize; levels];
    let mut clamps = 0;
    for r in per_pair {
        for (l, (res, c, cl)) in r?.into_iter().enumerate() {
            cols[l].push(res * res);
            crossed[l] += c as usize;
            clamps += cl;
        }
    }
    let mut table = Table::new(&["dt", "ms_residual", "ms_se", "max_abs", "crossed_fraction"]);
    for (l, sq) in cols.iter().enumerate() {
        let est = McEstimate::from_real(sq, exp.seed);
        let max_abs = sq.iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
        table.push(vec![
            dts[l],
            est.value(),
            est.std_error,
            max_abs,
            crossed[l] as f64 / exp.n_pairs as f64,
        ]);
    }
    let ms = table.column("ms_residual").unwrap();
    let monotone = ms.windows(2).all(|w| w[1] <= w[0]);
    let decay = loglog_fit(&dts, &ms);
    table.push_meta("experiment", "nase");
    table.push_meta("target", NASE_TARGET);
    table.push_meta("field", exp.field.name());
    table.push_meta("seed", exp.seed);
    table.push_meta("t", exp.t);
    table.push_meta("x", format!("{:?}", exp.geom.x()));
    table.push_meta("y", format!("{:?}", exp.geom.y()));
    table.push_meta("n_pairs", exp.n_pairs);
    table.push_meta("clamps", clamps);
    table.push_meta("monotone", monotone);
    table.push_meta("decay_rate", decay.map_or(f64::NAN, |f| f.slope));
    Ok(NaseReport { table, monotone, decay })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-2.0) - 0.022_750_131_948_179_2).abs() < 1e-16);
    }
}
