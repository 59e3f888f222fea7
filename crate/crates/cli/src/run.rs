use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mirror_fki::kato::{kato_functional, kato_membership_probe, KatoQuery};
use mirror_fki::potentials::{
    constant_field_2d, constant_potential, constant_vector_potential, coulomb_cap, coulomb_potential, smooth_bump,
    ParticleConfig,
};
use mirror_fki::report::Table;
use mirror_fki::semigroup::{eigen_residual, evaluate, hamiltonian_fd, Psi, SemigroupQuery};
use mirror_fki::stochastic::{coupling_survival_bound, coupling_survival_exact, survival_curve, MirrorGeometry, TimeGrid};
use mirror_fki::verify::{
    nase_residual_experiment, smoothing_experiment, theorem_main_experiment, MainExperiment, NaseExperiment,
    PairSet, SmoothingBackend,
};
use mirror_fki::{Error as CoreError, FieldSpec};
use thiserror::Error;

use crate::config::{Backend, Command, FieldConfig, FieldName, KatoTarget, PsiConfig, PsiName, RunConfig};
use crate::output::{emit_csv, emit_svg, series_from_table, Axes, OutputError, Series};

/// Step of the finite-difference Hamiltonian in `eigen-check`.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, RunError> {
    Err(RunError::Config(msg.into()))
}

/// One acceptance threshold and whether it held.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub series: Vec<Series>,
    pub axes: Axes,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    /// Headline statistic, without the command name.
    pub headline: String,
    pub checks: Vec<Check>,
    pub plot: Option<Plot>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub csv_path: PathBuf,
    pub svg_path: Option<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }

    /// 0 if every requested threshold held, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

pub fn build_field(cfg: &FieldConfig, dt: f64) -> Result<FieldSpec, RunError> {
    Ok(match cfg.name {
        FieldName::Zero => FieldSpec::zero(cfg.dim)?.named("zero"),
        FieldName::SmoothBump => smooth_bump(cfg.amplitude, cfg.radius, cfg.dim)?,
        FieldName::ConstantField2d => constant_field_2d(cfg.b)?,
        FieldName::ConstantA => constant_vector_potential(cfg.c.clone())?,
        FieldName::ConstantV => constant_potential(cfg.dim, cfg.v)?,
        FieldName::Coulomb => {
            let nuclei = cfg.nuclei.iter().map(|p| [p[0], p[1], p[2]]).collect();
            let pc = ParticleConfig::new(cfg.electrons, nuclei, cfg.charges.clone())?;
            coulomb_potential(&pc)?.with_v_cap(cfg.cap.unwrap_or_else(|| coulomb_cap(dt)))?
        }
    })
}

pub fn build_psi(cfg: &PsiConfig, dim: usize) -> Result<Psi, RunError> {
    Ok(match cfg.name {
        PsiName::Gaussian => Psi::gaussian(),
        PsiName::Constant => Psi::constant(cfg.value),
        PsiName::HalfSpace => {
            if cfg.axis >= dim {
                return config_err(format!("half_space axis {} outside ℝ^{dim}", cfg.axis));
            }
            Psi::half_space(cfg.axis)
        }
        PsiName::Landau => Psi::landau(cfg.b),
    })
}

fn unit(dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    e
}

fn dim_checked(v: Vec<f64>, dim: usize, what: &str) -> Result<Vec<f64>, RunError> {
    if v.len() != dim {
        return config_err(format!("{what} has {} coordinates, the field lives in ℝ^{dim}", v.len()));
    }
    Ok(v)
}

fn geometry(cfg: &RunConfig, dim: usize) -> Result<MirrorGeometry, RunError> {
    let center = dim_checked(cfg.pairs.center.clone().unwrap_or_else(|| vec![0.0; dim]), dim, "center")?;
    let dir = dim_checked(cfg.pairs.direction.clone().unwrap_or_else(|| unit(dim)), dim, "direction")?;
    Ok(MirrorGeometry::centered(&center, &dir, cfg.pairs.delta)?)
}

fn points(cfg: &RunConfig, dim: usize) -> Result<Vec<Vec<f64>>, RunError> {
    cfg.mc
        .points
        .clone()
        .unwrap_or_else(|| vec![vec![0.0; dim]])
        .into_iter()
        .map(|p| dim_checked(p, dim, "evaluation point"))
        .collect()
}

fn z_of(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(", "))
}

fn simulate_coupling(cfg: &RunConfig) -> Result<Report, RunError> {
    let field = build_field(&cfg.field, cfg.mc.dt)?;
    let geom = geometry(cfg, field.dim())?;
    let mut ts = cfg.mc.t_list.clone();
    ts.sort_by(f64::total_cmp);
    let grid = TimeGrid::with_step(*ts.last().unwrap(), cfg.mc.dt)?;
    let steps: Vec<usize> = ts
        .iter()
        .map(|&t| {
            let k = (t / cfg.mc.dt).round();
            if (k * cfg.mc.dt - t).abs() > 1e-9 * t {
                return config_err(format!("t = {t} is not a multiple of dt = {}", cfg.mc.dt));
            }
            Ok(k as usize)
        })
        .collect::<Result<_, _>>()?;
    let ests = survival_curve(&geom, grid, &steps, cfg.mc.paths, cfg.seed);
    let delta = geom.separation();
    let mut table = Table::new(&["t", "survival", "survival_se", "exact", "bound", "z"]);
    let mut max_z = 0.0f64;
    for (t, e) in ts.iter().zip(&ests) {
        let exact = coupling_survival_exact(*t, delta)?;
        let z = z_of(e.value() - exact, e.std_error);
        max_z = max_z.max(z.abs());
        table.push(vec![*t, e.value(), e.std_error, exact, coupling_survival_bound(*t, delta), z]);
    }
    table.push_meta("dim", field.dim());
    table.push_meta("delta", delta);
    table.push_meta("dt", cfg.mc.dt);
    table.push_meta("paths", cfg.mc.paths);
    table.push_meta("target", "P(tau > t) = erf(|x-y| / (2 sqrt(2t))) <= (2 pi)^(-1/2) |x-y| t^(-1/2)");
    let mut checks = Vec::new();
    if let Some(m) = cfg.acceptance.max_z {
        checks.push(check("max_z", max_z <= m, format!("max |z| = {max_z:.3} (limit {m})")));
    }
    let plot = Plot {
        series: vec![
            series_from_table(&table, "t", "survival", None)?.remove(0),
            series_from_table(&table, "t", "exact", None)?.remove(0),
        ],
        axes: Axes {
            title: "coupling survival".into(),
            x_label: "t".into(),
            y_label: "P(tau > t)".into(),
            ..Axes::default()
        },
    };
    Ok(Report {
        table,
        headline: format!("max |z| = {max_z:.3} over {} horizons", ts.len()),
        checks,
        plot: Some(plot),
        warnings: Vec::new(),
    })
}

fn kato(cfg: &RunConfig) -> Result<Report, RunError> {
    let field = build_field(&cfg.field, cfg.mc.dt)?;
    let dim = field.dim();
    let base = match cfg.kato.target {
        KatoTarget::V => field.v_integrand(),
        KatoTarget::A => field.a_norm_integrand(),
    };
    let Some(base) = base else {
        return config_err(format!("field `{}` has no {:?} part", field.name(), cfg.kato.target));
    };
    let integrand = base.abs_pow(cfg.kato.power);
    let candidates = match &cfg.kato.candidates {
        Some(c) => c.clone(),
        None if !field.meta().candidates.is_empty() => field.meta().candidates.clone(),
        None => vec![vec![0.0; dim]],
    };
    let query = KatoQuery::new(cfg.kato.alpha[0], cfg.kato.t, candidates)?;
    let mut cols = vec!["alpha".to_string(), "t".into(), "value".into(), "error_estimate".into()];
    cols.extend((0..dim).map(|i| format!("maximizer_{i}")));
    let mut table = Table {
        columns: cols,
        ..Table::default()
    };
    let mut checks = Vec::new();
    let mut headline = Vec::new();
    for (ai, &alpha) in cfg.kato.alpha.iter().enumerate() {
        let v = match kato_functional(&integrand, &query.at(alpha, cfg.kato.t)?) {
            Ok(v) => Some(v),
            Err(CoreError::Divergent { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let mut row = vec![alpha, cfg.kato.t];
        match &v {
            Some(v) => {
                row.extend([v.value, v.error_estimate]);
                row.extend(&v.maximizer);
                headline.push(format!("alpha={alpha}: {:.6}", v.value));
            }
            None => {
                row.extend([f64::INFINITY, f64::NAN]);
                row.extend(std::iter::repeat_n(f64::NAN, dim));
                headline.push(format!("alpha={alpha}: diverges"));
            }
        }
        table.push(row);
        if let Some(&expected) = cfg.acceptance.expected.get(ai) {
            let value = v.as_ref().map_or(f64::INFINITY, |v| v.value);
            let rel = (value - expected).abs() / expected.abs();
            checks.push(check(
                &format!("expected[alpha={alpha}]"),
                rel <= cfg.acceptance.rel_tol,
                format!("value {value} vs {expected}, relative error {rel:.2e} (limit {})", cfg.acceptance.rel_tol),
            ));
        }
        if let Some(m) = &cfg.acceptance.maximizer {
            let ok = v.as_ref().is_some_and(|v| {
                v.maximizer.len() == m.len() && v.maximizer.iter().zip(m).all(|(a, b)| (a - b).abs() <= 1e-12)
            });
            let got = v.as_ref().map_or("none".to_string(), |v| fmt_point(&v.maximizer));
            checks.push(check(&format!("maximizer[alpha={alpha}]"), ok, format!("maximizer {got}")));
        }
        if !cfg.kato.t_ladder.is_empty() {
            let probe = kato_membership_probe(&integrand, alpha, &cfg.kato.t_ladder, &query)?;
            for (i, t) in probe.t_ladder.iter().enumerate() {
                let mut row = vec![alpha, *t, probe.values[i], f64::NAN];
                match &probe.maximizers[i] {
                    Some(m) => row.extend(m),
                    None => row.extend(std::iter::repeat_n(f64::NAN, dim)),
                }
                table.push(row);
            }
            table.push_meta(
                &format!("probe[alpha={alpha}]"),
                format!(
                    "passes={} decay_exponent={}",
                    probe.passes,
                    probe.decay_exponent.map_or(f64::NAN, |e| e)
                ),
            );
        }
    }
    table.push_meta("field", field.name());
    table.push_meta("target", "sup_z int_0^t s^(-alpha/2) E_z |f(B_s)| ds");
    table.push_meta("integrand", format!("|{:?}|^{}", cfg.kato.target, cfg.kato.power));
    let plot = (!cfg.kato.t_ladder.is_empty())
        .then(|| -> Result<Plot, RunError> {
            let finite = Table {
                rows: table.rows.iter().filter(|r| r[2].is_finite() && r[2] > 0.0).cloned().collect(),
                ..table.clone()
            };
            Ok(Plot {
                series: series_from_table(&finite, "t", "value", Some("alpha"))?,
                axes: Axes {
                    title: "Kato functional".into(),
                    x_label: "t".into(),
                    y_label: "value".into(),
                    log_x: true,
                    log_y: true,
                    annotation: None,
                },
            })
        })
        .transpose()?;
    Ok(Report {
        table,
        headline: headline.join("; "),
        checks,
        plot,
        warnings: Vec::new(),
    })
}

/// `e^{tΔ/2}Ψ` for initial data with a closed form, when `A = 0` and `V = 0`.
fn heat_oracle(field: &FieldSpec, psi: &PsiConfig, t: f64, x: &[f64]) -> Option<f64> {
    if field.has_a() || field.has_v() {
        return None;
    }
    match psi.name {
        PsiName::Gaussian => {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Some((1.0 + t).powf(-0.5 * x.len() as f64) * (-r2 / (2.0 * (1.0 + t))).exp())
        }
        PsiName::Constant => Some(psi.value),
        _ => None,
    }
}

fn semigroup(cfg: &RunConfig) -> Result<Report, RunError> {
    let field = build_field(&cfg.field, cfg.mc.dt)?;
    let dim = field.dim();
    let psi = build_psi(&cfg.psi, dim)?;
    let pts = points(cfg, dim)?;
    let grid = TimeGrid::with_step(cfg.mc.t, cfg.mc.dt)?;
    let query = SemigroupQuery::new(field.clone(), psi, pts.clone(), cfg.mc.paths, grid, cfg.seed)?;
    let ests = evaluate(&query)?;
    let mut cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    cols.extend(["re", "im", "std_error", "clamps", "oracle", "z"].map(String::from));
    let mut table = Table {
        columns: cols,
        ..Table::default()
    };
    let mut warnings = Vec::new();
    let mut max_z = 0.0f64;
    let mut have_oracle = true;
    let mut parts = Vec::new();
    for (p, e) in pts.iter().zip(&ests) {
        let oracle = heat_oracle(&field, &cfg.psi, cfg.mc.t, p);
        have_oracle &= oracle.is_some();
        let z = oracle.map_or(f64::NAN, |o| e.z_score(o.into()));
        if z.is_finite() {
            max_z = max_z.max(z);
        }
        let mut row = p.clone();
        row.extend([e.mean.re, e.mean.im, e.std_error, e.clamps as f64, oracle.unwrap_or(f64::NAN), z]);
        table.push(row);
        parts.push(format!("{}: {:.6} ± {:.2e}", fmt_point(p), e.mean.re, e.std_error));
        if let Some(w) = &e.warning {
            warnings.push(format!("{}: {w}", fmt_point(p)));
        }
    }
    table.push_meta("field", field.name());
    table.push_meta("psi", cfg.psi.name_str());
    table.push_meta("t", cfg.mc.t);
    table.push_meta("dt", cfg.mc.dt);
    table.push_meta("paths", cfg.mc.paths);
    table.push_meta("target", "exp(-tH(A,V)) psi(x) = E[exp(-i theta - int V(Z) ds) psi(Z_t)]");
    let mut checks = Vec::new();
    if let Some(m) = cfg.acceptance.max_z {
        if !have_oracle {
            return config_err("max_z needs a closed form: zero field with a gaussian or constant psi");
        }
        checks.push(check("max_z", max_z <= m, format!("max |z| = {max_z:.3} (limit {m})")));
    }
    Ok(Report {
        table,
        headline: parts.join("; "),
        checks,
        plot: None,
        warnings,
    })
}

fn exponent(cfg: &RunConfig) -> Result<crate::config::Exponent, RunError> {
    cfg.exponent
        .ok_or_else(|| RunError::Config(format!("{} needs beta or q", cfg.command.as_str())))
}

fn verify_main(cfg: &RunConfig) -> Result<Report, RunError> {
    let field = build_field(&cfg.field, cfg.mc.dt)?;
    let dim = field.dim();
    let candidates = if field.meta().candidates.is_empty() {
        vec![vec![0.0; dim]]
    } else {
        field.meta().candidates.clone()
    };
    let exp = MainExperiment {
        center: dim_checked(cfg.pairs.center.clone().unwrap_or_else(|| vec![0.0; dim]), dim, "center")?,
        kato: KatoQuery::new(0.0, cfg.mc.t_list[0], candidates)?,
        field,
        t_list: cfg.mc.t_list.clone(),
        delta_list: cfg.pairs.delta_list.clone(),
        q: exponent(cfg)?.q,
        n_paths: cfg.mc.paths,
        dt: cfg.mc.dt,
        seed: cfg.seed,
        c0: cfg.c0,
    };
    let r = theorem_main_experiment(&exp)?;
    let slopes: Vec<String> = r.delta_fits.iter().map(|f| format!("t={}: {:.3}", f.at, f.slope())).collect();
    let mut checks = Vec::new();
    if let Some(m) = cfg.acceptance.min_slope {
        let worst = r.delta_fits.iter().map(|f| f.slope()).fold(f64::INFINITY, f64::min);
        checks.push(check("min_slope", worst >= m, format!("smallest delta-exponent {worst:.3} (limit {m})")));
    }
    if cfg.acceptance.bound {
        let worst = r.table.column("ratio").unwrap().into_iter().fold(0.0, f64::max);
        checks.push(check("bound", r.bound_holds(), format!("largest lhs/rhs {worst:.3}")));
    }
    let plot = Plot {
        series: series_from_table(&r.table, "delta", "lhs", Some("t"))?,
        axes: Axes {
            title: "coupling bound scan".into(),
            x_label: "delta".into(),
            y_label: "lhs".into(),
            log_x: true,
            log_y: true,
            annotation: Some(format!("fitted delta-slope {}", slopes.join(", "))),
        },
    };
    let warnings = if r.clamps > 0 {
        vec![format!("{} clamped field evaluations", r.clamps)]
    } else {
        Vec::new()
    };
    Ok(Report {
        headline: format!("delta-exponent {}", slopes.join(", ")),
        table: r.table,
        checks,
        plot: Some(plot),
        warnings,
    })
}

fn verify_smoothing(cfg: &RunConfig) -> Result<Report, RunError> {
    let beta = exponent(cfg)?.beta;
    let field = build_field(&cfg.field, cfg.mc.dt)?;
    let dim = field.dim();
    let bases = cfg.pairs.bases.clone().unwrap_or_else(|| vec![vec![0.0; dim]]);
    let dir = cfg.pairs.direction.clone().unwrap_or_else(|| unit(dim));
    let pairs = PairSet::ladder(&bases, &dir, cfg.pairs.delta0, cfg.pairs.levels)?;
    let backend = match cfg.mc.backend {
        Backend::ClosedForm => SmoothingBackend::ClosedFormHeat,
        Backend::MonteCarlo => SmoothingBackend::MonteCarlo {
            psi: build_psi(&cfg.psi, dim)?,
            field,
            n_paths: cfg.mc.paths,
            dt: cfg.mc.dt,
            seed: cfg.seed,
        },
    };
    let r = smoothing_experiment(&backend, beta, &cfg.mc.t_list, &pairs)?;
    let slope = r.slope();
    let mut checks = Vec::new();
    if let Some(tol) = cfg.acceptance.slope_tol {
        let dev = (slope - r.target_slope).abs();
        checks.push(check(
            "slope_tol",
            dev <= tol,
            format!("slope {slope:.4} vs {} (|diff| {dev:.4}, limit {tol})", r.target_slope),
        ));
    }
    let plot = Plot {
        series: series_from_table(&r.table, "t", "seminorm", None)?,
        axes: Axes {
            title: "empirical Hölder seminorm".into(),
            x_label: "t".into(),
            y_label: "seminorm".into(),
            log_x: true,
            log_y: true,
            annotation: Some(format!("fitted slope {slope:.4}, target {}", r.target_slope)),
        },
    };
    Ok(Report {
        headline: format!("seminorm slope {slope:.4} (target {})", r.target_slope),
        table: r.table,
        checks,
        plot: Some(plot),
        warnings: Vec::new(),
    })
}

fn verify_nase(cfg: &RunConfig) -> Result<Report, RunError> {
    let field = build_field(&cfg.field, cfg.mc.dt)?;
    let geom = geometry(cfg, field.dim())?;
    let r = nase_residual_experiment(&NaseExperiment {
        field,
        geom,
        t: cfg.mc.t,
        dt_ladder: cfg.mc.dt_ladder.clone(),
        n_pairs: cfg.mc.paths,
        seed: cfg.seed,
    })?;
    let ms = r.table.column("ms_residual").unwrap();
    let last = *ms.last().unwrap();
    let mut checks = Vec::new();
    if cfg.acceptance.monotone {
        checks.push(check("monotone", r.monotone, format!("mean squares {ms:?}")));
    }
    if let Some(m) = cfg.acceptance.max_final {
        checks.push(check("max_final", last < m, format!("finest mean square {last:.3e} (limit {m})")));
    }
    let rate = r.decay.map_or(f64::NAN, |f| f.slope);
    let plot = ms.iter().all(|v| *v > 0.0).then(|| -> Result<Plot, RunError> {
        Ok(Plot {
            series: series_from_table(&r.table, "dt", "ms_residual", None)?,
            axes: Axes {
                title: "action identity residual".into(),
                x_label: "dt".into(),
                y_label: "mean square residual".into(),
                log_x: true,
                log_y: true,
                annotation: Some(format!("decay rate {rate:.3}")),
            },
        })
    });
    Ok(Report {
        headline: format!("finest mean-square residual {last:.3e}, monotone {}, rate {rate:.3}", r.monotone),
        table: r.table,
        checks,
        plot: plot.transpose()?,
        warnings: Vec::new(),
    })
}

fn eigen_check(cfg: &RunConfig) -> Result<Report, RunError> {
    let field = build_field(&cfg.field, cfg.mc.dt)?;
    let dim = field.dim();
    let psi = build_psi(&cfg.psi, dim)?;
    let energy = cfg.psi.energy.expect("checked by the parser");
    let pts = points(cfg, dim)?;
    let mut fd = Vec::with_capacity(pts.len());
    for p in &pts {
        let h = hamiltonian_fd(&field, &psi, p, FD_STEP)?;
        let p0 = psi.eval(p);
        fd.push((h - energy * p0).norm() / p0.norm().max(f64::MIN_POSITIVE));
    }
    let fd_ok = fd.iter().all(|r| *r <= cfg.acceptance.fd_tol);
    let mut cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    cols.extend(
        ["fd_residual", "estimate_re", "estimate_im", "expected_re", "expected_im", "residual", "std_error", "relative", "z"]
            .map(String::from),
    );
    let mut table = Table {
        columns: cols,
        ..Table::default()
    };
    let worst_fd = fd.iter().copied().fold(0.0, f64::max);
    let mut checks = vec![check(
        "finite_difference",
        fd_ok,
        format!("largest relative |H psi - E psi| = {worst_fd:.2e} (limit {})", cfg.acceptance.fd_tol),
    )];
    let mut warnings = Vec::new();
    let headline = if fd_ok {
        let grid = TimeGrid::with_step(cfg.mc.t, cfg.mc.dt)?;
        let query = SemigroupQuery::new(field.clone(), psi, pts.clone(), cfg.mc.paths, grid, cfg.seed)?;
        let res = eigen_residual(&query, energy)?;
        let mut parts = Vec::new();
        for (r, f) in res.iter().zip(&fd) {
            let mut row = r.point.clone();
            row.extend([
                *f,
                r.estimate.mean.re,
                r.estimate.mean.im,
                r.expected.re,
                r.expected.im,
                r.residual,
                r.std_error,
                r.relative,
                r.z_score(),
            ]);
            table.push(row);
            parts.push(format!(
                "{}: residual {:.3e} ± {:.3e} (z {:.2}, relative {:.3e})",
                fmt_point(&r.point),
                r.residual,
                r.std_error,
                r.z_score(),
                r.relative
            ));
            if let Some(w) = &r.estimate.warning {
                warnings.push(format!("{}: {w}", fmt_point(&r.point)));
            }
        }
        if let Some(m) = cfg.acceptance.max_z {
            let worst = res.iter().map(|r| r.z_score()).fold(0.0, f64::max);
            checks.push(check("max_z", worst <= m, format!("largest z {worst:.3} (limit {m})")));
        }
        if let Some(m) = cfg.acceptance.max_rel {
            let worst = res.iter().map(|r| r.relative).fold(0.0, f64::max);
            checks.push(check("max_rel", worst < m, format!("largest relative residual {worst:.3e} (limit {m})")));
        }
        parts.join("; ")
    } else {
        for (p, f) in pts.iter().zip(&fd) {
            let mut row = p.clone();
            row.push(*f);
            row.extend(std::iter::repeat_n(f64::NAN, 8));
            table.push(row);
        }
        format!("finite-difference check failed ({worst_fd:.2e}); Monte Carlo run skipped")
    };
    table.push_meta("field", field.name());
    table.push_meta("psi", cfg.psi.name_str());
    table.push_meta("energy", energy);
    table.push_meta("t", cfg.mc.t);
    table.push_meta("dt", cfg.mc.dt);
    table.push_meta("paths", cfg.mc.paths);
    table.push_meta("fd_step", FD_STEP);
    table.push_meta("target", "exp(-tH) psi = exp(-tE) psi for H psi = E psi");
    Ok(Report {
        table,
        headline,
        checks,
        plot: None,
        warnings,
    })
}

/// Runs the command on the current thread pool and returns its report.
pub fn compute(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut report = match cfg.command {
        Command::SimulateCoupling => simulate_coupling(cfg),
        Command::Kato => kato(cfg),
        Command::Semigroup => semigroup(cfg),
        Command::VerifyMain => verify_main(cfg),
        Command::VerifySmoothing => verify_smoothing(cfg),
        Command::VerifyNase => verify_nase(cfg),
        Command::EigenCheck => eigen_check(cfg),
    }?;
    let mut meta = vec![
        ("command".to_string(), cfg.command.as_str().to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
    ];
    if let Some(e) = cfg.exponent {
        meta.push(("beta".into(), e.beta.to_string()));
        meta.push(("q".into(), e.q.to_string()));
    }
    for (k, v) in report.table.meta.drain(..) {
        if !meta.iter().any(|(m, _)| *m == k) {
            meta.push((k, v));
        }
    }
    report.table.meta = meta;
    Ok(report)
}

/// [`compute`] on a pool of `cfg.threads` workers (the global pool if unset).
pub fn compute_with_threads(cfg: &RunConfig) -> Result<Report, RunError> {
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(|| compute(cfg)),
        None => compute(cfg),
    }
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn fresh_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    let first = dir.join(format!("{stem}.{ext}"));
    if !first.exists() {
        return first;
    }
    (1..)
        .map(|i| dir.join(format!("{stem}-{i}.{ext}")))
        .find(|p| !p.exists())
        .expect("some suffix is free")
}

/// Appends lines to `<dir>/run.log`.
pub fn log_lines(dir: &Path, lines: &[String]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join("run.log"))?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    Ok(())
}

/// Computes, writes the CSV (and SVG if asked) and logs the run.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let stamp = unix_seconds();
    let report = match compute_with_threads(cfg) {
        Ok(r) => r,
        Err(e) => {
            let _ = log_lines(&cfg.out, &[format!("[{stamp}] {} seed={} error: {e}", cfg.command.as_str(), cfg.seed)]);
            return Err(e);
        }
    };
    fs::create_dir_all(&cfg.out)?;
    let stem = format!("{}-{stamp}", cfg.command.as_str());
    let csv_path = fresh_path(&cfg.out, &stem, "csv");
    fs::write(&csv_path, emit_csv(&report.table)?)?;
    let mut log = Vec::new();
    let svg_path = match (&report.plot, cfg.svg) {
        (Some(p), true) => {
            let path = csv_path.with_extension("svg");
            fs::write(&path, emit_svg(&p.series, &p.axes)?)?;
            Some(path)
        }
        (None, true) => {
            log.push(format!("[{stamp}] no plot is defined for this result"));
            None
        }
        _ => None,
    };
    let status = if report.checks.is_empty() {
        "no thresholds requested"
    } else if report.passed() {
        "thresholds met"
    } else {
        "thresholds NOT met"
    };
    let summary = format!("{}: {} [{status}]", cfg.command.as_str(), report.headline);
    log.insert(
        0,
        format!(
            "[{stamp}] {} seed={} threads={} csv={} {summary}",
            cfg.command.as_str(),
            cfg.seed,
            cfg.threads.map_or("default".to_string(), |n| n.to_string()),
            csv_path.display()
        ),
    );
    for c in &report.checks {
        log.push(format!("[{stamp}] check {}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail));
    }
    for w in &report.warnings {
        log.push(format!("[{stamp}] warning: {w}"));
    }
    log_lines(&cfg.out, &log)?;
    Ok(Outcome {
        report,
        csv_path,
        svg_path,
        summary,
    })
}
