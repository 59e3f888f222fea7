//! Sectioned `key = value` run configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Str,
    Float,
    Int,
    Bool,
    List,
    Points,
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

const fn k(section: &'static str, key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        section,
        key,
        kind,
        default,
        help,
    }
}

/// Every accepted key.
pub const KEYS: &[KeySpec] = &[
    k("run", "command", Kind::Str, "required", "one of the seven commands"),
    k("run", "seed", Kind::Int, "0", "global seed"),
    k("run", "threads", Kind::Int, "all cores", "worker threads; results do not depend on it"),
    k("run", "out", Kind::Str, "out", "output directory"),
    k("run", "svg", Kind::Bool, "false", "also write an SVG plot"),
    k("run", "beta", Kind::Float, "-", "Hölder exponent in (0,1); q = 1/(1-beta)"),
    k("run", "q", Kind::Float, "-", "integrability exponent > 1; beta = 1 - 1/q"),
    k("run", "c0", Kind::Float, "10", "constant of the coupling bound"),
    k("field", "name", Kind::Str, "required", "zero, smooth_bump, constant_field_2d, constant_a, constant_v, coulomb"),
    k("field", "dim", Kind::Int, "2", "dimension for zero, smooth_bump, constant_v"),
    k("field", "amplitude", Kind::Float, "1", "smooth_bump: max |A|"),
    k("field", "radius", Kind::Float, "1", "smooth_bump: support radius"),
    k("field", "b", Kind::Float, "1", "constant_field_2d: field strength"),
    k("field", "c", Kind::List, "-", "constant_a: the constant vector"),
    k("field", "v", Kind::Float, "0", "constant_v: the constant"),
    k("field", "electrons", Kind::Int, "1", "coulomb: number of electrons"),
    k("field", "nuclei", Kind::Points, "-", "coulomb: nucleus positions in R^3"),
    k("field", "charges", Kind::List, "-", "coulomb: nuclear charges"),
    k("field", "cap", Kind::Float, "dt^(-1/2)", "coulomb: |V| cap during path integration"),
    k("mc", "paths", Kind::Int, "10000", "paths (or pairs) per cell"),
    k("mc", "dt", Kind::Float, "1e-3", "time step"),
    k("mc", "t", Kind::Float, "1", "horizon"),
    k("mc", "t_list", Kind::List, "t", "horizons for scans"),
    k("mc", "points", Kind::Points, "origin", "evaluation points"),
    k("mc", "dt_ladder", Kind::List, "-", "verify-nase: step sizes"),
    k("mc", "backend", Kind::Str, "monte-carlo", "verify-smoothing: monte-carlo or closed-form"),
    k("pairs", "delta", Kind::Float, "1", "separation for simulate-coupling and verify-nase"),
    k("pairs", "delta_list", Kind::List, "-", "verify-main: separations"),
    k("pairs", "center", Kind::Points, "origin", "midpoint of the pairs"),
    k("pairs", "direction", Kind::List, "e1", "direction of the pairs"),
    k("pairs", "bases", Kind::Points, "origin", "verify-smoothing: ladder base points"),
    k("pairs", "delta0", Kind::Float, "1", "verify-smoothing: largest ladder separation"),
    k("pairs", "levels", Kind::Int, "6", "verify-smoothing: ladder levels, halving each time"),
    k("psi", "name", Kind::Str, "gaussian", "gaussian, constant, half_space, landau"),
    k("psi", "value", Kind::Float, "1", "constant: the value"),
    k("psi", "axis", Kind::Int, "0", "half_space: the axis"),
    k("psi", "b", Kind::Float, "1", "landau: field strength"),
    k("psi", "energy", Kind::Float, "-", "eigen-check: claimed eigenvalue"),
    k("kato", "target", Kind::Str, "v", "v (|V|) or a (|A|)"),
    k("kato", "power", Kind::Float, "1", "integrand is |target|^power"),
    k("kato", "alpha", Kind::List, "0", "time weights s^(-alpha/2)"),
    k("kato", "t", Kind::Float, "1", "horizon"),
    k("kato", "t_ladder", Kind::List, "-", "decreasing horizons for a membership probe"),
    k("kato", "candidates", Kind::Points, "field's", "sup candidates"),
    k("acceptance", "max_z", Kind::Float, "-", "largest allowed |z| against the oracle"),
    k("acceptance", "max_rel", Kind::Float, "-", "eigen-check: largest relative residual"),
    k("acceptance", "fd_tol", Kind::Float, "1e-5", "eigen-check: relative tolerance of the finite-difference check"),
    k("acceptance", "expected", Kind::List, "-", "kato: expected value per alpha"),
    k("acceptance", "rel_tol", Kind::Float, "0.01", "kato: relative tolerance"),
    k("acceptance", "maximizer", Kind::List, "-", "kato: expected maximizer"),
    k("acceptance", "min_slope", Kind::Float, "-", "verify-main: smallest allowed delta-exponent"),
    k("acceptance", "bound", Kind::Bool, "false", "verify-main: require lhs <= rhs in every cell"),
    k("acceptance", "slope_tol", Kind::Float, "-", "verify-smoothing: allowed |slope + beta/2|"),
    k("acceptance", "max_final", Kind::Float, "-", "verify-nase: bound on the finest mean-square residual"),
    k("acceptance", "monotone", Kind::Bool, "false", "verify-nase: require a decreasing residual"),
];

const REQUIRED_SECTIONS: &[&str] = &["run", "field", "mc"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SimulateCoupling,
    Kato,
    Semigroup,
    VerifyMain,
    VerifySmoothing,
    VerifyNase,
    EigenCheck,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::SimulateCoupling,
        Command::Kato,
        Command::Semigroup,
        Command::VerifyMain,
        Command::VerifySmoothing,
        Command::VerifyNase,
        Command::EigenCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::SimulateCoupling => "simulate-coupling",
            Command::Kato => "kato",
            Command::Semigroup => "semigroup",
            Command::VerifyMain => "verify-main",
            Command::VerifySmoothing => "verify-smoothing",
            Command::VerifyNase => "verify-nase",
            Command::EigenCheck => "eigen-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    pub beta: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldName {
    Zero,
    SmoothBump,
    ConstantField2d,
    ConstantA,
    ConstantV,
    Coulomb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub name: FieldName,
    pub dim: usize,
    pub amplitude: f64,
    pub radius: f64,
    pub b: f64,
    pub c: Vec<f64>,
    pub v: f64,
    pub electrons: usize,
    pub nuclei: Vec<Vec<f64>>,
    pub charges: Vec<f64>,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    MonteCarlo,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub dt: f64,
    pub t: f64,
    pub t_list: Vec<f64>,
    pub points: Option<Vec<Vec<f64>>>,
    pub dt_ladder: Vec<f64>,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairsConfig {
    pub delta: f64,
    pub delta_list: Vec<f64>,
    pub center: Option<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    pub bases: Option<Vec<Vec<f64>>>,
    pub delta0: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiName {
    Gaussian,
    Constant,
    HalfSpace,
    Landau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiConfig {
    pub name: PsiName,
    pub value: f64,
    pub axis: usize,
    pub b: f64,
    pub energy: Option<f64>,
}

impl PsiConfig {
    pub fn name_str(&self) -> &'static str {
        match self.name {
            PsiName::Gaussian => "gaussian",
            PsiName::Constant => "constant",
            PsiName::HalfSpace => "half_space",
            PsiName::Landau => "landau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoTarget {
    V,
    A,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatoConfig {
    pub target: KatoTarget,
    pub power: f64,
    pub alpha: Vec<f64>,
    pub t: f64,
    pub t_ladder: Vec<f64>,
    pub candidates: Option<Vec<Vec<f64>>>,
}

/// Thresholds; a run exits with status 0 only if every one that is set holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Acceptance {
    pub max_z: Option<f64>,
    pub max_rel: Option<f64>,
    pub fd_tol: f64,
    pub expected: Vec<f64>,
    pub rel_tol: f64,
    pub maximizer: Option<Vec<f64>>,
    pub min_slope: Option<f64>,
    pub bound: bool,
    pub slope_tol: Option<f64>,
    pub max_final: Option<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub svg: bool,
    pub exponent: Option<Exponent>,
    pub c0: f64,
    pub field: FieldConfig,
    pub mc: McConfig,
    pub pairs: PairsConfig,
    pub psi: PsiConfig,
    pub kato: KatoConfig,
    pub acceptance: Acceptance,
}

struct Entry {
    value: String,
    line: usize,
}

struct Raw {
    entries: HashMap<(&'static str, &'static str), Entry>,
}

impl Raw {
    fn get(&self, section: &'static str, key: &'static str) -> Option<&Entry> {
        self.entries.get(&(section, key))
    }

    fn str_or(&self, s: &'static str, k: &'static str, default: &str) -> (String, Option<usize>) {
        match self.get(s, k) {
            Some(e) => (e.value.clone(), Some(e.line)),
            None => (default.to_string(), None),
        }
    }

    fn float(&self, s: &'static str, k: &'static str) -> Result<Option<f64>, ConfigError> {
        self.get(s, k).map(|e| parse_float(&e.value, e.line)).transpose()
    }

    fn float_or(&self, s: &'static str, k: &'static str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.float(s, k)?.unwrap_or(default))
    }

    fn positive_or(&self, s: &'static str, k: &'static str, default: f64) -> Result<f64, ConfigError> {
        let v = self.float_or(s, k, default)?;
        if v <= 0.0 {
            return err(self.get(s, k).map(|e| e.line), format!("{k} must be positive, got {v}"));
        }
        Ok(v)
    }

    fn int(&self, s: &'static str, k: &'static str) -> Result<Option<u64>, ConfigError> {
        self.get(s, k)
            .map(|e| {
                e.value
                    .parse::<u64>()
                    .or_else(|_| err(Some(e.line), format!("`{}` is not a non-negative integer", e.value)))
            })
            .transpose()
    }

    fn usize_or(&self, s: &'static str, k: &'static str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.int(s, k)?.map_or(default, |v| v as usize))
    }

    fn bool_or(&self, s: &'static str, k: &'static str, default: bool) -> Result<bool, ConfigError> {
        match self.get(s, k) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                v => err(Some(e.line), format!("`{v}` is not true or false")),
            },
        }
    }

    fn list(&self, s: &'static str, k: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(s, k).map(|e| parse_list(&e.value, e.line)).transpose()
    }

    fn positive_list(&self, s: &'static str, k: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.list(s, k)? else { return Ok(None) };
        if let Some(x) = v.iter().find(|x| **x <= 0.0) {
            return err(self.get(s, k).map(|e| e.line), format!("{k} entries must be positive, got {x}"));
        }
        Ok(Some(v))
    }

    fn points(&self, s: &'static str, k: &'static str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        self.get(s, k)
            .map(|e| {
                e.value
                    .split(';')
                    .map(|p| parse_list(p, e.line))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()
    }

    fn require(&self, s: &'static str, k: &'static str, why: &str) -> Result<(), ConfigError> {
        if self.get(s, k).is_none() {
            return err(None, format!("missing required key `{k}` in [{s}] ({why})"));
        }
        Ok(())
    }
}

fn parse_float(v: &str, line: usize) -> Result<f64, ConfigError> {
    match v.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(Some(line), format!("`{}` is not a finite number", v.trim())),
    }
}

fn parse_list(v: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    let out: Vec<f64> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_float(s, line))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return err(Some(line), "empty list");
    }
    Ok(out)
}

fn lex(text: &str) -> Result<Raw, ConfigError> {
    let mut entries = HashMap::new();
    let mut section: Option<&'static str> = None;
    let mut seen_sections = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(Some(line), format!("malformed section header `{content}`"));
            };
            let name = name.trim();
            let Some(spec) = KEYS.iter().find(|s| s.section == name) else {
                return err(Some(line), format!("unknown section [{name}]"));
            };
            if seen_sections.contains(&spec.section) {
                return err(Some(line), format!("section [{name}] appears twice"));
            }
            seen_sections.push(spec.section);
            section = Some(spec.section);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(Some(line), format!("expected `key = value`, found `{content}`"));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            return err(Some(line), format!("key `{key}` appears before any section"));
        };
        let Some(spec) = KEYS.iter().find(|s| s.section == sec && s.key == key) else {
            return err(Some(line), format!("unknown key `{key}` in [{sec}]"));
        };
        if value.is_empty() {
            return err(Some(line), format!("key `{key}` has no value"));
        }
        if entries
            .insert(
                (spec.section, spec.key),
                Entry {
                    value: value.to_string(),
                    line,
                },
            )
            .is_some()
        {
            return err(Some(line), format!("key `{key}` set twice in [{sec}]"));
        }
    }
    for s in REQUIRED_SECTIONS {
        if !seen_sections.contains(s) {
            return err(None, format!("missing required section [{s}]"));
        }
    }
    Ok(Raw { entries })
}

fn parse_exponent(raw: &Raw) -> Result<Option<Exponent>, ConfigError> {
    match (raw.get("run", "beta"), raw.get("run", "q")) {
        (Some(_), Some(e)) => err(
            Some(e.line),
            "give exactly one of beta and q: q = 1/(1-beta) is derived from beta",
        ),
        (Some(e), None) => {
            let beta = parse_float(&e.value, e.line)?;
            if !(beta > 0.0 && beta < 1.0) {
                return err(Some(e.line), format!("β must lie in (0,1), got {beta}"));
            }
            Ok(Some(Exponent {
                beta,
                q: 1.0 / (1.0 - beta),
            }))
        }
        (None, Some(e)) => {
            let q = parse_float(&e.value, e.line)?;
            if !(q > 1.0) {
                return err(Some(e.line), format!("q must exceed 1, got {q}"));
            }
            Ok(Some(Exponent { beta: 1.0 - 1.0 / q, q }))
        }
        (None, None) => Ok(None),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw = lex(text)?;

    let (cmd, cmd_line) = raw.str_or("run", "command", "");
    if cmd_line.is_none() {
        return err(None, "missing required key `command` in [run]");
    }
    let Some(command) = Command::ALL.into_iter().find(|c| c.as_str() == cmd) else {
        let names: Vec<_> = Command::ALL.iter().map(|c| c.as_str()).collect();
        return err(cmd_line, format!("unknown command `{cmd}`; expected one of {}", names.join(", ")));
    };
    let threads = match raw.int("run", "threads")? {
        Some(0) => return err(raw.get("run", "threads").map(|e| e.line), "threads must be at least 1"),
        t => t.map(|t| t as usize),
    };
    let exponent = parse_exponent(&raw)?;

    let (fname, fline) = raw.str_or("field", "name", "");
    let field_name = match fname.as_str() {
        "zero" => FieldName::Zero,
        "smooth_bump" => FieldName::SmoothBump,
        "constant_field_2d" => FieldName::ConstantField2d,
        "constant_a" => FieldName::ConstantA,
        "constant_v" => FieldName::ConstantV,
        "coulomb" => FieldName::Coulomb,
        "" => return err(None, "missing required key `name` in [field]"),
        other => return err(fline, format!("unknown field name `{other}`")),
    };
    match field_name {
        FieldName::ConstantA => raw.require("field", "c", "constant_a needs its vector")?,
        FieldName::Coulomb => {
            raw.require("field", "nuclei", "coulomb needs nucleus positions")?;
            raw.require("field", "charges", "coulomb needs nuclear charges")?;
        }
        _ => {}
    }
    let field = FieldConfig {
        name: field_name,
        dim: raw.usize_or("field", "dim", 2)?,
        amplitude: raw.float_or("field", "amplitude", 1.0)?,
        radius: raw.positive_or("field", "radius", 1.0)?,
        b: raw.float_or("field", "b", 1.0)?,
        c: raw.list("field", "c")?.unwrap_or_default(),
        v: raw.float_or("field", "v", 0.0)?,
        electrons: raw.usize_or("field", "electrons", 1)?,
        nuclei: raw.points("field", "nuclei")?.unwrap_or_default(),
        charges: raw.list("field", "charges")?.unwrap_or_default(),
        cap: match raw.float("field", "cap")? {
            Some(c) if c <= 0.0 => return err(raw.get("field", "cap").map(|e| e.line), "cap must be positive"),
            c => c,
        },
    };
    if let Some(e) = raw.get("field", "nuclei") {
        if field.nuclei.iter().any(|p| p.len() != 3) {
            return err(Some(e.line), "nuclei must be points of R^3");
        }
    }

    let t = raw.positive_or("mc", "t", 1.0)?;
    let (backend, bline) = raw.str_or("mc", "backend", "monte-carlo");
    let mc = McConfig {
        paths: raw.usize_or("mc", "paths", 10_000)?,
        dt: raw.positive_or("mc", "dt", 1e-3)?,
        t,
        t_list: raw.positive_list("mc", "t_list")?.unwrap_or_else(|| vec![t]),
        points: raw.points("mc", "points")?,
        dt_ladder: raw.positive_list("mc", "dt_ladder")?.unwrap_or_default(),
        backend: match backend.as_str() {
            "monte-carlo" => Backend::MonteCarlo,
            "closed-form" => Backend::ClosedForm,
            other => return err(bline, format!("unknown backend `{other}`; expected monte-carlo or closed-form")),
        },
    };
    if mc.paths < 2 {
        return err(raw.get("mc", "paths").map(|e| e.line), "paths must be at least 2");
    }

    let pairs = PairsConfig {
        delta: raw.positive_or("pairs", "delta", 1.0)?,
        delta_list: raw.positive_list("pairs", "delta_list")?.unwrap_or_default(),
        center: match raw.points("pairs", "center")? {
            Some(mut p) if p.len() == 1 => p.pop(),
            Some(_) => return err(raw.get("pairs", "center").map(|e| e.line), "center must be a single point"),
            None => None,
        },
        direction: raw.list("pairs", "direction")?,
        bases: raw.points("pairs", "bases")?,
        delta0: raw.positive_or("pairs", "delta0", 1.0)?,
        levels: raw.usize_or("pairs", "levels", 6)?,
    };

    let (pname, pline) = raw.str_or("psi", "name", "gaussian");
    let psi = PsiConfig {
        name: match pname.as_str() {
            "gaussian" => PsiName::Gaussian,
            "constant" => PsiName::Constant,
            "half_space" => PsiName::HalfSpace,
            "landau" => PsiName::Landau,
            other => return err(pline, format!("unknown initial function `{other}`")),
        },
        value: raw.float_or("psi", "value", 1.0)?,
        axis: raw.usize_or("psi", "axis", 0)?,
        b: raw.float_or("psi", "b", 1.0)?,
        energy: raw.float("psi", "energy")?,
    };

    let (target, tline) = raw.str_or("kato", "target", "v");
    let kato = KatoConfig {
        target: match target.as_str() {
            "v" => KatoTarget::V,
            "a" => KatoTarget::A,
            other => return err(tline, format!("unknown Kato target `{other}`; expected v or a")),
        },
        power: raw.positive_or("kato", "power", 1.0)?,
        alpha: raw.list("kato", "alpha")?.unwrap_or_else(|| vec![0.0]),
        t: raw.positive_or("kato", "t", 1.0)?,
        t_ladder: raw.positive_list("kato", "t_ladder")?.unwrap_or_default(),
        candidates: raw.points("kato", "candidates")?,
    };

    let acceptance = Acceptance {
        max_z: raw.float("acceptance", "max_z")?,
        max_rel: raw.float("acceptance", "max_rel")?,
        fd_tol: raw.positive_or("acceptance", "fd_tol", 1e-5)?,
        expected: raw.list("acceptance", "expected")?.unwrap_or_default(),
        rel_tol: raw.positive_or("acceptance", "rel_tol", 0.01)?,
        maximizer: raw.list("acceptance", "maximizer")?,
        min_slope: raw.float("acceptance", "min_slope")?,
        bound: raw.bool_or("acceptance", "bound", false)?,
        slope_tol: raw.float("acceptance", "slope_tol")?,
        max_final: raw.float("acceptance", "max_final")?,
        monotone: raw.bool_or("acceptance", "monotone", false)?,
    };

    match command {
        Command::VerifyMain => {
            if exponent.is_none() {
                return err(None, "verify-main needs beta or q in [run]");
            }
            raw.require("pairs", "delta_list", "verify-main scans these separations")?;
        }
        Command::VerifySmoothing => {
            if exponent.is_none() {
                return err(None, "verify-smoothing needs beta or q in [run]");
            }
        }
        Command::VerifyNase => raw.require("mc", "dt_ladder", "verify-nase refines over these steps")?,
        Command::EigenCheck => raw.require("psi", "energy", "eigen-check needs the claimed eigenvalue")?,
        Command::Kato => {
            if !acceptance.expected.is_empty() && acceptance.expected.len() != kato.alpha.len() {
                return err(
                    raw.get("acceptance", "expected").map(|e| e.line),
                    format!("{} expected values for {} alphas", acceptance.expected.len(), kato.alpha.len()),
                );
            }
        }
        Command::SimulateCoupling | Command::Semigroup => {}
    }

    let (out, _) = raw.str_or("run", "out", "out");
    Ok(RunConfig {
        command,
        seed: raw.int("run", "seed")?.unwrap_or(0),
        threads,
        out: PathBuf::from(out),
        svg: raw.bool_or("run", "svg", false)?,
        exponent,
        c0: raw.positive_or("run", "c0", 10.0)?,
        field,
        mc,
        pairs,
        psi,
        kato,
        acceptance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[run]\ncommand = simulate-coupling\n[field]\nname = zero\n[mc]\n").unwrap();
        assert_eq!(c.command, Command::SimulateCoupling);
        assert_eq!((c.seed, c.threads, c.svg), (0, None, false));
        assert_eq!(c.mc.t_list, vec![1.0]);
        assert_eq!(c.pairs.delta, 1.0);
        assert_eq!(c.exponent, None);
    }

    #[test]
    fn comments_and_whitespace() {
        let c = parse_config("# top\n[run]  \n command=kato # inline\n\n[field]\nname = coulomb\nnuclei = 0 0 0; 1,0,0\ncharges = 1, 2\n[mc]\n")
            .unwrap();
        assert_eq!(c.field.nuclei, vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        assert_eq!(c.field.charges, vec![1.0, 2.0]);
    }

    #[test]
    fn lines_are_reported() {
        let e = parse_config("[run]\ncommand = kato\nfoo = 1\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("unknown key `foo`"));
        let e = parse_config("[run]\ncommand = kato\n[field]\nname = nope\n[mc]\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = parse_config("[run]\ncommand = kato\n[field]\nname = zero\n[mc]\ndt = fast\n").unwrap_err();
        assert_eq!(e.line, Some(6));
    }
}
