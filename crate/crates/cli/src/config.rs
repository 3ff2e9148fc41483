//! Line-oriented `key = value` run configuration.
//!
//! A file either names a preset, whose sweep points are then adjusted by the
//! remaining keys, or describes a single scenario starting from the base
//! configuration of its dimension. `sweep_key`/`sweep_values` expand every
//! point into one point per value.

use std::path::PathBuf;

use pnpb_core::presets::{base_1d, base_2d, Gaussian};
use pnpb_core::{
    preset, ExternalField, GammaGuard, InitialCondition, KernelFamily, PnpbError, Scenario,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration{}: {source}", point_suffix(.point))]
    Validation { point: String, source: PnpbError },

    #[error("invalid configuration: {0}")]
    Options(String),
}

fn point_suffix(point: &str) -> String {
    if point.is_empty() {
        String::new()
    } else {
        format!(" at sweep point {point}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dynamics,
    Equilibrium,
    Both,
}

impl Mode {
    pub fn dynamics(self) -> bool {
        matches!(self, Mode::Dynamics | Mode::Both)
    }

    pub fn equilibrium(self) -> bool {
        matches!(self, Mode::Equilibrium | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// A fully resolved run: every sweep point plus the output options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Preset name, or `run` for an explicit scenario.
    pub name: String,
    pub points: Vec<Scenario>,
    pub mode: Mode,
    pub output_dir: PathBuf,
    /// Times at which profiles are written; `None` means `t_end` only.
    pub output_times: Option<Vec<f64>>,
    pub equilibrium: EquilibriumOptions,
    pub kernel_cache: Option<PathBuf>,
}

const SCENARIO_KEYS: &[&str] = &[
    "N",
    "L",
    "eta",
    "lambda",
    "nu",
    "v0",
    "kernel",
    "valence",
    "volume",
    "diffusivity",
    "bulk",
    "external_field",
    "initial",
    "initial_values",
    "gaussian_amplitude",
    "gaussian_center_x",
    "gaussian_center_y",
    "gaussian_width",
    "dt",
    "t_end",
    "gamma_guard",
];

const RUN_KEYS: &[&str] = &[
    "preset",
    "dim",
    "mode",
    "output_dir",
    "output_times",
    "damping",
    "eq_tol",
    "eq_max_iter",
    "sweep_key",
    "sweep_values",
    "kernel_cache",
];

/// Keys accepted by [`parse_config`].
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    RUN_KEYS.iter().chain(SCENARIO_KEYS).copied()
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        message: message.into(),
    }
}

fn with_line<T>(e: &Entry, r: Result<T, String>) -> Result<T, ConfigError> {
    r.map_err(|m| parse_err(e.line, m))
}

fn tokenize(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key = value`, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !known_keys().any(|k| k == key) {
            return Err(parse_err(line, format!("unknown key {key:?}")));
        }
        if value.is_empty() {
            return Err(parse_err(line, format!("missing value for {key:?}")));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(parse_err(
                line,
                format!("{key:?} already set on line {}", prev.line),
            ));
        }
        entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(entries)
}

/// Parses a real number; `a/b` is accepted so that values like `1/3` can be
/// written exactly.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("not a number: {s:?}");
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            );
            Ok(a / b)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("not a nonnegative integer: {s:?}"))
}

fn parse_external(s: &str) -> Result<ExternalField, String> {
    let s = s.trim();
    if s == "none" {
        return Ok(ExternalField::None);
    }
    if let Some(rest) = s.strip_prefix("linear:") {
        return Ok(ExternalField::Linear(parse_list(rest)?));
    }
    if let Some(path) = s.strip_prefix("file:") {
        let text = std::fs::read_to_string(path.trim())
            .map_err(|e| format!("cannot read {path:?}: {e}"))?;
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(parse_real)
            .collect::<Result<Vec<f64>, String>>()?;
        return Ok(ExternalField::Tabulated(values));
    }
    Err(format!(
        "external_field must be `none`, `linear:<slopes>` or `file:<path>`, got {s:?}"
    ))
}

/// Overwrites one scenario field from its textual value.
fn apply(s: &mut Scenario, key: &str, value: &str) -> Result<(), String> {
    match key {
        "N" => s.n = parse_usize(value)?,
        "L" => s.half_extent = parse_real(value)?,
        "eta" => s.params.eta = parse_real(value)?,
        "lambda" => s.params.lambda = parse_real(value)?,
        "nu" => s.params.nu = parse_real(value)?,
        "v0" => s.params.v0 = Some(parse_real(value)?),
        "kernel" => s.params.kernel = value.parse::<KernelFamily>().map_err(|e| e.to_string())?,
        "valence" => {
            s.valence = value
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| format!("not an integer: {v:?}"))
                })
                .collect::<Result<_, _>>()?
        }
        "volume" => s.volume = parse_list(value)?,
        "diffusivity" => s.diffusivity = parse_list(value)?,
        "bulk" => {
            s.bulk = if value == "average" {
                None
            } else {
                Some(parse_list(value)?)
            }
        }
        "external_field" => s.params.external_field = parse_external(value)?,
        "initial" => {
            s.initial = match value {
                "uniform" => match &s.initial {
                    InitialCondition::Uniform(_) => s.initial.clone(),
                    InitialCondition::Gaussians(g) => InitialCondition::Uniform(vec![0.5; g.len()]),
                },
                "gaussian" => match &s.initial {
                    InitialCondition::Gaussians(_) => s.initial.clone(),
                    InitialCondition::Uniform(v) => InitialCondition::Gaussians(
                        (0..v.len())
                            .map(|_| Gaussian {
                                amplitude: 1.0,
                                center: [0.0, 0.0],
                                width: 1.0,
                            })
                            .collect(),
                    ),
                },
                other => {
                    return Err(format!(
                        "initial must be `uniform` or `gaussian`, got {other:?}"
                    ))
                }
            }
        }
        "initial_values" => s.initial = InitialCondition::Uniform(parse_list(value)?),
        "gaussian_amplitude" | "gaussian_center_x" | "gaussian_center_y" | "gaussian_width" => {
            let values = parse_list(value)?;
            let InitialCondition::Gaussians(g) = &mut s.initial else {
                return Err(format!("{key} needs `initial = gaussian` first"));
            };
            if values.len() != g.len() {
                g.resize(
                    values.len(),
                    Gaussian {
                        amplitude: 1.0,
                        center: [0.0, 0.0],
                        width: 1.0,
                    },
                );
            }
            for (p, v) in g.iter_mut().zip(values) {
                match key {
                    "gaussian_amplitude" => p.amplitude = v,
                    "gaussian_center_x" => p.center[0] = v,
                    "gaussian_center_y" => p.center[1] = v,
                    _ => p.width = v,
                }
            }
        }
        "dt" => s.dt = parse_real(value)?,
        "t_end" => s.t_end = parse_real(value)?,
        "gamma_guard" => {
            s.params.gamma_guard = match value {
                "strict" => GammaGuard::Strict,
                "permissive" => GammaGuard::Permissive,
                other => {
                    return Err(format!(
                        "gamma_guard must be `strict` or `permissive`, got {other:?}"
                    ))
                }
            }
        }
        other => return Err(format!("{other:?} is not a scenario key")),
    }
    Ok(())
}

fn base_for_dim(dim: usize) -> Scenario {
    let mut s = if dim == 2 { base_2d(0.0) } else { base_1d(0.0) };
    s.dim = dim;
    s
}

/// Parses and resolves a configuration file.
///
/// Syntax problems are [`ConfigError::Parse`] with the offending line;
/// scenarios that the model rejects are [`ConfigError::Validation`].
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let entries = tokenize(text)?;
    let get = |key: &str| entries.iter().find(|e| e.key == key);

    let (name, mut points) = match get("preset") {
        Some(e) => {
            let p = preset::<f64>(&e.value).map_err(|err| parse_err(e.line, err.to_string()))?;
            if let Some(d) = get("dim") {
                let dim = with_line(d, parse_usize(&d.value))?;
                if p.points.iter().any(|s| s.dim != dim) {
                    return Err(parse_err(
                        d.line,
                        format!("dim = {dim} contradicts preset {}", p.name),
                    ));
                }
            }
            (p.name.to_string(), p.points)
        }
        None => {
            let dim = match get("dim") {
                Some(d) => with_line(d, parse_usize(&d.value))?,
                None => 1,
            };
            if !(1..=2).contains(&dim) {
                return Err(ConfigError::Validation {
                    point: String::new(),
                    source: PnpbError::InvalidParameter(format!("dim = {dim} must be 1 or 2")),
                });
            }
            ("run".to_string(), vec![base_for_dim(dim)])
        }
    };

    for e in entries
        .iter()
        .filter(|e| SCENARIO_KEYS.contains(&e.key.as_str()))
    {
        for p in &mut points {
            with_line(e, apply(p, &e.key, &e.value))?;
        }
    }

    match (get("sweep_key"), get("sweep_values")) {
        (Some(k), Some(v)) => {
            if !SCENARIO_KEYS.contains(&k.value.as_str()) {
                return Err(parse_err(
                    k.line,
                    format!("cannot sweep over {:?}", k.value),
                ));
            }
            let mut swept = Vec::new();
            for p in &points {
                for raw in v.value.split(',').map(str::trim) {
                    let mut q = p.clone();
                    with_line(v, apply(&mut q, &k.value, raw))?;
                    let tag = format!("{}={raw}", k.value);
                    q.label = if p.label.is_empty() {
                        tag
                    } else {
                        format!("{},{tag}", p.label)
                    };
                    swept.push(q);
                }
            }
            points = swept;
        }
        (Some(e), None) | (None, Some(e)) => {
            return Err(parse_err(
                e.line,
                "sweep_key and sweep_values must be given together",
            ));
        }
        (None, None) => {}
    }

    for p in &points {
        p.validate().map_err(|source| ConfigError::Validation {
            point: p.label.clone(),
            source,
        })?;
    }

    let mode = match get("mode") {
        Some(e) => match e.value.as_str() {
            "dynamics" => Mode::Dynamics,
            "equilibrium" => Mode::Equilibrium,
            "both" => Mode::Both,
            other => {
                return Err(parse_err(
                    e.line,
                    format!("mode must be dynamics, equilibrium or both, got {other:?}"),
                ))
            }
        },
        None => Mode::Dynamics,
    };
    let output_times = match get("output_times") {
        Some(e) => {
            let mut t = with_line(e, parse_list(&e.value))?;
            if t.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(ConfigError::Options(format!(
                    "output_times {t:?} must be finite and >= 0"
                )));
            }
            t.sort_by(f64::total_cmp);
            t.dedup();
            Some(t)
        }
        None => None,
    };
    let mut equilibrium = EquilibriumOptions::default();
    if let Some(e) = get("damping") {
        equilibrium.damping = with_line(e, parse_real(&e.value))?;
    }
    if let Some(e) = get("eq_tol") {
        equilibrium.tol = with_line(e, parse_real(&e.value))?;
    }
    if let Some(e) = get("eq_max_iter") {
        equilibrium.max_iter = with_line(e, parse_usize(&e.value))?;
    }
    if !(equilibrium.damping > 0.0 && equilibrium.damping <= 1.0) {
        return Err(ConfigError::Options(format!(
            "damping = {} must lie in (0, 1]",
            equilibrium.damping
        )));
    }
    if !(equilibrium.tol > 0.0) {
        return Err(ConfigError::Options(format!(
            "eq_tol = {} must be positive",
            equilibrium.tol
        )));
    }

    Ok(RunConfig {
        name,
        points,
        mode,
        output_dir: get("output_dir")
            .map_or_else(|| PathBuf::from("output"), |e| PathBuf::from(&e.value)),
        output_times,
        equilibrium,
        kernel_cache: get("kernel_cache").map(|e| PathBuf::from(&e.value)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_and_lists() {
        assert_eq!(parse_real("1/4").unwrap(), 0.25);
        assert_eq!(parse_list("1, -2.5,3e-1").unwrap(), vec![1.0, -2.5, 0.3]);
        assert!(parse_real("x").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = parse_config("# header\n\neta = 2 # trailing\nN = 50\n").unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].params.eta, 2.0);
        assert_eq!(c.points[0].n, 50);
    }

    #[test]
    fn unknown_and_duplicate_keys_report_their_line() {
        match parse_config("eta = 1\nfoo = 2\n") {
            Err(ConfigError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_config("eta = 1\neta = 2\n") {
            Err(ConfigError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("eta 1\n"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn sweep_expands_every_point() {
        let c = parse_config("preset = test1-eta\nsweep_key = nu\nsweep_values = 1, 2\n").unwrap();
        assert_eq!(c.points.len(), 8);
        assert_eq!(c.points[1].label, "eta=0,nu=2");
        assert_eq!(c.points[1].params.nu, 2.0);
    }

    #[test]
    fn gaussian_initial_data() {
        let text = "dim = 1\ninitial = gaussian\ngaussian_amplitude = 1,2,3\ngaussian_center_x = 0,0.5,-0.5\n\
                    gaussian_center_y = 0,0,0\ngaussian_width = 4,4,4\nbulk = average\n";
        let c = parse_config(text).unwrap();
        match &c.points[0].initial {
            InitialCondition::Gaussians(g) => {
                assert_eq!(g.len(), 3);
                assert_eq!(g[1].amplitude, 2.0);
                assert_eq!(g[2].center, [-0.5, 0.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn options_are_checked() {
        assert!(matches!(
            parse_config("damping = 0\n"),
            Err(ConfigError::Options(_))
        ));
        assert!(matches!(
            parse_config("mode = fast\n"),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            parse_config("sweep_key = eta\n"),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            parse_config("dim = 3\n"),
            Err(ConfigError::Validation { .. })
        ));
    }
}
