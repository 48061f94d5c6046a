//! TOML run configuration with `--set` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::dynsys::TimeKind;
use crate::exec::Execution;
use crate::linearize::MIN_LYAPUNOV_HORIZON;
use crate::models;
use crate::persist::{CertifyConfig, SweepAxis};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    focal: Vec<String>,
    #[serde(default)]
    rho: Option<String>,
    #[serde(default)]
    initial: Option<Vec<f64>>,
    #[serde(default)]
    assume_persistent: Vec<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHorizons {
    burn_in: Option<f64>,
    window: Option<f64>,
    lyapunov_horizon: Option<f64>,
    simulate: Option<f64>,
    omega_burn_in: Option<f64>,
    omega_window: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrids {
    ic_points_per_axis: Option<usize>,
    ic_lower: Option<f64>,
    state_bound: Option<f64>,
    omega_seeds: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    equilibrium_tol: Option<f64>,
    cycle_tol: Option<f64>,
    epsilon_floor: Option<f64>,
    extinction_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    formats: Option<Vec<String>>,
    seed: Option<u64>,
    stride: Option<usize>,
    sequential: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    name: String,
    min: f64,
    max: f64,
    steps: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(default)]
    vary: Vec<RawAxis>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    #[serde(default)]
    horizons: RawHorizons,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    grids: RawGrids,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
    Certificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: String,
    pub params: Vec<(String, f64)>,
    /// Focal blocks, each a `+`-joined list of component names.
    pub focal: Vec<String>,
    pub rho: String,
    pub initial: Option<Vec<f64>>,
    pub assume_persistent: Vec<String>,
    pub simulate_horizon: f64,
    pub stride: usize,
    pub certify: CertifyConfig,
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    pub sweep: Vec<SweepAxis>,
}

impl RunConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Canonical text of every resolved setting; equal strings mean equal runs.
    pub fn fingerprint(&self) -> String {
        format!("{self:?}")
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> Value {
    match format!("v = {value}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(value.into())),
        Err(_) => Value::String(value.into()),
    }
}

/// Applies `section.key=value` overrides to a parsed document.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<(), String> {
    for item in overrides {
        let (path, value) = item
            .split_once('=')
            .ok_or_else(|| format!("override `{item}` is not of the form key=value"))?;
        let keys: Vec<&str> = path.trim().split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(format!("override `{item}` has an empty key"));
        }
        let mut cursor = &mut *table;
        for key in &keys[..keys.len() - 1] {
            let entry = cursor
                .entry(key.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            cursor = entry
                .as_table_mut()
                .ok_or_else(|| format!("override `{item}`: `{key}` is not a section"))?;
        }
        cursor.insert(keys[keys.len() - 1].to_string(), parse_value(value.trim()));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{name}` must be positive, got {v}"))
    }
}

/// Reads the config file (if any), applies overrides and resolves defaults
/// for the chosen model.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, String> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            text.parse::<Table>().map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => Table::new(),
    };
    apply_overrides(&mut table, overrides)?;
    let raw: RawConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| e.to_string().trim().to_string())?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<RunConfig, String> {
    let info = models::lookup(&raw.model.name).map_err(|e| e.to_string())?;
    for key in raw.model.params.keys() {
        if !info.params.iter().any(|(n, _)| n == key) {
            return Err(format!("unknown parameter `{key}` for model `{}`", info.name));
        }
    }
    if raw.model.focal.is_empty() {
        return Err("`focal` must list at least one block".into());
    }
    for block in &raw.model.focal {
        for name in block.split('+') {
            if !info.components.contains(&name.trim()) {
                return Err(format!(
                    "focal component `{name}` is not one of {}",
                    info.components.join(", ")
                ));
            }
        }
    }
    for name in &raw.model.assume_persistent {
        if !info.components.contains(&name.as_str()) {
            return Err(format!("assume_persistent component `{name}` is unknown"));
        }
    }
    let rho = raw.model.rho.unwrap_or_else(|| "sum_abs".into());
    if !["sum_abs", "min_component"].contains(&rho.as_str()) {
        return Err(format!("`rho` must be sum_abs or min_component, got `{rho}`"));
    }
    if let Some(init) = &raw.model.initial {
        if init.len() != info.components.len() {
            return Err(format!("`initial` needs {} entries", info.components.len()));
        }
        if init.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err("`initial` must be nonnegative".into());
        }
    }

    let mut c = CertifyConfig::for_kind(info.kind);
    c.state_bound = info.state_bound;
    let h = raw.horizons;
    if let Some(v) = h.burn_in {
        c.burn_in = if v == 0.0 { 0.0 } else { positive("burn_in", v)? };
    }
    if let Some(v) = h.window {
        c.window = positive("window", v)?;
    }
    if let Some(v) = h.lyapunov_horizon {
        if !(v >= MIN_LYAPUNOV_HORIZON) {
            return Err(format!(
                "`lyapunov_horizon` must be at least {MIN_LYAPUNOV_HORIZON}, got {v}"
            ));
        }
        c.lyapunov_horizon = v;
    }
    if let Some(v) = h.omega_burn_in {
        c.omega_burn_in = positive("omega_burn_in", v)?;
    }
    if let Some(v) = h.omega_window {
        c.omega_window = positive("omega_window", v)?;
    }
    if let Some(v) = raw.integrator.dt {
        if info.kind == TimeKind::Continuous {
            c.dt = positive("dt", v)?;
        }
    }
    let g = raw.grids;
    if let Some(v) = g.ic_points_per_axis {
        if v == 0 {
            return Err("`ic_points_per_axis` must be at least 1".into());
        }
        c.ic_points_per_axis = v;
    }
    if let Some(v) = g.ic_lower {
        c.ic_lower = positive("ic_lower", v)?;
    }
    if let Some(v) = g.state_bound {
        c.state_bound = positive("state_bound", v)?;
    }
    if c.state_bound <= c.ic_lower {
        return Err("`state_bound` must exceed `ic_lower`".into());
    }
    if let Some(v) = g.omega_seeds {
        c.omega_seeds = v.max(1);
    }
    let t = raw.tolerances;
    if let Some(v) = t.equilibrium_tol {
        c.equilibrium_tol = positive("equilibrium_tol", v)?;
    }
    if let Some(v) = t.cycle_tol {
        c.cycle_tol = positive("cycle_tol", v)?;
    }
    if let Some(v) = t.epsilon_floor {
        c.epsilon_floor = positive("epsilon_floor", v)?;
    }
    if let Some(v) = t.extinction_tol {
        c.extinction_tol = positive("extinction_tol", v)?;
    }
    let o = raw.output;
    c.seed = o.seed.unwrap_or(0);
    if o.sequential.unwrap_or(false) {
        c.execution = Execution::Sequential;
    }
    let formats = o
        .formats
        .unwrap_or_else(|| vec!["csv".into(), "certificate".into()])
        .iter()
        .map(|f| match f.as_str() {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            "certificate" => Ok(Format::Certificate),
            other => Err(format!("unknown output format `{other}` (csv, svg, certificate)")),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let simulate_horizon = match h.simulate {
        Some(v) => positive("simulate", v)?,
        None => match info.kind {
            TimeKind::Discrete => 1e4,
            TimeKind::Continuous => 100.0,
        },
    };

    let mut sweep = Vec::new();
    if let Some(s) = raw.sweep {
        if s.vary.is_empty() || s.vary.len() > 2 {
            return Err("`sweep.vary` must list one or two parameters".into());
        }
        for a in s.vary {
            if !info.params.iter().any(|(n, _)| *n == a.name) {
                return Err(format!("sweep parameter `{}` is not a parameter of `{}`", a.name, info.name));
            }
            if !(a.min.is_finite() && a.max.is_finite()) {
                return Err(format!("sweep range for `{}` must be finite", a.name));
            }
            if a.steps == 1 {
                return Err(format!("sweep over `{}` needs at least 2 steps", a.name));
            }
            sweep.push(SweepAxis {
                name: a.name,
                min: a.min,
                max: a.max,
                steps: a.steps,
            });
        }
    }

    Ok(RunConfig {
        model: info.name.to_string(),
        params: raw.model.params.into_iter().collect(),
        focal: raw.model.focal,
        rho,
        initial: raw.model.initial,
        assume_persistent: raw.model.assume_persistent,
        simulate_horizon,
        stride: o.stride.unwrap_or(1).max(1),
        certify: c,
        directory: o.directory.unwrap_or_else(|| PathBuf::from("persistlab-out")),
        formats,
        sweep,
    })
}
