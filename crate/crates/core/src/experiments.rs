//! Config-driven figure reproduction.
//!
//! A config is flat `key=value` text whose first meaningful line is
//! `schema=1`. `#` starts a comment. Every key has a per-experiment default,
//! so a config holding only `schema=1` and `experiment=fig1` is complete.
//!
//! | key | meaning |
//! |-----|---------|
//! | `experiment` | `fig1`..`fig5` or `custom` |
//! | `alpha_min`, `alpha_max`, `alpha_points` | coupling sweep |
//! | `alpha_include` | comma list of extra α merged into the sweep (may be empty) |
//! | `omega0`, `omega_c` | oscillator and cutoff frequency |
//! | `omega0_values` | comma list, fig2 panels and fig3 inset curves |
//! | `temperatures` | comma list, in `temperature_unit` |
//! | `temperature_unit` | `absolute`, `omega0` or `omega_c` |
//! | `phis` | comma list of squeezing angles |
//! | `grid_steps` | time cells per measure window |
//! | `coeff_steps` | time cells per coefficient table |
//! | `t_end`, `t_points` | fig2 time axis |
//! | `beta_max`, `squeeze_max`, `thermal_max` | optimizer box |
//! | `inset_alpha`, `inset_omega_c`, `inset_t_min`, `inset_t_max`, `inset_t_points` | fig3 inset |
//! | `channel`, `family`, `method`, `rate`, `gamma0`, `phi`, `thermal`, `window` | custom runs |
//!
//! Output tables hold one curve per column. Rows are computed in parallel on
//! a pool capped by `GAUSSNM_THREADS` and assembled in config order, so the
//! same config always yields the same bytes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::channels::{Channel, DampingRateSpec, Mode};
use crate::error::{Error, Result};
use crate::format::g12;
use crate::measure::{
    closed_form_coherent_damping, closed_form_coherent_qbm, dominant_delta_interval, first_order_coherent,
    first_order_coherent_thermal, first_order_squeezed_max, maximize_measure, Family, MeasureConfig, MeasureResult,
    ParamBounds, DAMPING_WINDOW,
};
use crate::spectral::{build_coefficients, divisibility_check, settling_horizon, ChannelCoefficients, EnvironmentSpec};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "GAUSSNM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Custom => "custom",
        }
    }

    pub fn from_figure(n: u32) -> Result<Self> {
        Ok(match n {
            1 => Experiment::Fig1,
            2 => Experiment::Fig2,
            3 => Experiment::Fig3,
            4 => Experiment::Fig4,
            5 => Experiment::Fig5,
            _ => return Err(Error::Config(format!("figure must be 1..5, got {n}"))),
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig1" => Experiment::Fig1,
            "fig2" => Experiment::Fig2,
            "fig3" => Experiment::Fig3,
            "fig4" => Experiment::Fig4,
            "fig5" => Experiment::Fig5,
            "custom" => Experiment::Custom,
            _ => return Err(Error::Config(format!("unknown experiment `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureUnit {
    Absolute,
    Omega0,
    OmegaC,
}

impl FromStr for TemperatureUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "absolute" => TemperatureUnit::Absolute,
            "omega0" => TemperatureUnit::Omega0,
            "omega_c" => TemperatureUnit::OmegaC,
            _ => return Err(Error::Config(format!("unknown temperature_unit `{s}`"))),
        })
    }
}

/// Measure evaluation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Numeric,
    Closed,
    FirstOrder,
}

impl FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "numeric" => MethodChoice::Numeric,
            "closed" => MethodChoice::Closed,
            "first-order" | "first_order" => MethodChoice::FirstOrder,
            _ => return Err(Error::Config(format!("unknown method `{s}`"))),
        })
    }
}

/// Channel, family and method of a single measure computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSpec {
    pub channel: String,
    pub family: String,
    pub method: MethodChoice,
    /// `paper` or `constant`.
    pub rate: String,
    pub gamma0: f64,
    pub phi: Option<f64>,
    pub equal_r: bool,
    pub thermal: f64,
    pub window: Option<f64>,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self {
            channel: "damping".into(),
            family: "coherent".into(),
            method: MethodChoice::Numeric,
            rate: "paper".into(),
            gamma0: 0.5,
            phi: None,
            equal_r: true,
            thermal: 0.0,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
    pub alpha_include: Vec<f64>,
    pub omega0: f64,
    pub omega_c: f64,
    pub omega0_values: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub temperature_unit: TemperatureUnit,
    pub phis: Vec<f64>,
    pub grid_steps: usize,
    pub coeff_steps: usize,
    pub t_end: f64,
    pub t_points: usize,
    pub bounds: ParamBounds,
    pub inset_alpha: f64,
    pub inset_omega_c: f64,
    pub inset_t_min: f64,
    pub inset_t_max: f64,
    pub inset_t_points: usize,
    pub custom: MeasureSpec,
}

impl ExperimentConfig {
    /// Defaults for one experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            alpha_min: 0.005,
            alpha_max: 0.15,
            alpha_points: 21,
            alpha_include: vec![0.1],
            omega0: 1.0,
            omega_c: 0.2,
            omega0_values: vec![1.0, 1.1],
            temperatures: vec![0.2],
            temperature_unit: TemperatureUnit::Omega0,
            phis: vec![0.05],
            grid_steps: 2000,
            coeff_steps: 2000,
            t_end: 30.0,
            t_points: 601,
            bounds: ParamBounds::default(),
            inset_alpha: 0.1,
            inset_omega_c: 0.3,
            inset_t_min: 0.05,
            inset_t_max: 2.0,
            inset_t_points: 40,
            custom: MeasureSpec::default(),
        };
        match experiment {
            Experiment::Fig1 => c.phis = vec![0.1, 0.2],
            Experiment::Fig2 => {
                c.omega_c = 1.0;
                c.omega0_values = vec![4.0, 6.0];
                c.temperatures = vec![0.0, 0.2, 1.0, 4.0];
                c.temperature_unit = TemperatureUnit::OmegaC;
            }
            Experiment::Fig3 => c.temperatures = vec![0.2, 0.5],
            Experiment::Fig4 => c.phis = vec![0.05, 0.1],
            Experiment::Fig5 => c.temperatures = vec![0.3, 0.9, 4.0, 8.0],
            Experiment::Custom => {}
        }
        c
    }

    /// Parses `schema=1` key-value text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        let mut schema_seen = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !schema_seen {
                if key != "schema" {
                    return Err(Error::Config("first entry must be `schema=1`".into()));
                }
                if value != "1" {
                    return Err(Error::Config(format!("unsupported schema `{value}`")));
                }
                schema_seen = true;
                continue;
            }
            if pairs.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", no + 1)));
            }
        }
        if !schema_seen {
            return Err(Error::Config("missing `schema=1` header".into()));
        }
        let experiment: Experiment = pairs
            .remove("experiment")
            .ok_or_else(|| Error::Config("missing key `experiment`".into()))?
            .parse()?;
        let mut c = Self::defaults(experiment);
        for (key, value) in &pairs {
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a number")))
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a count")))
        };
        let list = |v: &str| -> Result<Vec<f64>> { v.split(',').map(|s| num(s.trim())).collect() };
        match key {
            "alpha_min" => self.alpha_min = num(value)?,
            "alpha_max" => self.alpha_max = num(value)?,
            "alpha_points" => self.alpha_points = count(value)?,
            "alpha_include" => {
                self.alpha_include = if value.is_empty() { Vec::new() } else { list(value)? }
            }
            "omega0" => self.omega0 = num(value)?,
            "omega_c" => self.omega_c = num(value)?,
            "omega0_values" => self.omega0_values = list(value)?,
            "temperatures" => self.temperatures = list(value)?,
            "temperature_unit" => self.temperature_unit = value.parse()?,
            "phis" => self.phis = list(value)?,
            "grid_steps" => self.grid_steps = count(value)?,
            "coeff_steps" => self.coeff_steps = count(value)?,
            "t_end" => self.t_end = num(value)?,
            "t_points" => self.t_points = count(value)?,
            "beta_max" => self.bounds.beta_max = num(value)?,
            "squeeze_max" => self.bounds.squeeze_max = num(value)?,
            "thermal_max" => self.bounds.thermal_max = num(value)?,
            "inset_alpha" => self.inset_alpha = num(value)?,
            "inset_omega_c" => self.inset_omega_c = num(value)?,
            "inset_t_min" => self.inset_t_min = num(value)?,
            "inset_t_max" => self.inset_t_max = num(value)?,
            "inset_t_points" => self.inset_t_points = count(value)?,
            "channel" => self.custom.channel = value.to_string(),
            "family" => self.custom.family = value.to_string(),
            "method" => self.custom.method = value.parse()?,
            "rate" => self.custom.rate = value.to_string(),
            "gamma0" => self.custom.gamma0 = num(value)?,
            "phi" => self.custom.phi = Some(num(value)?),
            "equal_r" => {
                self.custom.equal_r = value
                    .parse()
                    .map_err(|_| Error::Config(format!("`equal_r`: `{value}` is not true/false")))?
            }
            "thermal" => self.custom.thermal = num(value)?,
            "window" => self.custom.window = Some(num(value)?),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let alpha_ok = |a: f64| a > 0.0 && a <= 0.5;
        if !(alpha_ok(self.alpha_min) && alpha_ok(self.alpha_max) && self.alpha_min <= self.alpha_max) {
            return Err(Error::Config(format!(
                "alpha range [{}, {}] must lie in (0, 0.5]",
                self.alpha_min, self.alpha_max
            )));
        }
        if self.alpha_points == 0 || self.t_points < 2 || self.inset_t_points == 0 {
            return Err(Error::Config("point counts must be positive".into()));
        }
        if self.grid_steps < 10 || self.coeff_steps < 10 {
            return Err(Error::Config("grid_steps and coeff_steps must be at least 10".into()));
        }
        let phi_ok = |p: f64| p > 0.0 && p <= PI;
        if !self.phis.iter().chain(self.custom.phi.iter()).all(|&p| phi_ok(p)) {
            return Err(Error::Config("phi values must lie in (0, π]".into()));
        }
        if !self.alpha_include.iter().all(|&a| alpha_ok(a)) {
            return Err(Error::Config("alpha_include values must lie in (0, 0.5]".into()));
        }
        if !self.temperatures.iter().all(|&t| t.is_finite() && t >= 0.0) {
            return Err(Error::Config("temperatures must be finite and ≥ 0".into()));
        }
        if !alpha_ok(self.inset_alpha) {
            return Err(Error::Config("inset_alpha must lie in (0, 0.5]".into()));
        }
        if !(self.inset_t_min >= 0.0 && self.inset_t_min <= self.inset_t_max) {
            return Err(Error::Config("inset temperature range is empty".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config("t_end must be > 0".into()));
        }
        let positive = [self.omega0, self.omega_c, self.inset_omega_c];
        if !positive.iter().chain(&self.omega0_values).all(|&w| w.is_finite() && w > 0.0) {
            return Err(Error::Config("frequencies must be finite and > 0".into()));
        }
        Ok(())
    }

    /// The α sweep: uniform between `alpha_min` and `alpha_max`, plus any
    /// `alpha_include` points inside that range, ascending.
    pub fn alphas(&self) -> Vec<f64> {
        let mut a = linspace(self.alpha_min, self.alpha_max, self.alpha_points);
        a.extend(
            self.alpha_include
                .iter()
                .filter(|&&x| x >= self.alpha_min && x <= self.alpha_max),
        );
        a.sort_by(f64::total_cmp);
        a.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs());
        a
    }

    /// A temperature in the config's unit, converted to absolute.
    pub fn absolute_temperature(&self, t: f64, omega0: f64, omega_c: f64) -> f64 {
        match self.temperature_unit {
            TemperatureUnit::Absolute => t,
            TemperatureUnit::Omega0 => t * omega0,
            TemperatureUnit::OmegaC => t * omega_c,
        }
    }

    fn measure_config(&self) -> MeasureConfig {
        MeasureConfig {
            grid_steps: self.grid_steps,
            bounds: self.bounds,
            ..Default::default()
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// A plot-ready table, one curve per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| g12(v))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
    }

    /// Column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Tables and the run summary of one experiment.
#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub experiment: Experiment,
    pub tables: Vec<Table>,
    /// Raw CSV files that are not numeric tables (custom runs).
    pub records: Vec<(String, String)>,
    pub summary: Value,
}

impl FigureOutput {
    /// Writes every table as `<name>.csv` and the summary as
    /// `<experiment>_summary.json` into `dir`. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.to_csv()?)?;
            written.push(path);
        }
        for (name, body) in &self.records {
            let path = dir.join(format!("{name}.csv"));
            fs::write(&path, body)?;
            written.push(path);
        }
        let path = dir.join(format!("{}_summary.json", self.experiment.name()));
        let text = serde_json::to_string_pretty(&self.summary).map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        written.push(path);
        Ok(written)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Worker pool sized by `GAUSSNM_THREADS` (all cores when unset).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

/// Runs an experiment on the worker pool.
pub fn run(cfg: &ExperimentConfig) -> Result<FigureOutput> {
    cfg.validate()?;
    worker_pool()?.install(|| match cfg.experiment {
        Experiment::Fig1 => run_fig1(cfg),
        Experiment::Fig2 => run_fig2(cfg),
        Experiment::Fig3 => run_fig3(cfg),
        Experiment::Fig4 => run_fig4(cfg),
        Experiment::Fig5 => run_fig5(cfg),
        Experiment::Custom => run_custom(cfg),
    })
}

fn cell_summary(alpha: f64, column: &str, r: &MeasureResult) -> Value {
    json!({
        "alpha": alpha,
        "column": column,
        "value": r.value,
        "method": r.method.name(),
        "argmax": r.argmax,
        "k": r.k,
        "intervals": r.intervals.len(),
        "optimizer": r.diagnostics.optimizer,
        "refinements": r.diagnostics.refinements,
        "first_order_flag": r.diagnostics.first_order_flag,
    })
}

/// Coefficient table at unit coupling over the settling horizon.
fn unit_table(env: &EnvironmentSpec, steps: usize) -> Result<(ChannelCoefficients, Value)> {
    let horizon = settling_horizon(env)?;
    let table = build_coefficients(env, 1.0, horizon, steps)?;
    let summary = json!({
        "env": env,
        "horizon": horizon,
        "steps": steps,
        "quad_error": table.quad_error(),
        "divisibility_violations": divisibility_check(&table).len(),
    });
    Ok((table, summary))
}

fn qbm_channel(unit: &ChannelCoefficients, alpha: f64, mode: Mode) -> Result<Channel> {
    Ok(Channel::qbm(Arc::new(unit.with_alpha(alpha)?), mode))
}

/// Runs `row(α)` for every α in parallel; each row yields values and per-cell
/// summaries in column order.
fn sweep<F>(alphas: &[f64], row: F) -> Result<(Vec<Vec<f64>>, Vec<Value>)>
where
    F: Fn(f64) -> Result<Vec<(String, MeasureResult)>> + Sync,
{
    let results: Vec<Vec<(String, MeasureResult)>> = alphas.par_iter().map(|&a| row(a)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(alphas.len());
    let mut cells = Vec::new();
    for (&a, cols) in alphas.iter().zip(results) {
        let mut row = vec![a];
        for (name, r) in cols {
            cells.push(cell_summary(a, &name, &r));
            row.push(r.value);
        }
        rows.push(row);
    }
    Ok((rows, cells))
}

fn summary(cfg: &ExperimentConfig, tables: Vec<Value>, cells: Vec<Value>) -> Value {
    json!({
        "experiment": cfg.experiment.name(),
        "config": cfg,
        "coefficient_tables": tables,
        "cells": cells,
    })
}

/// Damping channel with the oscillating rate: coherent and squeezed pairs,
/// exact and first order.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<FigureOutput> {
    let mcfg = cfg.measure_config();
    let mut header = vec!["alpha".to_string(), "coherent_exact".into(), "coherent_first_order".into()];
    for phi in &cfg.phis {
        header.push(format!("squeezed_exact_phi{}", g12(*phi)));
    }
    for phi in &cfg.phis {
        header.push(format!("squeezed_first_order_phi{}", g12(*phi)));
    }
    let (rows, cells) = sweep(&cfg.alphas(), |alpha| {
        let exact = Channel::damping(alpha, DampingRateSpec::PaperExample, Mode::Exact)?;
        let first = Channel::damping(alpha, DampingRateSpec::PaperExample, Mode::FirstOrder)?;
        let mut out = vec![
            (header[1].clone(), maximize_measure(Family::Coherent, &exact, &mcfg)?),
            (header[2].clone(), first_order_coherent(&first, None)?),
        ];
        for (i, &phi) in cfg.phis.iter().enumerate() {
            let fam = Family::Squeezed {
                phi: Some(phi),
                equal_r: true,
            };
            out.push((header[3 + i].clone(), maximize_measure(fam, &exact, &mcfg)?));
        }
        for (i, &phi) in cfg.phis.iter().enumerate() {
            let r = first_order_squeezed_max(phi, &first, None, cfg.bounds.squeeze_max)?;
            out.push((header[3 + cfg.phis.len() + i].clone(), r));
        }
        Ok(out)
    })?;
    Ok(FigureOutput {
        experiment: cfg.experiment,
        tables: vec![Table {
            name: "fig1".into(),
            header,
            rows,
        }],
        records: Vec::new(),
        summary: summary(cfg, Vec::new(), cells),
    })
}

/// Diffusion coefficient `Δ(t)` for each `(ω₀, T)`.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<FigureOutput> {
    let steps = cfg.t_points - 1;
    let combos: Vec<(f64, f64)> = cfg
        .omega0_values
        .iter()
        .flat_map(|&w| cfg.temperatures.iter().map(move |&t| (w, t)))
        .collect();
    let tables: Vec<(ChannelCoefficients, EnvironmentSpec)> = combos
        .par_iter()
        .map(|&(w0, t)| {
            let env = EnvironmentSpec::new(w0, cfg.omega_c, cfg.absolute_temperature(t, w0, cfg.omega_c))?;
            Ok((build_coefficients(&env, 1.0, cfg.t_end, steps)?, env))
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["t".to_string()];
    for &(w0, t) in &combos {
        header.push(format!("delta_omega0_{}_T{}", g12(w0), g12(t)));
    }
    let times = tables[0].0.times();
    let rows = (0..times.len())
        .map(|i| std::iter::once(times[i]).chain(tables.iter().map(|(c, _)| c.delta()[i])).collect())
        .collect();
    let table_summaries = tables
        .iter()
        .map(|(c, env)| json!({"env": env, "quad_error": c.quad_error(), "divisibility_violations": divisibility_check(c).len()}))
        .collect();
    Ok(FigureOutput {
        experiment: cfg.experiment,
        tables: vec![Table {
            name: "fig2".into(),
            header,
            rows,
        }],
        records: Vec::new(),
        summary: summary(cfg, table_summaries, Vec::new()),
    })
}

/// QBM on coherent pairs versus α per temperature, plus the first-order
/// temperature scan of the inset.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<FigureOutput> {
    let mcfg = cfg.measure_config();
    let units: Vec<(ChannelCoefficients, Value)> = cfg
        .temperatures
        .par_iter()
        .map(|&t| {
            let env = EnvironmentSpec::new(cfg.omega0, cfg.omega_c, cfg.absolute_temperature(t, cfg.omega0, cfg.omega_c))?;
            unit_table(&env, cfg.coeff_steps)
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["alpha".to_string()];
    for &t in &cfg.temperatures {
        header.push(format!("coherent_exact_T{}", g12(t)));
        header.push(format!("coherent_first_order_T{}", g12(t)));
    }
    let (rows, cells) = sweep(&cfg.alphas(), |alpha| {
        let mut out = Vec::new();
        for (i, (unit, _)) in units.iter().enumerate() {
            let exact = qbm_channel(unit, alpha, Mode::Exact)?;
            let first = qbm_channel(unit, alpha, Mode::FirstOrder)?;
            out.push((header[1 + 2 * i].clone(), maximize_measure(Family::Coherent, &exact, &mcfg)?));
            out.push((header[2 + 2 * i].clone(), first_order_coherent(&first, None)?));
        }
        Ok(out)
    })?;

    // Inset: first-order coherent measure against temperature.
    let temps = linspace(cfg.inset_t_min, cfg.inset_t_max, cfg.inset_t_points);
    let mut inset_header = vec!["T".to_string()];
    for &w0 in &cfg.omega0_values {
        inset_header.push(format!("coherent_first_order_omega0_{}", g12(w0)));
    }
    let jobs: Vec<(usize, f64, f64)> = temps
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| cfg.omega0_values.iter().map(move |&w| (i, t, w)))
        .collect();
    let values: Vec<(f64, Value)> = jobs
        .par_iter()
        .map(|&(_, t, w0)| {
            let env = EnvironmentSpec::new(w0, cfg.inset_omega_c, cfg.absolute_temperature(t, w0, cfg.inset_omega_c))?;
            let (unit, s) = unit_table(&env, cfg.coeff_steps)?;
            let r = first_order_coherent(&qbm_channel(&unit, cfg.inset_alpha, Mode::FirstOrder)?, None)?;
            Ok((r.value, s))
        })
        .collect::<Result<_>>()?;
    let per_row = cfg.omega0_values.len();
    let inset_rows = temps
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            std::iter::once(t)
                .chain(values[i * per_row..(i + 1) * per_row].iter().map(|v| v.0))
                .collect()
        })
        .collect();
    let mut table_summaries: Vec<Value> = units.into_iter().map(|u| u.1).collect();
    table_summaries.extend(values.into_iter().map(|v| v.1));
    Ok(FigureOutput {
        experiment: cfg.experiment,
        tables: vec![
            Table {
                name: "fig3".into(),
                header,
                rows,
            },
            Table {
                name: "fig3_inset".into(),
                header: inset_header,
                rows: inset_rows,
            },
        ],
        records: Vec::new(),
        summary: summary(cfg, table_summaries, cells),
    })
}

/// QBM at one temperature: coherent and equal-squeezing pairs per φ.
pub fn run_fig4(cfg: &ExperimentConfig) -> Result<FigureOutput> {
    let mcfg = cfg.measure_config();
    let t = *cfg
        .temperatures
        .first()
        .ok_or_else(|| Error::Config("fig4 needs one temperature".into()))?;
    let env = EnvironmentSpec::new(cfg.omega0, cfg.omega_c, cfg.absolute_temperature(t, cfg.omega0, cfg.omega_c))?;
    let (unit, table_summary) = unit_table(&env, cfg.coeff_steps)?;
    let mut header = vec!["alpha".to_string(), "coherent_exact".into(), "coherent_first_order".into()];
    for phi in &cfg.phis {
        header.push(format!("squeezed_exact_phi{}", g12(*phi)));
        header.push(format!("squeezed_first_order_phi{}", g12(*phi)));
    }
    let (rows, cells) = sweep(&cfg.alphas(), |alpha| {
        let exact = qbm_channel(&unit, alpha, Mode::Exact)?;
        let first = qbm_channel(&unit, alpha, Mode::FirstOrder)?;
        let mut out = vec![
            (header[1].clone(), maximize_measure(Family::Coherent, &exact, &mcfg)?),
            (header[2].clone(), first_order_coherent(&first, None)?),
        ];
        for (i, &phi) in cfg.phis.iter().enumerate() {
            let fam = Family::Squeezed {
                phi: Some(phi),
                equal_r: true,
            };
            out.push((header[3 + 2 * i].clone(), maximize_measure(fam, &exact, &mcfg)?));
            let fo = first_order_squeezed_max(phi, &first, None, cfg.bounds.squeeze_max)?;
            out.push((header[4 + 2 * i].clone(), fo));
        }
        Ok(out)
    })?;
    Ok(FigureOutput {
        experiment: cfg.experiment,
        tables: vec![Table {
            name: "fig4".into(),
            header,
            rows,
        }],
        records: Vec::new(),
        summary: summary(cfg, vec![table_summary], cells),
    })
}

/// QBM squeezed pairs at fixed φ, optimized over both squeezing parameters,
/// one curve per temperature.
pub fn run_fig5(cfg: &ExperimentConfig) -> Result<FigureOutput> {
    let mcfg = cfg.measure_config();
    let phi = *cfg
        .phis
        .first()
        .ok_or_else(|| Error::Config("fig5 needs one phi".into()))?;
    let units: Vec<(ChannelCoefficients, Value)> = cfg
        .temperatures
        .par_iter()
        .map(|&t| {
            let env = EnvironmentSpec::new(cfg.omega0, cfg.omega_c, cfg.absolute_temperature(t, cfg.omega0, cfg.omega_c))?;
            unit_table(&env, cfg.coeff_steps)
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["alpha".to_string()];
    for &t in &cfg.temperatures {
        header.push(format!("squeezed_exact_T{}", g12(t)));
    }
    let fam = Family::Squeezed {
        phi: Some(phi),
        equal_r: false,
    };
    let (rows, cells) = sweep(&cfg.alphas(), |alpha| {
        units
            .iter()
            .enumerate()
            .map(|(i, (unit, _))| {
                let exact = qbm_channel(unit, alpha, Mode::Exact)?;
                Ok((header[1 + i].clone(), maximize_measure(fam, &exact, &mcfg)?))
            })
            .collect()
    })?;
    Ok(FigureOutput {
        experiment: cfg.experiment,
        tables: vec![Table {
            name: "fig5".into(),
            header,
            rows,
        }],
        records: Vec::new(),
        summary: summary(cfg, units.into_iter().map(|u| u.1).collect(), cells),
    })
}

/// Parses a family name.
pub fn parse_family(name: &str, phi: Option<f64>, equal_r: bool) -> Result<Family> {
    Ok(match name {
        "coherent" => Family::Coherent,
        "squeezed" => Family::Squeezed { phi, equal_r },
        "coherent_thermal" | "coherent-thermal" => Family::CoherentThermal,
        "general_pure" | "general-pure" => Family::GeneralPure,
        _ => return Err(Error::Config(format!("unknown family `{name}`"))),
    })
}

/// Parses a damping rate name.
pub fn parse_rate(name: &str, gamma0: f64) -> Result<DampingRateSpec> {
    match name {
        "paper" => Ok(DampingRateSpec::PaperExample),
        "constant" => Ok(DampingRateSpec::Constant(gamma0)),
        _ => Err(Error::Config(format!("unknown rate `{name}`"))),
    }
}

/// Builds the channel of a measure spec at coupling `alpha`. For QBM the
/// unit-coupling table must be supplied.
pub fn build_channel(
    spec: &MeasureSpec,
    alpha: f64,
    mode: Mode,
    unit: Option<&ChannelCoefficients>,
) -> Result<Channel> {
    match spec.channel.as_str() {
        "damping" => Channel::damping(alpha, parse_rate(&spec.rate, spec.gamma0)?, mode),
        "qbm" => {
            let unit = unit.ok_or_else(|| Error::Config("qbm channel needs an environment".into()))?;
            qbm_channel(unit, alpha, mode)
        }
        other => Err(Error::Config(format!("unknown channel `{other}`"))),
    }
}

/// One measure computation along the requested path.
pub fn compute_measure(
    spec: &MeasureSpec,
    alpha: f64,
    unit: Option<&ChannelCoefficients>,
    mcfg: &MeasureConfig,
) -> Result<MeasureResult> {
    let family = parse_family(&spec.family, spec.phi, spec.equal_r)?;
    let mcfg = MeasureConfig {
        window: spec.window,
        ..*mcfg
    };
    match spec.method {
        MethodChoice::Numeric => {
            let ch = build_channel(spec, alpha, Mode::Exact, unit)?;
            maximize_measure(family, &ch, &mcfg)
        }
        MethodChoice::Closed => {
            if family != Family::Coherent {
                return Err(Error::UnsupportedShape(format!(
                    "the closed form exists for coherent pairs only, not `{}`; use --method numeric",
                    family
                )));
            }
            match spec.channel.as_str() {
                "damping" => closed_form_coherent_damping(
                    alpha,
                    &parse_rate(&spec.rate, spec.gamma0)?,
                    spec.window.unwrap_or(DAMPING_WINDOW),
                ),
                "qbm" => {
                    let unit = unit.ok_or_else(|| Error::Config("qbm channel needs an environment".into()))?;
                    let coeffs = unit.with_alpha(alpha)?;
                    match dominant_delta_interval(&coeffs) {
                        Some(iv) => closed_form_coherent_qbm(&coeffs, iv),
                        None => {
                            // No negativity: the measure vanishes.
                            let ch = Channel::qbm(Arc::new(coeffs), Mode::Exact);
                            let mut r = first_order_coherent(&ch, mcfg.window)?;
                            r.method = crate::measure::Method::ClosedForm;
                            Ok(r)
                        }
                    }
                }
                other => Err(Error::Config(format!("unknown channel `{other}`"))),
            }
        }
        MethodChoice::FirstOrder => {
            let ch = build_channel(spec, alpha, Mode::FirstOrder, unit)?;
            match family {
                Family::Coherent => first_order_coherent(&ch, spec.window),
                Family::CoherentThermal => first_order_coherent_thermal(spec.thermal, &ch, spec.window),
                Family::Squeezed { phi: Some(phi), .. } => {
                    first_order_squeezed_max(phi, &ch, spec.window, mcfg.bounds.squeeze_max)
                }
                Family::Squeezed { phi: None, .. } => Err(Error::UnsupportedShape(
                    "first-order squeezed measure needs a fixed phi".into(),
                )),
                Family::GeneralPure => Err(Error::UnsupportedShape(
                    "the general pure first-order formula is a reporting formula and is not maximized".into(),
                )),
            }
        }
    }
}

/// α sweep of one measure spec, one MeasureResult record per (T, α).
pub fn run_custom(cfg: &ExperimentConfig) -> Result<FigureOutput> {
    let mcfg = cfg.measure_config();
    let spec = &cfg.custom;
    let units: Vec<Option<(ChannelCoefficients, Value)>> = if spec.channel == "qbm" {
        cfg.temperatures
            .par_iter()
            .map(|&t| {
                let env =
                    EnvironmentSpec::new(cfg.omega0, cfg.omega_c, cfg.absolute_temperature(t, cfg.omega0, cfg.omega_c))?;
                unit_table(&env, cfg.coeff_steps).map(Some)
            })
            .collect::<Result<_>>()?
    } else {
        vec![None]
    };
    let alphas = cfg.alphas();
    let jobs: Vec<(usize, f64)> = (0..units.len())
        .flat_map(|u| alphas.iter().map(move |&a| (u, a)))
        .collect();
    let results: Vec<MeasureResult> = jobs
        .par_iter()
        .map(|&(u, a)| compute_measure(spec, a, units[u].as_ref().map(|x| &x.0), &mcfg))
        .collect::<Result<_>>()?;
    let mut body = String::from(MeasureResult::CSV_HEADER);
    body.push('\n');
    let mut cells = Vec::new();
    for (&(_, a), r) in jobs.iter().zip(&results) {
        body.push_str(&r.to_csv_record());
        body.push('\n');
        cells.push(cell_summary(a, &spec.family, r));
    }
    Ok(FigureOutput {
        experiment: cfg.experiment,
        tables: Vec::new(),
        records: vec![("custom".into(), body)],
        summary: summary(cfg, units.into_iter().flatten().map(|u| u.1).collect(), cells),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::parse("# comment\nschema=1\nexperiment=fig4\n").unwrap();
        assert_eq!(c.experiment, Experiment::Fig4);
        assert_eq!(c.phis, vec![0.05, 0.1]);
        assert_eq!(c.alphas().len(), 22);
        assert!(c.alphas().contains(&0.1));
        assert!((c.alphas()[21] - 0.15).abs() < 1e-15);
        let c = ExperimentConfig::parse("schema=1\nexperiment=fig4\nalpha_include=\n").unwrap();
        assert_eq!(c.alphas().len(), 21);
    }

    #[test]
    fn parses_overrides() {
        let c = ExperimentConfig::parse(
            "schema=1\nexperiment=fig2\ntemperatures = 0, 1 # two curves\ntemperature_unit=absolute\nt_points=11\n",
        )
        .unwrap();
        assert_eq!(c.temperatures, vec![0.0, 1.0]);
        assert_eq!(c.temperature_unit, TemperatureUnit::Absolute);
        assert_eq!(c.absolute_temperature(2.0, 4.0, 1.0), 2.0);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "experiment=fig1",
            "schema=2\nexperiment=fig1",
            "schema=1\n",
            "schema=1\nexperiment=fig9",
            "schema=1\nexperiment=fig1\nbogus=1",
            "schema=1\nexperiment=fig1\nalpha_max=0.7",
            "schema=1\nexperiment=fig1\nphis=0.1,4",
            "schema=1\nexperiment=fig1\nalpha_min=x",
            "schema=1\nexperiment=fig1\nphis=0.1\nphis=0.2",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn temperature_units() {
        let mut c = ExperimentConfig::defaults(Experiment::Fig3);
        assert_eq!(c.absolute_temperature(0.5, 2.0, 0.2), 1.0);
        c.temperature_unit = TemperatureUnit::OmegaC;
        assert!((c.absolute_temperature(0.5, 2.0, 0.2) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn table_csv_quotes_and_formats() {
        let t = Table {
            name: "x".into(),
            header: vec!["a".into(), "b,c".into()],
            rows: vec![vec![0.1, 1.0 / 3.0]],
        };
        assert_eq!(t.to_csv().unwrap(), "a,\"b,c\"\n0.1,0.333333333333\n");
        assert_eq!(t.column("b,c"), Some(vec![1.0 / 3.0]));
    }

    #[test]
    fn small_fig1_run() {
        let mut c = ExperimentConfig::defaults(Experiment::Fig1);
        c.alpha_min = 0.1;
        c.alpha_max = 0.1;
        c.alpha_points = 1;
        c.alpha_include.clear();
        let out = run(&c).unwrap();
        let t = out.table("fig1").unwrap();
        assert_eq!(t.header.len(), 7);
        let v = t.column("coherent_exact").unwrap()[0];
        assert!((v - 0.0459).abs() < 5e-4, "{v}");
        assert!(t.rows[0][3] > v && t.rows[0][4] > v);
    }

    #[test]
    fn custom_damping_records() {
        let mut c = ExperimentConfig::defaults(Experiment::Custom);
        c.alpha_points = 2;
        c.alpha_include.clear();
        c.custom.method = MethodChoice::Closed;
        let out = run(&c).unwrap();
        let body = &out.records[0].1;
        assert_eq!(body.lines().count(), 3);
        assert!(body.starts_with(MeasureResult::CSV_HEADER));
    }
}
