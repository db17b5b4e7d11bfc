//! The fidelity-based non-Markovianity measure
//!
//! ```text
//! N = max over pairs of  Σ_I [F(t⁺_I) − F(t⁻_I)]
//! ```
//!
//! where `[t⁺_I, t⁻_I]` are the intervals on which the fidelity of the evolved
//! pair decreases. Intervals are located as runs of decreasing samples on a
//! uniform grid; each endpoint is then polished by golden-section search on the
//! continuous trajectory, so the measure uses exact endpoint fidelities and
//! never a differentiated grid.

use std::f64::consts::{E, PI};
use std::fmt;

use serde::Serialize;

use crate::channels::{sign_intervals, Channel, DampingRateSpec, Mode, FIRST_ORDER_LIMIT};
use crate::error::{Error, Result};
use crate::format::g12;
use crate::gauss::{fidelity_unchecked, make_gaussian, AffineMap, GaussianState, StatePairParams, StateParams};
use crate::optimize::{maximize, OptimizerConfig, OptimizerReport};
use crate::spectral::{ChannelCoefficients, EnvironmentSpec};

/// Default number of grid cells per observation window.
pub const DEFAULT_GRID_STEPS: usize = 2000;

/// Sample-to-sample drops smaller than this are treated as rounding noise.
const NOISE_FLOOR: f64 = 1e-14;

/// Relative (to the window) tolerance on refined extremum locations.
const REFINE_TOL: f64 = 1e-6;

/// A maximal interval of fidelity decrease.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativityInterval {
    /// Onset of the decrease.
    pub t_plus: f64,
    /// End of the decrease.
    pub t_minus: f64,
    /// `F(t⁺) − F(t⁻)`.
    pub contribution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub t: f64,
    pub fidelity: f64,
    pub maximum: bool,
}

/// Fidelity of one pair sampled along a grid, with refined extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTrajectory {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub extrema: Vec<Extremum>,
    pub intervals: Vec<NegativityInterval>,
    /// Number of golden-section refinements performed.
    pub refinements: usize,
    /// A first-order channel left its validity range somewhere on the grid.
    pub flagged: bool,
}

/// Sum of the decrease contributions.
pub fn measure_from_trajectory(traj: &FidelityTrajectory) -> f64 {
    traj.intervals.iter().map(|i| i.contribution).sum()
}

/// A channel sampled on a uniform grid, shared by every pair evaluated on it.
struct SampledChannel<'a> {
    channel: &'a Channel,
    times: Vec<f64>,
    maps: Vec<AffineMap>,
    flagged: bool,
    span: f64,
}

impl<'a> SampledChannel<'a> {
    fn new(channel: &'a Channel, times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Domain("empty time grid".into()));
        }
        let mut maps = Vec::with_capacity(times.len());
        let mut flagged = false;
        for &t in &times {
            maps.push(channel.map_at(t)?);
            if channel.mode() == Mode::FirstOrder {
                flagged |= channel.x_at(t)?.abs() > FIRST_ORDER_LIMIT;
            }
        }
        let span = times[times.len() - 1] - times[0];
        Ok(Self {
            channel,
            times,
            maps,
            flagged,
            span,
        })
    }

    fn fidelity_with(s0: &GaussianState, s1: &GaussianState, map: &AffineMap) -> Result<f64> {
        fidelity_unchecked(&s0.apply(map), &s1.apply(map))
    }

    fn trajectory(&self, s0: &GaussianState, s1: &GaussianState) -> Result<FidelityTrajectory> {
        let f: Vec<f64> = self
            .maps
            .iter()
            .map(|m| Self::fidelity_with(s0, s1, m))
            .collect::<Result<_>>()?;
        let at = |t: f64| -> f64 {
            self.channel
                .map_at(t)
                .and_then(|m| Self::fidelity_with(s0, s1, &m))
                .unwrap_or(f64::NAN)
        };
        let n = f.len();
        let tol = REFINE_TOL * self.span.max(f64::MIN_POSITIVE);
        let mut extrema = Vec::new();
        let mut intervals = Vec::new();
        let mut refinements = 0;
        let bracket = |i: usize| (self.times[i.saturating_sub(1)], self.times[(i + 1).min(n - 1)]);
        let mut i = 0;
        while i + 1 < n {
            if !(f[i + 1] < f[i] - NOISE_FLOOR) {
                i += 1;
                continue;
            }
            let start = i;
            let mut end = i + 1;
            while end + 1 < n && f[end + 1] < f[end] - NOISE_FLOOR {
                end += 1;
            }
            let (lo, hi) = bracket(start);
            let (mut tp, mut fp) = golden(at, lo, hi, tol);
            if !(fp >= f[start]) {
                tp = self.times[start];
                fp = f[start];
            }
            let (lo, hi) = bracket(end);
            let (mut tm, neg) = golden(|t| -at(t), lo, hi, tol);
            let mut fm = -neg;
            if !(fm <= f[end]) {
                tm = self.times[end];
                fm = f[end];
            }
            refinements += 2;
            extrema.push(Extremum {
                t: tp,
                fidelity: fp,
                maximum: true,
            });
            extrema.push(Extremum {
                t: tm,
                fidelity: fm,
                maximum: false,
            });
            intervals.push(NegativityInterval {
                t_plus: tp,
                t_minus: tm,
                contribution: (fp - fm).max(0.0),
            });
            i = end;
        }
        Ok(FidelityTrajectory {
            times: self.times.clone(),
            fidelity: f,
            extrema,
            intervals,
            refinements,
            flagged: self.flagged,
        })
    }
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let t = 0.5 * (lo + hi);
    let ft = f(t);
    // The bracket ends are candidates too when the extremum sits on a boundary.
    let mut best = (t, ft);
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 || best.1.is_nan() {
            best = (x, fx);
        }
    }
    best
}

/// Uniform grid of `steps` cells over `[0, window]`.
pub fn window_grid(window: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| window * i as f64 / steps as f64).collect()
}

/// Fidelity of the evolved pair along `grid`, with decrease intervals.
pub fn fidelity_trajectory(pair: &StatePairParams, channel: &Channel, grid: &[f64]) -> Result<FidelityTrajectory> {
    let (s0, s1) = pair.states()?;
    SampledChannel::new(channel, grid.to_vec())?.trajectory(&s0, &s1)
}

/// Families of initial pairs, with the symmetry reductions applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Family {
    /// Pure coherent pairs; only `K = |Δβ|²/2` matters.
    Coherent,
    /// Pure squeezed vacua `(r₁, φ)` and `(r₂, 0)`. `phi: None` optimizes the
    /// angle too; `equal_r` imposes `r₁ = r₂`.
    Squeezed { phi: Option<f64>, equal_r: bool },
    /// Displaced thermal states with equal occupation `N`.
    CoherentThermal,
    /// Squeezed and displaced pure states.
    GeneralPure,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Coherent => "coherent",
            Family::Squeezed { .. } => "squeezed",
            Family::CoherentThermal => "coherent_thermal",
            Family::GeneralPure => "general_pure",
        }
    }

    fn bounds(&self, b: &ParamBounds) -> (Vec<f64>, Vec<f64>) {
        let d_max = 2.0 * b.beta_max;
        match self {
            Family::Coherent => (vec![0.0], vec![d_max]),
            Family::Squeezed { phi, equal_r } => {
                let mut lo = vec![0.0];
                let mut hi = vec![b.squeeze_max];
                if !equal_r {
                    lo.push(0.0);
                    hi.push(b.squeeze_max);
                }
                if phi.is_none() {
                    lo.push(b.phi_min);
                    hi.push(PI);
                }
                (lo, hi)
            }
            Family::CoherentThermal => (vec![0.0, 0.0], vec![d_max, b.thermal_max]),
            Family::GeneralPure => (
                vec![0.0, 0.0, 0.0, 0.0, 0.0],
                vec![b.squeeze_max, b.squeeze_max, PI, d_max, PI],
            ),
        }
    }

    /// Maps optimizer coordinates to a pair.
    fn pair(&self, p: &[f64]) -> StatePairParams {
        let displaced = |d: f64, theta: f64| {
            (
                StateParams::coherent(0.5 * d, theta),
                StateParams::coherent(0.5 * d, theta + PI),
            )
        };
        match self {
            Family::Coherent => {
                let (a, b) = displaced(p[0], 0.0);
                StatePairParams::from_states(a, b)
            }
            Family::Squeezed { phi, equal_r } => {
                let r1 = p[0];
                let (r2, rest) = if *equal_r { (r1, &p[1..]) } else { (p[1], &p[2..]) };
                let angle = phi.unwrap_or_else(|| rest[0]);
                StatePairParams::from_states(StateParams::squeezed(r1, angle), StateParams::squeezed(r2, 0.0))
            }
            Family::CoherentThermal => {
                let (mut a, mut b) = displaced(p[0], 0.0);
                a.thermal = p[1];
                b.thermal = p[1];
                StatePairParams::from_states(a, b)
            }
            Family::GeneralPure => {
                let (mut a, mut b) = displaced(p[3], p[4]);
                a.squeeze = p[0];
                a.squeeze_angle = p[2];
                b.squeeze = p[1];
                StatePairParams::from_states(a, b)
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Search box for the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamBounds {
    /// Upper bound on each `|β|`.
    pub beta_max: f64,
    /// Upper bound on each `r`.
    pub squeeze_max: f64,
    /// Upper bound on `N`.
    pub thermal_max: f64,
    /// Lower bound on `φ` when the angle is optimized.
    pub phi_min: f64,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            beta_max: 6.0,
            squeeze_max: 6.0,
            thermal_max: 5.0,
            phi_min: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureConfig {
    /// Observation window `[0, window]`; defaults to the channel's.
    pub window: Option<f64>,
    pub grid_steps: usize,
    pub bounds: ParamBounds,
    pub optimizer: OptimizerConfig,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            window: None,
            grid_steps: DEFAULT_GRID_STEPS,
            bounds: ParamBounds::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NumericOpt,
    ClosedForm,
    FirstOrder,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::NumericOpt => "numeric_opt",
            Method::ClosedForm => "closed_form",
            Method::FirstOrder => "first_order",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub optimizer: Option<OptimizerReport>,
    pub refinements: usize,
    /// A first-order result left its validity range.
    pub first_order_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureResult {
    pub value: f64,
    pub argmax: StatePairParams,
    /// `K` of the maximizing coherent pair, when meaningful.
    pub k: Option<f64>,
    pub intervals: Vec<NegativityInterval>,
    pub method: Method,
    pub family: &'static str,
    pub channel: &'static str,
    pub alpha: f64,
    pub env: Option<EnvironmentSpec>,
    pub diagnostics: Diagnostics,
}

impl MeasureResult {
    pub const CSV_HEADER: &'static str = "family,channel,alpha,T,omega0,omega_c,value,method,\
param_N1,param_N2,param_r1,param_r2,param_phi1,param_phi2,\
param_beta1,param_beta2,param_theta1,param_theta2,param_K";

    /// One CSV line matching [`Self::CSV_HEADER`]; environment columns are
    /// empty for the damping channel.
    pub fn to_csv_record(&self) -> String {
        let env = |f: fn(&EnvironmentSpec) -> f64| self.env.as_ref().map(|e| g12(f(e))).unwrap_or_default();
        let p = &self.argmax;
        let cols = [
            self.family.to_string(),
            self.channel.to_string(),
            g12(self.alpha),
            env(|e| e.temperature),
            env(|e| e.omega0),
            env(|e| e.omega_c),
            g12(self.value),
            self.method.name().to_string(),
            g12(p.thermal[0]),
            g12(p.thermal[1]),
            g12(p.squeeze[0]),
            g12(p.squeeze[1]),
            g12(p.squeeze_angle[0]),
            g12(p.squeeze_angle[1]),
            g12(p.beta_mag[0]),
            g12(p.beta_mag[1]),
            g12(p.beta_arg[0]),
            g12(p.beta_arg[1]),
            self.k.map(g12).unwrap_or_default(),
        ];
        cols.join(",")
    }
}

fn check_window(channel: &Channel, cfg: &MeasureConfig) -> Result<f64> {
    let window = cfg.window.unwrap_or_else(|| channel.default_window());
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::Domain(format!("window must be finite and > 0, got {window}")));
    }
    if let Channel::Qbm(q) = channel {
        let end = q.coefficients().t_end();
        if window > end * (1.0 + 1e-12) {
            return Err(Error::Range { t: window, start: 0.0, end });
        }
    }
    Ok(window)
}

/// Maximizes the measure over a family of initial pairs.
pub fn maximize_measure(family: Family, channel: &Channel, cfg: &MeasureConfig) -> Result<MeasureResult> {
    if let Family::Squeezed { phi: Some(phi), .. } = family {
        if !(phi.is_finite() && phi > 0.0 && phi <= PI) {
            return Err(Error::Domain(format!("phi must lie in (0, π], got {phi}")));
        }
    }
    let window = check_window(channel, cfg)?;
    let sampled = SampledChannel::new(channel, window_grid(window, cfg.grid_steps))?;
    let (lower, upper) = family.bounds(&cfg.bounds);
    let mut opt_cfg = cfg.optimizer;
    if family == Family::GeneralPure {
        opt_cfg.grid_points = opt_cfg.grid_points.min(5);
    }
    let objective = |p: &[f64]| -> f64 {
        let pair = family.pair(p);
        pair.states()
            .and_then(|(s0, s1)| sampled.trajectory(&s0, &s1))
            .map(|t| measure_from_trajectory(&t))
            .unwrap_or(f64::NAN)
    };
    let opt = maximize(objective, &lower, &upper, &opt_cfg)?;
    let argmax = family.pair(&opt.point);
    let (s0, s1) = argmax.states()?;
    let traj = sampled.trajectory(&s0, &s1)?;
    let k = matches!(family, Family::Coherent | Family::CoherentThermal).then(|| argmax.coherent_k());
    Ok(MeasureResult {
        value: measure_from_trajectory(&traj),
        argmax,
        k,
        intervals: traj.intervals,
        method: Method::NumericOpt,
        family: family.name(),
        channel: channel.name(),
        alpha: channel.alpha(),
        env: channel.env().copied(),
        diagnostics: Diagnostics {
            optimizer: Some(opt.report),
            refinements: traj.refinements,
            first_order_flag: traj.flagged,
        },
    })
}

fn coherent_pair(k: f64) -> StatePairParams {
    let d = (2.0 * k).sqrt();
    StatePairParams::from_states(StateParams::coherent(0.5 * d, 0.0), StateParams::coherent(0.5 * d, PI))
}

/// Best coherent backflow between two values of the exponent weight `u`,
/// `max_K [e^{−K u⁺} − e^{−K u⁻}]`, and the optimal `K`.
fn coherent_optimum(u_plus: f64, u_minus: f64) -> (f64, f64) {
    if !(u_minus > u_plus) {
        return (0.0, 1.0 / u_plus);
    }
    let k = (u_minus / u_plus).ln() / (u_minus - u_plus);
    let value = (-k * u_plus).exp() - (-k * u_minus).exp();
    (value.max(0.0), k)
}

/// Default observation window of the damping channel.
pub const DAMPING_WINDOW: f64 = 4.0 * PI;

/// Exact maximal measure over coherent pairs for a damping rate with a single
/// negativity interval.
pub fn closed_form_coherent_damping(alpha: f64, spec: &DampingRateSpec, window: f64) -> Result<MeasureResult> {
    let channel = Channel::damping(alpha, spec.clone(), Mode::Exact)?;
    let intervals = spec.negativity_intervals(window, 8000);
    if intervals.len() != 1 {
        return Err(Error::UnsupportedShape(format!(
            "the closed form needs exactly one negativity interval of the rate, found {}; use the numeric method",
            intervals.len()
        )));
    }
    let (tp, tm) = intervals[0];
    let xp = channel.x_at(tp)?;
    let xm = channel.x_at(tm)?;
    let (value, k) = if xp > xm {
        coherent_optimum((-xp).exp(), (-xm).exp())
    } else {
        (0.0, xp.exp())
    };
    let f = |x: f64| (-k * (-x).exp()).exp();
    Ok(MeasureResult {
        value,
        argmax: coherent_pair(k),
        k: Some(k),
        intervals: vec![NegativityInterval {
            t_plus: tp,
            t_minus: tm,
            contribution: (f(xp) - f(xm)).max(0.0),
        }],
        method: Method::ClosedForm,
        family: Family::Coherent.name(),
        channel: "damping",
        alpha,
        env: None,
        diagnostics: Diagnostics::default(),
    })
}

/// Exponent weight `u(t)` of a coherent pair, `F(t) = exp(−K u(t))`.
fn coherent_weight(map: &AffineMap) -> Result<f64> {
    let total = map.cov_scale + map.noise;
    if !(total > 0.0) {
        return Err(Error::Domain(format!(
            "coefficient table is unphysical: e^(-x) + w = {total} ≤ 0"
        )));
    }
    Ok(map.mean_scale * map.mean_scale / total)
}

/// Exact maximal coherent backflow of the QBM channel over one interval.
pub fn closed_form_coherent_qbm(coeffs: &ChannelCoefficients, interval: (f64, f64)) -> Result<MeasureResult> {
    let (tp, tm) = interval;
    if !(tp < tm) {
        return Err(Error::Domain(format!("interval must satisfy t+ < t-, got ({tp}, {tm})")));
    }
    let channel = Channel::qbm(std::sync::Arc::new(coeffs.clone()), Mode::Exact);
    // Physicality along the interval, checked on the grid.
    for &t in coeffs.times().iter().filter(|&&t| t >= tp && t <= tm) {
        coherent_weight(&channel.map_at(t)?)?;
    }
    let up = coherent_weight(&channel.map_at(tp)?)?;
    let um = coherent_weight(&channel.map_at(tm)?)?;
    let (value, k) = coherent_optimum(up, um);
    Ok(MeasureResult {
        value,
        argmax: coherent_pair(k),
        k: Some(k),
        intervals: vec![NegativityInterval {
            t_plus: tp,
            t_minus: tm,
            contribution: value,
        }],
        method: Method::ClosedForm,
        family: Family::Coherent.name(),
        channel: "qbm",
        alpha: coeffs.alpha(),
        env: coeffs.env().copied(),
        diagnostics: Diagnostics::default(),
    })
}

/// Intervals where `Δ(t) < 0` on the coefficient grid, with endpoints
/// interpolated linearly between samples.
pub fn delta_negativity_intervals(coeffs: &ChannelCoefficients) -> Vec<(f64, f64)> {
    let t = coeffs.times();
    let d = coeffs.delta();
    let n = t.len();
    if n < 2 {
        return Vec::new();
    }
    let h = coeffs.step();
    let interp = |s: f64| {
        let i = ((s / h) as usize).min(n - 2);
        let w = (s - t[i]) / h;
        d[i] + w * (d[i + 1] - d[i])
    };
    // The bisection converges on the linear interpolant's roots.
    sign_intervals(interp, 0.0, t[n - 1], n - 1)
}

/// The `Δ`-negativity interval with the largest `|∫Δ|`.
pub fn dominant_delta_interval(coeffs: &ChannelCoefficients) -> Option<(f64, f64)> {
    let channel = Channel::qbm(std::sync::Arc::new(coeffs.with_alpha(1.0).ok()?), Mode::FirstOrder);
    let y = |t: f64| match &channel {
        Channel::Qbm(q) => q.xyw(t).map(|v| v.1).unwrap_or(0.0),
        _ => 0.0,
    };
    delta_negativity_intervals(coeffs)
        .into_iter()
        .map(|iv| (iv, (y(iv.0) - y(iv.1)).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(iv, _)| iv)
}

/// Intervals that govern first-order backflow and the drop of the relevant
/// integral across each: `x` for damping, `y` for QBM.
fn first_order_drops(channel: &Channel, window: f64) -> Result<Vec<(f64, f64, f64)>> {
    match channel {
        Channel::Damping { rate, .. } => rate
            .negativity_intervals(window, 8000)
            .into_iter()
            .map(|(a, b)| Ok((a, b, (channel.x_at(a)? - channel.x_at(b)?).abs())))
            .collect(),
        Channel::Qbm(q) => {
            let c = q.coefficients();
            delta_negativity_intervals(c)
                .into_iter()
                .filter(|iv| iv.0 < window)
                .map(|(a, b)| {
                    let b = b.min(window);
                    Ok((a, b, (q.xyw(a)?.1 - q.xyw(b)?.1).abs()))
                })
                .collect()
        }
    }
}

fn first_order_result(
    value_per_drop: f64,
    drops: &[(f64, f64, f64)],
    family: Family,
    argmax: StatePairParams,
    k: Option<f64>,
    channel: &Channel,
) -> MeasureResult {
    let total: f64 = drops.iter().map(|d| d.2).sum();
    MeasureResult {
        value: value_per_drop * total,
        argmax,
        k,
        intervals: drops
            .iter()
            .map(|&(a, b, drop)| NegativityInterval {
                t_plus: a,
                t_minus: b,
                contribution: value_per_drop * drop,
            })
            .collect(),
        method: Method::FirstOrder,
        family: family.name(),
        channel: channel.name(),
        alpha: channel.alpha(),
        env: channel.env().copied(),
        diagnostics: Diagnostics {
            first_order_flag: total > FIRST_ORDER_LIMIT,
            ..Default::default()
        },
    }
}

/// First-order coherent measure: `(1/e) Σ_I |Δx_I|` for damping and
/// `(1/e) Σ_I |Δy_I|` for QBM, attained at `K = 1`.
pub fn first_order_coherent(channel: &Channel, window: Option<f64>) -> Result<MeasureResult> {
    let window = window.unwrap_or_else(|| channel.default_window());
    let drops = first_order_drops(channel, window)?;
    Ok(first_order_result(1.0 / E, &drops, Family::Coherent, coherent_pair(1.0), Some(1.0), channel))
}

/// First-order coherent measure for displaced thermal pairs with occupation
/// `N`: the pure-state value divided by `2N + 1`.
pub fn first_order_coherent_thermal(n: f64, channel: &Channel, window: Option<f64>) -> Result<MeasureResult> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::Domain(format!("thermal occupation must be ≥ 0, got {n}")));
    }
    let window = window.unwrap_or_else(|| channel.default_window());
    let drops = first_order_drops(channel, window)?;
    let mut pair = coherent_pair(1.0);
    pair.thermal = [n, n];
    Ok(first_order_result(
        1.0 / (E * (2.0 * n + 1.0)),
        &drops,
        Family::CoherentThermal,
        pair,
        Some(1.0),
        channel,
    ))
}

/// `g₁(r, φ) = 8 cosh 2r (k − √k)/k²`, `k = 3 + cos φ + cosh 4r (1 − cos φ)`,
/// evaluated as written.
pub fn g1_squeezed(r: f64, phi: f64) -> f64 {
    let k = 3.0 + phi.cos() + (4.0 * r).cosh() * (1.0 - phi.cos());
    8.0 * (2.0 * r).cosh() * (k - k.sqrt()) / (k * k)
}

/// One-sided slopes of the fidelity of a pure squeezed pair at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingSlopes {
    /// `dF/dx` along the damping direction (`x = y`).
    pub g1: f64,
    /// `∂F/∂y` at fixed `x = 0`.
    pub s_delta: f64,
    /// `∂F/∂x` at fixed `y`, obtained as `g1 − s_delta`.
    pub s_gamma: f64,
}

/// Richardson-extrapolated forward difference, for functions that are smooth
/// on `h ≥ 0` only.
fn forward_derivative<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    let f0 = f(0.0);
    let d = |h: f64| (f(h) - f0) / h;
    let r1 = |h: f64| 2.0 * d(0.5 * h) - d(h);
    (4.0 * r1(0.5 * h) - r1(h)) / 3.0
}

/// Slopes of `F` for the pair `(r₁, φ)`, `(r₂, 0)` under
/// `σ → (1 − x) σ + y I/2`.
///
/// The fidelity of two pure states has a `|·|` kink at the origin, so only
/// one-sided derivatives into the physical region exist.
pub fn squeezing_slopes(r1: f64, r2: f64, phi: f64) -> Result<SqueezingSlopes> {
    let a = make_gaussian(&StateParams::squeezed(r1, phi))?;
    let b = make_gaussian(&StateParams::squeezed(r2, 0.0))?;
    let f = |x: f64, y: f64| {
        let m = AffineMap {
            mean_scale: 1.0 - 0.5 * x,
            cov_scale: 1.0 - x,
            noise: y,
        };
        fidelity_unchecked(&a.apply(&m), &b.apply(&m)).unwrap_or(f64::NAN)
    };
    let h = 1e-3 / (2.0 * r1.max(r2)).cosh();
    let g1 = forward_derivative(|s| f(s, s), h);
    let s_delta = forward_derivative(|s| f(0.0, s), h);
    Ok(SqueezingSlopes {
        g1,
        s_delta,
        s_gamma: g1 - s_delta,
    })
}

/// Finite-difference `dF/dx` at `x = 0⁺` for the equal-squeezing pair.
pub fn g1_oracle(r: f64, phi: f64) -> Result<f64> {
    Ok(squeezing_slopes(r, r, phi)?.g1)
}

/// First-order squeezed measure at fixed `r₁ = r₂ = r`: `g₁ Σ|Δx|` for damping,
/// `S_Δ Σ|Δy|` for QBM.
pub fn first_order_squeezed(r: f64, phi: f64, channel: &Channel, window: Option<f64>) -> Result<MeasureResult> {
    first_order_squeezed_pair(r, r, phi, channel, window)
}

/// As [`first_order_squeezed`] for unequal squeezing.
pub fn first_order_squeezed_pair(
    r1: f64,
    r2: f64,
    phi: f64,
    channel: &Channel,
    window: Option<f64>,
) -> Result<MeasureResult> {
    let window = window.unwrap_or_else(|| channel.default_window());
    let slopes = squeezing_slopes(r1, r2, phi)?;
    let coefficient = match channel {
        Channel::Damping { .. } => slopes.g1,
        Channel::Qbm(_) => slopes.s_delta,
    };
    let drops = first_order_drops(channel, window)?;
    let pair = StatePairParams::from_states(StateParams::squeezed(r1, phi), StateParams::squeezed(r2, 0.0));
    Ok(first_order_result(
        coefficient.max(0.0),
        &drops,
        Family::Squeezed {
            phi: Some(phi),
            equal_r: r1 == r2,
        },
        pair,
        None,
        channel,
    ))
}

/// [`first_order_squeezed`] maximized over `r ∈ [0, r_max]`.
pub fn first_order_squeezed_max(phi: f64, channel: &Channel, window: Option<f64>, r_max: f64) -> Result<MeasureResult> {
    let slope = |r: f64| -> f64 {
        squeezing_slopes(r, r, phi)
            .map(|s| match channel {
                Channel::Damping { .. } => s.g1,
                Channel::Qbm(_) => s.s_delta,
            })
            .unwrap_or(f64::NAN)
    };
    let cfg = OptimizerConfig {
        grid_points: 9,
        diameter_tol: 1e-8,
        ..Default::default()
    };
    let opt = maximize(|p: &[f64]| slope(p[0]), &[0.0], &[r_max], &cfg)?;
    let mut result = first_order_squeezed(opt.point[0], phi, channel, window)?;
    result.diagnostics.optimizer = Some(opt.report);
    Ok(result)
}

/// First-order coefficient for a general pure pair,
/// `S(P_S, 0) K e^{−K} + C(P, 0) g₁(P_S)`, times `Σ|Δx|`. A reporting formula:
/// the two contributions are not independent, so nothing is maximized.
pub fn first_order_general_pure(pair: &StatePairParams, channel: &Channel, window: Option<f64>) -> Result<MeasureResult> {
    let window = window.unwrap_or_else(|| channel.default_window());
    for i in 0..2 {
        if pair.thermal[i] != 0.0 {
            return Err(Error::Domain("general pure pairs must have N = 0".into()));
        }
    }
    let undisplaced = StatePairParams {
        beta_mag: [0.0, 0.0],
        ..*pair
    };
    let (s0, s1) = pair.states()?;
    let (u0, u1) = undisplaced.states()?;
    let s_part = fidelity_unchecked(&u0, &u1)?;
    let c_part = fidelity_unchecked(&s0, &s1)? / s_part;
    let k = pair.coherent_k();
    // g₁ for the relative orientation of the two squeezing ellipses.
    let g1 = squeezing_slopes(
        pair.squeeze[0],
        pair.squeeze[1],
        pair.squeeze_angle[0] - pair.squeeze_angle[1],
    )?
    .g1;
    let coefficient = s_part * k * (-k).exp() + c_part * g1;
    let drops = first_order_drops(channel, window)?;
    Ok(first_order_result(coefficient, &drops, Family::GeneralPure, *pair, Some(k), channel))
}
