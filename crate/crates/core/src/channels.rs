//! The two dynamical maps: a damping channel with a time-dependent rate and
//! the secular weak-coupling QBM channel, each exact or truncated at first
//! order in the coupling.
//!
//! Every map acts as `X̄ → m X̄`, `σ → a σ + b I/2`:
//!
//! | channel | mode | m | a | b |
//! |---|---|---|---|---|
//! | damping | exact | `e^{−x/2}` | `e^{−x}` | `1 − e^{−x}` |
//! | damping | first order | `1 − x/2` | `1 − x` | `x` |
//! | QBM | exact | `e^{−x/2}` | `e^{−x}` | `w` |
//! | QBM | first order | `1 − x/2` | `1 − x` | `y` |
//!
//! with `w(t) = e^{−x(t)} ∫₀ᵗ e^{x(s)} dy(s)`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g12;
use crate::gauss::{AffineMap, GaussianState, StatePairParams};
use crate::quad::{cumulative_simpson, hermite};
use crate::spectral::{ChannelCoefficients, EnvironmentSpec};

/// First-order results with `|x|` above this are flagged as unreliable.
pub const FIRST_ORDER_LIMIT: f64 = 0.3;

const SWITCH_TIME: f64 = 2.5 * PI;
const EXAMPLE_DECAY: f64 = 0.1;

/// A damping rate sampled on a uniform grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    times: Vec<f64>,
    rates: Vec<f64>,
    integral: Vec<f64>,
}

impl RateTable {
    pub fn new(times: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != rates.len() {
            return Err(Error::Domain(format!(
                "rate table needs ≥ 2 samples of equal length (got {} times, {} rates)",
                times.len(),
                rates.len()
            )));
        }
        // Reuse the coefficient-table validation for the grid.
        let probe = ChannelCoefficients::from_samples(times.clone(), rates.clone(), vec![0.0; times.len()], 1.0)?;
        let integral = cumulative_simpson(&rates, probe.step());
        Ok(Self {
            times,
            rates,
            integral,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    fn end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    // Past the end the last sample is held constant.
    fn rate(&self, t: f64) -> f64 {
        if t >= self.end() {
            return *self.rates.last().expect("non-empty");
        }
        let i = ((t / self.step()) as usize).min(self.times.len() - 2);
        let s = (t - self.times[i]) / self.step();
        self.rates[i] + s * (self.rates[i + 1] - self.rates[i])
    }

    fn integral(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t >= self.end() {
            return self.integral[n - 1] + self.rates[n - 1] * (t - self.end());
        }
        let i = ((t / self.step()) as usize).min(n - 2);
        // Piecewise-linear rate integrated exactly inside the cell.
        let s = t - self.times[i];
        let slope = (self.rates[i + 1] - self.rates[i]) / self.step();
        self.integral[i] + self.rates[i] * s + 0.5 * slope * s * s
    }
}

/// The time dependence of the damping channel's rate `γ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DampingRateSpec {
    /// `½ e^{−t/10} sin t` for `t < 5π/2`, then the constant `½ e^{−π/4}`.
    PaperExample,
    /// `γ(t) = γ₀`.
    Constant(f64),
    /// Linear interpolation of samples.
    Table(RateTable),
}

impl DampingRateSpec {
    /// Negativity intervals of the rate on `[0, t_end]`, located by a sign
    /// scan on `n` cells and refined by bisection.
    pub fn negativity_intervals(&self, t_end: f64, n: usize) -> Vec<(f64, f64)> {
        match self {
            DampingRateSpec::Constant(g) => {
                if *g < 0.0 {
                    vec![(0.0, t_end)]
                } else {
                    Vec::new()
                }
            }
            _ => sign_intervals(|t| damping_rate(t, self), 0.0, t_end, n),
        }
    }
}

/// Maximal sub-intervals of `[t0, t1]` where `f < 0`, endpoints bisected.
pub(crate) fn sign_intervals<F: Fn(f64) -> f64>(f: F, t0: f64, t1: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (t1 - t0) / n as f64;
    let root = |mut lo: f64, mut hi: f64| {
        let neg_lo = f(lo) < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) < 0.0) == neg_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut out = Vec::new();
    let mut start = if f(t0) < 0.0 { Some(t0) } else { None };
    let mut prev = t0;
    for i in 1..=n {
        let t = if i == n { t1 } else { t0 + i as f64 * h };
        let neg = f(t) < 0.0;
        match (neg, start) {
            (true, None) => start = Some(root(prev, t)),
            (false, Some(s)) => {
                out.push((s, root(prev, t)));
                start = None;
            }
            _ => {}
        }
        prev = t;
    }
    if let Some(s) = start {
        out.push((s, t1));
    }
    out
}

/// `γ(t)` of the damping channel.
pub fn damping_rate(t: f64, spec: &DampingRateSpec) -> f64 {
    match spec {
        DampingRateSpec::PaperExample => {
            if t < SWITCH_TIME {
                0.5 * (-EXAMPLE_DECAY * t).exp() * t.sin()
            } else {
                0.5 * (-PI / 4.0).exp()
            }
        }
        DampingRateSpec::Constant(g) => *g,
        DampingRateSpec::Table(table) => table.rate(t),
    }
}

fn example_integral(t: f64) -> f64 {
    let a = EXAMPLE_DECAY;
    let antiderivative = |t: f64| (1.0 - (-a * t).exp() * (a * t.sin() + t.cos())) / (1.0 + a * a);
    if t < SWITCH_TIME {
        antiderivative(t)
    } else {
        antiderivative(SWITCH_TIME) + 2.0 * 0.5 * (-PI / 4.0).exp() * (t - SWITCH_TIME)
    }
}

/// `x(t) = 2α ∫₀ᵗ γ(s) ds`.
pub fn damping_x(t: f64, alpha: f64, spec: &DampingRateSpec) -> f64 {
    match spec {
        DampingRateSpec::PaperExample => alpha * example_integral(t),
        DampingRateSpec::Constant(g) => 2.0 * alpha * g * t,
        DampingRateSpec::Table(table) => 2.0 * alpha * table.integral(t),
    }
}

/// Exact solution or its first-order truncation in the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    FirstOrder,
}

/// An evolved state and whether the first-order truncation left its
/// validity range (`|x| > 0.3`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolved {
    pub state: GaussianState,
    pub flagged: bool,
}

/// Affine map of the damping channel for a given `x`.
pub fn damping_map(x: f64, mode: Mode) -> AffineMap {
    match mode {
        Mode::Exact => AffineMap {
            mean_scale: (-0.5 * x).exp(),
            cov_scale: (-x).exp(),
            noise: -(-x).exp_m1(),
        },
        Mode::FirstOrder => AffineMap {
            mean_scale: 1.0 - 0.5 * x,
            cov_scale: 1.0 - x,
            noise: x,
        },
    }
}

fn check_state(state: &GaussianState) -> Result<()> {
    if !state.is_physical() {
        return Err(Error::NonPhysical("input state violates the Heisenberg bound".into()));
    }
    Ok(())
}

/// Evolves a state through the damping channel up to time `t`.
pub fn evolve_damping(
    state: &GaussianState,
    t: f64,
    alpha: f64,
    spec: &DampingRateSpec,
    mode: Mode,
) -> Result<Evolved> {
    check_state(state)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time must be finite and ≥ 0, got {t}")));
    }
    let x = damping_x(t, alpha, spec);
    Ok(Evolved {
        state: state.apply(&damping_map(x, mode)),
        flagged: mode == Mode::FirstOrder && x.abs() > FIRST_ORDER_LIMIT,
    })
}

/// The QBM channel at one coupling: `x`, `y`, `w` on the coefficient grid
/// plus their slopes, interpolated by cubic Hermite between nodes.
#[derive(Debug, Clone)]
pub struct QbmChannel {
    coeffs: Arc<ChannelCoefficients>,
    mode: Mode,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl QbmChannel {
    pub fn new(coeffs: Arc<ChannelCoefficients>, mode: Mode) -> Self {
        let alpha = coeffs.alpha();
        let x = coeffs.x();
        let y = coeffs.y();
        let weighted: Vec<f64> = x
            .iter()
            .zip(coeffs.delta())
            .map(|(xi, d)| xi.exp() * 2.0 * alpha * d)
            .collect();
        let w = cumulative_simpson(&weighted, coeffs.step())
            .into_iter()
            .zip(&x)
            .map(|(acc, xi)| (-xi).exp() * acc)
            .collect();
        Self {
            coeffs,
            mode,
            x,
            y,
            w,
        }
    }

    pub fn coefficients(&self) -> &ChannelCoefficients {
        &self.coeffs
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// `(x, y, w)` at an arbitrary time inside the grid.
    pub fn xyw(&self, t: f64) -> Result<(f64, f64, f64)> {
        let c = &self.coeffs;
        let i = c.cell(t)?;
        if c.len() < 2 {
            return Ok((0.0, 0.0, 0.0));
        }
        let (t0, t1) = (c.times()[i], c.times()[i + 1]);
        let two_alpha = 2.0 * c.alpha();
        let dx = |k: usize| two_alpha * c.gamma()[k];
        let dy = |k: usize| two_alpha * c.delta()[k];
        let dw = |k: usize| -dx(k) * self.w[k] + dy(k);
        Ok((
            hermite(t0, t1, self.x[i], self.x[i + 1], dx(i), dx(i + 1), t),
            hermite(t0, t1, self.y[i], self.y[i + 1], dy(i), dy(i + 1), t),
            hermite(t0, t1, self.w[i], self.w[i + 1], dw(i), dw(i + 1), t),
        ))
    }

    pub fn map_at(&self, t: f64) -> Result<AffineMap> {
        let (x, y, w) = self.xyw(t)?;
        Ok(qbm_map(x, y, w, self.mode))
    }

    pub fn map_at_node(&self, i: usize) -> AffineMap {
        qbm_map(self.x[i], self.y[i], self.w[i], self.mode)
    }
}

fn qbm_map(x: f64, y: f64, w: f64, mode: Mode) -> AffineMap {
    match mode {
        Mode::Exact => AffineMap {
            mean_scale: (-0.5 * x).exp(),
            cov_scale: (-x).exp(),
            noise: w,
        },
        Mode::FirstOrder => AffineMap {
            mean_scale: 1.0 - 0.5 * x,
            cov_scale: 1.0 - x,
            noise: y,
        },
    }
}

/// Evolves a state through the QBM channel described by `coeffs`.
pub fn evolve_qbm(state: &GaussianState, t: f64, coeffs: &ChannelCoefficients, mode: Mode) -> Result<Evolved> {
    check_state(state)?;
    let channel = QbmChannel::new(Arc::new(coeffs.clone()), mode);
    let (x, _, _) = channel.xyw(t)?;
    Ok(Evolved {
        state: state.apply(&channel.map_at(t)?),
        flagged: mode == Mode::FirstOrder && x.abs() > FIRST_ORDER_LIMIT,
    })
}

/// A configured channel.
#[derive(Debug, Clone)]
pub enum Channel {
    Damping {
        alpha: f64,
        rate: DampingRateSpec,
        mode: Mode,
    },
    Qbm(QbmChannel),
}

impl Channel {
    pub fn damping(alpha: f64, rate: DampingRateSpec, mode: Mode) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be finite and > 0, got {alpha}")));
        }
        Ok(Channel::Damping { alpha, rate, mode })
    }

    pub fn qbm(coeffs: Arc<ChannelCoefficients>, mode: Mode) -> Self {
        Channel::Qbm(QbmChannel::new(coeffs, mode))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Channel::Damping { .. } => "damping",
            Channel::Qbm(_) => "qbm",
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Channel::Damping { mode, .. } => *mode,
            Channel::Qbm(q) => q.mode(),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Channel::Damping { alpha, .. } => *alpha,
            Channel::Qbm(q) => q.coefficients().alpha(),
        }
    }

    pub fn env(&self) -> Option<&EnvironmentSpec> {
        match self {
            Channel::Damping { .. } => None,
            Channel::Qbm(q) => q.coefficients().env(),
        }
    }

    /// Default observation window: `[0, 4π]` for damping, the coefficient
    /// grid for QBM.
    pub fn default_window(&self) -> f64 {
        match self {
            Channel::Damping { .. } => 4.0 * PI,
            Channel::Qbm(q) => q.coefficients().t_end(),
        }
    }

    pub fn map_at(&self, t: f64) -> Result<AffineMap> {
        match self {
            Channel::Damping { alpha, rate, mode } => Ok(damping_map(damping_x(t, *alpha, rate), *mode)),
            Channel::Qbm(q) => q.map_at(t),
        }
    }

    /// The cumulative damping `x(t)`.
    pub fn x_at(&self, t: f64) -> Result<f64> {
        match self {
            Channel::Damping { alpha, rate, .. } => Ok(damping_x(t, *alpha, rate)),
            Channel::Qbm(q) => Ok(q.xyw(t)?.0),
        }
    }

    pub fn evolve(&self, state: &GaussianState, t: f64) -> Result<Evolved> {
        let x = self.x_at(t)?;
        Ok(Evolved {
            state: state.apply(&self.map_at(t)?),
            flagged: self.mode() == Mode::FirstOrder && x.abs() > FIRST_ORDER_LIMIT,
        })
    }
}

/// A state sampled along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
    pub channel: &'static str,
    pub params: StatePairParams,
    /// Which member of the pair this is (0 or 1).
    pub member: usize,
    /// Set if any first-order sample left the validity range.
    pub flagged: bool,
}

impl Trajectory {
    /// CSV with columns `t,mean_q,mean_p,cov_qq,cov_qp,cov_pp`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,mean_q,mean_p,cov_qq,cov_qp,cov_pp")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let m = s.mean();
            let c = s.cov();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                g12(*t),
                g12(m[0]),
                g12(m[1]),
                g12(c.qq),
                g12(c.qp),
                g12(c.pp)
            )?;
        }
        Ok(())
    }
}

/// Evolves both members of a pair over `grid`.
pub fn trajectory(pair: &StatePairParams, channel: &Channel, grid: &[f64]) -> Result<(Trajectory, Trajectory)> {
    let (s0, s1) = pair.states()?;
    let build = |state: GaussianState, member: usize| -> Result<Trajectory> {
        let mut states = Vec::with_capacity(grid.len());
        let mut flagged = false;
        for &t in grid {
            let e = channel.evolve(&state, t)?;
            flagged |= e.flagged;
            states.push(e.state);
        }
        Ok(Trajectory {
            times: grid.to_vec(),
            states,
            channel: channel.name(),
            params: *pair,
            member,
            flagged,
        })
    };
    Ok((build(s0, 0)?, build(s1, 1)?))
}
