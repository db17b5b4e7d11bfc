//! Damping and diffusion coefficients of the secular weak-coupling QBM master
//! equation for an Ohmic bath `J(ω) = ω e^{−ω/ω_c}`.
//!
//! With `a = 1/ω_c` the frequency integrals of the zero-temperature parts are
//! elementary,
//!
//! ```text
//! ∫₀^∞ ω e^{−aω} sin(ωs) dω = 2as / (a² + s²)²
//! ∫₀^∞ ω e^{−aω} cos(ωs) dω = (a² − s²) / (a² + s²)²
//! ```
//!
//! so `γ` and `Δ₀` reduce to one time integral each. The thermal part
//! `Δ_T(t) = 2 ∫ dω J(ω) N(ω) ∫₀ᵗ cos(ω₀s) cos(ωs) ds` is evaluated with the
//! time integral done in closed form, leaving a single frequency quadrature.
//! The diffusion weight is `coth(ω/2T) = 2N + 1`, i.e. `Δ = Δ₀ + Δ_T`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g12;
use crate::quad::{cumulative_simpson, integrate, QuadConfig};

/// Ohmic bath and oscillator frequency. Temperatures are `k_B T` in the same
/// units as the frequencies (`ħ = k_B = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub omega0: f64,
    pub omega_c: f64,
    pub temperature: f64,
}

impl EnvironmentSpec {
    pub fn new(omega0: f64, omega_c: f64, temperature: f64) -> Result<Self> {
        let env = Self {
            omega0,
            omega_c,
            temperature,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::Domain(format!("omega0 must be finite and > 0, got {}", self.omega0)));
        }
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(Error::Domain(format!("omega_c must be finite and > 0, got {}", self.omega_c)));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Domain(format!(
                "temperature must be finite and ≥ 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    fn a(&self) -> f64 {
        1.0 / self.omega_c
    }

    /// Upper frequency cutoff for the thermal quadrature.
    pub fn omega_max(&self) -> f64 {
        let scale = self.omega_c.max(self.temperature);
        scale * 1e12f64.ln() + 10.0 * scale
    }
}

/// `J(ω) = ω e^{−ω/ω_c}`.
pub fn spectral_density(omega: f64, env: &EnvironmentSpec) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("frequency must be ≥ 0, got {omega}")));
    }
    Ok(omega * (-omega / env.omega_c).exp())
}

fn kernel_sin(s: f64, a: f64) -> f64 {
    let d = a * a + s * s;
    2.0 * a * s / (d * d)
}

fn kernel_cos(s: f64, a: f64) -> f64 {
    let d = a * a + s * s;
    (a * a - s * s) / (d * d)
}

/// `ω N(ω)` with `N = 1/(e^{ω/T} − 1)`; tends to `T` as `ω → 0`.
fn omega_occupation(omega: f64, temperature: f64) -> f64 {
    if omega == 0.0 {
        return temperature;
    }
    omega / (omega / temperature).exp_m1()
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

fn time_breaks(t: f64, env: &EnvironmentSpec) -> Vec<f64> {
    let step = PI / env.omega0;
    let count = ((t / step) as usize).min(2000);
    let mut breaks: Vec<f64> = (1..=count).map(|k| k as f64 * step).collect();
    breaks.push(env.a());
    breaks
}

fn frequency_breaks(t: f64, env: &EnvironmentSpec) -> Vec<f64> {
    let scale = env.omega_c.max(env.temperature);
    let mut breaks = vec![env.omega0, scale, 5.0 * scale, 10.0 * scale];
    if t > 0.0 {
        for m in [1.0, 4.0, 16.0] {
            breaks.push(env.omega0 - 2.0 * PI * m / t);
            breaks.push(env.omega0 + 2.0 * PI * m / t);
        }
    }
    breaks
}

/// `γ(t) = ∫₀ᵗ ds ∫₀^∞ dω J(ω) sin(ω₀s) sin(ωs)`.
pub fn gamma_coefficient(t: f64, env: &EnvironmentSpec) -> Result<f64> {
    check_time(t)?;
    env.validate()?;
    let a = env.a();
    let w0 = env.omega0;
    Ok(integrate(
        |s| (w0 * s).sin() * kernel_sin(s, a),
        0.0,
        t,
        &time_breaks(t, env),
        &QuadConfig::default(),
    )?
    .value)
}

/// Zero-temperature diffusion `Δ₀(t) = ∫₀ᵗ ds ∫₀^∞ dω J(ω) cos(ω₀s) cos(ωs)`.
pub fn delta_zero(t: f64, env: &EnvironmentSpec) -> Result<f64> {
    check_time(t)?;
    env.validate()?;
    let a = env.a();
    let w0 = env.omega0;
    Ok(integrate(
        |s| (w0 * s).cos() * kernel_cos(s, a),
        0.0,
        t,
        &time_breaks(t, env),
        &QuadConfig::default(),
    )?
    .value)
}

/// Thermal diffusion `Δ_T(t) = 2 ∫₀ᵗ ds ∫₀^∞ dω J(ω) N(ω) cos(ω₀s) cos(ωs)`.
pub fn delta_thermal(t: f64, env: &EnvironmentSpec) -> Result<f64> {
    check_time(t)?;
    env.validate()?;
    Ok(thermal_parts(t, env)?.delta)
}

/// `Δ(t) = Δ₀(t) + Δ_T(t)`.
pub fn delta_coefficient(t: f64, env: &EnvironmentSpec) -> Result<f64> {
    Ok(delta_zero(t, env)? + delta_thermal(t, env)?)
}

/// `K_T(s) = ∫₀^∞ ω e^{−ω/ω_c} N(ω) cos(ωs) dω`, the thermal memory kernel.
pub fn thermal_kernel(s: f64, env: &EnvironmentSpec) -> Result<f64> {
    env.validate()?;
    let temp = env.temperature;
    if temp == 0.0 {
        return Ok(0.0);
    }
    let a = env.a();
    let scale = env.omega_c.max(temp);
    Ok(integrate(
        |w| omega_occupation(w, temp) * (-a * w).exp() * (w * s).cos(),
        0.0,
        env.omega_max(),
        &[scale, 5.0 * scale, 10.0 * scale],
        &QuadConfig::default(),
    )?
    .value)
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time must be finite and ≥ 0, got {t}")));
    }
    Ok(())
}

struct ThermalParts {
    delta: f64,
    cumulative: f64,
    error: f64,
}

/// `Δ_T(t)` and `∫₀ᵗ Δ_T`, each as one frequency integral.
fn thermal_parts(t: f64, env: &EnvironmentSpec) -> Result<ThermalParts> {
    let temp = env.temperature;
    if temp == 0.0 || t == 0.0 {
        return Ok(ThermalParts {
            delta: 0.0,
            cumulative: 0.0,
            error: 0.0,
        });
    }
    let a = env.a();
    let w0 = env.omega0;
    let weight = move |w: f64| omega_occupation(w, temp) * (-a * w).exp();
    let breaks = frequency_breaks(t, env);
    let cfg = QuadConfig::default();
    let delta = integrate(
        |w| weight(w) * t * (sinc((w - w0) * t) + sinc((w + w0) * t)),
        0.0,
        env.omega_max(),
        &breaks,
        &cfg,
    )?;
    let half_sq = |u: f64| {
        let s = sinc(0.5 * u * t);
        0.5 * t * t * s * s
    };
    let cumulative = integrate(
        |w| weight(w) * (half_sq(w - w0) + half_sq(w + w0)),
        0.0,
        env.omega_max(),
        &breaks,
        &cfg,
    )?;
    Ok(ThermalParts {
        delta: delta.value,
        cumulative: cumulative.value,
        error: delta.error.max(cumulative.error),
    })
}

/// Tabulated `γ`, `Δ` and their running integrals `x = 2α∫γ`, `y = 2α∫Δ` on a
/// uniform grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCoefficients {
    times: Vec<f64>,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    // 2∫γ and 2∫Δ at unit coupling.
    x_unit: Vec<f64>,
    y_unit: Vec<f64>,
    alpha: f64,
    env: Option<EnvironmentSpec>,
    quad_error: f64,
}

impl ChannelCoefficients {
    /// Builds a table from sampled coefficients. The running integrals use
    /// cumulative Simpson on the grid, which must be uniform and start at 0.
    pub fn from_samples(times: Vec<f64>, gamma: Vec<f64>, delta: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_grid(&times)?;
        if gamma.len() != times.len() || delta.len() != times.len() {
            return Err(Error::Domain(format!(
                "sample lengths differ: {} times, {} gamma, {} delta",
                times.len(),
                gamma.len(),
                delta.len()
            )));
        }
        if gamma.iter().chain(&delta).any(|v| !v.is_finite()) {
            return Err(Error::Domain("coefficient samples must be finite".into()));
        }
        let h = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        let x_unit = cumulative_simpson(&gamma, h).into_iter().map(|v| 2.0 * v).collect();
        let y_unit = cumulative_simpson(&delta, h).into_iter().map(|v| 2.0 * v).collect();
        Ok(Self {
            times,
            gamma,
            delta,
            x_unit,
            y_unit,
            alpha,
            env: None,
            quad_error: 0.0,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn env(&self) -> Option<&EnvironmentSpec> {
        self.env.as_ref()
    }

    /// Largest quadrature error estimate met while building the table.
    pub fn quad_error(&self) -> f64 {
        self.quad_error
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    pub fn step(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn x(&self) -> Vec<f64> {
        self.x_unit.iter().map(|v| self.alpha * v).collect()
    }

    pub fn y(&self) -> Vec<f64> {
        self.y_unit.iter().map(|v| self.alpha * v).collect()
    }

    pub fn x_at_node(&self, i: usize) -> f64 {
        self.alpha * self.x_unit[i]
    }

    pub fn y_at_node(&self, i: usize) -> f64 {
        self.alpha * self.y_unit[i]
    }

    /// The same table at a different coupling. `γ` and `Δ` do not depend on α.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }

    /// Index `i` with `times[i] ≤ t ≤ times[i+1]`.
    pub(crate) fn cell(&self, t: f64) -> Result<usize> {
        let end = self.t_end();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::Range { t, start: 0.0, end });
        }
        let n = self.times.len();
        if n < 2 {
            return Ok(0);
        }
        let i = ((t / self.step()) as usize).min(n - 2);
        Ok(i)
    }

    /// Writes the table as CSV with columns `t,gamma,delta,x,y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,gamma,delta,x,y")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                g12(self.times[i]),
                g12(self.gamma[i]),
                g12(self.delta[i]),
                g12(self.x_at_node(i)),
                g12(self.y_at_node(i))
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be finite and > 0, got {alpha}")));
    }
    Ok(())
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::Domain("time grid must start at t = 0".into()));
    }
    if times.len() > 1 {
        let h = times[1] - times[0];
        if !(h > 0.0) {
            return Err(Error::Domain("time grid must be strictly increasing".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !((w[1] - w[0] - h).abs() <= 1e-9 * h.max(w[1].abs())) {
                return Err(Error::Domain(format!("time grid is not uniform at index {}", i + 1)));
            }
        }
    }
    Ok(())
}

/// Tabulates `γ`, `Δ`, `x`, `y` on `n_steps` uniform cells of `[0, t_end]`.
///
/// The running integrals use `∫₀ᵗ γ = ∫₀ᵗ (t − s) g(s) ds` with `g` the
/// integrand of `γ`, accumulated cell by cell with adaptive quadrature, so
/// `x` and `y` carry quadrature accuracy rather than grid accuracy.
pub fn build_coefficients(
    env: &EnvironmentSpec,
    alpha: f64,
    t_end: f64,
    n_steps: usize,
) -> Result<ChannelCoefficients> {
    env.validate()?;
    check_alpha(alpha)?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Domain(format!("t_end must be finite and > 0, got {t_end}")));
    }
    if n_steps < 2 {
        return Err(Error::Domain(format!("n_steps must be ≥ 2, got {n_steps}")));
    }
    let h = t_end / n_steps as f64;
    let times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * h).collect();
    let a = env.a();
    let w0 = env.omega0;
    let g_gamma = move |s: f64| (w0 * s).sin() * kernel_sin(s, a);
    let g_zero = move |s: f64| (w0 * s).cos() * kernel_cos(s, a);
    let cfg = QuadConfig::default();

    // Per cell: ∫g, ∫s·g for both kernels.
    let cells: Vec<[f64; 5]> = (0..n_steps)
        .into_par_iter()
        .map(|i| -> Result<[f64; 5]> {
            let (lo, hi) = (times[i], times[i + 1]);
            let mut out = [0.0; 5];
            let parts = [
                integrate(g_gamma, lo, hi, &[], &cfg)?,
                integrate(|s| s * g_gamma(s), lo, hi, &[], &cfg)?,
                integrate(g_zero, lo, hi, &[], &cfg)?,
                integrate(|s| s * g_zero(s), lo, hi, &[], &cfg)?,
            ];
            for (o, p) in out.iter_mut().zip(&parts) {
                *o = p.value;
            }
            out[4] = parts.iter().map(|p| p.error).fold(0.0, f64::max);
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let thermal: Vec<ThermalParts> = times
        .par_iter()
        .map(|&t| thermal_parts(t, env))
        .collect::<Result<_>>()?;

    let n = times.len();
    let mut gamma = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut x_unit = vec![0.0; n];
    let mut y_unit = vec![0.0; n];
    let mut quad_error: f64 = 0.0;
    let (mut g1, mut g2, mut d1, mut d2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        if i > 0 {
            let c = &cells[i - 1];
            g1 += c[0];
            g2 += c[1];
            d1 += c[2];
            d2 += c[3];
            quad_error = quad_error.max(c[4]);
        }
        let t = times[i];
        let th = &thermal[i];
        quad_error = quad_error.max(th.error);
        gamma[i] = g1;
        delta[i] = d1 + th.delta;
        x_unit[i] = 2.0 * (t * g1 - g2);
        y_unit[i] = 2.0 * (t * d1 - d2 + th.cumulative);
    }
    Ok(ChannelCoefficients {
        times,
        gamma,
        delta,
        x_unit,
        y_unit,
        alpha,
        env: Some(*env),
        quad_error,
    })
}

/// Window length after which `γ` and `Δ` have settled: over the last 10% of
/// `[0, t_end]` both stay within `1e−3` of their final value, relative to
/// their largest magnitude on the window. Found by doubling.
pub fn settling_horizon(env: &EnvironmentSpec) -> Result<f64> {
    env.validate()?;
    let mut t_end = 10.0 * (1.0 / env.omega_c).max(2.0 * PI / env.omega0);
    for _ in 0..8 {
        let table = build_coefficients(env, 1.0, t_end, 400)?;
        if settled(&table.gamma) && settled(&table.delta) {
            return Ok(t_end);
        }
        t_end *= 2.0;
    }
    Ok(t_end)
}

fn settled(values: &[f64]) -> bool {
    let last = *values.last().expect("non-empty");
    let amp = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = values.len() - values.len() / 10;
    values[tail..].iter().all(|v| (v - last).abs() < 1e-3 * amp)
}

/// Grid-resolved intervals on which `Δ(t) < |γ(t)|`.
pub fn divisibility_check(coeffs: &ChannelCoefficients) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let n = coeffs.len();
    for i in 0..n {
        let violated = coeffs.delta[i] < coeffs.gamma[i].abs();
        match (violated, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((coeffs.times[s], coeffs.times[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((coeffs.times[s], coeffs.times[n - 1]));
    }
    out
}
