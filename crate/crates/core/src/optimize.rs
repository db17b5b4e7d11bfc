//! Box-constrained Nelder–Mead maximization seeded from a coarse grid.
//!
//! The objective is evaluated on a tensor grid over the box, the best few grid
//! points start independent simplex searches, and the best end point wins.
//! Trial points are projected onto the box. Everything is deterministic.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConfig {
    /// Grid points per dimension, 5 to 9.
    pub grid_points: usize,
    /// Number of best grid points used as simplex starts.
    pub starts: usize,
    pub max_iterations: usize,
    /// Stop once the simplex fits in a ball of this diameter.
    pub diameter_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_points: 7,
            starts: 3,
            max_iterations: 500,
            diameter_tol: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(5..=9).contains(&self.grid_points) {
            return Err(Error::Domain(format!(
                "grid_points must lie in 5..=9, got {}",
                self.grid_points
            )));
        }
        if self.starts == 0 || self.max_iterations == 0 || !(self.diameter_tol > 0.0) {
            return Err(Error::Domain("starts, max_iterations and diameter_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Optimizer diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OptimizerReport {
    pub evaluations: usize,
    pub iterations: usize,
    pub restarts: usize,
    /// No simplex search improved on the best grid point.
    pub stagnated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub report: OptimizerReport,
}

/// Maximizes `f` over the box `lower ≤ p ≤ upper`.
pub fn maximize<F>(f: F, lower: &[f64], upper: &[f64], cfg: &OptimizerConfig) -> Result<Optimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let dim = lower.len();
    if dim == 0 || upper.len() != dim {
        return Err(Error::Domain("bounds must be non-empty and of equal length".into()));
    }
    for (lo, hi) in lower.iter().zip(upper) {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Domain(format!("invalid bound [{lo}, {hi}]")));
        }
    }
    let g = cfg.grid_points;
    let total = g.pow(dim as u32);
    let grid: Vec<(Vec<f64>, f64)> = (0..total)
        .into_par_iter()
        .map(|mut k| {
            let p: Vec<f64> = (0..dim)
                .map(|d| {
                    let i = k % g;
                    k /= g;
                    lower[d] + (upper[d] - lower[d]) * i as f64 / (g - 1) as f64
                })
                .collect();
            let v = sanitize(f(&p));
            (p, v)
        })
        .collect();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    // Stable sort keeps ties in grid order.
    order.sort_by(|&a, &b| grid[b].1.total_cmp(&grid[a].1));
    let starts: Vec<&(Vec<f64>, f64)> = order.iter().take(cfg.starts).map(|&i| &grid[i]).collect();
    let best_grid = starts[0].1;

    let steps: Vec<f64> = (0..dim)
        .map(|d| 0.5 * (upper[d] - lower[d]) / (g - 1) as f64)
        .collect();
    let runs: Vec<(Vec<f64>, f64, usize, usize)> = starts
        .par_iter()
        .map(|(p, v)| nelder_mead(&f, p, *v, &steps, lower, upper, cfg))
        .collect();

    let mut report = OptimizerReport {
        evaluations: total,
        restarts: runs.len(),
        ..Default::default()
    };
    let mut best = (starts[0].0.clone(), best_grid);
    for (p, v, evals, iters) in runs {
        report.evaluations += evals;
        report.iterations += iters;
        if v > best.1 {
            best = (p, v);
        }
    }
    report.stagnated = !(best.1 > best_grid);
    Ok(Optimum {
        point: best.0,
        value: best.1,
        report,
    })
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn project(p: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((x, lo), hi) in p.iter_mut().zip(lower).zip(upper) {
        *x = x.clamp(*lo, *hi);
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let dist = simplex[i]
                .0
                .iter()
                .zip(&simplex[j].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// One bounded Nelder–Mead run maximizing `f`. Returns the best point, its
/// value, the evaluation count and the iteration count.
fn nelder_mead<F>(
    f: &F,
    start: &[f64],
    start_value: f64,
    steps: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &OptimizerConfig,
) -> (Vec<f64>, f64, usize, usize)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let mut evals = 0;
    let mut eval = |p: &[f64]| {
        evals += 1;
        sanitize(f(p))
    };
    // Simplex stored as (point, value); sorted best first (largest value).
    let mut simplex = vec![(start.to_vec(), start_value)];
    for d in 0..dim {
        let mut p = start.to_vec();
        let step = if p[d] + steps[d] <= upper[d] { steps[d] } else { -steps[d] };
        p[d] += step;
        project(&mut p, lower, upper);
        let v = eval(&p);
        simplex.push((p, v));
    }
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        if diameter(&simplex) < cfg.diameter_tol {
            break;
        }
        iterations += 1;
        let worst = simplex[dim].clone();
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(p, _)| p[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p, lower, upper);
            p
        };
        let reflected = along(1.0);
        let fr = eval(&reflected);
        if fr > simplex[0].1 {
            let expanded = along(2.0);
            let fe = eval(&expanded);
            simplex[dim] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr > simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr > worst.1 {
            let p = along(0.5);
            let v = eval(&p);
            (p, v)
        } else {
            let p = along(-0.5);
            let v = eval(&p);
            (p, v)
        };
        let accept = if fr > worst.1 { fc >= fr } else { fc > worst.1 };
        if accept {
            simplex[dim] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            project(&mut p, lower, upper);
            let v = eval(&p);
            *vertex = (p, v);
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (p, v) = simplex.swap_remove(0);
    (p, v, evals, iterations)
}
