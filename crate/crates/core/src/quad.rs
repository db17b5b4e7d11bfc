//! Numerical integration: adaptive Gauss–Kronrod on finite intervals,
//! cumulative Simpson sums on uniform grids and cubic Hermite interpolation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights for the odd Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Hard budget on the number of panels.
    pub max_panels: usize,
    /// Relative tolerance that must be met to return without error.
    pub fail_rel_tol: f64,
    /// Floor on the relative scale as a fraction of `∫|f|`, so integrals that
    /// cancel to nearly zero are judged against the size of the integrand.
    pub cancellation: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_panels: 4000,
            fail_rel_tol: 1e-8,
            cancellation: 1e-3,
        }
    }
}

/// Integral value and error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut fv = [(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel {
        a,
        b,
        value,
        error,
        abs: res_abs,
    }
}

/// Adaptive Gauss–Kronrod (10/21) integration of `f` over `[a, b]`.
///
/// `breaks` are extra interior points used to seed the initial panels; they
/// are the place to put known peaks or kinks of the integrand.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!("invalid integration range [{a}, {b}]")));
    }
    let mut points = vec![a];
    let mut interior: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    points.extend(interior);
    points.push(b);

    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut abs = 0.0;
    for w in points.windows(2) {
        let p = kronrod21(&f, w[0], w[1]);
        value += p.value;
        error += p.error;
        abs += p.abs;
        heap.push(p);
    }
    let scale = |value: f64, abs: f64| value.abs().max(cfg.cancellation * abs);
    while error > cfg.abs_tol.max(cfg.rel_tol * scale(value, abs)) && heap.len() < cfg.max_panels {
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = kronrod21(&f, worst.a, mid);
        let right = kronrod21(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        abs += left.abs + right.abs - worst.abs;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of the running totals.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    let abs: f64 = heap.iter().map(|p| p.abs).sum();
    if !value.is_finite() {
        return Err(Error::Numerical("integrand produced a non-finite value".into()));
    }
    let tolerance = cfg.abs_tol.max(cfg.fail_rel_tol * scale(value, abs));
    if error > tolerance {
        return Err(Error::Convergence {
            estimate: error,
            tolerance,
        });
    }
    Ok(QuadResult { value, error })
}

/// Running integral of uniformly spaced samples, `out[i] ≈ ∫_{t₀}^{tᵢ} f`.
///
/// Even nodes use composite Simpson; odd nodes add the three-point
/// `h/12 (−f₋₁ + 8f₀ + 5f₁)` rule on the last cell. Both are exact for cubics
/// on even nodes and quadratics on odd nodes.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[1] = if n >= 3 {
        h / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2])
    } else {
        0.5 * h * (values[0] + values[1])
    };
    for i in 2..n {
        if i % 2 == 0 {
            out[i] = out[i - 2] + h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
        } else {
            out[i] = out[i - 1] + h / 12.0 * (-values[i - 2] + 8.0 * values[i - 1] + 5.0 * values[i]);
        }
    }
    out
}

/// Cubic Hermite interpolation on one cell from endpoint values and slopes.
pub fn hermite(t0: f64, t1: f64, f0: f64, f1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, &[], &QuadConfig::default()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-14);
        let r = integrate(|x| x.powi(6), -1.0, 1.0, &[], &QuadConfig::default()).unwrap();
        assert!((r.value - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let r = integrate(|x| (50.0 * x).sin() * (-x).exp(), 0.0, 20.0, &[], &QuadConfig::default())
            .unwrap();
        let exact = 50.0 / 2501.0 * (1.0 - (-20.0f64).exp() * ((1000.0f64).cos() + (1000.0f64).sin() / 50.0));
        assert!((r.value - exact).abs() < 1e-12, "{} vs {}", r.value, exact);

        let eps = 1e-3;
        let r = integrate(|x| eps / (x * x + eps * eps), -1.0, 1.0, &[0.0], &QuadConfig::default())
            .unwrap();
        assert!((r.value - 2.0 * (1.0 / eps).atan()).abs() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = QuadConfig {
            max_panels: 3,
            ..QuadConfig::default()
        };
        let r = integrate(|x| (200.0 * x).sin().abs(), 0.0, 10.0, &[], &cfg);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn reversed_range_rejected() {
        assert!(integrate(|x| x, 1.0, 0.0, &[], &QuadConfig::default()).is_err());
    }

    #[test]
    fn cumulative_simpson_exactness() {
        let h = 0.1;
        let t: Vec<f64> = (0..41).map(|i| i as f64 * h).collect();
        let lin = vec![3.0; t.len()];
        let c = cumulative_simpson(&lin, h);
        for (ci, ti) in c.iter().zip(&t) {
            assert!((ci - 3.0 * ti).abs() < 1e-13);
        }
        let quad: Vec<f64> = t.iter().map(|&x| x * x).collect();
        let c = cumulative_simpson(&quad, h);
        for (ci, ti) in c.iter().zip(&t) {
            assert!((ci - ti.powi(3) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulative_simpson_converges_fourth_order() {
        let err = |n: usize| {
            let h = PI / n as f64;
            let v: Vec<f64> = (0..=n).map(|i| (i as f64 * h).sin()).collect();
            let c = cumulative_simpson(&v, h);
            c.iter()
                .enumerate()
                .map(|(i, ci)| (ci - (1.0 - (i as f64 * h).cos())).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(50) / err(100);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let f = |x: f64| x * x * x - x;
        let df = |x: f64| 3.0 * x * x - 1.0;
        let v = hermite(1.0, 2.0, f(1.0), f(2.0), df(1.0), df(2.0), 1.3);
        assert!((v - f(1.3)).abs() < 1e-14);
    }
}
