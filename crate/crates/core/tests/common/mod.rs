//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use gaussnm::gauss::StateParams;

/// Gaussian state as a density matrix in the Fock basis.
///
/// Built as `D(β) S(ξ) ρ_th S(ξ)† D(β)†` with the generators exponentiated in
/// a `work`-dimensional space, then cut down to the first `dim` levels.
pub fn fock_state(p: &StateParams, dim: usize, work: usize) -> DMatrix<Complex64> {
    assert!(work >= dim);
    let mut a = DMatrix::<Complex64>::zeros(work, work);
    for n in 1..work {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let beta = Complex64::from_polar(p.beta_mag, p.beta_arg);
    let xi = Complex64::from_polar(p.squeeze, p.squeeze_angle);
    let disp = (&ad * beta - &a * beta.conj()).exp();
    let sq = ((&a * &a) * (xi.conj() * 0.5) - (&ad * &ad) * (xi * 0.5)).exp();
    let u = disp * sq;
    let n = p.thermal;
    let mut th = DMatrix::<Complex64>::zeros(work, work);
    for k in 0..work {
        let pk = if n == 0.0 {
            if k == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (n / (n + 1.0)).powi(k as i32) / (n + 1.0)
        };
        th[(k, k)] = Complex64::new(pk, 0.0);
    }
    let rho = &u * th * u.adjoint();
    rho.view((0, 0), (dim, dim)).into_owned()
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// `Tr √(√ρ₁ ρ₂ √ρ₁)`.
pub fn fock_fidelity(r1: &DMatrix<Complex64>, r2: &DMatrix<Complex64>) -> f64 {
    let s = hermitian_sqrt(r1);
    let m = &s * r2 * &s;
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum()
}

/// First and second moments `(⟨q⟩, ⟨p⟩, σ_qq, σ_qp, σ_pp)` of a Fock density
/// matrix, with `q = (a + a†)/√2`, `p = (a − a†)/(i√2)`.
pub fn fock_moments(rho: &DMatrix<Complex64>) -> [f64; 5] {
    let dim = rho.nrows();
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&a + &ad) * Complex64::new(r2, 0.0);
    let p = (&a - &ad) * Complex64::new(0.0, -r2);
    let ev = |op: &DMatrix<Complex64>| (rho * op).trace().re;
    let (mq, mp) = (ev(&q), ev(&p));
    let qp = (&q * &p + &p * &q) * Complex64::new(0.5, 0.0);
    [mq, mp, ev(&(&q * &q)) - mq * mq, ev(&qp) - mq * mp, ev(&(&p * &p)) - mp * mp]
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule with panels no wider than `width`.
pub fn composite_nodes(a: f64, b: f64, width: f64, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let panels = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// `γ(t)` and `Δ(t)` by direct double quadrature of
/// `∫₀ᵗ ds ∫₀^Ω dω J(ω) {sin, coth(ω/2T) cos}(ω₀s) {sin, cos}(ωs)` with
/// `J(ω) = ω e^{−ω/ω_c}`.
pub fn brute_force_coefficients(t: f64, omega0: f64, omega_c: f64, temperature: f64) -> (f64, f64) {
    let omega_max = 45.0 * omega_c;
    let width = (1.0 / t.max(1.0)).min(0.1 * omega_c);
    let freq = composite_nodes(0.0, omega_max, width, 20);
    let times = composite_nodes(0.0, t, 0.25, 20);
    let weight = |w: f64| {
        let j = w * (-w / omega_c).exp();
        let coth = if temperature == 0.0 { 1.0 } else { 1.0 / (w / (2.0 * temperature)).tanh() };
        (j, j * coth)
    };
    let weights: Vec<(f64, (f64, f64), f64)> = freq.iter().map(|&(w, ww)| (w, weight(w), ww)).collect();
    let mut gamma = 0.0;
    let mut delta = 0.0;
    for &(s, ws) in &times {
        let mut ks = 0.0;
        let mut kc = 0.0;
        for &(w, (j, jc), ww) in &weights {
            let (sn, cs) = (w * s).sin_cos();
            ks += ww * j * sn;
            kc += ww * jc * cs;
        }
        gamma += ws * (omega0 * s).sin() * ks;
        delta += ws * (omega0 * s).cos() * kc;
    }
    (gamma, delta)
}

/// The damping rate `½ e^{−t/10} sin t`, switched to `½ e^{−π/4}` at `5π/2`.
pub fn example_rate(t: f64) -> f64 {
    if t < 2.5 * std::f64::consts::PI {
        0.5 * (-t / 10.0).exp() * t.sin()
    } else {
        0.5 * (-std::f64::consts::PI / 4.0).exp()
    }
}

/// `x(t) = 2α ∫₀ᵗ γ` by quadrature of [`example_rate`].
pub fn example_x(t: f64, alpha: f64) -> f64 {
    let switch = 2.5 * std::f64::consts::PI;
    let mut total = 0.0;
    let mut pieces = vec![(0.0, t.min(switch))];
    if t > switch {
        pieces.push((switch, t));
    }
    for (a, b) in pieces {
        if b > a {
            total += composite_nodes(a, b, 0.1, 20)
                .iter()
                .map(|&(s, w)| w * example_rate(s))
                .sum::<f64>();
        }
    }
    2.0 * alpha * total
}

/// Dense-scan maximum of `e^{−K u₊} − e^{−K u₋}` over `K`, refined by
/// ternary search around the best sample.
pub fn coherent_scan(u_plus: f64, u_minus: f64) -> (f64, f64) {
    let f = |k: f64| (-k * u_plus).exp() - (-k * u_minus).exp();
    let mut best = (0.0, 0.0);
    for i in 0..=20_000 {
        let k = i as f64 * 1e-3;
        if f(k) > best.1 {
            best = (k, f(k));
        }
    }
    let (mut lo, mut hi) = ((best.0 - 1e-3).max(0.0), best.0 + 1e-3);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let k = 0.5 * (lo + hi);
    (k, f(k))
}
