mod common;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use common::example_rate;
use gaussnm::channels::{Channel, DampingRateSpec, Mode};
use gaussnm::gauss::{make_gaussian, StatePairParams, StateParams};
use gaussnm::measure::{
    closed_form_coherent_damping, closed_form_coherent_qbm, fidelity_trajectory, first_order_coherent,
    first_order_general_pure, first_order_squeezed_pair, maximize_measure,
    measure_from_trajectory, squeezing_slopes, window_grid, Family, MeasureConfig, DAMPING_WINDOW,
};
use gaussnm::spectral::{build_coefficients, ChannelCoefficients, EnvironmentSpec};

fn qbm_table() -> Arc<ChannelCoefficients> {
    static TABLE: OnceLock<Arc<ChannelCoefficients>> = OnceLock::new();
    TABLE
        .get_or_init(|| {
            let env = EnvironmentSpec::new(1.0, 0.2, 0.2).unwrap();
            Arc::new(build_coefficients(&env, 0.1, 40.0, 1000).unwrap())
        })
        .clone()
}

fn damping(alpha: f64) -> Channel {
    Channel::damping(alpha, DampingRateSpec::PaperExample, Mode::Exact).unwrap()
}

/// A QBM table with `Δ = γ`, whose exact map coincides with the damping channel.
fn damping_as_qbm(alpha: f64, delta_scale: f64) -> ChannelCoefficients {
    let times: Vec<f64> = (0..=8000).map(|i| i as f64 * DAMPING_WINDOW / 8000.0).collect();
    let gamma: Vec<f64> = times.iter().map(|&t| example_rate(t)).collect();
    let delta = gamma.iter().map(|g| g * delta_scale).collect();
    ChannelCoefficients::from_samples(times, gamma, delta, alpha).unwrap()
}

fn state() -> impl Strategy<Value = StateParams> {
    (0.0..2.0f64, 0.0..1.5f64, 0.0..2.0 * PI, 0.0..2.0f64, 0.0..2.0 * PI).prop_map(|(n, r, phi, b, th)| {
        StateParams {
            thermal: n,
            squeeze: r,
            squeeze_angle: phi,
            beta_mag: b,
            beta_arg: th,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_channels_keep_states_physical(p in state(), t in 0.0..40.0f64) {
        let s = make_gaussian(&p).unwrap();
        let q = Channel::qbm(qbm_table(), Mode::Exact).evolve(&s, t).unwrap();
        prop_assert!(q.state.is_physical(), "qbm t={t}: det {}", q.state.det());
        let d = damping(0.15).evolve(&s, t).unwrap();
        prop_assert!(d.state.is_physical());
    }

    #[test]
    fn fidelity_trajectories_are_consistent(a in state(), b in state(), alpha in 0.01..0.15f64) {
        let pair = StatePairParams::from_states(a, b);
        let grid = window_grid(DAMPING_WINDOW, 400);
        let traj = fidelity_trajectory(&pair, &damping(alpha), &grid).unwrap();
        prop_assert!(traj.fidelity.iter().all(|&f| (0.0..=1.0 + 1e-12).contains(&f)));
        let mut last = f64::NEG_INFINITY;
        let mut total = 0.0;
        for iv in &traj.intervals {
            prop_assert!(iv.t_plus >= last && iv.t_minus > iv.t_plus);
            prop_assert!(iv.contribution > 0.0);
            last = iv.t_minus;
            total += iv.contribution;
        }
        prop_assert!((measure_from_trajectory(&traj) - total).abs() < 1e-15);
    }

    #[test]
    fn optimum_dominates_sampled_coherent_pairs(d in 0.0..6.0f64) {
        static BEST: OnceLock<f64> = OnceLock::new();
        let best = *BEST.get_or_init(|| {
            maximize_measure(Family::Coherent, &damping(0.1), &MeasureConfig::default()).unwrap().value
        });
        let pair = StatePairParams::from_states(StateParams::coherent(d / 2.0, 0.0), StateParams::coherent(d / 2.0, PI));
        let traj = fidelity_trajectory(&pair, &damping(0.1), &window_grid(DAMPING_WINDOW, 2000)).unwrap();
        prop_assert!(measure_from_trajectory(&traj) <= best + 1e-9);
    }

    #[test]
    fn qbm_with_matched_noise_reproduces_damping(a in state(), b in state()) {
        let qbm = Channel::qbm(Arc::new(damping_as_qbm(0.1, 1.0)), Mode::Exact);
        let grid = window_grid(DAMPING_WINDOW, 200);
        let pair = StatePairParams::from_states(a, b);
        let fq = fidelity_trajectory(&pair, &qbm, &grid).unwrap().fidelity;
        let fd = fidelity_trajectory(&pair, &damping(0.1), &grid).unwrap().fidelity;
        for (x, y) in fq.iter().zip(&fd) {
            prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }
}

#[test]
fn qbm_closed_form_reduces_to_damping() {
    let want = closed_form_coherent_damping(0.1, &DampingRateSpec::PaperExample, DAMPING_WINDOW).unwrap();
    let got = closed_form_coherent_qbm(&damping_as_qbm(0.1, 1.0), (PI, 2.0 * PI)).unwrap();
    assert!((got.value - want.value).abs() < 1e-6, "{} vs {}", got.value, want.value);
    assert!((got.k.unwrap() - want.k.unwrap()).abs() < 1e-4);

    let silent = closed_form_coherent_qbm(&damping_as_qbm(0.1, 0.0), (PI, 2.0 * PI)).unwrap();
    assert_eq!(silent.value, 0.0);
}

#[test]
fn diffusion_slope_dominates_at_the_maximizing_squeezing() {
    let family = Family::Squeezed {
        phi: Some(0.05),
        equal_r: true,
    };
    let best = maximize_measure(family, &Channel::qbm(qbm_table(), Mode::Exact), &MeasureConfig::default()).unwrap();
    let r = best.argmax.squeeze[0];
    assert!(r > 2.0, "maximizing r = {r}");
    let s = squeezing_slopes(r, r, 0.05).unwrap();
    let at_opt = s.s_gamma / s.s_delta;
    let mild = squeezing_slopes(1.0, 1.0, 0.05).unwrap();
    assert!(at_opt.abs() < 0.05, "{s:?}");
    assert!(at_opt.abs() < 0.2 * (mild.s_gamma / mild.s_delta).abs());
}

#[test]
fn coherent_thermal_optimum_is_pure() {
    let ch = damping(0.1);
    let cfg = MeasureConfig::default();
    let mixed = maximize_measure(Family::CoherentThermal, &ch, &cfg).unwrap();
    let pure = maximize_measure(Family::Coherent, &ch, &cfg).unwrap();
    assert!(mixed.argmax.thermal[0] < 1e-3, "N = {}", mixed.argmax.thermal[0]);
    assert!((mixed.value - pure.value).abs() < 1e-5 * pure.value);
}

#[test]
fn general_pure_formula_reduces_to_its_limits() {
    let ch = damping(0.1);
    let d = 2f64.sqrt();
    let coherent = StatePairParams::from_states(StateParams::coherent(d / 2.0, 0.0), StateParams::coherent(d / 2.0, PI));
    let a = first_order_general_pure(&coherent, &ch, None).unwrap().value;
    let b = first_order_coherent(&ch, None).unwrap().value;
    assert!((a - b).abs() < 1e-10 * b, "{a} vs {b}");

    let squeezed = StatePairParams::from_states(StateParams::squeezed(1.3, 0.2), StateParams::squeezed(0.7, 0.0));
    let a = first_order_general_pure(&squeezed, &ch, None).unwrap().value;
    let b = first_order_squeezed_pair(1.3, 0.7, 0.2, &ch, None).unwrap().value;
    assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
}

#[test]
fn first_order_gap_is_second_order_in_alpha() {
    let gap = |alpha: f64| {
        let exact = closed_form_coherent_damping(alpha, &DampingRateSpec::PaperExample, DAMPING_WINDOW).unwrap();
        let fo = first_order_coherent(&damping(alpha), None).unwrap();
        (exact.value - fo.value).abs()
    };
    let ratio = gap(0.04) / gap(0.02);
    assert!(ratio > 3.5, "gap ratio {ratio}");
}
