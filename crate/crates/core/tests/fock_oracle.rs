mod common;

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{fock_fidelity, fock_moments, fock_state};
use gaussnm::gauss::{fidelity, make_gaussian, StateParams};

fn random_state(rng: &mut StdRng) -> StateParams {
    StateParams {
        thermal: rng.gen_range(0.0..=2.0),
        squeeze: rng.gen_range(0.0..=1.0),
        squeeze_angle: rng.gen_range(0.0..2.0 * PI),
        beta_mag: rng.gen_range(0.0..=2.0),
        beta_arg: rng.gen_range(0.0..2.0 * PI),
    }
}

#[test]
fn fidelity_matches_truncated_fock_space_at_150_levels() {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (p1, p2) = (random_state(&mut rng), random_state(&mut rng));
        let closed = fidelity(&make_gaussian(&p1).unwrap(), &make_gaussian(&p2).unwrap()).unwrap();
        let fock = fock_fidelity(&fock_state(&p1, 150, 200), &fock_state(&p2, 150, 200));
        worst = worst.max((closed - fock).abs());
    }
    assert!(worst < 1e-6, "max |ΔF| = {worst:e}");
}

#[test]
fn moments_match_fock_expectation_values() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..10 {
        // second moments weight the tail, so keep the occupation modest
        let mut p = random_state(&mut rng);
        p.thermal *= 0.5;
        p.squeeze *= 0.6;
        let g = make_gaussian(&p).unwrap();
        let m = fock_moments(&fock_state(&p, 150, 200));
        let cov = g.cov().to_matrix();
        let want = [g.mean()[0], g.mean()[1], cov[0][0], cov[0][1], cov[1][1]];
        for (a, b) in m.iter().zip(want) {
            assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()), "{p:?}: fock {m:?} vs {want:?}");
        }
    }
}

#[test]
fn pure_state_fidelity_is_squared_overlap_root() {
    // |⟨α|β⟩| = e^{-|α−β|²/2} for coherent states
    let a = StateParams::coherent(1.2, 0.3);
    let b = StateParams::coherent(0.4, -1.0);
    let closed = fidelity(&make_gaussian(&a).unwrap(), &make_gaussian(&b).unwrap()).unwrap();
    let d = num_complex::Complex64::from_polar(1.2, 0.3) - num_complex::Complex64::from_polar(0.4, -1.0);
    assert!((closed - (-d.norm_sqr() / 2.0).exp()).abs() < 1e-12);
}
