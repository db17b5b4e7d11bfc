use gaussnm::experiments::{run, Experiment, ExperimentConfig, TemperatureUnit};
use gaussnm::spectral::{delta_zero, EnvironmentSpec};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("schema=1\n{text}")).unwrap()
}

#[test]
fn fig1_schema_and_small_coupling_agreement() {
    let out = run(&ExperimentConfig::defaults(Experiment::Fig1)).unwrap();
    let t = out.table("fig1").unwrap();
    assert_eq!(t.header.len(), 7);
    assert_eq!(t.rows.len(), 22);
    let alpha = t.column("alpha").unwrap();
    let exact = t.column("coherent_exact").unwrap();
    let fo = t.column("coherent_first_order").unwrap();
    let i = alpha.iter().position(|&a| a == 0.1).expect("α = 0.1 sampled");
    assert!((exact[i] - 0.0459).abs() < 5e-4, "{}", exact[i]);
    for k in 0..alpha.len() {
        if alpha[k] <= 0.1 {
            assert!((exact[k] - fo[k]).abs() <= 0.02 * exact[k], "α={}", alpha[k]);
        }
    }
    for phi in ["0.1", "0.2"] {
        let sq = t.column(&format!("squeezed_exact_phi{phi}")).unwrap();
        assert!(sq.iter().zip(&exact).all(|(s, c)| s > c), "φ={phi}");
    }
}

#[test]
fn fig2_curves_and_vacuum_column() {
    let out = run(&config("experiment=fig2\nt_points=121\n")).unwrap();
    let t = out.table("fig2").unwrap();
    assert_eq!(t.header.len(), 9);
    let times = t.column("t").unwrap();
    for w0 in [4.0, 6.0] {
        let col = t.column(&format!("delta_omega0_{w0}_T0")).unwrap();
        let env = EnvironmentSpec::new(w0, 1.0, 0.0).unwrap();
        for (tt, d) in times.iter().zip(&col) {
            assert!((d - delta_zero(*tt, &env).unwrap()).abs() < 1e-9);
        }
    }
    let dip = |name: &str| t.column(name).unwrap().into_iter().fold(0.0, f64::min);
    assert!(dip("delta_omega0_6_T0.2") < 0.0);
    assert!(dip("delta_omega0_4_T0.2").abs() < dip("delta_omega0_6_T0.2").abs());
}

#[test]
fn fig3_first_order_tracks_exact_at_small_coupling() {
    let out = run(&config("experiment=fig3\nalpha_points=6\ninset_t_points=4\n")).unwrap();
    let t = out.table("fig3").unwrap();
    let alpha = t.column("alpha").unwrap();
    let exact = t.column("coherent_exact_T0.2").unwrap();
    let fo = t.column("coherent_first_order_T0.2").unwrap();
    for k in 0..alpha.len() {
        if alpha[k] < 0.1 {
            assert!((exact[k] - fo[k]).abs() <= 0.03 * exact[k], "α={}: {} vs {}", alpha[k], exact[k], fo[k]);
        }
    }
    let inset = out.table("fig3_inset").unwrap();
    assert_eq!(inset.rows.len(), 4);
    assert_eq!(inset.column("coherent_first_order_omega0_1").unwrap()[0], 0.0);
}

#[test]
fn fig4_smaller_angle_saturates_earlier() {
    let out = run(&config("experiment=fig4\nalpha_include=\n")).unwrap();
    let t = out.table("fig4").unwrap();
    let bend = |phi: &str| {
        let v = t.column(&format!("squeezed_exact_phi{phi}")).unwrap();
        let n = v.len();
        (v[n - 1] - v[n - 2]) / (v[1] - v[0])
    };
    assert!(bend("0.05") < bend("0.1"), "{} vs {}", bend("0.05"), bend("0.1"));
}

#[test]
fn runs_are_deterministic() {
    let cfg = config("experiment=fig1\nalpha_points=4\nalpha_include=\n");
    let a = run(&cfg).unwrap().table("fig1").unwrap().to_csv().unwrap();
    let b = run(&cfg).unwrap().table("fig1").unwrap().to_csv().unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(
        &path,
        "# a small custom run\nschema=1\nexperiment=custom\nalpha_points=2\nalpha_include=\nmethod=closed\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::from_file(&path).unwrap();
    assert_eq!(cfg.experiment, Experiment::Custom);
    assert_eq!(cfg.temperature_unit, TemperatureUnit::Omega0);
    let out = run(&cfg).unwrap();
    assert_eq!(out.records.len(), 1);
    let body = &out.records[0].1;
    assert_eq!(body.lines().count(), 3);
    assert!(body.lines().all(|l| l.split(',').count() == 19));
    let written = out.write(dir.path()).unwrap();
    assert!(!written.is_empty());
    for p in written {
        assert!(p.exists());
    }

    assert!(ExperimentConfig::parse("experiment=fig1\n").is_err());
    assert!(ExperimentConfig::parse("schema=1\nbogus=1\n").is_err());
    assert!(ExperimentConfig::parse("schema=1\nalpha_max=0.1\nalpha_max=0.2\n").is_err());
}
