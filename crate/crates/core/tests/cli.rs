use std::process::{Command, Output};

fn gaussnm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussnm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const ZERO2: [&str; 10] = [
    "--n2", "0", "--r2", "0", "--phi2", "0", "--beta-mag2", "0", "--beta-arg2", "0",
];

fn fidelity(first: [&str; 5]) -> Output {
    let mut args = vec!["fidelity"];
    for (flag, v) in ["--n1", "--r1", "--phi1", "--beta-mag1", "--beta-arg1"].iter().zip(first) {
        args.extend([*flag, v]);
    }
    args.extend(ZERO2);
    gaussnm(&args)
}

/// The `value` column of a measure record.
fn measure_value(o: &Output) -> f64 {
    let text = stdout(o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let record: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == "value").unwrap();
    record[i].parse().unwrap()
}

#[test]
fn fidelity_of_identical_vacua() {
    let o = fidelity(["0", "0", "0", "0", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("fidelity 1.000000000000"), "{text}");
    assert!(text.contains("bures_distance 0.000000000000"), "{text}");
}

#[test]
fn fidelity_of_vacuum_and_thermal() {
    let o = fidelity(["1", "0", "0", "0", "0"]);
    assert!(stdout(&o).contains("fidelity 0.707106781187"));
}

#[test]
fn invalid_arguments_exit_with_usage_code() {
    let o = fidelity(["-0.5", "0", "0", "0", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n1"));

    let o = gaussnm(&["fidelity", "--n1", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gaussnm(&["measure", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn closed_damping_measure() {
    let o = gaussnm(&["measure", "--channel", "damping", "--family", "coherent", "--alpha", "0.1", "--method", "closed"]);
    assert!(o.status.success());
    assert!((measure_value(&o) - 0.0459).abs() < 5e-4);
}

#[test]
fn constant_rate_is_markovian() {
    let o = gaussnm(&["measure", "--channel", "damping", "--rate", "constant", "--gamma0", "0.5", "--family", "squeezed"]);
    assert!(o.status.success());
    assert_eq!(measure_value(&o), 0.0);

    let o = gaussnm(&[
        "measure", "--channel", "damping", "--rate", "constant", "--gamma0", "0.5", "--family", "coherent", "--method",
        "closed",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn qbm_numeric_and_closed_agree() {
    let base = [
        "measure", "--channel", "qbm", "--family", "coherent", "--alpha", "0.1", "--omega0", "1", "--omega-c", "0.2",
        "--T", "0.2",
    ];
    let numeric = gaussnm(&[&base[..], &["--method", "numeric"]].concat());
    let closed = gaussnm(&[&base[..], &["--method", "closed"]].concat());
    assert!(numeric.status.success() && closed.status.success());
    let (a, b) = (measure_value(&numeric), measure_value(&closed));
    assert!(a > 0.0 && (a - b).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn coefficient_and_trajectory_tables() {
    let o = gaussnm(&["coeffs", "--omega0", "1", "--omega-c", "0.2", "--T", "0.2", "--alpha", "0.05", "--t-end", "5", "--steps", "10"]);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("t,gamma,delta,x,y"));
    assert_eq!(text.lines().count(), 12);

    let o = gaussnm(&["evolve", "--channel", "damping", "--alpha", "0.1", "--beta-mag", "1", "--t-end", "3", "--points", "4"]);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("t,mean_q,mean_p,cov_qq,cov_qp,cov_pp"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn help_documents_units() {
    let text = stdout(&gaussnm(&["measure", "--help"]));
    assert!(text.contains("time units"));
    assert!(text.contains("--temperature-unit"));
    let text = stdout(&gaussnm(&["fidelity", "--help"]));
    assert!(text.contains("radians"));
}

#[test]
fn reproduce_writes_deterministic_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gaussnm(&["reproduce", "--figure", "1", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fa = std::fs::read_to_string(a.join("fig1.csv")).unwrap();
    assert_eq!(fa, std::fs::read_to_string(b.join("fig1.csv")).unwrap());
    assert!(fa.lines().all(|l| l.split(',').count() == 7));
    assert!(a.join("fig1_summary.json").exists());

    let o = gaussnm(&["reproduce", "--figure", "2", "--out", a.to_str().unwrap()]);
    assert!(o.status.success());
    let f2 = std::fs::read_to_string(a.join("fig2.csv")).unwrap();
    assert_eq!(f2.lines().next().unwrap().split(',').count(), 9);

    let o = gaussnm(&["reproduce", "--figure", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = gaussnm(&["reproduce", "--figure", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}
