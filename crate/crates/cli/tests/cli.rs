use std::path::Path;
use std::process::{Command, Output};

fn coordwise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coordwise")).args(args).output().expect("binary runs")
}

fn tiny(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> =
        ["experiment", "hier-logistic", "--groups", "8,12", "--obs-per-group", "5", "--iters", "150", "--burnin", "50", "--reps", "2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    coordwise(&refs)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn experiment_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let svg = dir.path().join("a.svg");
    for (out, plot) in [(&a, Some(&svg)), (&b, None)] {
        let mut args = tiny(&["--out", out.to_str().unwrap()]);
        if let Some(p) = plot {
            args.extend(["--plot".to_string(), p.to_str().unwrap().to_string()]);
        }
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    // header + 2 grid points × 2 samplers × (max, mu, tau)
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "# tiny run\ngroups = 8\nobs-per-group = 5\niters = 150\nburnin = 50\nreps = 1\nsamplers = gibbs-ars\n",
    );
    let o = coordwise(&["experiment", "hier-logistic", "--config", &cfg, "--groups", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains("J=6,")), "{text}");
    assert_eq!(text.lines().count(), 1 + 3);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(coordwise(&["experiment", "no-such-kind"]).status.code(), Some(2));
    assert_eq!(coordwise(&["experiment", "hier-logistic", "--iters", "10", "--burnin", "20"]).status.code(), Some(2));
    assert_eq!(coordwise(&["experiment", "hier-logistic", "--set", "bogus=1"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.cfg", "iters = many\n");
    assert_eq!(coordwise(&["experiment", "hier-logistic", "--config", &bad]).status.code(), Some(2));
    assert_eq!(coordwise(&["experiment", "diffusion", "--N", "4,6"]).status.code(), Some(2));
    assert_eq!(coordwise(&["verify", "conductance"]).status.code(), Some(2));
}

#[test]
fn replicate_failures_exit_4() {
    // exact ARS cannot handle the two-dimensional group conditionals
    let o = coordwise(&[
        "experiment",
        "hier-covariates",
        "--covariates",
        "2",
        "--groups",
        "6",
        "--obs-per-group",
        "5",
        "--iters",
        "120",
        "--burnin",
        "20",
        "--reps",
        "2",
        "--samplers",
        "gibbs-ars",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn diffusion_writes_acceptance_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = coordwise(&[
        "experiment",
        "diffusion",
        "--N",
        "4,8",
        "--R",
        "8",
        "--T",
        "2",
        "--iters",
        "300",
        "--burnin",
        "100",
        "--reps",
        "2",
        "--girsanov",
        "ito",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let acc = std::fs::read_to_string(dir.path().join("d_acceptance.csv")).unwrap();
    assert!(acc.starts_with("N,delta,acceptance_median"));
    assert_eq!(acc.lines().count(), 3);
    assert!(dir.path().join("d_trace.csv").exists());
}

#[test]
fn verify_kernel_csv() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "state,prob\n0,0.5\n1,0.5\n");
    // reversible two-state kernel with gap 0.6
    let k = write(dir.path(), "k.csv", "row,col,value\n0,0,0.7\n0,1,0.3\n1,0,0.3\n1,1,0.7\n");
    let o = coordwise(&["verify", "conductance", "--target", &t, "--kernel", &k]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!((v["kernel"]["spectral_gap"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((v["kernel"]["profile"][0]["phi"].as_f64().unwrap() - 0.3).abs() < 1e-12);

    let bad = write(dir.path(), "bad.csv", "state,prob\n0,0.9\n1,0.1\n");
    assert_eq!(coordwise(&["verify", "conductance", "--target", &bad, "--kernel", &k]).status.code(), Some(3));
}

#[test]
fn verify_block_kernels() {
    let dir = tempfile::tempdir().unwrap();
    // 2×2 product target, state index = 2·x0 + x1
    let t = write(dir.path(), "t.csv", "state,prob\n0,0.1\n1,0.2\n2,0.3\n3,0.4\n");
    // exact Gibbs blocks: x0 | x1 has slices {0,2} and {1,3}
    let b0 = write(dir.path(), "b0.csv", "row,col,value\n0,0,0.25\n0,2,0.75\n2,0,0.25\n2,2,0.75\n1,1,0.3333333333333333\n1,3,0.6666666666666667\n3,1,0.3333333333333333\n3,3,0.6666666666666667\n");
    let b1 = write(dir.path(), "b1.csv", "row,col,value\n0,0,0.3333333333333333\n0,1,0.6666666666666667\n1,0,0.3333333333333333\n1,1,0.6666666666666667\n2,2,0.42857142857142855\n2,3,0.5714285714285714\n3,2,0.42857142857142855\n3,3,0.5714285714285714\n");
    let o = coordwise(&["verify", "conductance", "--target", &t, "--card", "2,2", "--block", &b0, "--block", &b1]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    // exact conditionals have κ = 1
    for k in v["kernel"]["block_kappa"].as_array().unwrap() {
        assert!((k.as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
    // swapping the blocks moves the wrong coordinate
    let o = coordwise(&["verify", "conductance", "--target", &t, "--card", "2,2", "--block", &b1, "--block", &b0]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_random_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = coordwise(&["verify", "conductance", "--random", "--instances", "4", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["violation_count"] == 0));
}
