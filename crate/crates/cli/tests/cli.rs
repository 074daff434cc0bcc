use std::path::Path;
use std::process::{Command, Output};

fn siht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siht"))
        .args(args)
        .output()
        .expect("spawn siht")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn gen_writes_planted_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inst");
    let o = siht(&["gen", "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = csv_rows(&out.join("V.csv"));
    assert_eq!(v.len(), 50);
    assert!(v.iter().all(|r| r.len() == 100));
    assert_eq!(csv_rows(&out.join("y.csv")).len(), 50);
    let x: Vec<f64> = csv_rows(&out.join("ground_truth.csv"))
        .into_iter()
        .flatten()
        .collect();
    assert_eq!(x.len(), 100);
    assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 5);
}

#[test]
fn generated_instance_solves_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    let a = siht(&[
        "gen",
        "--out",
        inst.to_str().unwrap(),
        "--set",
        "n_samples=20",
        "--set",
        "dim=15",
        "--set",
        "s_true=2",
    ]);
    assert!(a.status.success(), "{}", stderr(&a));
    let run = dir.path().join("run");
    let b = siht(&[
        "solve",
        "--set",
        &format!("data_dir={}", inst.display()),
        "--set",
        "sparsity=2",
        "--set",
        "c_trials=200",
        "--set",
        "max_iters=500",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert!(b.status.success(), "{}", stderr(&b));
    assert!(run.join("trajectory_seed0.csv").exists());
    let summary = std::fs::read_to_string(run.join("summary.csv")).unwrap();
    assert!(summary.starts_with("seed,final_f,iterations,stop_reason,support"));
}

#[test]
fn missing_design_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = siht(&[
        "solve",
        "--set",
        &format!("data_dir={}", dir.path().display()),
        "--set",
        "sparsity=2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("V.csv"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let o = siht(&["bound", "--set", "batchsize=4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("batchsize"));

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "# comment\nsparsity = 3\nstep = 0.1\n").unwrap();
    let o = siht(&["bound", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step"));
}

#[test]
fn only_is_restricted_to_verify() {
    let o = siht(&["solve", "--only", "distance_identity"]);
    assert_eq!(o.status.code(), Some(2));
    let o = siht(&["verify", "--only", "no_such_check"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_single_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = siht(&[
        "verify",
        "--only",
        "distance_identity",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "name,status,lhs,rhs,gap,tol,trials,seed");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("distance_identity,exact_pass,"));
}

#[test]
fn verify_report_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        siht(&["verify", "--seed", "5", "--out", d.path().to_str().unwrap()]);
    }
    let ra = std::fs::read(a.path().join("report.csv")).unwrap();
    let rb = std::fs::read(b.path().join("report.csv")).unwrap();
    assert!(!ra.is_empty());
    assert_eq!(ra, rb);
}

#[test]
fn bound_reports_plan() {
    let o = siht(&[
        "bound",
        "--set",
        "n_samples=10",
        "--set",
        "dim=8",
        "--set",
        "s_true=3",
        "--set",
        "noise_sigma=0.1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("L_s[spectral_upper_bound]"));
    assert!(text.contains("L_s[exact_restricted]"));
    assert!(text.contains("S_B_min = "));
    assert!(text.contains("feasible = true"));
}

#[test]
fn full_batch_solve_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let o = siht(&[
        "solve",
        "--set",
        "n_samples=20",
        "--set",
        "dim=30",
        "--set",
        "s_true=3",
        "--set",
        "noise_sigma=0.1",
        "--set",
        "batch_size=20",
        "--set",
        "c=20",
        "--set",
        "seeds=0..3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for seed in 0..3 {
        let text =
            std::fs::read_to_string(dir.path().join(format!("trajectory_seed{seed}.csv"))).unwrap();
        let f: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(f.len() > 1);
        for w in f.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-13 * (1.0 + w[0].abs()),
                "{} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn list_keys_prints_table() {
    let o = siht(&["solve", "--list-keys"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["batch_size", "gamma_factor", "seeds", "tie_rule"] {
        assert!(text.contains(key), "missing {key}");
    }
}
