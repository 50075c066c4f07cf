use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dp-tradeoff"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        "methods = [\"S1-GNB\", \"S3-GNB\", \"S2-MLP\"]\n\
         epsilon_grid = [0.1, 1.0, 10.0, 100.0]\n\
         n_train = 120\nn_test = 120\nreference_size = 60\nn_repetitions = 2\n\
         n_protected_attributes = 3\nrecord_wall_time = false\n\
         [dataset]\nkind = \"synthetic\"\nname = \"tiny\"\nn = 500\np = 5\nk_values = [3]\n\
         [mlp]\nhidden = [6]\nepochs = 2\nbatch_size = 40\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn gen_data_writes_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("data");
    let o = run(&["gen-data", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("tiny_k3.csv")).unwrap();
    assert_eq!(text.lines().count(), 501);
    assert!(text.starts_with("f0,f1,f2,f3,f4,label"));
}

#[test]
fn sweep_analyze_recommend() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("res");
    let out_s = out.to_str().unwrap();
    let o = run(&["sweep", "--config", &cfg, "--out", out_s, "--seed", "3", "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results.starts_with(
        "dataset,n_classes,method,stage,epsilon,rep,accuracy,baseline_accuracy,acl,salem_mi_adv,yeom_mi_adv,\
         yeom_ai_mean_adv,yeom_ai_std,salem_ai_mean_adv,wall_time_s,seed\n"
    ));
    assert_eq!(results.lines().count(), 1 + 3 * 4 * 2 + 3 * 2);

    let plots = dir.path().join("plots");
    let o = run(&["analyze", "--out", plots.to_str().unwrap(), "--results", out.join("results.csv").to_str().unwrap(), "--metric", "acl", "--method", "S3-GNB"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("# tiny_k3 S3-GNB acl"));
    assert!(stdout.contains("inflection\t"));
    assert!(!stdout.contains("S1-GNB"));
    assert!(plots.join("acl_tiny_k3_S3-GNB.csv").exists());
    assert!(plots.join("stage_summary.csv").exists());

    let o = run(&["recommend", "--out", out_s, "--acl-bound", "0.5,0.9", "--eps-bound", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("acl_bound\tmethod\tepsilon"));
    assert!(stdout.contains("eps_bound\tmethod\tacl"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("0.5\t") || l.starts_with("0.9\t")).count(), 2);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "methods = []\n").unwrap();
    let o = run(&["sweep", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("method"));

    std::fs::write(&bad, "colour = \"blue\"\n").unwrap();
    let o = run(&["gen-data", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let o = run(&["sweep", "--profile", "laptop"]);
    assert!(!o.status.success());

    let o = run(&["analyze", "--results", "/nonexistent/results.csv"]);
    assert!(!o.status.success());
}
