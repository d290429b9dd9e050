use std::path::Path;
use std::process::{Command, Output};

fn bome(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bome"));
    cmd.args(args).env_remove("BOME_OUTPUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("BOME_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn strip_wall(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn list_problems_names_every_problem() {
    let o = bome(&["list-problems"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["coreset", "minimax", "lls", "hyperclean", "ridge", "double_well"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"problem":"minimax","method":"bome","solver":{"iters":30}}"#);
    let out = dir.path().join("out");
    let o = bome(&["run", &cfg, "--out", out.to_str().unwrap(), "--xi", "0.1"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("minimax_bome.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.starts_with("k,f,q_hat,lambda,phi,delta_norm,grad_qhat_norm,kkt,wall_us\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["config"]["outer_step"], 0.1);
    assert!(summary[0]["dist_to_opt"].as_f64().is_some());
}

#[test]
fn env_var_redirects_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem":"lls","solver":{"iters":5},"output_path":"ignored"}"#,
    );
    let target = dir.path().join("from_env");
    let o = bome(&["run", &cfg], Some(&target));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(target.join("lls_bome.csv").exists());
    assert!(target.join("summary.json").exists());
}

#[test]
fn sweep_runs_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem":"coreset","solver":{"iters":20},"sweep":{"eta":[0.1,0.5,0.9],"barrier":["gradnorm","value"]}}"#,
    );
    let out = dir.path().join("s");
    let o = bome(&["sweep", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..6 {
        assert!(out.join(format!("coreset_bome_{i:04}.csv")).exists());
    }
    let summary: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.len(), 6);
    assert_eq!(summary[1]["config"]["eta"], 0.5);
    assert_eq!(summary[3]["config"]["barrier"], "value");
}

#[test]
fn identical_runs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem":{"name":"hyperclean","m_train":40,"m_val":20,"features":4},"solver":{"iters":25,"xi":0.01,"momentum":0.9}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(bome(&["run", &cfg, "--out", a.to_str().unwrap()], None).status.success());
    assert!(bome(&["run", &cfg, "--out", b.to_str().unwrap()], None).status.success());
    let ca = std::fs::read_to_string(a.join("hyperclean_bome.csv")).unwrap();
    let cb = std::fs::read_to_string(b.join("hyperclean_bome.csv")).unwrap();
    assert_eq!(strip_wall(&ca), strip_wall(&cb));
}

#[test]
fn invalid_config_exits_nonzero_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"problem":"coreset","solver":{"eta":-1}}"#);
    let o = bome(&["run", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta"));

    let bad_flag = write(dir.path(), "d.json", r#"{"problem":"coreset"}"#);
    let o = bome(&["run", &bad_flag, "--barrier", "cubic"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_error_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem":"minimax","method":"naive_gda","solver":{"xi":1.0,"iters":5000}}"#,
    );
    let o = bome(&["run", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("NumericalError"));
}

#[test]
fn gradcheck_passes_for_builtin_problems() {
    for p in ["coreset", "minimax", "lls", "hyperclean", "ridge", "double_well"] {
        let o = bome(&["gradcheck", p], None);
        assert!(o.status.success(), "{p}: {}", stdout(&o));
        assert_eq!(stdout(&o).matches("PASS").count(), 2);
    }
    assert_eq!(bome(&["gradcheck", "nope"], None).status.code(), Some(2));
}
