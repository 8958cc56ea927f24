use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xcl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xcl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn xcl")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("small.cfg");
    let text = format!(
        "data.per_class = 20\ndata.test_per_class = 10\nteacher.epochs = 2\nstudent.epochs = 2\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn train_then_distill_writes_models_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("out");
    let t = xcl(&["train-teacher", "--config", &cfg, "--seed", "3"], &out);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    assert!(out.join("teacher-3.model").exists());

    let d = xcl(&["distill", "--config", &cfg, "--seed", "3"], &out);
    assert!(d.status.success(), "{}", String::from_utf8_lossy(&d.stderr));
    assert!(out.join("student-3.model").exists());
    let csv = fs::read_to_string(out.join("distill.csv")).unwrap();
    assert!(csv.starts_with("experiment,seed,method,metric,value,config_hash\n"));
    assert!(csv.lines().skip(1).all(|l| l.starts_with("distill,3,")));
}

#[test]
fn missing_teacher_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let r = xcl(&["distill", "--config", &cfg, "--seed", "0"], &dir.path().join("empty"));
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "student.unknown = 1\n");
    let r = xcl(&["observation1", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown key"));

    let r = xcl(&["sweep", "--axis", "colour"], &dir.path().join("o"));
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn diverging_loss_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("div.cfg");
    fs::write(&cfg, "data.regression_n = 100\ndata.regression_test_n = 20\nteacher.lr = 1e200\nteacher.epochs = 3\n")
        .unwrap();
    let r = xcl(&["curve-uncertainty", "--config", cfg.to_str().unwrap(), "--seed", "0"], &dir.path().join("o"));
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "experiment.seeds = 0, 1\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(xcl(&["observation2", "--config", &cfg], out).status.success());
    }
    let first = fs::read(a.join("observation2.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("observation2.csv")).unwrap());
    // Re-running into the same directory replaces rows rather than appending.
    assert!(xcl(&["observation2", "--config", &cfg], &a).status.success());
    assert_eq!(first, fs::read(a.join("observation2.csv")).unwrap());
}

#[test]
fn changed_config_is_refused_on_merge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = small_config(dir.path(), "");
    assert!(xcl(&["train-teacher", "--config", &cfg, "--seed", "0"], &out).status.success());
    let cfg = small_config(dir.path(), "teacher.lr = 0.02\n");
    let r = xcl(&["train-teacher", "--config", &cfg, "--seed", "1"], &out);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn json_flag_emits_the_same_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("o");
    let r = xcl(&["train-teacher", "--config", &cfg, "--seed", "0", "--json"], &out);
    assert!(r.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    let csv = fs::read_to_string(out.join("train-teacher.csv")).unwrap();
    assert_eq!(rows.len(), csv.lines().count() - 1);
    assert_eq!(rows[0]["experiment"], "train-teacher");
    assert_eq!(rows[0]["seed"], 0);
}

#[test]
fn help_lists_every_subcommand() {
    let r = Command::new(env!("CARGO_BIN_EXE_xcl")).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&r.stdout);
    for cmd in ["train-teacher", "distill", "observation1", "observation2", "sweep", "curve-uncertainty"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}
