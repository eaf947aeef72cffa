use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GAUSSIAN: &str = r#"{"experiment":"gaussian_missing","covariance":{"preset":"gen2"},
    "methods":["robust_qcqp","bootstrap_s:3","baseline","oracle"],"epsilon":0.075,
    "n_grid":[50,100],"trials":6,"seed":9,"uncertainty":{"delta":0.05,"c":30.0},
    "histogram_at":50,"grid_n":2000}"#;

fn fairboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairboot")).args(args).env_remove("FAIRBOOT_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())).collect();
    v.sort();
    v
}

#[test]
fn gaussian_runs_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", GAUSSIAN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = fairboot(&["gaussian", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = fairboot(&["gaussian", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"]);
    assert!(out.status.success());
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), ["histogram.csv", "rows.csv", "summary.csv"]);
    assert_eq!(fa, fb);
}

#[test]
fn overrides_change_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", GAUSSIAN);
    let a = tmp.path().join("a");
    let out = fairboot(&["gaussian", "--config", &cfg, "--out", a.to_str().unwrap(), "--trials", "2", "--seed", "4", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(a.join("rows.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4 * 2 * 2);
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write(tmp.path(), "u.json", &GAUSSIAN.replace("\"seed\":9", "\"seed\":9,\"sed\":1"));
    assert_eq!(fairboot(&["gaussian", "--config", &unknown]).status.code(), Some(2));
    let cfg = write(tmp.path(), "g.json", GAUSSIAN);
    // A gaussian config under the sweep subcommand.
    assert_eq!(fairboot(&["sweep", "--config", &cfg]).status.code(), Some(2));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_fairboot")).args(["gaussian", "--config", &cfg]).env("FAIRBOOT_THREADS", "many").output().unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
    assert_eq!(fairboot(&["solve", "--b-yx", "1,0", "--b-ex", "1,0,0", "--epsilon", "0.1"]).status.code(), Some(2));
}

#[test]
fn run_failures_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.csv");
    let cfg = format!(
        r#"{{"experiment":"bootstrap_sweep","methods":["baseline"],"epsilon":0.05,"trials":1,
            "output_dir":"{}","sweep":{{"dataset":{{"kind":"csv","path":"{}",
            "schema":{{"feature_cols":["a"],"target_col":"y","sensitive_col":"s"}}}},
            "injector":{{"kind":"keep_n","n":10}}}}}}"#,
        tmp.path().join("out").display(),
        missing.display()
    );
    let path = write(tmp.path(), "s.json", &cfg);
    let out = fairboot(&["sweep", "--config", &path]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_prints_the_solution() {
    let out = fairboot(&["solve", "--b-yx", "0.6,0.3", "--b-ex", "0.2,0.5", "--epsilon", "0.01"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let a: Vec<f64> = v["a_star"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let c = a[0] * 0.2 + a[1] * 0.5;
    assert!(c * c <= 0.01 + 1e-9);
    let robust = fairboot(&["solve", "--b-yx", "0.6,0.3", "--b-ex", "0.2,0.5", "--epsilon", "0.01", "--tau", "0.1"]);
    assert!(robust.status.success());
    let r: serde_json::Value = serde_json::from_slice(&robust.stdout).unwrap();
    assert!(r["solution"]["objective"].as_f64().unwrap() <= v["objective"].as_f64().unwrap() + 1e-12);
}
