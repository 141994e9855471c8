use std::process::{Command, Output};

fn cchart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cchart"))
        .args(args)
        .env("RL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_names_every_experiment() {
    let o = cchart(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for id in ["table1", "table6", "table_optW", "fig_MECworst", "fig_dpm_CED"] {
        assert!(text.contains(id), "{id} missing from\n{text}");
    }
}

#[test]
fn exit_codes() {
    let ok = cchart(&["arl", "--chart", "ewma", "--lambda", "0.1", "--limit", "2.7", "--numeric"]);
    assert_eq!(ok.status.code(), Some(0));

    let bad_param = cchart(&["arl", "--chart", "ewma", "--lambda", "1.5", "--limit", "2.7", "--reps", "1000"]);
    assert_eq!(bad_param.status.code(), Some(2));
    let no_limit = cchart(&["arl", "--chart", "cusum", "--k", "0.5", "--reps", "1000"]);
    assert_eq!(no_limit.status.code(), Some(2));
    let unknown = cchart(&["reproduce", "--experiment", "table99"]);
    assert_eq!(unknown.status.code(), Some(2));
    let bad_flag = cchart(&["arl", "--bogus"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let unwritable = dir.path().join("missing").join("out.csv");
    let io = cchart(&[
        "arl", "--chart", "cusum", "--k", "0.5", "--limit", "4", "--reps", "1000",
        "--out", unwritable.to_str().unwrap(),
    ]);
    assert_eq!(io.status.code(), Some(3));
}

#[test]
fn writes_json_and_csv_results() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("arl.json");
    let o = cchart(&[
        "arl", "--chart", "cusum", "--k", "0.5", "--limit", "4", "--numeric", "--format", "json",
        "--out", json_path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let arl = v["results"][0]["value"].as_f64().unwrap();
    assert!((arl - 168.0).abs() < 1.0, "{arl}");

    let csv_path = dir.path().join("ced.csv");
    let o = cchart(&[
        "ced", "--chart", "ewma", "--lambda", "0.2", "--limit", "2.8", "--delta", "1", "--tau", "20",
        "--reps", "2000", "--out", csv_path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("label,value,stderr,n\n"), "{text}");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn calibrate_cusum() {
    let o = cchart(&[
        "calibrate", "--chart", "cusum", "--k", "0.5", "--target-arl", "100", "--tolerance", "0.02", "--reps", "2000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let limit: f64 = text
        .lines()
        .find(|l| l.trim_start().starts_with("limit"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("no limit line in\n{text}"));
    assert!((limit - 3.50).abs() < 0.06, "{limit}");
}

#[test]
fn reproduce_is_deterministic() {
    let run = |dir: &std::path::Path| {
        let o = cchart(&["reproduce", "--experiment", "table5", "--reps", "2000", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.join("table5.csv")).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(a.path());
    assert_eq!(first, run(b.path()));
    assert!(a.path().join("table5.json").exists());
}
