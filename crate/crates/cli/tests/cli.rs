use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn hexflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hexflow"))
        .args(args)
        .env("HEXFLOW_FIXTURES", fixtures())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hexflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn validate_exit_codes() {
    let ok = hexflow(&["validate", "wulff_hexagon.json"]);
    assert_eq!(ok.status.code(), Some(0));

    let warn = hexflow(&["validate", "adjacent_triod"]);
    assert_eq!(warn.status.code(), Some(0));
    assert!(stdout(&warn).contains("no CH field at junction"));

    let bad = tmp("malformed.json");
    std::fs::write(&bad, "{\"vertices\": [").unwrap();
    assert_eq!(hexflow(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(hexflow(&["validate", "no_such_thing"]).status.code(), Some(2));
}

#[test]
fn invalid_network_is_a_domain_failure() {
    let path = tmp("open_chain.json");
    std::fs::write(
        &path,
        r#"{"vertices":[{"id":"a","pos":[0,0]},{"id":"b","pos":[1,0]}],
            "edges":[{"id":"s","kind":"segment","from":"a","to":"b","curve":"s"}]}"#,
    )
    .unwrap();
    let out = hexflow(&["validate", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["valid"], false);
}

#[test]
fn chfield_json_curvatures() {
    let out = hexflow(&["chfield", "split_prone_quadruple", "--eps", "0.1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let kappa = |id: &str| {
        v["edges"].as_array().unwrap().iter().find(|e| e["id"] == id).unwrap()["kappa"].as_f64().unwrap()
    };
    let eps = 0.1;
    let s3 = 3f64.sqrt();
    assert!((kappa("arm_e") - 2.0 / (s3 * (7.0 - 3.0 * eps))).abs() < 1e-10);
    assert!((kappa("arm_ne") - 2.0 / (s3 * (3.0 - eps))).abs() < 1e-10);
    assert_eq!(v["evolvable"], false);

    let tri = json(&hexflow(&["chfield", "triod120", "--format", "json"]));
    assert_eq!(tri["critical"], true);
    assert!(tri["edges"].as_array().unwrap().iter().all(|e| e["bc_flag"] == true));

    assert_eq!(hexflow(&["chfield", "adjacent_triod"]).status.code(), Some(1));
}

#[test]
fn evolve_hexagon_vanishes_at_three_eighths() {
    let out = hexflow(&["evolve", "wulff_hexagon", "--horizon", "1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["termination"], "vanished");
    assert!((v["t_end"].as_f64().unwrap() - 0.375).abs() < 1e-6);
}

#[test]
fn evolve_equal_arms_collapses_to_critical_cone() {
    let out = hexflow(&["evolve", "hexagon_four_halflines_equal", "--horizon", "2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let kinds: Vec<&str> = v["events"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["collapse", "terminate"]);
    assert_eq!(v["termination"], "critical");
}

#[test]
fn evolve_critical_fixture_is_flat() {
    let csv = tmp("triod.csv");
    let out = hexflow(&["evolve", "triod120", "--horizon", "1", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    for line in text.lines().skip(1) {
        let kappa: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(kappa, 0.0);
    }
}

#[test]
fn evolve_not_evolvable_exits_one() {
    assert_eq!(hexflow(&["evolve", "split_prone_quadruple"]).status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic() {
    let args = ["evolve", "hexagon_two_halflines", "--horizon", "1", "--format", "json", "--seed", "7"];
    let a = hexflow(&args);
    let b = hexflow(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let c1 = tmp("det1.csv");
    let c2 = tmp("det2.csv");
    hexflow(&["evolve", "wulff_hexagon", "--csv", c1.to_str().unwrap()]);
    hexflow(&["evolve", "wulff_hexagon", "--csv", c2.to_str().unwrap()]);
    assert_eq!(std::fs::read(c1).unwrap(), std::fs::read(c2).unwrap());
}

#[test]
fn parallel_runs_match_sequential() {
    let inputs = ["wulff_hexagon", "triod120", "hexagon_four_halflines"];
    let mut seq = vec!["evolve", "--format", "json"];
    seq.extend(inputs);
    let mut par = seq.clone();
    par.extend(["--jobs", "3"]);
    assert_eq!(hexflow(&seq).stdout, hexflow(&par).stdout);
}

#[test]
fn svg_frames_written_per_sample() {
    let dir = tmp("frames");
    let _ = std::fs::remove_dir_all(&dir);
    let out = hexflow(&[
        "--config",
        write_config("frames.json", r#"{"sample_interval": 0.05}"#).to_str().unwrap(),
        "evolve",
        "wulff_hexagon",
        "--svg-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let frames = std::fs::read_dir(&dir).unwrap().count();
    assert!(frames >= 8, "{frames} frames");
    let first = std::fs::read_to_string(dir.join("frame_00000.svg")).unwrap();
    assert!(first.starts_with("<svg") && first.matches("<line").count() == 6);
}

fn write_config(name: &str, body: &str) -> PathBuf {
    let p = tmp(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn bad_config_is_input_error() {
    let p = write_config("bad.json", r#"{"eta": -1}"#);
    assert_eq!(hexflow(&["--config", p.to_str().unwrap(), "list"]).status.code(), Some(2));
    let p = write_config("unknown.json", r#"{"step": 1}"#);
    assert_eq!(hexflow(&["--config", p.to_str().unwrap(), "list"]).status.code(), Some(2));
}

#[test]
fn unknown_param_is_input_error() {
    assert_eq!(hexflow(&["validate", "wulff_hexagon", "--param", "zz=1"]).status.code(), Some(2));
    assert_eq!(hexflow(&["validate", "wulff_hexagon", "--param", "r=abc"]).status.code(), Some(2));
}

#[test]
fn shrink_classify_counts_eight() {
    let out = hexflow(&["shrink", "--classify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("shrinkers: 8"));
    let v = json(&hexflow(&["shrink", "--classify", "--format", "json"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.iter().filter(|r| r["center"] == "interior").count(), 12);
    assert_eq!(rows.iter().filter(|r| r["status"] == "yes").count(), 8);
}

#[test]
fn shrink_verify() {
    let out = hexflow(&["shrink", "--verify", "A1,A2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("2.94771"));

    let none = hexflow(&["shrink", "--verify", "A1,A4"]);
    assert_eq!(none.status.code(), Some(1));
    assert!(stdout(&none).contains("NOT a shrinker"));

    assert_eq!(hexflow(&["shrink", "--verify", "A9"]).status.code(), Some(2));
    assert_eq!(hexflow(&["shrink", "--verify", "extensions"]).status.code(), Some(0));
}

#[test]
fn fixture_dir_override() {
    let dir = tmp("fx");
    let _ = std::fs::remove_dir_all(&dir);
    let out = hexflow(&["fixtures", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    std::fs::copy(dir.join("triod120.json"), dir.join("renamed.json")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hexflow"))
        .args(["validate", "renamed"])
        .env("HEXFLOW_FIXTURES", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn render_writes_svg() {
    let out = hexflow(&["render", "cone_six"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).matches("<line").count(), 6);
}
