use fgl_forge::cli::{run, Outcome};
use serde_json::Value;

fn go(args: &[&str], stdin: &str) -> Outcome {
    let mut full = vec!["fgl-forge"];
    full.extend_from_slice(args);
    run(full, &mut stdin.as_bytes())
}

fn json(args: &[&str], stdin: &str) -> (i32, Value) {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let out = go(&a, stdin);
    assert!(out.stderr.is_empty(), "{}", out.stderr);
    (out.code, serde_json::from_str(&out.stdout).unwrap())
}

fn data(file: &str) -> String {
    format!("{}/data/{file}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn fgl_three_series() {
    let (code, v) = json(&["fgl", "--p", "2", "--n", "1", "--kind", "K", "--T", "8", "--l", "3"], "");
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "fgl-forge/1");
    assert_eq!(v["l_series"][0]["series"], "u + v1*u^2 + v1^2*u^3 + v1^3*u^4 + v1^4*u^5 + v1^5*u^6");
    assert_eq!(v["passed"], true);
}

#[test]
fn cyclic_six() {
    let (code, v) = json(&["cyclic", "--l", "6", "--p", "2", "--n", "1"], "");
    assert_eq!(code, 0);
    assert_eq!(v["bmu"]["rank"], 2);
    assert_eq!(v["bmu"]["u_action"], serde_json::json!([["0", "0"], ["1", "0"]]));
    let text = go(&["cyclic", "--l", "6", "--p", "2", "--n", "1", "--Tw", "2"], "").stdout;
    assert!(text.contains("v1^-1*w") && text.ends_with("PASS\n"), "{text}");
}

#[test]
fn bounds_subcommands() {
    let (code, v) = json(&["bounds", "upowers", "--p", "2", "--h", "1", "--a", "2", "--T", "20"], "");
    assert_eq!((code, &v["holds"]), (0, &Value::Bool(true)));
    let (_, v) = json(&["bounds", "lens", "--p", "2", "--q", "3", "--s", "1", "--heights", "1,2"], "");
    assert_eq!((v["C"].as_str(), v["r"].as_str()), (Some("6"), Some("36")));
    let (_, v) = json(&["bounds", "B", "--p", "2", "--weights", "1,-2", "--heights", "1,2"], "");
    assert_eq!(v["B"], "8");
    let (_, v) = json(&["bounds", "height", "--p", "3", "--m", "5"], "");
    assert_eq!(v["n"], 2);
    let (_, v) = json(&["bounds", "pi", "--p", "2", "--h", "1", "--T", "4"], "");
    assert_eq!(v["series"], "v1 + v2*u^2");
}

#[test]
fn kernel_jobs_and_controls() {
    let doc = r#"{"model": {"p": 2, "heights": [2, 1], "shifts": [0, 4], "trunc": 16,
        "maps": [{"from": 1, "to": 0, "terms": [[3, "1"]]}]}, "weights": [2], "a": 4, "q": 2}"#;
    let (code, v) = json(&["bounds", "kernel"], doc);
    assert_eq!(code, 0);
    assert_eq!(v["results"][0]["window"], 16);
    let bad = go(&["bounds", "kernel", "--corrupt", "13"], doc);
    assert_eq!(bad.code, 1);
    assert!(bad.stdout.ends_with("FAIL\n"));
}

#[test]
fn morse_files_and_negative_control() {
    for f in ["CP1.json", "CP2.json", "CP1xCP1.json"] {
        let (code, v) = json(&["morse", "--m", "0..8", &data(f)], "");
        assert_eq!(code, 0, "{f}");
        assert_eq!(v["morse_equality"]["equality"], true);
    }
    let (code, v) = json(&["morse", "--m", "4", &data("CP1.json")], "");
    assert_eq!(code, 0);
    assert_eq!(v["windows"][0]["leray_lhs"], "1024");
    let out = go(&["morse", "--drop", "0", &data("CP2.json")], "");
    assert_eq!(out.code, 1);
}

#[test]
fn euler_batch_from_stdin() {
    let (code, v) = json(&["euler", "--p", "2", "--n", "1"], "[[2], [1, 3]]");
    assert_eq!(code, 0);
    assert_eq!(v["results"][0]["leading_form"]["k"], 2);
    assert_eq!(v["results"][1]["leading_form"]["k"], 2);
}

#[test]
fn diagnostics_and_exit_codes() {
    let bad = r#"{"schema": "fgl-forge/morse-data/1", "name": "x", "components": [
        {"name": "a", "generator_degrees": [0], "morse_index": "two", "normal_weights": [1], "moment_value": 0}]}"#;
    let out = go(&["morse"], bad);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("components[0].morse_index") && out.stderr.contains("line 2"), "{}", out.stderr);
    let out = go(&["euler", "--weights", "1,0"], "");
    assert_eq!(out.code, 2);
    let out = go(&["cyclic", "--l", "4", "--T", "2"], "");
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("truncation too small"), "{}", out.stderr);
    let out = go(&["nonsense"], "");
    assert_eq!(out.code, 2);
    assert_eq!(go(&["--help"], "").code, 0);
}

#[test]
fn reruns_are_identical() {
    let args = ["morse", "--p", "3", "--m", "2..6", "--format", "json"];
    let cp = data("CP1xCP1.json");
    let mut a: Vec<&str> = args.to_vec();
    a.push(&cp);
    let first = go(&a, "").stdout;
    a.extend(["--jobs", "3"]);
    assert_eq!(first, go(&a, "").stdout);
}
