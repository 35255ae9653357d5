use std::process::{Command, Output};

fn hamline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamline")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sequence_matches_golden_round() {
    let o = hamline(&["sequence", "--n", "3", "--R", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    let golden = include_str!("data/sequence_n3_r2.txt");
    for (k, g) in golden.lines().enumerate() {
        assert!(lines[k].starts_with(g), "line {}: {:?} vs {:?}", k + 1, lines[k], g);
    }
    assert_eq!(lines.last().unwrap(), &"xxxxxx|xqiqig");
}

#[test]
fn sequence_sub_rules() {
    let o = hamline(&["sequence", "--n", "2", "--R", "1", "--sub-rules"]);
    assert_eq!(stdout(&o).lines().next().unwrap(), "giq. 2b");
}

#[test]
fn config_is_logged_to_stderr() {
    let o = hamline(&["--seed", "7", "sequence", "--n", "2", "--R", "1"]);
    let err = String::from_utf8(o.stderr).unwrap();
    let line = err.lines().find(|l| l.starts_with("config: ")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&line["config: ".len()..]).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["run"]["command"], "sequence");
}

#[test]
fn exit_codes() {
    assert_eq!(hamline(&["--help"]).status.code(), Some(0));
    assert_eq!(hamline(&["--version"]).status.code(), Some(0));
    assert_eq!(hamline(&["sequence", "--n", "x", "--R", "1"]).status.code(), Some(1));
    assert_eq!(hamline(&["spectrum", "--n", "2", "--R", "1", "--method", "qr"]).status.code(), Some(1));
    assert_eq!(hamline(&["sequence", "--n", "1", "--R", "2"]).status.code(), Some(2));
    assert_eq!(hamline(&["sequence", "--n", "2", "--R", "0"]).status.code(), Some(2));
    assert_eq!(hamline(&["compile", "--circuit", "/nonexistent/c.json"]).status.code(), Some(1));
    assert_eq!(hamline(&["verify", "--suite", "pairs", "--inject-fault", "pen"]).status.code(), Some(3));
    assert_eq!(hamline(&["verify", "--suite", "facts", "--inject-fault", "rule"]).status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_hamline"))
        .env("HAMLINE_THREADS", "zero")
        .args(["sequence", "--n", "2", "--R", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_circuit_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, "{\"n\": 2, \"m\": 1, \"rounds\": [[{\"kind\": \"nope\"}]]}").unwrap();
    assert_eq!(hamline(&["compile", "--circuit", path.to_str().unwrap()]).status.code(), Some(1));
    // three gates on two qubits parse but do not fit a round
    std::fs::write(&path, "{\"n\": 2, \"m\": 1, \"rounds\": [[{\"kind\": \"I\"}, {\"kind\": \"I\"}]]}").unwrap();
    assert_ne!(hamline(&["compile", "--circuit", path.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn compile_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = dir.path().join("c.json");
    std::fs::write(&circuit, "{\"n\": 2, \"m\": 1, \"gates\": [{\"kind\": \"CNOT\", \"qubits\": [1, 2]}]}").unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for out in [&a, &b] {
        let o = hamline(&["compile", "--circuit", circuit.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("pen families: "));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
}

#[test]
fn spectrum_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("h.txt");
    assert!(hamline(&["compile", "--n", "2", "--R", "1", "--out", a.to_str().unwrap()]).status.success());
    let lowest = |method: &str| -> f64 {
        let o = hamline(&["spectrum", "--ham", a.to_str().unwrap(), "--method", method, "--eigs", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let s = stdout(&o);
        let line = s.lines().find(|l| l.starts_with("0 ")).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    let dense = lowest("dense");
    let lanczos = lowest("lanczos");
    assert!((dense - lanczos).abs() < 1e-6 * dense.abs().max(1.0), "{dense} vs {lanczos}");
}

#[test]
fn subspace_spectrum_on_legal_set() {
    let o = hamline(&["spectrum", "--n", "2", "--R", "1", "--method", "subspace", "--set", "legal", "--eigs", "1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.starts_with("# 4 configurations, dimension 16"), "{s}");
}

#[test]
fn verify_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for out in [&a, &b] {
        let o = hamline(&["verify", "--suite", "facts", "--n", "2", "--R", "2", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("passed").is_some() || v["status"] == "pass");
    }
}
