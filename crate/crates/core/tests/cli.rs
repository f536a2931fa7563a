use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_markov-thermo"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("MARKOV_THERMO_THREADS", "2").output().unwrap()
}

#[test]
fn count_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("two_lengths.toml");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let r = run(&["count", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("# provenance {"));
    assert!(text.contains("t,M,R,predicted,ratio_M,ratio_R,nodes"));
}

#[test]
fn delta_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[shift]\nkind = \"full\"\nletters = 3\n[potential]\nkind = \"constant\"\nvalue = 2.0\n").unwrap();
    let r = run(&["delta", cfg.to_str().unwrap(), "--format", "json"]);
    assert!(r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let delta = v["rows"][0][0].as_f64().unwrap();
    assert!((delta - 3f64.ln() / 2.0).abs() < 1e-10);
    assert_eq!(v["provenance"]["threads"], 2);
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[shift]\nkind = \"matrix\"\nmatrix = [[1, 1], [1]]\n[potential]\nkind = \"constant\"\nvalue = 1.0\n")
        .unwrap();
    let r = run(&["delta", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("shift.matrix"));

    std::fs::write(&cfg, "[shift\n").unwrap();
    assert_eq!(run(&["delta", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}
