use std::fs;
use std::process::{Command, Output};

fn pdqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdqp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const BELL: &str = "qubits 2\nstep\n  h 0\n  cnot 0 1\n  measure 0\nstep\nstep\n";

#[test]
fn run_is_deterministic_and_records_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = dir.path().join("bell.circ");
    fs::write(&circuit, BELL).unwrap();
    let c = circuit.to_str().unwrap();
    let a = pdqp(&["run", "--circuit", c, "--samples", "50", "--seed", "9"]);
    let b = pdqp(&["run", "--circuit", c, "--samples", "50", "--seed", "9"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("trial,v0,v1,v2,v3,m1,m2,m3\n"), "{text}");
    assert!(text.contains("# seed: 9"));
    assert!(text.contains("# config.samples: 50"));
    // Measuring one half of a Bell pair fixes the later samples.
    for line in text.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], "0", "{line}");
        assert!(f[2] == f[3] && f[3] == f[4], "{line}");
        assert!(f[2] == "0" || f[2] == "3", "{line}");
    }
    let other = pdqp(&["run", "--circuit", c, "--samples", "50", "--seed", "10"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("search.cfg");
    fs::write(&cfg, "# small run\nn_min = 6\nn-max = 7\ntrials = 20\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = pdqp(&["search", cfg, "--trials", "30", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# config.trials: 30"));
    assert!(text.contains("# config.n-max: 7"));
    let rows = text.lines().filter(|l| l.starts_with("pdqp,")).count();
    assert_eq!(rows, 2);
}

#[test]
fn malformed_config_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n-min = 6\n\nthis line has no separator\n").unwrap();
    let o = pdqp(&["search", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"));
}

#[test]
fn malformed_circuit_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = dir.path().join("bad.circ");
    fs::write(&circuit, "qubits 2\nstep\n  h 0\n  cnot 0 7\n").unwrap();
    let o = pdqp(&["run", "--circuit", circuit.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pdqp(&["search", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(pdqp(&["phenomena", "--demo", "teleport"]).status.code(), Some(2));
    assert_eq!(pdqp(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(pdqp(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn quick_verify_passes_and_json_ends_with_meta() {
    let o = pdqp(&[
        "verify",
        "--suite",
        "markov,hv-validity",
        "--quick",
        "true",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["meta"]["command"], "verify");
    for line in text.lines().filter(|l| !l.starts_with("{\"meta\"")) {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["holds"], true, "{line}");
    }
}

#[test]
fn sd_generates_and_decides_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = pdqp(&[
        "sd",
        "--dir",
        d,
        "--generate",
        "12",
        "--n",
        "4",
        "--m",
        "4",
        "--trials",
        "20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 12);
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("sd-")).count(), 12);
    assert!(text.contains("# summary.accuracy: "));
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ftl.csv");
    let o = pdqp(&[
        "phenomena",
        "--demo",
        "ftl",
        "--trials",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(&out).unwrap().contains("# command: phenomena"));
}
