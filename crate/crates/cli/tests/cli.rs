use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(name: &str) -> Command {
    Command::new(match name {
        "tinybuf" => env!("CARGO_BIN_EXE_tinybuf"),
        "sim" => env!("CARGO_BIN_EXE_sim"),
        _ => env!("CARGO_BIN_EXE_fs"),
    })
}

fn ok(out: Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn repo(path: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(path).display().to_string()
}

#[test]
fn compile_writes_each_target() {
    let dir = tempfile::tempdir().unwrap();
    for (target, file) in [("rust", "protocol.rs"), ("python", "protocol.py"), ("descriptor", "protocol.json")] {
        ok(bin("tinybuf")
            .args(["compile", &repo("crates/core/protocol.tb"), "--target", target, "--out"])
            .arg(dir.path())
            .output()
            .unwrap());
        assert!(fs::metadata(dir.path().join(file)).unwrap().len() > 1000, "{file}");
    }
    let descriptor = fs::read_to_string(dir.path().join("protocol.json")).unwrap();
    let schema = tinybuf::parse_descriptor(&descriptor).unwrap();
    assert!(schema.message("Request").is_some());
}

#[test]
fn compile_reports_position_of_errors() {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("bad.tb");
    fs::write(&schema, "message A {\n  required uint16 x\n}\n").unwrap();
    let out = bin("tinybuf").arg("compile").arg(&schema).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.tb:3:1:"), "{stderr}");
}

#[test]
fn campaign_image_can_be_inspected() {
    let dir = tempfile::tempdir().unwrap();
    let report = ok(bin("sim").args(["faults", "--cuts", "25", "--dump-mem"]).arg(dir.path()).output().unwrap());
    assert!(report.starts_with("25 cuts"), "{report}");
    let image = dir.path().join("campaign.bin");
    let table = ok(bin("fs").arg("inspect").arg(&image).args(["--layout", "compact"]).output().unwrap());
    assert_eq!(table.lines().count(), 6, "{table}");
    let chain = ok(bin("fs").arg("inspect").arg(&image).args(["--layout", "compact", "--partition", "1"]).output().unwrap());
    assert!(chain.starts_with("partition 1 (mic)"), "{chain}");
}

#[test]
fn scenario_run_writes_metrics_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    fs::write(
        &scenario,
        r#"{"seed": 3, "duration_s": 30,
            "badges": [{"id": 9, "group": 1, "sources": [{"source": "scan", "period_s": 10}]}],
            "hub": {"data_requests": [{"at_s": 25, "badge": 0, "source": "scan"}]}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let mem = dir.path().join("mem");
    let text = ok(bin("sim")
        .arg("run")
        .arg(&scenario)
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--dump-mem")
        .arg(&mem)
        .args(["--seed", "4"])
        .output()
        .unwrap());
    assert!(text.contains("badge 9"), "{text}");
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 4"), "{summary}");
    let table = ok(bin("fs").arg("inspect").arg(mem.join("badge-9.bin")).output().unwrap());
    assert!(table.lines().any(|l| l.contains("scan")), "{table}");
}

#[test]
fn throughput_command_reports_rate() {
    let text = ok(bin("sim").args(["throughput", "--mode", "timer", "--period-ms", "20"]).output().unwrap());
    assert!(text.starts_with("timer: 50 chunks"), "{text}");
}
