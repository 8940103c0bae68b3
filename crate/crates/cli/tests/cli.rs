use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sac_cli::fixtures::{hotstuff_fixtures, Expected};
use sac_cli::{bundled, cmd_forensics, forensics, ProtocolArg};
use sac_core::forensics::Condition;
use sac_core::NodeId;
use serde_json::Value;

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn sac(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sac")).args(args).output().expect("spawn sac")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_assets_match_builders() {
    for sc in bundled::all() {
        let disk = json(&root().join(format!("scenarios/{}.json", sc.name)));
        assert_eq!(disk, serde_json::to_value(&sc).unwrap(), "{}: rerun gen_assets", sc.name);
    }
    for f in hotstuff_fixtures() {
        let dir = root().join("fixtures/hotstuff");
        assert_eq!(json(&dir.join(format!("{}.json", f.name))), serde_json::to_value(&f.transcript).unwrap(), "{}", f.name);
        let expected: Expected = serde_json::from_value(json(&dir.join(format!("{}.expected.json", f.name)))).unwrap();
        assert_eq!(expected, f.expected, "{}", f.name);
        let report = forensics(&f.transcript, ProtocolArg::Hotstuff).unwrap();
        assert!(report.verified.iter().all(|v| *v), "{}", f.name);
    }
}

#[test]
fn bad_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let missing = sac(&["run", "--scenario", "/nonexistent.json", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(err["error"], "io");

    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{\"n\": ").unwrap();
    let r = sac(&["spv-fuzz", "--scenario", garbled.to_str().unwrap(), "--out", out]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(serde_json::from_slice::<Value>(&r.stderr).unwrap()["error"], "parse");

    let mut sc = bundled::attack_equivocate();
    sc.n = 0;
    let invalid = dir.path().join("invalid.json");
    fs::write(&invalid, serde_json::to_string(&sc).unwrap()).unwrap();
    let r = sac(&["run", "--scenario", invalid.to_str().unwrap(), "--out", out]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(serde_json::from_slice::<Value>(&r.stderr).unwrap()["error"], "scenario");

    let r = sac(&["forensics", "--transcript", garbled.to_str().unwrap(), "--out", out]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn run_then_forensics_on_equivocation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let scenario = root().join("scenarios/attack_equivocate.json");
    let r = sac(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["trace.csv", "plot.csv", "transcript.json", "report.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let report = json(&out.join("report.json"));
    assert_eq!(report["scenario"], "attack_equivocate");

    let fpath = out.join("forensics.json");
    let (f, _) = cmd_forensics(&out.join("transcript.json"), ProtocolArg::Streamlet, &fpath).unwrap();
    let accused: Vec<NodeId> = f.accused.iter().copied().collect();
    assert_eq!(accused, [NodeId(3), NodeId(4), NodeId(5)]);
    assert!(f.verified.iter().all(|v| *v));
    assert!(f.evidence.iter().all(|e| matches!(e.condition, Condition::Streamlet1 | Condition::Streamlet2)));
    assert_eq!(json(&fpath)["accused"], serde_json::json!([3, 4, 5]));
}

#[test]
fn hotstuff_fixture_via_binary() {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = root().join("fixtures/hotstuff/both_conditions.json");
    let out = dir.path().join("f.json");
    let r = sac(&["forensics", "--transcript", path.to_str().unwrap(), "--protocol", "hotstuff", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report = json(&out);
    let expected: Expected = serde_json::from_value(json(&path.with_extension("expected.json"))).unwrap();
    let accused: std::collections::BTreeSet<u32> = expected.evidence.iter().map(|(n, _)| n.0).collect();
    assert_eq!(report["accused"], serde_json::to_value(&accused).unwrap());
}

#[test]
fn partition_closes_the_light_client_gate() {
    let dir = tempfile::tempdir().unwrap();
    let sc = sac_cli::load_scenario(&root().join("scenarios/p1_partition.json")).unwrap();
    let (o, status) = sac_cli::cmd_spv_fuzz(&sc, 300, 1, &dir.path().join("spv.json")).unwrap();
    assert_eq!(status, sac_cli::Status::Pass);
    assert!(o.report.gate_fired > 0, "{:?}", o.report);
    assert!(o.summary.unavailable > 0);
    assert_eq!(o.summary.false_accepts, 0);
}
