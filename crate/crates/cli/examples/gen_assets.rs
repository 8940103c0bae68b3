//! Regenerates `scenarios/` and `fixtures/hotstuff/` from the builders.

use std::fs;
use std::path::Path;

use sac_cli::{bundled, fixtures};

fn put<T: serde::Serialize>(path: &Path, v: &T) {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    fs::write(path, s).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let scenarios = root.join("scenarios");
    let hotstuff = root.join("fixtures/hotstuff");
    fs::create_dir_all(&scenarios).expect("mkdir");
    fs::create_dir_all(&hotstuff).expect("mkdir");
    for sc in bundled::all() {
        put(&scenarios.join(format!("{}.json", sc.name)), &sc);
    }
    for f in fixtures::hotstuff_fixtures() {
        put(&hotstuff.join(format!("{}.json", f.name)), &f.transcript);
        put(&hotstuff.join(format!("{}.expected.json", f.name)), &f.expected);
    }
}
