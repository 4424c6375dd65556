//! Shipped configs and written outputs against the schemas in `docs/`.

use std::path::{Path, PathBuf};
use std::process::Command;

use jsonschema::JSONSchema;
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> JSONSchema {
    JSONSchema::compile(&read_json(&root().join("docs").join(name))).unwrap()
}

fn assert_valid(schema: &JSONSchema, doc: &Value, what: &str) {
    if let Err(errors) = schema.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{what} does not match its schema: {msgs:?}");
    }
}

fn run(config: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pyramid-planner"))
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn shipped_configs_match_the_config_schema() {
    let schema = schema("config.schema.json");
    let mut seen = 0;
    for entry in std::fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            assert_valid(&schema, &read_json(&path), &path.display().to_string());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn schema_rejects_unknown_fields_like_the_loader() {
    let schema = schema("config.schema.json");
    let doc: Value = serde_json::json!({ "planner": { "v_max": 3.0, "speed": 2.0 } });
    assert!(!schema.is_valid(&doc));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    assert_eq!(run(&path, &dir.path().join("out")), 1);
}

#[test]
fn written_outputs_match_their_schemas() {
    let summary = schema("summary.schema.json");
    let config = schema("config.schema.json");
    for name in ["free-space.json", "hover-droop.json"] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(&root().join("configs").join(name), dir.path()), 0);
        assert_valid(&summary, &read_json(&dir.path().join("summary.json")), name);
        assert_valid(&config, &read_json(&dir.path().join("config.json")), name);
        let header = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(header.lines().next(), Some("t,x,y,z,clearance"));
    }
}
