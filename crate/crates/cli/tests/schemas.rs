use std::path::{Path, PathBuf};
use std::process::Command;

use jsonschema::{Retrieve, Uri, Validator};
use serde_json::Value;

use unicorr::bump::{build_bump, BumpOptions, BumpParams};
use unicorr::measure::{build_product_partition, BaseSpace, CylinderSpace, ProductCell};
use unicorr::systems::Trigonometric;

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

/// Resolves `$ref`s to sibling schema files by their last path segment.
struct LocalSchemas;

impl Retrieve for LocalSchemas {
    fn retrieve(&self, uri: &Uri<String>) -> Result<Value, Box<dyn std::error::Error + Send + Sync>> {
        let name = uri.path().as_str().rsplit('/').next().unwrap_or_default().to_string();
        let text = std::fs::read_to_string(schema_dir().join(&name))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn validator(name: &str) -> Validator {
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_dir().join(name)).unwrap()).unwrap();
    jsonschema::options()
        .with_base_uri(format!("file:///schemas/{name}"))
        .with_retriever(LocalSchemas)
        .build(&schema)
        .unwrap()
}

fn assert_valid(v: &Validator, instance: &Value) {
    let errors: Vec<String> = v.iter_errors(instance).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn grid_descriptors_match_the_schema() {
    let v = validator("grid.schema.json");
    let space = CylinderSpace::uniform(32, BaseSpace::uniform(3).unwrap()).unwrap();
    let p = build_product_partition(&space, &[0.0, 0.5, 1.0], &[vec![0, 1], vec![2]]).unwrap();
    assert_valid(&v, &serde_json::to_value(space.descriptor()).unwrap());
    assert_valid(&v, &serde_json::to_value(space.descriptor().with_partition(&p)).unwrap());

    let custom = CylinderSpace::new(vec![0.25, 0.75], vec![0.5, 0.5], BaseSpace::trivial()).unwrap();
    assert_valid(&v, &serde_json::to_value(custom.descriptor()).unwrap());

    let both = serde_json::json!({ "t_resolution": 4, "t_nodes": [0.5], "t_weights": [1.0], "base_cells": [{ "id": 0, "weight": 1.0 }] });
    assert!(!v.is_valid(&both));
}

#[test]
fn bump_report_matches_the_schema() {
    let space = CylinderSpace::interval(1 << 10).unwrap();
    let sys = Trigonometric::new(&space, 511).unwrap();
    let params = BumpParams {
        cell: ProductCell::new(0.25, 0.5, vec![0]),
        gamma: -0.8,
        eps: 0.5,
        delta: 0.5,
        n_start: 2,
    };
    let r = build_bump(&params, &sys, BumpOptions::new(511)).unwrap();
    let report = serde_json::to_value(r.report()).unwrap();
    assert_valid(&validator("bump.schema.json"), &report);
    assert_valid(&validator("mask.schema.json"), &report["mask"]);
}

#[test]
fn cli_outputs_match_the_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/walsh-small.json");
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_unicorr"))
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
            .status
    };
    assert!(run(&["run", "--config", cfg.to_str().unwrap()]).success());
    assert!(run(&["verify-systems"]).success());
    let read = |f: &str| -> Value { serde_json::from_str(&std::fs::read_to_string(dir.path().join(f)).unwrap()).unwrap() };

    let report = read("report.json");
    assert_valid(&validator("grid.schema.json"), &report["grid"]);
    assert_valid(&validator("certificate.schema.json"), &report["certificate"]);
    assert_valid(&validator("mask.schema.json"), &read("emask.rle.json"));

    let sys = validator("system.schema.json");
    assert_valid(&sys, &report["system"]);
    let checks = read("systems.json");
    let kinds: Vec<&str> = checks.as_array().unwrap().iter().map(|c| c["system"]["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["trig", "walsh", "sphere"]);
    for c in checks.as_array().unwrap() {
        assert_valid(&sys, &c["system"]);
    }
}
