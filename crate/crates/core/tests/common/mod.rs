//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use acqsens::glmm::{grouping, DesignMatrices};
use serde::Deserialize;

/// Reference values for one GLMM fixture, computed offline by
/// `fixtures/generate_fixtures.py` (dense NumPy/SciPy Laplace fit).
#[derive(Deserialize)]
pub struct Expected {
    pub data: String,
    pub coefficients: BTreeMap<String, f64>,
    pub p_values: BTreeMap<String, f64>,
    pub variance_components: BTreeMap<String, f64>,
    pub loglik: f64,
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn load_fixture(name: &str) -> (DesignMatrices, Expected) {
    let dir = fixture_dir();
    let expected: Expected =
        serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(dir.join(&expected.data)).unwrap();
    let headers = reader.headers().unwrap().clone();
    let covariates: Vec<String> = headers.iter().skip(3).map(String::from).collect();
    let (mut cases, mut methods, mut y, mut rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.unwrap();
        cases.push(rec[0].to_string());
        methods.push(rec[1].to_string());
        y.push(rec[2].parse::<f64>().unwrap());
        let mut row = vec![1.0];
        row.extend(rec.iter().skip(3).map(|v| v.parse::<f64>().unwrap()));
        rows.push(row);
    }
    let case_keys: Vec<&str> = cases.iter().map(String::as_str).collect();
    let method_keys: Vec<&str> = methods.iter().map(String::as_str).collect();
    let mut columns = vec!["(Intercept)".to_string()];
    columns.extend(covariates);
    let design = DesignMatrices::from_parts(
        columns,
        &rows,
        y,
        vec![grouping("case", &case_keys), grouping("method", &method_keys)],
    )
    .unwrap();
    (design, expected)
}

pub const FIXTURES: [&str; 3] = ["crossed_quality", "crossed_distance", "crossed_two_covariates"];
