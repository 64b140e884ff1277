//! Fixture loading shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use domstab::fitting::ModelFit;
use domstab::models::{ModelKind, ModelParams};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub struct Row {
    cells: HashMap<String, String>,
}

impl Row {
    pub fn text(&self, col: &str) -> &str {
        self.cells
            .get(col)
            .unwrap_or_else(|| panic!("no column {col:?}"))
    }

    pub fn num(&self, col: &str) -> f64 {
        let s = self.text(col);
        s.parse().unwrap_or_else(|_| panic!("bad number {s:?} in {col:?}"))
    }

    /// Digits after the decimal point as printed.
    pub fn decimals(&self, col: &str) -> usize {
        self.text(col).split_once('.').map_or(0, |(_, f)| f.len())
    }
}

pub fn read_rows(name: &str) -> (Vec<String>, Vec<Row>) {
    let mut rdr = csv::Reader::from_path(fixture(name)).expect("fixture exists");
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            Row {
                cells: header.iter().cloned().zip(r.iter().map(str::to_string)).collect(),
            }
        })
        .collect();
    (header, rows)
}

/// Source name used in `selection_scenarios.csv`.
pub fn source_kind(source: &str) -> ModelKind {
    match source {
        "logistic" => ModelKind::Logistic,
        "logistic_sine" => ModelKind::LogisticSine,
        "linear" => ModelKind::Linear,
        "lq" => ModelKind::LinearQuadratic,
        "qq" => ModelKind::QuadraticQuadratic,
        other => panic!("unknown source {other}"),
    }
}

fn sample_sizes() -> HashMap<String, usize> {
    read_rows("reported_linear.csv")
        .1
        .iter()
        .map(|r| (r.text("subject").to_string(), r.num("n") as usize))
        .collect()
}

/// Fits rebuilt from a reported-parameter fixture, keyed by subject. The
/// piecewise fixtures carry no point counts; those come from the linear one.
pub fn reported_fits(source: &str) -> Vec<(String, ModelFit<f64>)> {
    let kind = source_kind(source);
    let sizes = sample_sizes();
    read_rows(&format!("reported_{source}.csv"))
        .1
        .iter()
        .map(|row| {
            let subject = row.text("subject").to_string();
            let names = kind.param_names();
            let params: Vec<f64> = names.iter().map(|n| row.num(n)).collect();
            let ses: Vec<f64> = names.iter().map(|n| row.num(&format!("SE_{n}"))).collect();
            let n = sizes[&subject];
            let params = ModelParams::from_slice(kind, &params).unwrap();
            let fit = if kind == ModelKind::Linear {
                let r = row.num("R");
                let mut f = ModelFit::reported(params, ses, r * r, n).unwrap();
                let b = params.to_vec()[1];
                f.pearson_r = Some(r.copysign(b));
                f
            } else {
                ModelFit::reported(params, ses, row.num("R2"), n).unwrap()
            };
            (subject, fit)
        })
        .collect()
}
