//! File formats: CSV datasets, JSON schemas, constraint text, model
//! checkpoints, configs and reports.
//!
//! A dataset CSV has a header with every schema feature name plus a
//! `label` column, in any order. Schema files hold
//! `{"features": [...], "critical_class": 1}`; a bare feature array is also
//! accepted and takes critical class 1.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tabrobust_core::bench::{EvaluationReport, SweepPoint};
use tabrobust_core::dsl::{format_constraint_named, parse_constraint_file, ParseError};
use tabrobust_core::model::{Checkpoint, ModelError, ReferenceModel};
use tabrobust_core::schema::{DataError, SchemaError};
use tabrobust_core::{ConstraintSet, Dataset, DatasetSchema, FeatureMetadata, Matrix};
use thiserror::Error;

pub const LABEL_COLUMN: &str = "label";

/// Column order of report CSV files.
pub const REPORT_CSV_HEADER: [&str; 20] = [
    "model",
    "defense",
    "seed",
    "budget_axis",
    "budget_value",
    "norm",
    "eps",
    "n_iter_gradient",
    "n_gen",
    "clean_accuracy",
    "clean_auc",
    "clean_mcc",
    "clean_precision",
    "clean_recall",
    "attack_set_size",
    "robust_accuracy_constrained",
    "robust_accuracy_unconstrained",
    "valid_successes",
    "distance_space",
    "wall_time_s",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("{}: row {row}, column `{column}`: cannot parse {value:?}", path.display())]
    Parse { path: PathBuf, row: usize, column: String, value: String },
    #[error("{}: {source}", path.display())]
    Data { path: PathBuf, source: DataError },
    #[error("{}: {source}", path.display())]
    Schema { path: PathBuf, source: SchemaError },
    #[error("{}: {source}", path.display())]
    Constraint { path: PathBuf, source: ParseError },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: ModelError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Writes through a temporary sibling so readers never see partial files.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SchemaFile {
    Full(DatasetSchema),
    Features(Vec<FeatureMetadata>),
}

pub fn read_schema(path: &Path) -> Result<DatasetSchema, IoError> {
    let schema = match read_json::<SchemaFile>(path)? {
        SchemaFile::Full(s) => s,
        SchemaFile::Features(features) => DatasetSchema { features, critical_class: 1 },
    };
    schema.validate().map_err(|source| IoError::Schema { path: path.to_path_buf(), source })?;
    Ok(schema)
}

pub fn write_schema(path: &Path, schema: &DatasetSchema) -> Result<(), IoError> {
    write_json(path, schema)
}

/// Reads a dataset CSV and validates it against `schema`.
pub fn read_dataset(path: &Path, schema: &DatasetSchema) -> Result<Dataset, IoError> {
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
    };
    let columns = schema.features.iter().map(|f| find(&f.name)).collect::<Result<Vec<_>, _>>()?;
    let label_col = find(LABEL_COLUMN)?;

    let mut x = Matrix::zeros(0, columns.len());
    let mut y = Vec::new();
    let mut row = Vec::with_capacity(columns.len());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let field = |col: usize, name: &str| {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| IoError::Parse {
                path: path.to_path_buf(),
                row: i,
                column: name.to_string(),
                value: raw.to_string(),
            })
        };
        row.clear();
        for (f, &col) in schema.features.iter().zip(&columns) {
            row.push(field(col, &f.name)?);
        }
        x.push_row(&row);
        let label = field(label_col, LABEL_COLUMN)?;
        if label != 0.0 && label != 1.0 {
            return Err(IoError::Data {
                path: path.to_path_buf(),
                source: DataError::NonBinaryLabel { row: i, label: if (0.0..=255.0).contains(&label) { label as u8 } else { u8::MAX } },
            });
        }
        y.push(label as u8);
    }
    let data = Dataset { x, y };
    data.validate(schema).map_err(|source| IoError::Data { path: path.to_path_buf(), source })?;
    Ok(data)
}

/// Writes `data` with a header of schema feature names and `label`. Values
/// are written in shortest round-trip form.
pub fn write_dataset(path: &Path, data: &Dataset, schema: &DatasetSchema) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header).map_err(csv_err)?;
    for (row, &label) in data.x.iter_rows().zip(&data.y) {
        let mut fields: Vec<String> = row.iter().map(f64::to_string).collect();
        fields.push(label.to_string());
        w.write_record(&fields).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(path)(e.into_error()))?;
    write_bytes(path, &bytes)
}

pub fn read_constraints(path: &Path, schema: &DatasetSchema) -> Result<ConstraintSet, IoError> {
    let text = read_text(path)?;
    parse_constraint_file(&text, schema).map_err(|source| IoError::Constraint { path: path.to_path_buf(), source })
}

/// One constraint per line, using the original text when available.
pub fn write_constraints(path: &Path, cs: &ConstraintSet, schema: &DatasetSchema) -> Result<(), IoError> {
    let mut out = String::new();
    for (c, src) in cs.constraints.iter().zip(&cs.source_text) {
        match src {
            Some(text) => out.push_str(text.trim()),
            None => out.push_str(&format_constraint_named(c, schema)),
        }
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

pub fn read_model(path: &Path) -> Result<ReferenceModel, IoError> {
    let checkpoint: Checkpoint = read_json(path)?;
    ReferenceModel::from_checkpoint(checkpoint).map_err(|source| IoError::Model { path: path.to_path_buf(), source })
}

pub fn write_model(path: &Path, model: &ReferenceModel) -> Result<(), IoError> {
    write_json(path, &model.to_checkpoint())
}

pub fn read_report(path: &Path) -> Result<EvaluationReport, IoError> {
    read_json(path)
}

pub fn write_report_json(path: &Path, report: &EvaluationReport) -> Result<(), IoError> {
    write_json(path, report)
}

fn report_rows(report: &EvaluationReport) -> Vec<Vec<String>> {
    let a = &report.attack;
    let row = |axis: &str, value: f64, eps: f64, n_iter: usize, n_gen: usize, rc: f64, ru: f64, vs: usize, t: f64| {
        vec![
            report.model.clone(),
            report.defense.clone(),
            report.seed.to_string(),
            axis.to_string(),
            value.to_string(),
            a.budget.norm.name().to_string(),
            eps.to_string(),
            n_iter.to_string(),
            n_gen.to_string(),
            report.clean.accuracy.to_string(),
            report.clean.auc.to_string(),
            report.clean.mcc.to_string(),
            report.clean.precision.to_string(),
            report.clean.recall.to_string(),
            report.attack_set_size.to_string(),
            rc.to_string(),
            ru.to_string(),
            vs.to_string(),
            report.distance_space.clone(),
            t.to_string(),
        ]
    };
    if report.budgets.is_empty() {
        return vec![row(
            "eps",
            a.budget.eps,
            a.budget.eps,
            a.budget.n_iter_gradient,
            a.budget.n_gen,
            report.robust_accuracy_constrained,
            report.robust_accuracy_unconstrained,
            report.valid_successes,
            report.wall_time_s,
        )];
    }
    report
        .budgets
        .iter()
        .map(|p: &SweepPoint| {
            let spec = tabrobust_core::bench::SweepSpec { axis: p.axis, values: vec![p.value] };
            let cfg = spec.apply(a, p.value);
            row(
                p.axis.name(),
                p.value,
                cfg.budget.eps,
                cfg.budget.n_iter_gradient,
                cfg.budget.n_gen,
                p.robust_accuracy_constrained,
                p.robust_accuracy_unconstrained,
                p.valid_successes,
                p.wall_time_s,
            )
        })
        .collect()
}

/// One CSV row per (model, defense, budget), under [`REPORT_CSV_HEADER`].
pub fn render_report_csv(reports: &[EvaluationReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut put = |row: &[String]| w.write_record(row).expect("writing to memory");
    put(&REPORT_CSV_HEADER.map(String::from));
    for r in reports {
        for row in report_rows(r) {
            put(&row);
        }
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("fields are UTF-8")
}

pub fn write_report_csv(path: &Path, reports: &[EvaluationReport]) -> Result<(), IoError> {
    write_bytes(path, render_report_csv(reports).as_bytes())
}

/// Writes JSON for a single report unless `path` ends in `.csv`.
pub fn write_report(path: &Path, report: &EvaluationReport) -> Result<(), IoError> {
    if is_csv(path) {
        write_report_csv(path, std::slice::from_ref(report))
    } else {
        write_report_json(path, report)
    }
}

pub fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
