//! Prediction tables and parameter-space definitions.
//!
//! A [`PredictionTable`] holds one record per `(case_id, method)` pair with the
//! acquisition parameters of the scan the prediction was made on. The failure
//! indicator `f` (1 for an incorrect hard prediction) is derived once at load
//! time from the score and a decision threshold.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Columns that precede the per-axis parameter columns in the CSV schema.
pub const FIXED_COLUMNS: [&str; 5] = ["case_id", "method", "fold", "label", "score"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("MissingColumn: {0}")]
    MissingColumn(String),
    #[error("NonFiniteValue: row {row}, column {column}")]
    NonFiniteValue { row: usize, column: String },
    #[error("DuplicateKey: case {case_id:?}, method {method:?}")]
    DuplicateKey { case_id: String, method: String },
    #[error("EmptyTable")]
    EmptyTable,
    #[error("OutOfRange: row {row}, axis {axis} value {value} outside [{min}, {max}]")]
    OutOfRange {
        row: usize,
        axis: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("InvalidValue: row {row}, column {column}: {message}")]
    InvalidValue {
        row: usize,
        column: String,
        message: String,
    },
    #[error("InvalidSpace: {0}")]
    InvalidSpace(String),
    #[error("DimensionMismatch: expected {expected} parameters, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Which way scan quality improves along an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Larger values are better (e.g. tube current): a threshold imposes `P >= Th`.
    QualityIncreasing,
    /// Smaller values are better (e.g. slice thickness): a threshold imposes `P <= Th`.
    QualityDecreasing,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::QualityIncreasing => Direction::QualityDecreasing,
            Direction::QualityDecreasing => Direction::QualityIncreasing,
        }
    }
}

fn default_bins() -> usize {
    10
}

/// Axis names that default to a scale of 100 (mA to tenths of an ampere).
const HUNDRED_SCALE_AXES: [&str; 2] = ["xray", "x_ray"];

/// Default distance scale for an axis of the given name.
pub fn default_scale(name: &str) -> f64 {
    let lower = name.to_ascii_lowercase();
    if HUNDRED_SCALE_AXES.contains(&lower.as_str()) {
        100.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Deserialize)]
struct AxisDef {
    name: String,
    min: f64,
    max: f64,
    #[serde(default = "default_bins")]
    bins: usize,
    direction: Direction,
    #[serde(default)]
    scale: Option<f64>,
}

/// One acquisition parameter axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "AxisDef")]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub bins: usize,
    pub direction: Direction,
    /// Divisor applied to differences along this axis before distances are taken.
    pub scale: f64,
}

impl From<AxisDef> for Axis {
    fn from(def: AxisDef) -> Self {
        let scale = def.scale.unwrap_or_else(|| default_scale(&def.name));
        Axis {
            name: def.name,
            min: def.min,
            max: def.max,
            bins: def.bins,
            direction: def.direction,
            scale,
        }
    }
}

impl Axis {
    pub fn new(name: impl Into<String>, min: f64, max: f64, bins: usize, direction: Direction) -> Self {
        let name = name.into();
        let scale = default_scale(&name);
        Axis {
            name,
            min,
            max,
            bins,
            direction,
            scale,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

/// Ordered set of axes defining the threshold grid and the dominance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct ParameterSpace {
    axes: Vec<Axis>,
}

#[derive(Deserialize)]
struct RawSpace {
    axes: Vec<Axis>,
}

impl TryFrom<RawSpace> for ParameterSpace {
    type Error = DatasetError;

    fn try_from(raw: RawSpace) -> Result<Self> {
        ParameterSpace::new(raw.axes)
    }
}

impl ParameterSpace {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(DatasetError::InvalidSpace("no axes".into()));
        }
        let mut names = HashSet::new();
        for axis in &axes {
            if !(axis.min.is_finite() && axis.max.is_finite() && axis.min < axis.max) {
                return Err(DatasetError::InvalidSpace(format!(
                    "axis {}: need finite min < max",
                    axis.name
                )));
            }
            if axis.bins < 2 {
                return Err(DatasetError::InvalidSpace(format!(
                    "axis {}: bins must be >= 2",
                    axis.name
                )));
            }
            if !(axis.scale.is_finite() && axis.scale > 0.0) {
                return Err(DatasetError::InvalidSpace(format!(
                    "axis {}: scale must be > 0",
                    axis.name
                )));
            }
            if FIXED_COLUMNS.contains(&axis.name.as_str()) {
                return Err(DatasetError::InvalidSpace(format!(
                    "axis name {} collides with a reserved column",
                    axis.name
                )));
            }
            if !names.insert(axis.name.clone()) {
                return Err(DatasetError::InvalidSpace(format!("duplicate axis name {}", axis.name)));
            }
        }
        Ok(ParameterSpace { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    /// Same axes with every quality direction flipped.
    pub fn reversed(&self) -> Self {
        let axes = self
            .axes
            .iter()
            .cloned()
            .map(|mut a| {
                a.direction = a.direction.reversed();
                a
            })
            .collect();
        ParameterSpace { axes }
    }

    /// Replaces the bin count of every axis.
    pub fn with_bins(mut self, bins: usize) -> Result<Self> {
        for axis in &mut self.axes {
            axis.bins = bins;
        }
        ParameterSpace::new(self.axes)
    }

    pub fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub case_id: String,
    pub method: String,
    pub fold: Option<u32>,
    /// True class, 1 = positive (malignant).
    pub label: u8,
    /// Predicted probability of the positive class.
    pub score: f64,
    pub params: Vec<f64>,
}

impl PredictionRecord {
    pub fn predicted(&self, threshold: f64) -> u8 {
        u8::from(self.score >= threshold)
    }

    /// 1 iff the thresholded score disagrees with the label.
    pub fn failure(&self, threshold: f64) -> u8 {
        u8::from(self.predicted(threshold) != self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    /// Reject records with parameters outside the declared axis range.
    #[default]
    Strict,
    /// Clamp such parameters into range and log a warning.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub decision_threshold: f64,
    pub range_mode: RangeMode,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            decision_threshold: 0.5,
            range_mode: RangeMode::Strict,
        }
    }
}

/// Validated, immutable prediction table.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    space: ParameterSpace,
    records: Vec<PredictionRecord>,
    failures: Vec<u8>,
    decision_threshold: f64,
}

impl PredictionTable {
    pub fn from_records(
        space: ParameterSpace,
        mut records: Vec<PredictionRecord>,
        options: LoadOptions,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(DatasetError::EmptyTable);
        }
        let mut keys = HashSet::with_capacity(records.len());
        for (row, rec) in records.iter_mut().enumerate() {
            if !rec.score.is_finite() {
                return Err(DatasetError::NonFiniteValue {
                    row,
                    column: "score".into(),
                });
            }
            if !(0.0..=1.0).contains(&rec.score) {
                return Err(DatasetError::InvalidValue {
                    row,
                    column: "score".into(),
                    message: format!("{} not in [0, 1]", rec.score),
                });
            }
            if rec.label > 1 {
                return Err(DatasetError::InvalidValue {
                    row,
                    column: "label".into(),
                    message: format!("{} not in {{0, 1}}", rec.label),
                });
            }
            space.check_dim(rec.params.len())?;
            for (value, axis) in rec.params.iter_mut().zip(space.axes()) {
                if !value.is_finite() {
                    return Err(DatasetError::NonFiniteValue {
                        row,
                        column: axis.name.clone(),
                    });
                }
                if *value < axis.min || *value > axis.max {
                    match options.range_mode {
                        RangeMode::Strict => {
                            return Err(DatasetError::OutOfRange {
                                row,
                                axis: axis.name.clone(),
                                value: *value,
                                min: axis.min,
                                max: axis.max,
                            })
                        }
                        RangeMode::Lenient => {
                            log::warn!(
                                "row {row}: {} = {} clamped to [{}, {}]",
                                axis.name,
                                value,
                                axis.min,
                                axis.max
                            );
                            *value = value.clamp(axis.min, axis.max);
                        }
                    }
                }
            }
            if !keys.insert((rec.case_id.clone(), rec.method.clone())) {
                return Err(DatasetError::DuplicateKey {
                    case_id: rec.case_id.clone(),
                    method: rec.method.clone(),
                });
            }
        }
        let failures = records.iter().map(|r| r.failure(options.decision_threshold)).collect();
        Ok(PredictionTable {
            space,
            records,
            failures,
            decision_threshold: options.decision_threshold,
        })
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn failures(&self) -> &[u8] {
        &self.failures
    }

    pub fn decision_threshold(&self) -> f64 {
        self.decision_threshold
    }

    /// Distinct method names, sorted.
    pub fn methods(&self) -> Vec<String> {
        let set: std::collections::BTreeSet<&str> = self.records.iter().map(|r| r.method.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    /// Distinct case ids in order of first appearance.
    pub fn cases(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.case_id.as_str()))
            .map(|r| r.case_id.clone())
            .collect()
    }

    /// True when every score is exactly 0 or 1.
    pub fn has_hard_scores(&self) -> bool {
        self.records.iter().all(|r| r.score == 0.0 || r.score == 1.0)
    }

    /// New table restricted to the given methods, keeping record order.
    pub fn filter_methods(&self, methods: &[String]) -> Result<Self> {
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| methods.contains(&r.method))
            .cloned()
            .collect();
        PredictionTable::from_records(
            self.space.clone(),
            records,
            LoadOptions {
                decision_threshold: self.decision_threshold,
                range_mode: RangeMode::Strict,
            },
        )
    }
}

/// Reads a prediction CSV from `path`.
pub fn load_predictions(
    path: impl AsRef<Path>,
    space: &ParameterSpace,
    options: LoadOptions,
) -> Result<PredictionTable> {
    let file = std::fs::File::open(path)?;
    read_predictions(file, space, options)
}

pub fn read_predictions<R: Read>(reader: R, space: &ParameterSpace, options: LoadOptions) -> Result<PredictionTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(DatasetError::EmptyTable);
    }
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let fixed: Vec<usize> = FIXED_COLUMNS.iter().map(|c| column(c)).collect::<Result<_>>()?;
    let param_cols: Vec<usize> = space.axes().iter().map(|a| column(&a.name)).collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let field = |idx: usize| rec.get(idx).unwrap_or("").trim();
        let parse_f64 = |idx: usize, name: &str| -> Result<f64> {
            let raw = field(idx);
            let value: f64 = raw.parse().map_err(|_| DatasetError::InvalidValue {
                row,
                column: name.to_string(),
                message: format!("cannot parse {raw:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::NonFiniteValue {
                    row,
                    column: name.to_string(),
                });
            }
            Ok(value)
        };
        let fold_raw = field(fixed[2]);
        let fold = if fold_raw.is_empty() {
            None
        } else {
            Some(fold_raw.parse().map_err(|_| DatasetError::InvalidValue {
                row,
                column: "fold".into(),
                message: format!("cannot parse {fold_raw:?} as a fold index"),
            })?)
        };
        let label = match field(fixed[3]) {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(DatasetError::InvalidValue {
                    row,
                    column: "label".into(),
                    message: format!("{other:?} not in {{0, 1}}"),
                })
            }
        };
        let score = parse_f64(fixed[4], "score")?;
        let params = param_cols
            .iter()
            .zip(space.axes())
            .map(|(&idx, axis)| parse_f64(idx, &axis.name))
            .collect::<Result<Vec<_>>>()?;
        records.push(PredictionRecord {
            case_id: field(fixed[0]).to_string(),
            method: field(fixed[1]).to_string(),
            fold,
            label,
            score,
            params,
        });
    }
    PredictionTable::from_records(space.clone(), records, options)
}

/// Writes the table in the same CSV schema accepted by [`read_predictions`].
pub fn write_predictions<W: Write>(table: &PredictionTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(table.space().axes().iter().map(|a| a.name.clone()));
    wtr.write_record(&header)?;
    for rec in table.records() {
        let mut row = vec![
            rec.case_id.clone(),
            rec.method.clone(),
            rec.fold.map(|f| f.to_string()).unwrap_or_default(),
            rec.label.to_string(),
            rec.score.to_string(),
        ];
        row.extend(rec.params.iter().map(|p| p.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSummary {
    pub name: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableSummary {
    pub n_records: usize,
    pub n_cases: usize,
    pub axes: Vec<AxisSummary>,
    pub method_counts: BTreeMap<String, usize>,
    pub positive_prevalence: f64,
    pub failure_rate: f64,
    /// Record count per fold; records without a fold are keyed `"none"`.
    pub fold_counts: BTreeMap<String, usize>,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(table: &PredictionTable) -> Result<TableSummary> {
    if table.is_empty() {
        return Err(DatasetError::EmptyTable);
    }
    let n = table.len() as f64;
    let axes = table
        .space()
        .axes()
        .iter()
        .enumerate()
        .map(|(j, axis)| {
            let mut values: Vec<f64> = table.records().iter().map(|r| r.params[j]).collect();
            values.sort_by(f64::total_cmp);
            AxisSummary {
                name: axis.name.clone(),
                min: values[0],
                q1: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                q3: quantile_sorted(&values, 0.75),
                max: values[values.len() - 1],
            }
        })
        .collect();
    let mut method_counts = BTreeMap::new();
    let mut fold_counts = BTreeMap::new();
    for rec in table.records() {
        *method_counts.entry(rec.method.clone()).or_insert(0) += 1;
        let key = rec.fold.map_or_else(|| "none".to_string(), |f| f.to_string());
        *fold_counts.entry(key).or_insert(0) += 1;
    }
    let positives = table.records().iter().filter(|r| r.label == 1).count() as f64;
    let failures = table.failures().iter().map(|&f| f as f64).sum::<f64>();
    Ok(TableSummary {
        n_records: table.len(),
        n_cases: table.cases().len(),
        axes,
        method_counts,
        positive_prevalence: positives / n,
        failure_rate: failures / n,
        fold_counts,
    })
}
