//! Agreement and reproducibility statistics for predicted versus measured
//! failure loads.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::material::ModelVariant;

/// Minimum number of cases for the two-observation reproducibility design.
pub const MIN_REPRODUCIBILITY_CASES: usize = 27;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("zero variance in one of the series")]
    DegenerateVariance,
    #[error("value {value} at position {index} must be positive")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One numerical column of the study: model, operator and trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellKey {
    pub model: ModelVariant,
    pub operator: u8,
    pub trial: u8,
}

impl CellKey {
    pub const fn new(model: ModelVariant, operator: u8, trial: u8) -> Self {
        Self { model, operator, trial }
    }

    pub fn column_name(&self) -> String {
        let m = match self.model {
            ModelVariant::Ensam => "ensam",
            ModelVariant::Lyon => "lyon",
        };
        format!("{m}_op{}_t{}", self.operator, self.trial)
    }
}

pub const ENSAM_OP1_T1: CellKey = CellKey::new(ModelVariant::Ensam, 1, 1);
pub const ENSAM_OP1_T2: CellKey = CellKey::new(ModelVariant::Ensam, 1, 2);
pub const ENSAM_OP2_T1: CellKey = CellKey::new(ModelVariant::Ensam, 2, 1);
pub const LYON_OP3_T1: CellKey = CellKey::new(ModelVariant::Lyon, 3, 1);
pub const LYON_OP3_T2: CellKey = CellKey::new(ModelVariant::Lyon, 3, 2);

/// Numerical columns in CSV order.
pub const STUDY_COLUMNS: [CellKey; 5] = [ENSAM_OP1_T1, ENSAM_OP1_T2, ENSAM_OP2_T1, LYON_OP3_T1, LYON_OP3_T2];

pub const CSV_HEADER: &str = "donor,level,experimental,ensam_op1_t1,ensam_op1_t2,ensam_op2_t1,lyon_op3_t1,lyon_op3_t2";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyRecord {
    pub donor: String,
    pub level: String,
    pub experimental: f64,
    /// Failure loads (N) in `STUDY_COLUMNS` order; `None` marks a missing cell.
    pub numerical: [Option<f64>; 5],
}

impl StudyRecord {
    pub fn get(&self, key: CellKey) -> Option<f64> {
        STUDY_COLUMNS.iter().position(|k| *k == key).and_then(|i| self.numerical[i])
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyTable {
    pub records: Vec<StudyRecord>,
}

impl StudyTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn experimental(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.experimental).collect()
    }

    /// A complete numerical column, or the list of records missing it.
    pub fn column(&self, key: CellKey) -> Result<Vec<f64>, StatsError> {
        let mut out = Vec::with_capacity(self.records.len());
        let mut missing = Vec::new();
        for r in &self.records {
            match r.get(key) {
                Some(v) => out.push(v),
                None => missing.push(format!("{} ({} {})", key.column_name(), r.donor, r.level)),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(StatsError::MissingCells(missing))
        }
    }

    /// Parses the study CSV. Empty numerical cells are kept as missing.
    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(StatsError::Parse { line: 1, message: "empty input".into() })?;
        let header: Vec<&str> = header.trim_start_matches('\u{feff}').split(',').map(str::trim).collect();
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        if header != expected {
            return Err(StatsError::Parse { line: 1, message: format!("header must be `{CSV_HEADER}`") });
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != expected.len() {
                return Err(StatsError::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", expected.len(), cells.len()),
                });
            }
            let num = |s: &str, name: &str| -> Result<f64, StatsError> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| StatsError::Parse { line: line_no, message: format!("bad number `{s}` in {name}") })
            };
            let experimental = num(cells[2], "experimental")?;
            if !(experimental > 0.0) {
                return Err(StatsError::Parse { line: line_no, message: "experimental load must be positive".into() });
            }
            let mut numerical = [None; 5];
            for (k, cell) in cells[3..].iter().enumerate() {
                if !cell.is_empty() {
                    numerical[k] = Some(num(cell, expected[3 + k])?);
                }
            }
            records.push(StudyRecord {
                donor: cells[0].to_string(),
                level: cells[1].to_string(),
                experimental,
                numerical,
            });
        }
        if records.is_empty() {
            return Err(StatsError::Parse { line: 2, message: "no records".into() });
        }
        Ok(Self { records })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!("{},{},{}", r.donor, r.level, r.experimental));
            for v in &r.numerical {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&format!("{v}"));
                }
            }
            s.push('\n');
        }
        s
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 divisor).
pub fn sample_sd(x: &[f64]) -> Result<f64, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFewPoints { needed: 2, got: x.len() });
    }
    let m = mean(x);
    Ok(libm::sqrt(x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64))
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(StatsError::TooFewPoints { needed: 1, got: 0 });
    }
    Ok(())
}

fn differences(numerical: &[f64], experimental: &[f64]) -> Result<Vec<f64>, StatsError> {
    check_pair(numerical, experimental)?;
    Ok(numerical.iter().zip(experimental).map(|(n, e)| n - e).collect())
}

/// Accuracy (mean of `numerical − experimental`) and precision (its sample SD).
pub fn accuracy_precision(numerical: &[f64], experimental: &[f64]) -> Result<(f64, f64), StatsError> {
    let d = differences(numerical, experimental)?;
    Ok((mean(&d), sample_sd(&d)?))
}

/// Squared Pearson correlation.
pub fn r_squared(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    if x.len() < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok(sxy * sxy / (sxx * syy))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlandAltman {
    /// `(mean of pair, numerical − experimental)` per pair.
    pub points: Vec<(f64, f64)>,
    pub bias: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn bland_altman(numerical: &[f64], experimental: &[f64]) -> Result<BlandAltman, StatsError> {
    let (bias, sd) = accuracy_precision(numerical, experimental)?;
    let points = numerical.iter().zip(experimental).map(|(n, e)| (0.5 * (n + e), n - e)).collect();
    Ok(BlandAltman { points, bias, sd, lower: bias - 1.96 * sd, upper: bias + 1.96 * sd })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntraOperator {
    /// `100 · |t2 − t1| / ((t1 + t2) / 2)` per specimen.
    pub per_specimen: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Relative trial-to-trial difference in percent.
pub fn intra_operator(trial1: &[f64], trial2: &[f64]) -> Result<IntraOperator, StatsError> {
    check_pair(trial1, trial2)?;
    for (i, &v) in trial1.iter().chain(trial2).enumerate() {
        if !(v > 0.0) {
            return Err(StatsError::NonPositiveValue { index: i % trial1.len(), value: v });
        }
    }
    let per_specimen: Vec<f64> =
        trial1.iter().zip(trial2).map(|(a, b)| 100.0 * (b - a).abs() / (0.5 * (a + b))).collect();
    let m = mean(&per_specimen);
    let sd = sample_sd(&per_specimen)?;
    Ok(IntraOperator { per_specimen, mean: m, sd })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RowKind {
    /// Numerical series minus experimental.
    Agreement,
    /// Trial minus trial of one operator.
    IntraOperator,
    /// Operator minus operator.
    InterOperator,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportRow {
    pub label: String,
    pub kind: RowKind,
    /// Which series is subtracted from which, e.g. `T1 - T2`.
    pub order: String,
    /// Signed mean difference (N).
    pub mean: f64,
    pub abs_mean: f64,
    /// Sample SD of the difference; absent with fewer than two records.
    pub sd: Option<f64>,
    pub r_squared: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnSummary {
    pub column: String,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyReport {
    pub records: usize,
    pub rows: Vec<ReportRow>,
    pub columns: Vec<ColumnSummary>,
    pub ensam_intra_percent: Option<IntraOperator>,
    pub lyon_intra_percent: Option<IntraOperator>,
    /// R² between Ensam operator 1 trial 1 and Lyon operator 3 trial 1.
    pub cross_model_r_squared: Option<f64>,
    pub warnings: Vec<String>,
}

fn pairwise_mean(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn row(label: &str, kind: RowKind, order: &str, a: &[f64], b: &[f64], r2: Option<(&[f64], &[f64])>) -> ReportRow {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let sd = sample_sd(&d).ok();
    let r_squared = r2.and_then(|(x, y)| r_squared(x, y).ok());
    let note = if sd.is_none() {
        Some("too few points for a standard deviation".to_string())
    } else if r2.is_some() && r_squared.is_none() {
        Some("coefficient of determination undefined".to_string())
    } else {
        None
    };
    ReportRow { label: label.into(), kind, order: order.into(), mean: m, abs_mean: m.abs(), sd, r_squared, note }
}

/// Every agreement and reproducibility row for a complete study table.
pub fn summarize(table: &StudyTable) -> Result<StudyReport, StatsError> {
    if table.is_empty() {
        return Err(StatsError::TooFewPoints { needed: 1, got: 0 });
    }
    let mut missing = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for key in STUDY_COLUMNS {
        match table.column(key) {
            Ok(c) => cols.push(c),
            Err(StatsError::MissingCells(m)) => missing.extend(m),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(StatsError::MissingCells(missing));
    }
    let exp = table.experimental();
    let (e11, e12, e21, l1, l2) = (&cols[0], &cols[1], &cols[2], &cols[3], &cols[4]);
    let e1m = pairwise_mean(e11, e12);
    let ops = pairwise_mean(&e1m, e21);
    let lm = pairwise_mean(l1, l2);

    use RowKind::*;
    let nm = "numerical - experimental";
    let agree = |label: &str, x: &[f64]| row(label, Agreement, nm, x, &exp, Some((x, &exp)));
    let rows = alloc::vec![
        agree("Ensam Operator 1 - Trial 1", e11),
        agree("Ensam Operator 1 - Trial 2", e12),
        agree("Ensam Operator 1 - Mean Trial 1&2", &e1m),
        agree("Ensam Operator 2 - Trial 1", e21),
        agree("Ensam Operators - Mean Trials", &ops),
        row("Ensam intra Operator", IntraOperator, "T1 - T2", e11, e12, Some((e11, e12))),
        row("Ensam inter Operator", InterOperator, "Operator 1 mean - Operator 2", &e1m, e21, None),
        agree("Lyon Operator 3 - Trial 1", l1),
        agree("Lyon Operator 3 - Trial 2", l2),
        agree("Lyon Operator 3 - Mean Trials", &lm),
        row("Lyon intra Operator", IntraOperator, "T2 - T1", l2, l1, Some((l1, l2))),
    ];

    let mut columns =
        alloc::vec![ColumnSummary { column: "experimental".into(), mean: mean(&exp), sd: sample_sd(&exp).ok() }];
    for (key, c) in STUDY_COLUMNS.iter().zip(&cols) {
        columns.push(ColumnSummary { column: key.column_name(), mean: mean(c), sd: sample_sd(c).ok() });
    }

    let mut warnings = Vec::new();
    if table.len() < MIN_REPRODUCIBILITY_CASES {
        warnings.push(format!(
            "{} cases with two observations each; at least {MIN_REPRODUCIBILITY_CASES} are advised for reproducibility estimates",
            table.len()
        ));
    }
    if rows.iter().any(|r| r.sd.is_none()) {
        warnings.push("standard deviations undefined with a single record".into());
    }

    Ok(StudyReport {
        records: table.len(),
        rows,
        columns,
        ensam_intra_percent: intra_operator(e11, e12).ok(),
        lyon_intra_percent: intra_operator(l1, l2).ok(),
        cross_model_r_squared: r_squared(e11, l1).ok(),
        warnings,
    })
}
