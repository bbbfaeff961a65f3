//! Lifespan extrapolation across dated diagram snapshots.
//!
//! Each snapshot is an `index,birth,death` CSV. Snapshots with too few
//! records are dropped, every remaining snapshot is subsampled to a common
//! `key_length`, and the i-th sampled lifespan of every date forms one
//! series. A least-squares polynomial in the date index is fitted to each
//! series and evaluated one interval ahead.
//!
//! Series are matched by position only; no feature is tracked between
//! dates.

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::export::{parse_csv, ExportError};
use crate::par::{self, Execution};
use crate::persistence::Death;

/// A prediction within this percentage of the actual value counts as a hit.
pub const SUCCESS_THRESHOLD_PCT: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("cannot parse CSV for date {date}: {source}")]
    Parse { date: u32, source: ExportError },
    #[error("degree {degree} needs at least {} dates, have {dates}", degree + 1)]
    DegreeTooHigh { degree: usize, dates: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate date index {0}")]
    DuplicateDate(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatedEntry {
    /// 1 for the first snapshot; one unit per sampling interval.
    pub date_index: u32,
    /// Finite `(birth, death)` records in file order.
    pub records: Vec<(u8, u8)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DroppedDate {
    pub date_index: u32,
    pub count: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatedDiagramSet {
    pub entries: Vec<DatedEntry>,
    pub key_length: usize,
    pub dropped: Vec<DroppedDate>,
}

fn median(sorted: &[usize]) -> Ratio<u64> {
    let n = sorted.len();
    if n % 2 == 1 {
        Ratio::from_integer(sorted[n / 2] as u64)
    } else {
        Ratio::new((sorted[n / 2 - 1] + sorted[n / 2]) as u64, 2)
    }
}

/// Parse and align dated CSV snapshots.
///
/// A snapshot is dropped when its record count is below `outlier_ratio`
/// times the median count of the other snapshots. Essential (`inf`) rows
/// are ignored. Entries come back sorted by date.
pub fn assemble(
    files: &[(u32, &[u8])],
    outlier_ratio: Ratio<u64>,
) -> Result<DatedDiagramSet, PredictError> {
    let mut entries = Vec::with_capacity(files.len());
    for &(date, bytes) in files {
        let text = String::from_utf8_lossy(bytes);
        let rows = parse_csv(&text).map_err(|source| PredictError::Parse { date, source })?;
        let records = rows
            .iter()
            .filter_map(|r| match r.death {
                Death::Finite(d) => Some((r.birth, d)),
                Death::Essential => None,
            })
            .collect();
        entries.push(DatedEntry {
            date_index: date,
            records,
        });
    }
    entries.sort_by_key(|e| e.date_index);
    if let Some(w) = entries
        .windows(2)
        .find(|w| w[0].date_index == w[1].date_index)
    {
        return Err(PredictError::DuplicateDate(w[0].date_index));
    }

    let counts: Vec<usize> = entries.iter().map(|e| e.records.len()).collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, entry) in entries.into_iter().enumerate() {
        let mut others: Vec<usize> = counts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &c)| c)
            .collect();
        others.sort_unstable();
        let count = entry.records.len();
        let outlier = !others.is_empty() && {
            let threshold = outlier_ratio * median(&others);
            Ratio::from_integer(count as u64) < threshold
        };
        if outlier {
            dropped.push(DroppedDate {
                date_index: entry.date_index,
                count,
                reason: format!(
                    "{count} records is below {outlier_ratio} of the median of the other dates ({})",
                    median(&others)
                ),
            });
        } else {
            kept.push(entry);
        }
    }
    if kept.len() < 3 {
        return Err(PredictError::InsufficientData(format!(
            "{} usable snapshots, need at least 3",
            kept.len()
        )));
    }
    let key_length = kept.iter().map(|e| e.records.len()).min().unwrap_or(0);
    if key_length == 0 {
        return Err(PredictError::InsufficientData(
            "a retained snapshot has no finite records".into(),
        ));
    }
    Ok(DatedDiagramSet {
        entries: kept,
        key_length,
        dropped,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifespanSeries {
    /// Date index of each column.
    pub dates: Vec<u32>,
    /// Per date, the sampled record positions in ascending order.
    pub drawn: Vec<Vec<usize>>,
    /// `values[i][t]`: lifespan of the i-th sampled record at `dates[t]`.
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LifespanSeries {
    pub fn from_values(dates: Vec<u32>, values: Vec<Vec<f64>>) -> Result<Self, PredictError> {
        if let Some(row) = values.iter().find(|r| r.len() != dates.len()) {
            return Err(PredictError::Shape(format!(
                "series of length {} for {} dates",
                row.len(),
                dates.len()
            )));
        }
        Ok(Self {
            dates,
            drawn: Vec::new(),
            values,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Remove the column for `date`, returning it as the held-out target.
    pub fn hold_out(&self, date: u32) -> Option<(Self, Vec<f64>)> {
        let t = self.dates.iter().position(|&d| d == date)?;
        let mut rest = self.clone();
        rest.dates.remove(t);
        if !rest.drawn.is_empty() {
            rest.drawn.remove(t);
        }
        let actual = rest.values.iter_mut().map(|row| row.remove(t)).collect();
        Some((rest, actual))
    }
}

/// Draw `key_length` distinct record positions per date.
///
/// The generator is ChaCha8 seeded with `seed_from_u64(seed)`, shared
/// across dates in date order. Each date runs a partial Fisher-Yates
/// shuffle (`j = random_range(i..n)` for `i < key_length`), and the drawn
/// positions are sorted so series keep the canonical diagram order.
pub fn sample_lifespans(set: &DatedDiagramSet, seed: u64) -> LifespanSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = set.key_length;
    let mut drawn = Vec::with_capacity(set.entries.len());
    let mut values = vec![Vec::with_capacity(set.entries.len()); k];
    for entry in &set.entries {
        let n = entry.records.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = rng.random_range(i..n);
            perm.swap(i, j);
        }
        let mut picks = perm[..k].to_vec();
        picks.sort_unstable();
        for (i, &p) in picks.iter().enumerate() {
            let (b, d) = entry.records[p];
            values[i].push(f64::from(d - b));
        }
        drawn.push(picks);
    }
    LifespanSeries {
        dates: set.entries.iter().map(|e| e.date_index).collect(),
        drawn,
        values,
        seed,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitModel {
    pub degree: usize,
    /// Per series, coefficients in ascending powers of the date index.
    pub coefficients: Vec<Vec<f64>>,
    /// Per series, the sum of squared residuals.
    pub residuals: Vec<f64>,
}

/// Least-squares polynomial of the given degree for every series.
pub fn fit(series: &LifespanSeries, degree: usize) -> Result<FitModel, PredictError> {
    fit_with(series, degree, Execution::default())
}

pub fn fit_with(
    series: &LifespanSeries,
    degree: usize,
    exec: Execution,
) -> Result<FitModel, PredictError> {
    let n = series.dates.len();
    if n < degree + 1 {
        return Err(PredictError::DegreeTooHigh { degree, dates: n });
    }
    let design = DMatrix::from_fn(n, degree + 1, |r, c| {
        f64::from(series.dates[r]).powi(c as i32)
    });
    // One factorization serves every series: they share the design matrix.
    let (q, r) = design.clone().qr().unpack();
    let qt = q.transpose();
    let solved = par::map_slice(exec, &series.values, |ys| {
        let y = DVector::from_column_slice(ys);
        let coef = r
            .solve_upper_triangular(&(&qt * &y))
            .unwrap_or_else(|| DVector::zeros(degree + 1));
        let resid = (&design * &coef - &y).norm_squared();
        (coef.iter().copied().collect::<Vec<f64>>(), resid)
    });
    let (coefficients, residuals) = solved.into_iter().unzip();
    Ok(FitModel {
        degree,
        coefficients,
        residuals,
    })
}

pub fn eval_poly(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Clamped to be nonnegative.
    pub values: Vec<f64>,
    pub clamped: Vec<bool>,
}

impl Prediction {
    pub fn clamped_count(&self) -> usize {
        self.clamped.iter().filter(|&&c| c).count()
    }
}

pub fn predict_next(model: &FitModel, x_next: u32) -> Prediction {
    let x = f64::from(x_next);
    let (values, clamped) = model
        .coefficients
        .iter()
        .map(|c| {
            let raw = eval_poly(c, x);
            if raw < 0.0 {
                (0.0, true)
            } else {
                (raw, false)
            }
        })
        .unzip();
    Prediction { values, clamped }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// `None` where the actual value is zero and the prediction is not.
    pub per_index: Vec<Option<f64>>,
    /// Mean over defined entries.
    pub aggregate: Option<f64>,
    /// Share of defined entries strictly below the success threshold.
    pub under_threshold: f64,
}

pub fn percent_error(predicted: &[f64], actual: &[f64]) -> Result<ErrorReport, PredictError> {
    if predicted.len() != actual.len() {
        return Err(PredictError::Shape(format!(
            "{} predictions for {} actual values",
            predicted.len(),
            actual.len()
        )));
    }
    let per_index: Vec<Option<f64>> = predicted
        .iter()
        .zip(actual)
        .map(|(&p, &a)| {
            if a != 0.0 {
                Some((p - a).abs() / a.abs() * 100.0)
            } else if p == 0.0 {
                Some(0.0)
            } else {
                None
            }
        })
        .collect();
    let defined: Vec<f64> = per_index.iter().flatten().copied().collect();
    let aggregate =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let under = defined
        .iter()
        .filter(|&&e| e < SUCCESS_THRESHOLD_PCT)
        .count();
    let under_threshold = if defined.is_empty() {
        0.0
    } else {
        under as f64 / defined.len() as f64
    };
    Ok(ErrorReport {
        per_index,
        aggregate,
        under_threshold,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictConfig {
    pub seed: u64,
    pub degree: usize,
    pub outlier_ratio: Ratio<u64>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            degree: 1,
            outlier_ratio: Ratio::new(1, 2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionReport {
    pub x_next: u32,
    pub predicted: Prediction,
    pub actual: Vec<f64>,
    pub errors: ErrorReport,
    pub dropped: Vec<DroppedDate>,
    pub key_length: usize,
}

impl PredictionReport {
    /// `index,predicted,actual,percent_error,flag` rows followed by the
    /// summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,predicted,actual,percent_error,flag\n");
        for i in 0..self.actual.len() {
            let err = self.errors.per_index[i];
            let mut flags = Vec::new();
            if self.predicted.clamped[i] {
                flags.push("clamped");
            }
            if err.is_none() {
                flags.push("undefined");
            }
            let flag = if flags.is_empty() {
                "ok".to_string()
            } else {
                flags.join(";")
            };
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{}\n",
                i + 1,
                self.predicted.values[i],
                self.actual[i],
                err.map_or("undefined".to_string(), |e| format!("{e:.6}")),
                flag
            ));
        }
        out.push_str(&self.summary_line());
        out.push('\n');
        out
    }

    pub fn summary_line(&self) -> String {
        let dropped: Vec<String> = self
            .dropped
            .iter()
            .map(|d| d.date_index.to_string())
            .collect();
        format!(
            "aggregate={} under5pct={:.6} clamped={} dropped_dates=[{}]",
            self.errors
                .aggregate
                .map_or("undefined".to_string(), |a| format!("{a:.6}")),
            self.errors.under_threshold,
            self.predicted.clamped_count(),
            dropped.join(",")
        )
    }
}

/// The whole pipeline: assemble, sample, hold out one date, fit the rest
/// and score the extrapolation against the held-out date.
///
/// `holdout` defaults to the last retained date.
pub fn run_prediction(
    files: &[(u32, &[u8])],
    holdout: Option<u32>,
    cfg: &PredictConfig,
) -> Result<PredictionReport, PredictError> {
    let set = assemble(files, cfg.outlier_ratio)?;
    let series = sample_lifespans(&set, cfg.seed);
    let target = holdout.unwrap_or(*series.dates.last().expect("at least three dates"));
    let (train, actual) = series.hold_out(target).ok_or_else(|| {
        PredictError::InsufficientData(format!("held-out date {target} was not retained"))
    })?;
    if train.dates.iter().any(|&d| d > target) {
        return Err(PredictError::Shape(format!(
            "held-out date {target} is not the last date"
        )));
    }
    let model = fit(&train, cfg.degree)?;
    let predicted = predict_next(&model, target);
    let errors = percent_error(&predicted.values, &actual)?;
    Ok(PredictionReport {
        x_next: target,
        predicted,
        actual,
        errors,
        dropped: set.dropped,
        key_length: set.key_length,
    })
}
