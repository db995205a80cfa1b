//! Loading, validating and windowing multivariate return panels.

use std::collections::HashSet;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NecoError, Result};
use crate::stats;

/// How the numeric cells of a panel CSV should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelMode {
    Prices,
    LogReturns,
}

/// N x p matrix of per-period log-returns with instrument labels and dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    instruments: Vec<String>,
    times: Vec<NaiveDate>,
    values: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(instruments: Vec<String>, times: Vec<NaiveDate>, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != instruments.len() {
            return Err(NecoError::LengthMismatch {
                left: values.ncols(),
                right: instruments.len(),
            });
        }
        if values.nrows() != times.len() {
            return Err(NecoError::LengthMismatch {
                left: values.nrows(),
                right: times.len(),
            });
        }
        if instruments.is_empty() {
            return Err(NecoError::MalformedPanel("panel has no instruments".into()));
        }
        if values.nrows() < 2 {
            return Err(NecoError::InsufficientData(format!(
                "panel needs at least 2 rows, got {}",
                values.nrows()
            )));
        }
        let mut seen = HashSet::new();
        for label in &instruments {
            if !seen.insert(label.as_str()) {
                return Err(NecoError::DuplicateLabel(label.clone()));
            }
        }
        for (row, pair) in times.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(NecoError::NonMonotoneDates { row: row + 1 });
            }
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                let (row, column) = (idx % values.nrows(), idx / values.nrows());
                return Err(NecoError::BadCell {
                    row,
                    column,
                    detail: "non-finite value".into(),
                });
            }
        }
        Ok(Self {
            instruments,
            times,
            values,
        })
    }

    /// Builds a panel with consecutive daily dates starting at 2000-01-01;
    /// used for simulated data.
    pub fn with_synthetic_dates(instruments: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let times = (0..values.nrows())
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        Self::new(instruments, times, values)
    }

    pub fn instruments(&self) -> &[String] {
        &self.instruments
    }

    pub fn times(&self) -> &[NaiveDate] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_instruments(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Row slice `[range.start, range.end)`.
    pub fn slice_rows(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n_obs() || range.start >= range.end {
            return Err(NecoError::WindowError(format!(
                "row range {range:?} outside panel of {} rows",
                self.n_obs()
            )));
        }
        let values = self.values.rows(range.start, range.len()).into_owned();
        Self::new(
            self.instruments.clone(),
            self.times[range].to_vec(),
            values,
        )
    }

    /// Reorders columns by `order` (new column k is old column `order[k]`).
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        let cols: Vec<_> = order.iter().map(|&j| self.values.column(j)).collect();
        let values = DMatrix::from_columns(&cols);
        let labels = order.iter().map(|&j| self.instruments[j].clone()).collect();
        Self::new(labels, self.times.clone(), values)
    }

    /// Writes the panel as `date,<label>...` CSV.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.instruments.iter().cloned());
        w.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut rec = vec![t.format("%Y-%m-%d").to_string()];
            rec.extend(self.values.row(i).iter().map(|v| fmt_num(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Decimal rendering with 15 significant digits.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (14 - magnitude).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

/// Reads a panel CSV from disk.
pub fn parse_panel_csv(path: impl AsRef<Path>, mode: PanelMode) -> Result<ReturnPanel> {
    let file = std::fs::File::open(path)?;
    parse_panel_reader(file, mode)
}

/// Parses `date,<label1>,...,<labelp>` CSV. In price mode the returned values
/// are log(P_t / P_{t-1}) and the panel loses its first row.
pub fn parse_panel_reader<R: Read>(reader: R, mode: PanelMode) -> Result<ReturnPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(NecoError::MalformedPanel(
            "header must be `date,<label1>,...`".into(),
        ));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for l in &labels {
        if l.is_empty() {
            return Err(NecoError::MalformedPanel("empty instrument label".into()));
        }
        if !seen.insert(l.as_str()) {
            return Err(NecoError::DuplicateLabel(l.clone()));
        }
    }
    let p = labels.len();
    let mut times = Vec::new();
    let mut flat = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date_str = rec.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|e| NecoError::BadCell {
            row,
            column: 0,
            detail: format!("bad date `{date_str}`: {e}"),
        })?;
        if let Some(prev) = times.last() {
            if date <= *prev {
                return Err(NecoError::NonMonotoneDates { row });
            }
        }
        times.push(date);
        for col in 0..p {
            let cell = rec.get(col + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(NecoError::BadCell {
                    row,
                    column: col + 1,
                    detail: "missing value".into(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| NecoError::BadCell {
                row,
                column: col + 1,
                detail: format!("not a number: `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(NecoError::BadCell {
                    row,
                    column: col + 1,
                    detail: "non-finite value".into(),
                });
            }
            flat.push(v);
        }
        if rec.len() > p + 1 {
            return Err(NecoError::BadCell {
                row,
                column: p + 1,
                detail: "extra cell beyond header".into(),
            });
        }
    }
    let n = times.len();
    let raw = DMatrix::from_row_slice(n, p, &flat);
    match mode {
        PanelMode::LogReturns => ReturnPanel::new(labels, times, raw),
        PanelMode::Prices => {
            if n < 3 {
                return Err(NecoError::InsufficientData(
                    "price mode needs at least 3 rows".into(),
                ));
            }
            let mut rets = DMatrix::zeros(n - 1, p);
            for j in 0..p {
                for i in 1..n {
                    let (prev, cur) = (raw[(i - 1, j)], raw[(i, j)]);
                    if prev <= 0.0 || cur <= 0.0 {
                        return Err(NecoError::BadCell {
                            row: if prev <= 0.0 { i - 1 } else { i },
                            column: j + 1,
                            detail: "price must be positive".into(),
                        });
                    }
                    rets[(i - 1, j)] = (cur / prev).ln();
                }
            }
            ReturnPanel::new(labels, times[1..].to_vec(), rets)
        }
    }
}

/// Per-instrument descriptive statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSummary {
    pub instrument: String,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub stdev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
}

/// Sample moments per column. Skewness and excess kurtosis use the moment
/// ratios m3/m2^1.5 and m4/m2^2 - 3; JB = N/6 (S^2 + K^2/4).
pub fn summarize(panel: &ReturnPanel) -> Result<Vec<InstrumentSummary>> {
    let n = panel.n_obs();
    if n < 4 {
        return Err(NecoError::InsufficientData(format!(
            "summary needs at least 4 observations, got {n}"
        )));
    }
    let nf = n as f64;
    panel
        .instruments()
        .iter()
        .enumerate()
        .map(|(j, label)| {
            let mut col = panel.column(j);
            let mean = stats::mean(&col);
            let m2 = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
            if col.iter().all(|x| *x == col[0]) || m2 <= 0.0 {
                return Err(NecoError::DegenerateSeries(format!(
                    "{label} is constant; moments undefined"
                )));
            }
            let m3 = col.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
            let m4 = col.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
            let skewness = m3 / m2.powf(1.5);
            let excess_kurtosis = m4 / (m2 * m2) - 3.0;
            let stdev = stats::sample_std(&col);
            col.sort_by(f64::total_cmp);
            Ok(InstrumentSummary {
                instrument: label.clone(),
                min: col[0],
                median: stats::quantile_sorted(&col, 0.5),
                mean,
                max: col[n - 1],
                stdev,
                skewness,
                excess_kurtosis,
                jarque_bera: nf / 6.0 * (skewness.powi(2) + excess_kurtosis.powi(2) / 4.0),
            })
        })
        .collect()
}

/// Train/test split schedule for rolling backtests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub train_length: usize,
    pub test_length: usize,
    pub stride: usize,
    pub windows: Vec<Window>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Windows start at 0 and advance by `stride`; a trailing partial window is dropped.
pub fn make_windows(n: usize, train: usize, test: usize, stride: usize) -> Result<WindowPlan> {
    if train == 0 || test == 0 || stride == 0 {
        return Err(NecoError::WindowError(
            "train, test and stride must all be positive".into(),
        ));
    }
    if train + test > n {
        return Err(NecoError::WindowError(format!(
            "train {train} + test {test} exceeds {n} observations"
        )));
    }
    let windows = (0..)
        .map(|k| k * stride)
        .take_while(|start| start + train + test <= n)
        .map(|start| Window {
            train: start..start + train,
            test: start + train..start + train + test,
        })
        .collect();
    Ok(WindowPlan {
        train_length: train,
        test_length: test,
        stride,
        windows,
    })
}
