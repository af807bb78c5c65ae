//! Result rows and their CSV form.
//!
//! Header: `scheme,sweep_value,trial,sum_rate,rate_user_1..rate_user_K,iters,wall_ms`.
//! Floats carry 12 significant digits; values are rounded to that precision
//! when a row is built, so parsing an emitted file reproduces the rows
//! exactly. Failed runs have `NaN` rates.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::Scheme;

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Text form of a rounded value: the shortest representation that parses
/// back to it, which has at most 12 significant digits.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{}", round_sig(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub trial: usize,
    pub sum_rate: f64,
    pub per_user_rates: Vec<f64>,
    pub iterations: usize,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn new(
        scheme: Scheme,
        sweep_value: f64,
        trial: usize,
        per_user_rates: Vec<f64>,
        iterations: usize,
        wall_ms: f64,
    ) -> Self {
        let per_user_rates: Vec<f64> = per_user_rates.into_iter().map(round_sig).collect();
        Self {
            scheme,
            sweep_value: round_sig(sweep_value),
            trial,
            sum_rate: round_sig(per_user_rates.iter().sum()),
            per_user_rates,
            iterations,
            wall_ms: round_sig(wall_ms),
        }
    }

    pub fn failed(scheme: Scheme, sweep_value: f64, trial: usize, k: usize) -> Self {
        Self {
            scheme,
            sweep_value: round_sig(sweep_value),
            trial,
            sum_rate: f64::NAN,
            per_user_rates: vec![f64::NAN; k],
            iterations: 0,
            wall_ms: 0.0,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.sum_rate.is_nan()
    }

    // NaN-aware equality for round-trip comparisons.
    fn same(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.scheme == other.scheme
            && eq(self.sweep_value, other.sweep_value)
            && self.trial == other.trial
            && eq(self.sum_rate, other.sum_rate)
            && self.per_user_rates.len() == other.per_user_rates.len()
            && self
                .per_user_rates
                .iter()
                .zip(&other.per_user_rates)
                .all(|(a, b)| eq(*a, *b))
            && self.iterations == other.iterations
            && eq(self.wall_ms, other.wall_ms)
    }
}

/// Rows of a run, sorted by `(scheme, sweep_value, trial)`.
#[derive(Debug, Clone, Default)]
pub struct RunResult {
    rows: Vec<ResultRow>,
    failures: Vec<String>,
}

impl PartialEq for RunResult {
    fn eq(&self, other: &Self) -> bool {
        self.rows.len() == other.rows.len() && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same(b))
    }
}

impl RunResult {
    pub fn new(mut rows: Vec<ResultRow>, failures: Vec<String>) -> Self {
        rows.sort_by(|a, b| {
            a.scheme
                .cmp(&b.scheme)
                .then(a.sweep_value.total_cmp(&b.sweep_value))
                .then(a.trial.cmp(&b.trial))
        });
        Self { rows, failures }
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    /// Descriptions of failed scheme runs (not persisted in the CSV).
    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_failed()).count()
    }

    pub fn rows_for(&self, scheme: Scheme, sweep_value: f64) -> impl Iterator<Item = &ResultRow> {
        let v = round_sig(sweep_value);
        self.rows
            .iter()
            .filter(move |r| r.scheme == scheme && r.sweep_value == v)
    }

    /// Mean sum-rate over the trials of one `(scheme, sweep_value)` cell.
    pub fn mean_sum_rate(&self, scheme: Scheme, sweep_value: f64) -> Option<f64> {
        let (sum, n) = self
            .rows_for(scheme, sweep_value)
            .fold((0.0, 0usize), |(s, n), r| (s + r.sum_rate, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let k = self.rows.iter().map(|r| r.per_user_rates.len()).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "scheme".to_string(),
            "sweep_value".into(),
            "trial".into(),
            "sum_rate".into(),
        ];
        header.extend((1..=k).map(|i| format!("rate_user_{i}")));
        header.extend(["iters".to_string(), "wall_ms".into()]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.scheme.name().to_string(),
                format_sig(r.sweep_value),
                r.trial.to_string(),
                format_sig(r.sum_rate),
            ];
            rec.extend((0..k).map(|i| r.per_user_rates.get(i).map_or(String::new(), |&x| format_sig(x))));
            rec.push(r.iterations.to_string());
            rec.push(format_sig(r.wall_ms));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        if let Some(parent) = path.as_ref().parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let header = rd.headers()?.clone();
        let k = header.iter().filter(|h| h.starts_with("rate_user_")).count();
        let expected_len = 6 + k;
        if header.len() != expected_len || &header[0] != "scheme" || &header[expected_len - 1] != "wall_ms" {
            return Err(Error::Format(format!("unexpected header {header:?}")));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("bad number '{s}'"))) };
        let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Format(format!("bad integer '{s}'"))) };
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let scheme = rec[0]
                .parse()
                .map_err(|_| Error::Format(format!("bad scheme '{}'", &rec[0])))?;
            let per_user_rates = (0..k).map(|i| num(&rec[4 + i])).collect::<Result<Vec<_>>>()?;
            rows.push(ResultRow {
                scheme,
                sweep_value: num(&rec[1])?,
                trial: int(&rec[2])?,
                sum_rate: num(&rec[3])?,
                per_user_rates,
                iterations: int(&rec[4 + k])?,
                wall_ms: num(&rec[5 + k])?,
            });
        }
        Ok(Self::new(rows, Vec::new()))
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
