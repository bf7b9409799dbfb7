//! Tabular sweep outputs and their reductions.
//!
//! Per-run rows, grouped mean/std tables, per-process observations and the
//! elasticity-binned table all live here, together with their CSV formats.
//! Reductions always visit rows in coordinate order, so their results do not
//! depend on how the runs were scheduled.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Coordinates;

pub const RESULT_COLUMNS: [&str; 13] = [
    "n",
    "k",
    "elasticity_draw_index",
    "alpha",
    "gamma",
    "epsilon",
    "repetition",
    "seed",
    "average_production",
    "max_production",
    "labour_ratio",
    "capital_strength",
    "wall_time_ms",
];

pub const PROCESS_COLUMNS: [&str; 11] = [
    "n",
    "k",
    "elasticity_draw_index",
    "alpha",
    "gamma",
    "epsilon",
    "repetition",
    "process_index",
    "beta",
    "average_output",
    "labour_share",
];

pub const METRICS: [&str; 4] = [
    "average_production",
    "max_production",
    "labour_ratio",
    "capital_strength",
];

/// One row of the per-run results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub coordinates: Coordinates,
    pub seed: u64,
    pub average_production: f64,
    pub max_production: f64,
    pub labour_ratio: f64,
    pub capital_strength: Option<f64>,
    pub wall_time_ms: Option<u64>,
}

impl ResultRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "average_production" => Some(self.average_production),
            "max_production" => Some(self.max_production),
            "labour_ratio" => Some(self.labour_ratio),
            "capital_strength" => self.capital_strength,
            _ => None,
        }
    }
}

/// One process of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRow {
    pub coordinates: Coordinates,
    pub process_index: usize,
    pub beta: f64,
    pub average_output: f64,
    pub labour_share: Option<f64>,
}

fn fmt(v: f64) -> String {
    // Display prints the shortest string that parses back to the same f64.
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn coordinate_fields(c: &Coordinates) -> [String; 7] {
    [
        c.n.to_string(),
        c.k.to_string(),
        c.elasticity_draw.to_string(),
        fmt(c.alpha),
        fmt(c.gamma),
        fmt(c.epsilon),
        c.repetition.to_string(),
    ]
}

fn csv_err(path: &Path, e: impl ToString) -> Error {
    Error::parse(path, e)
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let origin = Path::new("<results>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)
        .map_err(|e| csv_err(origin, e))?;
    for r in rows {
        let mut rec: Vec<String> = coordinate_fields(&r.coordinates).into();
        rec.extend([
            r.seed.to_string(),
            fmt(r.average_production),
            fmt(r.max_production),
            fmt(r.labour_ratio),
            fmt_opt(r.capital_strength),
            r.wall_time_ms.map(|t| t.to_string()).unwrap_or_default(),
        ]);
        w.write_record(&rec).map_err(|e| csv_err(origin, e))?;
    }
    w.flush().map_err(|e| Error::io(origin, e))
}

pub fn write_processes<W: Write>(out: W, rows: &[ProcessRow]) -> Result<()> {
    let origin = Path::new("<processes>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROCESS_COLUMNS)
        .map_err(|e| csv_err(origin, e))?;
    for r in rows {
        let mut rec: Vec<String> = coordinate_fields(&r.coordinates).into();
        rec.extend([
            r.process_index.to_string(),
            fmt(r.beta),
            fmt(r.average_output),
            fmt_opt(r.labour_share),
        ]);
        w.write_record(&rec).map_err(|e| csv_err(origin, e))?;
    }
    w.flush().map_err(|e| Error::io(origin, e))
}

struct Fields<'a> {
    record: &'a csv::StringRecord,
    header: &'a [&'a str],
    path: &'a Path,
    line: u64,
}

impl Fields<'_> {
    fn raw(&self, i: usize) -> &str {
        self.record.get(i).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, i: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(i).parse().map_err(|e| {
            Error::parse(
                self.path,
                format!("line {}: column `{}`: {e}", self.line, self.header[i]),
            )
        })
    }

    fn parse_opt<T: std::str::FromStr>(&self, i: usize) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            self.parse(i).map(Some)
        }
    }

    fn coordinates(&self) -> Result<Coordinates> {
        Ok(Coordinates {
            n: self.parse(0)?,
            k: self.parse(1)?,
            elasticity_draw: self.parse(2)?,
            alpha: self.parse(3)?,
            gamma: self.parse(4)?,
            epsilon: self.parse(5)?,
            repetition: self.parse(6)?,
        })
    }
}

fn read_table<R: Read>(
    input: R,
    path: &Path,
    columns: &[&str],
    mut row: impl FnMut(&Fields) -> Result<()>,
) -> Result<()> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != columns {
        let missing: Vec<&str> = columns
            .iter()
            .copied()
            .filter(|c| !got.contains(c))
            .collect();
        let reason = if missing.is_empty() {
            format!("columns out of order; expected {}", columns.join(","))
        } else {
            format!("missing columns: {}", missing.join(", "))
        };
        return Err(Error::parse(path, reason));
    }
    for (i, rec) in r.records().enumerate() {
        let record = rec.map_err(|e| csv_err(path, e))?;
        row(&Fields {
            record: &record,
            header: columns,
            path,
            line: i as u64 + 2,
        })?;
    }
    Ok(())
}

pub fn read_results<R: Read>(input: R, path: &Path) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    read_table(input, path, &RESULT_COLUMNS, |f| {
        rows.push(ResultRow {
            coordinates: f.coordinates()?,
            seed: f.parse(7)?,
            average_production: f.parse(8)?,
            max_production: f.parse(9)?,
            labour_ratio: f.parse(10)?,
            capital_strength: f.parse_opt(11)?,
            wall_time_ms: f.parse_opt(12)?,
        });
        Ok(())
    })?;
    Ok(rows)
}

pub fn read_processes<R: Read>(input: R, path: &Path) -> Result<Vec<ProcessRow>> {
    let mut rows = Vec::new();
    read_table(input, path, &PROCESS_COLUMNS, |f| {
        rows.push(ProcessRow {
            coordinates: f.coordinates()?,
            process_index: f.parse(7)?,
            beta: f.parse(8)?,
            average_output: f.parse(9)?,
            labour_share: f.parse_opt(10)?,
        });
        Ok(())
    })?;
    Ok(rows)
}

/// Axis a results table can be grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    N,
    K,
    ElasticityDraw,
    Alpha,
    Gamma,
    Epsilon,
}

impl GroupKey {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => GroupKey::N,
            "k" => GroupKey::K,
            "elasticity_draw_index" => GroupKey::ElasticityDraw,
            "alpha" => GroupKey::Alpha,
            "gamma" => GroupKey::Gamma,
            "epsilon" => GroupKey::Epsilon,
            other => {
                return Err(Error::invalid(
                    "group_by",
                    format!(
                        "unknown key `{other}`; expected n, k, elasticity_draw_index, alpha, gamma or epsilon"
                    ),
                ))
            }
        })
    }

    pub fn parse_list<S: AsRef<str>>(keys: &[S]) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = Vec::new();
        for k in keys {
            let key = Self::parse(k.as_ref().trim())?;
            if out.contains(&key) {
                return Err(Error::invalid(
                    "group_by",
                    format!("duplicate key `{}`", k.as_ref()),
                ));
            }
            out.push(key);
        }
        Ok(out)
    }

    pub fn name(&self) -> &'static str {
        match self {
            GroupKey::N => "n",
            GroupKey::K => "k",
            GroupKey::ElasticityDraw => "elasticity_draw_index",
            GroupKey::Alpha => "alpha",
            GroupKey::Gamma => "gamma",
            GroupKey::Epsilon => "epsilon",
        }
    }

    fn value(&self, c: &Coordinates) -> KeyValue {
        match self {
            GroupKey::N => KeyValue::Int(c.n),
            GroupKey::K => KeyValue::Int(c.k),
            GroupKey::ElasticityDraw => KeyValue::Int(c.elasticity_draw),
            GroupKey::Alpha => KeyValue::Real(c.alpha),
            GroupKey::Gamma => KeyValue::Real(c.gamma),
            GroupKey::Epsilon => KeyValue::Real(c.epsilon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyValue {
    Int(usize),
    Real(f64),
}

impl KeyValue {
    pub fn as_f64(&self) -> f64 {
        match *self {
            KeyValue::Int(v) => v as f64,
            KeyValue::Real(v) => v,
        }
    }
}

impl std::fmt::Display for KeyValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeyValue::Int(v) => write!(f, "{v}"),
            KeyValue::Real(v) => write!(f, "{v}"),
        }
    }
}

// Orders group keys numerically; used only as a map key.
#[derive(Debug, Clone, PartialEq)]
struct SortKey(Vec<KeyValue>);

impl Eq for SortKey {}

impl PartialOrd for SortKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SortKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.as_f64().total_cmp(&b.as_f64()))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Mean, sample standard deviation and count of a set of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    /// Values are summed in the order given. The standard deviation uses
    /// the `count - 1` denominator and is 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = if count < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        };
        Some(Self { mean, std, count })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub key: Vec<KeyValue>,
    pub runs: usize,
    /// One entry per name in [`METRICS`]; `None` when no run in the group
    /// defines the metric.
    pub metrics: Vec<Option<Summary>>,
}

impl AggregateRow {
    pub fn metric(&self, name: &str) -> Option<Summary> {
        METRICS
            .iter()
            .position(|m| *m == name)
            .and_then(|i| self.metrics[i])
    }

    pub fn key_value(&self, keys: &[GroupKey], key: GroupKey) -> Option<f64> {
        keys.iter()
            .position(|k| *k == key)
            .map(|i| self.key[i].as_f64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub keys: Vec<GroupKey>,
    pub rows: Vec<AggregateRow>,
}

/// Group rows by `keys` and summarise every metric.
pub fn aggregate(rows: &[ResultRow], keys: &[GroupKey]) -> AggregateTable {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.coordinates.cmp_key(&b.coordinates));
    let mut groups: BTreeMap<SortKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in sorted {
        let key = SortKey(keys.iter().map(|k| k.value(&r.coordinates)).collect());
        groups.entry(key).or_default().push(r);
    }
    let rows = groups
        .into_iter()
        .map(|(key, members)| AggregateRow {
            key: key.0,
            runs: members.len(),
            metrics: METRICS
                .iter()
                .map(|m| {
                    let values: Vec<f64> = members.iter().filter_map(|r| r.metric(m)).collect();
                    Summary::of(&values)
                })
                .collect(),
        })
        .collect();
    AggregateTable {
        keys: keys.to_vec(),
        rows,
    }
}

impl AggregateTable {
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.keys.iter().map(|k| k.name().to_string()).collect();
        cols.push("runs".into());
        for m in METRICS {
            for suffix in ["mean", "std", "count"] {
                cols.push(format!("{m}_{suffix}"));
            }
        }
        cols
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let origin = Path::new("<aggregates>");
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns())
            .map_err(|e| csv_err(origin, e))?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.key.iter().map(|k| k.to_string()).collect();
            rec.push(row.runs.to_string());
            for s in &row.metrics {
                match s {
                    Some(s) => rec.extend([fmt(s.mean), fmt(s.std), s.count.to_string()]),
                    None => rec.extend([String::new(), String::new(), "0".into()]),
                }
            }
            w.write_record(&rec).map_err(|e| csv_err(origin, e))?;
        }
        w.flush().map_err(|e| Error::io(origin, e))
    }

    pub fn total_runs(&self) -> usize {
        self.rows.iter().map(|r| r.runs).sum()
    }

    /// Row whose key matches `values` (in key order).
    pub fn find(&self, values: &[f64]) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| {
            r.key.len() == values.len() && r.key.iter().zip(values).all(|(k, v)| k.as_f64() == *v)
        })
    }
}

/// Read a table written by [`AggregateTable::write`]. The group keys are
/// the columns before `runs`.
pub fn read_aggregates<R: Read>(input: R, path: &Path) -> Result<AggregateTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let runs_at = header
        .iter()
        .position(|c| c == "runs")
        .ok_or_else(|| Error::parse(path, "missing column `runs`"))?;
    let keys = GroupKey::parse_list(&header.iter().take(runs_at).collect::<Vec<_>>())
        .map_err(|e| Error::parse(path, e))?;
    let table = AggregateTable {
        keys,
        rows: Vec::new(),
    };
    let expected = table.columns();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::parse(
            path,
            format!("expected columns {}", expected.join(",")),
        ));
    }
    let names: Vec<&str> = expected.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let record = rec.map_err(|e| csv_err(path, e))?;
        let fields = Fields {
            record: &record,
            header: &names,
            path,
            line: line as u64 + 2,
        };
        rows.push(fields.aggregate_row(&table.keys, runs_at)?);
    }
    Ok(AggregateTable { rows, ..table })
}

impl Fields<'_> {
    fn aggregate_row(&self, keys: &[GroupKey], runs_at: usize) -> Result<AggregateRow> {
        let key = keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                Ok(match k {
                    GroupKey::N | GroupKey::K | GroupKey::ElasticityDraw => {
                        KeyValue::Int(self.parse(i)?)
                    }
                    _ => KeyValue::Real(self.parse(i)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let metrics = (0..METRICS.len())
            .map(|m| {
                let base = runs_at + 1 + 3 * m;
                let count: usize = self.parse(base + 2)?;
                Ok(match (self.parse_opt(base)?, self.parse_opt(base + 1)?) {
                    (Some(mean), Some(std)) if count > 0 => Some(Summary { mean, std, count }),
                    _ => None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AggregateRow {
            key,
            runs: self.parse(runs_at)?,
            metrics,
        })
    }
}

/// Per-process observations pooled into equal-width elasticity bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticityBin {
    pub bin: usize,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub average_output: Option<Summary>,
    pub labour_share: Option<Summary>,
}

pub const ELASTICITY_BIN_COLUMNS: [&str; 11] = [
    "bin",
    "beta_lo",
    "beta_hi",
    "beta_mid",
    "average_output_mean",
    "average_output_std",
    "average_output_count",
    "labour_share_mean",
    "labour_share_std",
    "labour_share_count",
    "observations",
];

/// Bin index of `beta` among `bins` equal-width bins over `[lo, hi]`; the
/// upper edge belongs to the last bin.
pub fn bin_of(beta: f64, lo: f64, hi: f64, bins: usize) -> Option<usize> {
    if !(lo..=hi).contains(&beta) || bins == 0 {
        return None;
    }
    let width = (hi - lo) / bins as f64;
    Some((((beta - lo) / width) as usize).min(bins - 1))
}

pub fn elasticity_bins(rows: &[ProcessRow], lo: f64, hi: f64, bins: usize) -> Vec<ElasticityBin> {
    let mut sorted: Vec<&ProcessRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.coordinates
            .cmp_key(&b.coordinates)
            .then(a.process_index.cmp(&b.process_index))
    });
    let mut outputs = vec![Vec::new(); bins];
    let mut shares = vec![Vec::new(); bins];
    for r in sorted {
        if let Some(b) = bin_of(r.beta, lo, hi, bins) {
            outputs[b].push(r.average_output);
            if let Some(s) = r.labour_share {
                shares[b].push(s);
            }
        }
    }
    let width = (hi - lo) / bins as f64;
    (0..bins)
        .map(|b| ElasticityBin {
            bin: b,
            beta_lo: lo + width * b as f64,
            beta_hi: if b + 1 == bins {
                hi
            } else {
                lo + width * (b + 1) as f64
            },
            average_output: Summary::of(&outputs[b]),
            labour_share: Summary::of(&shares[b]),
        })
        .collect()
}

pub fn write_elasticity_bins<W: Write>(out: W, bins: &[ElasticityBin]) -> Result<()> {
    let origin = Path::new("<elasticity bins>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ELASTICITY_BIN_COLUMNS)
        .map_err(|e| csv_err(origin, e))?;
    for b in bins {
        let mut rec = vec![
            b.bin.to_string(),
            fmt(b.beta_lo),
            fmt(b.beta_hi),
            fmt((b.beta_lo + b.beta_hi) / 2.0),
        ];
        for s in [b.average_output, b.labour_share] {
            match s {
                Some(s) => rec.extend([fmt(s.mean), fmt(s.std), s.count.to_string()]),
                None => rec.extend([String::new(), String::new(), "0".into()]),
            }
        }
        rec.push(b.average_output.map_or(0, |s| s.count).to_string());
        w.write_record(&rec).map_err(|e| csv_err(origin, e))?;
    }
    w.flush().map_err(|e| Error::io(origin, e))
}

/// Spearman rank correlation, with tied values given their average rank.
/// `None` for fewer than two points or a constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            out[t] = rank;
        }
        i = j + 1;
    }
    out
}

/// Read a results file from disk.
pub fn load_results(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(file, path)
}
