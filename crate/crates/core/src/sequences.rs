//! Matrix sequences `k ↦ M_k` converging to a declared limit `M`.
//!
//! Built-in models are analytic perturbations of the limit; file-backed
//! sequences are loaded whole and extended past their last row by the limit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{validate_limit_matrix, Mat2};
use crate::scalar::Scalar;

/// A deterministic indexed matrix stream, indices `k ≥ 1`.
pub trait MatrixSource<T: Scalar>: Sync {
    fn matrix(&self, k: usize) -> Mat2<T>;

    fn limit(&self) -> Mat2<T>;

    /// Index from which `M_k` equals the limit exactly, if known.
    fn exact_from(&self) -> Option<usize> {
        None
    }
}

impl<T: Scalar, S: MatrixSource<T> + ?Sized> MatrixSource<T> for &S {
    fn matrix(&self, k: usize) -> Mat2<T> {
        (**self).matrix(k)
    }

    fn limit(&self) -> Mat2<T> {
        (**self).limit()
    }

    fn exact_from(&self) -> Option<usize> {
        (**self).exact_from()
    }
}

/// Decay profile of a perturbation `s_k·E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Decay {
    /// `s_k = k^(−p)`, `p > 0`.
    Power { p: f64 },
    /// `s_k = q^k`, `0 < q < 1`.
    Geometric { q: f64 },
}

impl Decay {
    pub fn weight(&self, k: usize) -> f64 {
        match *self {
            Decay::Power { p } => (k as f64).powf(-p),
            Decay::Geometric { q } => q.powi(k as i32),
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Decay::Power { p } if p > 0.0 && p.is_finite() => Ok(()),
            Decay::Geometric { q } if q > 0.0 && q < 1.0 => Ok(()),
            _ => Err(Error::InvalidArgument(format!("bad decay {self:?}"))),
        }
    }

    /// Largest index with weight strictly above `w`, `None` if unbounded.
    fn last_index_above(&self, w: f64) -> Option<usize> {
        if w <= 0.0 {
            return None;
        }
        let mut k = match *self {
            Decay::Power { p } => w.powf(-1.0 / p).floor() as usize,
            Decay::Geometric { q } => (w.ln() / q.ln()).floor().max(0.0) as usize,
        };
        while k > 0 && self.weight(k) <= w {
            k -= 1;
        }
        while self.weight(k + 1) > w {
            k += 1;
        }
        Some(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Constant,
    Perturbed { e: Mat2<f64>, decay: Decay },
    File { rows: Vec<Mat2<f64>> },
}

/// An entry of `M + s_k E` that is clamped at 0 for small indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClampNote {
    pub entry: &'static str,
    /// Clamped for `1 ≤ k ≤ through`; `None` means every index.
    pub through: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSequence {
    limit: Mat2<f64>,
    model: Model,
    clamped: Vec<ClampNote>,
}

const ENTRY_NAMES: [&str; 4] = ["a", "b", "d", "theta"];

impl MatrixSequence {
    /// `M_k ≡ m`.
    pub fn constant(m: Mat2<f64>) -> Result<Self> {
        check_limit(&m)?;
        Ok(MatrixSequence {
            limit: m,
            model: Model::Constant,
            clamped: Vec::new(),
        })
    }

    /// `M_k = m + s_k·e`, entries clamped at 0 (see [`MatrixSequence::clamped`]).
    pub fn perturbed(m: Mat2<f64>, e: Mat2<f64>, decay: Decay) -> Result<Self> {
        check_limit(&m)?;
        decay.check()?;
        let mut clamped = Vec::new();
        for ((name, base), pert) in ENTRY_NAMES.iter().zip(m.entries()).zip(e.entries()) {
            if pert < 0.0 {
                let through = decay.last_index_above(base / -pert);
                if through != Some(0) {
                    clamped.push(ClampNote {
                        entry: name,
                        through,
                    });
                }
            }
        }
        Ok(MatrixSequence {
            limit: m,
            model: Model::Perturbed { e, decay },
            clamped,
        })
    }

    /// Rows for `k = 1..=rows.len()`, then the limit.
    pub fn from_rows(rows: Vec<Mat2<f64>>, limit: Mat2<f64>) -> Result<Self> {
        if let Some(k) = rows.iter().position(|m| !m.is_nonnegative()) {
            return Err(Error::Domain(format!("row {} has a negative entry", k + 1)));
        }
        if !limit.is_nonnegative() {
            return Err(Error::Domain("limit has a negative entry".into()));
        }
        Ok(MatrixSequence {
            limit,
            model: Model::File { rows },
            clamped: Vec::new(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn clamped(&self) -> &[ClampNote] {
        &self.clamped
    }

    pub fn is_clamped_at(&self, k: usize) -> bool {
        self.clamped
            .iter()
            .any(|c| c.through.is_none_or(|t| k <= t))
    }

    /// Largest index stored explicitly (file sequences only).
    pub fn stored_len(&self) -> Option<usize> {
        match &self.model {
            Model::File { rows } => Some(rows.len()),
            _ => None,
        }
    }

    /// Largest entrywise `|M_k − M|` at index `k`.
    pub fn deviation(&self, k: usize) -> f64 {
        let m = self.matrix(k);
        m.entries()
            .iter()
            .zip(self.limit.entries())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

fn check_limit(m: &Mat2<f64>) -> Result<()> {
    if !m.is_nonnegative() {
        return Err(Error::Domain(format!(
            "limit matrix {m} has a negative entry"
        )));
    }
    validate_limit_matrix(m).into_result().map(|_| ())
}

impl MatrixSource<f64> for MatrixSequence {
    fn matrix(&self, k: usize) -> Mat2<f64> {
        match &self.model {
            Model::Constant => self.limit.clone(),
            Model::Perturbed { e, decay } => {
                let w = decay.weight(k);
                let [a, b, d, t] = self.limit.entries();
                let [ea, eb, ed, et] = e.entries();
                let f = |x: f64, y: f64| (x + w * y).max(0.0);
                Mat2::new(f(a, ea), f(b, eb), f(d, ed), f(t, et))
            }
            Model::File { rows } => k
                .checked_sub(1)
                .and_then(|i| rows.get(i))
                .cloned()
                .unwrap_or_else(|| self.limit.clone()),
        }
    }

    fn limit(&self) -> Mat2<f64> {
        self.limit.clone()
    }

    fn exact_from(&self) -> Option<usize> {
        match &self.model {
            Model::Constant => Some(1),
            Model::Perturbed { e, .. } if e.entries().iter().all(|x| *x == 0.0) => Some(1),
            Model::Perturbed { .. } => None,
            Model::File { rows } => Some(rows.len() + 1),
        }
    }
}

/// Exact-valued sequence: stored rows, then the limit.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSequence<T> {
    rows: Vec<Mat2<T>>,
    limit: Mat2<T>,
}

impl<T: Scalar> TableSequence<T> {
    pub fn new(rows: Vec<Mat2<T>>, limit: Mat2<T>) -> Self {
        TableSequence { rows, limit }
    }

    pub fn constant(limit: Mat2<T>) -> Self {
        TableSequence {
            rows: Vec::new(),
            limit,
        }
    }

    pub fn rows(&self) -> &[Mat2<T>] {
        &self.rows
    }

    /// The same sequence rounded to binary64.
    pub fn to_float(&self) -> Result<MatrixSequence> {
        MatrixSequence::from_rows(
            self.rows.iter().map(Mat2::to_f64).collect(),
            self.limit.to_f64(),
        )
    }
}

impl<T: Scalar> MatrixSource<T> for TableSequence<T> {
    fn matrix(&self, k: usize) -> Mat2<T> {
        k.checked_sub(1)
            .and_then(|i| self.rows.get(i))
            .cloned()
            .unwrap_or_else(|| self.limit.clone())
    }

    fn limit(&self) -> Mat2<T> {
        self.limit.clone()
    }

    fn exact_from(&self) -> Option<usize> {
        Some(self.rows.len() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Row index: a positive integer, or `inf` for the limit row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowIndex {
    Finite(usize),
    Limit,
}

fn parse_index(s: &str) -> std::result::Result<RowIndex, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") {
        return Ok(RowIndex::Limit);
    }
    s.parse::<usize>()
        .map(RowIndex::Finite)
        .map_err(|_| format!("bad index {s:?}"))
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonRow {
    k: serde_json::Value,
    a: f64,
    b: f64,
    d: f64,
    theta: f64,
}

/// Loads a `k,a,b,d,theta` table (CSV with header, or a JSON array of
/// objects with the same fields). The limit row uses `k = inf`.
pub fn load_sequence(path: &Path, format: Format) -> Result<MatrixSequence> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut entries: Vec<(usize, RowIndex, Mat2<f64>)> = Vec::new();
    match format {
        Format::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .comment(Some(b'#'))
                .from_reader(text.as_bytes());
            let headers = rdr
                .headers()
                .map_err(|e| parse_err(1, e.to_string()))?
                .clone();
            let expected = ["k", "a", "b", "d", "theta"];
            if headers.iter().collect::<Vec<_>>() != expected {
                return Err(parse_err(
                    1,
                    format!("expected header k,a,b,d,theta, got {headers:?}"),
                ));
            }
            for rec in rdr.records() {
                let rec = rec.map_err(|e| {
                    let line = e.position().map_or(0, |p| p.line() as usize);
                    parse_err(line, e.to_string())
                })?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                let idx = parse_index(&rec[0]).map_err(|m| parse_err(line, m))?;
                let mut vals = [0.0; 4];
                for (v, field) in vals.iter_mut().zip(rec.iter().skip(1)) {
                    *v = field
                        .parse::<f64>()
                        .map_err(|_| parse_err(line, format!("bad number {field:?}")))?;
                }
                entries.push((line, idx, Mat2::from_entries(vals)));
            }
        }
        Format::Json => {
            let rows: Vec<JsonRow> =
                serde_json::from_str(&text).map_err(|e| parse_err(e.line(), e.to_string()))?;
            for (i, row) in rows.into_iter().enumerate() {
                // JSON rows are numbered by position.
                let line = i + 1;
                let idx = match &row.k {
                    serde_json::Value::Number(n) => n
                        .as_u64()
                        .map(|v| RowIndex::Finite(v as usize))
                        .ok_or_else(|| parse_err(line, format!("bad index {n}")))?,
                    serde_json::Value::String(s) => {
                        parse_index(s).map_err(|m| parse_err(line, m))?
                    }
                    other => return Err(parse_err(line, format!("bad index {other}"))),
                };
                entries.push((line, idx, Mat2::new(row.a, row.b, row.d, row.theta)));
            }
        }
    }

    let mut rows = Vec::new();
    let mut limit = None;
    for (line, idx, m) in entries {
        if !m.is_nonnegative() {
            return Err(parse_err(line, format!("negative or invalid entry in {m}")));
        }
        match idx {
            RowIndex::Limit => {
                if limit.replace(m).is_some() {
                    return Err(parse_err(line, "duplicate limit row".into()));
                }
            }
            RowIndex::Finite(k) => {
                let expected = rows.len() + 1;
                if k < expected {
                    return Err(parse_err(
                        line,
                        format!("duplicate or decreasing index {k}"),
                    ));
                }
                if k != expected {
                    return Err(parse_err(line, format!("index {k} skips {expected}")));
                }
                rows.push(m);
            }
        }
    }
    let limit = limit.ok_or_else(|| parse_err(0, "missing limit row (k=inf)".into()))?;
    MatrixSequence::from_rows(rows, limit)
}
