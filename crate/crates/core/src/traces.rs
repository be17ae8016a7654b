//! Request traces: synthetic generators, CSV replay and a converter for
//! timestamped rating exports.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::model::RequestEvent;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid trace parameters: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("cannot read trace {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceKind {
    /// I.i.d. draws with `Pr(i) ∝ (i+1)^{−α}`.
    Zipf(f64),
    /// I.i.d. uniform over the library.
    UniformLb,
    /// Zipf(α) for the first half of the horizon, then the popularity order
    /// reversed (file `i` takes the weight of file `N−1−i`).
    ZipfFlip(f64),
    /// Replay of a `slot,file_id[,user_id]` file.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpec {
    pub kind: TraceKind,
    pub n_files: usize,
    pub horizon: usize,
    /// Number of user locations; synthetic traces then draw users uniformly.
    pub n_users: Option<usize>,
}

impl TraceSpec {
    pub fn new(kind: TraceKind, n_files: usize, horizon: usize) -> Self {
        Self {
            kind,
            n_files,
            horizon,
            n_users: None,
        }
    }

    pub fn with_users(mut self, n_users: usize) -> Self {
        self.n_users = Some(n_users);
        self
    }

    fn validate(&self) -> Result<(), TraceError> {
        if self.n_files == 0 {
            return Err(TraceError::Invalid("library is empty".into()));
        }
        if self.horizon == 0 {
            return Err(TraceError::Invalid("horizon must be at least 1".into()));
        }
        if self.n_users == Some(0) {
            return Err(TraceError::Invalid("need at least one user".into()));
        }
        match self.kind {
            TraceKind::Zipf(a) | TraceKind::ZipfFlip(a) if !(a >= 0.0 && a.is_finite()) => {
                Err(TraceError::Invalid(format!("zipf exponent must be ≥ 0, got {a}")))
            }
            _ => Ok(()),
        }
    }

    /// Materializes the trace. Synthetic kinds produce exactly `horizon`
    /// requests; CSV replay returns at most `horizon` rows in file order.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<RequestEvent>, TraceError> {
        self.validate()?;
        let n = self.n_files;
        let files: Vec<usize> = match &self.kind {
            TraceKind::Zipf(a) => {
                let dist = zipf_index(n, *a)?;
                (0..self.horizon).map(|_| dist.sample(rng)).collect()
            }
            TraceKind::ZipfFlip(a) => {
                let dist = zipf_index(n, *a)?;
                let half = self.horizon / 2;
                (0..self.horizon)
                    .map(|t| {
                        let f = dist.sample(rng);
                        if t < half {
                            f
                        } else {
                            n - 1 - f
                        }
                    })
                    .collect()
            }
            TraceKind::UniformLb => (0..self.horizon).map(|_| rng.random_range(0..n)).collect(),
            TraceKind::Csv(path) => {
                let mut events = read_csv_path(path, n, self.n_users)?;
                events.truncate(self.horizon);
                return Ok(events);
            }
        };
        Ok(files
            .into_iter()
            .enumerate()
            .map(|(t, f)| match self.n_users {
                Some(users) => RequestEvent::with_user(t as u64, f, rng.random_range(0..users)),
                None => RequestEvent::new(t as u64, f),
            })
            .collect())
    }
}

/// Normalized Zipf probabilities `(i+1)^{−α} / Σ_k (k+1)^{−α}`.
pub fn zipf_probabilities(n_files: usize, alpha: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n_files).map(|i| ((i + 1) as f64).powf(-alpha)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn zipf_index(n_files: usize, alpha: f64) -> Result<WeightedIndex<f64>, TraceError> {
    WeightedIndex::new((0..n_files).map(|i| ((i + 1) as f64).powf(-alpha)))
        .map_err(|e| TraceError::Invalid(format!("zipf weights: {e}")))
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, k: usize, what: &str, line: u64) -> Result<T, TraceError> {
    let raw = record.get(k).ok_or_else(|| TraceError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    raw.trim().parse().map_err(|_| TraceError::Parse {
        line,
        message: format!("invalid {what} `{raw}`"),
    })
}

/// Reads a `slot,file_id[,user_id]` trace with a header row. Blank lines and
/// `#` comments are ignored. With `n_users` set every row must carry a user.
pub fn read_csv<Rd: Read>(input: Rd, n_files: usize, n_users: Option<usize>) -> Result<Vec<RequestEvent>, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let slot: u64 = field(&record, 0, "slot", line)?;
        let file: usize = field(&record, 1, "file_id", line)?;
        if file >= n_files {
            return Err(TraceError::Parse {
                line,
                message: format!("file_id {file} ≥ library size {n_files}"),
            });
        }
        let user = match (record.len(), n_users) {
            (2, None) => None,
            (3, _) => {
                let user: usize = field(&record, 2, "user_id", line)?;
                if let Some(users) = n_users {
                    if user >= users {
                        return Err(TraceError::Parse {
                            line,
                            message: format!("user_id {user} ≥ {users} users"),
                        });
                    }
                }
                Some(user)
            }
            (2, Some(_)) => {
                return Err(TraceError::Parse {
                    line,
                    message: "missing user_id".into(),
                })
            }
            (k, _) => {
                return Err(TraceError::Parse {
                    line,
                    message: format!("expected 2 or 3 fields, got {k}"),
                })
            }
        };
        events.push(RequestEvent { slot, file, user });
    }
    Ok(events)
}

pub fn read_csv_path(path: &Path, n_files: usize, n_users: Option<usize>) -> Result<Vec<RequestEvent>, TraceError> {
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, n_files, n_users)
}

/// Converts `user,item,rating,timestamp` rows into a `slot,file_id` trace:
/// rows are ordered by timestamp (stable) and item ids are re-indexed densely
/// in order of first appearance. A non-numeric first row is taken as a header.
/// Returns the number of distinct files.
pub fn convert_ratings<Rd: Read, W: Write>(input: Rd, output: W) -> Result<usize, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut rows: Vec<(i64, String)> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if k == 0 && record.get(3).is_some_and(|ts| ts.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() < 4 {
            return Err(TraceError::Parse {
                line,
                message: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let ts: f64 = field(&record, 3, "timestamp", line)?;
        rows.push((ts as i64, record[1].to_string()));
    }
    rows.sort_by_key(|&(ts, _)| ts);

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["slot", "file_id"])?;
    for (slot, (_, item)) in rows.into_iter().enumerate() {
        let next = ids.len();
        let id = *ids.entry(item).or_insert(next);
        writer.write_record([slot.to_string(), id.to_string()])?;
    }
    writer.flush().map_err(|source| TraceError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(ids.len())
}

/// Integer sizes drawn uniformly from `{lo, …, hi}`.
pub fn assign_sizes<R: Rng + ?Sized>(n_files: usize, lo: u32, hi: u32, rng: &mut R) -> Result<Vec<f64>, TraceError> {
    if lo < 1 || lo > hi {
        return Err(TraceError::Invalid(format!("size range {lo}:{hi} needs 1 ≤ lo ≤ hi")));
    }
    Ok((0..n_files).map(|_| f64::from(rng.random_range(lo..=hi))).collect())
}
