//! Discrete memoryless channels with strictly positive transitions.

use std::fs;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probability::{ConditionalDistribution, Distribution, RENORMALIZE_TOL};

/// Smallest transition probability accepted as "strictly positive".
pub const MIN_ENTRY: f64 = 1e-12;
/// Largest output alphabet the symmetry search will handle.
pub const MAX_SYMMETRY_OUTPUTS: usize = 8;

const PERMUTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel needs at least 2 inputs and 2 outputs, got {inputs}x{outputs}")]
    DegenerateShape { inputs: usize, outputs: usize },
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("entry ({row}, {col}) = {value} is not a positive probability")]
    NonPositive { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("symmetry undecided for {outputs} outputs (limit {MAX_SYMMETRY_OUTPUTS})")]
    SymmetryUndecided { outputs: usize },
}

#[derive(Debug, Error)]
pub enum ChannelFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },
    #[error("{path}: invalid channel: {source}")]
    Invalid {
        path: String,
        #[source]
        source: ChannelError,
    },
}

/// A validated channel matrix `W(y|x)`, row = input letter.
#[derive(Clone, Debug, PartialEq)]
pub struct Dmc {
    matrix: ConditionalDistribution,
    log: Vec<Vec<f64>>,
    cdf: Vec<Vec<f64>>,
    name: Option<String>,
}

impl Deref for Dmc {
    type Target = ConditionalDistribution;
    fn deref(&self) -> &Self::Target {
        &self.matrix
    }
}

impl Dmc {
    pub fn new(raw: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        validate(raw)
    }

    /// Binary symmetric channel with crossover `eps`.
    pub fn bsc(eps: f64) -> Result<Self, ChannelError> {
        validate(vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]])
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn matrix(&self) -> &ConditionalDistribution {
        &self.matrix
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .rows()
            .iter()
            .map(|r| r.weights().to_vec())
            .collect()
    }

    /// `ln W(y|x)`.
    pub fn ln(&self, x: usize, y: usize) -> f64 {
        self.log[x][y]
    }

    pub fn log_table(&self) -> &[Vec<f64>] {
        &self.log
    }

    /// Cumulative row sums; the last entry of every row is exactly 1.
    pub fn cdf(&self, x: usize) -> &[f64] {
        &self.cdf[x]
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix
            .rows()
            .iter()
            .flat_map(|r| r.weights().iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Gallager symmetry; see [`is_symmetric`].
    pub fn is_symmetric(&self) -> Result<bool, ChannelError> {
        is_symmetric(self)
    }
}

/// Validates a raw row-major matrix into a [`Dmc`].
///
/// Rows whose sum is within `1e-9` of one are renormalized; entries below
/// [`MIN_ENTRY`] are rejected.
pub fn validate(raw: Vec<Vec<f64>>) -> Result<Dmc, ChannelError> {
    let inputs = raw.len();
    let outputs = raw.first().map_or(0, Vec::len);
    if inputs < 2 || outputs < 2 {
        return Err(ChannelError::DegenerateShape { inputs, outputs });
    }
    let mut rows = Vec::with_capacity(inputs);
    for (row, values) in raw.into_iter().enumerate() {
        if values.len() != outputs {
            return Err(ChannelError::RaggedRow {
                row,
                expected: outputs,
                found: values.len(),
            });
        }
        for (col, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < MIN_ENTRY {
                return Err(ChannelError::NonPositive { row, col, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(ChannelError::RowSum { row, sum });
        }
        rows.push(Distribution::new(values).map_err(|_| ChannelError::RowSum { row, sum })?);
    }
    let matrix = ConditionalDistribution::new(rows).expect("shape checked above");
    let log = matrix
        .rows()
        .iter()
        .map(|r| r.weights().iter().map(|v| v.ln()).collect())
        .collect();
    let cdf = matrix
        .rows()
        .iter()
        .map(|r| {
            let mut acc = 0.0;
            let mut c: Vec<f64> = r
                .weights()
                .iter()
                .map(|v| {
                    acc += v;
                    acc
                })
                .collect();
            *c.last_mut().unwrap() = 1.0;
            c
        })
        .collect();
    Ok(Dmc {
        matrix,
        log,
        cdf,
        name: None,
    })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn same_multiset(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= PERMUTATION_TOL)
}

/// True iff the output alphabet splits into blocks where, inside each block,
/// rows are permutations of each other and columns are permutations of each
/// other (Gallager symmetry).
///
/// Columns can only share a block if they are permutations of each other, so
/// the search enumerates set partitions of each column-equivalence class
/// independently.
pub fn is_symmetric(w: &Dmc) -> Result<bool, ChannelError> {
    let outputs = w.outputs();
    if outputs > MAX_SYMMETRY_OUTPUTS {
        return Err(ChannelError::SymmetryUndecided { outputs });
    }
    let columns: Vec<Vec<f64>> = (0..outputs)
        .map(|y| sorted(w.rows().iter().map(|r| r.get(y)).collect()))
        .collect();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for y in 0..outputs {
        match classes
            .iter_mut()
            .find(|c| same_multiset(&columns[c[0]], &columns[y]))
        {
            Some(c) => c.push(y),
            None => classes.push(vec![y]),
        }
    }
    Ok(classes.iter().all(|class| {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        partition_search(w, class, 0, &mut blocks)
    }))
}

fn rows_are_permutations(w: &Dmc, block: &[usize]) -> bool {
    let first = sorted(block.iter().map(|&y| w.row(0).get(y)).collect());
    w.rows()
        .iter()
        .skip(1)
        .all(|r| same_multiset(&first, &sorted(block.iter().map(|&y| r.get(y)).collect())))
}

fn partition_search(w: &Dmc, class: &[usize], next: usize, blocks: &mut Vec<Vec<usize>>) -> bool {
    if next == class.len() {
        return blocks.iter().all(|b| rows_are_permutations(w, b));
    }
    let y = class[next];
    for i in 0..blocks.len() {
        blocks[i].push(y);
        if partition_search(w, class, next + 1, blocks) {
            return true;
        }
        blocks[i].pop();
    }
    blocks.push(vec![y]);
    let found = partition_search(w, class, next + 1, blocks);
    blocks.pop();
    found
}

/// On-disk channel description.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChannelFile {
    pub input_alphabet: usize,
    pub output_alphabet: usize,
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl ChannelFile {
    pub fn from_dmc(w: &Dmc) -> Self {
        Self {
            input_alphabet: w.inputs(),
            output_alphabet: w.outputs(),
            matrix: w.to_rows(),
            name: w.name.clone(),
        }
    }

    /// Parses JSON text; `path` is only used in error messages.
    pub fn parse(text: &str, path: &str) -> Result<Self, ChannelFileError> {
        let file: ChannelFile =
            serde_json::from_str(text).map_err(|e| ChannelFileError::Parse {
                path: path.to_string(),
                location: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            })?;
        if file.matrix.len() != file.input_alphabet {
            return Err(ChannelFileError::Parse {
                path: path.to_string(),
                location: "matrix".into(),
                message: format!(
                    "{} rows but input_alphabet is {}",
                    file.matrix.len(),
                    file.input_alphabet
                ),
            });
        }
        for (i, row) in file.matrix.iter().enumerate() {
            if row.len() != file.output_alphabet {
                return Err(ChannelFileError::Parse {
                    path: path.to_string(),
                    location: format!("matrix[{i}]"),
                    message: format!(
                        "{} entries but output_alphabet is {}",
                        row.len(),
                        file.output_alphabet
                    ),
                });
            }
        }
        Ok(file)
    }

    pub fn into_dmc(self, path: &str) -> Result<Dmc, ChannelFileError> {
        let name = self.name;
        let w = validate(self.matrix).map_err(|source| ChannelFileError::Invalid {
            path: path.to_string(),
            source,
        })?;
        Ok(match name {
            Some(n) => w.with_name(n),
            None => w,
        })
    }
}

pub fn load_channel(path: impl AsRef<Path>) -> Result<Dmc, ChannelFileError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ChannelFileError::Io {
        path: shown.clone(),
        source,
    })?;
    ChannelFile::parse(&text, &shown)?.into_dmc(&shown)
}

/// Writes the channel as pretty JSON. Floats use the shortest representation
/// that parses back to the same `f64`, so load after save is exact.
pub fn save_channel(w: &Dmc, path: impl AsRef<Path>) -> Result<(), ChannelFileError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&ChannelFile::from_dmc(w))
        .expect("channel file serialization cannot fail");
    text.push('\n');
    fs::write(path, text).map_err(|source| ChannelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}
