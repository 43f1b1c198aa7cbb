//! Randomized ranks and pseudo-observations.
//!
//! Ties are broken uniformly at random from a seeded stream, so the ranks of
//! every column are always an exact permutation of `1..=n`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QdepError, Result};
use crate::rng;

/// Raw `m`-variate sample stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    columns: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl Sample {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_labels(columns, None)
    }

    pub fn with_labels(columns: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        if columns.len() < 2 {
            return Err(QdepError::InvalidSample(format!(
                "need at least 2 columns, got {}",
                columns.len()
            )));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(QdepError::InvalidSample(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if let Some((k, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(QdepError::InvalidSample(format!(
                "column {k} has length {} but column 0 has length {n}",
                c.len()
            )));
        }
        for (k, c) in columns.iter().enumerate() {
            if let Some(i) = c.iter().position(|x| !x.is_finite()) {
                return Err(QdepError::InvalidData(format!(
                    "non-finite value {} at row {i} of column {k}",
                    c[i]
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != columns.len() {
                return Err(QdepError::InvalidSample(format!(
                    "{} labels for {} columns",
                    l.len(),
                    columns.len()
                )));
            }
        }
        Ok(Self { columns, labels })
    }

    pub fn bivariate(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(vec![x, y])
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Randomized ranks of a [`Sample`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoSample {
    n: usize,
    ranks: Vec<Vec<u32>>,
    tie_count: Vec<usize>,
    seed_trace: u64,
}

impl PseudoSample {
    /// Wraps rank vectors that are already permutations of `1..=n`.
    pub fn from_ranks(ranks: Vec<Vec<u32>>) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(QdepError::InvalidSample("need at least 2 rank vectors".into()));
        }
        let n = ranks[0].len();
        if n < 2 {
            return Err(QdepError::InvalidSample(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        for (k, r) in ranks.iter().enumerate() {
            if !is_permutation(r, n) {
                return Err(QdepError::InvalidSample(format!(
                    "rank vector {k} is not a permutation of 1..={n}"
                )));
            }
        }
        let m = ranks.len();
        Ok(Self {
            n,
            ranks,
            tie_count: vec![0; m],
            seed_trace: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.ranks.len()
    }

    pub fn ranks(&self) -> &[Vec<u32>] {
        &self.ranks
    }

    pub fn rank_column(&self, k: usize) -> &[u32] {
        &self.ranks[k]
    }

    /// Number of tied groups that were broken, per column.
    pub fn tie_count(&self) -> &[usize] {
        &self.tie_count
    }

    pub fn seed_trace(&self) -> u64 {
        self.seed_trace
    }

    /// `R/n` for column `k`.
    pub fn pseudo_observations(&self, k: usize) -> Vec<f64> {
        let n = self.n as f64;
        self.ranks[k].iter().map(|&r| r as f64 / n).collect()
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select(&self, cols: &[usize]) -> Result<Self> {
        if cols.len() < 2 || cols.iter().any(|&c| c >= self.ranks.len()) {
            return Err(QdepError::InvalidSample(format!(
                "invalid column selection {cols:?} for {} columns",
                self.ranks.len()
            )));
        }
        Ok(Self {
            n: self.n,
            ranks: cols.iter().map(|&c| self.ranks[c].clone()).collect(),
            tie_count: cols.iter().map(|&c| self.tie_count[c]).collect(),
            seed_trace: self.seed_trace,
        })
    }
}

fn is_permutation(r: &[u32], n: usize) -> bool {
    let mut seen = vec![false; n + 1];
    for &v in r {
        let v = v as usize;
        if v == 0 || v > n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    r.len() == n
}

/// Ranks of `values` with ties ordered uniformly at random.
///
/// Returns the rank vector and the number of tied groups that were broken.
/// The stream is consumed only when ties are present.
pub fn rank_vector_with_ties<R: Rng + ?Sized>(
    values: &[f64],
    tie_stream: &mut R,
) -> Result<(Vec<u32>, usize)> {
    let n = values.len();
    if n < 2 {
        return Err(QdepError::InvalidSample(format!(
            "need at least 2 values to rank, got {n}"
        )));
    }
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(QdepError::InvalidData(format!(
            "non-finite value {} at position {i}",
            values[i]
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut groups = 0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        // -0.0 and 0.0 are the same observation value
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            groups += 1;
            order[start..end].shuffle(tie_stream);
        }
        start = end;
    }

    let mut ranks = vec![0u32; n];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = (pos + 1) as u32;
    }
    Ok((ranks, groups))
}

pub fn rank_vector<R: Rng + ?Sized>(values: &[f64], tie_stream: &mut R) -> Result<Vec<u32>> {
    rank_vector_with_ties(values, tie_stream).map(|(r, _)| r)
}

/// Randomized ranks of every column; column `k` uses stream `(master_seed, k)`.
pub fn pseudo_observations(sample: &Sample, master_seed: u64) -> Result<PseudoSample> {
    let mut ranks = Vec::with_capacity(sample.dim());
    let mut tie_count = Vec::with_capacity(sample.dim());
    for (k, col) in sample.columns().iter().enumerate() {
        let mut stream = rng::stream(master_seed, k as u64);
        let (r, g) = rank_vector_with_ties(col, &mut stream)?;
        ranks.push(r);
        tie_count.push(g);
    }
    Ok(PseudoSample {
        n: sample.n(),
        ranks,
        tie_count,
        seed_trace: master_seed,
    })
}
