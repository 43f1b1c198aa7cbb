//! Null-hypothesis replicate engine shared by barrier calibration, the
//! global tests and Max BET.
//!
//! Under independence with continuous margins the two rank vectors are
//! independent uniform permutations, so a replicate is just a pair of
//! shuffles drawn from `rng::stream(master_seed, replicate_index)`. Results
//! are collected in replicate order and do not depend on the thread count.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::copula::build_prefix;
use crate::dependence::{DyadicGrid, GridEvaluator};
use crate::error::{QdepError, Result};
use crate::rng;

/// Smallest number of replicates accepted for a calibration.
pub const MIN_RUNS: usize = 1000;

pub(crate) fn check_runs(runs: usize) -> Result<()> {
    if runs < MIN_RUNS {
        return Err(QdepError::config(format!(
            "runs = {runs} is below the minimum of {MIN_RUNS}"
        )));
    }
    Ok(())
}

/// Uniform random permutation of `1..=n`.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut p: Vec<u32> = (1..=n as u32).collect();
    p.shuffle(rng);
    p
}

/// The rank pair of replicate `index`.
pub fn null_ranks(n: usize, master_seed: u64, index: u64) -> (Vec<u32>, Vec<u32>) {
    let mut g = rng::stream(master_seed, index);
    let r = random_permutation(n, &mut g);
    let s = random_permutation(n, &mut g);
    (r, s)
}

/// Applies `f` to the ranks of each of `runs` null replicates.
pub fn map_rank_pairs<T, F>(n: usize, runs: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[u32], &[u32]) -> T + Sync,
{
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let (r, s) = null_ranks(n, master_seed, i);
            f(&r, &s)
        })
        .collect()
}

struct Scratch {
    prefix: Vec<u32>,
    q: Vec<f64>,
}

/// Applies `f` to the ranks and the `q̄ₙ` grid values (row-major, `d²`) of
/// each of `runs` null replicates.
pub fn map_surfaces<T, F>(
    n: usize,
    grid: &DyadicGrid,
    runs: usize,
    master_seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[u32], &[u32], &[f64]) -> T + Sync,
{
    let eval = GridEvaluator::new(n, grid)?;
    let d = eval.size();
    Ok((0..runs as u64)
        .into_par_iter()
        .map_init(
            || Scratch {
                prefix: Vec::with_capacity((n + 1) * (n + 1)),
                q: vec![0.0; d * d],
            },
            |sc, i| {
                let (r, s) = null_ranks(n, master_seed, i);
                build_prefix(&r, &s, &mut sc.prefix);
                eval.fill(&sc.prefix, &mut sc.q);
                f(&r, &s, &sc.q)
            },
        )
        .collect())
}
