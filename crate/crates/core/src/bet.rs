//! Depth-2 binary expansion symmetry statistics.
//!
//! With the Rademacher functions `r₁`, `r₂` and Walsh functions `w₀ ≡ 1`,
//! `w₁ = r₁`, `w₂ = r₂`, `w₃ = r₁r₂`, the nine symmetry statistics are the
//! empirical Fourier coefficients
//!
//! ```text
//! W_ij = (1/n) Σₖ wᵢ(ûₖ) wⱼ(v̂ₖ),   i, j ∈ {1, 2, 3}
//! ```
//!
//! and `S_ij = n·W_ij` is the count scale used by Zhang (2019). The Walsh
//! functions are evaluated at the rank midpoints `(R − ½)/n`, which never
//! fall on a dyadic jump. Zhang's labels map index 1, 2, 3 to the binary
//! strings `10`, `01`, `11`.

use serde::{Deserialize, Serialize};

use crate::error::{QdepError, Result};
use crate::global_test::{p_value, NullSample, StatisticKind};
use crate::ranks::PseudoSample;

/// Walsh function `w_index(s)` on `[0, 1)`.
pub fn walsh(index: usize, s: f64) -> Result<i32> {
    if !(0.0..1.0).contains(&s) {
        return Err(QdepError::domain(format!("{s} is not in [0, 1)")));
    }
    let r1 = if s < 0.5 { 1 } else { -1 };
    let quarter = (4.0 * s) as usize;
    let r2 = if quarter.is_multiple_of(2) { 1 } else { -1 };
    match index {
        0 => Ok(1),
        1 => Ok(r1),
        2 => Ok(r2),
        3 => Ok(r1 * r2),
        _ => Err(QdepError::domain(format!("Walsh index {index} is not in 0..=3"))),
    }
}

/// `[w₁, w₂, w₃]` at `(rank − ½)/n`, in integer arithmetic.
#[inline]
fn walsh_at_rank(rank: u32, n: usize) -> [i32; 3] {
    let x = 2 * rank as usize - 1; // s = x / 2n
    let r1 = if x < n { 1 } else { -1 };
    let quarter = 2 * x / n; // ⌊4s⌋
    let r2 = if quarter.is_multiple_of(2) { 1 } else { -1 };
    [r1, r2, r1 * r2]
}

fn s_matrix(r: &[u32], s: &[u32]) -> [[i64; 3]; 3] {
    let n = r.len();
    let mut out = [[0i64; 3]; 3];
    for (&a, &b) in r.iter().zip(s) {
        let wa = walsh_at_rank(a, n);
        let wb = walsh_at_rank(b, n);
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += (wa[i] * wb[j]) as i64;
            }
        }
    }
    out
}

/// `max |W_ij|` for a rank pairing.
pub fn max_abs_w(r: &[u32], s: &[u32]) -> f64 {
    let m = s_matrix(r, s).iter().flatten().map(|x| x.abs()).max().unwrap_or(0);
    m as f64 / r.len() as f64
}

/// Zhang's name for index `i ∈ {1, 2, 3}`.
pub fn zhang_code(i: usize) -> &'static str {
    match i {
        1 => "10",
        2 => "01",
        _ => "11",
    }
}

/// `S_(a,b)` label of the entry `(i, j)`, one-based.
pub fn zhang_label(i: usize, j: usize) -> String {
    format!("S_({},{})", zhang_code(i), zhang_code(j))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryStats {
    pub n: usize,
    /// `S[i−1][j−1]`, integer count scale.
    pub s: [[i64; 3]; 3],
    /// `W = S/n`.
    pub w: [[f64; 3]; 3],
}

impl SymmetryStats {
    /// `S` at one-based index `(i, j)`.
    pub fn s_at(&self, i: usize, j: usize) -> i64 {
        self.s[i - 1][j - 1]
    }

    pub fn w_at(&self, i: usize, j: usize) -> f64 {
        self.w[i - 1][j - 1]
    }
}

pub fn symmetry_from_ranks(r: &[u32], s: &[u32]) -> SymmetryStats {
    let n = r.len();
    let sm = s_matrix(r, s);
    let mut w = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            w[i][j] = sm[i][j] as f64 / n as f64;
        }
    }
    SymmetryStats { n, s: sm, w }
}

pub fn symmetry_statistics(pseudo: &PseudoSample) -> Result<SymmetryStats> {
    if pseudo.dim() != 2 {
        return Err(QdepError::InvalidSample(format!(
            "symmetry statistics need 2 columns, got {}",
            pseudo.dim()
        )));
    }
    Ok(symmetry_from_ranks(pseudo.rank_column(0), pseudo.rank_column(1)))
}

pub const P_VALUE_CONVENTION: &str =
    "Monte Carlo p-value of max |W| against its simulated null law (add-one rule)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSelection {
    /// One-based `(i₀, j₀)`.
    pub index: (usize, usize),
    pub sign: i32,
    /// `S` at the selected index.
    pub statistic: i64,
    pub w: f64,
    pub p_value: f64,
    pub zhang_label: String,
    pub s_matrix: [[i64; 3]; 3],
    pub p_value_convention: String,
}

/// Selects the entry of largest `|W|` (first in row-major order on ties)
/// and attaches the Monte Carlo p-value of `max |W|`.
pub fn max_bet_select(pseudo: &PseudoSample, null: &NullSample) -> Result<PatternSelection> {
    if null.kind != StatisticKind::MaxBet {
        return Err(QdepError::config(format!(
            "pattern selection needs a Max BET null sample, got {}",
            null.kind.name()
        )));
    }
    if null.config.n != pseudo.n() {
        return Err(QdepError::config(format!(
            "null sample was calibrated for n = {}, data have n = {}",
            null.config.n,
            pseudo.n()
        )));
    }
    let st = symmetry_statistics(pseudo)?;
    let mut best = (1, 1);
    for i in 1..=3 {
        for j in 1..=3 {
            if st.s_at(i, j).abs() > st.s_at(best.0, best.1).abs() {
                best = (i, j);
            }
        }
    }
    let value = st.s_at(best.0, best.1);
    let observed = max_abs_w(pseudo.rank_column(0), pseudo.rank_column(1));
    Ok(PatternSelection {
        index: best,
        sign: if value < 0 { -1 } else { 1 },
        statistic: value,
        w: st.w_at(best.0, best.1),
        p_value: p_value(observed, null),
        zhang_label: zhang_label(best.0, best.1),
        s_matrix: st.s,
        p_value_convention: P_VALUE_CONVENTION.into(),
    })
}
