//! Empirical copula `Cₙ` and its checkerboard (multilinear) interpolation `C̄ₙ`.
//!
//! For a bivariate sample the copula keeps a prefix-count table
//! `prefix[a][b] = #{i : Rᵢ ≤ a, Sᵢ ≤ b}`, `0 ≤ a, b ≤ n`, so that both
//! `Cₙ` and `C̄ₙ` evaluate in O(1). For `m > 2` the table would need
//! `(n+1)^m` entries; knots are counted directly instead.
//!
//! Arguments outside `[0,1]` are rejected, never clamped.

use serde::{Deserialize, Serialize};

use crate::error::{QdepError, Result};
use crate::ranks::PseudoSample;

/// Immutable copula estimator built from rank vectors.
#[derive(Debug, Clone)]
pub struct CheckerboardCopula {
    n: usize,
    ranks: Vec<Vec<u32>>,
    /// Row-major `(n+1) × (n+1)` prefix counts; empty when `m > 2`.
    prefix: Vec<u32>,
}

/// Exact null mean and variance of `C̄ₙ(u,v)` under independence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Splits `n·t` into its integer part and fraction.
///
/// Products within a few ulps of an integer are snapped onto the knot so
/// that `t = j/n` evaluates exactly at the lattice point.
pub(crate) fn split_coordinate(n: usize, t: f64) -> (usize, f64) {
    let x = n as f64 * t;
    let r = x.round();
    if (x - r).abs() <= 4.0 * f64::EPSILON * r.max(1.0) {
        return (r as usize, 0.0);
    }
    let a = x.floor();
    (a as usize, x - a)
}

fn check_unit(name: &str, t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(QdepError::domain(format!("{name} = {t} is outside [0, 1]")))
    }
}

impl CheckerboardCopula {
    pub fn new(pseudo: &PseudoSample) -> Self {
        Self::from_valid_ranks(pseudo.ranks().to_vec())
    }

    /// Validates that each vector is a permutation of `1..=n`.
    pub fn from_ranks(ranks: Vec<Vec<u32>>) -> Result<Self> {
        let pseudo = PseudoSample::from_ranks(ranks)?;
        Ok(Self::new(&pseudo))
    }

    pub(crate) fn from_valid_ranks(ranks: Vec<Vec<u32>>) -> Self {
        let n = ranks[0].len();
        let prefix = if ranks.len() == 2 {
            let mut prefix = Vec::new();
            build_prefix(&ranks[0], &ranks[1], &mut prefix);
            prefix
        } else {
            Vec::new()
        };
        Self { n, ranks, prefix }
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

    /// `#{i : Rᵢ ≤ a, Sᵢ ≤ b}` for the bivariate table.
    #[inline]
    pub fn prefix_count(&self, a: usize, b: usize) -> u32 {
        self.prefix[a * (self.n + 1) + b]
    }

    pub(crate) fn prefix_table(&self) -> &[u32] {
        &self.prefix
    }

    fn require_bivariate(&self) -> Result<()> {
        if self.ranks.len() == 2 {
            Ok(())
        } else {
            Err(QdepError::domain(format!(
                "bivariate evaluation on a {}-dimensional copula",
                self.ranks.len()
            )))
        }
    }

    /// Classical empirical copula `Cₙ(u,v) = prefix[⌊nu⌋, ⌊nv⌋] / n`.
    pub fn empirical(&self, u: f64, v: f64) -> Result<f64> {
        self.require_bivariate()?;
        check_unit("u", u)?;
        check_unit("v", v)?;
        let (a, _) = split_coordinate(self.n, u);
        let (b, _) = split_coordinate(self.n, v);
        Ok(self.prefix_count(a, b) as f64 / self.n as f64)
    }

    /// Bilinear interpolation of `Cₙ` between the four surrounding knots.
    pub fn checkerboard(&self, u: f64, v: f64) -> Result<f64> {
        self.require_bivariate()?;
        check_unit("u", u)?;
        check_unit("v", v)?;
        Ok(self.checkerboard_unchecked(u, v))
    }

    pub(crate) fn checkerboard_unchecked(&self, u: f64, v: f64) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let (a, fu) = split_coordinate(n, u);
        let (b, fv) = split_coordinate(n, v);
        if fu == 0.0 && fv == 0.0 {
            return self.prefix_count(a, b) as f64 / nf;
        }
        // a + 1 ≤ n whenever fu > 0 because u ≤ 1
        let c00 = self.prefix_count(a, b) as f64;
        if fu == 0.0 {
            let c01 = self.prefix_count(a, b + 1) as f64;
            return ((1.0 - fv) * c00 + fv * c01) / nf;
        }
        let c10 = self.prefix_count(a + 1, b) as f64;
        if fv == 0.0 {
            return ((1.0 - fu) * c00 + fu * c10) / nf;
        }
        let c01 = self.prefix_count(a, b + 1) as f64;
        let c11 = self.prefix_count(a + 1, b + 1) as f64;
        ((1.0 - fu) * (1.0 - fv) * c00
            + fu * (1.0 - fv) * c10
            + (1.0 - fu) * fv * c01
            + fu * fv * c11)
            / nf
    }

    /// `m`-variate empirical copula `Cₙ(t) = n⁻¹ #{i : R⁽ᵏ⁾ᵢ ≤ ⌊n t_k⌋ ∀k}`.
    pub fn empirical_m(&self, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        let limits: Vec<u32> = t
            .iter()
            .map(|&tk| split_coordinate(self.n, tk).0 as u32)
            .collect();
        let count = (0..self.n)
            .filter(|&i| self.ranks.iter().zip(&limits).all(|(r, &l)| r[i] <= l))
            .count();
        Ok(count as f64 / self.n as f64)
    }

    /// Multilinear interpolation of `Cₙ` over the `2ᵐ` surrounding knots.
    ///
    /// Evaluated per observation as
    /// `n⁻¹ Σᵢ Πₖ {1(R⁽ᵏ⁾ᵢ ≤ aₖ) + fₖ·1(R⁽ᵏ⁾ᵢ = aₖ+1)}` with `n tₖ = aₖ + fₖ`.
    pub fn multilinear(&self, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        let split: Vec<(u32, f64)> = t
            .iter()
            .map(|&tk| {
                let (a, f) = split_coordinate(self.n, tk);
                (a as u32, f)
            })
            .collect();
        let mut total = 0.0;
        for i in 0..self.n {
            let mut w = 1.0;
            for (r, &(a, f)) in self.ranks.iter().zip(&split) {
                let ri = r[i];
                w *= if ri <= a {
                    1.0
                } else if ri == a + 1 {
                    f
                } else {
                    0.0
                };
                if w == 0.0 {
                    break;
                }
            }
            total += w;
        }
        Ok(total / self.n as f64)
    }

    fn check_point(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.ranks.len() {
            return Err(QdepError::domain(format!(
                "point has {} coordinates, copula has dimension {}",
                t.len(),
                self.ranks.len()
            )));
        }
        for (k, &tk) in t.iter().enumerate() {
            check_unit(&format!("t[{k}]"), tk)?;
        }
        Ok(())
    }
}

/// Fills `out` with the `(n+1)²` prefix counts of the pairing `(r, s)`.
pub(crate) fn build_prefix(r: &[u32], s: &[u32], out: &mut Vec<u32>) {
    let n = r.len();
    let w = n + 1;
    // column rank of the observation holding row rank a
    let mut col_of_row = vec![0usize; w];
    for (&ri, &si) in r.iter().zip(s) {
        col_of_row[ri as usize] = si as usize;
    }
    out.clear();
    out.resize(w * w, 0);
    for a in 1..=n {
        let (prev, row) = out[(a - 1) * w..(a + 1) * w].split_at_mut(w);
        let step = col_of_row[a];
        row[..step].copy_from_slice(&prev[..step]);
        for (dst, &src) in row[step..].iter_mut().zip(&prev[step..]) {
            *dst = src + 1;
        }
    }
}

/// `εₙ(t) = n⁻¹ {nt − ⌊nt⌋}{1 − (nt − ⌊nt⌋)}`.
pub fn epsilon_n(n: usize, t: f64) -> f64 {
    let (_, f) = split_coordinate(n, t);
    f * (1.0 - f) / n as f64
}

/// Mean `uv` and variance `(n−1)⁻¹{u(1−u)−εₙ(u)}{v(1−v)−εₙ(v)}` of `C̄ₙ(u,v)`
/// under independence.
pub fn null_moments(n: usize, u: f64, v: f64) -> Result<NullMoments> {
    if n < 2 {
        return Err(QdepError::InvalidSample(format!("n = {n} < 2")));
    }
    check_unit("u", u)?;
    check_unit("v", v)?;
    let su = (u * (1.0 - u) - epsilon_n(n, u)).max(0.0);
    let sv = (v * (1.0 - v) - epsilon_n(n, v)).max(0.0);
    Ok(NullMoments {
        mean: u * v,
        variance: su * sv / (n - 1) as f64,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ranks::{pseudo_observations, Sample};
    use crate::rng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn cop(r: &[u32], s: &[u32]) -> CheckerboardCopula {
        CheckerboardCopula::from_ranks(vec![r.to_vec(), s.to_vec()]).unwrap()
    }

    fn random_cop(n: usize, seed: u64) -> CheckerboardCopula {
        let mut g = rng::stream(seed, 0);
        let mut r: Vec<u32> = (1..=n as u32).collect();
        let mut s = r.clone();
        r.shuffle(&mut g);
        s.shuffle(&mut g);
        cop(&r, &s)
    }

    /// Scalar transcription of the four-knot bilinear formula, counting
    /// points directly instead of using the prefix table.
    fn bilinear_by_counting(r: &[u32], s: &[u32], u: f64, v: f64) -> f64 {
        let n = r.len() as f64;
        let cn = |a: f64, b: f64| {
            r.iter()
                .zip(s)
                .filter(|(&ri, &si)| ri as f64 <= a && si as f64 <= b)
                .count() as f64
                / n
        };
        let (nu, nv) = (n * u, n * v);
        let (a, b) = (nu.floor(), nv.floor());
        (1.0 - nu + a) * (1.0 - nv + b) * cn(a, b)
            + (nu - a) * (1.0 - nv + b) * cn(a + 1.0, b)
            + (1.0 - nu + a) * (nv - b) * cn(a, b + 1.0)
            + (nu - a) * (nv - b) * cn(a + 1.0, b + 1.0)
    }

    #[test]
    fn empirical_examples() {
        let c = cop(&[1, 2], &[1, 2]);
        assert_eq!(c.empirical(0.5, 0.5).unwrap(), 0.5);
        assert_eq!(c.empirical(1.0, 1.0).unwrap(), 1.0);
        // points (1,2), (2,3), (3,1): only (1,2) lies in [0,2/3]²
        let c = cop(&[1, 2, 3], &[2, 3, 1]);
        assert_eq!(c.empirical(2.0 / 3.0, 2.0 / 3.0).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn checkerboard_examples() {
        let c = random_cop(17, 4);
        for u in [0.0, 0.3, 1.0] {
            assert!((c.checkerboard(u, 1.0).unwrap() - u).abs() < 1e-15);
            assert!((c.checkerboard(1.0, u).unwrap() - u).abs() < 1e-15);
            assert_eq!(c.checkerboard(u, 0.0).unwrap(), 0.0);
            assert_eq!(c.checkerboard(0.0, u).unwrap(), 0.0);
        }
        assert_eq!(cop(&[1, 2], &[1, 2]).checkerboard(0.5, 0.5).unwrap(), 0.5);

        // n=3, ⌊1.5⌋ = 1 with fraction 0.5 on both axes:
        // knots C₃(1/3,1/3)=0, C₃(2/3,1/3)=0, C₃(1/3,2/3)=1/3, C₃(2/3,2/3)=1/3
        // → 0.25·(0 + 0 + 1/3 + 1/3) = 1/6
        let c = cop(&[1, 2, 3], &[2, 3, 1]);
        let expected = bilinear_by_counting(&[1, 2, 3], &[2, 3, 1], 0.5, 0.5);
        assert!((expected - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.checkerboard(0.5, 0.5).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn checkerboard_matches_direct_counting() {
        let mut g = rng::stream(5, 5);
        for seed in 0..20 {
            let n = 2 + seed as usize * 3;
            let c = random_cop(n, seed);
            for _ in 0..200 {
                let (u, v): (f64, f64) = (g.random(), g.random());
                let direct = bilinear_by_counting(&c.ranks()[0], &c.ranks()[1], u, v);
                assert!((c.checkerboard(u, v).unwrap() - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn domain_errors() {
        let c = random_cop(5, 1);
        assert!(matches!(c.checkerboard(-0.1, 0.5), Err(QdepError::Domain(_))));
        assert!(matches!(c.empirical(0.5, 1.5), Err(QdepError::Domain(_))));
        assert!(matches!(c.checkerboard(f64::NAN, 0.5), Err(QdepError::Domain(_))));
        assert!(matches!(c.multilinear(&[0.5]), Err(QdepError::Domain(_))));
        assert!(null_moments(4, 1.2, 0.5).is_err());
    }

    #[test]
    fn frechet_bounds_on_probe_grid() {
        for seed in 0..5 {
            let c = random_cop(37, seed);
            for i in 0..=199 {
                for j in 0..=199 {
                    let (u, v) = (i as f64 / 199.0, j as f64 / 199.0);
                    let x = c.checkerboard(u, v).unwrap();
                    assert!(x >= (u + v - 1.0).max(0.0) - 1e-14 && x <= u.min(v) + 1e-14);
                }
            }
        }
    }

    #[test]
    fn two_increasing() {
        let mut g = rng::stream(9, 0);
        for seed in 0..10 {
            let c = random_cop(23, seed);
            for _ in 0..2000 {
                let (mut u1, mut u2, mut v1, mut v2): (f64, f64, f64, f64) =
                    (g.random(), g.random(), g.random(), g.random());
                if u1 > u2 {
                    std::mem::swap(&mut u1, &mut u2);
                }
                if v1 > v2 {
                    std::mem::swap(&mut v1, &mut v2);
                }
                let vol = c.checkerboard(u2, v2).unwrap() - c.checkerboard(u1, v2).unwrap()
                    - c.checkerboard(u2, v1).unwrap()
                    + c.checkerboard(u1, v1).unwrap();
                assert!(vol >= -1e-12, "{vol}");
            }
        }
    }

    #[test]
    fn distance_to_empirical_copula() {
        let mut g = rng::stream(10, 0);
        for n in [3usize, 10, 64] {
            let c = random_cop(n, n as u64);
            for _ in 0..10_000 {
                let (u, v): (f64, f64) = (g.random(), g.random());
                let gap = (c.empirical(u, v).unwrap() - c.checkerboard(u, v).unwrap()).abs();
                assert!(gap <= 2.0 / n as f64 + 1e-15);
            }
        }
    }

    #[test]
    fn reflection_at_knots() {
        let c = random_cop(19, 77);
        let n = 19u32;
        let s_rev: Vec<u32> = c.ranks()[1].iter().map(|s| n + 1 - s).collect();
        let cr = cop(&c.ranks()[0], &s_rev);
        for j in 0..=19 {
            for k in 0..=19 {
                let lhs = cr.prefix_count(j, k) as i64;
                let rhs = j as i64 - c.prefix_count(j, 19 - k) as i64;
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn null_moments_examples() {
        let m = null_moments(4, 0.5, 0.5).unwrap();
        assert_eq!(m.mean, 0.25);
        assert!((m.variance - 0.0625 / 3.0).abs() < 1e-15);
        assert!((epsilon_n(4, 0.125) - 0.0625).abs() < 1e-15);
        let m = null_moments(9, 0.0, 0.7).unwrap();
        assert_eq!((m.mean, m.variance), (0.0, 0.0));
    }

    /// All permutations of `1..=n` (Heap's algorithm).
    pub(crate) fn permutations(n: usize) -> Vec<Vec<u32>> {
        fn heap(k: usize, a: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if k == 1 {
                out.push(a.clone());
                return;
            }
            heap(k - 1, a, out);
            for i in 0..k - 1 {
                if k.is_multiple_of(2) {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
                heap(k - 1, a, out);
            }
        }
        let mut a: Vec<u32> = (1..=n as u32).collect();
        let mut out = Vec::new();
        heap(n, &mut a, &mut out);
        out
    }

    #[test]
    fn null_moments_match_exhaustive_enumeration() {
        // n = 4, u = v = 0.125 (εₙ = 0.0625) plus a few off-knot points
        let n = 4;
        let identity: Vec<u32> = (1..=4).collect();
        let perms = permutations(n);
        assert_eq!(perms.len(), 24);
        for (u, v) in [(0.125, 0.125), (0.3, 0.8), (0.5, 0.61), (0.9, 0.05)] {
            let vals: Vec<f64> = perms
                .iter()
                .map(|s| cop(&identity, s).checkerboard(u, v).unwrap())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            let m = null_moments(n, u, v).unwrap();
            assert!((mean - m.mean).abs() < 1e-12);
            assert!((var - m.variance).abs() < 1e-12, "{u} {v}: {var} vs {}", m.variance);
        }
    }

    #[test]
    fn multilinear_reduces_to_bilinear() {
        let mut g = rng::stream(12, 0);
        let c = random_cop(41, 3);
        for _ in 0..1000 {
            let (u, v): (f64, f64) = (g.random(), g.random());
            let m = c.multilinear(&[u, v]).unwrap();
            assert!((m - c.checkerboard(u, v).unwrap()).abs() < 1e-14);
        }
        assert_eq!(c.multilinear(&[0.0, 0.4]).unwrap(), 0.0);
        assert_eq!(c.empirical_m(&[0.5, 0.5]).unwrap(), c.empirical(0.5, 0.5).unwrap());
    }

    #[test]
    fn multilinear_trivariate_is_unbiased_under_independence() {
        let n = 4;
        let identity: Vec<u32> = (1..=4).collect();
        let perms = permutations(n);
        for t in [[0.3, 0.55, 0.8], [0.125, 0.9, 0.5], [0.25, 0.25, 0.25]] {
            let mut sum = 0.0;
            for p2 in &perms {
                for p3 in &perms {
                    let c = CheckerboardCopula::from_ranks(vec![
                        identity.clone(),
                        p2.clone(),
                        p3.clone(),
                    ])
                    .unwrap();
                    let x = c.multilinear(&t).unwrap();
                    assert_eq!(c.multilinear(&[t[0], 0.0, t[2]]).unwrap(), 0.0);
                    sum += x;
                }
            }
            let mean = sum / (perms.len() * perms.len()) as f64;
            assert!((mean - t.iter().product::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn concordant_sample_prefix() {
        let s = Sample::bivariate(vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = CheckerboardCopula::new(&pseudo_observations(&s, 0).unwrap());
        for a in 0..=4 {
            assert_eq!(c.prefix_count(a, a), a as u32);
            assert_eq!(c.prefix_count(a, 0), 0);
        }
        assert_eq!(c.prefix_count(4, 4), 4);
    }
}
