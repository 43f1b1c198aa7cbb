//! Quantile dependence function: population form, checkerboard estimator,
//! dyadic-grid surfaces and the multivariate extension.
//!
//! On a dyadic grid `p_j = j/D`, `D = 2^{s+1}`, the estimator has an exact
//! integer numerator. With `n p_j = a_j + r_j/D`,
//!
//! ```text
//! D²·n·(C̄ₙ(p_j, p_k) − p_j p_k) = Σ over the four knots of integer weights × prefix counts − n·j·k
//! ```
//!
//! and `q̄ₙ(p_j, p_k) = M_{jk} / (n √(j(D−j)·k(D−k)))`. Evaluating through
//! this form makes column exchange and sign reflection bit-exact on the grid.

use serde::{Deserialize, Serialize};

use crate::copula::CheckerboardCopula;
use crate::error::{QdepError, Result};

/// Inspection points `p_{s,j} = j / 2^{s+1}`, `j = 1..=d`, `d = 2^{s+1} − 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGrid {
    s: u32,
}

/// Deepest supported grid, `d = 2^{16} − 1`.
pub const MAX_DEPTH: u32 = 15;

impl DyadicGrid {
    pub fn new(s: u32) -> Result<Self> {
        if s > MAX_DEPTH {
            return Err(QdepError::config(format!(
                "grid depth {s} exceeds the supported maximum {MAX_DEPTH}"
            )));
        }
        Ok(Self { s })
    }

    /// Grid with `d` points; `d` must be of the form `2^{s+1} − 1`.
    pub fn from_size(d: usize) -> Result<Self> {
        match depth_for_size(d) {
            Some(s) => Self::new(s),
            None => {
                let (lo, hi) = nearest_valid_sizes(d);
                let hint = match lo {
                    Some(lo) => format!("nearest valid values are {lo} and {hi}"),
                    None => format!("smallest valid value is {hi}"),
                };
                Err(QdepError::config(format!(
                    "grid size d = {d} is not of the form 2^(s+1) - 1; {hint}"
                )))
            }
        }
    }

    /// Largest grid with `d ≤ n` (at least the one-point grid `d = 1`).
    pub fn default_for(n: usize) -> Self {
        let mut s = 0;
        while s < MAX_DEPTH && (1usize << (s + 2)) - 1 <= n {
            s += 1;
        }
        Self { s }
    }

    pub fn depth(&self) -> u32 {
        self.s
    }

    pub fn size(&self) -> usize {
        (1usize << (self.s + 1)) - 1
    }

    /// `D = d + 1 = 2^{s+1}`.
    pub fn denominator(&self) -> usize {
        1usize << (self.s + 1)
    }

    /// `p_j` for `j = 1..=d`.
    pub fn point(&self, j: usize) -> f64 {
        j as f64 / self.denominator() as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (1..=self.size()).map(|j| self.point(j)).collect()
    }
}

fn depth_for_size(d: usize) -> Option<u32> {
    let big = d.checked_add(1)?;
    if big >= 2 && big.is_power_of_two() {
        Some(big.trailing_zeros() - 1)
    } else {
        None
    }
}

/// Valid grid sizes bracketing `d`.
pub fn nearest_valid_sizes(d: usize) -> (Option<usize>, usize) {
    let mut hi = 1usize;
    while hi < d {
        hi = hi * 2 + 1;
    }
    let lo = if hi > d { Some((hi - 1) / 2).filter(|&l| l >= 1) } else { None };
    if hi == d {
        (Some(d), d)
    } else {
        (lo, hi)
    }
}

/// Values of `q̄ₙ` on a `d × d` dyadic grid.
///
/// `q[j][k]` (row-major, 0-based) is `q̄ₙ(p_{j+1}, p_{k+1})`; the first
/// coordinate indexes rows. `Q̄ₙ = scale · q̄ₙ` with `scale = √n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSurface {
    grid: DyadicGrid,
    n: usize,
    q: Vec<f64>,
    scale: f64,
}

impl QSurface {
    /// Wraps precomputed values. `q` must hold `d²` finite entries.
    pub fn from_values(grid: DyadicGrid, n: usize, q: Vec<f64>) -> Result<Self> {
        let d = grid.size();
        if q.len() != d * d {
            return Err(QdepError::config(format!(
                "surface has {} values, grid needs {}",
                q.len(),
                d * d
            )));
        }
        if let Some(x) = q.iter().find(|x| !x.is_finite()) {
            return Err(QdepError::InvalidData(format!("non-finite surface value {x}")));
        }
        Ok(Self {
            grid,
            n,
            q,
            scale: (n as f64).sqrt(),
        })
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.grid.size()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    pub fn q(&self, j: usize, k: usize) -> f64 {
        self.q[j * self.size() + k]
    }

    /// `Q̄ₙ = √n · q̄ₙ` at grid indices `(j, k)`.
    #[inline]
    pub fn big_q(&self, j: usize, k: usize) -> f64 {
        self.scale * self.q(j, k)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let d = self.size();
        &self.q[j * d..(j + 1) * d]
    }

    pub fn transpose(&self) -> Self {
        let d = self.size();
        let mut q = vec![0.0; d * d];
        for j in 0..d {
            for k in 0..d {
                q[k * d + j] = self.q[j * d + k];
            }
        }
        Self { q, ..self.clone() }
    }
}

/// Precomputed per-grid constants for repeated surface evaluation.
#[derive(Debug, Clone)]
pub(crate) struct GridEvaluator {
    n: usize,
    d: usize,
    big_d: i64,
    /// `⌊n p_j⌋`
    floor: Vec<usize>,
    /// `D·(n p_j − ⌊n p_j⌋)`
    rem: Vec<i64>,
    /// `n √(j(D−j)·k(D−k))`, row-major
    denom: Vec<f64>,
}

impl GridEvaluator {
    pub(crate) fn new(n: usize, grid: &DyadicGrid) -> Result<Self> {
        let d = grid.size();
        let big_d = grid.denominator();
        if (n as u128) * (big_d as u128).pow(2) >= 1u128 << 62 {
            return Err(QdepError::config(format!(
                "n = {n} with d = {d} overflows exact grid arithmetic"
            )));
        }
        let floor = (1..=d).map(|j| n * j / big_d).collect();
        let rem = (1..=d).map(|j| ((n * j) % big_d) as i64).collect();
        let g: Vec<u64> = (1..=d).map(|j| (j * (big_d - j)) as u64).collect();
        let nf = n as f64;
        let mut denom = Vec::with_capacity(d * d);
        for &gj in &g {
            for &gk in &g {
                denom.push(nf * ((gj as u128 * gk as u128) as f64).sqrt());
            }
        }
        Ok(Self {
            n,
            d,
            big_d: big_d as i64,
            floor,
            rem,
            denom,
        })
    }

    pub(crate) fn size(&self) -> usize {
        self.d
    }

    /// Writes `q̄ₙ` on the grid into `out` (length `d²`) from a prefix table.
    pub(crate) fn fill(&self, prefix: &[u32], out: &mut [f64]) {
        let w = self.n + 1;
        let d = self.d;
        let big_d = self.big_d;
        let n = self.n as i64;
        for j in 0..d {
            let a = self.floor[j];
            let ru = self.rem[j];
            let row0 = &prefix[a * w..(a + 1) * w];
            let row1 = &prefix[(a + 1) * w..(a + 2) * w];
            let nj = n * (j as i64 + 1);
            let out_row = &mut out[j * d..(j + 1) * d];
            let den_row = &self.denom[j * d..(j + 1) * d];
            for k in 0..d {
                let b = self.floor[k];
                let rv = self.rem[k];
                let c00 = row0[b] as i64;
                let c10 = row1[b] as i64;
                let c01 = row0[b + 1] as i64;
                let c11 = row1[b + 1] as i64;
                let total = (big_d - ru) * ((big_d - rv) * c00 + rv * c01)
                    + ru * ((big_d - rv) * c10 + rv * c11);
                let m = total - nj * (k as i64 + 1);
                out_row[k] = m as f64 / den_row[k];
            }
        }
    }
}

fn check_interior(u: f64, v: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(QdepError::domain(format!(
            "({u}, {v}) is not in the open unit square"
        )))
    }
}

/// `√(uv(1−u)(1−v))`
#[inline]
fn weight(u: f64, v: f64) -> f64 {
    (u * v * (1.0 - u) * (1.0 - v)).sqrt()
}

/// `q̄ₙ(u,v) = (C̄ₙ(u,v) − uv) / √(uv(1−u)(1−v))` at an interior point.
pub fn q_bar(cop: &CheckerboardCopula, u: f64, v: f64) -> Result<f64> {
    check_interior(u, v)?;
    let c = cop.checkerboard(u, v)?;
    Ok((c - u * v) / weight(u, v))
}

/// Evaluates `q̄ₙ` on every grid point in O(n² + d²).
pub fn q_surface(cop: &CheckerboardCopula, grid: &DyadicGrid) -> Result<QSurface> {
    if cop.dim() != 2 {
        return Err(QdepError::domain("q_surface needs a bivariate copula"));
    }
    let eval = GridEvaluator::new(cop.n(), grid)?;
    let d = grid.size();
    let mut q = vec![0.0; d * d];
    eval.fill(cop.prefix_table(), &mut q);
    QSurface::from_values(grid.clone(), cop.n(), q)
}

/// Population quantile dependence `q(u,v)` of a copula given as a function.
pub fn q_exact<F: Fn(f64, f64) -> f64>(cop_fn: F, u: f64, v: f64) -> Result<f64> {
    check_interior(u, v)?;
    Ok((cop_fn(u, v) - u * v) / weight(u, v))
}

/// `q(u,v)` through the conditional-probability form
/// `√(u(1−u)/(v(1−v))) · [P(Y>y_v | X>x_u) − P(Y>y_v | X≤x_u)]`.
pub fn q_conditional<F: Fn(f64, f64) -> f64>(cop_fn: F, u: f64, v: f64) -> Result<f64> {
    check_interior(u, v)?;
    let c = cop_fn(u, v);
    let above = (1.0 - u - v + c) / (1.0 - u);
    let below = (u - c) / u;
    Ok((u * (1.0 - u) / (v * (1.0 - v))).sqrt() * (above - below))
}

/// Reference copulas for oracle checks.
pub mod reference {
    pub fn independence(u: f64, v: f64) -> f64 {
        u * v
    }

    /// Upper Fréchet bound `min(u,v)`.
    pub fn upper_bound(u: f64, v: f64) -> f64 {
        u.min(v)
    }

    /// Lower Fréchet bound `max(u+v−1, 0)`.
    pub fn lower_bound(u: f64, v: f64) -> f64 {
        (u + v - 1.0).max(0.0)
    }

    /// `C_θ = (1−θ)·max(u+v−1,0) + θ·min(u,v)`.
    pub fn frechet(theta: f64) -> impl Fn(f64, f64) -> f64 {
        move |u, v| (1.0 - theta) * lower_bound(u, v) + theta * upper_bound(u, v)
    }

    /// Gaussian copula with correlation `rho`.
    pub fn gaussian(rho: f64) -> impl Fn(f64, f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let std = Normal::standard();
        move |u, v| {
            let (x, y) = (std.inverse_cdf(u), std.inverse_cdf(v));
            super::bivariate_normal_cdf(x, y, rho)
        }
    }
}

/// `P(X ≤ x, Y ≤ y)` for a standard bivariate normal with correlation `rho`.
///
/// Drezner–Wesolowsky with Gauss–Legendre quadrature, as refined by Genz
/// (2004); absolute accuracy about 1e-15.
pub fn bivariate_normal_cdf(x: f64, y: f64, rho: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    use std::f64::consts::PI;
    let phi = |t: f64| Normal::standard().cdf(t);

    // Genz computes the upper orthant P(X > h, Y > k)
    let (h, k, r) = (-x, -y, rho);
    const W6: [f64; 3] = [0.171_324_492_379_170_3, 0.360_761_573_048_138_6, 0.467_913_934_572_691_1];
    const X6: [f64; 3] = [-0.932_469_514_203_152, -0.661_209_386_466_264_5, -0.238_619_186_083_196_9];
    const W12: [f64; 6] = [
        0.047_175_336_386_511_83, 0.106_939_325_995_318_4, 0.160_078_328_543_346_2,
        0.203_167_426_723_065_9, 0.233_492_536_538_354_8, 0.249_147_045_813_402_8,
    ];
    const X12: [f64; 6] = [
        -0.981_560_634_246_719_3, -0.904_117_256_370_474_9, -0.769_902_674_194_304_7,
        -0.587_317_954_286_617_4, -0.367_831_498_998_180_2, -0.125_233_408_511_468_9,
    ];
    const W20: [f64; 10] = [
        0.017_614_007_139_152_12, 0.040_601_429_800_386_94, 0.062_672_048_334_109_06,
        0.083_276_741_576_704_75, 0.101_930_119_817_240_4, 0.118_194_531_961_518_4,
        0.131_688_638_449_176_6, 0.142_096_109_318_382_1, 0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ];
    const X20: [f64; 10] = [
        -0.993_128_599_185_094_9, -0.963_971_927_277_913_8, -0.912_234_428_251_326,
        -0.839_116_971_822_218_8, -0.746_331_906_460_150_8, -0.636_053_680_726_515,
        -0.510_867_001_950_827_1, -0.373_706_088_715_419_6, -0.227_785_851_141_645_1,
        -0.076_526_521_133_497_33,
    ];
    let (w, xs): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&W6, &X6)
    } else if r.abs() < 0.75 {
        (&W12, &X12)
    } else {
        (&W20, &X20)
    };

    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (&wi, &xi) in w.iter().zip(xs) {
            for sign in [-1.0, 1.0] {
                let sn = (asr * (sign * xi + 1.0) / 2.0).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (4.0 * PI) + phi(-h) * phi(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k).powi(2);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            bvn = a
                * (-(bs / as_ + hk) / 2.0).exp()
                * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            if hk > -160.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * (2.0 * PI).sqrt()
                    * phi(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (&wi, &xi) in w.iter().zip(xs) {
                for sign in [-1.0, 1.0] {
                    let xs_ = (a * (sign * xi + 1.0)).powi(2);
                    let rs = (1.0 - xs_).sqrt();
                    let asr = -(bs / xs_ + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += a
                            * wi
                            * asr.exp()
                            * ((-hk * xs_ / (2.0 * (1.0 + rs).powi(2))).exp() / rs
                                - (1.0 + c * xs_ * (1.0 + d * xs_)));
                    }
                }
            }
            bvn = -bvn / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += phi(-h.max(k));
        } else {
            bvn = -bvn + (phi(-h) - phi(-k)).max(0.0);
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `σ(t) = √(Πt · (1 + (m−1)Πt − Σₖ Π_{j≠k} tⱼ))`, the asymptotic null
/// standard deviation of `√n·C̄ₙ(t)` in `m` dimensions.
pub fn sigma_m(t: &[f64]) -> Result<f64> {
    let m = t.len();
    if m < 2 {
        return Err(QdepError::domain("need at least 2 coordinates"));
    }
    if let Some(x) = t.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(QdepError::domain(format!("coordinate {x} is outside (0, 1]")));
    }
    let ones = t.iter().filter(|&&x| x == 1.0).count();
    if ones + 2 > m {
        return Err(QdepError::domain(format!(
            "degenerate point: {ones} of {m} coordinates equal 1"
        )));
    }
    let prod: f64 = t.iter().product();
    let leave_one_out: f64 = (0..m)
        .map(|k| {
            t.iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &x)| x)
                .product::<f64>()
        })
        .sum();
    let var = prod * (1.0 + (m - 1) as f64 * prod - leave_one_out);
    if var < 0.0 {
        return Err(QdepError::domain(format!(
            "degenerate point: variance {var} < 0 from rounding"
        )));
    }
    Ok(var.sqrt())
}

/// Multivariate `q̄ₙ(t) = (C̄ₙ(t) − Πt) / σ(t)`.
pub fn q_bar_m(cop: &CheckerboardCopula, t: &[f64]) -> Result<f64> {
    if t.len() != cop.dim() {
        return Err(QdepError::domain(format!(
            "point has {} coordinates, copula has dimension {}",
            t.len(),
            cop.dim()
        )));
    }
    let sigma = sigma_m(t)?;
    if sigma <= 0.0 {
        return Err(QdepError::domain("σ(t) = 0 at this point"));
    }
    let c = cop.multilinear(t)?;
    Ok((c - t.iter().product::<f64>()) / sigma)
}
