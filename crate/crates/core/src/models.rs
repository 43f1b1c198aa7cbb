//! Seeded generators for the benchmark alternatives and a power harness.
//!
//! Normal noise `N(0, σ²)` is parameterized by its variance. Bivariate
//! Cauchy and symmetric Student vectors use the identity correlation matrix
//! and are drawn as a standard normal pair divided by `√(χ²_ν/ν)` with
//! `ν = 1` and `ν = 2`.
//!
//! Two models need a law the literature states only by name:
//!
//! * Gumbel's bivariate exponential (`BM6`) has survival function
//!   `P(X > x, Y > y) = exp(−x − y − θxy)`, `0 ≤ θ ≤ 1`. `X ~ Exp(1)` and,
//!   given `X = x`, `Y` is a `(r−θ)/r : θ/r` mixture of `Gamma(1, r)` and
//!   `Gamma(2, r)` with `r = 1 + θx`.
//! * The Gumbel–Hougaard copula (`BM7`) is the Archimedean copula with
//!   generator `(−ln t)^θ`, `θ ≥ 1`. It is sampled by the Marshall–Olkin
//!   frailty construction `Uᵢ = exp(−(Eᵢ/S)^{1/θ})` with `Eᵢ ~ Exp(1)` and
//!   `S` positive stable with Laplace transform `exp(−t^{1/θ})`, drawn with
//!   Kanter's representation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QdepError, Result};
use crate::global_test::{critical_value, statistic, NullSample, StatisticKind, TestConfig};
use crate::ranks::{pseudo_observations, Sample};
use crate::rng::{self, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// `Y = 2 + X + ε`, `X ~ U[0,1]`, `ε ~ N(0,1)`
    Sr1,
    /// `Y = X^{1/4} + ε`, `ε ~ N(0, 0.25)`
    Sr2,
    /// `Y = 1(X ≤ 0.5) + ε`, `ε ~ N(0, 2)`
    Sr3,
    /// `Y = ln(1 + |X|) + ε`, `X, ε ~ N(0,1)`
    Sr4,
    /// `Y = 4[(2X − 1)² − 0.5]² + ε`, `ε ~ N(0, 0.5)`
    Sr5,
    /// `Y = √(1 + 1/X²)·ε`, `X ~ Exp(rate 0.1)`
    Hr1,
    /// `Y = √X·ε`, `X ~ U[1,16]`
    Hr2,
    /// `Y = 2 + X + ε_M X + ε_A`, `ε_M ~ N(0,4)`, `ε_A ~ N(0,1)`
    Re1,
    /// `Y = ε_M(2 + X + X²) + ε_A`, `X ~ U[0,1]`
    Re2,
    /// `Y = ε_M/X + ε_A`, `X ~ U[0,1]`
    Re3,
    /// `X = X₀`, `Y = ε_M Y₀ + ε_A`, `(X₀, Y₀)` bivariate Cauchy
    Re4,
    /// Bivariate normal with correlation `rho`.
    Bm1 { rho: f64 },
    /// `0.1·N(0, I) + 0.9·N(0, [[6,5],[5,6]])`
    Bm2,
    /// `0.3·Cauchy + 0.7·N(0, I)`
    Bm3,
    /// `Y = μ(X) + ε`, `μ(x) = 0` for `|x| ≤ 1.96` and `−x` otherwise
    Bm4,
    Bm5,
    /// Gumbel bivariate exponential, `P(X > x, Y > y) = exp(−x − y − θxy)`.
    /// `X ~ Exp(1)`; given `X = x`, `Y` is Gamma with rate `1 + θx` and shape
    /// 1 or 2 with probabilities `(1 + θx − θ)/(1 + θx)` and `θ/(1 + θx)`.
    Bm6 { theta: f64 },
    /// Gumbel–Hougaard copula `exp(−[(−ln u)^θ + (−ln v)^θ]^{1/θ})`, drawn
    /// through a positive stable frailty of index `1/θ`.
    Bm7 { theta: f64 },
    /// Bivariate Cauchy.
    Bm8,
    /// Bivariate Student with 2 degrees of freedom.
    Bm9,
    Bm10,
    Bm11,
    /// `C_θ = (1−θ)·max(u+v−1, 0) + θ·min(u, v)`
    Frechet { theta: f64 },
    /// Independent uniforms.
    Null,
}

pub const IMPLEMENTED: &[&str] = &[
    "SR1", "SR2", "SR3", "SR4", "SR5", "HR1", "HR2", "RE1", "RE2", "RE3", "RE4", "BM1", "BM2",
    "BM3", "BM4", "BM6", "BM7", "BM8", "BM9", "FRECHET(theta)", "NULL",
];

impl ModelSpec {
    pub fn id(&self) -> String {
        match self {
            ModelSpec::Sr1 => "SR1".into(),
            ModelSpec::Sr2 => "SR2".into(),
            ModelSpec::Sr3 => "SR3".into(),
            ModelSpec::Sr4 => "SR4".into(),
            ModelSpec::Sr5 => "SR5".into(),
            ModelSpec::Hr1 => "HR1".into(),
            ModelSpec::Hr2 => "HR2".into(),
            ModelSpec::Re1 => "RE1".into(),
            ModelSpec::Re2 => "RE2".into(),
            ModelSpec::Re3 => "RE3".into(),
            ModelSpec::Re4 => "RE4".into(),
            ModelSpec::Bm1 { rho } if *rho == 0.3 => "BM1".into(),
            ModelSpec::Bm1 { rho } => format!("BM1({rho})"),
            ModelSpec::Bm2 => "BM2".into(),
            ModelSpec::Bm3 => "BM3".into(),
            ModelSpec::Bm4 => "BM4".into(),
            ModelSpec::Bm5 => "BM5".into(),
            ModelSpec::Bm6 { theta } if *theta == 0.5 => "BM6".into(),
            ModelSpec::Bm6 { theta } => format!("BM6({theta})"),
            ModelSpec::Bm7 { theta } if *theta == 1.2 => "BM7".into(),
            ModelSpec::Bm7 { theta } => format!("BM7({theta})"),
            ModelSpec::Bm8 => "BM8".into(),
            ModelSpec::Bm9 => "BM9".into(),
            ModelSpec::Bm10 => "BM10".into(),
            ModelSpec::Bm11 => "BM11".into(),
            ModelSpec::Frechet { theta } => format!("FRECHET({theta})"),
            ModelSpec::Null => "NULL".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(QdepError::config(format!("{}: {what}", self.id())));
        match *self {
            ModelSpec::Bm1 { rho } if !(rho > -1.0 && rho < 1.0) => bad("rho must be in (-1, 1)"),
            ModelSpec::Bm6 { theta } if !(0.0..=1.0).contains(&theta) => bad("theta must be in [0, 1]"),
            ModelSpec::Bm7 { theta } if !(theta >= 1.0 && theta.is_finite()) => bad("theta must be >= 1"),
            ModelSpec::Frechet { theta } if !(0.0..=1.0).contains(&theta) => bad("theta must be in [0, 1]"),
            ModelSpec::Bm5 => not_implemented("BM5", "Mai-Scherer copula with parameters (0.92, 0.08)"),
            ModelSpec::Bm10 => not_implemented(
                "BM10",
                "skew bivariate Student, 5 degrees of freedom, parameters (0.3, 0.7, -0.7)",
            ),
            ModelSpec::Bm11 => not_implemented("BM11", "bivariate sub-Gaussian with parameters (0.1, 1.5)"),
            _ => Ok(()),
        }
    }
}

fn not_implemented(id: &str, what: &str) -> Result<()> {
    Err(QdepError::NotImplemented(format!(
        "{id} ({what}): the exact parameterization and sampler are defined in an external \
         reference and are not reproduced here; implemented models: {}",
        IMPLEMENTED.join(", ")
    )))
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for ModelSpec {
    type Err = QdepError;

    /// Accepts `SR3`, `bm7`, `BM7(1.5)`, `FRECHET(0.75)`, `NULL`, ...
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_uppercase();
        let (name, param) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(|| {
                    QdepError::config(format!("malformed model '{s}'"))
                })?;
                let p: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| QdepError::config(format!("bad model parameter '{inner}'")))?;
                (name.trim().to_string(), Some(p))
            }
            None => (s.clone(), None),
        };
        let with = |default: f64| param.unwrap_or(default);
        let spec = match name.as_str() {
            "SR1" => ModelSpec::Sr1,
            "SR2" => ModelSpec::Sr2,
            "SR3" => ModelSpec::Sr3,
            "SR4" => ModelSpec::Sr4,
            "SR5" => ModelSpec::Sr5,
            "HR1" => ModelSpec::Hr1,
            "HR2" => ModelSpec::Hr2,
            "RE1" => ModelSpec::Re1,
            "RE2" => ModelSpec::Re2,
            "RE3" => ModelSpec::Re3,
            "RE4" => ModelSpec::Re4,
            "BM1" => ModelSpec::Bm1 { rho: with(0.3) },
            "BM2" => ModelSpec::Bm2,
            "BM3" => ModelSpec::Bm3,
            "BM4" => ModelSpec::Bm4,
            "BM5" => ModelSpec::Bm5,
            "BM6" => ModelSpec::Bm6 { theta: with(0.5) },
            "BM7" => ModelSpec::Bm7 { theta: with(1.2) },
            "BM8" => ModelSpec::Bm8,
            "BM9" => ModelSpec::Bm9,
            "BM10" => ModelSpec::Bm10,
            "BM11" => ModelSpec::Bm11,
            "FRECHET" => ModelSpec::Frechet {
                theta: param.ok_or_else(|| QdepError::config("FRECHET needs a parameter, e.g. FRECHET(0.75)"))?,
            },
            "NULL" => ModelSpec::Null,
            _ => {
                return Err(QdepError::config(format!(
                    "unknown model '{s}'; implemented models: {}",
                    IMPLEMENTED.join(", ")
                )))
            }
        };
        let takes_param = matches!(
            spec,
            ModelSpec::Bm1 { .. } | ModelSpec::Bm6 { .. } | ModelSpec::Bm7 { .. } | ModelSpec::Frechet { .. }
        );
        if param.is_some() && !takes_param {
            return Err(QdepError::config(format!("model {name} takes no parameter")));
        }
        if !matches!(spec, ModelSpec::Bm5 | ModelSpec::Bm10 | ModelSpec::Bm11) {
            spec.validate()?;
        }
        Ok(spec)
    }
}

fn normal<R: Rng + ?Sized>(g: &mut R, variance: f64) -> f64 {
    let z: f64 = StandardNormal.sample(g);
    variance.sqrt() * z
}

fn uniform<R: Rng + ?Sized>(g: &mut R) -> f64 {
    g.random::<f64>()
}

/// Standard normal pair divided by `√(χ²_ν/ν)`.
fn spherical_t<R: Rng + ?Sized>(g: &mut R, nu: f64) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(g);
    let z2: f64 = StandardNormal.sample(g);
    let w = ChiSquared::new(nu).expect("positive dof").sample(g);
    let scale = (w / nu).sqrt();
    (z1 / scale, z2 / scale)
}

/// Positive stable variate with Laplace transform `exp(−t^α)`, `0 < α ≤ 1`.
fn positive_stable<R: Rng + ?Sized>(g: &mut R, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return 1.0;
    }
    let theta = PI * uniform(g);
    let w: f64 = Exp1.sample(g);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * theta).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

fn draw<R: Rng + ?Sized>(model: ModelSpec, g: &mut R) -> (f64, f64) {
    match model {
        ModelSpec::Sr1 => {
            let x = uniform(g);
            (x, 2.0 + x + normal(g, 1.0))
        }
        ModelSpec::Sr2 => {
            let x = uniform(g);
            (x, x.powf(0.25) + normal(g, 0.25))
        }
        ModelSpec::Sr3 => {
            let x = uniform(g);
            (x, step(x) + normal(g, 2.0))
        }
        ModelSpec::Sr4 => {
            let x = normal(g, 1.0);
            (x, (1.0 + x.abs()).ln() + normal(g, 1.0))
        }
        ModelSpec::Sr5 => {
            let x = uniform(g);
            (x, 4.0 * ((2.0 * x - 1.0).powi(2) - 0.5).powi(2) + normal(g, 0.5))
        }
        ModelSpec::Hr1 => {
            let x = Exp::new(0.1).expect("positive rate").sample(g);
            (x, (1.0 + 1.0 / (x * x)).sqrt() * normal(g, 1.0))
        }
        ModelSpec::Hr2 => {
            let x = 1.0 + 15.0 * uniform(g);
            (x, x.sqrt() * normal(g, 1.0))
        }
        ModelSpec::Re1 => {
            let x = uniform(g);
            let em = normal(g, 4.0);
            (x, 2.0 + x + em * x + normal(g, 1.0))
        }
        ModelSpec::Re2 => {
            let x = uniform(g);
            let em = normal(g, 1.0);
            (x, em * (2.0 + x + x * x) + normal(g, 1.0))
        }
        ModelSpec::Re3 => {
            let x = uniform(g);
            let em = normal(g, 1.0);
            (x, em / x + normal(g, 1.0))
        }
        ModelSpec::Re4 => {
            let (x0, y0) = spherical_t(g, 1.0);
            let em = normal(g, 1.0);
            (x0, em * y0 + normal(g, 1.0))
        }
        ModelSpec::Bm1 { rho } => {
            let z1 = normal(g, 1.0);
            let z2 = normal(g, 1.0);
            (z1, rho * z1 + (1.0 - rho * rho).sqrt() * z2)
        }
        ModelSpec::Bm2 => {
            let z1 = normal(g, 1.0);
            let z2 = normal(g, 1.0);
            if uniform(g) < 0.1 {
                (z1, z2)
            } else {
                // Cholesky factor of [[6,5],[5,6]]
                let l11 = 6f64.sqrt();
                let l21 = 5.0 / l11;
                let l22 = (6.0 - l21 * l21).sqrt();
                (l11 * z1, l21 * z1 + l22 * z2)
            }
        }
        ModelSpec::Bm3 => {
            if uniform(g) < 0.3 {
                spherical_t(g, 1.0)
            } else {
                (normal(g, 1.0), normal(g, 1.0))
            }
        }
        ModelSpec::Bm4 => {
            let x = normal(g, 1.0);
            let mu = if x.abs() <= 1.96 { 0.0 } else { -x };
            (x, mu + normal(g, 1.0))
        }
        ModelSpec::Bm6 { theta } => {
            let x: f64 = Exp1.sample(g);
            let r = 1.0 + theta * x;
            let shape = if uniform(g) < (r - theta) / r { 1.0 } else { 2.0 };
            let y = Gamma::new(shape, 1.0 / r).expect("valid gamma").sample(g);
            (x, y)
        }
        ModelSpec::Bm7 { theta } => {
            let alpha = 1.0 / theta;
            let s = positive_stable(g, alpha);
            let e1: f64 = Exp1.sample(g);
            let e2: f64 = Exp1.sample(g);
            ((-(e1 / s).powf(alpha)).exp(), (-(e2 / s).powf(alpha)).exp())
        }
        ModelSpec::Bm8 => spherical_t(g, 1.0),
        ModelSpec::Bm9 => spherical_t(g, 2.0),
        ModelSpec::Frechet { theta } => {
            let u = uniform(g);
            let v = if uniform(g) < theta { u } else { 1.0 - u };
            (u, v)
        }
        ModelSpec::Null => (uniform(g), uniform(g)),
        ModelSpec::Bm5 | ModelSpec::Bm10 | ModelSpec::Bm11 => unreachable!("validated"),
    }
}

/// Deterministic part of SR3.
pub fn step(x: f64) -> f64 {
    if x <= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// `n` i.i.d. draws from `model`, determined by `seed`.
pub fn generate(model: ModelSpec, n: usize, seed: u64) -> Result<Sample> {
    model.validate()?;
    if n < 2 {
        return Err(QdepError::InvalidSample(format!("n = {n} < 2")));
    }
    let mut g = rng::stream(seed, 0);
    let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|_| draw(model, &mut g)).unzip();
    Sample::bivariate(x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub model: String,
    pub kind: StatisticKind,
    pub config: TestConfig,
    pub alpha: f64,
    pub reps: usize,
    pub power: f64,
    pub mc_se: f64,
    pub critical_value: f64,
    pub master_seed: u64,
}

impl PowerEstimate {
    pub const CSV_HEADER: &'static str = "id,stat,n,d,t_frac,alpha,power,mc_se,reps,runs,null_seed,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model,
            self.kind.name(),
            self.config.n,
            self.config.d(),
            self.config.t_frac,
            self.alpha,
            self.power,
            self.mc_se,
            self.reps,
            self.config.runs,
            self.config.master_seed,
            self.master_seed
        )
    }
}

/// Fraction of `reps` samples from `model` whose statistic exceeds the
/// level-`alpha` critical value of `null`.
///
/// Replicate `i` draws its data from seed `derive_seed(master_seed, 2i)` and
/// breaks ties with `derive_seed(master_seed, 2i + 1)`.
pub fn power(
    model: ModelSpec,
    null: &NullSample,
    alpha: f64,
    reps: usize,
    master_seed: u64,
) -> Result<PowerEstimate> {
    model.validate()?;
    if reps == 0 {
        return Err(QdepError::config("reps must be positive"));
    }
    let config = &null.config;
    let crit = critical_value(null, alpha)?;
    let rejections = (0..reps as u64)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let sample = generate(model, config.n, derive_seed(master_seed, 2 * i))?;
            let pseudo = pseudo_observations(&sample, derive_seed(master_seed, 2 * i + 1))?;
            Ok(statistic(&pseudo, config, null.kind)? > crit)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&r| r)
        .count();
    let p = rejections as f64 / reps as f64;
    Ok(PowerEstimate {
        model: model.id(),
        kind: null.kind,
        config: config.clone(),
        alpha,
        reps,
        power: p,
        mc_se: (p * (1.0 - p) / reps as f64).sqrt(),
        critical_value: crit,
        master_seed,
    })
}

/// Marginal CDF of `X` under `model`, where it has a closed form.
pub fn x_marginal_cdf(model: ModelSpec) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    use statrs::distribution::{Cauchy, ContinuousCDF, Exp as ExpD, Normal, StudentsT};
    let unit = |x: f64| x.clamp(0.0, 1.0);
    Some(match model {
        ModelSpec::Sr1
        | ModelSpec::Sr2
        | ModelSpec::Sr3
        | ModelSpec::Sr5
        | ModelSpec::Re1
        | ModelSpec::Re2
        | ModelSpec::Re3
        | ModelSpec::Bm7 { .. }
        | ModelSpec::Frechet { .. }
        | ModelSpec::Null => Box::new(unit),
        ModelSpec::Hr2 => Box::new(move |x| unit((x - 1.0) / 15.0)),
        ModelSpec::Sr4 | ModelSpec::Bm1 { .. } | ModelSpec::Bm4 => {
            let n = Normal::standard();
            Box::new(move |x| n.cdf(x))
        }
        ModelSpec::Hr1 => {
            let e = ExpD::new(0.1).ok()?;
            Box::new(move |x| e.cdf(x))
        }
        ModelSpec::Bm6 { .. } => {
            let e = ExpD::new(1.0).ok()?;
            Box::new(move |x| e.cdf(x))
        }
        ModelSpec::Bm2 => {
            let a = Normal::standard();
            let b = Normal::new(0.0, 6f64.sqrt()).ok()?;
            Box::new(move |x| 0.1 * a.cdf(x) + 0.9 * b.cdf(x))
        }
        ModelSpec::Bm3 => {
            let c = Cauchy::new(0.0, 1.0).ok()?;
            let n = Normal::standard();
            Box::new(move |x| 0.3 * c.cdf(x) + 0.7 * n.cdf(x))
        }
        ModelSpec::Re4 | ModelSpec::Bm8 => {
            let c = Cauchy::new(0.0, 1.0).ok()?;
            Box::new(move |x| c.cdf(x))
        }
        ModelSpec::Bm9 => {
            let t = StudentsT::new(0.0, 1.0, 2.0).ok()?;
            Box::new(move |x| t.cdf(x))
        }
        ModelSpec::Bm5 | ModelSpec::Bm10 | ModelSpec::Bm11 => return None,
    })
}
