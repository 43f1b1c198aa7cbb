//! Decile-cell dependence diagrams.
//!
//! The unit square is cut into cells `Π_{k,l} = I_k × I_l` with
//! `I_1 = (0, 0.1]`, …, `I_9 = (0.8, 0.9]`, `I_10 = (0.9, 1)`. Within each cell
//! the minimum `L⁻` and maximum `L⁺` of `Q̄ₙ` over the grid points are
//! compared with one-sided barriers `√n·ℓ⁻`, `√n·ℓ⁺` calibrated by Monte
//! Carlo under independence.
//!
//! Barriers are stored on the `q̄ₙ` scale. Calibration collects the extrema
//! of `q̄ₙ` itself and classification compares on that scale too, so a
//! replicate equal to a barrier compares equal without a round trip through
//! `√n`.

use serde::{Deserialize, Serialize};

use crate::dependence::{DyadicGrid, QSurface};
use crate::error::{QdepError, Result};
use crate::montecarlo::{check_runs, map_surfaces};

pub const CELLS: usize = 10;
pub const FORMAT_VERSION: u32 = 1;

/// A decile cell, both indices in `1..=10`; `k` refers to the first
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub k: usize,
    pub l: usize,
}

impl CellIndex {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if !(1..=CELLS).contains(&k) || !(1..=CELLS).contains(&l) {
            return Err(QdepError::domain(format!("cell ({k}, {l}) is out of range")));
        }
        Ok(Self { k, l })
    }

    pub fn all() -> impl Iterator<Item = CellIndex> {
        (1..=CELLS).flat_map(|k| (1..=CELLS).map(move |l| CellIndex { k, l }))
    }

    fn flat(&self) -> usize {
        (self.k - 1) * CELLS + (self.l - 1)
    }
}

/// Index `k` of the interval `I_k` containing `p`.
pub fn cell_membership(p: f64) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QdepError::domain(format!("{p} is not in (0, 1)")));
    }
    Ok((1..=CELLS).find(|&k| p <= k as f64 / 10.0).unwrap_or(CELLS))
}

/// Cell of grid point `j/D`, i.e. `⌈10j/D⌉`.
fn grid_cell(j: usize, big_d: usize) -> usize {
    (10 * j).div_ceil(big_d)
}

/// Zero-based cell of each grid index `0..d`, after checking that no cell is
/// empty.
fn grid_cells(grid: &DyadicGrid) -> Result<Vec<usize>> {
    let big_d = grid.denominator();
    let cells: Vec<usize> = (1..=grid.size()).map(|j| grid_cell(j, big_d) - 1).collect();
    for k in 0..CELLS {
        if !cells.contains(&k) {
            return Err(QdepError::config(format!(
                "grid with d = {} leaves decile interval {} without points; use d >= 15",
                grid.size(),
                k + 1
            )));
        }
    }
    Ok(cells)
}

/// Per-cell `(min, max)` of the raw grid values `q` (row-major `d²`).
fn cell_extrema_into(q: &[f64], d: usize, cells: &[usize], out: &mut [(f64, f64); CELLS * CELLS]) {
    out.fill((f64::INFINITY, f64::NEG_INFINITY));
    for (j, &cj) in cells.iter().enumerate() {
        let row = &q[j * d..(j + 1) * d];
        let base = cj * CELLS;
        for (&x, &cl) in row.iter().zip(cells) {
            let e = &mut out[base + cl];
            if x < e.0 {
                e.0 = x;
            }
            if x > e.1 {
                e.1 = x;
            }
        }
    }
}

fn surface_cell_extrema(surface: &QSurface) -> Result<[(f64, f64); CELLS * CELLS]> {
    let cells = grid_cells(surface.grid())?;
    let mut out = [(0.0, 0.0); CELLS * CELLS];
    cell_extrema_into(surface.values(), surface.size(), &cells, &mut out);
    Ok(out)
}

/// `(L⁻, L⁺)`: minimum and maximum of `Q̄ₙ` over the grid points of `cell`.
pub fn local_extrema(surface: &QSurface, cell: CellIndex) -> Result<(f64, f64)> {
    let (lo, hi) = surface_cell_extrema(surface)?[cell.flat()];
    Ok((surface.scale() * lo, surface.scale() * hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierMeta {
    pub n: usize,
    pub s: u32,
    pub d: usize,
    pub alpha_side: f64,
    pub runs: usize,
    pub master_seed: u64,
    pub format_version: u32,
}

/// Lower and upper barriers `ℓ⁻`, `ℓ⁺` on the `q̄ₙ` scale, indexed
/// `[k−1][l−1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierTable {
    pub meta: BarrierMeta,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl BarrierTable {
    pub fn lower(&self, cell: CellIndex) -> f64 {
        self.lower[cell.k - 1][cell.l - 1]
    }

    pub fn upper(&self, cell: CellIndex) -> f64 {
        self.upper[cell.k - 1][cell.l - 1]
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| QdepError::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|e| QdepError::Input(e.to_string()))?;
        if t.meta.format_version != FORMAT_VERSION {
            return Err(QdepError::Input(format!(
                "barrier table format {} is not supported",
                t.meta.format_version
            )));
        }
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == CELLS && m.iter().all(|r| r.len() == CELLS);
        if !shape_ok(&t.lower) || !shape_ok(&t.upper) {
            return Err(QdepError::Input("barrier matrices must be 10 x 10".into()));
        }
        Ok(t)
    }
}

/// Null Monte Carlo sample of the per-cell extrema of `q̄ₙ`, sorted per cell.
#[derive(Debug, Clone)]
pub struct ExtremaSample {
    pub n: usize,
    pub grid: DyadicGrid,
    pub runs: usize,
    pub master_seed: u64,
    minima: Vec<Vec<f64>>,
    maxima: Vec<Vec<f64>>,
}

/// `⌈x⌉` that ignores representation error just above an integer.
pub(crate) fn ceil_tol(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

pub(crate) fn floor_tol(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// One-based order-statistic ranks `(m_low, m_high)` for the two barriers.
pub fn barrier_ranks(alpha_side: f64, runs: usize) -> (usize, usize) {
    let low = floor_tol(alpha_side * runs as f64).max(1);
    let high = ceil_tol((1.0 - alpha_side) * runs as f64).clamp(1, runs);
    (low, high)
}

impl ExtremaSample {
    /// Sorted null sample of the minima (`q̄ₙ` scale) in `cell`.
    pub fn minima(&self, cell: CellIndex) -> &[f64] {
        &self.minima[cell.flat()]
    }

    pub fn maxima(&self, cell: CellIndex) -> &[f64] {
        &self.maxima[cell.flat()]
    }

    pub fn barriers(&self, alpha_side: f64) -> Result<BarrierTable> {
        check_alpha_side(alpha_side)?;
        let (low, high) = barrier_ranks(alpha_side, self.runs);
        let mut lower = vec![vec![0.0; CELLS]; CELLS];
        let mut upper = vec![vec![0.0; CELLS]; CELLS];
        for c in CellIndex::all() {
            lower[c.k - 1][c.l - 1] = self.minima(c)[low - 1];
            upper[c.k - 1][c.l - 1] = self.maxima(c)[high - 1];
        }
        Ok(BarrierTable {
            meta: BarrierMeta {
                n: self.n,
                s: self.grid.depth(),
                d: self.grid.size(),
                alpha_side,
                runs: self.runs,
                master_seed: self.master_seed,
                format_version: FORMAT_VERSION,
            },
            lower,
            upper,
        })
    }
}

fn check_alpha_side(alpha_side: f64) -> Result<()> {
    if !(alpha_side > 0.0 && alpha_side < 1.0) {
        return Err(QdepError::config(format!(
            "alpha_side = {alpha_side} is not in (0, 1)"
        )));
    }
    Ok(())
}

/// Simulates `runs` null surfaces and records the per-cell extrema.
pub fn sample_cell_extrema(
    n: usize,
    grid: &DyadicGrid,
    runs: usize,
    master_seed: u64,
) -> Result<ExtremaSample> {
    check_runs(runs)?;
    if n < 2 {
        return Err(QdepError::config("n must be at least 2"));
    }
    let cells = grid_cells(grid)?;
    let d = grid.size();
    let reps = map_surfaces(n, grid, runs, master_seed, |_, _, q| {
        let mut e = [(0.0, 0.0); CELLS * CELLS];
        cell_extrema_into(q, d, &cells, &mut e);
        e
    })?;
    let mut minima: Vec<Vec<f64>> = (0..CELLS * CELLS).map(|_| Vec::with_capacity(runs)).collect();
    let mut maxima: Vec<Vec<f64>> = (0..CELLS * CELLS).map(|_| Vec::with_capacity(runs)).collect();
    for e in &reps {
        for (c, &(lo, hi)) in e.iter().enumerate() {
            minima[c].push(lo);
            maxima[c].push(hi);
        }
    }
    drop(reps);
    for v in minima.iter_mut().chain(maxima.iter_mut()) {
        v.sort_by(f64::total_cmp);
    }
    Ok(ExtremaSample {
        n,
        grid: grid.clone(),
        runs,
        master_seed,
        minima,
        maxima,
    })
}

/// Monte Carlo barriers for sample size `n` on the grid of depth `s`.
pub fn calibrate_barriers(
    n: usize,
    s: u32,
    alpha_side: f64,
    runs: usize,
    master_seed: u64,
) -> Result<BarrierTable> {
    check_alpha_side(alpha_side)?;
    let grid = DyadicGrid::new(s)?;
    sample_cell_extrema(n, &grid, runs, master_seed)?.barriers(alpha_side)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellClass {
    /// Neither barrier crossed.
    White,
    /// Only the lower barrier crossed.
    Blue,
    /// Only the upper barrier crossed.
    Pink,
    Mixed,
}

impl CellClass {
    pub fn from_flags(neg: bool, pos: bool) -> Self {
        match (neg, pos) {
            (false, false) => CellClass::White,
            (true, false) => CellClass::Blue,
            (false, true) => CellClass::Pink,
            (true, true) => CellClass::Mixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFlags {
    pub neg: bool,
    pub pos: bool,
    pub class: CellClass,
}

/// Where the inputs of a diagram came from, as file names or cache keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramSources {
    pub qsurface: String,
    pub barriers: String,
    pub manifest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceDiagram {
    pub meta: BarrierMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<DiagramSources>,
    /// `cells[k−1][l−1]`
    pub cells: Vec<Vec<CellFlags>>,
}

impl DependenceDiagram {
    pub fn cell(&self, c: CellIndex) -> CellFlags {
        self.cells[c.k - 1][c.l - 1]
    }

    pub fn class(&self, c: CellIndex) -> CellClass {
        self.cell(c).class
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.cells.iter().flatten().filter(|f| f.class == class).count()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| QdepError::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text).map_err(|e| QdepError::Input(e.to_string()))?;
        let shape_ok = d.cells.len() == CELLS && d.cells.iter().all(|r| r.len() == CELLS);
        let class_ok = d
            .cells
            .iter()
            .flatten()
            .all(|f| f.class == CellClass::from_flags(f.neg, f.pos));
        if !shape_ok || !class_ok {
            return Err(QdepError::Input("malformed dependence diagram".into()));
        }
        Ok(d)
    }
}

/// Flags cells whose local minimum falls strictly below `ℓ⁻` or whose local
/// maximum rises strictly above `ℓ⁺`.
pub fn classify(surface: &QSurface, barriers: &BarrierTable) -> Result<DependenceDiagram> {
    let m = &barriers.meta;
    if m.n != surface.n() || m.s != surface.grid().depth() {
        return Err(QdepError::config(format!(
            "barriers are for n = {}, d = {}; surface has n = {}, d = {}",
            m.n,
            m.d,
            surface.n(),
            surface.size()
        )));
    }
    let ext = surface_cell_extrema(surface)?;
    let mut cells: Vec<Vec<CellFlags>> = (0..CELLS).map(|_| Vec::with_capacity(CELLS)).collect();
    for c in CellIndex::all() {
        let (lo, hi) = ext[c.flat()];
        let neg = lo < barriers.lower(c);
        let pos = hi > barriers.upper(c);
        cells[c.k - 1].push(CellFlags {
            neg,
            pos,
            class: CellClass::from_flags(neg, pos),
        });
    }
    Ok(DependenceDiagram {
        meta: m.clone(),
        sources: None,
        cells,
    })
}
