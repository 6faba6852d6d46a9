//! Brillouin-zone scans, flatness, and the taxonomy of band intersections.
//!
//! On the flat-band manifold of a generic-form model the cubic factors as
//! `(E + Jc)(E² − JcE − 2κ²s)` with `c = cos φ` and `s = |Λ(k)|²`, so the
//! flat band meets a dispersive one exactly where `κ²s(k) = J²c²`. The
//! classification therefore reduces to the topology of a level set of `s`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{self, build_bloch, structure_factor, BandSet, Momentum};
use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, Offset};
use crate::linalg;

/// Uniform `nx × ny` grid over `[−π, π)²` with `k_i = 2π(i − n/2)/n`, so `Γ`
/// is a grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BZGrid {
    pub nx: usize,
    pub ny: usize,
}

impl BZGrid {
    pub const MIN_SIZE: usize = 8;

    pub fn new(nx: usize, ny: usize) -> Result<BZGrid> {
        for n in [nx, ny] {
            if n < Self::MIN_SIZE || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "grid sizes must be even and >= {}, got {nx}x{ny}",
                    Self::MIN_SIZE
                )));
            }
        }
        Ok(BZGrid { nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coord(i: usize, n: usize) -> f64 {
        2.0 * PI * (i as f64 - (n / 2) as f64) / n as f64
    }

    /// Point `(i, j)`; `i` runs along `kx`.
    pub fn point(&self, i: usize, j: usize) -> Momentum {
        Momentum {
            kx: Self::coord(i, self.nx),
            ky: Self::coord(j, self.ny),
        }
    }

    /// Row-major flat index, `kx` slowest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// All points in row-major order.
    pub fn points(&self) -> impl Iterator<Item = Momentum> + '_ {
        (0..self.nx).flat_map(move |i| (0..self.ny).map(move |j| self.point(i, j)))
    }

    /// Four periodic neighbours of `(i, j)`.
    fn neighbours(&self, i: usize, j: usize) -> [(usize, usize); 4] {
        let (nx, ny) = (self.nx, self.ny);
        [((i + 1) % nx, j), ((i + nx - 1) % nx, j), (i, (j + 1) % ny), (i, (j + ny - 1) % ny)]
    }
}

/// Band sets over a grid, in row-major order.
#[derive(Clone, Debug)]
pub struct BandSurface {
    pub grid: BZGrid,
    pub bands: Vec<BandSet>,
}

impl BandSurface {
    pub fn iter(&self) -> impl Iterator<Item = (Momentum, &BandSet)> {
        self.grid.points().zip(self.bands.iter())
    }
}

/// Bands at every grid point. Runs on the current rayon pool; the output
/// does not depend on the number of workers.
pub fn scan(model: &LatticeModel, grid: BZGrid) -> Result<BandSurface> {
    let points: Vec<Momentum> = grid.points().collect();
    let bands = points
        .par_iter()
        .map(|&k| bloch::solve_bands(model, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandSurface { grid, bands })
}

/// Detection thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Two energies are degenerate below `tol_e · max(1, |E|)`.
    pub tol_e: f64,
    /// Eigenvector condition number above which a degeneracy is an EP.
    pub cond_ep: f64,
    /// Flatness threshold on the maximal deviation.
    pub flat: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_e: 1e-6,
            cond_ep: 1e3,
            flat: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tol-E", self.tol_e), ("cond-ep", self.cond_ep), ("flat", self.flat)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlatBandReport {
    pub candidate_energy: Complex64,
    pub max_deviation: f64,
    pub condition_residual: f64,
    pub is_flat: bool,
}

/// Flatness of the band at `−J cos φ` (which is 0 under chiral symmetry).
pub fn flatness(model: &LatticeModel, grid: BZGrid, tol_flat: f64) -> Result<FlatBandReport> {
    flatness_of(model, &scan(model, grid)?, tol_flat)
}

/// [`flatness`] on an existing scan.
pub fn flatness_of(model: &LatticeModel, surface: &BandSurface, tol_flat: f64) -> Result<FlatBandReport> {
    // + 0.0 turns −0 into 0
    let candidate = Complex64::new(model.params.flat_band_energy() + 0.0, 0.0);
    let max_deviation = surface.bands.iter().map(|b| b.distance_to(candidate)).fold(0.0, f64::max);
    Ok(FlatBandReport {
        candidate_energy: candidate,
        max_deviation,
        condition_residual: model.params.flat_band_residual(),
        is_flat: max_deviation < tol_flat,
    })
}

/// `Δ = 27κ⁴J²s²cos²φ − (2κ²s + J²cos²φ)³`, which vanishes when `J²cos²φ = κ²s`.
pub fn discriminant(kappa: f64, j: f64, cos_phi: f64, s: f64) -> f64 {
    let k2s = kappa * kappa * s;
    let jc2 = j * j * cos_phi * cos_phi;
    let a = 2.0 * k2s + jc2;
    27.0 * k2s * k2s * jc2 - a * a * a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    EP,
    DP,
    NonDegenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegeneracyProbe {
    pub k: Momentum,
    pub energies: [Complex64; 3],
    pub min_gap: f64,
    /// Condition number of the unit eigenvector matrix.
    pub coalescence: f64,
    pub verdict: Verdict,
    /// Mean energy of the closest pair.
    pub degenerate_energy: Complex64,
}

/// Distinguishes a coalescing (EP) from a non-coalescing (DP) degeneracy.
pub fn probe_degeneracy(model: &LatticeModel, k: Momentum, tol: &Tolerances) -> Result<DegeneracyProbe> {
    let h = build_bloch(model, k);
    let e = bloch::solve_bands_numeric(&h)?.energies;
    let scale = 1f64.max(e.iter().map(|z| z.norm()).fold(0.0, f64::max));
    let tol_abs = tol.tol_e * scale;
    let vectors = bloch::eigenvectors(&h, &e, tol_abs);
    let coalescence = linalg::eigenvector_condition(&vectors);

    let pairs = [(0, 1), (0, 2), (1, 2)];
    let &(a, b) = pairs
        .iter()
        .min_by(|x, y| (e[x.0] - e[x.1]).norm().total_cmp(&(e[y.0] - e[y.1]).norm()))
        .unwrap();
    let min_gap = (e[a] - e[b]).norm();
    let verdict = if min_gap >= tol_abs {
        Verdict::NonDegenerate
    } else if coalescence > tol.cond_ep {
        Verdict::EP
    } else {
        Verdict::DP
    };
    Ok(DegeneracyProbe {
        k,
        energies: e,
        min_gap,
        coalescence,
        verdict,
        degenerate_energy: (e[a] + e[b]) * 0.5,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntersectionKind {
    Separated,
    IsolatedEP,
    SingleEPRing,
    DoubleEPRing,
    ChiralDegeneratePair,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntersectionClassification {
    pub kind: IntersectionKind,
    /// `J² cos² φ / κ²`.
    pub ratio: f64,
    pub loci: Vec<Momentum>,
    /// Connected components of the degeneracy set on the (possibly refined) grid.
    pub components: usize,
    /// Grid on which the components were counted.
    pub grid: BZGrid,
    pub tolerances: Tolerances,
}

/// Largest grid tried when a level set is smaller than the grid spacing.
pub const MAX_REFINED_GRID: usize = 2048;

/// Level-set geometry of `s(k) = |Σ_Δ e^{ik·Δ}|²`.
struct StructureFactor<'a> {
    offsets: &'a [Offset],
}

impl StructureFactor<'_> {
    fn value(&self, k: Momentum) -> f64 {
        structure_factor(self.offsets, k).norm_sqr()
    }

    /// `Λ` and its two partial derivatives.
    fn with_gradient(&self, kx: f64, ky: f64) -> (Complex64, Complex64, Complex64) {
        let mut l = Complex64::new(0.0, 0.0);
        let mut dx = l;
        let mut dy = l;
        for o in self.offsets {
            let z = Complex64::from_polar(1.0, kx * o[0] as f64 + ky * o[1] as f64);
            l += z;
            dx += z * Complex64::new(0.0, o[0] as f64);
            dy += z * Complex64::new(0.0, o[1] as f64);
        }
        (l, dx, dy)
    }

    /// Largest value, attained at `Γ`.
    fn max(&self) -> f64 {
        let n = self.offsets.len() as f64;
        n * n
    }

    /// Newton projection of `k` onto `s = target` along `∇s`.
    fn project(&self, k: Momentum, target: f64) -> Option<Momentum> {
        let (mut kx, mut ky) = (k.kx, k.ky);
        for _ in 0..50 {
            let (l, dx, dy) = self.with_gradient(kx, ky);
            let f = l.norm_sqr() - target;
            let gx = 2.0 * (l.conj() * dx).re;
            let gy = 2.0 * (l.conj() * dy).re;
            let g2 = gx * gx + gy * gy;
            if g2 == 0.0 {
                return None;
            }
            let step = f / g2;
            kx -= step * gx;
            ky -= step * gy;
            if (step * g2.sqrt()).abs() < 1e-15 {
                break;
            }
        }
        let m = Momentum::new(kx, ky);
        ((self.value(m) - target).abs() <= 1e-12 * self.max()).then_some(m)
    }

    /// Newton on `Λ(k) = 0` as two real equations.
    fn zero_of_lambda(&self, k: Momentum) -> Option<Momentum> {
        let (mut kx, mut ky) = (k.kx, k.ky);
        for _ in 0..50 {
            let (l, dx, dy) = self.with_gradient(kx, ky);
            let det = dx.re * dy.im - dy.re * dx.im;
            if det.abs() < 1e-14 {
                break;
            }
            let sx = (l.re * dy.im - dy.re * l.im) / det;
            let sy = (dx.re * l.im - l.re * dx.im) / det;
            kx -= sx;
            ky -= sy;
            if sx.abs() + sy.abs() < 1e-15 {
                break;
            }
        }
        let m = Momentum::new(kx, ky);
        (self.with_gradient(m.kx, m.ky).0.norm() <= 1e-12 * self.offsets.len() as f64).then_some(m)
    }
}

/// Circular distance on the torus.
fn torus_distance(a: Momentum, b: Momentum) -> f64 {
    let d = |x: f64, y: f64| {
        let t = (x - y).rem_euclid(2.0 * PI);
        t.min(2.0 * PI - t)
    };
    d(a.kx, b.kx).hypot(d(a.ky, b.ky))
}

/// Loci of `s(k) = target` and the number of connected pieces of the set.
struct LevelSet {
    loci: Vec<Momentum>,
    components: usize,
    grid: BZGrid,
}

/// Grid points adjacent to a sign change of `s − target`, grouped by
/// 4-connectivity on the periodic grid. Loci are the crossings refined onto
/// the exact level set. The grid is doubled while the set is non-empty in
/// principle but slips between grid points.
fn level_set(sf: &StructureFactor, grid: BZGrid, target: f64) -> LevelSet {
    let mut grid = grid;
    loop {
        let values: Vec<f64> = grid
            .points()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&k| sf.value(k) - target)
            .collect();
        let above = |i: usize, j: usize| values[grid.index(i, j)] >= 0.0;
        let mut marked = vec![false; grid.len()];
        let mut loci = Vec::new();
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                // forward neighbours only, so each crossing edge is visited once
                for (ni, nj) in [((i + 1) % grid.nx, j), (i, (j + 1) % grid.ny)] {
                    if above(i, j) != above(ni, nj) {
                        marked[grid.index(i, j)] = true;
                        marked[grid.index(ni, nj)] = true;
                        let (a, b) = (values[grid.index(i, j)], values[grid.index(ni, nj)]);
                        let t = a / (a - b);
                        let p = grid.point(i, j);
                        let mut q = grid.point(ni, nj);
                        // unwrap across the zone edge
                        if q.kx < p.kx - PI {
                            q.kx += 2.0 * PI;
                        }
                        if q.ky < p.ky - PI {
                            q.ky += 2.0 * PI;
                        }
                        let guess = Momentum::new(p.kx + t * (q.kx - p.kx), p.ky + t * (q.ky - p.ky));
                        if let Some(k) = sf.project(guess, target) {
                            loci.push(k);
                        }
                    }
                }
            }
        }
        let components = count_components(&grid, &marked);
        let below_max = target < sf.max();
        if components > 0 || !below_max || target <= 0.0 || grid.nx * 2 > MAX_REFINED_GRID || grid.ny * 2 > MAX_REFINED_GRID {
            return LevelSet { loci, components, grid };
        }
        grid = BZGrid {
            nx: grid.nx * 2,
            ny: grid.ny * 2,
        };
    }
}

fn count_components(grid: &BZGrid, marked: &[bool]) -> usize {
    let mut seen = vec![false; marked.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let idx = grid.index(i, j);
            if !marked[idx] || seen[idx] {
                continue;
            }
            count += 1;
            seen[idx] = true;
            queue.push_back((i, j));
            while let Some((a, b)) = queue.pop_front() {
                for (na, nb) in grid.neighbours(a, b) {
                    let n = grid.index(na, nb);
                    if marked[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back((na, nb));
                    }
                }
            }
        }
    }
    count
}

/// Zeros of `Λ`, started from the grid minima of `s` and deduplicated.
fn lambda_zeros(sf: &StructureFactor, grid: BZGrid) -> Vec<Momentum> {
    let values: Vec<f64> = grid.points().map(|k| sf.value(k)).collect();
    let mut out: Vec<Momentum> = Vec::new();
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let v = values[grid.index(i, j)];
            let (nx, ny) = (grid.nx, grid.ny);
            let is_min = (0..3).all(|di| {
                (0..3).all(|dj| {
                    let (a, b) = ((i + nx + di - 1) % nx, (j + ny + dj - 1) % ny);
                    values[grid.index(a, b)] >= v
                })
            });
            if !is_min {
                continue;
            }
            if let Some(k) = sf.zero_of_lambda(grid.point(i, j)) {
                if out.iter().all(|&o| torus_distance(o, k) > 1e-8) {
                    out.push(k);
                }
            }
        }
    }
    out.sort_by(|a, b| a.kx.total_cmp(&b.kx).then(a.ky.total_cmp(&b.ky)));
    out
}

/// Places the model in the taxonomy of flat-band intersections.
///
/// Chiral models (`J = 0` or `cos φ = 0`) have bands `0, ±√(2κ²s + J² − γ²)`,
/// degenerate where `2κ²s = γ² − J²`. Otherwise the flat band must exist and
/// the degeneracies sit on the level set `s = r`, whose connected pieces
/// decide between one and two rings.
pub fn classify(model: &LatticeModel, grid: BZGrid, tol: &Tolerances) -> Result<IntersectionClassification> {
    tol.validate()?;
    let form = model
        .generic_form()
        .ok_or_else(|| Error::InvalidModel(format!("model '{}' does not have the generic flat-band form", model.name)))?;
    if form.has_bb {
        return Err(Error::InvalidModel(format!(
            "model '{}' has B-B couplings; the intersection taxonomy needs the bare generic form",
            model.name
        )));
    }
    let params = &model.params;
    let sf = StructureFactor { offsets: &form.offsets };
    let ratio = params.ratio();
    let out = |kind, loci, components, grid| IntersectionClassification {
        kind,
        ratio,
        loci,
        components,
        grid,
        tolerances: *tol,
    };

    if params.is_chiral() {
        let k2 = params.kappa * params.kappa;
        let target = (params.gamma * params.gamma - params.j * params.j) / (2.0 * k2);
        let (loci, components, grid) = if target == 0.0 {
            let zeros = lambda_zeros(&sf, grid);
            let n = zeros.len();
            (zeros, n, grid)
        } else if target > 0.0 && target <= sf.max() {
            let ls = level_set(&sf, grid, target);
            (ls.loci, ls.components, ls.grid)
        } else {
            (Vec::new(), 0, grid)
        };
        return Ok(out(IntersectionKind::ChiralDegeneratePair, loci, components, grid));
    }

    let residual = params.flat_band_residual();
    if residual > 1e-12 * (1.0 + params.j) {
        return Err(Error::FlatBandCondition { residual });
    }
    let s_max = sf.max();
    if (ratio - s_max).abs() <= 1e-9 * s_max {
        return Ok(out(IntersectionKind::IsolatedEP, vec![Momentum::GAMMA], 1, grid));
    }
    if ratio > s_max {
        return Ok(out(IntersectionKind::Separated, Vec::new(), 0, grid));
    }
    let ls = level_set(&sf, grid, ratio);
    let kind = match ls.components {
        // unresolved even on the finest grid
        0 => return Err(Error::NoConvergence),
        1 => IntersectionKind::SingleEPRing,
        _ => IntersectionKind::DoubleEPRing,
    };
    Ok(out(kind, ls.loci, ls.components, ls.grid))
}
