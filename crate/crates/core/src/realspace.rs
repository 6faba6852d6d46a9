//! Finite lattices in real space: assembly, compact localized states and
//! time evolution.
//!
//! Site `(m, n, s)` has flat index `3(m·N + n) + s`. A coupling `s → t` with
//! offset `Δ` contributes `H[(r, t), (r + Δ, s)] = amp` for every cell `r`,
//! which is the real-space counterpart of the Bloch convention.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{self, Momentum};
use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, A, B, C, NUM_SUBLATTICES};
use crate::linalg;

/// Largest dimension handled by the dense routines.
pub const DENSE_BUDGET: usize = 3000;

/// Residual bound for compact localized states.
pub const CLS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Boundary> {
        match s.to_ascii_lowercase().as_str() {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            _ => Err(Error::InvalidLattice(format!("unknown boundary '{s}' (open|periodic)"))),
        }
    }
}

/// Unit-cell coordinates `(m, n)`, zero-based.
pub type Cell = (usize, usize);

/// A site: cell plus sublattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Site {
    pub m: usize,
    pub n: usize,
    pub sublattice: usize,
}

/// Assembled real-space Hamiltonian on `M × N` cells.
#[derive(Clone, Debug)]
pub struct RealLattice {
    pub m: usize,
    pub n: usize,
    pub boundary: Boundary,
    pub matrix: CsrMatrix<Complex64>,
}

impl RealLattice {
    pub fn dim(&self) -> usize {
        NUM_SUBLATTICES * self.m * self.n
    }

    pub fn site_index(&self, m: usize, n: usize, sublattice: usize) -> usize {
        NUM_SUBLATTICES * (m * self.n + n) + sublattice
    }

    pub fn site(&self, index: usize) -> Site {
        let cell = index / NUM_SUBLATTICES;
        Site {
            m: cell / self.n,
            n: cell % self.n,
            sublattice: index % NUM_SUBLATTICES,
        }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.0 < self.m && cell.1 < self.n
    }

    /// `cell + Δ`, wrapped or `None` when it leaves an open lattice.
    pub fn shift(&self, cell: Cell, offset: [i32; 2]) -> Option<Cell> {
        let a = cell.0 as i64 + offset[0] as i64;
        let b = cell.1 as i64 + offset[1] as i64;
        match self.boundary {
            Boundary::Periodic => Some((a.rem_euclid(self.m as i64) as usize, b.rem_euclid(self.n as i64) as usize)),
            Boundary::Open => {
                let inside = (0..self.m as i64).contains(&a) && (0..self.n as i64).contains(&b);
                inside.then_some((a as usize, b as usize))
            }
        }
    }

    pub fn apply(&self, psi: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * psi
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from(&self.matrix)
    }

    fn check_budget(&self) -> Result<()> {
        if self.dim() > DENSE_BUDGET {
            return Err(Error::OverBudget {
                dim: self.dim(),
                budget: DENSE_BUDGET,
            });
        }
        Ok(())
    }
}

/// Builds the sparse Hamiltonian. Open boundaries drop bonds that leave the
/// lattice; periodic ones wrap and need at least two cells per direction.
pub fn assemble(model: &LatticeModel, m: usize, n: usize, boundary: Boundary) -> Result<RealLattice> {
    model.validate()?;
    if m == 0 || n == 0 {
        return Err(Error::InvalidLattice(format!("lattice needs at least one cell, got {m}x{n}")));
    }
    if boundary == Boundary::Periodic && (m < 2 || n < 2) {
        return Err(Error::InvalidLattice(format!(
            "periodic lattices need M, N >= 2 so that no bond wraps onto itself, got {m}x{n}"
        )));
    }
    let shell = RealLattice {
        m,
        n,
        boundary,
        matrix: CsrMatrix::zeros(0, 0),
    };
    let dim = shell.dim();
    let mut coo = CooMatrix::new(dim, dim);
    for a in 0..m {
        for b in 0..n {
            for s in 0..NUM_SUBLATTICES {
                if model.onsite[s] != Complex64::new(0.0, 0.0) {
                    let i = shell.site_index(a, b, s);
                    coo.push(i, i, model.onsite[s]);
                }
            }
            for c in &model.couplings {
                if let Some((ta, tb)) = shell.shift((a, b), c.offset) {
                    coo.push(shell.site_index(a, b, c.to), shell.site_index(ta, tb, c.from), c.amp);
                }
            }
        }
    }
    // duplicates (periodic wrap of short lattices) are summed here
    Ok(RealLattice {
        matrix: CsrMatrix::from(&coo),
        ..shell
    })
}

/// All `3MN` eigenvalues, ascending by real then imaginary part.
pub fn spectrum_realspace(lattice: &RealLattice) -> Result<Vec<Complex64>> {
    lattice.check_budget()?;
    let mut e = linalg::eigenvalues(lattice.to_dense())?;
    e.sort_by(linalg::cmp_energy);
    Ok(e)
}

/// Union of Bloch spectra over the momenta `2π(m/M, n/N)` allowed on a
/// periodic `M × N` lattice.
pub fn bloch_union(model: &LatticeModel, m: usize, n: usize) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(NUM_SUBLATTICES * m * n);
    for a in 0..m {
        for b in 0..n {
            let k = Momentum::new(2.0 * PI * a as f64 / m as f64, 2.0 * PI * b as f64 / n as f64);
            out.extend(bloch::solve_bands(model, k)?.energies);
        }
    }
    out.sort_by(linalg::cmp_energy);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierReport {
    pub m: usize,
    pub n: usize,
    /// Largest distance after matching both spectra as multisets.
    pub max_distance: f64,
    pub consistent: bool,
}

/// Compares the periodic real-space spectrum with the Bloch bands.
pub fn fourier_consistency(model: &LatticeModel, m: usize, n: usize, tol: f64) -> Result<FourierReport> {
    let lattice = assemble(model, m, n, Boundary::Periodic)?;
    let real = spectrum_realspace(&lattice)?;
    let bloch = bloch_union(model, m, n)?;
    let max_distance = linalg::multiset_distance(&real, &bloch);
    Ok(FourierReport {
        m,
        n,
        max_distance,
        consistent: max_distance < tol,
    })
}

/// Compact localized state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CLSState {
    pub amplitudes: Vec<Complex64>,
    /// Flat indices with non-zero amplitude, ascending.
    pub support: Vec<usize>,
    pub energy: Complex64,
    /// `‖Hψ − Eψ‖ / ‖ψ‖`.
    pub residual: f64,
}

impl CLSState {
    fn build(lattice: &RealLattice, entries: &[(usize, Complex64)], energy: Complex64) -> Result<CLSState> {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); lattice.dim()];
        for &(i, z) in entries {
            amplitudes[i] = z;
        }
        let mut support: Vec<usize> = (0..amplitudes.len())
            .filter(|&i| amplitudes[i] != Complex64::new(0.0, 0.0))
            .collect();
        support.sort_unstable();
        let residual = eigen_residual(lattice, &amplitudes, energy);
        let state = CLSState {
            amplitudes,
            support,
            energy,
            residual,
        };
        if residual.is_nan() || residual >= CLS_TOL {
            return Err(Error::InvalidCls(format!("eigen-residual {residual:e} exceeds {CLS_TOL:e}")));
        }
        Ok(state)
    }

    pub fn vector(&self) -> DVector<Complex64> {
        DVector::from_vec(self.amplitudes.clone())
    }
}

/// `‖Hψ − Eψ‖ / ‖ψ‖`.
pub fn eigen_residual(lattice: &RealLattice, psi: &[Complex64], energy: Complex64) -> f64 {
    let v = DVector::from_column_slice(psi);
    let r = lattice.apply(&v) - &v * energy;
    r.norm() / v.norm()
}

fn check_cell(lattice: &RealLattice, cell: Cell) -> Result<()> {
    if !lattice.contains(cell) {
        return Err(Error::InvalidCls(format!(
            "cell {cell:?} is outside the {}x{} lattice",
            lattice.m, lattice.n
        )));
    }
    Ok(())
}

/// `(−1, 0, 1)` on the A, B, C sites of one cell, at energy `−J cos φ`.
/// Needs `γ = J sin φ`.
pub fn make_cls_single(model: &LatticeModel, cell: Cell, lattice: &RealLattice) -> Result<CLSState> {
    let residual = model.params.flat_band_residual();
    if residual > CLS_TOL {
        return Err(Error::FlatBandCondition { residual });
    }
    check_cell(lattice, cell)?;
    let one = Complex64::new(1.0, 0.0);
    let energy = Complex64::new(model.params.flat_band_energy() + 0.0, 0.0);
    CLSState::build(
        lattice,
        &[
            (lattice.site_index(cell.0, cell.1, A), -one),
            (lattice.site_index(cell.0, cell.1, C), one),
        ],
        energy,
    )
}

/// Cells reached by the B site of `anchor`: the anchor itself followed by
/// `anchor + Δ` for each B-coupling offset, under the lattice's boundary.
pub fn cls_cells(model: &LatticeModel, anchor: Cell, lattice: &RealLattice) -> Result<Vec<Cell>> {
    let form = model
        .generic_form()
        .ok_or_else(|| Error::InvalidCls(format!("model '{}' lacks the generic flat-band form", model.name)))?;
    check_cell(lattice, anchor)?;
    let mut cells = vec![anchor];
    for &o in &form.offsets {
        if let Some(c) = lattice.shift(anchor, o) {
            if !cells.contains(&c) {
                cells.push(c);
            }
        }
    }
    Ok(cells)
}

/// Zero-energy state of a chiral model (`J = 0` or `cos φ = 0`) spread over
/// the cells that share the first cell's B site. A and C carry `−1` and `1`
/// on every cell, and the first cell's B site carries `−(iγ + Je^{−iφ})/κ`,
/// which is `i(J − γ)/κ` at `φ = π/2`. `cells` must be exactly the pattern of
/// [`cls_cells`] for `cells[0]`, in any order after the first.
pub fn make_cls_three(model: &LatticeModel, cells: &[Cell], lattice: &RealLattice) -> Result<CLSState> {
    let p = &model.params;
    if !p.is_chiral() {
        return Err(Error::NotChiral);
    }
    let first = *cells.first().ok_or_else(|| Error::InvalidCls("no cells given".into()))?;
    for &c in cells {
        check_cell(lattice, c)?;
    }
    let mut want = cls_cells(model, first, lattice)?;
    let mut got = cells.to_vec();
    want.sort_unstable();
    got.sort_unstable();
    got.dedup();
    if want != got || got.len() != cells.len() {
        return Err(Error::InvalidCls(format!(
            "cells {cells:?} do not match the coupling pattern of the B site in {first:?}, expected {want:?}"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let psi_b = -(Complex64::new(0.0, p.gamma) + p.phi.unit().conj() * p.j) / p.kappa;
    let mut entries = Vec::with_capacity(2 * cells.len() + 1);
    for &(a, b) in cells {
        entries.push((lattice.site_index(a, b, A), -one));
        entries.push((lattice.site_index(a, b, C), one));
    }
    entries.push((lattice.site_index(first.0, first.1, B), psi_b));
    CLSState::build(lattice, &entries, Complex64::new(0.0, 0.0))
}

/// Amplitude of the B site of `cell` in a state.
pub fn b_amplitude(state: &CLSState, lattice: &RealLattice, cell: Cell) -> Complex64 {
    state.amplitudes[lattice.site_index(cell.0, cell.1, B)]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// `intensities[t][i] = |ψ_i(t)|²`.
    pub intensities: Vec<Vec<f64>>,
    pub total_norm: Vec<f64>,
    pub final_state: Vec<Complex64>,
}

impl EvolutionTrace {
    /// Largest `|I_i(t) − I_i(0)|` over the whole trace.
    pub fn max_intensity_drift(&self) -> f64 {
        let first = &self.intensities[0];
        self.intensities
            .iter()
            .flat_map(|row| row.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest intensity outside `support` up to time `t_max`.
    pub fn max_off_support(&self, support: &[usize], t_max: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.intensities)
            .take_while(|(t, _)| **t <= t_max + 1e-12)
            .flat_map(|(_, row)| row.iter().enumerate().filter(|(i, _)| !support.contains(i)).map(|(_, x)| *x))
            .fold(0.0, f64::max)
    }
}

fn propagator(h: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
    (h * Complex64::new(0.0, -dt)).exp()
}

/// `ψ(t) = e^{−iHt} ψ₀` sampled every `dt` up to `t_end`; the last step is
/// shortened to land on `t_end`. One propagator per step length, computed by
/// scaling and squaring, is reused for all steps.
pub fn evolve(lattice: &RealLattice, psi0: &[Complex64], t_end: f64, dt: f64) -> Result<EvolutionTrace> {
    lattice.check_budget()?;
    if psi0.len() != lattice.dim() {
        return Err(Error::InvalidConfig(format!(
            "initial state has {} entries, lattice has {}",
            psi0.len(),
            lattice.dim()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidConfig(format!("t_end must be non-negative, got {t_end}")));
    }
    let mut psi = DVector::from_column_slice(psi0);
    if psi.norm() == 0.0 || !psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidConfig("initial state must be finite with non-zero norm".into()));
    }

    // integer step count guards against drift in t = k·dt
    let ratio = t_end / dt;
    let mut full = ratio.floor() as usize;
    if ratio - full as f64 > 1.0 - 1e-9 {
        full += 1;
    }
    let remainder = t_end - full as f64 * dt;
    let h = lattice.to_dense();
    let u = propagator(&h, dt);
    let u_last = (remainder > 1e-12 * dt).then(|| propagator(&h, remainder));

    let record = |psi: &DVector<Complex64>, trace: &mut EvolutionTrace, t: f64| -> Result<()> {
        let row: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { time: t });
        }
        trace.total_norm.push(row.iter().sum());
        trace.intensities.push(row);
        trace.times.push(t);
        Ok(())
    };
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        intensities: Vec::new(),
        total_norm: Vec::new(),
        final_state: Vec::new(),
    };
    record(&psi, &mut trace, 0.0)?;
    for step in 1..=full {
        psi = &u * &psi;
        record(&psi, &mut trace, step as f64 * dt)?;
    }
    if let Some(u_last) = u_last {
        psi = &u_last * &psi;
        record(&psi, &mut trace, t_end)?;
    }
    trace.final_state = psi.iter().copied().collect();
    Ok(trace)
}
