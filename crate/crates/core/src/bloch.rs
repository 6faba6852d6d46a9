//! Momentum-space Hamiltonians and their three bands.
//!
//! The Bloch entry `(t, s)` is the on-site term plus `Σ amp · e^{i k·Δ}` over
//! couplings `s → t`. For the Lieb-extended model this gives
//!
//! ```text
//!        | −iγ      κΛ*(k)   J e^{−iφ} |
//! H_k =  | κΛ(k)    0        κΛ(k)     |      Λ(k) = 1 + e^{ikx} + e^{iky}
//!        | J e^{iφ} κΛ*(k)   iγ        |
//! ```
//!
//! Bands come from two independent routes: the closed-form roots of the
//! depressed characteristic cubic and a Schur decomposition of the matrix.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::cubic::depressed_cubic_roots;
use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, Offset, NUM_SUBLATTICES};
use crate::linalg::{self, cmp_energy, Matrix3c, Vector3c};

/// Wave vector with components in `[−π, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Momentum {
    pub kx: f64,
    pub ky: f64,
}

fn wrap(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        x
    } else {
        let w = (x + PI).rem_euclid(2.0 * PI) - PI;
        if w >= PI {
            -PI
        } else {
            w
        }
    }
}

impl Momentum {
    pub fn new(kx: f64, ky: f64) -> Momentum {
        Momentum {
            kx: wrap(kx),
            ky: wrap(ky),
        }
    }

    pub const GAMMA: Momentum = Momentum { kx: 0.0, ky: 0.0 };

    pub fn neg(&self) -> Momentum {
        Momentum::new(-self.kx, -self.ky)
    }

    /// `e^{i k·Δ}`.
    pub fn phase(&self, offset: Offset) -> Complex64 {
        let arg = self.kx * offset[0] as f64 + self.ky * offset[1] as f64;
        Complex64::new(arg.cos(), arg.sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochMatrix {
    pub entries: Matrix3c,
    pub momentum: Momentum,
}

impl BlochMatrix {
    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_iterator(3, 3, self.entries.iter().cloned())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.entries - self.entries.adjoint()).iter().all(|z| z.norm() <= tol)
    }
}

pub fn build_bloch(model: &LatticeModel, k: Momentum) -> BlochMatrix {
    let mut h = Matrix3c::zeros();
    for s in 0..NUM_SUBLATTICES {
        h[(s, s)] = model.onsite[s];
    }
    for c in &model.couplings {
        h[(c.to, c.from)] += c.amp * k.phase(c.offset);
    }
    BlochMatrix { entries: h, momentum: k }
}

/// `Σ_Δ e^{i k·Δ}` over a set of offsets.
pub fn structure_factor(offsets: &[Offset], k: Momentum) -> Complex64 {
    offsets.iter().map(|&o| k.phase(o)).sum()
}

/// `s_k = 2cos(kx − ky) + 2(cos kx + cos ky) + 3`, which equals `|Λ(k)|²`.
pub fn s_k(k: Momentum) -> f64 {
    2.0 * (k.kx - k.ky).cos() + 2.0 * (k.kx.cos() + k.ky.cos()) + 3.0
}

/// Coefficients of the depressed cubic `E³ + pE + q = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CubicCoeffs {
    pub p: Complex64,
    pub q: Complex64,
}

impl CubicCoeffs {
    fn scale(&self) -> f64 {
        1f64.max(self.p.norm()).max(self.q.norm())
    }

    /// `(p, q)` as reals when both imaginary parts vanish to `1e−12` relative.
    pub fn as_real(&self) -> Option<(f64, f64)> {
        let tol = 1e-12 * self.scale();
        (self.p.im.abs() <= tol && self.q.im.abs() <= tol).then_some((self.p.re, self.q.re))
    }

    /// `|E³ + pE + q| / max(1, |p|, |q|)`.
    pub fn residual(&self, e: Complex64) -> f64 {
        (e * e * e + self.p * e + self.q).norm() / self.scale()
    }
}

/// Trace, sum of principal 2-minors and determinant of a 3×3 matrix.
pub fn invariants(h: &Matrix3c) -> (Complex64, Complex64, Complex64) {
    let tr = h[(0, 0)] + h[(1, 1)] + h[(2, 2)];
    let m2 = |i: usize, j: usize| h[(i, i)] * h[(j, j)] - h[(i, j)] * h[(j, i)];
    let c2 = m2(0, 1) + m2(0, 2) + m2(1, 2);
    let det = h[(0, 0)] * (h[(1, 1)] * h[(2, 2)] - h[(1, 2)] * h[(2, 1)]) - h[(0, 1)] * (h[(1, 0)] * h[(2, 2)] - h[(1, 2)] * h[(2, 0)])
        + h[(0, 2)] * (h[(1, 0)] * h[(2, 1)] - h[(1, 1)] * h[(2, 0)]);
    (tr, c2, det)
}

pub fn characteristic_of(h: &BlochMatrix) -> Result<CubicCoeffs> {
    let (tr, c2, det) = invariants(&h.entries);
    if tr.norm() > 1e-12 {
        return Err(Error::NotDepressed { trace: tr.norm() });
    }
    Ok(CubicCoeffs { p: c2, q: -det })
}

/// `det(E − H_k) = E³ + pE + q`; fails when the trace does not vanish.
pub fn characteristic(model: &LatticeModel, k: Momentum) -> Result<CubicCoeffs> {
    characteristic_of(&build_bloch(model, k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BandOrdering {
    /// Ascending real part, then ascending imaginary part.
    RealThenImag,
    /// Permuted to follow eigenvector overlap along a path.
    Continuity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandSet {
    pub energies: [Complex64; 3],
    pub eigenvectors: Option<[Vector3c; 3]>,
    pub ordering: BandOrdering,
}

impl BandSet {
    fn sorted(energies: [Complex64; 3], eigenvectors: Option<[Vector3c; 3]>) -> BandSet {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| cmp_energy(&energies[a], &energies[b]));
        BandSet {
            energies: idx.map(|i| energies[i]),
            eigenvectors: eigenvectors.map(|v| idx.map(|i| v[i])),
            ordering: BandOrdering::RealThenImag,
        }
    }

    /// Smallest pairwise `|E_i − E_j|`.
    pub fn min_gap(&self) -> f64 {
        let e = &self.energies;
        (e[0] - e[1]).norm().min((e[0] - e[2]).norm()).min((e[1] - e[2]).norm())
    }

    /// Distance from `target` to the nearest band.
    pub fn distance_to(&self, target: Complex64) -> f64 {
        self.energies.iter().map(|e| (e - target).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Closed-form roots of a real depressed cubic.
pub fn solve_bands_exact(coeffs: &CubicCoeffs) -> Result<BandSet> {
    let (p, q) = coeffs.as_real().ok_or_else(|| Error::ComplexCoefficients {
        p: coeffs.p.to_string(),
        q: coeffs.q.to_string(),
    })?;
    Ok(BandSet::sorted(depressed_cubic_roots(p, q), None))
}

/// Eigenvalues from a Schur decomposition of the full matrix.
pub fn solve_bands_numeric(h: &BlochMatrix) -> Result<BandSet> {
    let e = linalg::eigenvalues(h.to_dmatrix())?;
    Ok(BandSet::sorted([e[0], e[1], e[2]], None))
}

/// `det(E − H) = E³ − tE² + c₂E − det` rewritten in `x = E − t/3` as
/// `(t/3, x³ + px + q)`, when all three invariants are real.
pub fn shifted_cubic(h: &BlochMatrix) -> Option<(f64, f64, f64)> {
    let (tr, c2, det) = invariants(&h.entries);
    let scale = 1f64.max(tr.norm()).max(c2.norm()).max(det.norm());
    let tol = 1e-12 * scale;
    if tr.im.abs() > tol || c2.im.abs() > tol || det.im.abs() > tol {
        return None;
    }
    let (t, c2, det) = (tr.re, c2.re, det.re);
    let shift = t / 3.0;
    let p = c2 - t * shift;
    let q = -det + c2 * shift - 2.0 * shift * shift * shift;
    Some((shift, p, q))
}

/// Closed-form roots whenever the characteristic polynomial is real (the
/// trace is shifted out first), Schur decomposition otherwise.
pub fn solve_bands(model: &LatticeModel, k: Momentum) -> Result<BandSet> {
    let h = build_bloch(model, k);
    match shifted_cubic(&h) {
        Some((shift, p, q)) => {
            let roots = depressed_cubic_roots(p, q).map(|x| x + shift);
            Ok(BandSet::sorted(roots, None))
        }
        None => solve_bands_numeric(&h),
    }
}

/// Groups indices whose energies lie within `tol` of each other (transitively).
fn clusters(energies: &[Complex64; 3], tol: f64) -> Vec<Vec<usize>> {
    let mut label = [0usize, 1, 2];
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (energies[i] - energies[j]).norm() < tol {
                let (from, to) = (label[j], label[i]);
                for l in label.iter_mut() {
                    if *l == from {
                        *l = to;
                    }
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for root in 0..3 {
        let members: Vec<usize> = (0..3).filter(|&i| label[i] == root).collect();
        if !members.is_empty() {
            out.push(members);
        }
    }
    out
}

/// Right singular vectors of `H − E` for the smallest singular values,
/// paired with those singular values (ascending).
fn null_vectors(h: &Matrix3c, e: Complex64) -> Vec<(f64, Vector3c)> {
    let shifted = h - Matrix3c::identity() * e;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut out: Vec<(f64, Vector3c)> = (0..3)
        .map(|i| {
            let row = v_t.row(i);
            let v = Vector3c::new(row[0].conj(), row[1].conj(), row[2].conj());
            (svd.singular_values[i], v.normalize())
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Unit eigenvectors for `energies`. Energies closer than `tol` are treated as
/// one cluster: the cluster gets as many independent vectors as `H − Ē` has
/// singular values below `tol`, and the missing ones repeat the first, so a
/// defective (coalesced) cluster yields parallel columns.
pub fn eigenvectors(h: &BlochMatrix, energies: &[Complex64; 3], tol: f64) -> [Vector3c; 3] {
    let mut out = [Vector3c::zeros(); 3];
    for group in clusters(energies, tol) {
        let mean = group.iter().map(|&i| energies[i]).sum::<Complex64>() / group.len() as f64;
        let nulls = null_vectors(&h.entries, mean);
        let independent = nulls.iter().take(group.len()).filter(|(s, _)| *s < tol).count().max(1);
        for (slot, &i) in group.iter().enumerate() {
            out[i] = nulls[slot.min(independent - 1)].1;
        }
    }
    out
}

/// Numeric bands with eigenvectors attached.
pub fn solve_bands_with_vectors(h: &BlochMatrix, tol: f64) -> Result<BandSet> {
    let bands = solve_bands_numeric(h)?;
    let vectors = eigenvectors(h, &bands.energies, tol);
    Ok(BandSet {
        eigenvectors: Some(vectors),
        ..bands
    })
}

/// Reorders each band set along a path so that band `i` keeps maximal
/// eigenvector overlap with band `i` at the previous point. Band sets
/// without eigenvectors are passed through in ascending order.
pub fn track_bands(path: &[BandSet]) -> Vec<BandSet> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out: Vec<BandSet> = Vec::with_capacity(path.len());
    for bands in path {
        let next = match (out.last().and_then(|b| b.eigenvectors), bands.eigenvectors) {
            (Some(prev), Some(cur)) => {
                let score = |p: &[usize; 3]| -> f64 { (0..3).map(|i| prev[i].dotc(&cur[p[i]]).norm()).sum() };
                let best = PERMS.iter().max_by(|a, b| score(a).total_cmp(&score(b))).unwrap();
                BandSet {
                    energies: best.map(|i| bands.energies[i]),
                    eigenvectors: Some(best.map(|i| cur[i])),
                    ordering: BandOrdering::Continuity,
                }
            }
            _ => BandSet {
                ordering: BandOrdering::Continuity,
                ..bands.clone()
            },
        };
        out.push(next);
    }
    out
}

fn permute_sym(h: &Matrix3c, signs: [f64; 3]) -> Matrix3c {
    // (P H P)_{ij} = σ_i σ_j H_{2−i, 2−j}
    Matrix3c::from_fn(|i, j| h[(2 - i, 2 - j)] * (signs[i] * signs[j]))
}

/// `max_k ‖R H_k* R − H_{−k}‖` with `R` the anti-diagonal permutation.
pub fn time_reversal_residual(model: &LatticeModel, ks: &[Momentum]) -> f64 {
    ks.iter()
        .map(|&k| {
            let h = build_bloch(model, k).entries.map(|z| z.conj());
            let lhs = permute_sym(&h, [1.0, 1.0, 1.0]);
            (lhs - build_bloch(model, k.neg()).entries)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `max_k ‖C H_k C + H_k‖` with `C = [[0,0,1],[0,−1,0],[1,0,0]]`.
pub fn chiral_residual(model: &LatticeModel, ks: &[Momentum]) -> f64 {
    ks.iter()
        .map(|&k| {
            let h = build_bloch(model, k).entries;
            (permute_sym(&h, [1.0, -1.0, 1.0]) + h).iter().map(|z| z.norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn check_time_reversal(model: &LatticeModel, ks: &[Momentum]) -> bool {
    !ks.is_empty() && time_reversal_residual(model, ks) < SYMMETRY_TOL
}

pub fn check_chiral(model: &LatticeModel, ks: &[Momentum]) -> bool {
    !ks.is_empty() && chiral_residual(model, ks) < SYMMETRY_TOL
}

/// `|γ − J sin φ|`; zero on the flat-band manifold.
pub fn flat_band_residual(model: &LatticeModel) -> f64 {
    model.params.flat_band_residual()
}
