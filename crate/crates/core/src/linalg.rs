//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix3c = Matrix3<Complex64>;
pub type Vector3c = Vector3<Complex64>;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a general complex matrix from its Schur form.
pub fn eigenvalues(m: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if n == 0 {
        return Ok(Vec::new());
    }
    if scale == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    // unit scale keeps the deflation test meaningful for tiny matrices
    let unit = m / Complex64::new(scale, 0.0);
    let adjoint_gap = (&unit - unit.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if adjoint_gap <= 4.0 * f64::EPSILON {
        // Hermitian input: the symmetric solver always converges
        let h = (&unit + unit.adjoint()) * Complex64::new(0.5, 0.0);
        let mut out: Vec<Complex64> = h.symmetric_eigenvalues().iter().map(|&e| Complex64::new(e * scale, 0.0)).collect();
        out.sort_by(cmp_energy);
        return Ok(out);
    }
    // Deflating at exactly ε can stall on large degenerate clusters, so the
    // threshold is a few ulps. A reversal similarity gives the QR sweep a
    // different Hessenberg form to try.
    let rev = || DMatrix::from_fn(n, n, |i, j| unit[(n - 1 - i, n - 1 - j)]);
    let budget = SCHUR_MAX_ITER.max(200 * n);
    let schur = [4.0, 16.0]
        .iter()
        .flat_map(|&f| [(f, false), (f, true)])
        .find_map(|(f, reversed)| {
            let m = if reversed { rev() } else { unit.clone() };
            nalgebra::Schur::try_new(m, f * f64::EPSILON, budget)
        })
        .ok_or(Error::NoConvergence)?;
    let (_, t) = schur.unpack();
    let t = t * Complex64::new(scale, 0.0);
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        // a leftover 2×2 block is solved directly
        if i + 1 < n && t[(i + 1, i)].norm() > f64::EPSILON * scale {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5).powi(2) + b * c;
            let sq = disc.sqrt();
            out.push(half_tr + sq);
            out.push(half_tr - sq);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NoConvergence);
    }
    Ok(out)
}

/// Ascending by real part, ties by imaginary part.
pub fn cmp_energy(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Largest pairwise distance after greedily matching the closest pairs first.
/// Returns `f64::INFINITY` when the lengths differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for (d, i, j) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        worst = worst.max(d);
        matched += 1;
        if matched == a.len() {
            break;
        }
    }
    worst
}

/// 2-norm condition number, capped at `1/ε`.
pub fn condition_number(m: DMatrix<Complex64>) -> f64 {
    let cap = 1.0 / f64::EPSILON;
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= max / cap || min == 0.0 {
        cap
    } else {
        max / min
    }
}

/// Condition number of the matrix whose columns are `vectors`.
pub fn eigenvector_condition(vectors: &[Vector3c; 3]) -> f64 {
    condition_number(DMatrix::from_fn(3, 3, |i, j| vectors[j][i]))
}
