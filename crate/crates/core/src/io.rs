//! File formats: band and trace CSV, JSON reports and state files.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{BZGrid, BandSurface, IntersectionClassification, IntersectionKind, Tolerances};
use crate::error::{Error, Result};
use crate::realspace::{EvolutionTrace, RealLattice};

/// C's `%.17g`: 17 significant digits, trailing zeros removed, exponent
/// form below `1e−4` and from `1e17`, independent of locale.
pub fn fmt_g17(x: f64) -> String {
    const PREC: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // the exponent must come from the rounded value, as 9.99…e4 may round up
    let sci = format!("{:.*e}", (PREC - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PREC).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PREC - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const BAND_CSV_HEADER: &str = "kx,ky,band_index,re_E,im_E";
pub const TRACE_CSV_HEADER: &str = "t,site_m,site_n,sublattice,intensity";

/// One line per grid point and band, grid points in row-major order.
pub fn write_band_csv(w: &mut dyn Write, surface: &BandSurface) -> Result<()> {
    writeln!(w, "{BAND_CSV_HEADER}")?;
    for (k, bands) in surface.iter() {
        let (kx, ky) = (fmt_g17(k.kx), fmt_g17(k.ky));
        for (i, e) in bands.energies.iter().enumerate() {
            writeln!(w, "{kx},{ky},{i},{},{}", fmt_g17(e.re), fmt_g17(e.im))?;
        }
    }
    Ok(())
}

pub fn sublattice_name(s: usize) -> &'static str {
    ["A", "B", "C"][s]
}

/// Per-site intensities for every `stride`-th recorded time (the last time is
/// always written).
pub fn write_trace_csv(w: &mut dyn Write, lattice: &RealLattice, trace: &EvolutionTrace, stride: usize) -> Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    let stride = stride.max(1);
    let last = trace.times.len().saturating_sub(1);
    for (step, (t, row)) in trace.times.iter().zip(&trace.intensities).enumerate() {
        if step % stride != 0 && step != last {
            continue;
        }
        let t = fmt_g17(*t);
        for (i, x) in row.iter().enumerate() {
            let s = lattice.site(i);
            writeln!(w, "{t},{},{},{},{}", s.m, s.n, sublattice_name(s.sublattice), fmt_g17(*x))?;
        }
    }
    Ok(())
}

/// `[re, im]`.
pub fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct TolerancesJson {
    #[serde(rename = "tol_E")]
    tol_e: f64,
    #[serde(rename = "cond_EP")]
    cond_ep: f64,
    tol_flat: f64,
}

impl From<&Tolerances> for TolerancesJson {
    fn from(t: &Tolerances) -> Self {
        TolerancesJson {
            tol_e: t.tol_e,
            cond_ep: t.cond_ep,
            tol_flat: t.flat,
        }
    }
}

#[derive(Serialize)]
struct ClassificationJson {
    kind: IntersectionKind,
    ratio: f64,
    loci: Vec<[f64; 2]>,
    components: usize,
    grid: [usize; 2],
    tolerances: TolerancesJson,
}

pub fn classification_json(c: &IntersectionClassification) -> serde_json::Value {
    let out = ClassificationJson {
        kind: c.kind,
        ratio: c.ratio,
        loci: c.loci.iter().map(|k| [k.kx, k.ky]).collect(),
        components: c.components,
        grid: [c.grid.nx, c.grid.ny],
        tolerances: (&c.tolerances).into(),
    };
    serde_json::to_value(out).expect("plain data")
}

pub fn tolerances_json(t: &Tolerances) -> serde_json::Value {
    serde_json::to_value(TolerancesJson::from(t)).expect("plain data")
}

pub fn grid_json(g: &BZGrid) -> serde_json::Value {
    serde_json::json!([g.nx, g.ny])
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct StateFile(Vec<[f64; 2]>);

/// A state as a JSON array of `[re, im]` pairs.
pub fn state_to_json(psi: &[Complex64]) -> String {
    serde_json::to_string(&StateFile(psi.iter().map(|z| pair(*z)).collect())).expect("plain data")
}

pub fn state_from_json(s: &str) -> Result<Vec<Complex64>> {
    let StateFile(v) = serde_json::from_str(s)?;
    let out: Vec<Complex64> = v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
    if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidConfig("state file contains non-finite amplitudes".into()));
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(w: &mut dyn Write, v: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, v)?;
    writeln!(w)?;
    Ok(())
}
