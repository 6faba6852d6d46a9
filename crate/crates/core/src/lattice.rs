//! Lattice descriptions and the built-in model zoo.
//!
//! Every model has three sublattices `A = 0`, `B = 1`, `C = 2` on a square grid
//! of unit cells `(m, n)`. A [`Coupling`] `s → t` with cell offset `Δ` stands for
//! the term `amp · t†(r) s(r + Δ)`, so it contributes `amp · e^{i k·Δ}` to the
//! Bloch entry `(t, s)`. Both directions of every bond are stored explicitly.
//!
//! Built-in models (all with on-site `−iγ` on A and `+iγ` on C):
//!
//! | name              | B→A offsets                  | B→C offsets           | extra        |
//! |-------------------|------------------------------|-----------------------|--------------|
//! | `lieb-original`   | (0,0) (0,1)                  | (0,0) (1,0)           | J = γ = 0    |
//! | `lieb-extended`   | (0,0) (0,1) (1,0)            | same                  |              |
//! | `tasaki`          | (0,0) (0,1) (1,0)            | same                  | B–B (±1,0) (0,±1) |
//! | `dice`            | (0,0) (1,0) (0,1) (1,1) (1,−1) (−1,1) | same         |              |
//! | `kagome-modified` | (0,0) (1,0) (0,1)            | same                  | no κ on A–C  |
//!
//! All but `lieb-original` carry the within-cell dimer `J e^{iφ}` (A→C) and
//! `J e^{−iφ}` (C→A).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::Phase;

pub const NUM_SUBLATTICES: usize = 3;
pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;

/// Cell offset `(Δm, Δn)`.
pub type Offset = [i32; 2];

pub const LIEB_OFFSETS: [Offset; 3] = [[0, 0], [0, 1], [1, 0]];
pub const DICE_OFFSETS: [Offset; 6] = [[0, 0], [1, 0], [0, 1], [1, 1], [1, -1], [-1, 1]];
pub const KAGOME_OFFSETS: [Offset; 3] = [[0, 0], [1, 0], [0, 1]];
/// One direction of each B–B bond; the reverse partners supply (−1,0) and (0,−1).
const TASAKI_BB_BONDS: [Offset; 2] = [[1, 0], [0, 1]];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub kappa: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub phi: Phase,
    pub gamma: f64,
}

impl Params {
    pub fn new(kappa: f64, j: f64, phi: Phase, gamma: f64) -> Result<Params> {
        let p = Params { kappa, j, phi, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Parameters on the flat-band manifold, `γ = J sin φ`.
    pub fn flat_band(kappa: f64, j: f64, phi: Phase) -> Result<Params> {
        Params::new(kappa, j, phi, j * phi.sin())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.j.is_finite() && self.j >= 0.0) {
            return Err(Error::InvalidParams(format!("J must be >= 0, got {}", self.j)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParams(format!("gamma must be finite, got {}", self.gamma)));
        }
        Ok(())
    }

    /// `|γ − J sin φ|`.
    pub fn flat_band_residual(&self) -> f64 {
        (self.gamma - self.j * self.phi.sin()).abs()
    }

    /// Flat-band energy `−J cos φ`.
    pub fn flat_band_energy(&self) -> f64 {
        -self.j * self.phi.cos()
    }

    /// Chiral symmetry holds for `J = 0` or `cos φ = 0`.
    pub fn is_chiral(&self) -> bool {
        self.j == 0.0 || self.phi.is_chiral()
    }

    /// `r = J² cos² φ / κ²`.
    pub fn ratio(&self) -> f64 {
        let jc = self.j * self.phi.cos();
        jc * jc / (self.kappa * self.kappa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub from: usize,
    pub to: usize,
    pub offset: Offset,
    #[serde(with = "complex_pair")]
    pub amp: Complex64,
}

impl Coupling {
    pub fn new(from: usize, to: usize, offset: Offset, amp: Complex64) -> Coupling {
        Coupling { from, to, offset, amp }
    }

    pub fn reversed(&self) -> Coupling {
        Coupling {
            from: self.to,
            to: self.from,
            offset: [-self.offset[0], -self.offset[1]],
            amp: self.amp.conj(),
        }
    }
}

/// Serialize complex numbers as `[re, im]`.
pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }

    pub mod array3 {
        use super::*;

        pub fn serialize<S: Serializer>(z: &[Complex64; 3], s: S) -> Result<S::Ok, S::Error> {
            z.map(|z| [z.re, z.im]).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Complex64; 3], D::Error> {
            let v = <[[f64; 2]; 3]>::deserialize(d)?;
            Ok(v.map(|[re, im]| Complex64::new(re, im)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    LiebOriginal,
    LiebExtended,
    Tasaki,
    Dice,
    KagomeModified,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::LiebOriginal,
        ModelKind::LiebExtended,
        ModelKind::Tasaki,
        ModelKind::Dice,
        ModelKind::KagomeModified,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LiebOriginal => "lieb-original",
            ModelKind::LiebExtended => "lieb-extended",
            ModelKind::Tasaki => "tasaki",
            ModelKind::Dice => "dice",
            ModelKind::KagomeModified => "kagome-modified",
        }
    }

    pub fn build(&self, params: Params) -> Result<LatticeModel> {
        match self {
            ModelKind::LiebOriginal => lieb_original(params),
            ModelKind::LiebExtended => lieb_extended(params),
            ModelKind::Tasaki => tasaki(params),
            ModelKind::Dice => dice(params),
            ModelKind::KagomeModified => kagome_modified(params),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model '{s}'")))
    }
}

/// Immutable three-sublattice model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    pub name: String,
    pub params: Params,
    #[serde(with = "complex_pair::array3")]
    pub onsite: [Complex64; 3],
    pub couplings: Vec<Coupling>,
}

/// A model whose B site couples with equal amplitude `κ` and equal offsets to
/// A and to C. Such models keep `(−1, 0, 1)` as an eigenvector of every Bloch
/// matrix once `γ = J sin φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericForm {
    pub offsets: Vec<Offset>,
    pub kappa: f64,
    pub has_bb: bool,
}

impl LatticeModel {
    pub fn num_sublattices(&self) -> usize {
        NUM_SUBLATTICES
    }

    pub fn from_json(s: &str) -> Result<LatticeModel> {
        let model: LatticeModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks the structural invariants: sublattice indices, reciprocity of
    /// every bond, balanced gain/loss and a connected sublattice graph.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |m: String| Err(Error::InvalidModel(m));
        for c in &self.couplings {
            if c.from >= NUM_SUBLATTICES || c.to >= NUM_SUBLATTICES {
                return bad(format!("sublattice index out of range in {c:?}"));
            }
            if !(c.amp.re.is_finite() && c.amp.im.is_finite()) {
                return bad(format!("non-finite amplitude in {c:?}"));
            }
            if c.from == c.to && c.offset == [0, 0] {
                return bad("on-site terms belong in `onsite`, not in couplings".into());
            }
            let rev = c.reversed();
            let found = self
                .couplings
                .iter()
                .any(|d| d.from == rev.from && d.to == rev.to && d.offset == rev.offset && d.amp == rev.amp);
            if !found {
                return bad(format!("missing reverse partner for {c:?}"));
            }
        }
        if self.onsite[A] != self.onsite[C].conj() {
            return bad("on-site potentials of A and C must be complex conjugates".into());
        }
        if self.onsite[B].im != 0.0 {
            return bad("on-site potential of B must be real".into());
        }
        let mut seen = [false; NUM_SUBLATTICES];
        let mut stack = vec![A];
        seen[A] = true;
        while let Some(s) = stack.pop() {
            for c in self.couplings.iter().filter(|c| c.from == s && c.amp != Complex64::new(0.0, 0.0)) {
                if !seen[c.to] {
                    seen[c.to] = true;
                    stack.push(c.to);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("sublattice graph is disconnected".into());
        }
        Ok(())
    }

    /// Recognizes the generic flat-band form, if the model has it.
    pub fn generic_form(&self) -> Option<GenericForm> {
        let kappa = Complex64::new(self.params.kappa, 0.0);
        let offsets_to_b = |from: usize| -> Option<BTreeSet<Offset>> {
            let mut out = BTreeSet::new();
            for c in self.couplings.iter().filter(|c| c.from == from && c.to == B) {
                if c.amp != kappa || !out.insert(c.offset) {
                    return None;
                }
            }
            Some(out)
        };
        let from_a = offsets_to_b(A)?;
        let from_c = offsets_to_b(C)?;
        if from_a != from_c || from_a.is_empty() {
            return None;
        }
        // A–C only through the within-cell dimer
        let dimer_ok = self
            .couplings
            .iter()
            .filter(|c| (c.from == A && c.to == C) || (c.from == C && c.to == A))
            .all(|c| c.offset == [0, 0]);
        if !dimer_ok || self.onsite[B] != Complex64::new(0.0, 0.0) {
            return None;
        }
        let has_bb = self.couplings.iter().any(|c| c.from == B && c.to == B);
        Some(GenericForm {
            offsets: from_a.into_iter().collect(),
            kappa: self.params.kappa,
            has_bb,
        })
    }
}

fn balanced_onsite(gamma: f64) -> [Complex64; 3] {
    [Complex64::new(0.0, -gamma), Complex64::new(0.0, 0.0), Complex64::new(0.0, gamma)]
}

fn push_pair(couplings: &mut Vec<Coupling>, c: Coupling) {
    couplings.push(c);
    couplings.push(c.reversed());
}

fn dimer(couplings: &mut Vec<Coupling>, params: &Params) {
    if params.j != 0.0 {
        let amp = params.phi.unit() * params.j;
        push_pair(couplings, Coupling::new(A, C, [0, 0], amp));
    }
}

/// Nearest-neighbour Hermitian Lieb lattice. `J`, `γ` and `φ` are forced to zero.
pub fn lieb_original(params: Params) -> Result<LatticeModel> {
    params.validate()?;
    let params = Params {
        j: 0.0,
        gamma: 0.0,
        phi: Phase::ZERO,
        ..params
    };
    let kappa = Complex64::new(params.kappa, 0.0);
    let mut couplings = Vec::new();
    for off in [[0, 0], [0, 1]] {
        push_pair(&mut couplings, Coupling::new(A, B, off, kappa));
    }
    for off in [[0, 0], [1, 0]] {
        push_pair(&mut couplings, Coupling::new(C, B, off, kappa));
    }
    Ok(LatticeModel {
        name: ModelKind::LiebOriginal.name().into(),
        params,
        onsite: balanced_onsite(0.0),
        couplings,
    })
}

/// Generic flat-band model: B couples with `κ` to A and to C at the same
/// offsets, plus the nonreciprocal A–C dimer and `∓iγ` gain/loss.
pub fn make_generic(offsets: &[Offset], params: Params) -> Result<LatticeModel> {
    params.validate()?;
    if offsets.is_empty() {
        return Err(Error::InvalidModel("structure factor needs at least one offset".into()));
    }
    let unique: BTreeSet<Offset> = offsets.iter().copied().collect();
    if unique.len() != offsets.len() {
        return Err(Error::InvalidModel(format!("duplicate offsets in {offsets:?}")));
    }
    let kappa = Complex64::new(params.kappa, 0.0);
    let mut couplings = Vec::new();
    for &off in offsets {
        push_pair(&mut couplings, Coupling::new(A, B, off, kappa));
        push_pair(&mut couplings, Coupling::new(C, B, off, kappa));
    }
    dimer(&mut couplings, &params);
    Ok(LatticeModel {
        name: "generic".into(),
        params,
        onsite: balanced_onsite(params.gamma),
        couplings,
    })
}

fn named(kind: ModelKind, offsets: &[Offset], params: Params) -> Result<LatticeModel> {
    let mut model = make_generic(offsets, params)?;
    model.name = kind.name().into();
    Ok(model)
}

pub fn lieb_extended(params: Params) -> Result<LatticeModel> {
    named(ModelKind::LiebExtended, &LIEB_OFFSETS, params)
}

/// Lieb-extended plus reciprocal `κ` bonds between nearest B sites; the B–B
/// Bloch entry is `2κ(cos kx + cos ky)`.
pub fn tasaki(params: Params) -> Result<LatticeModel> {
    let mut model = named(ModelKind::Tasaki, &LIEB_OFFSETS, params)?;
    let kappa = Complex64::new(params.kappa, 0.0);
    for off in TASAKI_BB_BONDS {
        push_pair(&mut model.couplings, Coupling::new(B, B, off, kappa));
    }
    Ok(model)
}

/// Dice lattice after equalizing the B–A and B–C couplings. The six offsets of
/// [`DICE_OFFSETS`] fix the structure factor.
pub fn dice(params: Params) -> Result<LatticeModel> {
    named(ModelKind::Dice, &DICE_OFFSETS, params)
}

/// Kagome lattice with the A–C `κ` bonds removed.
pub fn kagome_modified(params: Params) -> Result<LatticeModel> {
    named(ModelKind::KagomeModified, &KAGOME_OFFSETS, params)
}
