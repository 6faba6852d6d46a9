//! Peierls phase angles.
//!
//! A [`Phase`] keeps the angle in radians, normalized to `[0, 2π)`, and
//! remembers when the angle is a rational multiple of π. Multiples of π/6 and
//! π/4 then produce exact cosines and sines, so branches that test
//! `cos φ == 0` (chiral symmetry) fire exactly rather than within rounding.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const MAX_DETECTED_DENOMINATOR: i64 = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase {
    radians: f64,
    /// `(num, den)` in lowest terms with `0 <= num < 2 den`, angle = num π / den.
    pi_fraction: Option<(i64, i64)>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Phase {
    pub const ZERO: Phase = Phase {
        radians: 0.0,
        pi_fraction: Some((0, 1)),
    };

    /// Angle `num · π / den`, reduced modulo 2π.
    pub fn pi_fraction(num: i64, den: i64) -> Result<Phase> {
        if den == 0 {
            return Err(Error::InvalidParams("zero denominator in phase".into()));
        }
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd(num, den).max(1);
        num /= g;
        den /= g;
        let num = num.rem_euclid(2 * den);
        Ok(Phase {
            radians: num as f64 * PI / den as f64,
            pi_fraction: Some((num, den)),
        })
    }

    /// Angle in radians. Values that are bit-identical to `num · π / den` for a
    /// small denominator are recognized as π fractions.
    pub fn from_radians(x: f64) -> Result<Phase> {
        if !x.is_finite() {
            return Err(Error::InvalidParams(format!("phase must be finite, got {x}")));
        }
        let radians = x.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU
        let radians = if radians >= TAU { 0.0 } else { radians };
        for den in 1..=MAX_DETECTED_DENOMINATOR {
            for num in 0..2 * den {
                if gcd(num, den) != 1 && num != 0 {
                    continue;
                }
                if num == 0 && den != 1 {
                    continue;
                }
                if num as f64 * PI / den as f64 == radians {
                    return Ok(Phase {
                        radians,
                        pi_fraction: Some((num, den)),
                    });
                }
            }
        }
        Ok(Phase {
            radians,
            pi_fraction: None,
        })
    }

    pub fn radians(&self) -> f64 {
        self.radians
    }

    pub fn as_pi_fraction(&self) -> Option<(i64, i64)> {
        self.pi_fraction
    }

    /// Exact `(cos, sin)` for multiples of π/4 and π/6.
    fn exact_cos_sin(&self) -> Option<(f64, f64)> {
        let (num, den) = self.pi_fraction?;
        let table = |twelfths: i64| -> Option<(f64, f64)> {
            // argument counts multiples of π/12; only multiples of π/6 are tabulated
            let k = twelfths.rem_euclid(24);
            if k % 2 != 0 {
                return None;
            }
            let half = 0.5;
            let s3 = 3f64.sqrt() / 2.0;
            let v = match k / 2 {
                0 => (1.0, 0.0),
                1 => (s3, half),
                2 => (half, s3),
                3 => (0.0, 1.0),
                4 => (-half, s3),
                5 => (-s3, half),
                6 => (-1.0, 0.0),
                7 => (-s3, -half),
                8 => (-half, -s3),
                9 => (0.0, -1.0),
                10 => (half, -s3),
                _ => (s3, -half),
            };
            Some(v)
        };
        if 12 % den == 0 {
            if let Some(v) = table(num * (12 / den)) {
                return Some(v);
            }
        }
        if den == 4 {
            let r = FRAC_1_SQRT_2;
            return Some(match num.rem_euclid(8) {
                1 => (r, r),
                3 => (-r, r),
                5 => (-r, -r),
                _ => (r, -r),
            });
        }
        None
    }

    pub fn cos(&self) -> f64 {
        self.exact_cos_sin().map(|(c, _)| c).unwrap_or_else(|| self.radians.cos())
    }

    pub fn sin(&self) -> f64 {
        self.exact_cos_sin().map(|(_, s)| s).unwrap_or_else(|| self.radians.sin())
    }

    /// `e^{iφ}`.
    pub fn unit(&self) -> Complex64 {
        Complex64::new(self.cos(), self.sin())
    }

    /// True when `cos φ` is exactly zero.
    pub fn is_chiral(&self) -> bool {
        self.cos() == 0.0
    }
}

impl Default for Phase {
    fn default() -> Self {
        Phase::ZERO
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_fraction {
            Some((0, _)) => write!(f, "0"),
            Some((1, 1)) => write!(f, "pi"),
            Some((n, 1)) => write!(f, "{n}pi"),
            Some((1, d)) => write!(f, "pi/{d}"),
            Some((n, d)) => write!(f, "{n}pi/{d}"),
            None => write!(f, "{}", self.radians),
        }
    }
}

/// Accepts decimal radians or π fractions such as `pi/3`, `-pi/2`, `2pi/3`,
/// `3*pi/4` or `π`.
impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Phase> {
        let t: String = s.trim().chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidParams(format!("cannot parse phase '{s}'"));
        let lower = t.to_ascii_lowercase().replace('π', "pi");
        if let Some(pos) = lower.find("pi") {
            let (head, tail) = lower.split_at(pos);
            let tail = &tail[2..];
            let head = head.strip_suffix('*').unwrap_or(head);
            let num: i64 = match head {
                "" | "+" => 1,
                "-" => -1,
                h => h.parse().map_err(|_| bad())?,
            };
            let den: i64 = match tail {
                "" => 1,
                t => t.strip_prefix('/').ok_or_else(bad)?.parse().map_err(|_| bad())?,
            };
            return Phase::pi_fraction(num, den);
        }
        let x: f64 = lower.parse().map_err(|_| bad())?;
        Phase::from_radians(x)
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.radians)
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Phase, D::Error> {
        let x = f64::deserialize(d)?;
        Phase::from_radians(x).map_err(serde::de::Error::custom)
    }
}
