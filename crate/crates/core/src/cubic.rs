//! Roots of the real depressed cubic `E³ + pE + q = 0`.
//!
//! One well-conditioned root is taken from the trigonometric formula (three
//! real roots) or from Cardano's cube roots (one real root); the remaining
//! pair comes from the deflated quadratic. Picking the root farthest from the
//! others keeps colliding roots near exceptional points accurate.

use std::f64::consts::PI;

use num_complex::Complex64;

fn poly(p: f64, q: f64, e: Complex64) -> Complex64 {
    e * e * e + e * p + q
}

fn polish(p: f64, q: f64, e: Complex64) -> Complex64 {
    let mut e = e;
    let mut f = poly(p, q, e).norm();
    for _ in 0..4 {
        if f == 0.0 {
            break;
        }
        let d = e * e * 3.0 + p;
        if d.norm() == 0.0 {
            break;
        }
        let next = e - poly(p, q, e) / d;
        let g = poly(p, q, next).norm();
        if g < f {
            e = next;
            f = g;
        } else {
            break;
        }
    }
    e
}

/// Remaining roots once `r` is known: `E² + rE + c = 0`, where
/// `c = r² + p = −q/r`. The form with the smaller rounding estimate is used.
fn deflate(p: f64, q: f64, r: f64, all_real: bool) -> [Complex64; 2] {
    let via_sum = r * r + p;
    let c = if r == 0.0 {
        p
    } else {
        let err_sum = (r * r).max(p.abs());
        let root_scale = p.abs().sqrt() + q.abs().cbrt();
        let err_div = via_sum.abs() * (1.0 + root_scale / r.abs());
        if err_div < err_sum {
            -q / r
        } else {
            via_sum
        }
    };
    let disc = r * r - 4.0 * c;
    if disc >= 0.0 || all_real {
        let sq = disc.max(0.0).sqrt();
        let big = -0.5 * (r + r.signum() * sq);
        let (a, b) = if big != 0.0 { (big, c / big) } else { (0.0, 0.0) };
        [Complex64::new(a, 0.0), Complex64::new(b, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(-0.5 * r, -im), Complex64::new(-0.5 * r, im)]
    }
}

/// All three roots of `E³ + pE + q`, unordered.
pub fn depressed_cubic_roots(p: f64, q: f64) -> [Complex64; 3] {
    if p == 0.0 && q == 0.0 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    if q == 0.0 {
        // E (E² + p)
        let w = p.abs().sqrt();
        let zero = Complex64::new(0.0, 0.0);
        return if p < 0.0 {
            [zero, Complex64::new(-w, 0.0), Complex64::new(w, 0.0)]
        } else {
            [zero, Complex64::new(0.0, -w), Complex64::new(0.0, w)]
        };
    }
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let h = half_q * half_q + third_p * third_p * third_p;

    let (r, all_real) = if h < 0.0 {
        // three real roots, p < 0
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos();
        // roots m cos(θ/3 − 2πk/3); k = 0 is isolated for θ < π/2, k = 2 otherwise
        let k = if theta < 0.5 * PI { 0.0 } else { 2.0 };
        (m * (theta / 3.0 - 2.0 * PI * k / 3.0).cos(), true)
    } else {
        let sh = h.sqrt();
        let a = -half_q;
        let u = (a + if a >= 0.0 { sh } else { -sh }).cbrt();
        let v = if u != 0.0 { -third_p / u } else { 0.0 };
        (u + v, false)
    };
    let r = polish(p, q, Complex64::new(r, 0.0)).re;
    let [b, c] = deflate(p, q, r, all_real);
    [Complex64::new(r, 0.0), polish(p, q, b), polish(p, q, c)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: [Complex64; 3]) -> [Complex64; 3] {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn double_root_at_isolated_ep() {
        // (E + 3)² (E − 6)
        let r = sorted(depressed_cubic_roots(-27.0, -54.0));
        assert!((r[0] - Complex64::new(-3.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(-3.0, 0.0)).norm() < 1e-12);
        assert!((r[2] - Complex64::new(6.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_coefficients() {
        assert_eq!(depressed_cubic_roots(0.0, 0.0), [Complex64::new(0.0, 0.0); 3]);
    }

    #[test]
    fn complex_pair() {
        // E³ + E = E(E² + 1)
        let r = sorted(depressed_cubic_roots(1.0, 0.0));
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!(r[1].norm() < 1e-14);
        assert!((r[2] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn mirrored_double_root() {
        // (E − 3)² (E + 6) = E³ − 27E + 54
        let r = sorted(depressed_cubic_roots(-27.0, 54.0));
        assert!((r[0].re + 6.0).abs() < 1e-12);
        assert!((r[1].re - 3.0).abs() < 1e-12 && (r[2].re - 3.0).abs() < 1e-12);
    }

    proptest! {
        // roots built from a known factorization come back
        #[test]
        fn recovers_real_triples(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let c = -a - b;
            let p = a * b + b * c + c * a;
            let q = -a * b * c;
            let got = sorted(depressed_cubic_roots(p, q));
            let mut want = [a, b, c];
            want.sort_by(f64::total_cmp);
            let scale = 1.0 + a.abs().max(b.abs()).max(c.abs());
            for (g, w) in got.iter().zip(want) {
                // double roots are only √ε-determined
                prop_assert!((g - Complex64::new(w, 0.0)).norm() < 1e-6 * scale);
            }
        }

        #[test]
        fn residual_is_small(p in -100.0f64..100.0, q in -100.0f64..100.0) {
            let scale = 1f64.max(p.abs()).max(q.abs());
            for e in depressed_cubic_roots(p, q) {
                let f = poly(p, q, e).norm();
                prop_assert!(f < 1e-9 * scale, "p={} q={} e={} f={}", p, q, e, f);
            }
        }
    }
}
