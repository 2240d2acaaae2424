use proptest::prelude::*;

use rydpair::angular::{clebsch_gordan, wigner_3j, wigner_6j, wigner_d, wigner_d_matrix};
use rydpair::HalfInteger;

fn h(twice: i32) -> HalfInteger {
    HalfInteger::from_twice(twice)
}

fn sign(twice: i32) -> f64 {
    debug_assert!(twice % 2 == 0);
    if (twice / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn triad(a: i32, b: i32, c: i32) -> bool {
    (a + b + c) % 2 == 0 && c >= (a - b).abs() && c <= a + b
}

#[test]
fn three_j_orthogonality() {
    for (j1, j2) in [(1i32, 2i32), (3, 3), (4, 5), (7, 2)] {
        for j3 in ((j1 - j2).abs()..=j1 + j2).step_by(2) {
            for j3p in ((j1 - j2).abs()..=j1 + j2).step_by(2) {
                for m3 in (-j3.min(j3p)..=j3.min(j3p)).step_by(2) {
                    let mut s = 0.0;
                    for m1 in (-j1..=j1).step_by(2) {
                        let m2 = -m3 - m1;
                        if m2.abs() > j2 {
                            continue;
                        }
                        s += wigner_3j(h(j1), h(j2), h(j3), h(m1), h(m2), h(m3))
                            * wigner_3j(h(j1), h(j2), h(j3p), h(m1), h(m2), h(m3));
                    }
                    let expected = if j3 == j3p { 1.0 / (j3 as f64 + 1.0) } else { 0.0 };
                    assert!((s - expected).abs() < 1e-14, "{j1} {j2} {j3} {j3p} {m3}: {s}");
                }
            }
        }
    }
}

#[test]
fn six_j_orthogonality() {
    let (a, b, c, d) = (3, 4, 5, 2);
    for f in 0..=14 {
        for fp in 0..=14 {
            let mut s = 0.0;
            for x in 0..=20 {
                s += (x as f64 + 1.0)
                    * (f as f64 + 1.0)
                    * wigner_6j(h(a), h(b), h(x), h(c), h(d), h(f))
                    * wigner_6j(h(a), h(b), h(x), h(c), h(d), h(fp));
            }
            let allowed = triad(a, d, f) && triad(c, b, f);
            let expected = if f == fp && allowed { 1.0 } else { 0.0 };
            assert!((s - expected).abs() < 1e-13, "f={f} f'={fp}: {s}");
        }
    }
}

#[test]
fn biedenharn_elliott_identity() {
    let sets = [[1, 8, 6, 3, 7, 2, 4, 4, 8], [8, 5, 6, 7, 5, 2, 3, 4, 3], [3, 4, 7, 4, 6, 3, 5, 6, 5], [6, 6, 8, 6, 2, 6, 4, 8, 6]];
    let mut nonzero = 0;
    for [a, b, c, d, e, f, p, q, r] in sets {
        let s = a + b + c + d + e + f + p + q + r;
        let rhs = wigner_6j(h(p), h(q), h(r), h(e), h(a), h(d)) * wigner_6j(h(p), h(q), h(r), h(f), h(b), h(c));
        let mut lhs = 0.0;
        for x in 0..=24 {
            let t = wigner_6j(h(a), h(b), h(x), h(c), h(d), h(p))
                * wigner_6j(h(c), h(d), h(x), h(e), h(f), h(q))
                * wigner_6j(h(e), h(f), h(x), h(b), h(a), h(r));
            if t != 0.0 {
                lhs += sign(s + x) * (x as f64 + 1.0) * t;
            }
        }
        assert!((lhs - rhs).abs() < 1e-14, "{lhs} vs {rhs}");
        if rhs != 0.0 {
            nonzero += 1;
        }
    }
    assert_eq!(nonzero, 4);
}

#[test]
fn clebsch_gordan_table_values() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // (2 j1, 2 m1, 2 j2, 2 m2, 2 J, 2 M, value)
    let table = [
        (1, 1, 1, -1, 2, 0, s),
        (1, 1, 1, -1, 0, 0, s),
        (1, -1, 1, 1, 0, 0, -s),
        (2, 2, 2, -2, 4, 0, (1.0f64 / 6.0).sqrt()),
        (2, 0, 2, 0, 4, 0, (2.0f64 / 3.0).sqrt()),
        (2, 0, 2, 0, 2, 0, 0.0),
        (2, 2, 1, -1, 1, 1, (2.0f64 / 3.0).sqrt()),
        (2, 0, 1, 1, 1, 1, -(1.0f64 / 3.0).sqrt()),
    ];
    for (j1, m1, j2, m2, j, m, v) in table {
        let cg = clebsch_gordan(h(j1), h(m1), h(j2), h(m2), h(j), h(m));
        assert!((cg - v).abs() < 1e-15, "<{j1} {m1}; {j2} {m2} | {j} {m}> = {cg}, expected {v}");
    }
}

#[test]
fn wigner_d_closed_forms() {
    let beta = 0.83f64;
    let (s, c) = (beta / 2.0).sin_cos();
    assert!((wigner_d(h(1), h(1), h(1), beta) - c).abs() < 1e-15);
    assert!((wigner_d(h(1), h(1), h(-1), beta) + s).abs() < 1e-15);
    assert!((wigner_d(h(2), h(0), h(0), beta) - beta.cos()).abs() < 1e-15);
    assert!((wigner_d(h(2), h(2), h(0), beta) + beta.sin() / 2f64.sqrt()).abs() < 1e-15);
    assert!((wigner_d(h(4), h(0), h(0), beta) - 0.5 * (3.0 * beta.cos().powi(2) - 1.0)).abs() < 1e-15);
}

#[test]
fn wigner_d_group_law() {
    for tj in [1, 2, 5, 8, 13] {
        let (a, b) = (0.4, -1.3);
        let prod = wigner_d_matrix(h(tj), a) * wigner_d_matrix(h(tj), b);
        let sum = wigner_d_matrix(h(tj), a + b);
        assert!((prod - &sum).amax() < 1e-13, "j={tj}/2");
        let unit = sum.transpose() * &sum;
        assert!((unit - nalgebra::DMatrix::identity(tj as usize + 1, tj as usize + 1)).amax() < 1e-13);
    }
}

proptest! {
    #[test]
    fn three_j_symmetries(j1 in 0i32..=30, j2 in 0i32..=30, k3 in 0i32..=30, a in 0i32..=30, b in 0i32..=30) {
        let j3 = (j1 - j2).abs() + 2 * (k3 % ((j1 + j2 - (j1 - j2).abs()) / 2 + 1));
        let m1 = j1 - 2 * (a % (j1 + 1));
        let m2 = j2 - 2 * (b % (j2 + 1));
        let m3 = -m1 - m2;
        let v = wigner_3j(h(j1), h(j2), h(j3), h(m1), h(m2), h(m3));
        let odd = sign(j1 + j2 + j3);
        prop_assert_eq!(v, wigner_3j(h(j2), h(j3), h(j1), h(m2), h(m3), h(m1)));
        prop_assert_eq!(v, odd * wigner_3j(h(j2), h(j1), h(j3), h(m2), h(m1), h(m3)));
        prop_assert_eq!(v, odd * wigner_3j(h(j1), h(j2), h(j3), h(-m1), h(-m2), h(-m3)));
    }

    #[test]
    fn six_j_symmetries(t in proptest::array::uniform6(0i32..=16)) {
        let [a, b, c, d, e, f] = t;
        let v = wigner_6j(h(a), h(b), h(c), h(d), h(e), h(f));
        prop_assert_eq!(v, wigner_6j(h(b), h(a), h(c), h(e), h(d), h(f)));
        prop_assert_eq!(v, wigner_6j(h(a), h(c), h(b), h(d), h(f), h(e)));
        prop_assert_eq!(v, wigner_6j(h(d), h(e), h(c), h(a), h(b), h(f)));
    }

    #[test]
    fn selection_rules_give_exact_zero(j1 in 0i32..=12, j2 in 0i32..=12, j3 in 0i32..=12, m1 in -12i32..=12, m2 in -12i32..=12) {
        let m3 = -m1 - m2 + 2;
        prop_assert_eq!(wigner_3j(h(j1), h(j2), h(j3), h(m1), h(m2), h(m3)), 0.0);
    }
}
