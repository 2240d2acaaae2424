//! Reduced matrix elements and the Wigner-Eckart theorem for states
//! `|l s j m>` built from the orbital and spin parts in that coupling order.

use std::f64::consts::PI;

use super::{wigner_3j, wigner_6j, HalfInteger};

/// Angular quantum numbers of a fine-structure state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AngularState {
    pub l: i32,
    pub s: HalfInteger,
    pub j: HalfInteger,
    pub m: HalfInteger,
}

impl AngularState {
    pub fn new(l: i32, j: HalfInteger, m: HalfInteger) -> Self {
        AngularState { l, s: HalfInteger::HALF, j, m }
    }

    fn lh(&self) -> HalfInteger {
        HalfInteger::from_int(self.l)
    }
}

/// `(l || Y_k || l')`
pub fn reduced_y(l: i32, k: i32, lp: i32) -> f64 {
    let (hl, hk, hlp) = (HalfInteger::from_int(l), HalfInteger::from_int(k), HalfInteger::from_int(lp));
    let z = HalfInteger::ZERO;
    let three = wigner_3j(hl, hk, hlp, z, z, z);
    if three == 0.0 {
        return 0.0;
    }
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    sign * (((2 * l + 1) * (2 * k + 1) * (2 * lp + 1)) as f64 / (4.0 * PI)).sqrt() * three
}

/// `(J || J || J)` in units of hbar.
pub fn reduced_j(j: HalfInteger) -> f64 {
    let v = j.value();
    (v * (v + 1.0) * (2.0 * v + 1.0)).sqrt()
}

/// `<j m| T_kq |j' m'> = (-1)^{j-m} (j k j'; -m q m') (j || T_k || j')`
pub fn wigner_eckart(
    j: HalfInteger,
    m: HalfInteger,
    k: i32,
    q: i32,
    jp: HalfInteger,
    mp: HalfInteger,
    reduced: f64,
) -> f64 {
    if reduced == 0.0 {
        return 0.0;
    }
    let three = wigner_3j(j, HalfInteger::from_int(k), jp, -m, HalfInteger::from_int(q), mp);
    (j - m).phase() * three * reduced
}

/// Reduced element in the coupled basis of an operator acting on the
/// orbital part only, given its orbital reduced element.
pub fn reduced_orbital_in_j(a: &AngularState, k: i32, b: &AngularState, orbital: f64) -> f64 {
    if a.s != b.s || orbital == 0.0 {
        return 0.0;
    }
    let six = wigner_6j(a.lh(), a.j, a.s, b.j, b.lh(), HalfInteger::from_int(k));
    if six == 0.0 {
        return 0.0;
    }
    let phase = (a.lh() + a.s + b.j + HalfInteger::from_int(k)).phase();
    phase * (((a.j.twice() + 1) * (b.j.twice() + 1)) as f64).sqrt() * six * orbital
}

/// Reduced element in the coupled basis of an operator acting on the spin
/// part only, given its spin reduced element.
pub fn reduced_spin_in_j(a: &AngularState, k: i32, b: &AngularState, spin: f64) -> f64 {
    if a.l != b.l || spin == 0.0 {
        return 0.0;
    }
    let six = wigner_6j(a.s, a.j, a.lh(), b.j, b.s, HalfInteger::from_int(k));
    if six == 0.0 {
        return 0.0;
    }
    let phase = (a.lh() + b.s + a.j + HalfInteger::from_int(k)).phase();
    phase * (((a.j.twice() + 1) * (b.j.twice() + 1)) as f64).sqrt() * six * spin
}

/// `<a| Y_kq |b>`
pub fn spherical_harmonic_element(a: &AngularState, k: i32, q: i32, b: &AngularState) -> f64 {
    if (a.m - b.m).twice() != 2 * q || (a.l + b.l + k) % 2 != 0 {
        return 0.0;
    }
    let red = reduced_orbital_in_j(a, k, b, reduced_y(a.l, k, b.l));
    wigner_eckart(a.j, a.m, k, q, b.j, b.m, red)
}

/// `<a| C_kq |b>` with `C_kq = sqrt(4 pi / (2k+1)) Y_kq`.
pub fn normalized_harmonic_element(a: &AngularState, k: i32, q: i32, b: &AngularState) -> f64 {
    (4.0 * PI / (2 * k + 1) as f64).sqrt() * spherical_harmonic_element(a, k, q, b)
}

/// `<a| L_q |b>` in units of hbar.
pub fn orbital_momentum_element(a: &AngularState, q: i32, b: &AngularState) -> f64 {
    if a.l != b.l || (a.m - b.m).twice() != 2 * q {
        return 0.0;
    }
    let red = reduced_orbital_in_j(a, 1, b, reduced_j(a.lh()));
    wigner_eckart(a.j, a.m, 1, q, b.j, b.m, red)
}

/// `<a| S_q |b>` in units of hbar.
pub fn spin_momentum_element(a: &AngularState, q: i32, b: &AngularState) -> f64 {
    if a.l != b.l || (a.m - b.m).twice() != 2 * q {
        return 0.0;
    }
    let red = reduced_spin_in_j(a, 1, b, reduced_j(a.s));
    wigner_eckart(a.j, a.m, 1, q, b.j, b.m, red)
}

/// All `j` values allowed for orbital momentum `l` and spin 1/2.
pub fn allowed_j(l: i32) -> impl Iterator<Item = HalfInteger> {
    let lo = if l == 0 { 1 } else { 2 * l - 1 };
    (lo..=2 * l + 1).step_by(2).map(HalfInteger::from_twice)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_y_simple() {
        // sqrt(9 / 4pi) * (0 1 1; 0 0 0) with the 3j equal to -1/sqrt(3)
        let v = reduced_y(0, 1, 1);
        assert!((v + (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15, "{v}");
    }

    #[test]
    fn jz_is_diagonal_m() {
        for l in 0..4 {
            for j in allowed_j(l) {
                for m in j.projections() {
                    let a = AngularState::new(l, j, m);
                    let lz = orbital_momentum_element(&a, 0, &a);
                    let sz = spin_momentum_element(&a, 0, &a);
                    assert!((lz + sz - m.value()).abs() < 1e-13, "l={l} j={j} m={m}");
                }
            }
        }
    }

    #[test]
    fn s_squared_is_three_quarters() {
        let l = 2;
        for j in allowed_j(l) {
            for m in j.projections() {
                let a = AngularState::new(l, j, m);
                let mut s2 = 0.0;
                for jp in allowed_j(l) {
                    for mp in jp.projections() {
                        let b = AngularState::new(l, jp, mp);
                        for q in -1..=1 {
                            let e = spin_momentum_element(&a, q, &b);
                            // S_q^dagger = (-1)^q S_-q, sum_q (-1)^q S_q S_-q
                            s2 += e * e;
                        }
                    }
                }
                assert!((s2 - 0.75).abs() < 1e-13, "{s2}");
            }
        }
    }

    #[test]
    fn allowed_j_values() {
        let v: Vec<i32> = allowed_j(0).map(|j| j.twice()).collect();
        assert_eq!(v, vec![1]);
        let v: Vec<i32> = allowed_j(3).map(|j| j.twice()).collect();
        assert_eq!(v, vec![5, 7]);
    }
}
