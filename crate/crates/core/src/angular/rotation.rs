//! Wigner small-d matrices.
//!
//! Convention: `d^j_{m'm}(beta) = <j m'| exp(-i beta J_y) |j m>`, so that
//! `d^{1/2}_{1/2,-1/2}(beta) = -sin(beta/2)`.

use super::HalfInteger;

fn ln_factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    static TABLE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut v = vec![0.0; 1025];
        for k in 1..v.len() {
            v[k] = v[k - 1] + (k as f64).ln();
        }
        v
    });
    t.get(n as usize).copied().unwrap_or_else(|| crate::special::ln_gamma(n as f64 + 1.0))
}

/// Single element `d^j_{m'm}(beta)`.
pub fn wigner_d(j: HalfInteger, mp: HalfInteger, m: HalfInteger, beta: f64) -> f64 {
    let (tj, tmp, tm) = (j.twice(), mp.twice(), m.twice());
    if tmp.abs() > tj || tm.abs() > tj || (tj + tmp) % 2 != 0 || (tj + tm) % 2 != 0 {
        return 0.0;
    }
    let jpmp = (tj + tmp) / 2;
    let jmmp = (tj - tmp) / 2;
    let jpm = (tj + tm) / 2;
    let jmm = (tj - tm) / 2;
    let dm = (tmp - tm) / 2;

    let c = (0.5 * beta).cos();
    let s = (0.5 * beta).sin();
    let pref = 0.5 * (ln_factorial(jpmp) + ln_factorial(jmmp) + ln_factorial(jpm) + ln_factorial(jmm));

    let k_min = 0.max(-dm);
    let k_max = jpm.min(jmmp);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let pc = tj - dm - 2 * k;
        let ps = dm + 2 * k;
        let ln_den = ln_factorial(jpm - k) + ln_factorial(k) + ln_factorial(dm + k) + ln_factorial(jmmp - k);
        let trig = pow_signed(c, pc) * pow_signed(s, ps);
        if trig == 0.0 {
            continue;
        }
        let mag = if pref - ln_den == 0.0 { 1.0 } else { (pref - ln_den).exp() };
        let sign = if (dm + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        sum += sign * mag * trig;
    }
    sum
}

#[inline]
fn pow_signed(x: f64, p: i32) -> f64 {
    if p == 0 {
        1.0
    } else {
        x.powi(p)
    }
}

/// Full `(2j+1) x (2j+1)` matrix, rows indexed by `m'` and columns by `m`,
/// both ascending from `-j`.
pub fn wigner_d_matrix(j: HalfInteger, beta: f64) -> nalgebra::DMatrix<f64> {
    let ms: Vec<HalfInteger> = j.projections().collect();
    let n = ms.len();
    nalgebra::DMatrix::from_fn(n, n, |r, c| wigner_d(j, ms[r], ms[c], beta))
}
