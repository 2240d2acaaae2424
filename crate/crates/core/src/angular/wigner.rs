//! Wigner 3j and 6j symbols in exact integer arithmetic.
//!
//! Factorials are represented by their prime factorizations, so every Racah
//! sum is carried out over big integers with a common prime-power factor
//! pulled out. The only rounding happens in the final conversion to `f64`.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::HalfInteger;

fn primes_up_to(n: usize) -> Vec<u32> {
    if n < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut k = i * i;
            while k <= n {
                sieve[k] = false;
                k += i;
            }
        }
        i += 1;
    }
    sieve.iter().enumerate().filter(|(_, &p)| p).map(|(i, _)| i as u32).collect()
}

const PRIME_TABLE_LIMIT: usize = 4096;

fn prime_table(limit: usize) -> std::borrow::Cow<'static, [u32]> {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    if limit <= PRIME_TABLE_LIMIT {
        let t = TABLE.get_or_init(|| primes_up_to(PRIME_TABLE_LIMIT));
        let end = t.partition_point(|&p| p as usize <= limit);
        std::borrow::Cow::Borrowed(&t[..end])
    } else {
        std::borrow::Cow::Owned(primes_up_to(limit))
    }
}

/// Exponents of a rational number over the first `len` primes.
#[derive(Clone, Debug)]
struct PrimeExps(Vec<i64>);

impl PrimeExps {
    fn zeros(len: usize) -> Self {
        PrimeExps(vec![0; len])
    }

    /// Adds `sign * log_p(n!)` for every prime (Legendre's formula).
    fn add_factorial(&mut self, primes: &[u32], n: i64, sign: i64) {
        debug_assert!(n >= 0);
        for (e, &p) in self.0.iter_mut().zip(primes) {
            let p = p as i64;
            if p > n {
                break;
            }
            let mut k = n / p;
            let mut acc = 0;
            while k > 0 {
                acc += k;
                k /= p;
            }
            *e += sign * acc;
        }
    }

    fn min_with(&mut self, other: &PrimeExps) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = (*a).min(*b);
        }
    }
}

fn pow_product(primes: &[u32], exps: &[i64]) -> BigInt {
    let mut acc = BigInt::one();
    for (&p, &e) in primes.iter().zip(exps) {
        debug_assert!(e >= 0);
        if e > 0 {
            acc *= num_traits::pow(BigInt::from(p), e as usize);
        }
    }
    acc
}

/// `num / den` rounded to f64 (both positive).
fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    debug_assert!(num.is_positive() && den.is_positive());
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift = 64 - (nb - db);
    let q = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let mut v = q.to_f64().unwrap_or(f64::INFINITY);
    // Scale by 2^-shift in steps that cannot overflow the exponent.
    let mut s = -shift;
    while s > 0 {
        let step = s.min(1000);
        v *= 2f64.powi(step as i32);
        s -= step;
    }
    while s < 0 {
        let step = (-s).min(1000);
        v *= 2f64.powi(-(step as i32));
        s += step;
    }
    v
}

/// Evaluates `sign * sqrt(P^sqrt_exps) * P^common * sum` as f64, where `P^x`
/// denotes a product of prime powers.
fn assemble(primes: &[u32], sqrt_exps: &PrimeExps, common: &PrimeExps, sum: &BigInt) -> f64 {
    if sum.is_zero() {
        return 0.0;
    }
    let mut a_exps = vec![0i64; primes.len()];
    let mut b_exps = vec![0i64; primes.len()];
    let mut c_exps = vec![0i64; primes.len()];
    for i in 0..primes.len() {
        let doubled = sqrt_exps.0[i] + 2 * common.0[i];
        let q = doubled.div_euclid(2);
        let r = doubled.rem_euclid(2);
        if q > 0 {
            a_exps[i] = q;
        } else {
            b_exps[i] = -q;
        }
        c_exps[i] = r;
    }
    let a = pow_product(primes, &a_exps) * sum.abs();
    let b = pow_product(primes, &b_exps);
    let c = pow_product(primes, &c_exps);
    let magnitude = ratio_to_f64(&(&a * &a * c), &(&b * &b)).sqrt();
    if sum.sign() == Sign::Minus {
        -magnitude
    } else {
        magnitude
    }
}

/// Triangle condition plus integrality of the sum, on doubled values.
#[inline]
fn triangle(a: i32, b: i32, c: i32) -> bool {
    a >= 0 && b >= 0 && c >= 0 && c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

fn triangle_delta(exps: &mut PrimeExps, primes: &[u32], a: i64, b: i64, c: i64) {
    // Inputs are doubled values.
    exps.add_factorial(primes, (a + b - c) / 2, 1);
    exps.add_factorial(primes, (a - b + c) / 2, 1);
    exps.add_factorial(primes, (-a + b + c) / 2, 1);
    exps.add_factorial(primes, (a + b + c) / 2 + 1, -1);
}

type Memo = RwLock<HashMap<[i32; 6], f64>>;

fn memo_3j() -> &'static Memo {
    static M: OnceLock<Memo> = OnceLock::new();
    M.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memo_6j() -> &'static Memo {
    static M: OnceLock<Memo> = OnceLock::new();
    M.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memoized(memo: &Memo, key: [i32; 6], f: impl FnOnce() -> f64) -> f64 {
    if let Some(v) = memo.read().unwrap().get(&key) {
        return *v;
    }
    let v = f();
    memo.write().unwrap().insert(key, v);
    v
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`. Returns exactly 0 whenever a
/// selection rule is violated.
pub fn wigner_3j(
    j1: HalfInteger,
    j2: HalfInteger,
    j3: HalfInteger,
    m1: HalfInteger,
    m2: HalfInteger,
    m3: HalfInteger,
) -> f64 {
    let t = [j1.twice(), j2.twice(), j3.twice(), m1.twice(), m2.twice(), m3.twice()];
    if !wigner_3j_allowed(&t) {
        return 0.0;
    }
    memoized(memo_3j(), t, || wigner_3j_exact(t))
}

fn wigner_3j_allowed(t: &[i32; 6]) -> bool {
    let [j1, j2, j3, m1, m2, m3] = *t;
    m1 + m2 + m3 == 0
        && triangle(j1, j2, j3)
        && m1.abs() <= j1
        && m2.abs() <= j2
        && m3.abs() <= j3
        && (j1 + m1) % 2 == 0
        && (j2 + m2) % 2 == 0
        && (j3 + m3) % 2 == 0
}

fn wigner_3j_exact(t: [i32; 6]) -> f64 {
    let [j1, j2, j3, m1, m2, m3] = t.map(|v| v as i64);
    let half = |v: i64| {
        debug_assert!(v % 2 == 0);
        v / 2
    };
    let top = half(j1 + j2 + j3) + 1;
    let primes = prime_table(top as usize + 1);
    let len = primes.len();

    let mut sqrt_exps = PrimeExps::zeros(len);
    triangle_delta(&mut sqrt_exps, &primes, j1, j2, j3);
    for (j, m) in [(j1, m1), (j2, m2), (j3, m3)] {
        sqrt_exps.add_factorial(&primes, half(j + m), 1);
        sqrt_exps.add_factorial(&primes, half(j - m), 1);
    }

    let k_min = 0.max(half(j2 - j3 - m1)).max(half(j1 - j3 + m2));
    let k_max = half(j1 + j2 - j3).min(half(j1 - m1)).min(half(j2 + m2));
    if k_min > k_max {
        return 0.0;
    }

    let terms: Vec<PrimeExps> = (k_min..=k_max)
        .map(|k| {
            let mut e = PrimeExps::zeros(len);
            for n in [
                k,
                half(j3 - j2 + m1) + k,
                half(j3 - j1 - m2) + k,
                half(j1 + j2 - j3) - k,
                half(j1 - m1) - k,
                half(j2 + m2) - k,
            ] {
                e.add_factorial(&primes, n, -1);
            }
            e
        })
        .collect();
    let (common, sum) = common_factor_sum(&primes, &terms, k_min);

    let phase = if half(j1 - j2 - m3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * assemble(&primes, &sqrt_exps, &common, &sum)
}

/// Pulls the common prime-power factor out of `sum_k (-1)^k P^terms[k]` and
/// returns it together with the remaining exact integer sum.
fn common_factor_sum(primes: &[u32], terms: &[PrimeExps], k_first: i64) -> (PrimeExps, BigInt) {
    let mut common = terms[0].clone();
    for t in &terms[1..] {
        common.min_with(t);
    }
    let mut sum = BigInt::zero();
    for (i, t) in terms.iter().enumerate() {
        let rel: Vec<i64> = t.0.iter().zip(&common.0).map(|(a, b)| a - b).collect();
        let v = pow_product(primes, &rel);
        if (k_first + i as i64) % 2 == 0 {
            sum += v;
        } else {
            sum -= v;
        }
    }
    (common, sum)
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}`. Returns exactly 0 for any
/// violated triad.
pub fn wigner_6j(
    j1: HalfInteger,
    j2: HalfInteger,
    j3: HalfInteger,
    j4: HalfInteger,
    j5: HalfInteger,
    j6: HalfInteger,
) -> f64 {
    let t = [j1.twice(), j2.twice(), j3.twice(), j4.twice(), j5.twice(), j6.twice()];
    let [a, b, c, d, e, f] = t;
    if !(triangle(a, b, c) && triangle(a, e, f) && triangle(d, b, f) && triangle(d, e, c)) {
        return 0.0;
    }
    memoized(memo_6j(), t, || wigner_6j_exact(t))
}

fn wigner_6j_exact(t: [i32; 6]) -> f64 {
    let [j1, j2, j3, j4, j5, j6] = t.map(|v| v as i64);
    let a = [(j1 + j2 + j3) / 2, (j1 + j5 + j6) / 2, (j4 + j2 + j6) / 2, (j4 + j5 + j3) / 2];
    let b = [(j1 + j2 + j4 + j5) / 2, (j2 + j3 + j5 + j6) / 2, (j3 + j1 + j6 + j4) / 2];
    let t_min = *a.iter().max().unwrap();
    let t_max = *b.iter().min().unwrap();
    if t_min > t_max {
        return 0.0;
    }
    let primes = prime_table(t_max as usize + 2);
    let len = primes.len();

    let mut sqrt_exps = PrimeExps::zeros(len);
    triangle_delta(&mut sqrt_exps, &primes, j1, j2, j3);
    triangle_delta(&mut sqrt_exps, &primes, j1, j5, j6);
    triangle_delta(&mut sqrt_exps, &primes, j4, j2, j6);
    triangle_delta(&mut sqrt_exps, &primes, j4, j5, j3);

    let terms: Vec<PrimeExps> = (t_min..=t_max)
        .map(|t| {
            let mut e = PrimeExps::zeros(len);
            e.add_factorial(&primes, t + 1, 1);
            for ai in a {
                e.add_factorial(&primes, t - ai, -1);
            }
            for bi in b {
                e.add_factorial(&primes, bi - t, -1);
            }
            e
        })
        .collect();
    let (common, sum) = common_factor_sum(&primes, &terms, t_min);
    assemble(&primes, &sqrt_exps, &common, &sum)
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>`.
pub fn clebsch_gordan(
    j1: HalfInteger,
    m1: HalfInteger,
    j2: HalfInteger,
    m2: HalfInteger,
    j: HalfInteger,
    m: HalfInteger,
) -> f64 {
    let phase = (j1 - j2 + m).phase();
    phase * ((j.twice() + 1) as f64).sqrt() * wigner_3j(j1, j2, j, m1, m2, -m)
}
