use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInteger(i32);

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger(0);
    pub const HALF: HalfInteger = HalfInteger(1);

    #[inline]
    pub const fn from_twice(twice: i32) -> Self {
        HalfInteger(twice)
    }

    #[inline]
    pub const fn from_int(v: i32) -> Self {
        HalfInteger(2 * v)
    }

    /// Converts a float that must be an exact multiple of 1/2.
    pub fn from_f64(v: f64) -> Option<Self> {
        let t = 2.0 * v;
        if t.is_finite() && t.fract() == 0.0 && t.abs() < i32::MAX as f64 {
            Some(HalfInteger(t as i32))
        } else {
            None
        }
    }

    #[inline]
    pub const fn twice(self) -> i32 {
        self.0
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0 as f64 * 0.5
    }

    #[inline]
    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    #[inline]
    pub fn abs(self) -> Self {
        HalfInteger(self.0.abs())
    }

    /// The integer value, if integral.
    #[inline]
    pub fn as_int(self) -> Option<i32> {
        self.is_integer().then_some(self.0 / 2)
    }

    /// `(-1)^self` for an integral value.
    ///
    /// Panics if the value is not an integer; callers combine quantum numbers
    /// so that the exponent is integral by construction.
    #[inline]
    pub fn phase(self) -> f64 {
        assert!(self.is_integer(), "phase of non-integer {self}");
        if (self.0 / 2).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `2j + 1`
    #[inline]
    pub fn multiplicity(self) -> i32 {
        self.0 + 1
    }

    /// All projections `-j, -j+1, ..., j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInteger> {
        let j = self.0;
        (0..=j.max(-1)).map(move |k| HalfInteger(-j + 2 * k)).filter(move |_| j >= 0)
    }
}

impl Add for HalfInteger {
    type Output = HalfInteger;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        HalfInteger(self.0 + rhs.0)
    }
}

impl Sub for HalfInteger {
    type Output = HalfInteger;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        HalfInteger(self.0 - rhs.0)
    }
}

impl Neg for HalfInteger {
    type Output = HalfInteger;
    #[inline]
    fn neg(self) -> Self {
        HalfInteger(-self.0)
    }
}

impl From<i32> for HalfInteger {
    fn from(v: i32) -> Self {
        HalfInteger::from_int(v)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInteger {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: i32 = num.trim().parse().map_err(|e| format!("bad half-integer `{s}`: {e}"))?;
            match den.trim() {
                "2" => Ok(HalfInteger(num)),
                "1" => Ok(HalfInteger(2 * num)),
                _ => Err(format!("bad half-integer `{s}`: denominator must be 2")),
            }
        } else {
            let v: f64 = s.parse().map_err(|e| format!("bad half-integer `{s}`: {e}"))?;
            HalfInteger::from_f64(v).ok_or_else(|| format!("`{s}` is not a multiple of 1/2"))
        }
    }
}

impl Serialize for HalfInteger {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for HalfInteger {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => HalfInteger::from_f64(v)
                .ok_or_else(|| serde::de::Error::custom(format!("{v} is not a multiple of 1/2"))),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
