//! Lebesgue exponents in `[1, ∞]`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exponent `p ∈ [1, ∞]`. Infinity is a first-class value so that
/// conjugation (`1' = ∞`, `∞' = 1`) is total.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::param(format!("exponent must lie in [1, inf], got {p}")));
        }
        Ok(Exponent(p))
    }

    /// Conjugate exponent `p / (p - 1)`.
    pub fn conj(self) -> Self {
        if self.0 == 1.0 {
            Exponent::INFINITY
        } else if self.0.is_infinite() {
            Exponent::ONE
        } else {
            Exponent(self.0 / (self.0 - 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 / p`, zero at infinity.
    pub fn recip(self) -> f64 {
        if self.0.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }

    /// Build the exponent whose reciprocal is `r`.
    pub fn from_recip(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) || r.is_nan() {
            return Err(Error::param(format!("reciprocal exponent {r} outside [0, 1]")));
        }
        if r == 0.0 {
            Ok(Exponent::INFINITY)
        } else {
            Exponent::new(1.0 / r)
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn scale(self, factor: f64) -> Result<Self> {
        Exponent::new(self.0 * factor)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Infinity" | "∞" => Ok(Exponent::INFINITY),
            other => {
                // Accept simple fractions such as "4/3".
                let value = match other.split_once('/') {
                    Some((n, d)) => {
                        let n: f64 = n.trim().parse().map_err(|_| Error::param(format!("bad exponent {s}")))?;
                        let d: f64 = d.trim().parse().map_err(|_| Error::param(format!("bad exponent {s}")))?;
                        n / d
                    }
                    None => other.parse().map_err(|_| Error::param(format!("bad exponent {s}")))?,
                };
                Exponent::new(value)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ExpVisitor;

        impl<'de> Visitor<'de> for ExpVisitor {
            type Value = Exponent;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 1 or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
                Exponent::new(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ExpVisitor)
    }
}

/// Solve `1/s = 1/p + 1/q` for `q`.
pub fn complementary(s: Exponent, p: Exponent) -> Result<Exponent> {
    if s.value() >= p.value() {
        return Err(Error::param(format!("need s < p, got s = {s}, p = {p}")));
    }
    Exponent::from_recip(s.recip() - p.recip())
}
