use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent `p` of an `l_p` / `L^p` / `W_p` quantity, `1 <= p <= inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Finite(f64),
    Infinity,
}

impl Order {
    pub const ONE: Order = Order::Finite(1.0);
    pub const TWO: Order = Order::Finite(2.0);
    pub const INF: Order = Order::Infinity;

    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Order::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Order::Finite(p))
        } else {
            Err(Error::InvalidParameter(format!(
                "order p must lie in [1, inf], got {p}"
            )))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Order::Infinity)
    }

    /// Weighted power mean `(sum w_i |a_i|^p)^(1/p)`, or `max |a_i|` over positive weights.
    pub fn weighted_mean<I>(self, terms: I) -> f64
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        match self {
            Order::Finite(p) => {
                let s: f64 = terms.into_iter().map(|(w, a)| w * pow_abs(a, p)).sum();
                if p == 1.0 {
                    s
                } else {
                    s.powf(1.0 / p)
                }
            }
            Order::Infinity => terms
                .into_iter()
                .filter(|&(w, _)| w > 0.0)
                .fold(0.0, |m, (_, a)| m.max(a.abs())),
        }
    }

    /// `((1/N) sum |a_i|^p)^(1/p)`.
    pub fn uniform_mean(self, values: &[f64]) -> f64 {
        let w = 1.0 / values.len().max(1) as f64;
        self.weighted_mean(values.iter().map(|&a| (w, a)))
    }
}

#[inline]
pub(crate) fn pow_abs(a: f64, p: f64) -> f64 {
    let a = a.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(p) => write!(f, "{p}"),
            Order::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Order::Infinity),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse order `{s}`")))
                .and_then(Order::new),
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(p) => s.serialize_f64(*p),
            Order::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => Order::new(p),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}
