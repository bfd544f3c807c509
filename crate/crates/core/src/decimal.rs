//! Serde helpers writing reals as decimal strings.
//!
//! Rust's `Display` for `f64` prints the shortest string that parses back to
//! the same value, so the string form round-trips bit-for-bit. Very small
//! or very large magnitudes use exponent form (`1.9e-178`) instead of
//! hundreds of zeros. Readers accept
//! either strings or bare JSON numbers.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;
use std::fmt;

pub fn format(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if x != 0.0 && !(1e-5..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn parse(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
        "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
        "NaN" | "nan" => Ok(f64::NAN),
        t => t.parse::<f64>().map_err(|e| format!("invalid decimal {s:?}: {e}")),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Decimal {
    Str(String),
    Num(f64),
}

impl Decimal {
    fn value<E: de::Error>(self) -> Result<f64, E> {
        match self {
            Decimal::Num(x) => Ok(x),
            Decimal::Str(s) => parse(&s).map_err(E::custom),
        }
    }
}

/// `#[serde(with = "decimal::scalar")]`
pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Decimal::deserialize(d)?.value()
    }
}

/// `#[serde(with = "decimal::vec")]`
pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&format(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<f64>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of decimal strings or numbers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<f64>, A::Error> {
                let mut out = Vec::with_capacity(seq.size_hint().unwrap_or(0));
                while let Some(d) = seq.next_element::<Decimal>()? {
                    out.push(d.value()?);
                }
                Ok(out)
            }
        }
        d.deserialize_seq(V)
    }
}

/// `#[serde(with = "decimal::option")]`, `None` as null.
pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(x) => s.serialize_some(&format(*x)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Decimal>::deserialize(d)?.map(|v| v.value()).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(serde::Serialize, serde::Deserialize, Debug, PartialEq)]
    struct W {
        #[serde(with = "vec")]
        xs: Vec<f64>,
        #[serde(with = "scalar")]
        y: f64,
    }

    #[test]
    fn strings_round_trip_exactly() {
        let w = W { xs: vec![0.1, 1.0 / 3.0, 1e-300, -2.5], y: std::f64::consts::PI };
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains("\"0.1\""));
        assert!(s.contains("\"1e-300\""));
        let back: W = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn bare_numbers_accepted() {
        let back: W = serde_json::from_str(r#"{"xs":[0.5,"0.25"],"y":1}"#).unwrap();
        assert_eq!(back.xs, vec![0.5, 0.25]);
        assert_eq!(back.y, 1.0);
    }

    #[test]
    fn infinities_survive() {
        assert_eq!(parse(&format(f64::NEG_INFINITY)).unwrap(), f64::NEG_INFINITY);
        assert!(parse("abc").is_err());
    }
}
