//! Serde adapters that encode `f64` as its shortest round-trip decimal
//! string, so persisted models are bit-exact across languages.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn format(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "Infinity" } else { "-Infinity" }.to_string()
    } else {
        // `Debug` prints the shortest string that parses back to the same bits.
        format!("{v:?}")
    }
}

pub fn parse(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "Infinity" => Some(f64::INFINITY),
        "-Infinity" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format(*v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).ok_or_else(|| de::Error::custom(format!("invalid real '{s}'")))
}

pub mod vec {
    use serde::ser::SerializeSeq;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&super::format(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| {
                super::parse(s).ok_or_else(|| de::Error::custom(format!("invalid real '{s}'")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            1e21,
            0.0,
            -0.0,
            f64::MAX,
            f64::MIN_POSITIVE,
        ] {
            let s = format(v);
            assert_eq!(parse(&s).unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format(0.1), "0.1");
    }
}
