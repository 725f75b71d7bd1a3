//! Serde helpers for 32-bit addresses/values as `0x`-prefixed lowercase hex
//! strings, the representation used by trace files, scenario files and
//! channel reports.

use serde::{Deserialize, Deserializer, Serializer};

pub fn parse_u32(s: &str) -> Result<u32, String> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or_else(|| format!("expected 0x-prefixed hex value, got {s:?}"))?;
    if digits.is_empty() {
        return Err(format!("empty hex value {s:?}"));
    }
    // Parse into u64 first so 64-bit inputs get a clear diagnostic.
    let wide = u64::from_str_radix(digits, 16).map_err(|e| format!("bad hex value {s:?}: {e}"))?;
    u32::try_from(wide).map_err(|_| format!("value {s} does not fit in 32 bits"))
}

pub fn to_hex(v: u32) -> String {
    format!("{v:#x}")
}

pub fn serialize<S: Serializer>(v: &u32, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&to_hex(*v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<u32, D::Error> {
    let s = String::deserialize(de)?;
    parse_u32(&s).map_err(serde::de::Error::custom)
}

pub mod opt {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<u32>, ser: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => ser.serialize_some(&to_hex(*v)),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<u32>, D::Error> {
        let s = Option::<String>::deserialize(de)?;
        s.map(|s| parse_u32(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}
