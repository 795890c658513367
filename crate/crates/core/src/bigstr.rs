// Serializes big integers as decimal strings so documents stay readable.
use alloc::string::{String, ToString};
use core::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
    let s = String::deserialize(d)?;
    BigUint::from_str(&s).map_err(serde::de::Error::custom)
}
