//! Typed values carried in call arguments and event logs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{Canonical, Decode, DecodeError, Decoder, Encoder};
use crate::identity::Address;
use crate::runtime::ContractAddress;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    Text(String),
    Address(Address),
    Contract(ContractAddress),
    Bytes(#[serde(with = "hex_bytes")] Vec<u8>),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_address(&self) -> Option<Address> {
        match self {
            Value::Address(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_contract(&self) -> Option<ContractAddress> {
        match self {
            Value::Contract(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bytes(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
            Value::Address(v) => write!(f, "{v}"),
            Value::Contract(v) => write!(f, "{v}"),
            Value::Bytes(v) => write!(f, "0x{}", hex::encode(v)),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Address> for Value {
    fn from(v: Address) -> Self {
        Value::Address(v)
    }
}

impl From<ContractAddress> for Value {
    fn from(v: ContractAddress) -> Self {
        Value::Contract(v)
    }
}

impl Canonical for Value {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Value::Int(v) => enc.u8(0).i64(*v),
            Value::Text(v) => enc.u8(1).str(v),
            Value::Address(v) => enc.u8(2).value(v),
            Value::Contract(v) => enc.u8(3).value(v),
            Value::Bytes(v) => enc.u8(4).bytes(v),
        };
    }
}

impl Decode for Value {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let offset = dec.position();
        Ok(match dec.u8()? {
            0 => Value::Int(dec.i64()?),
            1 => Value::Text(dec.str()?),
            2 => Value::Address(Address::decode(dec)?),
            3 => Value::Contract(ContractAddress::decode(dec)?),
            4 => Value::Bytes(dec.bytes()?),
            tag => return Err(DecodeError::InvalidTag { tag, offset }),
        })
    }
}

/// Encodes an argument list the way it is stored in a transaction.
pub fn encode_args(args: &[Value]) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.seq(args);
    enc.finish()
}

pub fn decode_args(bytes: &[u8]) -> Result<Vec<Value>, DecodeError> {
    let mut dec = Decoder::new(bytes);
    let args = dec.seq()?;
    dec.finish()?;
    Ok(args)
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", hex::encode(bytes)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s.strip_prefix("0x").unwrap_or(&s)).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int),
            ".{0,12}".prop_map(Value::Text),
            any::<[u8; 20]>().prop_map(|b| Value::Address(Address::from_bytes(b))),
            any::<[u8; 20]>().prop_map(|b| Value::Contract(ContractAddress::from_bytes(b))),
            proptest::collection::vec(any::<u8>(), 0..16).prop_map(Value::Bytes),
        ]
    }

    proptest! {
        #[test]
        fn args_round_trip(args in proptest::collection::vec(arb_value(), 0..6)) {
            let bytes = encode_args(&args);
            prop_assert_eq!(decode_args(&bytes).unwrap(), args.clone());
            let json = serde_json::to_string(&args).unwrap();
            prop_assert_eq!(serde_json::from_str::<Vec<Value>>(&json).unwrap(), args);
        }
    }
}
