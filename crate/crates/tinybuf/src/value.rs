//! Dynamically typed message instances.

use std::collections::BTreeMap;

use crate::schema::ScalarType;

#[derive(Debug, Clone, Copy)]
pub enum Scalar {
    U8(u8),
    I8(i8),
    U16(u16),
    I16(i16),
    U32(u32),
    I32(i32),
    U64(u64),
    I64(i64),
    F32(f32),
    F64(f64),
}

// Floats compare by bit pattern so NaN payloads survive round-trip checks.
impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        use Scalar::*;
        match (self, other) {
            (U8(a), U8(b)) => a == b,
            (I8(a), I8(b)) => a == b,
            (U16(a), U16(b)) => a == b,
            (I16(a), I16(b)) => a == b,
            (U32(a), U32(b)) => a == b,
            (I32(a), I32(b)) => a == b,
            (U64(a), U64(b)) => a == b,
            (I64(a), I64(b)) => a == b,
            (F32(a), F32(b)) => a.to_bits() == b.to_bits(),
            (F64(a), F64(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Scalar {
    pub fn scalar_type(&self) -> ScalarType {
        match self {
            Scalar::U8(_) => ScalarType::Uint8,
            Scalar::I8(_) => ScalarType::Int8,
            Scalar::U16(_) => ScalarType::Uint16,
            Scalar::I16(_) => ScalarType::Int16,
            Scalar::U32(_) => ScalarType::Uint32,
            Scalar::I32(_) => ScalarType::Int32,
            Scalar::U64(_) => ScalarType::Uint64,
            Scalar::I64(_) => ScalarType::Int64,
            Scalar::F32(_) => ScalarType::Float32,
            Scalar::F64(_) => ScalarType::Float64,
        }
    }

    pub fn write_le(&self, out: &mut Vec<u8>) {
        match *self {
            Scalar::U8(v) => out.push(v),
            Scalar::I8(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::U16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::I16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::U32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::I32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::U64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::F32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Scalar::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
        }
    }

    /// Reads a scalar of type `ty` from exactly `ty.width()` bytes.
    pub fn read_le(ty: ScalarType, b: &[u8]) -> Scalar {
        debug_assert_eq!(b.len(), ty.width());
        match ty {
            ScalarType::Uint8 => Scalar::U8(b[0]),
            ScalarType::Int8 => Scalar::I8(b[0] as i8),
            ScalarType::Uint16 => Scalar::U16(u16::from_le_bytes([b[0], b[1]])),
            ScalarType::Int16 => Scalar::I16(i16::from_le_bytes([b[0], b[1]])),
            ScalarType::Uint32 => Scalar::U32(u32::from_le_bytes(b.try_into().unwrap())),
            ScalarType::Int32 => Scalar::I32(i32::from_le_bytes(b.try_into().unwrap())),
            ScalarType::Uint64 => Scalar::U64(u64::from_le_bytes(b.try_into().unwrap())),
            ScalarType::Int64 => Scalar::I64(i64::from_le_bytes(b.try_into().unwrap())),
            ScalarType::Float32 => Scalar::F32(f32::from_le_bytes(b.try_into().unwrap())),
            ScalarType::Float64 => Scalar::F64(f64::from_le_bytes(b.try_into().unwrap())),
        }
    }

    /// Integer view, for callers that do not care about the exact width.
    pub fn as_i128(&self) -> Option<i128> {
        Some(match *self {
            Scalar::U8(v) => v as i128,
            Scalar::I8(v) => v as i128,
            Scalar::U16(v) => v as i128,
            Scalar::I16(v) => v as i128,
            Scalar::U32(v) => v as i128,
            Scalar::I32(v) => v as i128,
            Scalar::U64(v) => v as i128,
            Scalar::I64(v) => v as i128,
            Scalar::F32(_) | Scalar::F64(_) => return None,
        })
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Scalar::F32(v) => v as f64,
            Scalar::F64(v) => v,
            _ => self.as_i128().unwrap() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(Scalar),
    Message(Message),
    List(Vec<Value>),
}

impl Value {
    pub fn as_scalar(&self) -> Option<&Scalar> {
        match self {
            Value::Scalar(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_message(&self) -> Option<&Message> {
        match self {
            Value::Message(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        self.as_scalar()?.as_i128().and_then(|v| u64::try_from(v).ok())
    }

    pub fn as_i64(&self) -> Option<i64> {
        self.as_scalar()?.as_i128().and_then(|v| i64::try_from(v).ok())
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.as_scalar().map(Scalar::as_f64)
    }
}

macro_rules! scalar_from {
    ($($t:ty => $v:ident),* $(,)?) => {
        $(
            impl From<$t> for Scalar {
                fn from(v: $t) -> Scalar { Scalar::$v(v) }
            }
            impl From<$t> for Value {
                fn from(v: $t) -> Value { Value::Scalar(Scalar::$v(v)) }
            }
        )*
    };
}

scalar_from!(u8 => U8, i8 => I8, u16 => U16, i16 => I16, u32 => U32, i32 => I32,
             u64 => U64, i64 => I64, f32 => F32, f64 => F64);

impl From<Scalar> for Value {
    fn from(s: Scalar) -> Value {
        Value::Scalar(s)
    }
}

impl From<Message> for Value {
    fn from(m: Message) -> Value {
        Value::Message(m)
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(items: Vec<T>) -> Value {
        Value::List(items.into_iter().map(Into::into).collect())
    }
}

/// A message instance: field name to value. Absent optional fields and
/// unset oneof members are simply missing from the map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Message {
    fields: BTreeMap<String, Value>,
}

impl Message {
    pub fn new() -> Message {
        Message::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Message {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: impl Into<Value>) {
        self.fields.insert(name.to_string(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.fields.get(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.fields.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.fields.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.fields.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}
