//! Descriptor-driven binary codec.
//!
//! Wire layout, in field declaration order with no field identifiers:
//!
//! | rule             | bytes                                                  |
//! |------------------|--------------------------------------------------------|
//! | required         | value                                                  |
//! | optional         | `0x00` absent, or `0x01` + value                       |
//! | repeated `[max]` | count (1, 2 or 4 bytes, smallest holding `max`) + values |
//! | fixed_repeated   | exactly `count` values                                 |
//! | oneof group      | 1-byte tag (1-based member ordinal, 0 = none) + value  |
//!
//! Scalars are little-endian; nested messages are inlined.

use crate::error::{DecodeError, EncodeError};
use crate::schema::{count_prefix_width, FieldDescriptor, FieldRule, FieldType, LayoutItem, MessageDescriptor, Schema};
use crate::value::{Message, Scalar, Value};

impl Schema {
    fn lookup(&self, name: &str) -> Result<&MessageDescriptor, EncodeError> {
        self.message(name).ok_or_else(|| EncodeError::UnknownMessage(name.into()))
    }

    /// Exact size of `encode(message, value)`.
    pub fn encoded_size(&self, message: &str, value: &Message) -> Result<usize, EncodeError> {
        let desc = self.lookup(message)?;
        self.check(desc, value)?;
        Ok(self.size_of(desc, value))
    }

    pub fn encode(&self, message: &str, value: &Message) -> Result<Vec<u8>, EncodeError> {
        let desc = self.lookup(message)?;
        self.check(desc, value)?;
        let mut out = Vec::with_capacity(self.size_of(desc, value));
        self.write(desc, value, &mut out);
        Ok(out)
    }

    /// Appends the encoding to `out`.
    pub fn encode_into(&self, message: &str, value: &Message, out: &mut Vec<u8>) -> Result<(), EncodeError> {
        let desc = self.lookup(message)?;
        self.check(desc, value)?;
        self.write(desc, value, out);
        Ok(())
    }

    /// Decodes a message that must span all of `bytes`.
    pub fn decode(&self, message: &str, bytes: &[u8]) -> Result<Message, DecodeError> {
        let (msg, used) = self.decode_prefix(message, bytes)?;
        if used != bytes.len() {
            return Err(DecodeError::TrailingBytes {
                count: bytes.len() - used,
            });
        }
        Ok(msg)
    }

    /// Decodes a message from the front of `bytes`, returning it together
    /// with the number of bytes consumed.
    pub fn decode_prefix(&self, message: &str, bytes: &[u8]) -> Result<(Message, usize), DecodeError> {
        let desc = self
            .message(message)
            .ok_or_else(|| DecodeError::UnknownMessage(message.into()))?;
        let mut reader = Reader { buf: bytes, pos: 0 };
        let msg = self.read(desc, &mut reader)?;
        Ok((msg, reader.pos))
    }

    fn check(&self, desc: &MessageDescriptor, value: &Message) -> Result<(), EncodeError> {
        for (name, _) in value.iter() {
            if desc.field(name).is_none() {
                return Err(EncodeError::UnknownField {
                    message: desc.name.clone(),
                    field: name.into(),
                });
            }
        }
        for item in desc.layout() {
            match item {
                LayoutItem::Field(f) => {
                    let v = value.get(&f.name);
                    match (&f.rule, v) {
                        (FieldRule::Required, None) => {
                            return Err(EncodeError::MissingField {
                                message: desc.name.clone(),
                                field: f.name.clone(),
                            })
                        }
                        (FieldRule::Optional, None) => {}
                        (FieldRule::Required | FieldRule::Optional, Some(v)) => self.check_single(desc, f, v)?,
                        (FieldRule::Repeated { max_count }, v) => {
                            let items = self.check_list(desc, f, v)?;
                            if items.len() > *max_count as usize {
                                return Err(EncodeError::TooManyElements {
                                    message: desc.name.clone(),
                                    field: f.name.clone(),
                                    limit: *max_count,
                                    actual: items.len(),
                                });
                            }
                        }
                        (FieldRule::FixedRepeated { count }, v) => {
                            let items = self.check_list(desc, f, v)?;
                            if items.len() != *count as usize {
                                return Err(EncodeError::WrongElementCount {
                                    message: desc.name.clone(),
                                    field: f.name.clone(),
                                    count: *count,
                                    actual: items.len(),
                                });
                            }
                        }
                        (FieldRule::Oneof { .. }, _) => unreachable!(),
                    }
                }
                LayoutItem::Oneof { group, members } => {
                    let set: Vec<_> = members.iter().filter(|m| value.contains(&m.name)).collect();
                    match set.len() {
                        0 if group.optional => {}
                        0 => {
                            return Err(EncodeError::NoOneofMember {
                                message: desc.name.clone(),
                                group: group.name.clone(),
                            })
                        }
                        1 => self.check_single(desc, set[0], value.get(&set[0].name).unwrap())?,
                        _ => {
                            return Err(EncodeError::MultipleOneofMembers {
                                message: desc.name.clone(),
                                group: group.name.clone(),
                            })
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_list<'v>(
        &self,
        desc: &MessageDescriptor,
        f: &FieldDescriptor,
        v: Option<&'v Value>,
    ) -> Result<&'v [Value], EncodeError> {
        let items: &[Value] = match v {
            // an absent repeated field is an empty list
            None => &[],
            Some(Value::List(items)) => items,
            Some(_) => return Err(mismatch(desc, f, "a list")),
        };
        for item in items {
            self.check_single(desc, f, item)?;
        }
        Ok(items)
    }

    fn check_single(&self, desc: &MessageDescriptor, f: &FieldDescriptor, v: &Value) -> Result<(), EncodeError> {
        match (&f.ty, v) {
            (FieldType::Scalar(ty), Value::Scalar(s)) if s.scalar_type() == *ty => Ok(()),
            (FieldType::Message(name), Value::Message(m)) => self.check(self.lookup(name)?, m),
            (ty, _) => Err(mismatch(desc, f, &ty.to_string())),
        }
    }

    fn size_of(&self, desc: &MessageDescriptor, value: &Message) -> usize {
        let mut size = 0;
        for item in desc.layout() {
            match item {
                LayoutItem::Field(f) => match &f.rule {
                    FieldRule::Required => size += self.value_size(&f.ty, value.get(&f.name).unwrap()),
                    FieldRule::Optional => {
                        size += 1;
                        if let Some(v) = value.get(&f.name) {
                            size += self.value_size(&f.ty, v);
                        }
                    }
                    FieldRule::Repeated { max_count } => {
                        size += count_prefix_width(*max_count);
                        size += self.list_size(&f.ty, value.get(&f.name));
                    }
                    FieldRule::FixedRepeated { .. } => size += self.list_size(&f.ty, value.get(&f.name)),
                    FieldRule::Oneof { .. } => unreachable!(),
                },
                LayoutItem::Oneof { members, .. } => {
                    size += 1;
                    if let Some(m) = members.iter().find(|m| value.contains(&m.name)) {
                        size += self.value_size(&m.ty, value.get(&m.name).unwrap());
                    }
                }
            }
        }
        size
    }

    fn list_size(&self, ty: &FieldType, v: Option<&Value>) -> usize {
        match v {
            Some(Value::List(items)) => items.iter().map(|i| self.value_size(ty, i)).sum(),
            _ => 0,
        }
    }

    fn value_size(&self, ty: &FieldType, v: &Value) -> usize {
        match (ty, v) {
            (FieldType::Scalar(s), _) => s.width(),
            (FieldType::Message(name), Value::Message(m)) => self.size_of(self.message(name).unwrap(), m),
            _ => unreachable!("checked"),
        }
    }

    fn write(&self, desc: &MessageDescriptor, value: &Message, out: &mut Vec<u8>) {
        for item in desc.layout() {
            match item {
                LayoutItem::Field(f) => match &f.rule {
                    FieldRule::Required => self.write_value(&f.ty, value.get(&f.name).unwrap(), out),
                    FieldRule::Optional => match value.get(&f.name) {
                        None => out.push(0x00),
                        Some(v) => {
                            out.push(0x01);
                            self.write_value(&f.ty, v, out);
                        }
                    },
                    FieldRule::Repeated { max_count } => {
                        let items = list_items(value.get(&f.name));
                        write_count(items.len() as u32, count_prefix_width(*max_count), out);
                        for i in items {
                            self.write_value(&f.ty, i, out);
                        }
                    }
                    FieldRule::FixedRepeated { .. } => {
                        for i in list_items(value.get(&f.name)) {
                            self.write_value(&f.ty, i, out);
                        }
                    }
                    FieldRule::Oneof { .. } => unreachable!(),
                },
                LayoutItem::Oneof { members, .. } => {
                    match members.iter().position(|m| value.contains(&m.name)) {
                        None => out.push(0x00),
                        Some(pos) => {
                            out.push((pos + 1) as u8);
                            let m = members[pos];
                            self.write_value(&m.ty, value.get(&m.name).unwrap(), out);
                        }
                    }
                }
            }
        }
    }

    fn write_value(&self, ty: &FieldType, v: &Value, out: &mut Vec<u8>) {
        match (ty, v) {
            (FieldType::Scalar(_), Value::Scalar(s)) => s.write_le(out),
            (FieldType::Message(name), Value::Message(m)) => self.write(self.message(name).unwrap(), m, out),
            _ => unreachable!("checked"),
        }
    }

    fn read(&self, desc: &MessageDescriptor, r: &mut Reader<'_>) -> Result<Message, DecodeError> {
        let mut msg = Message::new();
        for item in desc.layout() {
            match item {
                LayoutItem::Field(f) => match &f.rule {
                    FieldRule::Required => {
                        let v = self.read_value(&f.ty, r)?;
                        msg.set(&f.name, v);
                    }
                    FieldRule::Optional => match r.take(1)?[0] {
                        0x00 => {}
                        0x01 => {
                            let v = self.read_value(&f.ty, r)?;
                            msg.set(&f.name, v);
                        }
                        byte => {
                            return Err(DecodeError::InvalidPresence {
                                field: f.name.clone(),
                                byte,
                            })
                        }
                    },
                    FieldRule::Repeated { max_count } => {
                        let count = read_count(count_prefix_width(*max_count), r)?;
                        if count > *max_count {
                            return Err(DecodeError::CountExceedsLimit {
                                field: f.name.clone(),
                                count,
                                limit: *max_count,
                            });
                        }
                        let items = (0..count)
                            .map(|_| self.read_value(&f.ty, r))
                            .collect::<Result<Vec<_>, _>>()?;
                        msg.set(&f.name, Value::List(items));
                    }
                    FieldRule::FixedRepeated { count } => {
                        let items = (0..*count)
                            .map(|_| self.read_value(&f.ty, r))
                            .collect::<Result<Vec<_>, _>>()?;
                        msg.set(&f.name, Value::List(items));
                    }
                    FieldRule::Oneof { .. } => unreachable!(),
                },
                LayoutItem::Oneof { group, members } => {
                    let tag = r.take(1)?[0];
                    if tag == 0 && group.optional {
                        continue;
                    }
                    if tag == 0 || tag as usize > members.len() {
                        return Err(DecodeError::InvalidOneofTag {
                            group: group.name.clone(),
                            tag,
                        });
                    }
                    let m = members[tag as usize - 1];
                    let v = self.read_value(&m.ty, r)?;
                    msg.set(&m.name, v);
                }
            }
        }
        Ok(msg)
    }

    fn read_value(&self, ty: &FieldType, r: &mut Reader<'_>) -> Result<Value, DecodeError> {
        match ty {
            FieldType::Scalar(s) => Ok(Value::Scalar(Scalar::read_le(*s, r.take(s.width())?))),
            FieldType::Message(name) => {
                let desc = self.message(name).expect("validated reference");
                Ok(Value::Message(self.read(desc, r)?))
            }
        }
    }
}

fn mismatch(desc: &MessageDescriptor, f: &FieldDescriptor, expected: &str) -> EncodeError {
    EncodeError::TypeMismatch {
        message: desc.name.clone(),
        field: f.name.clone(),
        expected: expected.into(),
    }
}

fn list_items(v: Option<&Value>) -> &[Value] {
    match v {
        Some(Value::List(items)) => items,
        _ => &[],
    }
}

fn write_count(count: u32, width: usize, out: &mut Vec<u8>) {
    out.extend_from_slice(&count.to_le_bytes()[..width]);
}

fn read_count(width: usize, r: &mut Reader<'_>) -> Result<u32, DecodeError> {
    let b = r.take(width)?;
    let mut le = [0u8; 4];
    le[..width].copy_from_slice(b);
    Ok(u32::from_le_bytes(le))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let available = self.buf.len() - self.pos;
        if available < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n - available,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_schema;

    fn schema() -> Schema {
        parse_schema(
            "message Timestamp { required uint32 seconds; required uint16 ms; }\n\
             message Vals { repeated uint16 vals[100]; }\n\
             message Opt { optional uint8 x; }\n\
             message Choice { oneof c { uint8 a; uint16 b; } }\n\
             message MaybeChoice { optional oneof c { uint8 a; uint16 b; } }\n\
             message Fixed { fixed_repeated int16 v[3]; }\n\
             message Wide { repeated uint8 v[300]; }\n\
             message ScanResultData { required uint16 id; required int8 rssi; required uint8 count; }\n\
             message ScanChunk { required Timestamp timestamp; repeated ScanResultData devices[255]; }",
        )
        .unwrap()
    }

    fn ts(seconds: u32, ms: u16) -> Message {
        Message::new().with("seconds", seconds).with("ms", ms)
    }

    #[test]
    fn timestamp_zero_is_six_zero_bytes() {
        assert_eq!(schema().encode("Timestamp", &ts(0, 0)).unwrap(), vec![0u8; 6]);
    }

    #[test]
    fn little_endian_scalars() {
        let bytes = schema().encode("Timestamp", &ts(0x0403_0201, 0x0605)).unwrap();
        assert_eq!(bytes, [1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn repeated_sizes() {
        let s = schema();
        let full = Message::new().with("vals", (0..100u16).collect::<Vec<_>>());
        assert_eq!(s.encoded_size("Vals", &full).unwrap(), 201);
        let empty = Message::new().with("vals", Vec::<u16>::new());
        assert_eq!(s.encoded_size("Vals", &empty).unwrap(), 1);
        assert_eq!(s.encode("Vals", &Message::new()).unwrap(), vec![0]);
        let decoded = s.decode("Vals", &s.encode("Vals", &full).unwrap()).unwrap();
        assert_eq!(decoded, full);
    }

    #[test]
    fn scan_chunk_with_29_devices_is_123_bytes() {
        let s = schema();
        let devices: Vec<Value> = (0..29u16)
            .map(|i| {
                Message::new()
                    .with("id", i)
                    .with("rssi", -50i8)
                    .with("count", 3u8)
                    .into()
            })
            .collect();
        let chunk = Message::new()
            .with("timestamp", ts(1, 2))
            .with("devices", Value::List(devices));
        assert_eq!(s.encoded_size("ScanChunk", &chunk).unwrap(), 123);
    }

    #[test]
    fn optional_absent_is_single_zero() {
        let s = schema();
        assert_eq!(s.encode("Opt", &Message::new()).unwrap(), vec![0x00]);
        assert_eq!(s.encode("Opt", &Message::new().with("x", 7u8)).unwrap(), vec![0x01, 7]);
        assert!(matches!(
            s.decode("Opt", &[0x02, 7]),
            Err(DecodeError::InvalidPresence { byte: 2, .. })
        ));
    }

    #[test]
    fn oneof_tag_then_value() {
        let s = schema();
        let v = Message::new().with("b", 0x0102u16);
        assert_eq!(s.encode("Choice", &v).unwrap(), vec![0x02, 0x02, 0x01]);
        assert_eq!(s.decode("Choice", &[0x02, 0x02, 0x01]).unwrap(), v);
        assert!(matches!(
            s.decode("Choice", &[0x07, 0]),
            Err(DecodeError::InvalidOneofTag { tag: 7, .. })
        ));
        assert!(matches!(
            s.decode("Choice", &[0x00]),
            Err(DecodeError::InvalidOneofTag { tag: 0, .. })
        ));
        assert_eq!(s.decode("MaybeChoice", &[0x00]).unwrap(), Message::new());
    }

    #[test]
    fn oneof_violations() {
        let s = schema();
        let two = Message::new().with("a", 1u8).with("b", 2u16);
        assert!(matches!(
            s.encode("Choice", &two),
            Err(EncodeError::MultipleOneofMembers { .. })
        ));
        assert!(matches!(
            s.encode("Choice", &Message::new()),
            Err(EncodeError::NoOneofMember { .. })
        ));
    }

    #[test]
    fn fixed_repeated_has_no_prefix() {
        let s = schema();
        let v = Message::new().with("v", vec![1i16, -1, 2]);
        assert_eq!(s.encode("Fixed", &v).unwrap(), vec![1, 0, 0xff, 0xff, 2, 0]);
        let short = Message::new().with("v", vec![1i16]);
        assert!(matches!(
            s.encode("Fixed", &short),
            Err(EncodeError::WrongElementCount { count: 3, actual: 1, .. })
        ));
    }

    #[test]
    fn wide_count_prefix() {
        let s = schema();
        let v = Message::new().with("v", vec![9u8; 256]);
        let bytes = s.encode("Wide", &v).unwrap();
        assert_eq!(&bytes[..2], &[0x00, 0x01]);
        assert_eq!(bytes.len(), 258);
    }

    #[test]
    fn decode_errors() {
        let s = schema();
        assert!(matches!(s.decode("Timestamp", &[]), Err(DecodeError::Truncated { offset: 0, .. })));
        assert!(matches!(
            s.decode("Timestamp", &[0; 7]),
            Err(DecodeError::TrailingBytes { count: 1 })
        ));
        assert!(matches!(
            s.decode("Vals", &[101]),
            Err(DecodeError::CountExceedsLimit { count: 101, limit: 100, .. })
        ));
    }

    #[test]
    fn invariant_violations() {
        let s = schema();
        assert!(matches!(
            s.encode("Timestamp", &Message::new().with("seconds", 1u32)),
            Err(EncodeError::MissingField { .. })
        ));
        assert!(matches!(
            s.encode("Timestamp", &ts(1, 1).with("extra", 1u8)),
            Err(EncodeError::UnknownField { .. })
        ));
        assert!(matches!(
            s.encode("Timestamp", &Message::new().with("seconds", 1u16).with("ms", 1u16)),
            Err(EncodeError::TypeMismatch { .. })
        ));
        let too_many = Message::new().with("vals", vec![0u16; 101]);
        assert!(matches!(
            s.encoded_size("Vals", &too_many),
            Err(EncodeError::TooManyElements { .. })
        ));
    }
}
