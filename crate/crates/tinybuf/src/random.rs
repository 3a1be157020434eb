//! Random schemas and message instances for property tests.

use rand::Rng;

use crate::schema::{FieldDescriptor, FieldRule, FieldType, LayoutItem, MessageDescriptor, OneofGroup, ScalarType, Schema};
use crate::value::{Message, Scalar, Value};

/// Longest list generated for any repeated field.
const MAX_LIST: usize = 5;

/// Builds a valid schema with up to `max_messages` messages that together
/// exercise every field rule, both count-prefix widths above one byte, and
/// nested message references.
pub fn random_schema<R: Rng>(rng: &mut R, max_messages: usize) -> Schema {
    let count = rng.gen_range(1..=max_messages.max(1));
    let mut messages: Vec<MessageDescriptor> = Vec::with_capacity(count);
    for m in 0..count {
        let mut fields = Vec::new();
        let mut oneofs = Vec::new();
        let items = rng.gen_range(0..=6);
        for i in 0..items {
            let pick = rng.gen_range(0..5);
            if pick == 4 {
                let group = format!("g{i}");
                for j in 0..rng.gen_range(1..=4) {
                    fields.push(FieldDescriptor {
                        name: format!("f{i}_{j}"),
                        ty: random_type(rng, &messages),
                        rule: FieldRule::Oneof { group: group.clone() },
                    });
                }
                oneofs.push(OneofGroup {
                    name: group,
                    optional: rng.gen_bool(0.5),
                });
                continue;
            }
            let rule = match pick {
                0 => FieldRule::Required,
                1 => FieldRule::Optional,
                2 => FieldRule::Repeated {
                    max_count: *[1u32, 3, 5, 255, 256, 70_000].get(rng.gen_range(0..6)).unwrap(),
                },
                _ => FieldRule::FixedRepeated {
                    count: rng.gen_range(1..=4),
                },
            };
            fields.push(FieldDescriptor {
                name: format!("f{i}"),
                ty: random_type(rng, &messages),
                rule,
            });
        }
        messages.push(MessageDescriptor {
            name: format!("M{m}"),
            fields,
            oneofs,
        });
    }
    Schema::new(messages).expect("generated schema is valid")
}

fn random_type<R: Rng>(rng: &mut R, earlier: &[MessageDescriptor]) -> FieldType {
    if !earlier.is_empty() && rng.gen_bool(0.25) {
        FieldType::Message(earlier[rng.gen_range(0..earlier.len())].name.clone())
    } else {
        FieldType::Scalar(ScalarType::ALL[rng.gen_range(0..ScalarType::ALL.len())])
    }
}

/// A random scalar of the given type, covering the full bit range
/// (including NaN and infinite floats).
pub fn random_scalar<R: Rng>(rng: &mut R, ty: ScalarType) -> Scalar {
    match ty {
        ScalarType::Uint8 => Scalar::U8(rng.gen()),
        ScalarType::Int8 => Scalar::I8(rng.gen()),
        ScalarType::Uint16 => Scalar::U16(rng.gen()),
        ScalarType::Int16 => Scalar::I16(rng.gen()),
        ScalarType::Uint32 => Scalar::U32(rng.gen()),
        ScalarType::Int32 => Scalar::I32(rng.gen()),
        ScalarType::Uint64 => Scalar::U64(rng.gen()),
        ScalarType::Int64 => Scalar::I64(rng.gen()),
        ScalarType::Float32 => Scalar::F32(f32::from_bits(rng.gen())),
        ScalarType::Float64 => Scalar::F64(f64::from_bits(rng.gen())),
    }
}

/// A random instance of `message` that satisfies every descriptor invariant.
pub fn random_message<R: Rng>(rng: &mut R, schema: &Schema, message: &str) -> Message {
    let desc = schema.message(message).expect("message exists");
    let mut msg = Message::new();
    for item in desc.layout() {
        match item {
            LayoutItem::Field(f) => match &f.rule {
                FieldRule::Required => msg.set(&f.name, random_value(rng, schema, &f.ty)),
                FieldRule::Optional => {
                    if rng.gen_bool(0.5) {
                        msg.set(&f.name, random_value(rng, schema, &f.ty));
                    }
                }
                FieldRule::Repeated { max_count } => {
                    let n = rng.gen_range(0..=(*max_count as usize).min(MAX_LIST));
                    let items = (0..n).map(|_| random_value(rng, schema, &f.ty)).collect();
                    msg.set(&f.name, Value::List(items));
                }
                FieldRule::FixedRepeated { count } => {
                    let items = (0..*count).map(|_| random_value(rng, schema, &f.ty)).collect();
                    msg.set(&f.name, Value::List(items));
                }
                FieldRule::Oneof { .. } => unreachable!(),
            },
            LayoutItem::Oneof { group, members } => {
                let skip = group.optional && rng.gen_bool(0.3);
                if !skip {
                    let m = members[rng.gen_range(0..members.len())];
                    msg.set(&m.name, random_value(rng, schema, &m.ty));
                }
            }
        }
    }
    msg
}

fn random_value<R: Rng>(rng: &mut R, schema: &Schema, ty: &FieldType) -> Value {
    match ty {
        FieldType::Scalar(s) => Value::Scalar(random_scalar(rng, *s)),
        FieldType::Message(name) => Value::Message(random_message(rng, schema, name)),
    }
}

/// Replaces every scalar in `msg` with a fresh random value of the same
/// type, keeping presence and list lengths unchanged.
pub fn rescramble<R: Rng>(rng: &mut R, msg: &Message) -> Message {
    let mut out = Message::new();
    for (name, value) in msg.iter() {
        out.set(name, rescramble_value(rng, value));
    }
    out
}

fn rescramble_value<R: Rng>(rng: &mut R, value: &Value) -> Value {
    match value {
        Value::Scalar(s) => Value::Scalar(random_scalar(rng, s.scalar_type())),
        Value::Message(m) => Value::Message(rescramble(rng, m)),
        Value::List(items) => Value::List(items.iter().map(|v| rescramble_value(rng, v)).collect()),
    }
}
