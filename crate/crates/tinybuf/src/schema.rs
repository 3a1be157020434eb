//! Schema model: message descriptors, field types and field rules.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

/// Fixed-width scalar types. Integers are two's complement, floats IEEE-754,
/// all little-endian on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Uint8,
    Int8,
    Uint16,
    Int16,
    Uint32,
    Int32,
    Uint64,
    Int64,
    Float32,
    Float64,
}

impl ScalarType {
    pub const ALL: [ScalarType; 10] = [
        ScalarType::Uint8,
        ScalarType::Int8,
        ScalarType::Uint16,
        ScalarType::Int16,
        ScalarType::Uint32,
        ScalarType::Int32,
        ScalarType::Uint64,
        ScalarType::Int64,
        ScalarType::Float32,
        ScalarType::Float64,
    ];

    /// Width on the wire in bytes.
    pub const fn width(self) -> usize {
        match self {
            ScalarType::Uint8 | ScalarType::Int8 => 1,
            ScalarType::Uint16 | ScalarType::Int16 => 2,
            ScalarType::Uint32 | ScalarType::Int32 | ScalarType::Float32 => 4,
            ScalarType::Uint64 | ScalarType::Int64 | ScalarType::Float64 => 8,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ScalarType::Uint8 => "uint8",
            ScalarType::Int8 => "int8",
            ScalarType::Uint16 => "uint16",
            ScalarType::Int16 => "int16",
            ScalarType::Uint32 => "uint32",
            ScalarType::Int32 => "int32",
            ScalarType::Uint64 => "uint64",
            ScalarType::Int64 => "int64",
            ScalarType::Float32 => "float32",
            ScalarType::Float64 => "float64",
        }
    }

    /// Parses a scalar keyword. `float` and `double` are accepted as aliases.
    pub fn from_keyword(word: &str) -> Option<ScalarType> {
        Some(match word {
            "uint8" => ScalarType::Uint8,
            "int8" => ScalarType::Int8,
            "uint16" => ScalarType::Uint16,
            "int16" => ScalarType::Int16,
            "uint32" => ScalarType::Uint32,
            "int32" => ScalarType::Int32,
            "uint64" => ScalarType::Uint64,
            "int64" => ScalarType::Int64,
            "float32" | "float" => ScalarType::Float32,
            "float64" | "double" => ScalarType::Float64,
            _ => return None,
        })
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Field type: a scalar or a reference to a previously declared message.
///
/// Serialized as a plain string: scalar keywords are reserved, so any other
/// string names a message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum FieldType {
    Scalar(ScalarType),
    Message(String),
}

impl From<FieldType> for String {
    fn from(ty: FieldType) -> String {
        ty.to_string()
    }
}

impl From<String> for FieldType {
    fn from(s: String) -> FieldType {
        match ScalarType::from_keyword(&s) {
            Some(scalar) => FieldType::Scalar(scalar),
            None => FieldType::Message(s),
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldType::Scalar(s) => f.write_str(s.name()),
            FieldType::Message(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FieldRule {
    Required,
    Optional,
    Repeated { max_count: u32 },
    FixedRepeated { count: u32 },
    /// Member of the named oneof group. The member's tag is its 1-based
    /// position among the group's members in declaration order.
    Oneof { group: String },
}

/// Width of the element-count prefix for a repeated field.
pub const fn count_prefix_width(max_count: u32) -> usize {
    if max_count <= u8::MAX as u32 {
        1
    } else if max_count <= u16::MAX as u32 {
        2
    } else {
        4
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: FieldType,
    #[serde(flatten)]
    pub rule: FieldRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneofGroup {
    pub name: String,
    /// When set, tag 0x00 ("nothing set") is legal for this group.
    #[serde(default)]
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageDescriptor {
    pub name: String,
    pub fields: Vec<FieldDescriptor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oneofs: Vec<OneofGroup>,
}

impl MessageDescriptor {
    pub fn field(&self, name: &str) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn oneof(&self, group: &str) -> Option<&OneofGroup> {
        self.oneofs.iter().find(|g| g.name == group)
    }

    /// Members of a oneof group, in tag order.
    pub fn oneof_members<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a FieldDescriptor> + 'a {
        self.fields
            .iter()
            .filter(move |f| matches!(&f.rule, FieldRule::Oneof { group: g } if g == group))
    }

    /// Walks the descriptor in wire order: plain fields individually, each
    /// oneof group once at the position of its first member.
    pub fn layout(&self) -> Vec<LayoutItem<'_>> {
        let mut items = Vec::new();
        let mut seen = HashSet::new();
        for field in &self.fields {
            match &field.rule {
                FieldRule::Oneof { group } => {
                    if seen.insert(group.as_str()) {
                        let desc = self.oneof(group).expect("validated oneof group");
                        items.push(LayoutItem::Oneof {
                            group: desc,
                            members: self.oneof_members(group).collect(),
                        });
                    }
                }
                _ => items.push(LayoutItem::Field(field)),
            }
        }
        items
    }
}

#[derive(Debug, Clone)]
pub enum LayoutItem<'a> {
    Field(&'a FieldDescriptor),
    Oneof {
        group: &'a OneofGroup,
        members: Vec<&'a FieldDescriptor>,
    },
}

/// A validated list of message descriptors in declaration order.
#[derive(Debug, Clone)]
pub struct Schema {
    messages: Vec<MessageDescriptor>,
    index: HashMap<String, usize>,
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.messages == other.messages
    }
}

impl Eq for Schema {}

impl Schema {
    pub fn empty() -> Schema {
        Schema {
            messages: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Validates descriptors and builds a schema.
    pub fn new(messages: Vec<MessageDescriptor>) -> Result<Schema, SchemaError> {
        let mut index = HashMap::new();
        for (pos, msg) in messages.iter().enumerate() {
            validate_message(msg, &index, &messages)?;
            index.insert(msg.name.clone(), pos);
        }
        Ok(Schema { messages, index })
    }

    pub fn messages(&self) -> &[MessageDescriptor] {
        &self.messages
    }

    pub fn into_messages(self) -> Vec<MessageDescriptor> {
        self.messages
    }

    pub fn message(&self, name: &str) -> Option<&MessageDescriptor> {
        self.index.get(name).map(|&i| &self.messages[i])
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Canonical schema text. Parsing it yields an equal schema.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, msg) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("message {} {{\n", msg.name));
            for item in msg.layout() {
                match item {
                    LayoutItem::Field(f) => {
                        let line = match &f.rule {
                            FieldRule::Required => format!("required {} {};", f.ty, f.name),
                            FieldRule::Optional => format!("optional {} {};", f.ty, f.name),
                            FieldRule::Repeated { max_count } => {
                                format!("repeated {} {}[{}];", f.ty, f.name, max_count)
                            }
                            FieldRule::FixedRepeated { count } => {
                                format!("fixed_repeated {} {}[{}];", f.ty, f.name, count)
                            }
                            FieldRule::Oneof { .. } => unreachable!("oneof members are grouped"),
                        };
                        out.push_str("    ");
                        out.push_str(&line);
                        out.push('\n');
                    }
                    LayoutItem::Oneof { group, members } => {
                        let prefix = if group.optional { "optional " } else { "" };
                        out.push_str(&format!("    {}oneof {} {{\n", prefix, group.name));
                        for m in members {
                            out.push_str(&format!("        {} {};\n", m.ty, m.name));
                        }
                        out.push_str("    }\n");
                    }
                }
            }
            out.push_str("}\n");
        }
        out
    }
}

fn validate_message(
    msg: &MessageDescriptor,
    earlier: &HashMap<String, usize>,
    all: &[MessageDescriptor],
) -> Result<(), SchemaError> {
    if !is_identifier(&msg.name) || ScalarType::from_keyword(&msg.name).is_some() {
        return Err(SchemaError::InvalidName(msg.name.clone()));
    }
    if earlier.contains_key(&msg.name) {
        return Err(SchemaError::DuplicateMessage(msg.name.clone()));
    }
    let mut names = HashSet::new();
    for field in &msg.fields {
        if !is_identifier(&field.name) {
            return Err(SchemaError::InvalidName(field.name.clone()));
        }
        if !names.insert(field.name.as_str()) {
            return Err(SchemaError::DuplicateField {
                message: msg.name.clone(),
                field: field.name.clone(),
            });
        }
        if let FieldType::Message(target) = &field.ty {
            if target == &msg.name {
                return Err(SchemaError::RecursiveReference {
                    message: msg.name.clone(),
                    field: field.name.clone(),
                });
            }
            if !earlier.contains_key(target) {
                let declared_later = all.iter().any(|m| &m.name == target);
                return Err(if declared_later {
                    SchemaError::ForwardReference {
                        message: msg.name.clone(),
                        target: target.clone(),
                    }
                } else {
                    SchemaError::UnknownType {
                        message: msg.name.clone(),
                        name: target.clone(),
                    }
                });
            }
        }
        match &field.rule {
            FieldRule::Repeated { max_count: 0 } | FieldRule::FixedRepeated { count: 0 } => {
                return Err(SchemaError::InvalidCount {
                    message: msg.name.clone(),
                    field: field.name.clone(),
                });
            }
            FieldRule::Oneof { group } if msg.oneof(group).is_none() => {
                return Err(SchemaError::UndeclaredOneof {
                    message: msg.name.clone(),
                    group: group.clone(),
                });
            }
            _ => {}
        }
    }

    let mut group_names = HashSet::new();
    for group in &msg.oneofs {
        if !is_identifier(&group.name) || names.contains(group.name.as_str()) {
            return Err(SchemaError::InvalidName(group.name.clone()));
        }
        if !group_names.insert(group.name.as_str()) {
            return Err(SchemaError::DuplicateField {
                message: msg.name.clone(),
                field: group.name.clone(),
            });
        }
        // members must be contiguous so the group has a single wire position
        let positions: Vec<usize> = msg
            .fields
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(&f.rule, FieldRule::Oneof { group: g } if g == &group.name))
            .map(|(i, _)| i)
            .collect();
        if positions.is_empty() {
            return Err(SchemaError::EmptyOneof {
                message: msg.name.clone(),
                group: group.name.clone(),
            });
        }
        if positions.len() > u8::MAX as usize {
            return Err(SchemaError::TooManyOneofMembers {
                message: msg.name.clone(),
                group: group.name.clone(),
            });
        }
        if positions.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(SchemaError::NonContiguousOneof {
                message: msg.name.clone(),
                group: group.name.clone(),
            });
        }
    }
    Ok(())
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
