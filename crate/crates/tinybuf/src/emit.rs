//! Schema compiler back ends: the JSON descriptor file and source bindings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::SchemaError;
use crate::schema::{
    count_prefix_width, FieldDescriptor, FieldRule, FieldType, LayoutItem, MessageDescriptor, ScalarType,
    Schema,
};

pub const DESCRIPTOR_FORMAT: &str = "tinybuf-descriptor";
pub const DESCRIPTOR_VERSION: u32 = 1;

/// Binding targets understood by [`emit_bindings`].
pub const TARGETS: [&str; 2] = ["rust", "python"];

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("unknown bindings target `{0}` (known: rust, python)")]
    UnknownTarget(String),
}

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("malformed descriptor JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a tinybuf descriptor (format `{format}`, version {version})")]
    Format { format: String, version: u32 },
    #[error("invalid schema in descriptor: {0}")]
    Schema(#[from] SchemaError),
}

#[derive(Serialize, Deserialize)]
struct DescriptorFile {
    format: String,
    version: u32,
    messages: Vec<MessageDescriptor>,
}

/// Serializes the schema as the canonical JSON descriptor file.
pub fn emit_descriptor(schema: &Schema) -> String {
    let file = DescriptorFile {
        format: DESCRIPTOR_FORMAT.into(),
        version: DESCRIPTOR_VERSION,
        messages: schema.messages().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("descriptor serializes");
    text.push('\n');
    text
}

/// Loads and validates a descriptor file produced by [`emit_descriptor`].
pub fn parse_descriptor(text: &str) -> Result<Schema, DescriptorError> {
    let file: DescriptorFile = serde_json::from_str(text)?;
    if file.format != DESCRIPTOR_FORMAT || file.version != DESCRIPTOR_VERSION {
        return Err(DescriptorError::Format {
            format: file.format,
            version: file.version,
        });
    }
    Ok(Schema::new(file.messages)?)
}

/// Generates source bindings for `target`.
pub fn emit_bindings(schema: &Schema, target: &str) -> Result<String, EmitError> {
    match target {
        "rust" => Ok(rust::emit(schema)),
        "python" => Ok(python::emit(schema)),
        other => Err(EmitError::UnknownTarget(other.into())),
    }
}

/// Conventional file extension for a target's generated source.
pub fn target_extension(target: &str) -> Option<&'static str> {
    match target {
        "rust" => Some("rs"),
        "python" => Some("py"),
        _ => None,
    }
}

fn camel(name: &str) -> String {
    let mut out = String::new();
    let mut upper = true;
    for c in name.chars() {
        if c == '_' {
            upper = true;
        } else if upper {
            out.extend(c.to_uppercase());
            upper = false;
        } else {
            out.push(c);
        }
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, 'V');
    }
    out
}

mod rust {
    use super::*;

    const KEYWORDS: &[&str] = &[
        "as", "async", "await", "break", "const", "continue", "crate", "dyn", "else", "enum", "extern", "false",
        "fn", "for", "if", "impl", "in", "let", "loop", "match", "mod", "move", "mut", "pub", "ref", "return",
        "static", "struct", "trait", "true", "type", "unsafe", "use", "where", "while", "abstract", "become",
        "box", "do", "final", "macro", "override", "priv", "try", "typeof", "unsized", "virtual", "yield",
    ];

    fn ident(name: &str) -> String {
        match name {
            "self" | "Self" | "super" | "crate" => format!("{name}_"),
            n if KEYWORDS.contains(&n) => format!("r#{n}"),
            n => n.to_string(),
        }
    }

    fn type_name(name: &str) -> String {
        match name {
            "Self" | "Reader" | "Error" | "Vec" | "Option" | "Result" | "String" => format!("{name}_"),
            n => n.to_string(),
        }
    }

    fn scalar(ty: ScalarType) -> &'static str {
        match ty {
            ScalarType::Uint8 => "u8",
            ScalarType::Int8 => "i8",
            ScalarType::Uint16 => "u16",
            ScalarType::Int16 => "i16",
            ScalarType::Uint32 => "u32",
            ScalarType::Int32 => "i32",
            ScalarType::Uint64 => "u64",
            ScalarType::Int64 => "i64",
            ScalarType::Float32 => "f32",
            ScalarType::Float64 => "f64",
        }
    }

    fn rtype(ty: &FieldType) -> String {
        match ty {
            FieldType::Scalar(s) => scalar(*s).into(),
            FieldType::Message(m) => type_name(m),
        }
    }

    fn write_stmt(ty: &FieldType, expr: &str) -> String {
        match ty {
            FieldType::Scalar(_) => format!("out.extend_from_slice(&{expr}.to_le_bytes());"),
            FieldType::Message(_) => format!("{expr}.encode_into(out)?;"),
        }
    }

    fn read_expr(ty: &FieldType) -> String {
        match ty {
            FieldType::Scalar(s) => format!("r.read_{}()?", scalar(*s)),
            FieldType::Message(m) => format!("{}::read(r)?", type_name(m)),
        }
    }

    fn enum_name(msg: &MessageDescriptor, group: &str) -> String {
        format!("{}{}", type_name(&msg.name), camel(group))
    }

    const PRELUDE: &str = r#"// Generated by the tinybuf schema compiler. Do not edit.
#![allow(dead_code, unused_variables, clippy::all)]

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    Truncated { offset: usize },
    TrailingBytes { count: usize },
    CountExceedsLimit { field: &'static str, count: u32 },
    InvalidPresence { field: &'static str, byte: u8 },
    InvalidOneofTag { group: &'static str, tag: u8 },
    TooManyElements { field: &'static str, len: usize },
    WrongElementCount { field: &'static str, len: usize },
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl std::error::Error for Error {}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], Error> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated { offset: self.pos });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn read_count(&mut self, width: usize) -> Result<u32, Error> {
        let mut le = [0u8; 4];
        le[..width].copy_from_slice(self.take(width)?);
        Ok(u32::from_le_bytes(le))
    }
"#;

    pub fn emit(schema: &Schema) -> String {
        let mut out = String::from(PRELUDE);
        for ty in ScalarType::ALL {
            let t = scalar(ty);
            let _ = writeln!(
                out,
                "\n    fn read_{t}(&mut self) -> Result<{t}, Error> {{\n        Ok({t}::from_le_bytes(self.take({})?.try_into().unwrap()))\n    }}",
                ty.width()
            );
        }
        out.push_str("}\n\nfn finish<T>(value: T, r: &Reader<'_>) -> Result<T, Error> {\n    match r.buf.len() - r.pos {\n        0 => Ok(value),\n        count => Err(Error::TrailingBytes { count }),\n    }\n}\n");
        for msg in schema.messages() {
            emit_message(&mut out, msg);
        }
        out
    }

    fn emit_message(out: &mut String, msg: &MessageDescriptor) {
        let name = type_name(&msg.name);
        let layout = msg.layout();

        for item in &layout {
            if let LayoutItem::Oneof { group, members } = item {
                let _ = writeln!(out, "\n#[derive(Debug, Clone, PartialEq)]\npub enum {} {{", enum_name(msg, &group.name));
                for m in members {
                    let _ = writeln!(out, "    {}({}),", camel(&m.name), rtype(&m.ty));
                }
                out.push_str("}\n");
            }
        }

        let _ = writeln!(out, "\n#[derive(Debug, Clone, PartialEq)]\npub struct {name} {{");
        for item in &layout {
            match item {
                LayoutItem::Field(f) => {
                    let t = rtype(&f.ty);
                    let full = match f.rule {
                        FieldRule::Required => t,
                        FieldRule::Optional => format!("Option<{t}>"),
                        _ => format!("Vec<{t}>"),
                    };
                    let _ = writeln!(out, "    pub {}: {full},", ident(&f.name));
                }
                LayoutItem::Oneof { group, .. } => {
                    let e = enum_name(msg, &group.name);
                    let full = if group.optional { format!("Option<{e}>") } else { e };
                    let _ = writeln!(out, "    pub {}: {full},", ident(&group.name));
                }
            }
        }
        out.push_str("}\n");

        let _ = writeln!(out, "\nimpl {name} {{");
        out.push_str("    pub fn encode(&self) -> Result<Vec<u8>, Error> {\n        let mut out = Vec::new();\n        self.encode_into(&mut out)?;\n        Ok(out)\n    }\n\n");
        out.push_str("    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), Error> {\n");
        for item in &layout {
            match item {
                LayoutItem::Field(f) => emit_field_write(out, f),
                LayoutItem::Oneof { group, members } => {
                    let e = enum_name(msg, &group.name);
                    let g = ident(&group.name);
                    if group.optional {
                        let _ = writeln!(out, "        match &self.{g} {{\n            None => out.push(0),");
                    } else {
                        let _ = writeln!(out, "        match Some(&self.{g}) {{\n            None => unreachable!(),");
                    }
                    for (i, m) in members.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "            Some({e}::{}(v)) => {{\n                out.push({});\n                {}\n            }}",
                            camel(&m.name),
                            i + 1,
                            write_stmt(&m.ty, "v")
                        );
                    }
                    out.push_str("        }\n");
                }
            }
        }
        out.push_str("        Ok(())\n    }\n\n");

        out.push_str("    pub fn decode(bytes: &[u8]) -> Result<Self, Error> {\n        let mut r = Reader::new(bytes);\n        let value = Self::read(&mut r)?;\n        finish(value, &r)\n    }\n\n");
        out.push_str("    pub fn read(r: &mut Reader<'_>) -> Result<Self, Error> {\n");
        let mut names = Vec::new();
        for item in &layout {
            match item {
                LayoutItem::Field(f) => {
                    let var = ident(&f.name);
                    let expr = read_expr(&f.ty);
                    match &f.rule {
                        FieldRule::Required => {
                            let _ = writeln!(out, "        let {var} = {expr};");
                        }
                        FieldRule::Optional => {
                            let _ = writeln!(
                                out,
                                "        let {var} = match r.take(1)?[0] {{\n            0 => None,\n            1 => Some({expr}),\n            byte => return Err(Error::InvalidPresence {{ field: \"{}\", byte }}),\n        }};",
                                f.name
                            );
                        }
                        FieldRule::Repeated { max_count } => {
                            let _ = writeln!(
                                out,
                                "        let count = r.read_count({})?;\n        if count > {max_count} {{\n            return Err(Error::CountExceedsLimit {{ field: \"{}\", count }});\n        }}\n        let mut {var} = Vec::with_capacity(count as usize);\n        for _ in 0..count {{\n            {var}.push({expr});\n        }}",
                                count_prefix_width(*max_count),
                                f.name
                            );
                        }
                        FieldRule::FixedRepeated { count } => {
                            let _ = writeln!(
                                out,
                                "        let mut {var} = Vec::with_capacity({count});\n        for _ in 0..{count} {{\n            {var}.push({expr});\n        }}"
                            );
                        }
                        FieldRule::Oneof { .. } => unreachable!(),
                    }
                    names.push(var);
                }
                LayoutItem::Oneof { group, members } => {
                    let e = enum_name(msg, &group.name);
                    let var = ident(&group.name);
                    let _ = writeln!(out, "        let {var} = match r.take(1)?[0] {{");
                    if group.optional {
                        out.push_str("            0 => None,\n");
                    }
                    for (i, m) in members.iter().enumerate() {
                        let value = format!("{e}::{}({})", camel(&m.name), read_expr(&m.ty));
                        let value = if group.optional { format!("Some({value})") } else { value };
                        let _ = writeln!(out, "            {} => {value},", i + 1);
                    }
                    let _ = writeln!(
                        out,
                        "            tag => return Err(Error::InvalidOneofTag {{ group: \"{}\", tag }}),\n        }};",
                        group.name
                    );
                    names.push(var);
                }
            }
        }
        let _ = writeln!(out, "        Ok({name} {{ {} }})\n    }}\n}}", names.join(", "));
    }

    fn emit_field_write(out: &mut String, f: &FieldDescriptor) {
        let var = ident(&f.name);
        match &f.rule {
            FieldRule::Required => {
                let expr = match f.ty {
                    FieldType::Scalar(_) => format!("self.{var}"),
                    FieldType::Message(_) => format!("self.{var}"),
                };
                let _ = writeln!(out, "        {}", write_stmt(&f.ty, &expr));
            }
            FieldRule::Optional => {
                let _ = writeln!(
                    out,
                    "        match &self.{var} {{\n            None => out.push(0),\n            Some(v) => {{\n                out.push(1);\n                {}\n            }}\n        }}",
                    write_stmt(&f.ty, "v")
                );
            }
            FieldRule::Repeated { max_count } => {
                let width = count_prefix_width(*max_count);
                let _ = writeln!(
                    out,
                    "        if self.{var}.len() > {max_count} {{\n            return Err(Error::TooManyElements {{ field: \"{}\", len: self.{var}.len() }});\n        }}\n        out.extend_from_slice(&(self.{var}.len() as u32).to_le_bytes()[..{width}]);\n        for v in &self.{var} {{\n            {}\n        }}",
                    f.name,
                    write_stmt(&f.ty, "v")
                );
            }
            FieldRule::FixedRepeated { count } => {
                let _ = writeln!(
                    out,
                    "        if self.{var}.len() != {count} {{\n            return Err(Error::WrongElementCount {{ field: \"{}\", len: self.{var}.len() }});\n        }}\n        for v in &self.{var} {{\n            {}\n        }}",
                    f.name,
                    write_stmt(&f.ty, "v")
                );
            }
            FieldRule::Oneof { .. } => unreachable!(),
        }
    }
}

mod python {
    use super::*;

    const KEYWORDS: &[&str] = &[
        "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def",
        "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is",
        "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
    ];

    fn ident(name: &str) -> String {
        if KEYWORDS.contains(&name) {
            format!("{name}_")
        } else {
            name.to_string()
        }
    }

    fn fmt_char(ty: ScalarType) -> char {
        match ty {
            ScalarType::Uint8 => 'B',
            ScalarType::Int8 => 'b',
            ScalarType::Uint16 => 'H',
            ScalarType::Int16 => 'h',
            ScalarType::Uint32 => 'I',
            ScalarType::Int32 => 'i',
            ScalarType::Uint64 => 'Q',
            ScalarType::Int64 => 'q',
            ScalarType::Float32 => 'f',
            ScalarType::Float64 => 'd',
        }
    }

    fn zero(ty: &FieldType) -> String {
        match ty {
            FieldType::Scalar(ScalarType::Float32 | ScalarType::Float64) => "0.0".into(),
            FieldType::Scalar(_) => "0".into(),
            FieldType::Message(m) => format!("{m}()"),
        }
    }

    fn write_stmt(ty: &FieldType, expr: &str) -> String {
        match ty {
            FieldType::Scalar(s) => format!("out += struct.pack('<{}', {expr})", fmt_char(*s)),
            FieldType::Message(_) => format!("{expr}._write(out)"),
        }
    }

    fn read_stmt(ty: &FieldType, target: &str) -> String {
        match ty {
            FieldType::Scalar(s) => format!("{target}, off = _scalar('<{}', {}, buf, off)", fmt_char(*s), s.width()),
            FieldType::Message(m) => format!("{target}, off = {m}._read(buf, off)"),
        }
    }

    const PRELUDE: &str = r#"# Generated by the tinybuf schema compiler. Do not edit.
import struct
from dataclasses import dataclass, field
from typing import List, Optional


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    pass


def _take(buf, off, n):
    if len(buf) - off < n:
        raise DecodeError("input truncated at offset %d" % off)
    return buf[off:off + n], off + n


def _scalar(fmt, width, buf, off):
    raw, off = _take(buf, off, width)
    return struct.unpack(fmt, raw)[0], off


def _count(width, buf, off):
    raw, off = _take(buf, off, width)
    return int.from_bytes(raw, "little"), off


class _Message:
    def encode(self) -> bytes:
        out = bytearray()
        self._write(out)
        return bytes(out)

    @classmethod
    def decode(cls, data):
        data = bytes(data)
        msg, off = cls._read(data, 0)
        if off != len(data):
            raise DecodeError("%d trailing bytes after message" % (len(data) - off))
        return msg

    @classmethod
    def decode_prefix(cls, data, offset=0):
        return cls._read(bytes(data), offset)
"#;

    pub fn emit(schema: &Schema) -> String {
        let mut out = String::from(PRELUDE);
        for msg in schema.messages() {
            emit_message(&mut out, msg);
        }
        let names: Vec<String> = schema.messages().iter().map(|m| format!("\"{}\"", m.name)).collect();
        let _ = writeln!(out, "\n\nMESSAGES = [{}]", names.join(", "));
        out
    }

    fn emit_message(out: &mut String, msg: &MessageDescriptor) {
        let layout = msg.layout();
        let _ = writeln!(out, "\n\n@dataclass\nclass {}(_Message):", msg.name);
        for f in &msg.fields {
            let name = ident(&f.name);
            let decl = match &f.rule {
                FieldRule::Required => match &f.ty {
                    FieldType::Message(m) => format!("{m} = field(default_factory={m})"),
                    ty => format!("{} = {}", py_type(ty), zero(ty)),
                },
                FieldRule::Optional | FieldRule::Oneof { .. } => format!("Optional[{}] = None", py_type(&f.ty)),
                FieldRule::Repeated { .. } => format!("List[{}] = field(default_factory=list)", py_type(&f.ty)),
                FieldRule::FixedRepeated { count } => format!(
                    "List[{}] = field(default_factory=lambda: [{} for _ in range({count})])",
                    py_type(&f.ty),
                    zero(&f.ty)
                ),
            };
            let _ = writeln!(out, "    {name}: {decl}");
        }
        if msg.fields.is_empty() {
            out.push_str("    pass\n");
        }

        for item in &layout {
            if let LayoutItem::Oneof { group, members } = item {
                let _ = writeln!(out, "\n    def which_{}(self):", group.name);
                for m in members {
                    let _ = writeln!(out, "        if self.{} is not None:\n            return \"{}\"", ident(&m.name), m.name);
                }
                out.push_str("        return None\n");
            }
        }

        out.push_str("\n    def _write(self, out):\n");
        for item in &layout {
            match item {
                LayoutItem::Field(f) => {
                    let var = format!("self.{}", ident(&f.name));
                    match &f.rule {
                        FieldRule::Required => {
                            let _ = writeln!(
                                out,
                                "        if {var} is None:\n            raise EncodeError(\"required field {}.{} is missing\")\n        {}",
                                msg.name,
                                f.name,
                                write_stmt(&f.ty, &var)
                            );
                        }
                        FieldRule::Optional => {
                            let _ = writeln!(
                                out,
                                "        if {var} is None:\n            out.append(0)\n        else:\n            out.append(1)\n            {}",
                                write_stmt(&f.ty, &var)
                            );
                        }
                        FieldRule::Repeated { max_count } => {
                            let _ = writeln!(
                                out,
                                "        if len({var}) > {max_count}:\n            raise EncodeError(\"{}.{} holds more than {max_count} elements\")\n        out += len({var}).to_bytes({}, \"little\")\n        for v in {var}:\n            {}",
                                msg.name,
                                f.name,
                                count_prefix_width(*max_count),
                                write_stmt(&f.ty, "v")
                            );
                        }
                        FieldRule::FixedRepeated { count } => {
                            let _ = writeln!(
                                out,
                                "        if len({var}) != {count}:\n            raise EncodeError(\"{}.{} needs exactly {count} elements\")\n        for v in {var}:\n            {}",
                                msg.name,
                                f.name,
                                write_stmt(&f.ty, "v")
                            );
                        }
                        FieldRule::Oneof { .. } => unreachable!(),
                    }
                }
                LayoutItem::Oneof { group, members } => {
                    let set: Vec<String> = members.iter().map(|m| format!("self.{}", ident(&m.name))).collect();
                    let _ = writeln!(
                        out,
                        "        _set = [v is not None for v in ({},)]\n        if sum(_set) > 1:\n            raise EncodeError(\"oneof {}.{} has more than one member set\")",
                        set.join(", "),
                        msg.name,
                        group.name
                    );
                    if group.optional {
                        out.push_str("        if sum(_set) == 0:\n            out.append(0)\n");
                    } else {
                        let _ = writeln!(
                            out,
                            "        if sum(_set) == 0:\n            raise EncodeError(\"oneof {}.{} has no member set\")",
                            msg.name, group.name
                        );
                    }
                    for (i, m) in members.iter().enumerate() {
                        let var = format!("self.{}", ident(&m.name));
                        let _ = writeln!(
                            out,
                            "        if {var} is not None:\n            out.append({})\n            {}",
                            i + 1,
                            write_stmt(&m.ty, &var)
                        );
                    }
                }
            }
        }
        if layout.is_empty() {
            out.push_str("        pass\n");
        }

        out.push_str("\n    @classmethod\n    def _read(cls, buf, off):\n        msg = cls()\n");
        for item in &layout {
            match item {
                LayoutItem::Field(f) => {
                    let var = format!("msg.{}", ident(&f.name));
                    match &f.rule {
                        FieldRule::Required => {
                            let _ = writeln!(out, "        {}", read_stmt(&f.ty, &var));
                        }
                        FieldRule::Optional => {
                            let _ = writeln!(
                                out,
                                "        flag, off = _count(1, buf, off)\n        if flag == 1:\n            {}\n        elif flag != 0:\n            raise DecodeError(\"invalid presence byte %d for {}\" % flag)",
                                read_stmt(&f.ty, &var),
                                f.name
                            );
                        }
                        FieldRule::Repeated { max_count } => {
                            let _ = writeln!(
                                out,
                                "        n, off = _count({}, buf, off)\n        if n > {max_count}:\n            raise DecodeError(\"{} announces %d elements, limit {max_count}\" % n)\n        {var} = []\n        for _ in range(n):\n            {}\n            {var}.append(v)",
                                count_prefix_width(*max_count),
                                f.name,
                                read_stmt(&f.ty, "v")
                            );
                        }
                        FieldRule::FixedRepeated { count } => {
                            let _ = writeln!(
                                out,
                                "        {var} = []\n        for _ in range({count}):\n            {}\n            {var}.append(v)",
                                read_stmt(&f.ty, "v")
                            );
                        }
                        FieldRule::Oneof { .. } => unreachable!(),
                    }
                }
                LayoutItem::Oneof { group, members } => {
                    out.push_str("        tag, off = _count(1, buf, off)\n");
                    for (i, m) in members.iter().enumerate() {
                        let kw = if i == 0 { "if" } else { "elif" };
                        let _ = writeln!(
                            out,
                            "        {kw} tag == {}:\n            {}",
                            i + 1,
                            read_stmt(&m.ty, &format!("msg.{}", ident(&m.name)))
                        );
                    }
                    let allowed = if group.optional { "tag != 0" } else { "True" };
                    let _ = writeln!(
                        out,
                        "        elif {allowed}:\n            raise DecodeError(\"invalid tag %d for oneof {}\" % tag)",
                        group.name
                    );
                }
            }
        }
        out.push_str("        return msg, off\n");
    }

    fn py_type(ty: &FieldType) -> String {
        match ty {
            FieldType::Scalar(ScalarType::Float32 | ScalarType::Float64) => "float".into(),
            FieldType::Scalar(_) => "int".into(),
            FieldType::Message(m) => format!("\"{m}\""),
        }
    }
}
