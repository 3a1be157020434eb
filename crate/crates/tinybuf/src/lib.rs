//! Tinybuf: a schema language and fixed-width binary codec for small
//! embedded messages.
//!
//! A schema is parsed once into a [`Schema`]; every encode and decode is
//! then driven by the message descriptors, without field identifiers on the
//! wire. Encoded size depends only on which optional fields are present and
//! on repeated-field lengths, never on the scalar values themselves.
//!
//! ```
//! use tinybuf::{parse_schema, Message};
//!
//! let schema = parse_schema("message Timestamp { required uint32 seconds; required uint16 ms; }").unwrap();
//! let ts = Message::new().with("seconds", 7u32).with("ms", 250u16);
//! let bytes = schema.encode("Timestamp", &ts).unwrap();
//! assert_eq!(bytes, [7, 0, 0, 0, 250, 0]);
//! assert_eq!(schema.decode("Timestamp", &bytes).unwrap(), ts);
//! ```

mod codec;
pub mod emit;
mod error;
mod parser;
#[cfg(feature = "random")]
pub mod random;
mod schema;
mod value;

pub use emit::{emit_bindings, emit_descriptor, parse_descriptor, DescriptorError, EmitError};
pub use error::{DecodeError, EncodeError, ParseError, ParseErrorKind, SchemaError};
pub use parser::parse_schema;
pub use schema::{
    count_prefix_width, FieldDescriptor, FieldRule, FieldType, LayoutItem, MessageDescriptor, OneofGroup,
    ScalarType, Schema,
};
pub use value::{Message, Scalar, Value};
