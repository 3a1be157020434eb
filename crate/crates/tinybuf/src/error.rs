use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("invalid identifier `{0}`")]
    InvalidName(String),
    #[error("duplicate message `{0}`")]
    DuplicateMessage(String),
    #[error("duplicate field `{field}` in message `{message}`")]
    DuplicateField { message: String, field: String },
    #[error("unknown type `{name}` in message `{message}`")]
    UnknownType { message: String, name: String },
    #[error("message `{message}` references `{target}` before its declaration")]
    ForwardReference { message: String, target: String },
    #[error("field `{field}` of message `{message}` references its own message")]
    RecursiveReference { message: String, field: String },
    #[error("field `{field}` of message `{message}` needs a positive element count")]
    InvalidCount { message: String, field: String },
    #[error("oneof group `{group}` used in `{message}` but never declared")]
    UndeclaredOneof { message: String, group: String },
    #[error("oneof group `{group}` in `{message}` has no members")]
    EmptyOneof { message: String, group: String },
    #[error("oneof group `{group}` in `{message}` has more than 255 members")]
    TooManyOneofMembers { message: String, group: String },
    #[error("members of oneof group `{group}` in `{message}` are not contiguous")]
    NonContiguousOneof { message: String, group: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    UnexpectedToken { expected: String, found: String },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEof(String),
    #[error("`{0}` needs an element count `[N]`")]
    MissingCount(String),
    #[error("`{0}` does not take an element count")]
    UnexpectedCount(String),
    #[error("element count must be a positive integer, found `{0}`")]
    InvalidCount(String),
    #[error("{0}")]
    Schema(SchemaError),
}

/// Schema syntax or semantic error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

/// The value does not satisfy its descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("unknown message `{0}`")]
    UnknownMessage(String),
    #[error("required field `{message}.{field}` is missing")]
    MissingField { message: String, field: String },
    #[error("`{message}` has no field `{field}`")]
    UnknownField { message: String, field: String },
    #[error("field `{message}.{field}` expects {expected}")]
    TypeMismatch {
        message: String,
        field: String,
        expected: String,
    },
    #[error("field `{message}.{field}` holds {actual} elements, limit {limit}")]
    TooManyElements {
        message: String,
        field: String,
        limit: u32,
        actual: usize,
    },
    #[error("fixed field `{message}.{field}` needs exactly {count} elements, got {actual}")]
    WrongElementCount {
        message: String,
        field: String,
        count: u32,
        actual: usize,
    },
    #[error("oneof group `{message}.{group}` has more than one member set")]
    MultipleOneofMembers { message: String, group: String },
    #[error("oneof group `{message}.{group}` has no member set")]
    NoOneofMember { message: String, group: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unknown message `{0}`")]
    UnknownMessage(String),
    #[error("input truncated at offset {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("field `{field}` announces {count} elements, limit {limit}")]
    CountExceedsLimit { field: String, count: u32, limit: u32 },
    #[error("invalid tag {tag} for oneof group `{group}`")]
    InvalidOneofTag { group: String, tag: u8 },
    #[error("invalid presence byte {byte:#04x} for optional field `{field}`")]
    InvalidPresence { field: String, byte: u8 },
    #[error("{count} trailing bytes after message")]
    TrailingBytes { count: usize },
}
