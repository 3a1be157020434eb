//! Schema text parser.
//!
//! ```text
//! # comment to end of line
//! message Name {
//!     required|optional <type> <field>;
//!     repeated|fixed_repeated <type> <field>[<count>];
//!     [optional] oneof <group> {
//!         <type> <member>;
//!     }
//! }
//! ```
//!
//! `<type>` is a scalar keyword or the name of a message declared earlier.

use crate::error::{ParseError, ParseErrorKind, SchemaError};
use crate::schema::{FieldDescriptor, FieldRule, FieldType, MessageDescriptor, OneofGroup, Schema};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) => format!("`{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Semi => "`;`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let line = line_no + 1;
            let single = match c {
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ';' => Some(Tok::Semi),
                _ => None,
            };
            if let Some(tok) = single {
                out.push(Spanned { tok, line, col });
                i += 1;
            } else if c == '#' {
                break;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line,
                    col,
                });
            } else if c.is_ascii_digit() || c == '-' {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Int(chars[start..i].iter().collect()),
                    line,
                    col,
                });
            } else {
                return Err(ParseError {
                    line,
                    col,
                    kind: ParseErrorKind::UnexpectedChar(c),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end_line: usize,
    end_col: usize,
}

/// Where each type reference appeared, for positioned semantic errors.
struct TypeRef {
    message: usize,
    name: String,
    line: usize,
    col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self, expected: &str) -> Result<Spanned, ParseError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(ParseError {
                line: self.end_line,
                col: self.end_col,
                kind: ParseErrorKind::UnexpectedEof(expected.into()),
            }),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Spanned, ParseError> {
        let expected = tok.describe();
        let t = self.next(&expected)?;
        if t.tok != tok {
            return Err(unexpected(&t, &expected));
        }
        Ok(t)
    }

    fn ident(&mut self, what: &str) -> Result<(String, Spanned), ParseError> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            _ => Err(unexpected(&t, what)),
        }
    }

    fn count(&mut self, field: &str) -> Result<u32, ParseError> {
        let open = self.next("`[`")?;
        if open.tok != Tok::LBracket {
            return Err(ParseError {
                line: open.line,
                col: open.col,
                kind: ParseErrorKind::MissingCount(field.into()),
            });
        }
        let t = self.next("element count")?;
        let n = match &t.tok {
            Tok::Int(s) => match s.parse::<u32>() {
                Ok(n) if n > 0 => n,
                _ => {
                    return Err(ParseError {
                        line: t.line,
                        col: t.col,
                        kind: ParseErrorKind::InvalidCount(s.clone()),
                    })
                }
            },
            _ => return Err(unexpected(&t, "element count")),
        };
        self.expect(Tok::RBracket)?;
        Ok(n)
    }
}

fn unexpected(t: &Spanned, expected: &str) -> ParseError {
    ParseError {
        line: t.line,
        col: t.col,
        kind: ParseErrorKind::UnexpectedToken {
            expected: expected.into(),
            found: t.tok.describe(),
        },
    }
}

fn schema_error(line: usize, col: usize, err: SchemaError) -> ParseError {
    ParseError {
        line,
        col,
        kind: ParseErrorKind::Schema(err),
    }
}

const RESERVED: [&str; 6] = ["message", "required", "optional", "repeated", "fixed_repeated", "oneof"];

/// Parses schema text into a validated [`Schema`].
pub fn parse_schema(text: &str) -> Result<Schema, ParseError> {
    let toks = lex(text)?;
    let end_line = text.lines().count().max(1);
    let end_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end_line,
        end_col,
    };

    let mut messages: Vec<MessageDescriptor> = Vec::new();
    let mut message_pos: Vec<(usize, usize)> = Vec::new();
    let mut refs: Vec<TypeRef> = Vec::new();

    while p.peek().is_some() {
        let kw = p.next("`message`")?;
        if kw.tok != Tok::Ident("message".into()) {
            return Err(unexpected(&kw, "`message`"));
        }
        let (name, name_tok) = p.ident("message name")?;
        check_name(&name, &name_tok)?;
        if messages.iter().any(|m| m.name == name) {
            return Err(schema_error(
                name_tok.line,
                name_tok.col,
                SchemaError::DuplicateMessage(name),
            ));
        }
        p.expect(Tok::LBrace)?;
        let msg_index = messages.len();
        let mut msg = MessageDescriptor {
            name,
            fields: Vec::new(),
            oneofs: Vec::new(),
        };

        loop {
            let t = p.next("field or `}`")?;
            let word = match &t.tok {
                Tok::RBrace => break,
                Tok::Ident(w) => w.clone(),
                _ => return Err(unexpected(&t, "field rule or `}`")),
            };
            let mut optional_oneof = false;
            let rule_word = if word == "optional" && matches!(p.peek(), Some(s) if s.tok == Tok::Ident("oneof".into())) {
                p.pos += 1;
                optional_oneof = true;
                "oneof".to_string()
            } else {
                word
            };

            if rule_word == "oneof" {
                let (group, group_tok) = p.ident("oneof group name")?;
                check_name(&group, &group_tok)?;
                if msg.fields.iter().any(|f| f.name == group) || msg.oneof(&group).is_some() {
                    return Err(schema_error(
                        group_tok.line,
                        group_tok.col,
                        SchemaError::DuplicateField {
                            message: msg.name.clone(),
                            field: group,
                        },
                    ));
                }
                p.expect(Tok::LBrace)?;
                let mut members = 0usize;
                loop {
                    let t = p.next("oneof member or `}`")?;
                    let ty_word = match &t.tok {
                        Tok::RBrace => break,
                        Tok::Ident(w) => w.clone(),
                        _ => return Err(unexpected(&t, "member type or `}`")),
                    };
                    let (fname, ftok) = p.ident("member name")?;
                    check_name(&fname, &ftok)?;
                    push_field(
                        &mut msg,
                        &mut refs,
                        msg_index,
                        &t,
                        ty_word,
                        fname,
                        &ftok,
                        FieldRule::Oneof { group: group.clone() },
                    )?;
                    p.expect(Tok::Semi)?;
                    members += 1;
                }
                if members == 0 {
                    return Err(schema_error(
                        group_tok.line,
                        group_tok.col,
                        SchemaError::EmptyOneof {
                            message: msg.name.clone(),
                            group,
                        },
                    ));
                }
                if members > u8::MAX as usize {
                    return Err(schema_error(
                        group_tok.line,
                        group_tok.col,
                        SchemaError::TooManyOneofMembers {
                            message: msg.name.clone(),
                            group,
                        },
                    ));
                }
                msg.oneofs.push(OneofGroup {
                    name: group,
                    optional: optional_oneof,
                });
                continue;
            }

            let counted = match rule_word.as_str() {
                "required" | "optional" => false,
                "repeated" | "fixed_repeated" => true,
                _ => return Err(unexpected(&t, "field rule")),
            };
            let ty_tok = p.next("field type")?;
            let ty_word = match &ty_tok.tok {
                Tok::Ident(w) => w.clone(),
                _ => return Err(unexpected(&ty_tok, "field type")),
            };
            let (fname, ftok) = p.ident("field name")?;
            check_name(&fname, &ftok)?;
            let rule = if counted {
                let n = p.count(&fname)?;
                if rule_word == "repeated" {
                    FieldRule::Repeated { max_count: n }
                } else {
                    FieldRule::FixedRepeated { count: n }
                }
            } else {
                if let Some(s) = p.peek() {
                    if s.tok == Tok::LBracket {
                        return Err(ParseError {
                            line: s.line,
                            col: s.col,
                            kind: ParseErrorKind::UnexpectedCount(fname),
                        });
                    }
                }
                if rule_word == "required" {
                    FieldRule::Required
                } else {
                    FieldRule::Optional
                }
            };
            push_field(&mut msg, &mut refs, msg_index, &ty_tok, ty_word, fname, &ftok, rule)?;
            p.expect(Tok::Semi)?;
        }
        message_pos.push((name_tok.line, name_tok.col));
        messages.push(msg);
    }

    for r in &refs {
        let target = messages.iter().position(|m| m.name == r.name);
        let owner = &messages[r.message].name;
        let err = match target {
            Some(t) if t < r.message => continue,
            Some(t) if t == r.message => SchemaError::RecursiveReference {
                message: owner.clone(),
                field: r.name.clone(),
            },
            Some(_) => SchemaError::ForwardReference {
                message: owner.clone(),
                target: r.name.clone(),
            },
            None => SchemaError::UnknownType {
                message: owner.clone(),
                name: r.name.clone(),
            },
        };
        return Err(schema_error(r.line, r.col, err));
    }

    Schema::new(messages).map_err(|e| {
        let (line, col) = message_pos.first().copied().unwrap_or((1, 1));
        schema_error(line, col, e)
    })
}

fn check_name(name: &str, tok: &Spanned) -> Result<(), ParseError> {
    if RESERVED.contains(&name) || crate::schema::ScalarType::from_keyword(name).is_some() {
        return Err(unexpected(tok, "identifier"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn push_field(
    msg: &mut MessageDescriptor,
    refs: &mut Vec<TypeRef>,
    msg_index: usize,
    ty_tok: &Spanned,
    ty_word: String,
    name: String,
    name_tok: &Spanned,
    rule: FieldRule,
) -> Result<(), ParseError> {
    if msg.fields.iter().any(|f| f.name == name) || msg.oneof(&name).is_some() {
        return Err(schema_error(
            name_tok.line,
            name_tok.col,
            SchemaError::DuplicateField {
                message: msg.name.clone(),
                field: name,
            },
        ));
    }
    let ty = FieldType::from(ty_word);
    if let FieldType::Message(target) = &ty {
        if RESERVED.contains(&target.as_str()) {
            return Err(unexpected(ty_tok, "field type"));
        }
        refs.push(TypeRef {
            message: msg_index,
            name: target.clone(),
            line: ty_tok.line,
            col: ty_tok.col,
        });
    }
    msg.fields.push(FieldDescriptor { name, ty, rule });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ScalarType;

    #[test]
    fn timestamp_message() {
        let schema =
            parse_schema("message Timestamp { required uint32 seconds; required uint16 ms; }").unwrap();
        let msg = schema.message("Timestamp").unwrap();
        assert_eq!(msg.fields.len(), 2);
        assert_eq!(msg.fields[0].ty, FieldType::Scalar(ScalarType::Uint32));
        assert_eq!(msg.fields[1].rule, FieldRule::Required);
    }

    #[test]
    fn empty_file() {
        assert!(parse_schema("").unwrap().is_empty());
        assert!(parse_schema("  # only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn repeated_count_and_canonical_round_trip() {
        let text = "message V {\n  repeated uint16 vals[100]; # values\n}\n";
        let schema = parse_schema(text).unwrap();
        assert_eq!(
            schema.message("V").unwrap().fields[0].rule,
            FieldRule::Repeated { max_count: 100 }
        );
        let canonical = schema.to_text();
        assert_eq!(parse_schema(&canonical).unwrap(), schema);
    }

    #[test]
    fn oneof_groups() {
        let schema = parse_schema(
            "message A { required uint8 x; }\n\
             message M {\n  oneof kind { uint8 a; A b; }\n  optional oneof extra { uint16 c; }\n}",
        )
        .unwrap();
        let m = schema.message("M").unwrap();
        assert_eq!(m.oneofs.len(), 2);
        assert!(!m.oneofs[0].optional);
        assert!(m.oneofs[1].optional);
        assert_eq!(m.oneof_members("kind").count(), 2);
    }

    #[test]
    fn float_aliases() {
        let schema = parse_schema("message F { required float a; required double b; }").unwrap();
        let m = schema.message("F").unwrap();
        assert_eq!(m.fields[0].ty, FieldType::Scalar(ScalarType::Float32));
        assert_eq!(m.fields[1].ty, FieldType::Scalar(ScalarType::Float64));
    }

    fn err(text: &str) -> ParseError {
        parse_schema(text).unwrap_err()
    }

    #[test]
    fn syntax_error_position() {
        let e = err("message A {\n  required uint8 x\n}");
        assert_eq!((e.line, e.col), (3, 1));
        assert!(matches!(e.kind, ParseErrorKind::UnexpectedToken { .. }));

        let e = err("message A { required uint8 x; } $");
        assert_eq!((e.line, e.col), (1, 33));
        assert_eq!(e.kind, ParseErrorKind::UnexpectedChar('$'));

        let e = err("message A { required uint8 x;");
        assert!(matches!(e.kind, ParseErrorKind::UnexpectedEof(_)));
    }

    #[test]
    fn unknown_forward_and_recursive_types() {
        let e = err("message A { required Nope x; }");
        assert_eq!((e.line, e.col), (1, 22));
        assert!(matches!(e.kind, ParseErrorKind::Schema(SchemaError::UnknownType { .. })));

        let e = err("message A { required B x; }\nmessage B { required uint8 y; }");
        assert!(matches!(e.kind, ParseErrorKind::Schema(SchemaError::ForwardReference { .. })));

        let e = err("message A { optional A next; }");
        assert!(matches!(e.kind, ParseErrorKind::Schema(SchemaError::RecursiveReference { .. })));
    }

    #[test]
    fn duplicates() {
        let e = err("message A { required uint8 x; required uint8 x; }");
        assert!(matches!(e.kind, ParseErrorKind::Schema(SchemaError::DuplicateField { .. })));
        let e = err("message A { required uint8 x; }\nmessage A { required uint8 y; }");
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, ParseErrorKind::Schema(SchemaError::DuplicateMessage(_))));
    }

    #[test]
    fn bad_counts() {
        for text in [
            "message A { repeated uint8 x[0]; }",
            "message A { fixed_repeated uint8 x[-3]; }",
            "message A { repeated uint8 x[abc]; }",
            "message A { repeated uint8 x[99999999999]; }",
        ] {
            let e = err(text);
            assert!(
                matches!(e.kind, ParseErrorKind::InvalidCount(_) | ParseErrorKind::UnexpectedToken { .. }),
                "{text}: {e}"
            );
        }
        assert!(matches!(err("message A { repeated uint8 x; }").kind, ParseErrorKind::MissingCount(_)));
        assert!(matches!(err("message A { required uint8 x[3]; }").kind, ParseErrorKind::UnexpectedCount(_)));
    }

    #[test]
    fn empty_oneof_rejected() {
        let e = err("message A { oneof g { } }");
        assert!(matches!(e.kind, ParseErrorKind::Schema(SchemaError::EmptyOneof { .. })));
    }
}
