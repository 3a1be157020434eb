//! Generated bindings compile in their target ecosystems and agree with the
//! library codec byte for byte.

use std::path::Path;
use std::process::Command;

use tinybuf::{emit_bindings, parse_schema, Message, Schema, Value};

const SCHEMA: &str = r#"
# every scalar type, every rule, nesting and two oneof groups
message Inner {
    required uint16 a;
    optional int8 b;
}

message All {
    required uint8 u8v;
    required int8 i8v;
    required uint16 u16v;
    required int16 i16v;
    required uint32 u32v;
    required int32 i32v;
    required uint64 u64v;
    required int64 i64v;
    required float32 f32v;
    required float64 f64v;
    optional Inner inner;
    repeated uint16 vals[300];
    fixed_repeated int32 fixed[2];
    oneof choice {
        uint8 small;
        Inner nested;
    }
    optional oneof maybe {
        float f;
        uint64 big;
    }
    repeated Inner items[3];
    required uint8 type;
    required uint8 class;
}
"#;

fn schema() -> Schema {
    parse_schema(SCHEMA).unwrap()
}

fn inner(a: u16, b: Option<i8>) -> Message {
    let m = Message::new().with("a", a);
    match b {
        Some(b) => m.with("b", b),
        None => m,
    }
}

fn sample() -> Message {
    Message::new()
        .with("u8v", 200u8)
        .with("i8v", -5i8)
        .with("u16v", 0xBEEFu16)
        .with("i16v", -1234i16)
        .with("u32v", 0xDEAD_BEEFu32)
        .with("i32v", -70_000i32)
        .with("u64v", u64::MAX - 1)
        .with("i64v", i64::MIN + 3)
        .with("f32v", 1.5f32)
        .with("f64v", -0.25f64)
        .with("inner", inner(2, None))
        .with("vals", vec![1u16, 2, 3])
        .with("fixed", vec![-1i32, 7])
        .with("nested", inner(9, Some(-3)))
        .with("big", 42u64)
        .with("items", Value::List(vec![inner(1, Some(1)).into(), inner(2, None).into()]))
        .with("type", 5u8)
        .with("class", 6u8)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

const RUST_MAIN: &str = r#"
mod generated;
use generated::*;

fn main() {
    let v = All {
        u8v: 200,
        i8v: -5,
        u16v: 0xBEEF,
        i16v: -1234,
        u32v: 0xDEAD_BEEF,
        i32v: -70_000,
        u64v: u64::MAX - 1,
        i64v: i64::MIN + 3,
        f32v: 1.5,
        f64v: -0.25,
        inner: Some(Inner { a: 2, b: None }),
        vals: vec![1, 2, 3],
        fixed: vec![-1, 7],
        choice: AllChoice::Nested(Inner { a: 9, b: Some(-3) }),
        maybe: Some(AllMaybe::Big(42)),
        items: vec![Inner { a: 1, b: Some(1) }, Inner { a: 2, b: None }],
        r#type: 5,
        class: 6,
    };
    let bytes = v.encode().unwrap();
    assert_eq!(All::decode(&bytes).unwrap(), v);
    assert!(matches!(All::decode(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
    let mut long = bytes.clone();
    long.push(0);
    assert_eq!(All::decode(&long), Err(Error::TrailingBytes { count: 1 }));
    let hex: String = bytes.iter().map(|b| format!("{:02x}", b)).collect();
    println!("{}", hex);
}
"#;

#[test]
fn rust_bindings_compile_and_match() {
    let code = emit_bindings(&schema(), "rust").unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("generated.rs"), code).unwrap();
    std::fs::write(dir.path().join("main.rs"), RUST_MAIN).unwrap();
    let exe = dir.path().join("bindings_check");
    let rustc = std::env::var("RUSTC").unwrap_or_else(|_| "rustc".into());
    let status = Command::new(rustc)
        .args(["--edition", "2021", "-o"])
        .arg(&exe)
        .arg(dir.path().join("main.rs"))
        .status()
        .unwrap();
    assert!(status.success(), "generated Rust failed to compile");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = hex(&schema().encode("All", &sample()).unwrap());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), expected);
}

fn python_available() -> bool {
    Command::new("python3").arg("--version").output().is_ok_and(|o| o.status.success())
}

fn run_python(dir: &Path, script: &str) -> String {
    let out = Command::new("python3")
        .arg("-c")
        .arg(script)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

#[test]
fn python_bindings_match() {
    if !python_available() {
        eprintln!("python3 not found, skipping");
        return;
    }
    let code = emit_bindings(&schema(), "python").unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("generated.py"), code).unwrap();
    let expected = hex(&schema().encode("All", &sample()).unwrap());
    let script = format!(
        r#"
from generated import *
v = All(u8v=200, i8v=-5, u16v=0xBEEF, i16v=-1234, u32v=0xDEADBEEF, i32v=-70000,
        u64v=2**64 - 2, i64v=-2**63 + 3, f32v=1.5, f64v=-0.25,
        inner=Inner(a=2), vals=[1, 2, 3], fixed=[-1, 7], nested=Inner(a=9, b=-3),
        big=42, items=[Inner(a=1, b=1), Inner(a=2)], type=5, class_=6)
data = v.encode()
assert All.decode(data) == v
assert All.decode(bytes.fromhex("{expected}")) == v
assert v.which_choice() == "nested" and v.which_maybe() == "big"
for bad in (data[:-1], data + b"\x00"):
    try:
        All.decode(bad)
        raise SystemExit("accepted malformed input")
    except DecodeError:
        pass
v.small = 1
try:
    v.encode()
    raise SystemExit("accepted two oneof members")
except EncodeError:
    pass
print(data.hex())
"#
    );
    assert_eq!(run_python(dir.path(), &script), expected);
}

#[test]
fn python_rejects_invalid_oneof_tag() {
    if !python_available() {
        return;
    }
    let schema = parse_schema("message C { oneof c { uint8 a; uint16 b; } }").unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("generated.py"), emit_bindings(&schema, "python").unwrap()).unwrap();
    let out = run_python(
        dir.path(),
        r#"
from generated import *
assert C(b=0x0102).encode() == bytes([2, 2, 1])
try:
    C.decode(bytes([7, 0]))
    print("accepted")
except DecodeError:
    print("rejected")
"#,
    );
    assert_eq!(out, "rejected");
}
