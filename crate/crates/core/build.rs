use std::{env, fs, path::PathBuf};

fn main() {
    println!("cargo:rerun-if-changed=protocol.tb");
    let text = fs::read_to_string("protocol.tb").expect("read protocol.tb");
    let schema = tinybuf::parse_schema(&text).unwrap_or_else(|e| panic!("protocol.tb:{e}"));
    let code = tinybuf::emit_bindings(&schema, "rust").expect("emit rust bindings");
    // Inner attributes are not allowed in an `include!`d file; the including
    // module carries them instead.
    let code: String = code.lines().filter(|l| !l.starts_with("#![")).map(|l| format!("{l}\n")).collect();
    let out = PathBuf::from(env::var("OUT_DIR").unwrap()).join("protocol_bindings.rs");
    fs::write(out, code).expect("write bindings");
}
