"""Checks the generated Python bindings against the golden fixtures.

Usage: python3 check_golden.py [FIXTURE_DIR]
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import protocol  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[2]


def main() -> int:
    fixture_dir = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "fixtures" / "golden"
    index = json.loads((fixture_dir / "index.json").read_text())
    namespace = vars(protocol)
    failures = 0
    for i, fx in enumerate(index["fixtures"]):
        expected = bytes.fromhex(fx["bytes"])
        on_disk = (fixture_dir / f"{i:02d}_{fx['name']}.bin").read_bytes()
        cls = namespace[fx["message"]]
        built = eval(fx["python"], namespace)
        problems = []
        if on_disk != expected:
            problems.append("bin file differs from index")
        if built.encode() != expected:
            problems.append(f"encode gave {built.encode().hex()}")
        decoded = cls.decode(expected)
        if decoded != built:
            problems.append(f"decode gave {decoded!r}")
        if decoded.encode() != expected:
            problems.append("re-encode differs")
        if problems:
            failures += 1
            print(f"FAIL {fx['name']}: {'; '.join(problems)}")
    print(f"{len(index['fixtures']) - failures}/{len(index['fixtures'])} fixtures ok")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
