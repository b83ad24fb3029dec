"""Independent reference for the pinned vectors in this directory.

Regenerate with `python3 oracle.py`. Uses only the Python standard library.
"""
import hashlib
import json
import pathlib

HERE = pathlib.Path(__file__).parent


def canonical(value):
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


CANONICAL_INPUTS = [
    {"b": 1, "a": 2},
    {},
    [],
    {"z": [1, 2], "a": {"y": True}},
    {"nested": {"k2": [{"b": False, "a": -7}], "k1": "x"}, "0": 0},
    "q\"b\\s\n\r\t\u0008\u000c\u0001\u001f\u007f é 𝄞",
    {"é": 1, "e": 2, "z": 3, "Z": 4, "𝄞": 5, "ä": 6},
    [9223372036854775807, -9223372036854775808, 0],
    {"data_id": "dip-1", "digest": "00" * 32, "status": "ACTIVE", "version": 1},
    {"list": [[], {}, [[]], "", " "]},
]


def salted(salt: bytes, payload: bytes) -> str:
    return hashlib.sha256(salt + b"\x00" + payload).hexdigest()


SALTED_INPUTS = [
    (bytes(32), b""),
    (bytes(32), b'{"a":2,"b":1}'),
    (bytes([1]) * 32, b'{"a":2,"b":1}'),
    (bytes(range(32)), b'{"degree":"BSc","full_name":"Ana"}'),
    (bytes([0xFF]) * 32, b"\x00"),
]

CERTIFICATE = {
    "student_id": "ES-2019-0042",
    "full_name": "Lucía Fernández Ortega",
    "degree": "Grado en Matemáticas",
    "institution": "Universidad de Ejemplo",
    "issue_date": "2023-07-14",
    "grade_records": [
        {"course": "Álgebra Lineal", "grade": "9.5", "date": "2020-01-30"},
        {"course": "Análisis Real", "grade": "8.0", "date": "2021-06-18"},
        {"course": "Trabajo Fin de Grado", "grade": "10", "date": "2023-06-30"},
    ],
    "extensions": {"honours": "Matrícula de Honor"},
}


def main():
    with open(HERE / "canonical.txt", "w", encoding="utf-8") as f:
        for v in CANONICAL_INPUTS:
            # Input is written with whitespace and original key order.
            f.write(json.dumps(v, ensure_ascii=True) + "\t" + canonical(v) + "\n")
    with open(HERE / "salted_hash.txt", "w") as f:
        for salt, payload in SALTED_INPUTS:
            f.write(f"{salt.hex()} {payload.hex()} {salted(salt, payload)}\n")
    (HERE / "certificate.json").write_text(json.dumps(CERTIFICATE, indent=2, ensure_ascii=False) + "\n")
    (HERE / "certificate.cert").write_bytes(canonical(CERTIFICATE).encode())


if __name__ == "__main__":
    main()
