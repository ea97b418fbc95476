"""Array persistence: JSON header + adjacent raw little-endian payload.

The header file (``<name>.json``) declares shape, dtype code, element order,
endianness, and the payload's relative filename; the payload is the raw
C-order bytes (interleaved real/imag for complex dtypes). Round trips are
bit-exact and the format is writable from any language.
"""

import json
import os

import numpy as np

from .errors import FormatError

DTYPE_CODES = {
    "c64": np.dtype("<c8"),
    "c128": np.dtype("<c16"),
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
}
_CODES_BY_KIND = {np.dtype(k): v for v, k in
                  (("c64", "<c8"), ("c128", "<c16"), ("f32", "<f4"), ("f64", "<f8"))}


def dtype_code(dtype) -> str:
    dtype = np.dtype(dtype).newbyteorder("<")
    if dtype not in _CODES_BY_KIND:
        raise FormatError(f"dtype: unsupported array dtype {dtype}")
    return _CODES_BY_KIND[dtype]


def save_array(header_path: str, array: np.ndarray) -> None:
    """Write array as header JSON plus adjacent raw payload."""
    array = np.asarray(array)
    code = dtype_code(array.dtype)
    payload_name = os.path.splitext(os.path.basename(header_path))[0] + ".bin"
    header = {
        "shape": list(array.shape),
        "dtype": code,
        "order": "row-major",
        "endian": "little",
        "payload": payload_name,
    }
    payload_path = os.path.join(os.path.dirname(header_path), payload_name)
    with open(payload_path, "wb") as f:
        f.write(np.ascontiguousarray(array.astype(DTYPE_CODES[code])).tobytes())
    with open(header_path, "w") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")


def load_array(header_path: str) -> np.ndarray:
    """Read an array back; validates every header field against the payload."""
    try:
        with open(header_path) as f:
            header = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"header: cannot read {header_path}: {exc}") from exc
    for key in ("shape", "dtype", "order", "endian", "payload"):
        if key not in header:
            raise FormatError(f"{key}: missing from header {header_path}")
    if header["order"] != "row-major":
        raise FormatError(f"order: unsupported element order {header['order']!r}")
    if header["endian"] != "little":
        raise FormatError(f"endian: unsupported endianness {header['endian']!r}")
    if header["dtype"] not in DTYPE_CODES:
        raise FormatError(f"dtype: unknown dtype code {header['dtype']!r}")
    dtype = DTYPE_CODES[header["dtype"]]
    shape = tuple(int(n) for n in header["shape"])
    payload_path = os.path.join(os.path.dirname(header_path), header["payload"])
    try:
        with open(payload_path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise FormatError(f"payload: cannot read {payload_path}: {exc}") from exc
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"payload: length mismatch, expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
