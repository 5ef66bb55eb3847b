"""Versioned binary checkpoint container.

Layout: magic "GDCK", u32 little-endian header length, UTF-8 JSON header,
then the raw bytes of each array in header order.  The header carries a
format version, the JSON-serializable scalars, and one entry per array
(name, shape, dtype).  Arrays persist as little-endian f8 or i8 so
save -> load -> save is byte-identical and runs resume bit-exactly.
"""

import json

import numpy as np

MAGIC = b"GDCK"
VERSION = 1
_DTYPES = {"<f8", "<i8"}


def save_checkpoint(path, arrays: dict, scalars: dict) -> None:
    specs = []
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dtype = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
        arr = arr.astype(dtype, copy=False)
        specs.append({"name": name, "shape": list(arr.shape), "dtype": dtype})
        blobs.append(arr.tobytes())
    header = json.dumps(
        {"version": VERSION, "scalars": scalars, "arrays": specs},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(len(header)).tobytes())
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> tuple:
    """Returns (arrays, scalars); raises ValueError on malformed files."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"not a checkpoint file: bad magic {raw[:4]!r}")
    if len(raw) < 8:
        raise ValueError("checkpoint truncated inside the fixed header")
    hlen = int(np.frombuffer(raw[4:8], dtype="<u4")[0])
    if len(raw) < 8 + hlen:
        raise ValueError(f"checkpoint header wants {hlen} bytes, "
                         f"file has {len(raw) - 8}")
    try:
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"checkpoint header is not valid JSON: {e}") from e
    if header.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')}")
    arrays = {}
    offset = 8 + hlen
    for spec in header["arrays"]:
        if spec["dtype"] not in _DTYPES:
            raise ValueError(f"unsupported array dtype {spec['dtype']!r}")
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise ValueError(
                f"checkpoint array '{spec['name']}' wants {nbytes} bytes at "
                f"offset {offset}, file has {len(raw)}")
        arrays[spec["name"]] = np.frombuffer(
            raw[offset:offset + nbytes],
            dtype=spec["dtype"]).reshape(spec["shape"]).copy()
        offset += nbytes
    return arrays, header["scalars"]
