"""Framed tensor protocol, server side.

Each frame is a little-endian u32 header length, a UTF-8 JSON header,
then the payload as packed little-endian float32. The header's "shape"
field implies the payload length; "dtype" is always "f32" on the wire.
Request headers carry op, t, s, prompt, cfg, shape, dtype. Error
responses use op "error" with code and message and an empty payload.
"""

import json
import struct

import numpy as np

MAX_HEADER_BYTES = 1 << 20
MAX_PAYLOAD_BYTES = 1 << 28


class FrameError(Exception):
    """A frame this server cannot answer in place.

    After one of these the byte stream may be desynchronized, so the
    handler sends a final error frame and drops the connection.
    """

    def __init__(self, message: str, code: str = "protocol"):
        super().__init__(message)
        self.code = code


class RequestError(Exception):
    """A well-framed request with bad contents; the connection survives."""

    def __init__(self, message: str, code: str = "bad-request"):
        super().__init__(message)
        self.code = code


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def payload_bytes(header: dict) -> int:
    shape = header.get("shape")
    if shape in (None, []):
        return 0
    if not isinstance(shape, list):
        raise FrameError(f"shape must be a list, got {type(shape).__name__}")
    n = 1
    for d in shape:
        if not isinstance(d, int) or d <= 0:
            raise FrameError(f"bad shape entry {d!r}")
        n *= d
    if header.get("dtype", "f32") != "f32":
        raise FrameError(f"unsupported dtype {header.get('dtype')!r}")
    return n * 4


def read_request(sock):
    """One frame off the socket. Returns (header, payload bytes)."""
    (hlen,) = struct.unpack("<I", _recv_exact(sock, 4))
    if hlen > MAX_HEADER_BYTES:
        raise FrameError(f"header length {hlen} exceeds limit")
    try:
        header = json.loads(_recv_exact(sock, hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"malformed header: {exc}") from exc
    if not isinstance(header, dict):
        raise FrameError("header is not a JSON object")
    plen = payload_bytes(header)
    if plen > MAX_PAYLOAD_BYTES:
        raise FrameError(f"payload length {plen} exceeds limit")
    return header, _recv_exact(sock, plen) if plen else b""


def write_response(sock, header: dict, payload: bytes = b"") -> None:
    raw = json.dumps(header).encode("utf-8")
    sock.sendall(struct.pack("<I", len(raw)) + raw + payload)


def write_error(sock, code: str, message: str) -> None:
    write_response(sock, {"op": "error", "code": code, "message": message,
                          "shape": [], "dtype": "f32"})


def to_array(header: dict, payload: bytes) -> np.ndarray:
    # read_request already sized the payload from the header, so the
    # reshape cannot fail; callers reject empty shapes before this
    shape = tuple(header["shape"])
    return np.frombuffer(payload, dtype="<f4").reshape(shape)


def to_payload(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()
