"""Socket client for an out-of-process noise predictor.

Wire format, both directions: a little-endian u32 header length, a UTF-8
JSON header, then the raw payload as little-endian float32, row major.
The header carries op, t, s, prompt, cfg, shape and dtype; the payload
length is implied by shape. Ops: predict_noise, encode, decode, ping.
An op of "error" in a response carries code and message instead of data.

One request-response exchange holds the connection lock, so a provider
shared across threads serializes its traffic and stays frame-aligned.
"""

import json
import socket
import struct
import threading

import numpy as np

from .schedule import NoiseSchedule

MAX_HEADER_BYTES = 1 << 20
MAX_PAYLOAD_BYTES = 1 << 28


class RemoteProviderError(RuntimeError):
    def __init__(self, message: str, code: str = "client"):
        super().__init__(f"[{code}] {message}")
        self.code = code


def payload_length(header: dict) -> int:
    shape = header.get("shape") or []
    if not shape:
        return 0
    n = 1
    for d in shape:
        n *= int(d)
    if header.get("dtype", "f32") != "f32":
        raise RemoteProviderError(
            f"unsupported dtype {header.get('dtype')!r}", code="protocol")
    return n * 4


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise RemoteProviderError("connection closed mid-frame",
                                      code="connection")
        buf.extend(chunk)
    return bytes(buf)


def write_frame(sock, header: dict, payload: bytes = b"") -> None:
    raw = json.dumps(header).encode("utf-8")
    sock.sendall(struct.pack("<I", len(raw)) + raw + payload)


def read_frame(sock):
    (hlen,) = struct.unpack("<I", _recv_exact(sock, 4))
    if hlen > MAX_HEADER_BYTES:
        raise RemoteProviderError(f"header length {hlen} exceeds limit",
                                  code="protocol")
    try:
        header = json.loads(_recv_exact(sock, hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RemoteProviderError(f"malformed header: {exc}",
                                  code="protocol") from exc
    if not isinstance(header, dict):
        raise RemoteProviderError("header is not a JSON object",
                                  code="protocol")
    plen = payload_length(header)
    if plen > MAX_PAYLOAD_BYTES:
        raise RemoteProviderError(f"payload length {plen} exceeds limit",
                                  code="protocol")
    payload = _recv_exact(sock, plen) if plen else b""
    return header, payload


def image_to_payload(image: np.ndarray) -> bytes:
    return np.ascontiguousarray(image, dtype="<f4").tobytes()


def payload_to_image(header: dict, payload: bytes) -> np.ndarray:
    shape = tuple(int(d) for d in header.get("shape") or [])
    arr = np.frombuffer(payload, dtype="<f4")
    expected = int(np.prod(shape)) if shape else 0
    if arr.size != expected:
        raise RemoteProviderError("payload size disagrees with shape",
                                  code="protocol")
    return arr.reshape(shape).astype(np.float64)


class RemoteScoreProvider:
    """predict_noise over a socket, schedule-checked at connect time."""

    def __init__(self, host: str, port: int,
                 schedule: NoiseSchedule | None = None,
                 timeout: float = 60.0):
        self.host = host
        self.port = port
        self.schedule = schedule
        self.timeout = timeout
        self._lock = threading.Lock()
        self._sock = None
        self.remote_schedule = None

    def connect(self) -> "RemoteScoreProvider":
        if self._sock is not None:
            return self
        try:
            self._sock = socket.create_connection((self.host, self.port),
                                                  timeout=self.timeout)
        except OSError as exc:
            raise RemoteProviderError(
                f"cannot reach provider at {self.host}:{self.port}: {exc}",
                code="connection") from exc
        header = self.ping()
        table = header.get("schedule")
        if table is None:
            raise RemoteProviderError("handshake response lacks a schedule",
                                      code="handshake")
        self.remote_schedule = NoiseSchedule.from_table(table)
        if (self.schedule is not None
                and self.remote_schedule.checksum() != self.schedule.checksum()):
            raise RemoteProviderError(
                "remote noise schedule disagrees with the local one",
                code="handshake")
        return self

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def __enter__(self):
        return self.connect()

    def __exit__(self, *exc):
        self.close()

    def _roundtrip(self, header: dict, payload: bytes = b""):
        if self._sock is None:
            self.connect()
        with self._lock:
            try:
                write_frame(self._sock, header, payload)
                resp, body = read_frame(self._sock)
            except (OSError, struct.error) as exc:
                self.close()
                raise RemoteProviderError(
                    f"{header.get('op')} failed: {exc}",
                    code="connection") from exc
        if resp.get("op") == "error":
            raise RemoteProviderError(resp.get("message", "unknown error"),
                                      code=str(resp.get("code", "server")))
        return resp, body

    def ping(self) -> dict:
        header, _ = self._roundtrip({"op": "ping", "t": None, "s": None,
                                     "prompt": "", "cfg": 1.0, "shape": [],
                                     "dtype": "f32"})
        return header

    def _image_op(self, op: str, image: np.ndarray, t=None, s=None,
                  prompt: str = "", cfg_scale: float = 1.0) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        header = {"op": op, "t": None if t is None else int(t),
                  "s": None if s is None else int(s), "prompt": prompt,
                  "cfg": float(cfg_scale), "shape": list(image.shape),
                  "dtype": "f32"}
        resp, body = self._roundtrip(header, image_to_payload(image))
        return payload_to_image(resp, body)

    def predict_noise(self, image, t, prompt="", cfg_scale=1.0):
        return self._image_op("predict_noise", image, t=t, prompt=prompt,
                              cfg_scale=cfg_scale)

    def encode(self, image):
        return self._image_op("encode", image)

    def decode(self, latent):
        return self._image_op("decode", latent)
