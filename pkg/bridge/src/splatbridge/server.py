"""The bridge server: one thread per connection, strict request/response.

Model work from all connections funnels through a semaphore sized by
--concurrency, so a burst of clients cannot stack more than that many
model calls. Frame-level garbage gets one error frame and the
connection is dropped (the stream may be desynchronized); bad requests
inside a good frame get an error frame and the session keeps going,
model failures included.
"""

import argparse
import logging
import socketserver
import threading

from . import protocol
from .mock import MockModel
from .schedule import table

logger = logging.getLogger("splatbridge")

IMAGE_OPS = ("predict_noise", "encode", "decode")


class BridgeSession:
    """Shared server state: the model, its schedule, the call gate."""

    def __init__(self, model, concurrency: int = 4):
        self.model = model
        self.concurrency = concurrency
        self._gate = threading.BoundedSemaphore(concurrency)
        self.schedule_table = table(model.alpha_bar)

    def run(self, op: str, arr, header):
        t = header.get("t")
        if op == "predict_noise":
            if t is None:
                raise protocol.RequestError("predict_noise needs t")
            t = int(t)
            if not 0 <= t < self.model.total_steps:
                raise protocol.RequestError(
                    f"t = {t} outside [0, {self.model.total_steps})")
        with self._gate:
            if op == "predict_noise":
                return self.model.predict_noise(
                    arr, t, prompt=str(header.get("prompt") or ""),
                    cfg=float(header.get("cfg", 1.0)))
            if op == "encode":
                return self.model.encode(arr)
            return self.model.decode(arr)


class Handler(socketserver.BaseRequestHandler):
    def handle(self):
        session = self.server.session
        sock = self.request
        while True:
            try:
                header, payload = protocol.read_request(sock)
            except (ConnectionError, OSError):
                return
            except protocol.FrameError as exc:
                # stream position is unknown now, answer and hang up
                try:
                    protocol.write_error(sock, exc.code, str(exc))
                except OSError:
                    pass
                return
            try:
                self._answer(session, sock, header, payload)
            except OSError:
                return

    def _answer(self, session, sock, header, payload):
        op = header.get("op")
        if op == "ping":
            protocol.write_response(
                sock, {"op": "ping", "shape": [], "dtype": "f32",
                       "model": session.model.name,
                       "schedule": session.schedule_table})
            return
        if op not in IMAGE_OPS:
            protocol.write_error(sock, "bad-op", f"unknown op {op!r}")
            return
        if not header.get("shape"):
            protocol.write_error(sock, "bad-request",
                                 f"{op} needs a non-empty shape")
            return
        arr = protocol.to_array(header, payload)
        try:
            out = session.run(op, arr, header)
        except protocol.RequestError as exc:
            protocol.write_error(sock, exc.code, str(exc))
            return
        except MemoryError as exc:
            logger.warning("out of memory on %s: %s", op, exc)
            protocol.write_error(sock, "oom", f"{op}: out of memory")
            return
        except Exception as exc:  # noqa: BLE001 - session must survive
            if type(exc).__name__ == "OutOfMemoryError":
                logger.warning("out of memory on %s: %s", op, exc)
                protocol.write_error(sock, "oom", f"{op}: out of memory")
            else:
                logger.warning("%s failed: %s", op, exc)
                protocol.write_error(sock, "model", f"{op}: {exc}")
            return
        if op == "predict_noise" and tuple(out.shape) != tuple(header["shape"]):
            protocol.write_error(
                sock, "model",
                f"prediction shape {list(out.shape)} does not match "
                f"request shape {header['shape']}")
            return
        protocol.write_response(sock, {"op": op, "shape": list(out.shape),
                                       "dtype": "f32"},
                                protocol.to_payload(out))


class BridgeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, session: BridgeSession, host="127.0.0.1", port=0):
        self.session = session
        super().__init__((host, port), Handler)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="score prediction server for splatbind")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--mock", action="store_true",
                        help="deterministic weightless model")
    parser.add_argument("--model", default=None,
                        help="checkpoint id for the real model")
    parser.add_argument("--device", default=None)
    parser.add_argument("--concurrency", type=int, default=4,
                        help="max model calls in flight")
    parser.add_argument("--steps", type=int, default=1000,
                        help="mock schedule length")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.mock:
        model = MockModel(total_steps=args.steps)
    else:
        from .model import DEFAULT_MODEL, DiffusionModel

        model = DiffusionModel(args.model or DEFAULT_MODEL,
                               device=args.device)
    server = BridgeServer(BridgeSession(model, args.concurrency),
                          args.host, args.port)
    host, port = server.server_address
    logger.info("serving %s on %s:%d", model.name, host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
