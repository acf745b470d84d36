"""Wire encoding and the two-process transport.

Framing: 4-byte big-endian length prefix followed by a UTF-8 JSON body.
Bit vectors travel as lowercase hex strings, most significant bit first,
zero-padded to ceil(width/4) digits; the reader must know the width.

Message types exchanged during a session: KEYS, IMAGES, ROUND_TYPE,
PREIMAGES, EQUATIONS, QUESTION, ANSWERS, VERDICT, FINAL.  The transport
additionally uses ACK replies to VERDICT/FINAL so that every message on
the socket has exactly one response; ACKs never appear in transcripts.
"""

from __future__ import annotations

import json
import socket
import struct
from typing import Sequence


def int_to_hex(value: int, width: int) -> str:
    """Hex string for a `width`-bit value (msb first, zero padded)."""
    if not 0 <= value < (1 << width):
        raise ValueError(f"value {value} does not fit in {width} bits")
    digits = (width + 3) // 4
    return format(value, f"0{digits}x")


def hex_to_int(text: str, width: int) -> int:
    if not isinstance(text, str):
        raise ValueError(f"expected hex string, got {type(text).__name__}")
    value = int(text, 16)
    if not 0 <= value < (1 << width):
        raise ValueError(f"hex value {text!r} out of range for {width} bits")
    return value


def bits_to_hex(bits: Sequence[int]) -> str:
    bits = tuple(bits)
    if not bits:
        raise ValueError("cannot encode an empty bit vector")
    value = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError("bit vectors contain only 0 and 1")
        value = (value << 1) | b
    return int_to_hex(value, len(bits))


def hex_to_bits(text: str, width: int) -> tuple[int, ...]:
    value = hex_to_int(text, width)
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def encode_message(msg: dict) -> bytes:
    body = json.dumps(msg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("!I", len(body)) + body


def send_message(conn: socket.socket, msg: dict) -> None:
    conn.sendall(encode_message(msg))


def _recv_exact(conn: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed mid-message")
        buf += chunk
    return buf


def recv_message(conn: socket.socket) -> dict:
    (length,) = struct.unpack("!I", _recv_exact(conn, 4))
    body = _recv_exact(conn, length)
    return json.loads(body.decode("utf-8"))


class SocketProverClient:
    """Verifier-side endpoint that forwards messages to a remote prover."""

    def __init__(self, conn: socket.socket):
        self.conn = conn

    def handle(self, msg: dict) -> dict | None:
        send_message(self.conn, msg)
        reply = recv_message(self.conn)
        if msg["type"] in ("VERDICT", "FINAL"):
            if reply.get("type") != "ACK":
                raise ConnectionError(f"expected ACK, got {reply!r}")
            return None
        return reply

    def final_states(self):
        return None  # remote prover state is not observable

    def close(self) -> None:
        self.conn.close()

    @classmethod
    def connect(cls, host: str, port: int) -> "SocketProverClient":
        conn = socket.create_connection((host, port))
        return cls(conn)


def serve_prover_connection(conn: socket.socket, prover) -> None:
    """Answer one verifier session on an open connection, then return."""
    while True:
        try:
            msg = recv_message(conn)
        except ConnectionError:
            return
        reply = prover.handle(msg)
        if msg["type"] in ("VERDICT", "FINAL"):
            send_message(conn, {"type": "ACK"})
            if msg["type"] == "FINAL":
                return
        else:
            send_message(conn, reply)


def serve_prover(host: str, port: int, prover_factory, sessions: int = 1, ready_event=None) -> None:
    """Listen and serve `sessions` verifier sessions, one prover each."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        if ready_event is not None:
            ready_event.set()
        for _ in range(sessions):
            conn, _ = server.accept()
            with conn:
                serve_prover_connection(conn, prover_factory())
