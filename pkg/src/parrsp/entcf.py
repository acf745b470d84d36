"""Functional trapdoor claw-free function pairs (insecure by design).

This backend realizes the two key modes as thin wrappers around one fixed
keyed permutation pi on (w+1)-bit strings:

- injective mode (basis bit 0):  f(b, x) = pi(b || x), a bijection from
  (bit, w bits) onto the (w+1)-bit image space;
- claw-free mode (basis bit 1):  f(b, x) = pi(0 || (x XOR b*delta)) for a
  nonzero w-bit offset delta, so every image has exactly the claw
  (x, x XOR delta).

pi is an 8-round Feistel network over w+1 bits (odd totals use an
unbalanced split with the left half one bit larger) whose round tables are
derived from a 128-bit per-key seed with a keyed hash.  Determinism and
invertibility are the only contracts pi has to satisfy.

SECURITY WARNING: nothing here is cryptographically hard.  The public key
contains the permutation seed (and the claw offset), so anyone holding a
key can invert it.  Honest parties simply refrain from doing so; the point
of this backend is exact, reproducible protocol behavior at desk scale,
not computational security.

Supports are noiseless singletons, so honest protocol behavior is exact:
checks that hold "with overwhelming probability" for the noisy families
hold with probability 1 here.  One consequence worth knowing: the equation
decoding of an image-equation pair equals d . delta for every d, with no
dependence on the image point.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

FEISTEL_ROUNDS = 8
MIN_KEY_WIDTH = 2
MAX_KEY_WIDTH = 16

INJECTIVE = 0
CLAW_FREE = 1


class DecodeError(ValueError):
    """A decoding map was applied outside its domain."""


def _check_mode(mode: int) -> int:
    if mode not in (INJECTIVE, CLAW_FREE):
        raise ValueError(f"mode must be 0 (injective) or 1 (claw-free), got {mode}")
    return mode


def _check_width(width: int) -> int:
    if not MIN_KEY_WIDTH <= width <= MAX_KEY_WIDTH:
        raise ValueError(f"key width {width} outside [{MIN_KEY_WIDTH}, {MAX_KEY_WIDTH}]")
    return width


@dataclass(frozen=True)
class EntcfKey:
    """Public key: function mode, preimage width, permutation seed.

    Claw-free keys also carry the claw offset, which the evaluation map
    needs; see the module warning about the (intentional) lack of secrecy.
    """

    mode: int
    width: int
    seed: bytes
    delta: int | None = None

    def __post_init__(self):
        _check_mode(self.mode)
        _check_width(self.width)
        if len(self.seed) != 16:
            raise ValueError("permutation seed must be 16 bytes")
        if self.mode == CLAW_FREE:
            if not self.delta or not 0 < self.delta < (1 << self.width):
                raise ValueError("claw-free keys need a nonzero w-bit delta")
        elif self.delta is not None:
            raise ValueError("injective keys carry no delta")


@dataclass(frozen=True)
class EntcfTrapdoor:
    """Inversion capability for one key (same data, decoding-side role)."""

    mode: int
    width: int
    seed: bytes
    delta: int | None = None


@dataclass(frozen=True)
class EntcfKeyPair:
    key: EntcfKey
    trapdoor: EntcfTrapdoor


@lru_cache(maxsize=512)
def _round_tables(seed: bytes, total_bits: int) -> tuple[tuple[tuple[int, ...], ...], int, int]:
    """Per-round lookup tables for the Feistel round functions.

    Round r maps the r-parity half through table[r]; each table is expanded
    from a keyed blake2b stream so one key costs a handful of hash calls.
    """
    left_bits = (total_bits + 1) // 2
    right_bits = total_bits - left_bits
    tables = []
    for rnd in range(FEISTEL_ROUNDS):
        src_bits = right_bits if rnd % 2 == 0 else left_bits
        dst_bits = left_bits if rnd % 2 == 0 else right_bits
        n_entries = 1 << src_bits
        entry_bytes = (dst_bits + 7) // 8
        needed = n_entries * entry_bytes
        stream = b""
        counter = 0
        while len(stream) < needed:
            stream += hashlib.blake2b(
                rnd.to_bytes(2, "big") + counter.to_bytes(4, "big"), key=seed, digest_size=64
            ).digest()
            counter += 1
        mask = (1 << dst_bits) - 1
        table = tuple(
            int.from_bytes(stream[i * entry_bytes : (i + 1) * entry_bytes], "big") & mask
            for i in range(n_entries)
        )
        tables.append(table)
    return tuple(tables), left_bits, right_bits


def _feistel(seed: bytes, total_bits: int, value: int, inverse: bool = False) -> int:
    tables, left_bits, right_bits = _round_tables(seed, total_bits)
    left = value >> right_bits
    right = value & ((1 << right_bits) - 1)
    order = range(FEISTEL_ROUNDS - 1, -1, -1) if inverse else range(FEISTEL_ROUNDS)
    for rnd in order:
        if rnd % 2 == 0:
            left ^= tables[rnd][right]
        else:
            right ^= tables[rnd][left]
    return (left << right_bits) | right


@lru_cache(maxsize=512)
def _perm_tables(seed: bytes, total_bits: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    forward = tuple(_feistel(seed, total_bits, v) for v in range(1 << total_bits))
    inverse = [0] * len(forward)
    for v, image in enumerate(forward):
        inverse[image] = v
    return forward, tuple(inverse)


def _perm(key_seed: bytes, width: int, value: int) -> int:
    return _perm_tables(key_seed, width + 1)[0][value]


def _perm_inv(key_seed: bytes, width: int, value: int) -> int:
    return _perm_tables(key_seed, width + 1)[1][value]


def gen(mode: int, width: int, rng: np.random.Generator) -> EntcfKeyPair:
    """Fresh key pair: new permutation seed, and a claw offset in mode 1."""
    _check_mode(mode)
    _check_width(width)
    seed = rng.bytes(16)
    delta = None
    if mode == CLAW_FREE:
        delta = 1 + int(rng.integers(0, (1 << width) - 1))
    key = EntcfKey(mode=mode, width=width, seed=seed, delta=delta)
    trapdoor = EntcfTrapdoor(mode=mode, width=width, seed=seed, delta=delta)
    return EntcfKeyPair(key=key, trapdoor=trapdoor)


def eval_point(key: EntcfKey, b: int, x: int) -> int:
    """Image of (b, x); a (w+1)-bit value."""
    if b not in (0, 1):
        raise ValueError("b must be a bit")
    if not 0 <= x < (1 << key.width):
        raise ValueError(f"x = {x} out of range for width {key.width}")
    if key.mode == INJECTIVE:
        return _perm(key.seed, key.width, (b << key.width) | x)
    return _perm(key.seed, key.width, x ^ (key.delta if b else 0))


def chk(key: EntcfKey, y: int, b: int, x: int) -> bool:
    """Public predicate: does (b, x) map to y under this key?"""
    if not 0 <= y < (1 << (key.width + 1)):
        return False
    return eval_point(key, b, x) == y


def decode_b(trapdoor: EntcfTrapdoor, y: int) -> int:
    """Committed bit of an image under an injective-mode key."""
    if trapdoor.mode != INJECTIVE:
        raise DecodeError("decode_b requires an injective-mode trapdoor")
    if not 0 <= y < (1 << (trapdoor.width + 1)):
        raise DecodeError(f"image {y} out of range")
    return _perm_inv(trapdoor.seed, trapdoor.width, y) >> trapdoor.width


def decode_x(trapdoor: EntcfTrapdoor, y: int, b: int) -> int | None:
    """Preimage of y on branch b, or None when y lies outside the support.

    Injective mode ignores b and returns the unique preimage's x part.
    Claw-free mode returns z XOR b*delta for pi^{-1}(y) = 0||z, and None
    when the leading preimage bit is 1 (no claw maps there).
    """
    if b not in (0, 1):
        raise ValueError("b must be a bit")
    if not 0 <= y < (1 << (trapdoor.width + 1)):
        raise DecodeError(f"image {y} out of range")
    pre = _perm_inv(trapdoor.seed, trapdoor.width, y)
    if trapdoor.mode == INJECTIVE:
        return pre & ((1 << trapdoor.width) - 1)
    if pre >> trapdoor.width:
        return None
    z = pre & ((1 << trapdoor.width) - 1)
    return z ^ (trapdoor.delta if b else 0)


def decode_u(trapdoor: EntcfTrapdoor, y: int, d: int) -> int:
    """Parity d . (x_0 XOR x_1) of the claw at y.

    In this backend the claw offset is a global key property, so the value
    is d . delta for every image point; y is accepted for interface
    compatibility but does not influence the result.
    """
    if trapdoor.mode != CLAW_FREE:
        raise DecodeError("decode_u requires a claw-free trapdoor")
    if not 0 <= d < (1 << trapdoor.width):
        raise DecodeError(f"equation vector {d} out of range")
    return bin(d & trapdoor.delta).count("1") & 1


def preimage_table(key: EntcfKey) -> dict[int, list[tuple[int, int]]]:
    """All (b, x) preimages of every reachable image point."""
    table: dict[int, list[tuple[int, int]]] = {}
    for b in (0, 1):
        for x in range(1 << key.width):
            table.setdefault(eval_point(key, b, x), []).append((b, x))
    return table


def key_to_wire(key: EntcfKey) -> dict:
    """Key serialization for the verifier-to-prover wire (JSON-safe)."""
    msg = {"mode": key.mode, "width": key.width, "seed_hex": key.seed.hex()}
    if key.delta is not None:
        msg["delta_hex"] = format(key.delta, "x")
    return msg


def key_from_wire(obj: dict) -> EntcfKey:
    delta = int(obj["delta_hex"], 16) if "delta_hex" in obj else None
    return EntcfKey(
        mode=int(obj["mode"]),
        width=int(obj["width"]),
        seed=bytes.fromhex(obj["seed_hex"]),
        delta=delta,
    )


def trapdoor_from_key(key: EntcfKey) -> EntcfTrapdoor:
    """This backend's keys carry full inversion capability (see warning)."""
    return EntcfTrapdoor(mode=key.mode, width=key.width, seed=key.seed, delta=key.delta)
