"""Prover endpoints: the honest strategy and a menu of cheating ones.

A prover is anything with ``handle(msg) -> reply | None`` obeying the wire
contract (KEYS -> IMAGES, ROUND_TYPE -> PREIMAGES or EQUATIONS,
QUESTION -> ANSWERS, VERDICT/FINAL -> no reply).  Everything here keeps a
per-round derived RNG so behavior is identical in-process and over a
socket.

The honest prover works one copy at a time: for each received key it
prepares the uniform superposition over (bit, preimage) pairs entangled
with the image point, measures the image register, and keeps only the
post-measurement register of w+1 qubits.  Preimage challenges measure that
register outright; equation challenges Hadamard-transform and measure the
preimage part, leaving a single committed qubit per copy, which is either
measured (test round question) or kept as the protocol's output state
(preparation round).
"""

from __future__ import annotations

import numpy as np

from . import entcf, qcore
from .seeds import derived_rng
from .wire import int_to_hex


class LocalProver:
    """Base class implementing message routing and per-round RNG."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._round = None
        self._rng = None
        self._keys: list[entcf.EntcfKey] = []
        self._width = 0

    # -- message dispatch ---------------------------------------------

    def handle(self, msg: dict) -> dict | None:
        mtype = msg.get("type")
        if mtype == "KEYS":
            self._round = int(msg["round"])
            self._rng = derived_rng(self.seed, "prover", self._round)
            self._keys = [entcf.key_from_wire(k) for k in msg["keys"]]
            self._width = self._keys[0].width
            images = self.commit(self._keys)
            return {
                "type": "IMAGES",
                "round": self._round,
                "y": [int_to_hex(y, self._width + 1) for y in images],
            }
        if mtype == "ROUND_TYPE":
            if msg["round_type"] == "preimage":
                pairs = self.preimage_answers()
                return {
                    "type": "PREIMAGES",
                    "round": self._round,
                    "pairs": [{"b": b, "x": int_to_hex(x, self._width)} for b, x in pairs],
                }
            equations = self.equation_answers()
            return {
                "type": "EQUATIONS",
                "round": self._round,
                "d": [int_to_hex(d, self._width) for d in equations],
            }
        if mtype == "QUESTION":
            return {"type": "ANSWERS", "round": self._round, "v": self.question_answers(int(msg["q"]))}
        if mtype in ("VERDICT", "FINAL"):
            return None
        raise ValueError(f"unknown message type {mtype!r}")

    # -- strategy hooks -------------------------------------------------

    def commit(self, keys: list[entcf.EntcfKey]) -> list[int]:
        raise NotImplementedError

    def preimage_answers(self) -> list[tuple[int, int]]:
        raise NotImplementedError

    def equation_answers(self) -> list[int]:
        raise NotImplementedError

    def question_answers(self, q: int) -> list[int]:
        raise NotImplementedError

    def final_states(self):
        return None


class HonestProver(LocalProver):
    """Follows the protocol exactly; succeeds with probability 1 here."""

    def __init__(self, seed: int = 0):
        super().__init__(seed)
        self._states: list[qcore.StateVector] = []
        self._committed: list[qcore.StateVector] | None = None

    def commit(self, keys):
        self._committed = None
        self._states = []
        images = []
        for key in keys:
            table = entcf.preimage_table(key)
            ys = sorted(table)
            weights = np.array([len(table[y]) for y in ys], dtype=float)
            weights /= weights.sum()
            y = ys[int(self._rng.choice(len(ys), p=weights))]
            preimages = table[y]
            amps = np.zeros(2 ** (key.width + 1), dtype=complex)
            for b, x in preimages:
                amps[(b << key.width) | x] = 1.0 / np.sqrt(len(preimages))
            self._states.append(qcore.StateVector(amps))
            images.append(y)
        return images

    def preimage_answers(self):
        answers = []
        for state in self._states:
            bits, _ = qcore.measure_computational(state, range(self._width + 1), self._rng)
            answers.append((bits[0], qcore.bits_to_index(bits[1:])))
        return answers

    def equation_answers(self):
        equations = []
        committed = []
        mask = (0,) + (1,) * self._width
        for state in self._states:
            rotated = qcore.hadamard_layer(state, mask)
            d_bits, post = qcore.measure_computational(rotated, range(1, self._width + 1), self._rng)
            d_index = qcore.bits_to_index(d_bits)
            qubit = post.amplitudes.reshape(2, 2**self._width)[:, d_index]
            committed.append(qcore.StateVector(qubit))
            equations.append(d_index)
        self._committed = committed
        return equations

    def question_answers(self, q):
        answers = []
        measured = []
        for state in self._committed:
            if q == 1:
                state = qcore.apply_operator(qcore.hadamard(), state, [0])
            bits, post = qcore.measure_computational(state, [0], self._rng)
            answers.append(bits[0])
            measured.append(post)
        self._committed = measured
        return answers

    def final_states(self):
        """Committed qubits after a preparation round (one per copy)."""
        return list(self._committed) if self._committed is not None else None

    def final_joint_state(self) -> qcore.StateVector | None:
        states = self.final_states()
        if not states:
            return None
        joint = states[0]
        for s in states[1:]:
            joint = qcore.tensor_product(joint, s)
        return joint


class RandomAnswerProver(LocalProver):
    """Answers every challenge uniformly at random, images included."""

    def commit(self, keys):
        return [int(self._rng.integers(0, 2 ** (k.width + 1))) for k in keys]

    def preimage_answers(self):
        return [
            (int(self._rng.integers(0, 2)), int(self._rng.integers(0, 2**self._width)))
            for _ in self._keys
        ]

    def equation_answers(self):
        return [int(self._rng.integers(0, 2**self._width)) for _ in self._keys]

    def question_answers(self, q):
        return [int(self._rng.integers(0, 2)) for _ in self._keys]


class WrongBasisProver(HonestProver):
    """Honest until the question, which it answers in the opposite basis."""

    def question_answers(self, q):
        return super().question_answers(1 - q)


class ConstantVProver(HonestProver):
    """Honest commitment but always answers 0 to the question."""

    def question_answers(self, q):
        return [0] * len(self._keys)


class DelayedClassicalProver(HonestProver):
    """Measures its register in the computational basis right after
    committing, then answers all later challenges from the classical record."""

    def __init__(self, seed: int = 0):
        super().__init__(seed)
        self._record: list[tuple[int, int]] = []

    def commit(self, keys):
        images = super().commit(keys)
        self._record = []
        for state in self._states:
            bits, _ = qcore.measure_computational(state, range(self._width + 1), self._rng)
            self._record.append((bits[0], qcore.bits_to_index(bits[1:])))
        return images

    def preimage_answers(self):
        return list(self._record)

    def equation_answers(self):
        # Hadamard-measuring a computational-basis register yields a
        # uniformly random equation vector.
        return [int(self._rng.integers(0, 2**self._width)) for _ in self._keys]

    def question_answers(self, q):
        if q == 0:
            return [b for b, _ in self._record]
        return [int(self._rng.integers(0, 2)) for _ in self._keys]


class AlwaysWrongProver(HonestProver):
    """Deterministically fails every check: corrupts its honest answers."""

    def preimage_answers(self):
        return [(b, x ^ 1) for b, x in super().preimage_answers()]

    def question_answers(self, q):
        return [1 - v for v in super().question_answers(q)]


_STRATEGIES = {
    "random_answer": RandomAnswerProver,
    "wrong_basis": WrongBasisProver,
    "constant_v": ConstantVProver,
    "delayed_classical": DelayedClassicalProver,
    "always_wrong": AlwaysWrongProver,
}


def cheating_prover(strategy: str, seed: int = 0) -> LocalProver:
    """Factory over the named cheating strategies."""
    try:
        cls = _STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {sorted(_STRATEGIES)}") from None
    return cls(seed)
