"""Classical-client copy-protection of multi-bit point functions.

A point function maps its 4*lam-bit marked input to a lam-bit marked
output and everything else to zeros.  Protection hides the marked input
inside a permuted pair (prefix tag, basis string), delegates the basis
string to the receiver through the interactive preparation protocol, and
publishes the classical offsets needed for evaluation.  Evaluation runs a
coherent prefix comparison against an ancilla, measures only the ancilla,
and either rewinds (wrong input, output zeros) or reads the program out.

The marked output length is lam: the offset arithmetic (the published
correction is the XOR of a lam-bit half of the prepared string with the
output) fixes it, and the implementation follows the arithmetic.

Nothing here is secure at simulation scale; the harness measures piracy
success rates against the trivial baseline exactly where feasible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import gf2, qcore
from .protocol import MultiRoundConfig, run_multi_round


@dataclass(frozen=True)
class PointFunction:
    """Marked input (4*lam bits) and marked output (lam bits)."""

    y: tuple[int, ...]
    m: tuple[int, ...]

    def __post_init__(self):
        if len(self.y) != 4 * len(self.m):
            raise ValueError("marked input must be four times the output length")
        if any(b not in (0, 1) for b in self.y + self.m):
            raise ValueError("point functions take bit vectors")

    @property
    def lam(self) -> int:
        return len(self.m)

    def evaluate(self, x: Sequence[int]) -> tuple[int, ...]:
        x = tuple(x)
        if len(x) != len(self.y):
            raise ValueError("input length mismatch")
        return self.m if x == self.y else (0,) * self.lam


def random_point_function(lam: int, rng: np.random.Generator) -> PointFunction:
    y = tuple(int(b) for b in rng.integers(0, 2, size=4 * lam))
    m = tuple(int(b) for b in rng.integers(0, 2, size=lam))
    return PointFunction(y, m)


@dataclass(frozen=True)
class ProtectedProgram:
    """Receiver-side quantum payload plus the published classical offsets."""

    sigma: qcore.StateVector  # 2*lam qubits
    r: tuple[int, ...]  # lam bits
    perm: gf2.PermKey  # over 4*lam bits
    t: tuple[int, ...]  # lam bits

    @property
    def lam(self) -> int:
        return len(self.r)

    def __post_init__(self):
        if self.sigma.qubit_count != 2 * self.lam:
            raise ValueError("program register must hold 2*lam qubits")
        if len(self.t) != self.lam or self.perm.width != 4 * self.lam:
            raise ValueError("inconsistent program lengths")


def cp_protect(lam: int, f: PointFunction, config: MultiRoundConfig, prover, rng: np.random.Generator):
    """Interactive protection; returns (program, protocol result).

    The program is None when the preparation protocol aborts.
    """
    if f.lam != lam:
        raise ValueError("function length does not match lam")
    if lam > 4:
        raise ValueError("protection capped at lam = 4 (permutation width 16)")
    if config.n != 2 * lam:
        raise ValueError("protocol must prepare 2*lam states")
    perm = gf2.pip_sample(4 * lam, rng)
    s_theta = gf2.pip_eval(perm, f.y)
    s, theta = s_theta[: 2 * lam], s_theta[2 * lam :]
    result = run_multi_round(config, prover, prep_theta=theta)
    if not result.accepted:
        return None, result
    v = result.v_vec
    s0, s1 = s[:lam], s[lam:]
    v0, v1 = v[:lam], v[lam:]
    r = tuple(a ^ b for a, b in zip(v0, s0))
    u = tuple(a ^ b for a, b in zip(v1, s1))
    t = tuple(a ^ b for a, b in zip(u, f.m))
    states = result.prover_final_state
    sigma = states[0]
    for st in states[1:]:
        sigma = qcore.tensor_product(sigma, st)
    return ProtectedProgram(sigma=sigma, r=r, perm=perm, t=t), result


def _prefix_compare_operator(lam: int, pattern: Sequence[int]) -> qcore.LinearOperator:
    """Flip the last of lam+1 qubits iff the first lam match the pattern."""
    pattern_index = 0
    for b in pattern:
        pattern_index = (pattern_index << 1) | b
    dim = 2 ** (lam + 1)
    mat = np.zeros((dim, dim), dtype=complex)
    for p in range(2**lam):
        for anc in (0, 1):
            src = (p << 1) | anc
            dst = (p << 1) | (anc ^ (1 if p == pattern_index else 0))
            mat[dst, src] = 1.0
    return qcore.LinearOperator(mat, unitary=True)


def _eval_prepared(prog: ProtectedProgram, x: Sequence[int]):
    """Shared setup: rotated state with ancilla, ready for the prefix check."""
    lam = prog.lam
    x = tuple(x)
    if len(x) != 4 * lam:
        raise ValueError("evaluation input must have 4*lam bits")
    s_theta = gf2.pip_eval(prog.perm, x)
    s_x, theta_x = s_theta[: 2 * lam], s_theta[2 * lam :]
    pattern = tuple(a ^ b for a, b in zip(prog.r, s_x[:lam]))
    state = qcore.tensor_product(prog.sigma, qcore.StateVector.basis_state([0]))
    state = qcore.hadamard_layer(state, theta_x + (0,))
    compare = _prefix_compare_operator(lam, pattern)
    targets = list(range(lam)) + [2 * lam]
    state = qcore.apply_operator(compare, state, targets)
    return state, s_x, theta_x, compare, targets


def cp_accept_probability(prog: ProtectedProgram, x: Sequence[int]) -> float:
    """Exact probability that evaluation takes the matching branch."""
    state, _, _, _, _ = _eval_prepared(prog, x)
    branches = qcore.enumerate_measurement(state, [2 * prog.lam])
    return float(sum(p for outcome, p, _ in branches if outcome == (1,)))


def cp_eval(lam: int, prog: ProtectedProgram, x: Sequence[int], rng: np.random.Generator):
    """Run the program on x; returns (output bits, post-program, accepted).

    Only the ancilla is measured on the mismatch branch, so the program
    survives (gently disturbed when the verdict was not deterministic).
    On the matching branch the register is read out and re-prepared from
    the observed outcome, which restores the program exactly whenever the
    verdict was deterministic.  The boolean reports which branch ran.
    """
    if prog.lam != lam:
        raise ValueError("program does not match lam")
    state, s_x, theta_x, compare, targets = _eval_prepared(prog, x)
    anc = 2 * lam
    verdict, state = qcore.measure_computational(state, [anc], rng)
    state = qcore.apply_operator(compare, state, targets)  # self-inverse uncompute
    if verdict == (0,):
        state = qcore.hadamard_layer(state, theta_x + (0,))
        program_state = qcore.StateVector(state.amplitudes.reshape(-1, 2)[:, 0])
        return (0,) * lam, replace(prog, sigma=program_state), False
    w, state = qcore.measure_computational(state, range(2 * lam), rng)
    w1 = w[lam:]
    out = tuple(a ^ b ^ c for a, b, c in zip(w1, s_x[lam:], prog.t))
    collapsed = qcore.StateVector.basis_state(w)
    program_state = qcore.hadamard_layer(collapsed, theta_x)
    return out, replace(prog, sigma=program_state), True


# -- piracy experiment -------------------------------------------------------


class ChallengeDistribution:
    """Sampler over challenge input pairs, with an exact trivial baseline."""

    def sample(self, f: PointFunction, rng: np.random.Generator):
        raise NotImplementedError

    def p_trivial(self, lam: int) -> float:
        """Baseline from forwarding the program to one party: the forwarding
        party always answers correctly, the other wins whenever its
        challenge is unmarked (it answers zeros)."""
        raise NotImplementedError


class MarkedChallenge(ChallengeDistribution):
    """Both parties are challenged on the marked input."""

    def sample(self, f, rng):
        return f.y, f.y

    def p_trivial(self, lam):
        return 0.0


class UnmarkedChallenge(ChallengeDistribution):
    """Both challenges uniform over inputs distinct from the marked one."""

    def sample(self, f, rng):
        lam = f.lam

        def draw():
            while True:
                x = tuple(int(b) for b in rng.integers(0, 2, size=4 * lam))
                if x != f.y:
                    return x

        return draw(), draw()

    def p_trivial(self, lam):
        return 1.0


class UniformChallenge(ChallengeDistribution):
    """Challenges uniform over the whole input space."""

    def sample(self, f, rng):
        lam = f.lam
        x_b = tuple(int(b) for b in rng.integers(0, 2, size=4 * lam))
        x_c = tuple(int(b) for b in rng.integers(0, 2, size=4 * lam))
        return x_b, x_c

    def p_trivial(self, lam):
        q = 2.0 ** -(4 * lam)
        return (1 - q) * (1 - q) + q * (1 - q)


class Pirate:
    """Splits one program into two shares answered independently."""

    def split(self, prog: ProtectedProgram, rng: np.random.Generator):
        raise NotImplementedError

    def answer_b(self, share, x, rng) -> tuple[int, ...]:
        raise NotImplementedError

    def answer_c(self, share, x, rng) -> tuple[int, ...]:
        raise NotImplementedError


class ForwardPirate(Pirate):
    """Forwards the program to B; C keeps the classical parts and guesses."""

    def split(self, prog, rng):
        return prog, (prog.r, prog.perm, prog.t)

    def answer_b(self, share, x, rng):
        out, _, _ = cp_eval(share.lam, share, x, rng)
        return out

    def answer_c(self, share, x, rng):
        r, _, _ = share
        return tuple(int(b) for b in rng.integers(0, 2, size=len(r)))


class ZeroPirate(Pirate):
    """Both parties always answer zeros (optimal for unmarked challenges)."""

    def split(self, prog, rng):
        return prog.lam, prog.lam

    def answer_b(self, share, x, rng):
        return (0,) * share

    answer_c = answer_b


class BreidbartPirate(Pirate):
    """Measures every program qubit in the intermediate basis up front and
    gives both parties the classical outcome plus the published offsets."""

    def split(self, prog, rng):
        cos, sin = np.cos(np.pi / 8), np.sin(np.pi / 8)
        basis = np.array([[cos, sin], [-sin, cos]], dtype=complex)
        state = prog.sigma
        rotated = state
        op = qcore.LinearOperator(basis, unitary=True)
        for i in range(state.qubit_count):
            rotated = qcore.apply_operator(op, rotated, [i])
        w, _ = qcore.measure_computational(rotated, range(state.qubit_count), rng)
        share = (w, prog.r, prog.perm, prog.t)
        return share, share

    def _answer(self, share, x, rng):
        w, r, perm, t = share
        lam = len(r)
        s_theta = gf2.pip_eval(perm, tuple(x))
        s_x = s_theta[: 2 * lam]
        pattern = tuple(a ^ b for a, b in zip(r, s_x[:lam]))
        if w[:lam] != pattern:
            return (0,) * lam
        return tuple(a ^ b ^ c for a, b, c in zip(w[lam:], s_x[lam:], t))

    answer_b = _answer
    answer_c = _answer


def piracy_experiment(
    lam: int,
    challenge_dist: ChallengeDistribution,
    pirate: Pirate,
    config: MultiRoundConfig,
    trials: int,
    rng: np.random.Generator,
    prover_factory=None,
) -> dict:
    """Success rate of a pirate over fresh protect runs and challenges."""
    from .provers import HonestProver

    if prover_factory is None:
        prover_factory = HonestProver
    wins = 0
    aborts = 0
    for _ in range(trials):
        f = random_point_function(lam, rng)
        cfg = MultiRoundConfig(
            n=config.n,
            m_blocks=config.m_blocks,
            delta=config.delta,
            width=config.width,
            seed=int(rng.integers(0, 2**63)),
            reveal_theta=False,
        )
        prog, result = cp_protect(lam, f, cfg, prover_factory(int(rng.integers(0, 2**63))), rng)
        if prog is None:
            aborts += 1
            continue
        share_b, share_c = pirate.split(prog, rng)
        x_b, x_c = challenge_dist.sample(f, rng)
        ans_b = pirate.answer_b(share_b, x_b, rng)
        ans_c = pirate.answer_c(share_c, x_c, rng)
        if ans_b == f.evaluate(x_b) and ans_c == f.evaluate(x_c):
            wins += 1
    p = wins / trials
    return {
        "success": p,
        "stderr": float(np.sqrt(max(p * (1 - p), 1e-12) / trials)),
        "p_trivial": challenge_dist.p_trivial(lam),
        "aborts": aborts,
        "trials": trials,
    }


# -- serialization (simulation artifact; the quantum part is non-physical) --


def save_program(prog: ProtectedProgram, json_path, state_path) -> None:
    import json

    meta = {
        "note": "SIMULATION ARTIFACT: the statevector side file is not a physical object",
        "lam": prog.lam,
        "r": "".join(map(str, prog.r)),
        "t": "".join(map(str, prog.t)),
        "perm_a": prog.perm.a.bits,
        "perm_b": prog.perm.b.bits,
        "perm_width": prog.perm.width,
        "state_file": str(state_path),
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    prog.sigma.amplitudes.astype("<c16").tofile(state_path)


def load_program(json_path) -> ProtectedProgram:
    import json

    with open(json_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    amps = np.fromfile(meta["state_file"], dtype="<c16")
    width = int(meta["perm_width"])
    perm = gf2.PermKey(
        gf2.FieldElement(int(meta["perm_a"]), width), gf2.FieldElement(int(meta["perm_b"]), width)
    )
    return ProtectedProgram(
        sigma=qcore.StateVector(amps),
        r=tuple(int(c) for c in meta["r"]),
        perm=perm,
        t=tuple(int(c) for c in meta["t"]),
    )
