"""Explicit device matrices and numerical checks of the rigidity relations.

A device captures one round of an arbitrary prover's behavior: a family of
post-commitment states indexed by a per-copy basis vector and the returned
image points, plus three measurement families (preimage answers, equation
answers, question answers).  Here devices are built from the honest prover
in a compressed representation and optionally perturbed, and a battery of
diagnostics evaluates the success probabilities, binary-observable
relations, Pauli-group behavior, rounding isometries, and the BB84 product
form on explicit (small) matrices.

Representation.  Everything is block-diagonal in the classical image and
equation outcomes (y_vec, d_vec).  Per copy the committed space is
compressed to dimension 2, spanned by the two preimage branches of the
returned image; the equation measurement, projective on the full space,
becomes a Kraus family {K} with sum K^dag K = 1 in this compression.  A
perturbed device additionally carries a classical ancilla register whose
state holds the mixing weights: index 0 answers honestly, index j >= 1
forces the fixed answer j-1 regardless of the quantum state.  Question
measurements remain projective on the enlarged space, and every perturbed
quantity is an exact expectation (no sampling noise).

Block keys are pairs (y_vec, d_vec) of integer tuples.  The device space
is committed (2^n) x ancilla (A); operators on it are dense numpy arrays.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import entcf, qcore

MAX_DIAG_COPIES = 3
MAX_DIAG_WIDTH = 2

_PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def _bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


@dataclass(frozen=True)
class ObservableSpec:
    kind: str  # "Z", "X", or "Xtilde"
    a: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("Z", "X", "Xtilde"):
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if any(bit not in (0, 1) for bit in self.a):
            raise ValueError("a must be a bit vector")


@dataclass
class SigmaState:
    """(y_vec, d_vec)-indexed subnormalized blocks of a post-equation state."""

    theta: tuple[int, ...]
    blocks: dict[tuple[tuple[int, ...], tuple[int, ...]], np.ndarray]

    def total_trace(self) -> float:
        return float(sum(np.trace(m).real for m in self.blocks.values()))

    def total_matrix(self) -> np.ndarray:
        return sum(self.blocks.values())

    def stacked(self):
        keys = sorted(self.blocks)
        return keys, np.stack([self.blocks[k] for k in keys])


class Device:
    """Compressed-representation device with one key tuple per mode."""

    def __init__(self, n: int, width: int, keypairs_by_mode, anc_probs=None, anc_answers=(), epsilon=0.0):
        self.n = n
        self.width = width
        self.keypairs = {mode: tuple(kps) for mode, kps in keypairs_by_mode.items()}
        self.anc_probs = np.array([1.0] if anc_probs is None else anc_probs, dtype=float)
        self.anc_answers = tuple(anc_answers)  # fixed answer (int over n bits) per ancilla index >= 1
        self.epsilon = float(epsilon)
        if len(self.anc_answers) != len(self.anc_probs) - 1:
            raise ValueError("need one fixed answer per non-honest ancilla index")
        if abs(self.anc_probs.sum() - 1.0) > 1e-12:
            raise ValueError("ancilla probabilities must sum to 1")

    # -- dimensions -----------------------------------------------------

    @property
    def committed_dim(self) -> int:
        return 2**self.n

    @property
    def anc_dim(self) -> int:
        return len(self.anc_probs)

    @property
    def block_dim(self) -> int:
        return self.committed_dim * self.anc_dim

    # -- per-copy structure ----------------------------------------------

    def _pair(self, mode: int, copy: int) -> entcf.EntcfKeyPair:
        return self.keypairs[mode][copy]

    def copy_y_list(self, mode: int, copy: int):
        """Honest (y, weight, 2-dim committed ket) triples for one copy."""
        kp = self._pair(mode, copy)
        w = self.width
        out = []
        if mode == entcf.INJECTIVE:
            for y in range(2 ** (w + 1)):
                b_hat = entcf.decode_b(kp.trapdoor, y)
                ket = np.zeros(2, dtype=complex)
                ket[b_hat] = 1.0
                out.append((y, 2.0 ** -(w + 1), ket))
        else:
            for y in range(2 ** (w + 1)):
                if entcf.decode_x(kp.trapdoor, y, 0) is None:
                    continue
                out.append((y, 2.0**-w, _PLUS.copy()))
        return out

    def copy_x_answer(self, mode: int, copy: int, y: int, b: int) -> int:
        return entcf.decode_x(self._pair(mode, copy).trapdoor, y, b)

    def copy_u(self, copy: int, d: int) -> int:
        kp = self._pair(entcf.CLAW_FREE, copy)
        return _parity(d & kp.trapdoor.delta)

    def copy_b_hat(self, copy: int, y: int) -> int:
        return entcf.decode_b(self._pair(entcf.INJECTIVE, copy).trapdoor, y)

    def copy_kraus(self, mode: int, copy: int, y: int, d: int) -> np.ndarray:
        """Compressed equation-measurement Kraus factor for one copy."""
        kp = self._pair(mode, copy)
        signs = []
        for b in (0, 1):
            x = entcf.decode_x(kp.trapdoor, y, b)
            signs.append((-1.0) ** _parity(d & x))
        return np.diag(signs).astype(complex) * 2.0 ** (-self.width / 2.0)

    # -- state families ---------------------------------------------------

    def _anc_matrix(self) -> np.ndarray:
        return np.diag(self.anc_probs).astype(complex)

    def psi_blocks(self, theta_vec: Sequence[int]):
        """Post-commitment state: dict y_vec -> subnormalized block matrix."""
        theta_vec = tuple(theta_vec)
        per_copy = [self.copy_y_list(theta_vec[i], i) for i in range(self.n)]
        anc = self._anc_matrix()
        blocks = {}
        for combo in itertools.product(*per_copy):
            y_vec = tuple(entry[0] for entry in combo)
            weight = float(np.prod([entry[1] for entry in combo]))
            ket = _kron_all([entry[2].reshape(2, 1) for entry in combo]).reshape(-1)
            committed = np.outer(ket, ket.conj())
            blocks[y_vec] = weight * np.kron(committed, anc)
        return blocks

    def sigma_blocks(self, theta_vec: Sequence[int]) -> SigmaState:
        """Post-equation state sigma: blocks over (y_vec, d_vec)."""
        theta_vec = tuple(theta_vec)
        psi = self.psi_blocks(theta_vec)
        anc = self._anc_matrix()
        d_range = range(2**self.width)
        blocks = {}
        for y_vec, block in psi.items():
            committed = self._committed_part(block)  # still carries the block weight
            for d_vec in itertools.product(d_range, repeat=self.n):
                k = _kron_all(
                    [self.copy_kraus(theta_vec[i], i, y_vec[i], d_vec[i]) for i in range(self.n)]
                )
                blocks[(y_vec, d_vec)] = np.kron(k @ committed @ k.conj().T, anc)
        return SigmaState(theta=theta_vec, blocks=blocks)

    def _committed_part(self, block: np.ndarray) -> np.ndarray:
        """Trace out the ancilla from a block (blocks are kron(committed, anc))."""
        d, a = self.committed_dim, self.anc_dim
        return np.einsum("ikjk->ij", block.reshape(d, a, d, a))

    def decode_block(self, theta_vec: Sequence[int], y_vec, d_vec) -> tuple[int, ...]:
        """The bit string the verifier decodes for this block."""
        out = []
        for i, theta in enumerate(theta_vec):
            if theta == 0:
                out.append(self.copy_b_hat(i, y_vec[i]))
            else:
                out.append(self.copy_u(i, d_vec[i]))
        return tuple(out)

    def u_vector(self, theta_vec, d_vec, a: Sequence[int]) -> int:
        """Parity a . u over claw-free copies; requires theta_i = 1 where a_i = 1."""
        total = 0
        for i, (theta, ai) in enumerate(zip(theta_vec, a)):
            if ai:
                if theta != 1:
                    raise ValueError("Xtilde sign needs a claw-free key wherever a_i = 1")
                total ^= self.copy_u(i, d_vec[i])
        return total

    # -- measurements ------------------------------------------------------

    def question_projector(self, q: int, v_vec: Sequence[int]) -> np.ndarray:
        """P_q^{(v)} on the enlarged space (honest part + forced answers)."""
        v_index = int(sum(bit << (self.n - 1 - i) for i, bit in enumerate(v_vec)))
        if q == 0:
            ket = np.zeros(self.committed_dim, dtype=complex)
            ket[v_index] = 1.0
        else:
            kets = []
            h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
            for bit in v_vec:
                kets.append(h @ np.eye(2, dtype=complex)[:, bit].reshape(2, 1))
            ket = _kron_all(kets).reshape(-1)
        honest = np.outer(ket, ket.conj())
        anc_keep = np.zeros((self.anc_dim, self.anc_dim), dtype=complex)
        anc_keep[0, 0] = 1.0
        out = np.kron(honest, anc_keep)
        for j, answer in enumerate(self.anc_answers, start=1):
            if answer == v_index:
                e = np.zeros((self.anc_dim, self.anc_dim), dtype=complex)
                e[j, j] = 1.0
                out += np.kron(np.eye(self.committed_dim, dtype=complex), e)
        return out

    def observable_matrix(self, kind: str, a: Sequence[int]) -> np.ndarray:
        """Block-independent part of Z(a) or X(a) on the enlarged space."""
        a = tuple(a)
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        sz = np.array([[1, 0], [0, -1]], dtype=complex)
        single = sz if kind == "Z" else sx
        factors = [single if bit else np.eye(2, dtype=complex) for bit in a]
        honest = _kron_all(factors) if factors else np.eye(1, dtype=complex)
        anc_keep = np.zeros((self.anc_dim, self.anc_dim), dtype=complex)
        anc_keep[0, 0] = 1.0
        out = np.kron(honest, anc_keep)
        a_int = _bits_to_int(a)
        for j, answer in enumerate(self.anc_answers, start=1):
            sign = (-1.0) ** _parity(answer & a_int)
            e = np.zeros((self.anc_dim, self.anc_dim), dtype=complex)
            e[j, j] = 1.0
            out += sign * np.kron(np.eye(self.committed_dim, dtype=complex), e)
        return out


@dataclass
class BlockObservable:
    """Binary observable; Xtilde carries a per-block sign."""

    spec: ObservableSpec
    base: np.ndarray
    sign: Callable  # sign(theta_vec, y_vec, d_vec) -> +1/-1

    def matrix_for(self, theta_vec, y_vec, d_vec) -> np.ndarray:
        return self.sign(theta_vec, y_vec, d_vec) * self.base


def device_from_honest(n: int, width: int, rng: np.random.Generator) -> Device:
    """Honest device for one fixed key tuple per mode."""
    if n > MAX_DIAG_COPIES:
        raise ValueError(f"diagnostics support at most {MAX_DIAG_COPIES} copies")
    if width > MAX_DIAG_WIDTH:
        raise ValueError(f"diagnostics support widths up to {MAX_DIAG_WIDTH}")
    keypairs = {
        entcf.INJECTIVE: [entcf.gen(entcf.INJECTIVE, width, rng) for _ in range(n)],
        entcf.CLAW_FREE: [entcf.gen(entcf.CLAW_FREE, width, rng) for _ in range(n)],
    }
    return Device(n=n, width=width, keypairs_by_mode=keypairs)


def averaged_over_keys(n: int, width: int, rng: np.random.Generator, diagnostic, samples: int = 32):
    """Average a scalar diagnostic over freshly sampled key tuples.

    Diagnostics default to one fixed key tuple per mode (every honest
    quantity is exact); this helper provides the key-averaged variant.
    """
    values = [diagnostic(device_from_honest(n, width, rng)) for _ in range(samples)]
    return float(np.mean(values))


def perturb_device(device: Device, epsilon: float, rng: np.random.Generator | None = None) -> Device:
    """Mix each question answer with a uniform one with probability epsilon.

    Realized exactly: a classical ancilla carries the mixing weights, with
    one index per forced answer, so the perturbed measurements stay
    projective and every derived quantity is a deterministic expectation.
    The rng parameter is accepted for interface uniformity but unused.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if device.anc_dim != 1:
        raise ValueError("perturb an unperturbed device")
    if epsilon == 0.0:
        return device
    n = device.n
    answers = tuple(range(2**n))
    probs = [1.0 - epsilon] + [epsilon / 2**n] * 2**n
    return Device(
        n=n,
        width=device.width,
        keypairs_by_mode=device.keypairs,
        anc_probs=probs,
        anc_answers=answers,
        epsilon=epsilon,
    )


def sigma_state(device: Device, theta_vec: Sequence[int]) -> SigmaState:
    return device.sigma_blocks(theta_vec)


def sigma_for_v(device: Device, theta_vec: Sequence[int], v_vec: Sequence[int]) -> SigmaState:
    """Restriction of sigma to the blocks the verifier decodes as v_vec."""
    theta_vec, v_vec = tuple(theta_vec), tuple(v_vec)
    full = device.sigma_blocks(theta_vec)
    blocks = {
        key: m
        for key, m in full.blocks.items()
        if device.decode_block(theta_vec, key[0], key[1]) == v_vec
    }
    return SigmaState(theta=theta_vec, blocks=blocks)


def partial_sigma(device: Device, theta_vec: Sequence[int], v: int, a: Sequence[int]) -> SigmaState:
    """Sum of sigma^(theta, v_vec) over v_vec with a . v_vec = v."""
    theta_vec, a = tuple(theta_vec), tuple(a)
    full = device.sigma_blocks(theta_vec)
    blocks = {}
    for key, m in full.blocks.items():
        decoded = device.decode_block(theta_vec, key[0], key[1])
        if sum(x & y for x, y in zip(decoded, a)) % 2 == v:
            blocks[key] = m
    return SigmaState(theta=theta_vec, blocks=blocks)


def gammas(device: Device) -> tuple[float, float]:
    """Exact preimage- and Hadamard-round failure probabilities.

    Averaged uniformly over the single-basis choices theta in {0, 1}, as in
    a test round.
    """
    n, w = device.n, device.width
    gamma_p_terms = []
    gamma_h_terms = []
    for theta in (0, 1):
        theta_vec = (theta,) * n
        # preimage round: project committed registers, check the public predicate
        psi = device.psi_blocks(theta_vec)
        pass_pre = 0.0
        for y_vec, block in psi.items():
            committed = device._committed_part(block)
            for b_vec in itertools.product((0, 1), repeat=n):
                ok = True
                for i, b in enumerate(b_vec):
                    kp = device.keypairs[theta][i]
                    x = entcf.decode_x(kp.trapdoor, y_vec[i], b)
                    if x is None or not entcf.chk(kp.key, y_vec[i], b, x):
                        ok = False
                        break
                if not ok:
                    continue
                idx = sum(b << (n - 1 - i) for i, b in enumerate(b_vec))
                pass_pre += float(committed[idx, idx].real)
        gamma_p_terms.append(1.0 - pass_pre)

        # Hadamard round: the device answers with P_theta, check against the decoding
        sigma = device.sigma_blocks(theta_vec)
        pass_had = 0.0
        for (y_vec, d_vec), block in sigma.blocks.items():
            correct = device.decode_block(theta_vec, y_vec, d_vec)
            proj = device.question_projector(theta, correct)
            pass_had += float(np.trace(proj @ block).real)
        gamma_h_terms.append(1.0 - pass_had)

    return 0.5 * sum(gamma_p_terms), 0.5 * sum(gamma_h_terms)


def observable(device: Device, spec: ObservableSpec) -> BlockObservable:
    """Binary observable Z(a), X(a), or the sign-corrected Xtilde(a)."""
    a = tuple(spec.a)
    if len(a) != device.n:
        raise ValueError("observable index length must equal the copy count")
    base_kind = "Z" if spec.kind == "Z" else "X"
    base = device.observable_matrix(base_kind, a)
    if spec.kind == "Xtilde":

        def sign(theta_vec, y_vec, d_vec):
            return (-1.0) ** device.u_vector(theta_vec, d_vec, a)

    else:

        def sign(theta_vec, y_vec, d_vec):
            return 1.0

    return BlockObservable(spec=spec, base=base, sign=sign)


def success_relations_report(device: Device) -> dict:
    """Gaps in the three observable success relations, for every (a, v)."""
    n = device.n
    rows = {"z": [], "x": [], "xtilde": []}
    max_gap = 0.0
    theta0 = (0,) * n
    theta1 = (1,) * n
    sigma0 = device.sigma_blocks(theta0)
    sigma1 = device.sigma_blocks(theta1)
    decoded0 = {k: device.decode_block(theta0, k[0], k[1]) for k in sigma0.blocks}
    decoded1 = {k: device.decode_block(theta1, k[0], k[1]) for k in sigma1.blocks}
    eye = np.eye(device.block_dim, dtype=complex)

    def _partial_rows(sigma, decoded, proj, a, v):
        lhs = rhs = 0.0
        for key, block in sigma.blocks.items():
            if sum(x & y for x, y in zip(decoded[key], a)) % 2 != v:
                continue
            lhs += float(np.trace(proj @ block).real)
            rhs += float(np.trace(block).real)
        return lhs, rhs

    for a in itertools.product((0, 1), repeat=n):
        z = device.observable_matrix("Z", a)
        x = device.observable_matrix("X", a)
        for v in (0, 1):
            lhs, rhs = _partial_rows(sigma0, decoded0, 0.5 * (eye + (-1.0) ** v * z), a, v)
            gap = abs(lhs - rhs)
            rows["z"].append({"a": list(a), "v": v, "lhs": lhs, "rhs": rhs, "gap": gap})
            max_gap = max(max_gap, gap)

            lhs, rhs = _partial_rows(sigma1, decoded1, 0.5 * (eye + (-1.0) ** v * x), a, v)
            gap = abs(lhs - rhs)
            rows["x"].append({"a": list(a), "v": v, "lhs": lhs, "rhs": rhs, "gap": gap})
            max_gap = max(max_gap, gap)

        lhs = 0.0
        for (y_vec, d_vec), block in sigma1.blocks.items():
            sign = (-1.0) ** device.u_vector(theta1, d_vec, a)
            lhs += sign * float(np.trace(x @ block).real)
        gap = abs(lhs - 1.0)
        rows["xtilde"].append({"a": list(a), "lhs": lhs, "rhs": 1.0, "gap": gap})
        max_gap = max(max_gap, gap)
    return {"rows": rows, "max_gap": max_gap, "gamma": gammas(device)}


def pauli_relation_value(device: Device, a: Sequence[int], b: Sequence[int]) -> complex:
    """Tr[Z(a) Xt(b) Z(a) Xt(b) sigma^(1...1)], evaluated blockwise."""
    a, b = tuple(a), tuple(b)
    n = device.n
    theta1 = (1,) * n
    z = device.observable_matrix("Z", a)
    x = device.observable_matrix("X", b)
    product = z @ x @ z @ x
    sigma = device.sigma_blocks(theta1)
    total = 0.0 + 0.0j
    for (y_vec, d_vec), block in sigma.blocks.items():
        sign = (-1.0) ** device.u_vector(theta1, d_vec, b)
        total += sign * sign * np.trace(product @ block)
    return complex(total)


def pauli_relation_grid(device: Device) -> dict:
    """All 4^n relation values plus the worst deviation from (-1)^(a.b)."""
    n = device.n
    theta1 = (1,) * n
    sigma = device.sigma_blocks(theta1)
    keys, stacked = sigma.stacked()
    u_bits = np.array(
        [[device.copy_u(i, d_vec[i]) for i in range(n)] for (_, d_vec) in keys], dtype=int
    )
    entries = []
    worst = 0.0
    for a in itertools.product((0, 1), repeat=n):
        z = device.observable_matrix("Z", a)
        for b in itertools.product((0, 1), repeat=n):
            x = device.observable_matrix("X", b)
            product = z @ x @ z @ x
            signs = (-1.0) ** (u_bits @ np.array(b))
            traces = np.einsum("ij,bji->b", product, stacked)
            value = complex(np.sum(signs * signs * traces))
            expected = (-1.0) ** (sum(ai & bi for ai, bi in zip(a, b)) % 2)
            dev_abs = abs(value - expected)
            worst = max(worst, dev_abs)
            entries.append(
                {"a": list(a), "b": list(b), "value_re": value.real, "value_im": value.imag,
                 "expected": expected, "deviation": dev_abs}
            )
    return {"entries": entries, "max_deviation": worst, "n": n}


def anticommutation_value(device: Device, i: int) -> float:
    """Tr[Z_i Xt_i Z_i sigma^(e_i)] where e_i has a single claw-free copy."""
    n = device.n
    if not 0 <= i < n:
        raise ValueError(f"copy index {i} out of range")
    theta = tuple(1 if j == i else 0 for j in range(n))
    e_i = tuple(1 if j == i else 0 for j in range(n))
    z = device.observable_matrix("Z", e_i)
    x = device.observable_matrix("X", e_i)
    product = z @ x @ z
    sigma = device.sigma_blocks(theta)
    total = 0.0
    for (y_vec, d_vec), block in sigma.blocks.items():
        sign = (-1.0) ** device.copy_u(i, d_vec[i])
        total += sign * float(np.trace(product @ block).real)
    return total


def state_dep_distance(a, b, psi) -> float:
    """Tr[(A - B)^dag (A - B) psi] for matrices A, B and a state psi."""
    a = a.entries if isinstance(a, qcore.LinearOperator) else np.asarray(a, dtype=complex)
    b = b.entries if isinstance(b, qcore.LinearOperator) else np.asarray(b, dtype=complex)
    if isinstance(psi, qcore.DensityMatrix):
        psi = psi.entries
    psi = np.asarray(psi, dtype=complex)
    if a.shape != b.shape or a.shape[0] != psi.shape[0]:
        raise ValueError("dimension mismatch")
    diff = a - b
    return float(np.trace(diff.conj().T @ diff @ psi).real)


# -- rounding isometries ---------------------------------------------------


def _epr_vector(n: int) -> np.ndarray:
    dim = 2**n
    vec = np.zeros(dim * dim, dtype=complex)
    for z in range(dim):
        vec[z * dim + z] = 1.0
    return vec / np.sqrt(dim)


@dataclass
class BlockIsometry:
    """Blockwise isometry from the device space into device x A x Q."""

    device: Device
    use_tilde: bool
    base_terms: list  # [(pauli_vec_column, X(a)Z(b) matrix, a)] precomputed

    def matrix_for(self, theta_vec, y_vec, d_vec) -> np.ndarray:
        n = self.device.n
        out = None
        for w_col, op, a in self.base_terms:
            sign = 1.0
            if self.use_tilde:
                sign = (-1.0) ** self.device.u_vector(theta_vec, d_vec, a)
            term = sign * np.kron(op, w_col)
            out = term if out is None else out + term
        return out / 2**n


def rounding_isometry(device: Device, use_tilde: bool) -> BlockIsometry:
    """The explicit Pauli-twirl isometry over all 4^n observable pairs.

    Normalization 2^-n * sum (not the plain average) makes V^dag V = 1.
    """
    n = device.n
    if n > 2:
        raise ValueError("rounding isometries are limited to 2 copies")
    epr = _epr_vector(n)
    terms = []
    for a in itertools.product((0, 1), repeat=n):
        x = device.observable_matrix("X", a)
        for b in itertools.product((0, 1), repeat=n):
            z = device.observable_matrix("Z", b)
            pauli = qcore.pauli_string(a, b).entries
            w = (np.kron(pauli, np.eye(2**n, dtype=complex)) @ epr).reshape(-1, 1)
            terms.append((w, x @ z, a))
    return BlockIsometry(device=device, use_tilde=use_tilde, base_terms=terms)


def isometry_relation_gap(device: Device) -> float:
    """Max operator-norm gap of V = sigma_Z(u)_A sigma_Z(u)_Q Vtilde per block."""
    n = device.n
    theta1 = (1,) * n
    v_iso = rounding_isometry(device, use_tilde=False)
    vt_iso = rounding_isometry(device, use_tilde=True)
    sigma = device.sigma_blocks(theta1)
    worst = 0.0
    zeros = (0,) * n
    for (y_vec, d_vec) in sigma.blocks:
        u_vec = tuple(device.copy_u(i, d_vec[i]) for i in range(n))
        v_mat = v_iso.matrix_for(theta1, y_vec, d_vec)
        vt_mat = vt_iso.matrix_for(theta1, y_vec, d_vec)
        sz_u = qcore.pauli_string(zeros, u_vec).entries
        corr = np.kron(np.eye(device.block_dim, dtype=complex), np.kron(sz_u, sz_u))
        gap = float(np.linalg.norm(v_mat - corr @ vt_mat, ord=2))
        worst = max(worst, gap)
    return worst


def _partial_trace_last(matrix: np.ndarray, rest_dim: int, traced_dim: int) -> np.ndarray:
    t = matrix.reshape(rest_dim, traced_dim, rest_dim, traced_dim)
    return np.einsum("ikjk->ij", t)


def bb84_report(device: Device, theta_vec: Sequence[int]) -> dict:
    """Distance of the rounded state from the BB84 x side-state product form.

    For each decoded string v the report compares V sigma^(theta, v) V^dag
    against (BB84 states on Q) tensor alpha with alpha the Q-marginal,
    blockwise.  The spread entry compares the ancillary alpha states across
    different v after summing out the classical block index (keeping it
    would make the comparison trivially maximal: different v live on
    disjoint classical outcomes).
    """
    n = device.n
    theta_vec = tuple(theta_vec)
    v_iso = rounding_isometry(device, use_tilde=False)
    per_v = []
    alphas = {}
    q_dim = 2**n
    for v_vec in itertools.product((0, 1), repeat=n):
        part = sigma_for_v(device, theta_vec, v_vec)
        # BB84 target on Q for this v
        kets = []
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        for theta, v in zip(theta_vec, v_vec):
            ket = np.eye(2, dtype=complex)[:, v]
            if theta:
                ket = h @ ket
            kets.append(ket.reshape(2, 1))
        bb84_ket = _kron_all(kets).reshape(-1)
        bb84 = np.outer(bb84_ket, bb84_ket.conj())
        distance = 0.0
        alpha_sum = None
        weight = 0.0
        for (y_vec, d_vec), block in part.blocks.items():
            v_mat = v_iso.matrix_for(theta_vec, y_vec, d_vec)
            rho = v_mat @ block @ v_mat.conj().T
            rest_dim = rho.shape[0] // q_dim
            alpha = _partial_trace_last(rho, rest_dim, q_dim)
            target = np.kron(alpha, bb84)
            distance += 0.5 * qcore.trace_norm(rho - target)
            alpha_sum = alpha if alpha_sum is None else alpha_sum + alpha
            weight += float(np.trace(block).real)
        per_v.append({"v": list(v_vec), "trace_distance": distance, "weight": weight})
        if alpha_sum is not None and weight > 1e-14:
            alphas[v_vec] = alpha_sum / weight
    spread = 0.0
    keys = list(alphas)
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            spread = max(spread, 0.5 * qcore.trace_norm(alphas[keys[i]] - alphas[keys[j]]))
    return {
        "theta": list(theta_vec),
        "per_v": per_v,
        "max_distance": max((row["trace_distance"] for row in per_v), default=0.0),
        "alpha_spread": spread,
    }


def validate_device(device: Device) -> dict:
    """Structural checks: normalization, projectivity, Kraus completeness."""
    n = device.n
    report = {}
    worst_norm = 0.0
    for theta_vec in itertools.product((0, 1), repeat=n):
        total = sum(np.trace(b).real for b in device.psi_blocks(theta_vec).values())
        worst_norm = max(worst_norm, abs(total - 1.0))
    report["state_normalization_gap"] = float(worst_norm)

    worst_proj = 0.0
    eye = np.eye(device.block_dim, dtype=complex)
    for q in (0, 1):
        total = np.zeros_like(eye)
        for v_vec in itertools.product((0, 1), repeat=n):
            p = device.question_projector(q, v_vec)
            worst_proj = max(worst_proj, float(np.max(np.abs(p @ p - p))))
            total += p
        worst_proj = max(worst_proj, float(np.max(np.abs(total - eye))))
    report["question_projectivity_gap"] = worst_proj

    # Kraus completeness of the compressed equation measurement, per copy
    worst_kraus = 0.0
    for mode in (0, 1):
        for i in range(n):
            for y, _, _ in device.copy_y_list(mode, i):
                acc = np.zeros((2, 2), dtype=complex)
                for d in range(2**device.width):
                    k = device.copy_kraus(mode, i, y, d)
                    acc += k.conj().T @ k
                worst_kraus = max(worst_kraus, float(np.max(np.abs(acc - np.eye(2)))))
    report["equation_kraus_gap"] = worst_kraus

    # preimage measurement is an explicit projector family per block
    worst_pre = 0.0
    for mode in (0, 1):
        theta_vec = (mode,) * n
        for y_vec in device.psi_blocks(theta_vec):
            total = np.zeros((device.committed_dim, device.committed_dim), dtype=complex)
            for b_vec in itertools.product((0, 1), repeat=n):
                idx = sum(b << (n - 1 - i) for i, b in enumerate(b_vec))
                proj = np.zeros_like(total)
                proj[idx, idx] = 1.0
                total += proj
            worst_pre = max(worst_pre, float(np.max(np.abs(total - np.eye(device.committed_dim)))))
    report["preimage_projectivity_gap"] = worst_pre
    return report


def accept_reject_consistency(device: Device) -> dict:
    """The same Hadamard-round pass probability along two code paths.

    Path one evaluates the protocol check directly on the device's
    measurement outcomes; path two reassembles it from partial states and
    observable projectors.
    """
    n = device.n
    out = {}
    for theta in (0, 1):
        theta_vec = (theta,) * n
        sigma = device.sigma_blocks(theta_vec)
        direct = 0.0
        for (y_vec, d_vec), block in sigma.blocks.items():
            correct = device.decode_block(theta_vec, y_vec, d_vec)
            direct += float(np.trace(device.question_projector(theta, correct) @ block).real)

        via_observables = 0.0
        eye = np.eye(device.block_dim, dtype=complex)
        for v_vec in itertools.product((0, 1), repeat=n):
            part = sigma_for_v(device, theta_vec, v_vec)
            proj = eye.copy()
            for i in range(n):
                e_i = tuple(1 if j == i else 0 for j in range(n))
                obs = device.observable_matrix("Z" if theta == 0 else "X", e_i)
                proj = proj @ (0.5 * (eye + (-1.0) ** v_vec[i] * obs))
            via_observables += float(
                sum(np.trace(proj @ m).real for m in part.blocks.values())
            )
        out[theta] = {"direct": direct, "via_observables": via_observables,
                      "gap": abs(direct - via_observables)}
    return out
