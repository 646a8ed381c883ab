"""Dense statevector simulation: states, gates, QFT, measurement, sampling.

Conventions used by every module built on top of this one:

* A state over ``n`` qubits is a length ``2**n`` complex128 vector.
* Bit ``k`` of a basis index is the state of qubit ``k``; qubit 0 is the
  least significant bit.  Printed bitstrings are most-significant-first.
* States are values: operations return new states and never mutate their
  inputs.  All randomness comes from explicitly seeded generators.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_QUBIT_CAP = 20  # 2**20 amplitudes ~ 16 MiB of complex128
ATOL = 1e-10

_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Amplitude vector over ``n_qubits`` qubits (normalized to 1)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if len(amps) != 2 ** self.n_qubits:
            raise ValueError(
                f"amplitude vector has length {len(amps)}, "
                f"expected {2 ** self.n_qubits} for {self.n_qubits} qubits"
            )
        norm2 = float(np.sum(np.abs(amps) ** 2))
        if abs(norm2 - 1.0) > 1e-8:
            raise ValueError(f"state is not normalized: sum |a_i|^2 = {norm2!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class Unitary2:
    """A 2x2 unitary; unitarity is checked at construction."""

    m00: complex
    m01: complex
    m10: complex
    m11: complex

    def __post_init__(self):
        u = self.matrix()
        err = np.max(np.abs(u.conj().T @ u - np.eye(2)))
        if err > ATOL:
            raise ValueError(f"matrix is not unitary (max |U†U - I| = {err:.3e})")

    def matrix(self) -> np.ndarray:
        return np.array([[self.m00, self.m01], [self.m10, self.m11]], dtype=np.complex128)

    def dagger(self) -> "Unitary2":
        m = self.matrix().conj().T
        return Unitary2(m[0, 0], m[0, 1], m[1, 0], m[1, 1])


ROTATION_KINDS = ("RX", "RY", "RZ")
FIXED_KINDS = ("H", "S", "T", "X", "Z")


def standard_gate(kind: str, angle: float | None = None) -> Unitary2:
    """Return the catalog single-qubit gate.

    ``angle`` (radians) is required for RX/RY/RZ and rejected otherwise.
    Rotations use the half-angle convention R(theta) = exp(-i*theta*P/2).
    """
    k = kind.upper()
    if k in ROTATION_KINDS:
        if angle is None:
            raise ValueError(f"{k} requires an angle")
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        if k == "RX":
            return Unitary2(c, -1j * s, -1j * s, c)
        if k == "RY":
            return Unitary2(c, -s, s, c)
        return Unitary2(cmath.exp(-0.5j * angle), 0, 0, cmath.exp(0.5j * angle))
    if angle is not None:
        raise ValueError(f"{k} takes no angle")
    if k == "H":
        return Unitary2(_SQRT_HALF, _SQRT_HALF, _SQRT_HALF, -_SQRT_HALF)
    if k == "S":
        return Unitary2(1, 0, 0, 1j)
    if k == "T":
        return Unitary2(1, 0, 0, cmath.exp(0.25j * math.pi))
    if k == "X":
        return Unitary2(0, 1, 1, 0)
    if k == "Z":
        return Unitary2(1, 0, 0, -1)
    raise ValueError(f"unknown gate kind {kind!r}")


def phase_gate(angle: float) -> Unitary2:
    """diag(1, e^{i*angle}) — the controlled-phase building block of the QFT."""
    return Unitary2(1, 0, 0, cmath.exp(1j * angle))


@dataclass(frozen=True)
class GateOp:
    """A 2x2 unitary applied to ``target``, conditioned on all ``controls`` being 1."""

    gate: Unitary2
    target: int
    controls: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        if self.target in self.controls:
            raise ValueError(f"target {self.target} collides with controls {self.controls}")
        if len(set(self.controls)) != len(self.controls):
            raise ValueError(f"duplicate control indices {self.controls}")

    def indices(self) -> tuple[int, ...]:
        return (self.target, *self.controls)


@dataclass(frozen=True)
class SwapOp:
    """Exchange qubits ``a`` and ``b``, conditioned on ``controls`` (CSWAP when one)."""

    a: int
    b: int
    controls: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        ids = (self.a, self.b, *self.controls)
        if len(set(ids)) != len(ids):
            raise ValueError(f"swap indices must be distinct, got {ids}")

    def indices(self) -> tuple[int, ...]:
        return (self.a, self.b, *self.controls)


@dataclass(frozen=True)
class QftOp:
    """QFT (or inverse) on a contiguous ascending register."""

    qubits: tuple[int, ...]
    inverse: bool = False

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if not self.qubits:
            raise ValueError("QFT register must be non-empty")
        if list(self.qubits) != list(range(self.qubits[0], self.qubits[0] + len(self.qubits))):
            raise ValueError(f"QFT register must be contiguous ascending, got {self.qubits}")

    def indices(self) -> tuple[int, ...]:
        return self.qubits


CircuitOp = GateOp | SwapOp | QftOp


@dataclass(frozen=True)
class Circuit:
    """An ordered list of operations on a fixed number of wires."""

    n_qubits: int
    ops: tuple[CircuitOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            bad = [q for q in op.indices() if not 0 <= q < self.n_qubits]
            if bad:
                raise ValueError(f"op {op} uses qubits {bad} outside 0..{self.n_qubits - 1}")


def new_basis_state(n_qubits: int, index: int, cap: int = DEFAULT_QUBIT_CAP) -> QuantumState:
    """The computational basis state |index> on ``n_qubits`` qubits."""
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be positive, got {n_qubits}")
    if n_qubits > cap:
        raise ValueError(f"n_qubits {n_qubits} exceeds the resource cap {cap}")
    if not 0 <= index < 2 ** n_qubits:
        raise ValueError(f"basis index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(2 ** n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return QuantumState(n_qubits, amps)


def from_amplitudes(amplitudes, cap: int = DEFAULT_QUBIT_CAP) -> QuantumState:
    """Wrap an explicit amplitude vector (length must be a power of two)."""
    amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
    n = int(math.log2(len(amps)))
    if 2 ** n != len(amps):
        raise ValueError(f"length {len(amps)} is not a power of two")
    if n > cap:
        raise ValueError(f"{n} qubits exceeds the resource cap {cap}")
    return QuantumState(n, amps)


def _check_indices(state: QuantumState, indices) -> None:
    for q in indices:
        if not 0 <= q < state.n_qubits:
            raise ValueError(f"qubit {q} out of range for {state.n_qubits}-qubit state")


def apply_gate(state: QuantumState, op: GateOp) -> QuantumState:
    """Apply a (possibly multi-controlled) single-qubit gate."""
    _check_indices(state, op.indices())
    amps = state.amplitudes.copy()
    idx = np.arange(state.dim)
    mask = (idx >> op.target) & 1 == 0
    for c in op.controls:
        mask &= (idx >> c) & 1 == 1
    i0 = idx[mask]
    i1 = i0 | (1 << op.target)
    a, b = amps[i0], amps[i1]
    g = op.gate
    amps[i0] = g.m00 * a + g.m01 * b
    amps[i1] = g.m10 * a + g.m11 * b
    return QuantumState(state.n_qubits, amps)


def apply_swap(state: QuantumState, op: SwapOp) -> QuantumState:
    """Exchange the ``a`` and ``b`` bits of every basis index passing the controls."""
    _check_indices(state, op.indices())
    amps = state.amplitudes.copy()
    idx = np.arange(state.dim)
    mask = ((idx >> op.a) & 1 == 1) & ((idx >> op.b) & 1 == 0)
    for c in op.controls:
        mask &= (idx >> c) & 1 == 1
    i = idx[mask]
    j = i ^ (1 << op.a) ^ (1 << op.b)
    amps[i], amps[j] = amps[j].copy(), amps[i].copy()
    return QuantumState(state.n_qubits, amps)


def apply_cswap(state: QuantumState, control: int, a: int, b: int) -> QuantumState:
    """Controlled swap of qubits ``a`` and ``b``."""
    return apply_swap(state, SwapOp(a, b, (control,)))


def _qft_gate_sequence(qubits: tuple[int, ...], inverse: bool):
    """Textbook QFT as (GateOp | SwapOp) list; daggered and reversed when inverse."""
    m = len(qubits)
    ops: list[CircuitOp] = []
    for w in reversed(range(m)):
        ops.append(GateOp(standard_gate("H"), qubits[w]))
        for j in reversed(range(w)):
            ops.append(GateOp(phase_gate(2 * math.pi / 2 ** (w - j + 1)), qubits[w], (qubits[j],)))
    for k in range(m // 2):
        ops.append(SwapOp(qubits[k], qubits[m - 1 - k]))
    if inverse:
        daggered: list[CircuitOp] = []
        for op in reversed(ops):
            if isinstance(op, GateOp):
                daggered.append(GateOp(op.gate.dagger(), op.target, op.controls))
            else:
                daggered.append(op)
        return daggered
    return ops


def apply_qft(state: QuantumState, qubits, inverse: bool = False) -> QuantumState:
    """QFT on a register: |j> -> 2^{-m/2} sum_k exp(+2*pi*i*j*k/2^m) |k>.

    The register value takes bit ``k`` from the k-th listed qubit; the
    final swap network is included so the map equals the DFT matrix.
    """
    op = QftOp(tuple(qubits), inverse)
    _check_indices(state, op.qubits)
    for g in _qft_gate_sequence(op.qubits, inverse):
        state = apply_gate(state, g) if isinstance(g, GateOp) else apply_swap(state, g)
    return state


def apply_unitary(state: QuantumState, matrix: np.ndarray, qubits, controls=()) -> QuantumState:
    """Apply a dense 2^m x 2^m unitary to the (not necessarily contiguous) register
    ``qubits``, conditioned on ``controls``.  Register bit k comes from qubits[k]."""
    qubits = tuple(qubits)
    controls = tuple(controls)
    ids = qubits + controls
    if len(set(ids)) != len(ids):
        raise ValueError(f"register/control indices must be distinct, got {ids}")
    _check_indices(state, ids)
    m = len(qubits)
    u = np.asarray(matrix, dtype=np.complex128)
    if u.shape != (2 ** m, 2 ** m):
        raise ValueError(f"matrix shape {u.shape} does not match a {m}-qubit register")

    idx = np.arange(state.dim)
    base_mask = np.ones(state.dim, dtype=bool)
    for q in qubits:
        base_mask &= (idx >> q) & 1 == 0
    for c in controls:
        base_mask &= (idx >> c) & 1 == 1
    bases = idx[base_mask]
    offsets = np.array([sum(((k >> j) & 1) << qubits[j] for j in range(m)) for k in range(2 ** m)])
    positions = bases[:, None] + offsets[None, :]  # (n_bases, 2^m)

    amps = state.amplitudes.copy()
    amps[positions] = amps[positions] @ u.T
    return QuantumState(state.n_qubits, amps)


def apply_circuit(state: QuantumState, circuit: Circuit) -> QuantumState:
    if circuit.n_qubits != state.n_qubits:
        raise ValueError(
            f"circuit is on {circuit.n_qubits} qubits but state has {state.n_qubits}"
        )
    for op in circuit.ops:
        if isinstance(op, GateOp):
            state = apply_gate(state, op)
        elif isinstance(op, SwapOp):
            state = apply_swap(state, op)
        else:
            state = apply_qft(state, op.qubits, op.inverse)
    return state


def probabilities(state: QuantumState) -> np.ndarray:
    """p_i = |a_i|^2 over ascending basis index."""
    return np.abs(state.amplitudes) ** 2


def expectation_z(state: QuantumState, qubit: int) -> float:
    """<Z> on one qubit: sum_i (-1)^{bit(i, qubit)} |a_i|^2."""
    _check_indices(state, (qubit,))
    signs = 1.0 - 2.0 * ((np.arange(state.dim) >> qubit) & 1)
    return float(np.sum(signs * np.abs(state.amplitudes) ** 2))


def marginal_probability(state: QuantumState, qubit: int) -> float:
    """Probability that measuring ``qubit`` alone yields 1."""
    _check_indices(state, (qubit,))
    bits = (np.arange(state.dim) >> qubit) & 1
    return float(np.sum(np.abs(state.amplitudes[bits == 1]) ** 2))


@dataclass(frozen=True)
class MeasurementOutcome:
    """One full computational-basis measurement result."""

    bits: tuple[int, ...]  # bits[k] = observed state of qubit k
    probability: float

    @property
    def index(self) -> int:
        return sum(b << k for k, b in enumerate(self.bits))

    def bitstring(self) -> str:
        """Most-significant-qubit first, e.g. '01' for |q1=0, q0=1>."""
        return "".join(str(b) for b in reversed(self.bits))


def _index_bits(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> k) & 1 for k in range(n))


def _draw_indices(probs: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    # Inverse CDF over ascending basis index: deterministic given the draw.
    cdf = np.cumsum(probs)
    u = rng.random(count)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)


def measure_all(state: QuantumState, rng_seed: int) -> tuple[MeasurementOutcome, QuantumState]:
    """Sample one outcome (inverse-CDF, ascending index) and collapse."""
    probs = probabilities(state)
    rng = np.random.default_rng(rng_seed)
    k = int(_draw_indices(probs, rng, 1)[0])
    outcome = MeasurementOutcome(_index_bits(k, state.n_qubits), float(probs[k]))
    return outcome, new_basis_state(state.n_qubits, k, cap=state.n_qubits)


def sample_counts(state: QuantumState, shots: int, rng_seed: int) -> dict[int, int]:
    """Histogram of ``shots`` independent measurements; the state is untouched."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = probabilities(state)
    rng = np.random.default_rng(rng_seed)
    draws = _draw_indices(probs, rng, shots)
    values, counts = np.unique(draws, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


# --- circuit text format ----------------------------------------------------
#
# One op per line: `GATE [angle] qubits...`, `#` comments, radians.
#   H 0 | S 1 | T 0 | X 2 | Z 0
#   RX 0.5 1 | RY 1.2 0 | RZ 1.5707963 2
#   CNOT control target | TOFFOLI c1 c2 target
#   SWAP a b | CSWAP control a b
#   QFT 0 1 2 | IQFT 0 1 2


def parse_circuit(text: str, n_qubits: int | None = None) -> Circuit:
    """Parse the one-op-per-line text format; infer width when not given."""
    ops: list[CircuitOp] = []
    max_q = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        name = tokens[0].upper()
        try:
            if name in ROTATION_KINDS:
                angle = float(tokens[1])
                (target,) = (int(t) for t in tokens[2:])
                ops.append(GateOp(standard_gate(name, angle), target))
            elif name in FIXED_KINDS:
                (target,) = (int(t) for t in tokens[1:])
                ops.append(GateOp(standard_gate(name), target))
            elif name == "CNOT":
                control, target = (int(t) for t in tokens[1:])
                ops.append(GateOp(standard_gate("X"), target, (control,)))
            elif name in ("TOFFOLI", "CCX"):
                c1, c2, target = (int(t) for t in tokens[1:])
                ops.append(GateOp(standard_gate("X"), target, (c1, c2)))
            elif name == "SWAP":
                a, b = (int(t) for t in tokens[1:])
                ops.append(SwapOp(a, b))
            elif name == "CSWAP":
                control, a, b = (int(t) for t in tokens[1:])
                ops.append(SwapOp(a, b, (control,)))
            elif name in ("QFT", "IQFT"):
                qubits = tuple(int(t) for t in tokens[1:])
                ops.append(QftOp(qubits, inverse=(name == "IQFT")))
            else:
                raise ValueError(f"unknown gate {tokens[0]!r}")
        except (ValueError, TypeError) as exc:
            raise ValueError(f"line {lineno}: {raw.strip()!r}: {exc}") from None
        max_q = max(max_q, *ops[-1].indices())
    width = n_qubits if n_qubits is not None else max_q + 1
    return Circuit(max(width, 1), tuple(ops))


def format_circuit(circuit: Circuit) -> str:
    """Serialize a circuit back to the text format (catalog ops only)."""
    lines = []
    for op in circuit.ops:
        if isinstance(op, QftOp):
            lines.append(("IQFT " if op.inverse else "QFT ") + " ".join(map(str, op.qubits)))
        elif isinstance(op, SwapOp):
            if len(op.controls) == 1:
                lines.append(f"CSWAP {op.controls[0]} {op.a} {op.b}")
            elif not op.controls:
                lines.append(f"SWAP {op.a} {op.b}")
            else:
                raise ValueError(f"no text form for multi-controlled swap {op}")
        else:
            lines.append(_format_gate_op(op))
    return "\n".join(lines) + ("\n" if lines else "")


def _format_gate_op(op: GateOp) -> str:
    m = op.gate.matrix()
    for kind in FIXED_KINDS:
        if np.allclose(m, standard_gate(kind).matrix(), atol=1e-12):
            if kind == "X" and len(op.controls) == 1:
                return f"CNOT {op.controls[0]} {op.target}"
            if kind == "X" and len(op.controls) == 2:
                return f"TOFFOLI {op.controls[0]} {op.controls[1]} {op.target}"
            if not op.controls:
                return f"{kind} {op.target}"
    if not op.controls:
        for kind in ROTATION_KINDS:
            angle = _rotation_angle(m, kind)
            if angle is not None:
                return f"{kind} {angle!r} {op.target}"
    raise ValueError(f"no text form for {op}")


def _rotation_angle(m: np.ndarray, kind: str) -> float | None:
    # Recover theta from the matrix if it matches R_kind(theta) to 1e-12.
    if kind == "RZ":
        theta = 2 * np.angle(m[1, 1])
    else:
        c, s = m[0, 0].real, (m[1, 0].real if kind == "RY" else -m[0, 1].imag)
        theta = 2 * math.atan2(s, c)
    if np.allclose(m, standard_gate(kind, theta).matrix(), atol=1e-12):
        return float(theta)
    return None
