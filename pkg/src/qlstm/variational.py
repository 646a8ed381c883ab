"""Parameterized circuits, the mean-squared-error cost on a Z readout,
parameter-shift / finite-difference gradients, and a plain gradient-descent
training loop.

The readout observable is always Z on qubit 0, so predictions live in
[-1, 1].  Circuits follow a fixed shape: an optional input-encoding prefix
(H on every wire, then Ry(2*arctan(x_j)) per wire), then rotation layers
interleaved with a CNOT entangler.

A batched evaluator runs many instances of one circuit shape side by side
(one row per instance).  Every public operation is defined in terms of it,
so scalar and vectorized paths agree bit for bit; the gate-by-gate
simulator in :mod:`qlstm.statevector` serves as an independent cross-check
in the tests.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import statevector as sv

PARAM_SHIFT = math.pi / 2
CENTRAL_DIFF_STEP = 1e-5
STOP_TOL = 1e-9

_U64 = (1 << 64) - 1


def seeded_rng(*parts: int) -> np.random.Generator:
    """Generator keyed on a tuple of integers (negative values allowed)."""
    return np.random.default_rng(np.random.SeedSequence([int(p) & _U64 for p in parts]))


class DivergenceError(RuntimeError):
    """Training produced a non-finite cost."""


@dataclass(frozen=True)
class RotationPlacement:
    """One parameterized rotation: which wire, which axis, which parameter slot."""

    wire: int
    axis: str  # "RX" | "RY" | "RZ"
    slot: int

    def __post_init__(self):
        if self.axis not in sv.ROTATION_KINDS:
            raise ValueError(f"axis must be one of {sv.ROTATION_KINDS}, got {self.axis!r}")


@dataclass(frozen=True)
class AnsatzLayer:
    rotations: tuple[RotationPlacement, ...]
    entangler: str = "line"  # "line" | "ring" | "none"

    def __post_init__(self):
        object.__setattr__(self, "rotations", tuple(self.rotations))
        if self.entangler not in ("line", "ring", "none"):
            raise ValueError(f"unknown entangler {self.entangler!r}")


@dataclass(frozen=True)
class AnsatzSpec:
    """Circuit layout: encoding prefix plus rotation/entangler layers.

    ``encoding`` is "angle" (H then Ry(2*arctan(x_j)) on each wire, input
    arity = n_qubits) or "none" (no prefix, no input).
    """

    n_qubits: int
    layers: tuple[AnsatzLayer, ...]
    n_params: int
    encoding: str = "angle"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if self.encoding not in ("angle", "none"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        used = set()
        for layer in self.layers:
            for rot in layer.rotations:
                if not 0 <= rot.wire < self.n_qubits:
                    raise ValueError(f"rotation wire {rot.wire} out of range")
                if not 0 <= rot.slot < self.n_params:
                    raise ValueError(f"parameter slot {rot.slot} out of range")
                used.add(rot.slot)
        if used != set(range(self.n_params)):
            missing = sorted(set(range(self.n_params)) - used)
            raise ValueError(f"parameter slots never used: {missing}")

    @property
    def input_arity(self) -> int:
        return self.n_qubits if self.encoding == "angle" else 0

    def placements(self) -> tuple[RotationPlacement, ...]:
        return tuple(rot for layer in self.layers for rot in layer.rotations)


def hardware_efficient_ansatz(
    n_qubits: int, n_layers: int = 2, encoding: str = "angle"
) -> AnsatzSpec:
    """Default shape: per layer, Ry then Rz on every wire plus a CNOT line."""
    layers = []
    slot = 0
    for _ in range(n_layers):
        rots = []
        for axis in ("RY", "RZ"):
            for w in range(n_qubits):
                rots.append(RotationPlacement(w, axis, slot))
                slot += 1
        layers.append(AnsatzLayer(tuple(rots), "line" if n_qubits > 1 else "none"))
    return AnsatzSpec(n_qubits, tuple(layers), slot, encoding)


def encoding_angle(x):
    """Input value -> rotation angle; bounded, injective, 0 at x = 0."""
    return 2.0 * np.arctan(x)


def _entangler_pairs(n_qubits: int, entangler: str) -> list[tuple[int, int]]:
    if entangler == "none":
        return []
    pairs = [(w, w + 1) for w in range(n_qubits - 1)]
    if entangler == "ring" and n_qubits > 2:
        pairs.append((n_qubits - 1, 0))
    return pairs


def bind(spec: AnsatzSpec, params, input=()) -> sv.Circuit:
    """Bind parameters and input values into a concrete circuit."""
    params = np.asarray(params, dtype=float).reshape(-1)
    x = np.asarray(input, dtype=float).reshape(-1)
    if len(params) != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {len(params)}")
    if len(x) != spec.input_arity:
        raise ValueError(f"expected input of length {spec.input_arity}, got {len(x)}")
    if len(x) and not np.all(np.isfinite(x)):
        raise ValueError("input values must be finite")

    ops: list[sv.CircuitOp] = []
    if spec.encoding == "angle":
        for w in range(spec.n_qubits):
            ops.append(sv.GateOp(sv.standard_gate("H"), w))
        for w in range(spec.n_qubits):
            ops.append(sv.GateOp(sv.standard_gate("RY", float(encoding_angle(x[w]))), w))
    for layer in spec.layers:
        for rot in layer.rotations:
            ops.append(sv.GateOp(sv.standard_gate(rot.axis, float(params[rot.slot])), rot.wire))
        for c, t in _entangler_pairs(spec.n_qubits, layer.entangler):
            ops.append(sv.GateOp(sv.standard_gate("X"), t, (c,)))
    return sv.Circuit(spec.n_qubits, tuple(ops))


# --- batched evaluation -------------------------------------------------------
#
# Row r of the batch is one full circuit instance: encoding angles
# enc_angles[r] and rotation angles rot_angles[r] in placement order.
# Elementwise kernels keep each row's arithmetic identical to a
# single-row run, so results do not depend on how rows are batched.


def _bit_pairs(n_qubits: int, wire: int):
    idx = np.arange(2**n_qubits)
    i0 = idx[(idx >> wire) & 1 == 0]
    return i0, i0 | (1 << wire)


def _run_rows(spec: AnsatzSpec, rot_angles: np.ndarray, enc_angles: np.ndarray | None):
    """Amplitude matrix (B, 2^n) for B instances of the spec's circuit shape."""
    n = spec.n_qubits
    B = rot_angles.shape[0]
    if spec.encoding == "angle" and (enc_angles is None or enc_angles.shape != (B, n)):
        raise ValueError("enc_angles must be (B, n_qubits) for angle encoding")
    psi = np.zeros((B, 2**n), dtype=np.complex128)
    psi[:, 0] = 1.0

    def rotate(wire, axis, angles):
        i0, i1 = _bit_pairs(n, wire)
        a, b = psi[:, i0], psi[:, i1]
        if axis == "RZ":
            phase = np.exp(0.5j * angles)[:, None]
            psi[:, i0] = a / phase
            psi[:, i1] = b * phase
            return
        c = np.cos(angles / 2)[:, None]
        s = np.sin(angles / 2)[:, None]
        if axis == "RY":
            psi[:, i0], psi[:, i1] = c * a - s * b, s * a + c * b
        else:  # RX
            psi[:, i0], psi[:, i1] = c * a - 1j * s * b, -1j * s * a + c * b

    if spec.encoding == "angle":
        r = math.sqrt(0.5)
        for w in range(n):
            i0, i1 = _bit_pairs(n, w)
            a, b = psi[:, i0], psi[:, i1]
            psi[:, i0], psi[:, i1] = r * (a + b), r * (a - b)
        for w in range(n):
            rotate(w, "RY", enc_angles[:, w])

    k = 0
    for layer in spec.layers:
        for rot in layer.rotations:
            rotate(rot.wire, rot.axis, rot_angles[:, k])
            k += 1
        for c, t in _entangler_pairs(n, layer.entangler):
            idx = np.arange(2**n)
            i0 = idx[((idx >> c) & 1 == 1) & ((idx >> t) & 1 == 0)]
            i1 = i0 | (1 << t)
            psi[:, i0], psi[:, i1] = psi[:, i1], psi[:, i0].copy()
    return psi


def _z0(psi_rows: np.ndarray) -> np.ndarray:
    signs = 1.0 - 2.0 * (np.arange(psi_rows.shape[1]) & 1)
    return np.sum(signs * np.abs(psi_rows) ** 2, axis=1)


def _sampled_mean_sign(psi_row: np.ndarray, shots: int, rng: np.random.Generator) -> float:
    probs = np.abs(psi_row) ** 2
    cdf = np.cumsum(probs)
    draws = np.minimum(np.searchsorted(cdf, rng.random(shots), side="right"), len(probs) - 1)
    return float(np.mean(1.0 - 2.0 * (draws & 1)))


def _eval_rows(spec, rot, enc, shots: int, seed: int) -> np.ndarray:
    """<Z0> per batch row; sampled rows use streams keyed on (seed, row)."""
    psi = _run_rows(spec, rot, enc)
    if shots == 0:
        return _z0(psi)
    return np.array(
        [_sampled_mean_sign(psi[r], shots, seeded_rng(seed, r)) for r in range(len(psi))]
    )


def _occurrence_angles(spec: AnsatzSpec, params: np.ndarray) -> np.ndarray:
    slots = [p.slot for p in spec.placements()]
    return params[slots][None, :] if slots else np.zeros((1, 0))


def _check_input(spec: AnsatzSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if len(x) != spec.input_arity:
        raise ValueError(f"expected input of length {spec.input_arity}, got {len(x)}")
    if len(x) and not np.all(np.isfinite(x)):
        raise ValueError("input values must be finite")
    return x


def _check_params(spec: AnsatzSpec, params) -> np.ndarray:
    params = np.asarray(params, dtype=float).reshape(-1)
    if len(params) != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {len(params)}")
    return params


def predict(spec: AnsatzSpec, params, x=(), shots: int = 0, seed: int = 0) -> float:
    """<Z> on qubit 0; exact when shots=0, an empirical +-1 mean otherwise."""
    params = _check_params(spec, params)
    x = _check_input(spec, x)
    rot = _occurrence_angles(spec, params)
    enc = encoding_angle(x)[None, :] if spec.input_arity else None
    return float(_eval_rows(spec, rot, enc, shots, seed)[0])


@dataclass(frozen=True)
class TrainingSample:
    x: np.ndarray
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))
        if not -1.0 <= self.y <= 1.0:
            raise ValueError(f"target {self.y} outside the observable range [-1, 1]")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_iters: int = 200
    seed: int = 0
    gradient_mode: str = "parameter_shift"  # or "central_difference"
    shots: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.gradient_mode not in ("parameter_shift", "central_difference"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.shots < 0:
            raise ValueError("shots must be 0 (exact) or positive")


@dataclass
class TrainReport:
    final_params: np.ndarray
    cost_history: list[float]
    iterations_run: int


def _sample_batch(spec: AnsatzSpec, data):
    """(rot row template, enc matrix) for a list of TrainingSamples."""
    if spec.input_arity:
        xs = np.array([_check_input(spec, s.x) for s in data])
        return encoding_angle(xs)
    for s in data:
        _check_input(spec, s.x)
    return None


def _predictions(spec, params, data, shots, seed) -> np.ndarray:
    enc = _sample_batch(spec, data)
    rot = np.repeat(_occurrence_angles(spec, params), len(data), axis=0)
    if enc is None:
        # Inputless circuits are identical across samples; evaluate one row.
        vals = _eval_rows(spec, rot[:1], None, shots, seed)
        return np.full(len(data), vals[0])
    return _eval_rows(spec, rot, enc, shots, seed)


def cost_mse(spec: AnsatzSpec, params, data, shots: int = 0, seed: int = 0) -> float:
    """(1/N) sum_i (<Z0>(x_i) - y_i)^2."""
    if not data:
        raise ValueError("dataset must be non-empty")
    params = _check_params(spec, params)
    preds = _predictions(spec, params, data, shots, seed)
    ys = np.array([s.y for s in data])
    return float(np.mean((preds - ys) ** 2))


def _shift_gradients(spec: AnsatzSpec, params: np.ndarray, data, shots: int, seed: int):
    """Predictions plus d<Z0>/d(theta_slot) per sample via the +-pi/2 rule.

    Occurrences of a slot are shifted one at a time and summed, which stays
    exact when one slot parameterizes several rotations.
    """
    placements = spec.placements()
    n_occ = len(placements)
    N = len(data)
    enc = _sample_batch(spec, data)
    base_rot = np.repeat(_occurrence_angles(spec, params), N, axis=0)  # (N, n_occ)

    rows = [base_rot]
    for k in range(n_occ):
        for sign in (PARAM_SHIFT, -PARAM_SHIFT):
            shifted = base_rot.copy()
            shifted[:, k] += sign
            rows.append(shifted)
    rot = np.concatenate(rows, axis=0)
    enc_full = np.tile(enc, (2 * n_occ + 1, 1)) if enc is not None else None
    vals = _eval_rows(spec, rot, enc_full, shots, seed)

    preds = vals[:N]
    dpred = np.zeros((N, spec.n_params))
    for k, placement in enumerate(placements):
        plus = vals[(1 + 2 * k) * N : (2 + 2 * k) * N]
        minus = vals[(2 + 2 * k) * N : (3 + 2 * k) * N]
        dpred[:, placement.slot] += (plus - minus) / 2.0
    return preds, dpred


def gradient(
    spec: AnsatzSpec,
    params,
    data,
    mode: str = "parameter_shift",
    shots: int = 0,
    seed: int = 0,
) -> np.ndarray:
    """dMSE/dtheta for every parameter slot."""
    if not data:
        raise ValueError("dataset must be non-empty")
    params = _check_params(spec, params)
    ys = np.array([s.y for s in data])

    if mode == "central_difference":
        g = np.zeros(spec.n_params)
        for k in range(spec.n_params):
            up, down = params.copy(), params.copy()
            up[k] += CENTRAL_DIFF_STEP
            down[k] -= CENTRAL_DIFF_STEP
            g[k] = (
                cost_mse(spec, up, data, shots, seed) - cost_mse(spec, down, data, shots, seed)
            ) / (2 * CENTRAL_DIFF_STEP)
        return g
    if mode != "parameter_shift":
        raise ValueError(f"unknown gradient mode {mode!r}")

    preds, dpred = _shift_gradients(spec, params, data, shots, seed)
    return (2.0 / len(data)) * (dpred.T @ (preds - ys))


def train(spec: AnsatzSpec, data, config: TrainConfig) -> TrainReport:
    """Plain gradient descent from a seeded uniform(-pi, pi) start.

    Stops at ``max_iters``, at an exactly-zero cost, or when successive
    costs differ by less than 1e-9.  Raises DivergenceError on a
    non-finite cost.
    """
    if not data:
        raise ValueError("dataset must be non-empty")
    rng = seeded_rng(config.seed)
    params = rng.uniform(-math.pi, math.pi, spec.n_params)
    history: list[float] = []
    for _ in range(config.max_iters):
        cost = cost_mse(spec, params, data, config.shots, config.seed)
        if not math.isfinite(cost):
            raise DivergenceError(f"cost became non-finite after {len(history)} iterations")
        history.append(cost)
        if cost == 0.0:
            break
        if len(history) > 1 and abs(history[-1] - history[-2]) < STOP_TOL:
            break
        g = gradient(spec, params, data, config.gradient_mode, config.shots, config.seed)
        params = params - config.learning_rate * g
    return TrainReport(params, history, len(history))


ACTIVATION_TARGETS = {
    "tanh": np.tanh,
    # sigma itself spans [0,1]; 2*sigma(x)-1 folds it into the Z readout
    # range.  Consumers recover sigma as (value + 1) / 2.
    "sigmoid_rescaled": lambda x: 2.0 / (1.0 + np.exp(-x)) - 1.0,
}


def activation_grid(kind: str, n_points: int = 41):
    """The x in [-2, 2] sample grid and its targets for an activation fit."""
    if kind not in ACTIVATION_TARGETS:
        raise ValueError(f"unknown activation {kind!r}; pick from {sorted(ACTIVATION_TARGETS)}")
    xs = np.linspace(-2.0, 2.0, n_points)
    return xs, ACTIVATION_TARGETS[kind](xs)


def fit_activation(
    kind: str, spec: AnsatzSpec | None = None, config: TrainConfig | None = None
) -> TrainReport:
    """Fit <Z0> to tanh(x) or 2*sigma(x)-1 on a 41-point grid over [-2, 2].

    Scalar grid points are broadcast to every encoding wire.  The defaults
    (2 qubits, 2 layers, lr 0.3) reach MSE well under 1e-2 on both targets.
    """
    spec = spec if spec is not None else hardware_efficient_ansatz(2, 2)
    config = config if config is not None else TrainConfig(learning_rate=0.3, max_iters=1500)
    xs, ys = activation_grid(kind)
    data = [TrainingSample(np.full(spec.input_arity, x), float(y)) for x, y in zip(xs, ys)]
    return train(spec, data, config)


# --- fixture / report serialization -------------------------------------------


def write_dataset_csv(path, data) -> None:
    """CSV with header x0,...,xk,y."""
    arity = len(data[0].x)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(arity)] + ["y"])
        for s in data:
            writer.writerow([repr(float(v)) for v in s.x] + [repr(float(s.y))])


def read_dataset_csv(path) -> list[TrainingSample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != "y" or not all(h == f"x{i}" for i, h in enumerate(header[:-1])):
            raise ValueError(f"unexpected dataset header {header}")
        return [
            TrainingSample(np.array([float(v) for v in row[:-1]]), float(row[-1]))
            for row in reader
        ]


def report_to_json(report: TrainReport) -> str:
    return json.dumps(
        {
            "params": [float(v) for v in report.final_params],
            "cost_history": [float(c) for c in report.cost_history],
            "iterations_run": report.iterations_run,
        }
    )


def report_from_json(text: str) -> TrainReport:
    doc = json.loads(text)
    return TrainReport(
        np.array(doc["params"], dtype=float), list(doc["cost_history"]), int(doc["iterations_run"])
    )
