"""Koopman-operator approximation of the joint pilot-lander dynamics.

The dictionary lifts the 6-D lander state together with the 2-D thruster
command into observables; extended dynamic mode decomposition (EDMD) then
estimates a finite operator K from snapshot pairs by least squares,

    phi(x_{t+1}, u_{t+1}) ~= K^T phi(x_t, u_t),

either in one batch (:func:`fit`) or one pair at a time
(:class:`KoopmanLearner`). The lifted model predicts next states, exposes
analytic linearizations for gradient-based control, and round-trips through a
self-describing JSON file.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .lander import ControlInput, LanderState

log = logging.getLogger(__name__)

MODEL_FORMAT = "koopland-model"
MODEL_VERSION = 1

STATE_DIM = 6
CONTROL_DIM = 2


class ModelNotFittedError(RuntimeError):
    """Raised when prediction is requested from a model with no operator."""


@dataclass(frozen=True)
class BasisSpec:
    """Observable dictionary selector.

    ``nonlinear`` is the full 25-term dictionary: a constant, the six state
    variables, the two control variables, all twelve control*state products
    and the four control*trig terms in the heading. ``linear`` keeps only the
    first nine (constant, states, controls). Term order is frozen; the state
    variables always sit at positions 1..6, which is what
    ``state_indices`` records.
    """

    kind: str = "nonlinear"

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "nonlinear"):
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return 25 if self.kind == "nonlinear" else 9

    @property
    def state_indices(self) -> tuple[int, ...]:
        return (1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class SnapshotPair:
    """Two consecutive (state, control) samples, one log step apart."""

    state: LanderState
    control: ControlInput
    next_state: LanderState
    next_control: ControlInput

    def is_finite(self) -> bool:
        return (self.state.is_finite() and self.control.is_finite()
                and self.next_state.is_finite() and self.next_control.is_finite())


def eval_basis_array(basis: BasisSpec, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Lift one (state, control) sample into the observable vector."""
    phi = np.empty(basis.dim)
    phi[0] = 1.0
    phi[1:7] = x
    phi[7:9] = u
    if basis.kind == "nonlinear":
        phi[9:15] = u[0] * x
        phi[15:21] = u[1] * x
        c, s = math.cos(x[2]), math.sin(x[2])
        phi[21] = u[0] * c
        phi[22] = u[0] * s
        phi[23] = u[1] * c
        phi[24] = u[1] * s
    return phi


def eval_basis_batch(basis: BasisSpec, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Vectorized lift: (T, 6) states and (T, 2) controls to (T, D)."""
    T = xs.shape[0]
    phi = np.empty((T, basis.dim))
    phi[:, 0] = 1.0
    phi[:, 1:7] = xs
    phi[:, 7:9] = us
    if basis.kind == "nonlinear":
        phi[:, 9:15] = us[:, :1] * xs
        phi[:, 15:21] = us[:, 1:2] * xs
        c, s = np.cos(xs[:, 2]), np.sin(xs[:, 2])
        phi[:, 21] = us[:, 0] * c
        phi[:, 22] = us[:, 0] * s
        phi[:, 23] = us[:, 1] * c
        phi[:, 24] = us[:, 1] * s
    return phi


def eval_basis(basis: BasisSpec, state: LanderState, control: ControlInput) -> np.ndarray:
    return eval_basis_array(basis, np.array(state.as_tuple()),
                            np.array(control.as_tuple()))


def basis_jacobians_array(basis: BasisSpec, x: np.ndarray,
                          u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic partials of every dictionary term: (D, 6) and (D, 2)."""
    D = basis.dim
    dx = np.zeros((D, STATE_DIM))
    du = np.zeros((D, CONTROL_DIM))
    dx[1:7] = np.eye(STATE_DIM)
    du[7, 0] = 1.0
    du[8, 1] = 1.0
    if basis.kind == "nonlinear":
        dx[9:15] = u[0] * np.eye(STATE_DIM)
        dx[15:21] = u[1] * np.eye(STATE_DIM)
        du[9:15, 0] = x
        du[15:21, 1] = x
        c, s = math.cos(x[2]), math.sin(x[2])
        dx[21, 2] = -u[0] * s
        dx[22, 2] = u[0] * c
        dx[23, 2] = -u[1] * s
        dx[24, 2] = u[1] * c
        du[21, 0] = c
        du[22, 0] = s
        du[23, 1] = c
        du[24, 1] = s
    return dx, du


def basis_jacobians(basis: BasisSpec, state: LanderState,
                    control: ControlInput) -> tuple[np.ndarray, np.ndarray]:
    return basis_jacobians_array(basis, np.array(state.as_tuple()),
                                 np.array(control.as_tuple()))


@dataclass
class KoopmanModel:
    """Fitted (or naively initialized) operator plus its accumulators.

    ``G`` and ``A`` are the averaged outer-product moments of the lifted
    snapshots (phi as column vectors):

        G = (1/T) sum phi_t phi_t^T,   A = (1/T) sum phi_t phi_{t+1}^T

    and ``K = (G + eps I)^+ A``, so phi_{t+1} ~= K^T phi_t. ``samples`` is
    the number of accumulated pairs. Instances are treated as immutable
    snapshots once published; the online learner replaces rather than
    mutates them.
    """

    basis: BasisSpec
    K: np.ndarray | None = None
    G: np.ndarray | None = None
    A: np.ndarray | None = None
    samples: int = 0
    epsilon: float = 0.0
    _state_map: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def initialized(self) -> bool:
        return self.K is not None

    @property
    def state_map(self) -> np.ndarray:
        """Rows of K^T that reconstruct the state variables, shape (6, D)."""
        if self.K is None:
            raise ModelNotFittedError("model has no operator yet")
        if self._state_map is None:
            self._state_map = np.ascontiguousarray(
                self.K.T[list(self.basis.state_indices)])
        return self._state_map

    def predict_array(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.state_map @ eval_basis_array(self.basis, x, u)

    def linearize_arrays(self, x: np.ndarray,
                         u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dx, du = basis_jacobians_array(self.basis, x, u)
        sm = self.state_map
        return sm @ dx, sm @ du


def _solve_operator(G: np.ndarray, A: np.ndarray, epsilon: float) -> np.ndarray:
    """K = (G + eps I)^+ A. With eps > 0 the matrix is positive definite and
    a direct solve applies; with eps = 0 fall back to the pseudo-inverse and
    warn when the moment matrix is rank deficient."""
    D = G.shape[0]
    if epsilon > 0.0:
        return np.linalg.solve(G + epsilon * np.eye(D), A)
    U, s, Vt = np.linalg.svd(G, hermitian=True)
    tol = max(s[0], 0.0) * D * np.finfo(float).eps
    keep = s > tol
    rank = int(np.count_nonzero(keep))
    if rank < D:
        log.warning("moment matrix rank %d < %d; using pseudo-inverse", rank, D)
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (Vt.T * inv_s) @ (U.T @ A)


def _pairs_to_arrays(pairs: Sequence[SnapshotPair]) -> tuple[np.ndarray, ...]:
    xs = np.array([p.state.as_tuple() for p in pairs])
    us = np.array([p.control.as_tuple() for p in pairs])
    xn = np.array([p.next_state.as_tuple() for p in pairs])
    un = np.array([p.next_control.as_tuple() for p in pairs])
    return xs, us, xn, un


def fit(pairs: Sequence[SnapshotPair], basis: BasisSpec,
        epsilon: float = 0.0) -> KoopmanModel:
    """Batch EDMD over a snapshot dataset."""
    if len(pairs) == 0:
        raise ValueError("cannot fit on an empty dataset")
    xs, us, xn, un = _pairs_to_arrays(pairs)
    phi = eval_basis_batch(basis, xs, us)
    phi_next = eval_basis_batch(basis, xn, un)
    T = phi.shape[0]
    G = phi.T @ phi / T
    A = phi.T @ phi_next / T
    K = _solve_operator(G, A, epsilon)
    return KoopmanModel(basis=basis, K=K, G=G, A=A, samples=T, epsilon=epsilon)


def residual(model: KoopmanModel, pairs: Sequence[SnapshotPair]) -> float:
    """Least-squares objective of the lifted one-step relation:
    J = 1/2 sum_t |phi_{t+1} - K^T phi_t|^2."""
    if model.K is None:
        raise ModelNotFittedError("model has no operator yet")
    xs, us, xn, un = _pairs_to_arrays(pairs)
    phi = eval_basis_batch(model.basis, xs, us)
    phi_next = eval_basis_batch(model.basis, xn, un)
    err = phi_next - phi @ model.K
    return 0.5 * float(np.sum(err * err))


def predict(model: KoopmanModel, state: LanderState,
            control: ControlInput) -> LanderState:
    """One-step state prediction: lift, apply K^T, read the state rows."""
    nxt = model.predict_array(np.array(state.as_tuple()),
                              np.array(control.as_tuple()))
    return LanderState(*nxt)


def linearize(model: KoopmanModel, state: LanderState,
              control: ControlInput) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of :func:`predict` at (state, control): (6, 6) and (6, 2)."""
    return model.linearize_arrays(np.array(state.as_tuple()),
                                  np.array(control.as_tuple()))


class KoopmanLearner:
    """Streaming EDMD: folds snapshot pairs into the moment accumulators and
    refreshes the operator after every pair.

    The refreshed model matches a batch :func:`fit` over the accumulated
    pairs (same epsilon) to floating-point accuracy. ``init="uniform"`` seeds
    the operator with entries drawn uniformly from [0, 1) so a policy can run
    before any data has arrived; the first update replaces it with the least
    squares solution.
    """

    def __init__(self, basis: BasisSpec, epsilon: float = 1e-6,
                 init: str = "zero", seed: int = 0):
        D = basis.dim
        self.basis = basis
        self.epsilon = epsilon
        self._G_sum = np.zeros((D, D))
        self._A_sum = np.zeros((D, D))
        self._count = 0
        if init == "uniform":
            K0 = np.random.default_rng(seed).uniform(0.0, 1.0, size=(D, D))
        elif init == "zero":
            K0 = None
        else:
            raise ValueError(f"unknown init {init!r}")
        self._model = KoopmanModel(basis=basis, K=K0, G=None, A=None,
                                   samples=0, epsilon=epsilon)

    @property
    def model(self) -> KoopmanModel:
        """Latest immutable snapshot; safe to hand to a controller."""
        return self._model

    @property
    def samples(self) -> int:
        return self._count

    def update(self, pair: SnapshotPair) -> KoopmanModel:
        if not pair.is_finite():
            raise ValueError("non-finite snapshot pair rejected")
        phi = eval_basis_array(self.basis, np.array(pair.state.as_tuple()),
                               np.array(pair.control.as_tuple()))
        phi_next = eval_basis_array(self.basis,
                                    np.array(pair.next_state.as_tuple()),
                                    np.array(pair.next_control.as_tuple()))
        self._G_sum += np.outer(phi, phi)
        self._A_sum += np.outer(phi, phi_next)
        self._count += 1
        G = self._G_sum / self._count
        A = self._A_sum / self._count
        K = _solve_operator(G, A, self.epsilon)
        self._model = KoopmanModel(basis=self.basis, K=K, G=G, A=A,
                                   samples=self._count, epsilon=self.epsilon)
        return self._model


def h_step_errors(model: KoopmanModel, trajectories: Iterable[tuple[np.ndarray, np.ndarray]],
                  horizon: int) -> np.ndarray:
    """Open-loop position error of iterated prediction fed the logged controls.

    Each trajectory is (states, controls) with states of shape (T+1, 6) and
    controls (T, 2). Every start index with a full ``horizon`` window ahead
    of it is rolled forward; the Euclidean (x, y) error against the logged
    state is pooled per step count over that fixed set of windows, so the
    curve reflects pure error compounding. Returns an array of shape
    (horizon, 2) holding mean and variance per horizon step.
    """
    pools: list[list[float]] = [[] for _ in range(horizon)]
    for states, controls in trajectories:
        T = controls.shape[0]
        for t0 in range(T - horizon + 1):
            x = states[t0].copy()
            for h in range(horizon):
                x = model.predict_array(x, controls[t0 + h])
                true = states[t0 + h + 1]
                err = math.hypot(x[0] - true[0], x[1] - true[1])
                pools[h].append(err)
    out = np.full((horizon, 2), np.nan)
    for h, pool in enumerate(pools):
        if pool:
            arr = np.asarray(pool)
            out[h, 0] = arr.mean()
            out[h, 1] = arr.var()
    return out


def save_model(model: KoopmanModel, path: str | Path) -> None:
    """Write the model as a single self-describing JSON document."""
    if model.K is None or model.G is None or model.A is None:
        raise ModelNotFittedError("refusing to save a model with no fit")
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "basis": model.basis.kind,
        "dim": model.basis.dim,
        "epsilon": model.epsilon,
        "samples": model.samples,
        "K": model.K.flatten().tolist(),
        "G": model.G.flatten().tolist(),
        "A": model.A.flatten().tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path: str | Path) -> KoopmanModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    basis = BasisSpec(doc["basis"])
    D = basis.dim
    if doc["dim"] != D:
        raise ValueError(f"{path}: dimension {doc['dim']} does not match basis {basis.kind}")
    return KoopmanModel(
        basis=basis,
        K=np.array(doc["K"]).reshape(D, D),
        G=np.array(doc["G"]).reshape(D, D),
        A=np.array(doc["A"]).reshape(D, D),
        samples=int(doc["samples"]),
        epsilon=float(doc["epsilon"]),
    )


def pairs_from_trajectory(states: Sequence[LanderState],
                          controls: Sequence[ControlInput]) -> list[SnapshotPair]:
    """Consecutive snapshot pairs from one trial.

    ``states`` has one more entry than ``controls`` (it includes the terminal
    state); the snapshot at the terminal state carries a zero command, since
    nothing is applied there. Pairs never span trials.
    """
    if len(states) != len(controls) + 1:
        raise ValueError("need exactly one more state than control")
    from .lander import ZERO_CONTROL
    ctrl = list(controls) + [ZERO_CONTROL]
    return [SnapshotPair(states[t], ctrl[t], states[t + 1], ctrl[t + 1])
            for t in range(len(controls))]


__all__ = [
    "BasisSpec",
    "KoopmanLearner",
    "KoopmanModel",
    "ModelNotFittedError",
    "SnapshotPair",
    "basis_jacobians",
    "eval_basis",
    "eval_basis_batch",
    "fit",
    "h_step_errors",
    "linearize",
    "load_model",
    "pairs_from_trajectory",
    "predict",
    "residual",
    "save_model",
]
