"""Autonomous-partner policies on top of a lifted dynamics model.

Two solvers share one quadratic trial cost: an infinite-horizon discrete LQR
(used with the linear dictionary) and a sequential-action controller that
searches for a single short corrective burst along a receding horizon (used
with the nonlinear dictionary). Both only ever see model snapshots, so a
controller is a pure function of (model, state) and safe to call from
anywhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .koopman import KoopmanModel, ModelNotFittedError
from .lander import ControlInput, LanderState

U_LOW = np.array([0.0, -1.0])
U_HIGH = np.array([1.0, 1.0])


class RiccatiError(RuntimeError):
    """Raised when the Riccati recursion fails to stabilize the pair."""


@dataclass(frozen=True)
class CostWeights:
    """Diagonal quadratic weights and the goal state.

    Running cost 0.5 (x - x_d)^T Q (x - x_d) + 0.5 u^T R u, terminal cost
    0.5 (x - x_d)^T Q_T (x - x_d).
    """

    q: tuple[float, ...] = (6.0, 10.0, 20.0, 2.0, 2.0, 3.0)
    q_terminal: tuple[float, ...] = (3.0, 3.0, 5.0, 1.0, 1.0, 1.0)
    r: tuple[float, float] = (0.1, 0.1)
    x_goal: tuple[float, ...] = (10.0, 6.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if min(self.q) < 0 or min(self.q_terminal) < 0 or min(self.r) < 0:
            raise ValueError("cost weights must be non-negative")

    @property
    def q_arr(self) -> np.ndarray:
        return np.asarray(self.q)

    @property
    def qt_arr(self) -> np.ndarray:
        return np.asarray(self.q_terminal)

    @property
    def r_arr(self) -> np.ndarray:
        return np.asarray(self.r)

    @property
    def goal_arr(self) -> np.ndarray:
        return np.asarray(self.x_goal)


@dataclass(frozen=True)
class MpcParams:
    """Receding-horizon solver settings.

    ``alpha_factor`` scales the nominal trajectory cost into the targeted
    cost-decrease rate for the burst-action schedule (it must be negative).
    ``duration_grid`` lists candidate burst lengths, in control steps, tried
    when verifying predicted-cost descent, and ``max_candidates`` caps how
    many sensitivity-ranked bursts get a verification rollout.
    """

    solver: str = "sac"
    horizon: int = 13
    dt: float = 0.1
    nominal: tuple[float, float] = (0.0, 0.0)
    alpha_factor: float = -10.0
    duration_grid: tuple[int, ...] = (1,)
    descent_slack: float = 1e-9
    max_candidates: int = 5
    backtrack_scales: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125, 0.0625)

    def __post_init__(self) -> None:
        if self.solver not in ("sac", "lqr"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.horizon < 1 or self.dt <= 0:
            raise ValueError("horizon must be >= 1 and dt > 0")
        if self.alpha_factor >= 0:
            raise ValueError("alpha_factor must be negative")


def saturate_array(u: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(u, U_LOW), U_HIGH)


def running_cost(x: np.ndarray, u: np.ndarray, weights: CostWeights) -> float:
    dx = x - weights.goal_arr
    return 0.5 * float(dx @ (weights.q_arr * dx)) + 0.5 * float(u @ (weights.r_arr * u))


def terminal_cost(x: np.ndarray, weights: CostWeights) -> float:
    dx = x - weights.goal_arr
    return 0.5 * float(dx @ (weights.qt_arr * dx))


def running_cost_grad(x: np.ndarray, weights: CostWeights) -> np.ndarray:
    return weights.q_arr * (x - weights.goal_arr)


def terminal_cost_grad(x: np.ndarray, weights: CostWeights) -> np.ndarray:
    return weights.qt_arr * (x - weights.goal_arr)


def solve_dare(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray,
               tol: float = 1e-9, max_iter: int = 10_000) -> np.ndarray:
    """Fixed point of the discrete algebraic Riccati recursion.

    Iterates P <- Q + A^T P A - A^T P B (R + B^T P B)^-1 B^T P A from P = Q
    until the sup-norm change drops below ``tol``. Raises
    :class:`RiccatiError` (naming the closed-loop spectral radius) when the
    cap is hit, which happens exactly when the pair cannot be stabilized.
    """
    P = Q.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            BtP = B.T @ P
            gain = np.linalg.solve(R + BtP @ B, BtP @ A)
            P_next = Q + A.T @ P @ (A - B @ gain)
            P_next = 0.5 * (P_next + P_next.T)
            if not np.all(np.isfinite(P_next)):
                break  # diverging cost-to-go: pair is not stabilizable
            if np.max(np.abs(P_next - P)) < tol:
                return P_next
            P = P_next
        else:
            P_next = P
        try:
            BtP = B.T @ P
            gain = np.linalg.solve(R + BtP @ B, BtP @ A)
            closed = A - B @ gain
            if not np.all(np.isfinite(closed)):
                closed = A
        except np.linalg.LinAlgError:
            closed = A
        rho = max(abs(np.linalg.eigvals(closed)))
    raise RiccatiError(
        f"Riccati recursion did not converge in {max_iter} iterations; "
        f"closed-loop spectral radius {rho:.6g}")


def lqr_gain(A: np.ndarray, B: np.ndarray, weights: CostWeights) -> np.ndarray:
    """Infinite-horizon feedback gain F: u = -F (x - x_d).

    The closed loop A - B F must be strictly stable; otherwise a
    :class:`RiccatiError` reports the offending spectral radius.
    """
    Q = np.diag(weights.q_arr)
    R = np.diag(weights.r_arr)
    P = solve_dare(A, B, Q, R)
    BtP = B.T @ P
    gain = np.linalg.solve(R + BtP @ B, BtP @ A)
    rho = max(abs(np.linalg.eigvals(A - B @ gain)))
    if rho >= 1.0:
        raise RiccatiError(f"closed loop is not stable: spectral radius {rho:.6g}")
    return gain


def _rollout_cost(model: KoopmanModel, x0: np.ndarray, controls: np.ndarray,
                  weights: CostWeights) -> float:
    """Predicted trajectory cost under an explicit control schedule; +inf as
    soon as the lifted rollout leaves the finite range."""
    x = x0
    J = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for u in controls:
            J += running_cost(x, u, weights)
            x = model.predict_array(x, u)
            if not np.all(np.isfinite(x)):
                return float("inf")
        J += terminal_cost(x, weights)
    if not np.isfinite(J):
        return float("inf")
    return J


def sac_action(model: KoopmanModel, state: LanderState, weights: CostWeights,
               params: MpcParams, info: dict | None = None) -> ControlInput:
    """Single corrective burst that maximally decreases predicted cost.

    The nominal control is rolled out over the horizon, the cost adjoint is
    integrated backward along it, and the closed-form burst schedule

        u*_t = (Lam_t + R)^-1 (Lam_t u_nom + B_t^T rho_{t+1} alpha),
        Lam_t = B_t^T rho_{t+1} rho_{t+1}^T B_t

    is evaluated. Candidate bursts are ranked by their cost-insertion
    sensitivity rho^T (f(x, u*) - f(x, u_nom)); in that order each is
    saturated and test-rolled as the immediate action, backing off its
    magnitude geometrically when the full burst overshoots, and the first
    one keeping predicted cost at or below the nominal rollout's is
    returned. If no candidate achieves that (the nominal can be locally
    optimal), the nominal control is returned; ``info["descent"]`` reports
    which branch was taken.
    """
    if not model.initialized:
        raise ModelNotFittedError("policy requires an initialized model")
    T = params.horizon
    u_nom = np.asarray(params.nominal, dtype=float)
    r_diag = weights.r_arr
    x0 = np.array(state.as_tuple())
    fallback = ControlInput(*saturate_array(u_nom))

    with np.errstate(over="ignore", invalid="ignore"):
        xs = np.empty((T + 1, 6))
        xs[0] = x0
        finite_T = T
        for t in range(T):
            xs[t + 1] = model.predict_array(xs[t], u_nom)
            if not np.all(np.isfinite(xs[t + 1])):
                finite_T = t
                break
        if finite_T < T:
            # degenerate model (e.g. naive random operator): no usable rollout
            if info is not None:
                info["descent"] = False
            return fallback

        nominal_schedule = np.tile(u_nom, (T, 1))
        J_nom = _rollout_cost(model, x0, nominal_schedule, weights)
        if not np.isfinite(J_nom):
            if info is not None:
                info["descent"] = False
            return fallback
        alpha = params.alpha_factor * J_nom

        # backward adjoint along the nominal rollout
        Bs = []
        As = []
        for t in range(T):
            A_t, B_t = model.linearize_arrays(xs[t], u_nom)
            As.append(A_t)
            Bs.append(B_t)
        rhos = np.empty((T + 1, 6))
        rhos[T] = terminal_cost_grad(xs[T], weights)
        for t in range(T - 1, -1, -1):
            rhos[t] = running_cost_grad(xs[t], weights) + As[t].T @ rhos[t + 1]

        ranked: list[tuple[float, np.ndarray]] = []  # (sensitivity, burst)
        for t in range(T):
            b = Bs[t].T @ rhos[t + 1]
            lam = np.outer(b, b)
            if not np.all(np.isfinite(lam)):
                continue  # adjoint overflowed (degenerate model)
            M = lam + np.diag(r_diag)
            try:
                u_star = np.linalg.solve(M, lam @ u_nom + b * alpha)
            except np.linalg.LinAlgError:
                try:
                    u_star = np.linalg.solve(M + 1e-8 * np.eye(2),
                                             lam @ u_nom + b * alpha)
                except np.linalg.LinAlgError:
                    continue
            if not np.all(np.isfinite(u_star)):
                continue
            df = model.predict_array(xs[t], u_star) - xs[t + 1]
            sens = float(rhos[t + 1] @ df)
            if np.isfinite(sens):
                ranked.append((sens, u_star))
        ranked.sort(key=lambda pair: pair[0])

        for sens, burst in ranked[:params.max_candidates]:
            base = saturate_array(burst)
            for scale in params.backtrack_scales:
                candidate = u_nom + scale * (base - u_nom)
                if np.allclose(candidate, u_nom):
                    continue  # indistinguishable from the nominal
                J_best = np.inf
                for dur in params.duration_grid:
                    schedule = nominal_schedule.copy()
                    schedule[:max(1, min(dur, T))] = candidate
                    J_best = min(J_best, _rollout_cost(model, x0, schedule, weights))
                if J_best <= J_nom + params.descent_slack:
                    if info is not None:
                        info["descent"] = True
                    return ControlInput(*candidate)

    if info is not None:
        info["descent"] = False
    return fallback


class Controller:
    """Uniform facade over the two solvers.

    For the LQR kind the gain is synthesized once from the model linearized
    at the goal with the supplied trim control; commands are the saturated
    feedback on the state error. For the SAC kind every call runs
    :func:`sac_action`. ``last_info`` holds per-call telemetry (latency in
    seconds and, for SAC, the descent flag).
    """

    def __init__(self, model: KoopmanModel, weights: CostWeights,
                 params: MpcParams, trim: ControlInput | None = None,
                 strict: bool = True):
        self.weights = weights
        self.params = params
        self.last_info: dict = {}
        self._trim = np.array(trim.as_tuple()) if trim is not None else np.zeros(2)
        self._gain: np.ndarray | None = None
        self._strict = strict
        self.model = model
        if params.solver == "lqr":
            self._synthesize_gain(strict=strict)

    def _synthesize_gain(self, strict: bool) -> None:
        try:
            A, B = self.model.linearize_arrays(self.weights.goal_arr, self._trim)
            self._gain = lqr_gain(A, B, self.weights)
        except (RiccatiError, ModelNotFittedError):
            if strict:
                raise
            self._gain = None  # no usable gain yet; command idles

    def refresh(self, model: KoopmanModel) -> None:
        """Swap in a newer model snapshot (online learning). An LQR gain that
        cannot be synthesized yet leaves the controller idling at zero."""
        if model is self.model:
            return
        self.model = model
        if self.params.solver == "lqr":
            self._synthesize_gain(strict=False)

    def command(self, state: LanderState) -> ControlInput:
        t0 = time.perf_counter()
        info: dict = {}
        if self.params.solver == "lqr":
            if self._gain is None:
                out = ControlInput(0.0, 0.0)
            else:
                err = np.array(state.as_tuple()) - self.weights.goal_arr
                u = saturate_array(-(self._gain @ err))
                out = ControlInput(*u)
            info["descent"] = None
        else:
            out = sac_action(self.model, state, self.weights, self.params, info)
        info["latency_s"] = time.perf_counter() - t0
        self.last_info = info
        return out


def autonomy_command(controller: Controller, state: LanderState) -> ControlInput:
    """Dispatch to the configured solver; output always respects saturation."""
    return controller.command(state)


__all__ = [
    "Controller",
    "CostWeights",
    "MpcParams",
    "RiccatiError",
    "autonomy_command",
    "lqr_gain",
    "running_cost",
    "running_cost_grad",
    "sac_action",
    "saturate_array",
    "solve_dare",
    "terminal_cost",
    "terminal_cost_grad",
]
