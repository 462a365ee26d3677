"""Trial- and study-level evaluation.

The ergodic metric scores how closely a trajectory's empirical spatial
distribution matches a goal-centered Gaussian: both are projected onto a
truncated separable cosine basis over the world rectangle and compared by a
Sobolev-weighted squared distance on the coefficients. Occupancy heatmaps
and per-condition summary tables mirror the study's descriptive figures.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from .allocation import mda_filter
from .lander import ControlInput
from .trials import TrialRecord

log = logging.getLogger(__name__)


@dataclass
class SpatialDistribution:
    """Goal-centered Gaussian target density on the world rectangle, with its
    cosine-basis coefficient table.

    The isotropic Gaussian is truncated to the domain and renormalized (it
    separates into two 1-D truncated normals). ``xi[k1, k2]`` are the target
    coefficients, ``h[k1, k2]`` the L2 norms of the plain cosine products,
    and ``lam[k1, k2] = (1 + |k|^2)^(-3/2)`` the Sobolev weights.
    """

    bounds: tuple[float, float] = (20.0, 16.0)
    goal: tuple[float, float] = (10.0, 6.0)
    sigma: float = 1.0
    k_max: int = 10
    xi: np.ndarray = field(init=False, repr=False)
    h: np.ndarray = field(init=False, repr=False)
    lam: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.k_max + 1
        ks = np.arange(n)
        hx = np.where(ks == 0, self.bounds[0], self.bounds[0] / 2.0)
        hy = np.where(ks == 0, self.bounds[1], self.bounds[1] / 2.0)
        self.h = np.sqrt(np.outer(hx, hy))
        ix = _cosine_moments(self.k_max, self.bounds[0], self.goal[0], self.sigma)
        iy = _cosine_moments(self.k_max, self.bounds[1], self.goal[1], self.sigma)
        self.xi = np.outer(ix, iy) / self.h
        k1, k2 = np.meshgrid(ks, ks, indexing="ij")
        self.lam = (1.0 + k1 ** 2 + k2 ** 2) ** -1.5

    def trajectory_coefficients(self, xy: np.ndarray) -> np.ndarray:
        """Empirical coefficients c_k = (1/T) sum_t F_k(p_t)."""
        ks = np.arange(self.k_max + 1)
        cx = np.cos(np.outer(ks, xy[:, 0]) * (math.pi / self.bounds[0]))
        cy = np.cos(np.outer(ks, xy[:, 1]) * (math.pi / self.bounds[1]))
        return (cx @ cy.T) / (xy.shape[0] * self.h)


def _cosine_moments(k_max: int, length: float, mean: float, sigma: float) -> np.ndarray:
    """E[cos(k pi s / L)] under a normal truncated to [0, L]."""
    def density(s: float) -> float:
        return math.exp(-0.5 * ((s - mean) / sigma) ** 2)

    z, _ = integrate.quad(density, 0.0, length)
    out = np.empty(k_max + 1)
    for k in range(k_max + 1):
        val, _ = integrate.quad(lambda s: math.cos(k * math.pi * s / length) * density(s),
                                0.0, length, limit=200)
        out[k] = val / z
    return out


def ergodicity(xy: np.ndarray, dist: SpatialDistribution) -> float:
    """Weighted squared coefficient distance between a trajectory and the
    target density. Points outside the domain are clamped to the boundary
    (logged) so time averages stay well defined."""
    xy = np.asarray(xy, dtype=float)
    if xy.ndim != 2 or xy.shape[0] == 0 or xy.shape[1] != 2:
        raise ValueError("trajectory must be a non-empty (T, 2) array")
    hi = np.asarray(dist.bounds)
    clamped = np.clip(xy, 0.0, hi)
    n_out = int(np.sum(np.any(clamped != xy, axis=1)))
    if n_out:
        log.info("ergodicity: clamped %d of %d points into the domain",
                 n_out, xy.shape[0])
    ck = dist.trajectory_coefficients(clamped)
    return float(np.sum(dist.lam * (ck - dist.xi) ** 2))


@dataclass
class OccupancyGrid:
    """Visit counts over an M x M partition of the world rectangle."""

    counts: np.ndarray
    bounds: tuple[float, float]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def heatmap(trajectories: Sequence[np.ndarray], grid_m: int,
            bounds: tuple[float, float] = (20.0, 16.0)) -> OccupancyGrid:
    """Accumulate trajectory samples into cell counts. Outside samples are
    clamped into the border cells so totals always match the sample count."""
    if grid_m < 2:
        raise ValueError("grid must be at least 2x2")
    counts = np.zeros((grid_m, grid_m), dtype=np.int64)
    for xy in trajectories:
        xy = np.asarray(xy, dtype=float)
        if xy.size == 0:
            continue
        ix = np.clip((xy[:, 0] / bounds[0] * grid_m).astype(int), 0, grid_m - 1)
        iy = np.clip((xy[:, 1] / bounds[1] * grid_m).astype(int), 0, grid_m - 1)
        np.add.at(counts, (ix, iy), 1)
    return OccupancyGrid(counts=counts, bounds=bounds)


def write_heatmap_pgm(grid: OccupancyGrid, path: str | Path) -> None:
    """Export as a portable graymap (PGM, P2): brightest cell = most visited.
    Rows run top-to-bottom in world y so the image matches the scene."""
    counts = grid.counts
    peak = counts.max()
    img = (counts * 255 // peak) if peak > 0 else counts
    rows = []
    for iy in range(counts.shape[1] - 1, -1, -1):
        rows.append(" ".join(str(int(img[ix, iy])) for ix in range(counts.shape[0])))
    text = f"P2\n{counts.shape[0]} {counts.shape[1]}\n255\n" + "\n".join(rows) + "\n"
    Path(path).write_text(text)


def write_heatmap_csv(grid: OccupancyGrid, path: str | Path) -> None:
    np.savetxt(path, grid.counts, fmt="%d", delimiter=",")


def _axis_agreement(record: TrialRecord) -> tuple[float, float]:
    """Recompute the per-axis sign-agreement fractions for one trial."""
    main = side = 0
    for t in range(record.steps):
        _, rec = mda_filter(ControlInput(*record.u_h[t]), ControlInput(*record.u_a[t]))
        main += rec.agree_main
        side += rec.agree_side
    n = max(record.steps, 1)
    return main / n, side / n


def _moments(values: Sequence[float]) -> dict:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return {"n": 0, "mean": None, "sd": None}
    return {"n": int(arr.size), "mean": float(arr.mean()), "sd": float(arr.std())}


def summarize(records_by_condition: dict[str, list[TrialRecord]],
              dist: SpatialDistribution | None = None,
              h_step: dict | None = None) -> dict:
    """Per-condition descriptive report.

    Includes success counts and rates, the success-by-trial-index curve,
    ergodicity moments over all / successful / failed trials, mean per-axis
    agreement, and (when supplied) the open-loop prediction-error tables.
    """
    if not records_by_condition or any(len(v) == 0 for v in records_by_condition.values()):
        raise ValueError("summarize needs at least one trial per condition")
    dist = dist or SpatialDistribution()
    report: dict = {"conditions": {}}
    for condition, records in records_by_condition.items():
        ergs = [ergodicity(r.positions(), dist) for r in records]
        agreements = [_axis_agreement(r) for r in records]
        indices = sorted({r.trial_index for r in records})
        curve = []
        for idx in indices:
            group = [r for r in records if r.trial_index == idx]
            curve.append({"trial": idx,
                          "rate": sum(r.success for r in group) / len(group)})
        outcomes: dict[str, int] = {}
        for r in records:
            outcomes[r.outcome] = outcomes.get(r.outcome, 0) + 1
        report["conditions"][condition] = {
            "trials": len(records),
            "successes": sum(r.success for r in records),
            "success_rate": sum(r.success for r in records) / len(records),
            "success_by_trial": curve,
            "outcomes": dict(sorted(outcomes.items())),
            "ergodicity": {
                "all": _moments(ergs),
                "success": _moments([e for e, r in zip(ergs, records) if r.success]),
                "failure": _moments([e for e, r in zip(ergs, records) if not r.success]),
                "per_trial": [float(e) for e in ergs],
            },
            "agreement": {
                "main": float(np.mean([a[0] for a in agreements])),
                "side": float(np.mean([a[1] for a in agreements])),
            },
        }
    if h_step is not None:
        report["h_step"] = h_step
    return report


__all__ = [
    "OccupancyGrid",
    "SpatialDistribution",
    "ergodicity",
    "heatmap",
    "summarize",
    "write_heatmap_csv",
    "write_heatmap_pgm",
]
