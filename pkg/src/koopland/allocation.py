"""Maxwell's Demon control allocation.

The filter passes the human command through untouched whenever it lies in
the same half-plane as the autonomy's suggestion (non-negative inner
product) and zeroes it otherwise, so every signal reaching the plant
originates from the human. A per-axis variant applies the same sign test
channel by channel. Per-axis agreement is tallied on every call regardless
of mode.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lander import ControlInput, ZERO_CONTROL

VECTOR = "vector"
PER_AXIS = "per_axis"


@dataclass(frozen=True)
class AllocationRecord:
    """One filter decision: both partner commands, what was applied, whether
    anything non-zero got through, and the per-axis sign agreement."""

    u_h: ControlInput
    u_a: ControlInput
    u_out: ControlInput
    admitted: bool
    agree_main: bool
    agree_side: bool
    timestamp: float


def mda_filter(u_h: ControlInput, u_a: ControlInput, mode: str = VECTOR,
               timestamp: float = 0.0) -> tuple[ControlInput, AllocationRecord]:
    """Apply the demon filter to one (human, autonomy) command pair.

    Vector mode: u_out = u_h iff <u_h, u_a> >= 0, else (0, 0). Per-axis
    mode: each channel passes independently iff u_h,i * u_a,i >= 0.
    ``admitted`` is True only when a non-zero command got through, which is
    what gates online learning.
    """
    agree_main = u_h.u1 * u_a.u1 >= 0.0
    agree_side = u_h.u2 * u_a.u2 >= 0.0
    if mode == VECTOR:
        inner = u_h.u1 * u_a.u1 + u_h.u2 * u_a.u2
        u_out = u_h if inner >= 0.0 else ZERO_CONTROL
    elif mode == PER_AXIS:
        u_out = ControlInput(u_h.u1 if agree_main else 0.0,
                             u_h.u2 if agree_side else 0.0)
    else:
        raise ValueError(f"unknown allocation mode {mode!r}")
    admitted = (u_out.u1 != 0.0) or (u_out.u2 != 0.0)
    record = AllocationRecord(u_h=u_h, u_a=u_a, u_out=u_out, admitted=admitted,
                              agree_main=agree_main, agree_side=agree_side,
                              timestamp=timestamp)
    return u_out, record


def agreement_stats(records) -> tuple[float, float]:
    """Fraction of records whose per-axis signs agreed, (main, side)."""
    records = list(records)
    if not records:
        raise ValueError("agreement_stats needs at least one record")
    n = len(records)
    main = sum(1 for r in records if r.agree_main) / n
    side = sum(1 for r in records if r.agree_side) / n
    return main, side


__all__ = [
    "AllocationRecord",
    "PER_AXIS",
    "VECTOR",
    "agreement_stats",
    "mda_filter",
]
