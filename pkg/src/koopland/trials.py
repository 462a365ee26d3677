"""Trial logs: in-memory records and their line-delimited serialization.

A trial is logged as one ``trial_start`` line, one ``step`` line per control
tick and one ``trial_end`` line. Floats go through JSON's shortest
round-trip representation, so parse(serialize(record)) reproduces the record
bit for bit and reruns from the same seeds yield byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .koopman import SnapshotPair, pairs_from_trajectory
from .lander import ControlInput, LanderState


@dataclass
class TrialRecord:
    """Everything observed in one trial at the 10 Hz control cadence.

    ``states`` has T+1 rows (the terminal state included); the control and
    allocation arrays have T rows. ``admitted[t]`` is True when the filter
    let a non-zero human command through at step t.
    """

    condition: str
    trial_index: int
    seed: int
    model_id: str | None
    dt: float
    states: np.ndarray      # (T+1, 6)
    u_h: np.ndarray         # (T, 2)
    u_a: np.ndarray         # (T, 2)
    u_out: np.ndarray       # (T, 2)
    admitted: np.ndarray    # (T,) bool
    outcome: str
    duration: float
    pilot: str | None = None

    @property
    def steps(self) -> int:
        return self.u_h.shape[0]

    @property
    def success(self) -> bool:
        return self.outcome == "Success"

    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt

    def pairs(self) -> list[SnapshotPair]:
        """Snapshot pairs over the applied (filtered) control."""
        states = [LanderState(*row) for row in self.states]
        controls = [ControlInput(*row) for row in self.u_out]
        return pairs_from_trajectory(states, controls)

    def trajectory_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(states, applied controls) for prediction-error sweeps."""
        return self.states, self.u_out


def serialize_record(record: TrialRecord) -> str:
    lines = [json.dumps({
        "type": "trial_start",
        "condition": record.condition,
        "trial": record.trial_index,
        "seed": record.seed,
        "model_id": record.model_id,
        "pilot": record.pilot,
        "dt": record.dt,
    })]
    for t in range(record.steps):
        lines.append(json.dumps({
            "type": "step",
            "t": t * record.dt,
            "state": record.states[t].tolist(),
            "u_h": record.u_h[t].tolist(),
            "u_a": record.u_a[t].tolist(),
            "u_out": record.u_out[t].tolist(),
            "admitted": bool(record.admitted[t]),
        }))
    lines.append(json.dumps({
        "type": "trial_end",
        "outcome": record.outcome,
        "duration": record.duration,
        "final_state": record.states[-1].tolist(),
    }))
    return "\n".join(lines) + "\n"


def write_records(records: Iterable[TrialRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(serialize_record(record))


def parse_records(text: str) -> list[TrialRecord]:
    """Inverse of :func:`serialize_record` over a whole log file."""
    records: list[TrialRecord] = []
    header: dict | None = None
    steps: list[dict] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        kind = obj.get("type")
        if kind == "trial_start":
            if header is not None:
                raise ValueError(f"line {line_no}: trial_start inside an open trial")
            header, steps = obj, []
        elif kind == "step":
            if header is None:
                raise ValueError(f"line {line_no}: step outside a trial")
            steps.append(obj)
        elif kind == "trial_end":
            if header is None:
                raise ValueError(f"line {line_no}: trial_end outside a trial")
            states = np.array([s["state"] for s in steps] + [obj["final_state"]])
            records.append(TrialRecord(
                condition=header["condition"],
                trial_index=header["trial"],
                seed=header["seed"],
                model_id=header.get("model_id"),
                pilot=header.get("pilot"),
                dt=header["dt"],
                states=states,
                u_h=np.array([s["u_h"] for s in steps]).reshape(len(steps), 2),
                u_a=np.array([s["u_a"] for s in steps]).reshape(len(steps), 2),
                u_out=np.array([s["u_out"] for s in steps]).reshape(len(steps), 2),
                admitted=np.array([s["admitted"] for s in steps], dtype=bool),
                outcome=obj["outcome"],
                duration=obj["duration"],
            ))
            header, steps = None, []
        else:
            raise ValueError(f"line {line_no}: unknown record type {kind!r}")
    if header is not None:
        raise ValueError("log ended inside an open trial")
    return records


def read_records(path: str | Path) -> list[TrialRecord]:
    return parse_records(Path(path).read_text())


def records_equal(a: TrialRecord, b: TrialRecord) -> bool:
    return (a.condition == b.condition and a.trial_index == b.trial_index
            and a.seed == b.seed and a.model_id == b.model_id
            and a.pilot == b.pilot and a.dt == b.dt
            and a.outcome == b.outcome and a.duration == b.duration
            and np.array_equal(a.states, b.states)
            and np.array_equal(a.u_h, b.u_h)
            and np.array_equal(a.u_a, b.u_a)
            and np.array_equal(a.u_out, b.u_out)
            and np.array_equal(a.admitted, b.admitted))


def all_pairs(records: Sequence[TrialRecord]) -> list[SnapshotPair]:
    """Pool snapshot pairs across trials without crossing trial boundaries."""
    out: list[SnapshotPair] = []
    for record in records:
        out.extend(record.pairs())
    return out


__all__ = [
    "TrialRecord",
    "all_pairs",
    "parse_records",
    "read_records",
    "records_equal",
    "serialize_record",
    "write_records",
]
