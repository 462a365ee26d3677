"""Study orchestration: demonstrations, condition runs, full studies.

Five control conditions are supported. ``UserOnly`` applies the pilot's
command directly; the three offline shared conditions
(``IndividualKoopman``, ``GeneralKoopman``, ``ExpertKoopman``) differ only
in whose demonstrations trained the model the autonomy plans with; and
``OnlineKoopman`` starts from a naively initialized operator and folds in
every admitted command at the control rate. All randomness flows from one
master seed through named streams, and trials at the same index share reset
and pilot streams across conditions, so condition comparisons are paired
and full reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .allocation import PER_AXIS, VECTOR, mda_filter
from .koopman import (BasisSpec, KoopmanLearner, KoopmanModel, SnapshotPair,
                      fit, h_step_errors, load_model, save_model)
from .lander import (ControlInput, LanderState, SimConfig, SimulationError,
                     TrialStatus, ZERO_CONTROL, classify, reset, step)
from .pilots import PilotConfig, make_pilot
from .policy import Controller, CostWeights, MpcParams
from .trials import TrialRecord, write_records

log = logging.getLogger(__name__)

USER_ONLY = "UserOnly"
INDIVIDUAL = "IndividualKoopman"
GENERAL = "GeneralKoopman"
EXPERT = "ExpertKoopman"
ONLINE = "OnlineKoopman"
CONDITIONS = (USER_ONLY, INDIVIDUAL, GENERAL, EXPERT, ONLINE)
SHARED_CONDITIONS = (INDIVIDUAL, GENERAL, EXPERT, ONLINE)

# named random streams derived from the master seed
_STREAM_DEMO = 0
_STREAM_RESET = 1
_STREAM_PILOT = 2
_STREAM_ORDER = 3
_STREAM_ONLINE = 4
_STREAM_HOLDOUT = 5


class ConfigError(ValueError):
    """Bad study configuration (unknown condition, missing model, ...)."""


@dataclass
class StudyConfig:
    """Declarative description of a full study run."""

    seed: int = 0
    output_dir: str = "runs/study"
    conditions: tuple[str, ...] = CONDITIONS
    trials_per_condition: int = 10
    online_trials: int = 15
    basis_kind: str = "nonlinear"
    solver: str = "sac"
    allocation_mode: str = VECTOR
    pilot: PilotConfig = field(default_factory=PilotConfig)
    demo_trials: int = 10
    general_sources: int = 3
    sim: SimConfig = field(default_factory=SimConfig)
    mpc: MpcParams = field(default_factory=MpcParams)
    cost_q: tuple[float, ...] = (6.0, 10.0, 20.0, 2.0, 2.0, 3.0)
    cost_q_terminal: tuple[float, ...] = (3.0, 3.0, 5.0, 1.0, 1.0, 1.0)
    cost_r: tuple[float, float] = (0.1, 0.1)
    epsilon_offline: float = 0.0
    epsilon_online: float = 1e-6
    model_paths: dict = field(default_factory=dict)
    report_h_step: bool = True
    h_step_horizon: int = 30

    def __post_init__(self) -> None:
        for cond in self.conditions:
            if cond not in CONDITIONS:
                raise ConfigError(f"unknown condition {cond!r}")
        if self.allocation_mode not in (VECTOR, PER_AXIS):
            raise ConfigError(f"unknown allocation mode {self.allocation_mode!r}")
        if self.basis_kind not in ("linear", "nonlinear"):
            raise ConfigError(f"unknown basis {self.basis_kind!r}")
        if self.solver not in ("sac", "lqr"):
            raise ConfigError(f"unknown solver {self.solver!r}")

    @property
    def basis(self) -> BasisSpec:
        return BasisSpec(self.basis_kind)

    def weights(self) -> CostWeights:
        return CostWeights(q=self.cost_q, q_terminal=self.cost_q_terminal,
                           r=self.cost_r,
                           x_goal=(self.sim.goal_x, self.sim.goal_y, 0.0, 0.0, 0.0, 0.0))

    def trials_for(self, condition: str) -> int:
        return self.online_trials if condition == ONLINE else self.trials_per_condition


def _config_to_dict(config: StudyConfig) -> dict:
    doc = asdict(config)
    doc["conditions"] = list(config.conditions)
    doc["mpc"]["duration_grid"] = list(config.mpc.duration_grid)
    doc.pop("output_dir")  # invocation detail; keeps reruns byte-comparable
    return doc


def load_study_config(path: str | Path) -> StudyConfig:
    """Read a study config from a JSON file; absent keys keep their
    documented defaults."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read study config {path}: {exc}") from exc
    return study_config_from_dict(doc)


def study_config_from_dict(doc: dict) -> StudyConfig:
    kwargs = dict(doc)
    try:
        if "pilot" in kwargs:
            kwargs["pilot"] = PilotConfig(**kwargs["pilot"])
        if "sim" in kwargs:
            kwargs["sim"] = SimConfig(**kwargs["sim"])
        if "mpc" in kwargs:
            mpc = dict(kwargs["mpc"])
            if "duration_grid" in mpc:
                mpc["duration_grid"] = tuple(mpc["duration_grid"])
            if "nominal" in mpc:
                mpc["nominal"] = tuple(mpc["nominal"])
            kwargs["mpc"] = MpcParams(**mpc)
        if "conditions" in kwargs:
            kwargs["conditions"] = tuple(kwargs["conditions"])
        for key in ("cost_q", "cost_q_terminal", "cost_r"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        # the linear dictionary pairs with LQR unless the file says otherwise
        if "solver" not in kwargs and kwargs.get("basis_kind") == "linear":
            kwargs["solver"] = "lqr"
        return StudyConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad study config: {exc}") from exc


def stream_rng(master: int, *key: int) -> np.random.Generator:
    """Generator for one named stream of the master seed."""
    return np.random.default_rng(np.random.SeedSequence([master, *key]))


def seed_label(master: int, *key: int) -> int:
    """Stable integer tag identifying a stream (for logs and model ids)."""
    return int(np.random.SeedSequence([master, *key]).generate_state(1)[0])


def make_online_learner(config: StudyConfig) -> tuple[KoopmanLearner, str]:
    """Naively initialized streaming learner plus its provenance tag."""
    seed = seed_label(config.seed, _STREAM_ONLINE)
    learner = KoopmanLearner(config.basis, epsilon=config.epsilon_online,
                             init="uniform", seed=seed)
    return learner, f"online-{seed}"


def run_trial(sim: SimConfig, pilot, condition: str, trial_index: int,
              seed_label: int, reset_rng: np.random.Generator,
              controller: Controller | None = None,
              learner: KoopmanLearner | None = None,
              allocation_mode: str = VECTOR,
              model_id: str | None = None,
              telemetry: list | None = None) -> TrialRecord:
    """One closed-loop trial at the log cadence.

    Shared conditions compute the autonomy command, filter the human command
    against it, and apply the filter output. When a learner is present
    (online condition) each admitted step's snapshot pair is folded in as
    soon as its successor snapshot exists; the pair reaching the terminal
    state carries a zero command.
    """
    shared = controller is not None
    state = reset(sim, reset_rng)
    states = [state]
    rows_u_h: list[tuple[float, float]] = []
    rows_u_a: list[tuple[float, float]] = []
    rows_u_out: list[tuple[float, float]] = []
    admitted_flags: list[bool] = []
    pending: tuple[LanderState, ControlInput, bool] | None = None
    outcome = TrialStatus.RUNNING
    t = 0
    while True:
        u_h, _ = pilot.command(state).clamped()
        if shared:
            if learner is not None:
                controller.refresh(learner.model)
            u_a = controller.command(state)
            if telemetry is not None:
                telemetry.append({"condition": condition, "trial": trial_index,
                                  "step": t, **controller.last_info})
        else:
            u_a = ZERO_CONTROL
        u_out, rec = mda_filter(u_h, u_a, allocation_mode, timestamp=t * sim.dt_log)
        if not shared:
            u_out = u_h  # no filtering without an autonomous partner
        if learner is not None and pending is not None and pending[2]:
            learner.update(SnapshotPair(pending[0], pending[1], state, u_out))
        pending = (state, u_out, rec.admitted if shared else False)
        next_state = step(state, u_out, sim)
        rows_u_h.append(u_h.as_tuple())
        rows_u_a.append(u_a.as_tuple())
        rows_u_out.append(u_out.as_tuple())
        admitted_flags.append(rec.admitted)
        states.append(next_state)
        t += 1
        outcome = classify(next_state, t * sim.dt_log, sim)
        state = next_state
        if outcome.terminal:
            break
    if learner is not None and pending is not None and pending[2]:
        learner.update(SnapshotPair(pending[0], pending[1], state, ZERO_CONTROL))
    return TrialRecord(
        condition=condition,
        trial_index=trial_index,
        seed=seed_label,
        model_id=model_id,
        dt=sim.dt_log,
        states=np.array([s.as_tuple() for s in states]),
        u_h=np.array(rows_u_h),
        u_a=np.array(rows_u_a),
        u_out=np.array(rows_u_out),
        admitted=np.array(admitted_flags, dtype=bool),
        outcome=outcome.value,
        duration=t * sim.dt_log,
        pilot=getattr(pilot, "name", None),
    )


def collect_demonstrations(pilot_config: PilotConfig, n_trials: int,
                           sim: SimConfig, master: int,
                           source: int = 0) -> tuple[list[TrialRecord], list[SnapshotPair]]:
    """Run pilot-only trials and pool their snapshot pairs."""
    if n_trials == 0:
        log.warning("collect_demonstrations called with zero trials")
        return [], []
    records: list[TrialRecord] = []
    pairs: list[SnapshotPair] = []
    for i in range(n_trials):
        pilot = make_pilot(pilot_config, sim, stream_rng(master, _STREAM_DEMO, source, i, 1))
        try:
            record = run_trial(sim, pilot, condition=USER_ONLY, trial_index=i,
                               seed_label=seed_label(master, _STREAM_DEMO, source, i),
                               reset_rng=stream_rng(master, _STREAM_DEMO, source, i, 0))
        except SimulationError as exc:
            log.warning("demonstration trial %d aborted: %s", i, exc)
            continue
        records.append(record)
        pairs.extend(record.pairs())
    return records, pairs


def _model_id(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:12]


def build_models(config: StudyConfig, model_dir: Path) -> dict[str, tuple[KoopmanModel, str]]:
    """Fit (or load) the offline models each shared condition needs.

    Individual uses the study pilot's own demonstrations, General pools
    several novice sources, Expert uses the deterministic expert. Explicit
    ``model_paths`` entries short-circuit data collection for that condition.
    """
    model_dir.mkdir(parents=True, exist_ok=True)
    needed = [c for c in config.conditions if c in (INDIVIDUAL, GENERAL, EXPERT)]
    out: dict[str, tuple[KoopmanModel, str]] = {}
    basis = config.basis
    for cond in needed:
        if cond in config.model_paths:
            path = Path(config.model_paths[cond])
            if not path.exists():
                raise ConfigError(f"model file for {cond} not found: {path}")
            out[cond] = (load_model(path), _model_id(path))
            continue
        if cond == INDIVIDUAL:
            _, pairs = collect_demonstrations(config.pilot, config.demo_trials,
                                              config.sim, config.seed, source=1)
        elif cond == EXPERT:
            _, pairs = collect_demonstrations(replace(config.pilot, kind="expert"),
                                              config.demo_trials, config.sim,
                                              config.seed, source=2)
        else:  # GENERAL pools demonstrations from several novice sources
            pairs = []
            for k in range(config.general_sources):
                _, chunk = collect_demonstrations(replace(config.pilot, kind="novice"),
                                                  config.demo_trials, config.sim,
                                                  config.seed, source=10 + k)
                pairs.extend(chunk)
        if not pairs:
            raise ConfigError(f"no demonstration data collected for {cond}")
        model = fit(pairs, basis, config.epsilon_offline)
        path = model_dir / f"{cond.lower()}.json"
        save_model(model, path)
        out[cond] = (model, _model_id(path))
        log.info("fitted %s model on %d pairs -> %s", cond, len(pairs), path)
    return out


def make_controller(config: StudyConfig, model: KoopmanModel) -> Controller:
    params = replace(config.mpc, solver=config.solver)
    trim = ControlInput(config.sim.hover_throttle, 0.0)
    return Controller(model, config.weights(), params, trim=trim)


def run_condition(condition: str, config: StudyConfig,
                  models: dict[str, tuple[KoopmanModel, str]] | None = None,
                  telemetry: list | None = None) -> list[TrialRecord]:
    """All trials of one condition, paired to the other conditions through
    the shared per-trial reset and pilot streams."""
    if condition not in config.conditions and condition not in CONDITIONS:
        raise ConfigError(f"unknown condition {condition!r}")
    sim = config.sim
    n = config.trials_for(condition)
    records: list[TrialRecord] = []
    learner: KoopmanLearner | None = None
    controller: Controller | None = None
    model_id: str | None = None
    if condition in (INDIVIDUAL, GENERAL, EXPERT):
        if not models or condition not in models:
            raise ConfigError(f"condition {condition} requires a fitted model")
        model, model_id = models[condition]
        controller = make_controller(config, model)
    elif condition == ONLINE:
        learner, model_id = make_online_learner(config)
        controller = make_controller(config, learner.model)
    for i in range(n):
        pilot = make_pilot(config.pilot, sim, stream_rng(config.seed, _STREAM_PILOT, i))
        record = run_trial(
            sim, pilot, condition=condition, trial_index=i,
            seed_label=seed_label(config.seed, _STREAM_RESET, i),
            reset_rng=stream_rng(config.seed, _STREAM_RESET, i),
            controller=controller, learner=learner,
            allocation_mode=config.allocation_mode,
            model_id=model_id, telemetry=telemetry,
        )
        records.append(record)
    return records


def _csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_report(records_by_condition: dict[str, list[TrialRecord]],
                 out_dir: Path, dist: metrics.SpatialDistribution,
                 h_step: dict | None = None) -> dict:
    """Summarize and write report.json, the CSV tables and the heatmaps."""
    report = metrics.summarize(records_by_condition, dist, h_step=h_step)
    report_dir = out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")

    conds = report["conditions"]
    _csv(report_dir / "success.csv",
         ["condition", "trials", "successes", "rate"],
         [[c, conds[c]["trials"], conds[c]["successes"], conds[c]["success_rate"]]
          for c in conds])
    _csv(report_dir / "success_by_trial.csv",
         ["condition", "trial", "rate"],
         [[c, row["trial"], row["rate"]]
          for c in conds for row in conds[c]["success_by_trial"]])
    _csv(report_dir / "ergodicity.csv",
         ["condition", "scope", "n", "mean", "sd"],
         [[c, scope, conds[c]["ergodicity"][scope]["n"],
           conds[c]["ergodicity"][scope]["mean"], conds[c]["ergodicity"][scope]["sd"]]
          for c in conds for scope in ("all", "success", "failure")])
    _csv(report_dir / "agreement.csv",
         ["condition", "main", "side"],
         [[c, conds[c]["agreement"]["main"], conds[c]["agreement"]["side"]]
          for c in conds])
    if h_step is not None:
        _csv(report_dir / "h_step.csv",
             ["basis", "h", "mean_m", "var_m2"],
             [[basis, h + 1, table[h][0], table[h][1]]
              for basis, table in h_step.items() for h in range(len(table))])

    heat_dir = out_dir / "heatmaps"
    heat_dir.mkdir(parents=True, exist_ok=True)
    for cond, records in records_by_condition.items():
        for scope, keep in (("success", True), ("failure", False)):
            group = [r.positions() for r in records if r.success == keep]
            if not group:
                continue
            grid = metrics.heatmap(group, grid_m=40, bounds=dist.bounds)
            metrics.write_heatmap_pgm(grid, heat_dir / f"{cond}_{scope}.pgm")
            metrics.write_heatmap_csv(grid, heat_dir / f"{cond}_{scope}.csv")
    return report


def run_study(config: StudyConfig) -> dict:
    """Execute every configured condition and write the full bundle: logs,
    models, report, heatmaps, manifest and solver telemetry sidecar."""
    out_dir = Path(config.output_dir)
    (out_dir / "logs").mkdir(parents=True, exist_ok=True)
    models = build_models(config, out_dir / "models")

    order = list(config.conditions)
    stream_rng(config.seed, _STREAM_ORDER).shuffle(order)
    log.info("condition order: %s", order)

    telemetry: list = []
    records_by_condition: dict[str, list[TrialRecord]] = {}
    for condition in order:
        records = run_condition(condition, config, models, telemetry=telemetry)
        records_by_condition[condition] = records
        write_records(records, out_dir / "logs" / f"{condition}.jsonl")

    h_step = None
    if config.report_h_step:
        h_step = h_step_report(config, horizon=config.h_step_horizon)

    dist = metrics.SpatialDistribution(bounds=(config.sim.world_w, config.sim.world_h),
                                       goal=config.sim.goal)
    # summarize in the configured (unshuffled) order for stable reports
    ordered = {c: records_by_condition[c] for c in config.conditions}
    report = write_report(ordered, out_dir, dist, h_step=h_step)

    manifest = {
        "config": _config_to_dict(config),
        "condition_order": order,
        "models": {cond: mid for cond, (_, mid) in models.items()},
        "trials": {cond: len(recs) for cond, recs in ordered.items()},
    }
    (out_dir / "study.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    with open(out_dir / "telemetry.jsonl", "w") as fh:
        for entry in telemetry:
            fh.write(json.dumps(entry) + "\n")
    return report


def h_step_report(config: StudyConfig, horizon: int = 30,
                  train_trials: int | None = None, holdout_trials: int = 3) -> dict:
    """Open-loop prediction-error tables for both dictionary sizes.

    Models are trained on expert demonstrations and evaluated on held-out
    expert trials, mirroring the offline modeling pipeline.
    """
    expert = replace(config.pilot, kind="expert")
    _, train_pairs = collect_demonstrations(
        expert, train_trials or config.demo_trials, config.sim, config.seed, source=2)
    holdout, _ = collect_demonstrations(
        expert, holdout_trials, config.sim, config.seed, source=99)
    trajectories = [r.trajectory_arrays() for r in holdout]
    out = {}
    for kind in ("linear", "nonlinear"):
        model = fit(train_pairs, BasisSpec(kind), config.epsilon_offline)
        out[kind] = h_step_errors(model, trajectories, horizon).tolist()
    return out


__all__ = [
    "CONDITIONS",
    "ConfigError",
    "EXPERT",
    "GENERAL",
    "INDIVIDUAL",
    "ONLINE",
    "SHARED_CONDITIONS",
    "USER_ONLY",
    "StudyConfig",
    "build_models",
    "collect_demonstrations",
    "h_step_report",
    "load_study_config",
    "run_condition",
    "make_controller",
    "make_online_learner",
    "run_study",
    "run_trial",
    "seed_label",
    "stream_rng",
    "study_config_from_dict",
    "write_report",
]
