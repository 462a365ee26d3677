#!/usr/bin/env python3
"""Record a scripted cockpit session as a frame fixture for the frontend
tests, so the TypeScript protocol layer is checked against frames the bridge
actually produces (including admitted and blocked steps and a clamp echo)."""

import json
from pathlib import Path

from koopland.bridge import PROTOCOL_VERSION, BridgeSession
from koopland.harness import EXPERT, USER_ONLY, StudyConfig

OUT = Path(__file__).resolve().parent.parent / "frontend" / "test" / "fixtures" / "session.jsonl"


def main() -> None:
    config = StudyConfig(seed=8, output_dir="runs/fixture",
                         conditions=(USER_ONLY, EXPERT),
                         demo_trials=2, report_h_step=False)
    session = BridgeSession(config, session_id="fixture")
    frames = []
    frames += session.handle_message(json.dumps({"type": "hello",
                                                 "version": PROTOCOL_VERSION}))
    frames += session.handle_message(json.dumps({"type": "start_trial",
                                                 "condition": EXPERT}))
    # the pilot is the scripted expert law reading the latest frame and
    # answering through the wire, with side-command noise injected on a
    # fixed schedule so some steps disagree with the autonomy and get
    # blocked; the very first input is over-range (clamp echo)
    import numpy as np
    from koopland.pilots import ExpertPilot
    from koopland.lander import LanderState
    pilot = ExpertPilot(config.sim)
    rng = np.random.default_rng(2)
    frames += session.handle_message(json.dumps({"type": "input",
                                                 "u1": 1.4, "u2": 0.3}))
    last_state = None
    for tick in range(1000):
        if last_state is not None:
            u = pilot.command(LanderState(*last_state))
            u2 = u.u2 + (rng.normal(0.0, 0.6) if tick % 3 == 0 else 0.0)
            frames += session.handle_message(json.dumps(
                {"type": "input", "u1": u.u1, "u2": max(-1.0, min(1.0, u2))}))
        batch = session.tick()
        frames += batch
        for f in batch:
            if f["type"] == "frame":
                last_state = f["state"]
        if any(f["type"] == "trial_end" for f in batch):
            break
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("".join(json.dumps(f) + "\n" for f in frames))
    kinds = {}
    admitted = blocked = 0
    for f in frames:
        kinds[f["type"]] = kinds.get(f["type"], 0) + 1
        if f["type"] == "frame":
            if f["admitted"]:
                admitted += 1
            elif f["u_h"] != [0.0, 0.0]:
                blocked += 1
    print(f"wrote {len(frames)} frames to {OUT}")
    print(f"kinds: {kinds}; admitted={admitted} blocked={blocked}")


if __name__ == "__main__":
    main()
