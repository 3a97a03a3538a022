"""Record a live session through the service wire protocol into a fixture.

Drives the real service over HTTP + WebSocket (no internal imports beyond
building the app), playing the scripted doublet until the first alert, then
a few more steps, then abort and debrief.  The raw JSON messages land in
fixtures/session_replay.json for the console's replay tests.

Usage: python3 scripts/record_fixture.py  (from frontend/)
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from aeromon.baselines import MethodSpec, build_monitor
from aeromon.config import ExperimentConfig
from aeromon.datasets import collect_dataset
from aeromon.predictor import fit_least_squares
from aeromon.service import SessionEngine, create_app

SESSION_SEED = 30   # alerts mid-doublet; counterfactual violates
EPSILON = 0.1
STEPS_AFTER_ALERT = 4

config = ExperimentConfig()
bundle = collect_dataset(config, config.n_unsafe, master_seed=0)
model = fit_least_squares(bundle.safe_matrix(), bundle.regression_targets)
monitor = build_monitor(MethodSpec(name="full"), bundle, model)
client = TestClient(create_app(SessionEngine(monitor, config)))

metadata = client.get("/api/metadata").json()
created = client.post("/api/sessions", json={
    "epsilon": EPSILON, "seed": SESSION_SEED, "mode": "scripted",
}).json()
session_id = created["session_id"]

messages = []
with client.websocket_connect(f"/api/sessions/{session_id}/stream") as ws:
    remaining_after_alert = None
    while True:
        ws.send_json({"type": "step"})
        msg = ws.receive_json()
        messages.append(msg)
        if msg["type"] != "telemetry" or msg["status"] != "running":
            break
        if msg["alert"]:
            if remaining_after_alert is None:
                remaining_after_alert = STEPS_AFTER_ALERT
        if remaining_after_alert is not None:
            remaining_after_alert -= 1
            if remaining_after_alert <= 0:
                ws.send_json({"type": "abort"})
                messages.append(ws.receive_json())
                break

debrief = client.get(f"/api/sessions/{session_id}/debrief").json()

fixture = {
    "recorded_with": "scripts/record_fixture.py",
    "metadata": metadata,
    "session": created,
    "messages": messages,
    "debrief": debrief,
}
out = Path(__file__).parent.parent / "fixtures" / "session_replay.json"
out.parent.mkdir(exist_ok=True)
out.write_text(json.dumps(fixture, indent=2) + "\n")
alerts = sum(1 for m in messages if m.get("alert"))
print(f"recorded {len(messages)} messages ({alerts} alerts) -> {out}")
print(f"final status: {debrief['status']}, "
      f"counterfactual violates: {debrief['counterfactual']['would_violate']}")
