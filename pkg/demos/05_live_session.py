"""A live monitoring session, driven in-process through the session engine.

A hidden aircraft is sampled, the scripted doublet plays out step by step,
and an operator policy aborts the maneuver as soon as the alert fires.
The debrief then reveals the hidden parameters and the counterfactual:
would the aborted flight have violated the safety limit?

The same engine backs the HTTP/WebSocket service (`aeromon serve`); the
browser console under frontend/ speaks that wire protocol.
"""

import numpy as np

from aeromon import ExperimentConfig, MethodSpec, build_monitor, collect_dataset, fit_least_squares
from aeromon.service import STATUS_RUNNING, SessionEngine

EPSILON = 0.1
SESSION_SEED = 30  # draws an aircraft that trips the alert mid-doublet

config = ExperimentConfig()
bundle = collect_dataset(config, config.n_unsafe, master_seed=0)
model = fit_least_squares(bundle.safe_matrix(), bundle.regression_targets)
monitor = build_monitor(MethodSpec(name="full"), bundle, model)

engine = SessionEngine(monitor, config)
session = engine.create_session(epsilon=EPSILON, seed=SESSION_SEED)
print(f"session {session.session_id}: scripted doublet, epsilon = {EPSILON}")

aborted = False
while session.status == STATUS_RUNNING:
    record = engine.session_step(session.session_id)
    t, ny, p = record["time"], record["outputs"][3], record["p_value"]
    if record["t"] % 5 == 0 or record["alert"]:
        p_text = f"{p:.3f}" if p is not None else "warming up"
        print(f"  t={t:4.2f}s  Ny={ny:+.3f} g  p={p_text}"
              + ("  << ALERT" if record["alert"] else ""))
    if record["alert"] and not aborted:
        print(f"  operator aborts at t={t:.2f} s")
        engine.abort_session(session.session_id)
        aborted = True

debrief = engine.debrief(session.session_id)
print(f"final status: {debrief['status']}")
hidden = debrief["hidden_params"]
print("hidden A matrix:\n", np.array2string(np.asarray(hidden["A"]), precision=3))
cf = debrief["counterfactual"]
if cf is not None:
    verdict = (f"would have violated |Ny| >= {config.plant.ny_limit} at step {cf['violation_step']}"
               if cf["would_violate"] else "would have stayed safe")
    print(f"counterfactual continuation: {verdict}")
