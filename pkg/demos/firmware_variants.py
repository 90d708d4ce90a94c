"""
Spotting modified firmware
==========================

One device, seven firmware builds. The first boot segment (power-up) is
shared by all builds; later segments differ. Can a model trained on the
original build reject the others?
"""

import numpy as np

from emfprint import synth
from emfprint.evaluation import calibrate_threshold
from emfprint.features import features_from_trace
from emfprint.ocsvm import train

spec = synth.firmware_spec(traces_per_class=20)
entries = synth.generate_corpus(spec)
layout = synth.scenario_layout(spec)
X = np.vstack([features_from_trace(e.trace, layout).values for e in entries])
labels = np.array([e.label for e in entries])

# Twenty recordings per build. With only a handful in 325 dimensions every
# left-out recording looks like a stranger and the calibrated threshold
# drops below the score of far-away points.
# Train on 15 recordings of the original build and keep 5 for testing.
original = np.flatnonzero(labels == "F1")
fit, held_out = original[:15], original[15:]
model = train(X[fit], class_label="F1")
threshold = calibrate_threshold(X[fit])
print(f"threshold from leave-one-out scores: {threshold:.4f}")

scores = model.decision_function(X)
print(f"F1 held out: {np.mean(scores[held_out] >= threshold):.0%} accepted")
for v in sorted(set(labels) - {"F1"}):
    rows = labels == v
    print(f"{v}: {np.mean(scores[rows] >= threshold):.0%} accepted, median score {np.median(scores[rows]):.3f}")
