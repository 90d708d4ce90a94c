"""
Telling apart units of the same model
=====================================

Fifteen units built from one design differ only by small shifts in their
boot emissions. They are recorded on the wide-band analyzer grid, and each
unit gets its own threshold.
"""

import numpy as np

from emfprint import synth
from emfprint.evaluation import cross_validate, per_class_thresholds
from emfprint.features import features_from_trace

spec = synth.scenario2_spec()
entries = synth.generate_corpus(spec)
layout = synth.scenario_layout(spec)  # 3350 ms window on 0-200 MHz
X = np.vstack([features_from_trace(e.trace, layout).values for e in entries])
labels = [e.label for e in entries]

matrix = cross_validate(X, labels, 10, seed=0)
thresholds = per_class_thresholds(matrix, fpr_cap=0.05)

print(f"{'unit':>5} {'threshold':>10} {'TPR':>6} {'FPR':>6}")
for c in matrix.class_labels:
    pos, neg = matrix.column(c)
    t = thresholds[c]
    print(f"{c:>5} {t:10.4f} {np.mean(pos >= t):6.2f} {np.mean(neg >= t):6.3f}")
