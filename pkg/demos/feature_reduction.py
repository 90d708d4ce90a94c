"""
How many features are needed?
=============================

Rank the 325 features by mutual information with the device label, then
re-run the evaluation on the top k. A random pick of 20 features is the
baseline.
"""

import sys

import numpy as np

from emfprint import synth
from emfprint.features import feature_names, features_from_trace
from emfprint.ranking import evaluate_top_k, rank_features, write_top_k_table
from emfprint.rng import SplitMix64

spec = synth.scenario1_spec()
entries = synth.generate_corpus(spec)
layout = synth.scenario_layout(spec)
X = np.vstack([features_from_trace(e.trace, layout).values for e in entries])
labels = [e.label for e in entries]

ranked = rank_features(X, labels, "mim")
names = feature_names(layout)
print("most informative:", ", ".join(names[i] for i in ranked.ordering[:5]))

rows = evaluate_top_k(X, labels, ranked, [10, 20, 50, 100, 200, 300, 325], fpr_cap=0.01)
write_top_k_table(sys.stdout, rows)

baseline = [evaluate_top_k(X, labels, SplitMix64(s).permutation(X.shape[1])[:20], [20],
                           fpr_cap=0.01)[0].tpr for s in range(10)]
print(f"random 20 features: mean TPR {np.mean(baseline):.3f} over 10 draws")
