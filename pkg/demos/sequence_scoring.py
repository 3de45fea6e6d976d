"""How the cluster-transition model scores a track.

Builds a vocabulary of shape clusters from synthetic descriptors,
trains the label-sequence predictor on clean repeating cycles, then
scores a normal continuation against a broken one. The anomaly score
of a transition is 1 minus (predicted probability of the observed next
cluster x novelty proximity of the observed shape).

    python3 demos/sequence_scoring.py
"""

import numpy as np

from contour_vad.models import CrnnSpec, predict_crnn, train_crnn
from contour_vad.shapecluster import (
    build_shape_model,
    novelty_proximity,
    ocsvm_decision,
)

rng = np.random.default_rng(42)

# ---------------------------------------------------------------------
# Stand-in descriptors: four well-separated count histograms play the
# role of Shape Context vectors for four distinct poses. Real runs get
# these from contour extraction; the clustering step does not care.
# ---------------------------------------------------------------------
POSES = np.array([
    [40, 2, 2, 2, 2, 2],
    [2, 40, 2, 2, 2, 2],
    [2, 2, 40, 2, 2, 2],
    [2, 2, 2, 40, 2, 2],
], dtype=float)

def pose_rows(sequence):
    return POSES[np.asarray(sequence)] + rng.uniform(0, 1.0, (len(sequence), 6))

# 12 training tracks, each cycling 0 -> 1 -> 2 -> 3 -> 0 ...
train_seqs = [(np.arange(24) + rng.integers(0, 4)) % 4 for _ in range(12)]
X = np.vstack([pose_rows(s) for s in train_seqs])

labels, shape = build_shape_model(X, k=4, seed=0)
pairs = set(zip(labels.tolist(), np.concatenate(train_seqs).tolist()))
print("clusters kept: %d (%s)"
      % (shape.n_clusters,
         "one cluster per pose" if len(pairs) == 4 else "poses split"))

# ---------------------------------------------------------------------
# Train the sequence predictor on the cluster labels. Slice
# augmentation cuts random sub-ranges each epoch so the model sees
# every phase of the cycle as a starting point.
# ---------------------------------------------------------------------
pos = 0
label_seqs = []
for s in train_seqs:
    label_seqs.append(labels[pos:pos + len(s)])
    pos += len(s)
crnn = train_crnn(label_seqs, CrnnSpec(n_clusters=shape.n_clusters,
                                       epochs=150), seed=0)

prefix = label_seqs[0][:8]
probs = predict_crnn(crnn, prefix)
nxt = int(label_seqs[0][8])
print("after prefix %s the predictor puts %.2f on the true next label %d"
      % (prefix.tolist(), probs[nxt], nxt))

# ---------------------------------------------------------------------
# Score a normal continuation and a broken one. The normal next shape
# is both predicted and inside the novelty support, so its score is
# low; a cycle break keeps the shape familiar but the transition
# improbable, and a never-seen shape fails the novelty factor too.
# ---------------------------------------------------------------------
def transition_score(prefix_labels, observed_label, observed_row):
    p = predict_crnn(crnn, prefix_labels)[observed_label]
    prox = float(novelty_proximity(shape.ocsvm, observed_row[None])[0])
    return 1.0 - p * prox

normal_row = pose_rows([nxt])[0]
print("normal transition score:      %.3f" %
      transition_score(prefix, nxt, normal_row))

broken = int((nxt + 2) % 4)
print("broken-cycle transition score: %.3f" %
      transition_score(prefix, broken, pose_rows([broken])[0]))

novel_row = np.array([12.0, 12, 12, 12, 12, 40]) \
    + rng.uniform(0, 1.0, 6)
decision = float(ocsvm_decision(shape.ocsvm, novel_row[None])[0])
print("novel shape: one-class decision %.3f -> score %.3f"
      % (decision, transition_score(prefix, nxt, novel_row)))
