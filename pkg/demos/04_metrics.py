"""Detection metrics on a toy score set: ROC staircase, AUROC, AP, and
the per-group table.

Run: python3 demos/04_metrics.py
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from inaad import (
    LabeledScores,
    auroc,
    average_precision,
    evaluate_groups,
    make_rng,
    roc_curve,
)

rng = make_rng(3)
normals = rng.normal(0.0, 1.0, 120)
subtle = rng.normal(0.8, 1.0, 40)
obvious = rng.normal(2.5, 1.0, 40)

scores = np.concatenate([normals, subtle, obvious])
labels = np.array([0] * 120 + [1] * 80)
groups = tuple(["normal"] * 120 + ["subtle"] * 40 + ["obvious"] * 40)
labeled = LabeledScores(scores, labels, groups)

print(f"overall AUROC {auroc(labeled):.3f}  AP {average_precision(labeled):.3f}")
print(f"{'group':<10s} {'n':>4s} {'auroc':>7s} {'ap':>7s}")
for row in evaluate_groups(labeled):
    print(f"{row.group:<10s} {row.n:>4d} {row.auroc:>7.3f} {row.ap:>7.3f}")

curve = roc_curve(labeled)
plt.figure(figsize=(4.4, 4.2))
plt.plot(curve.fpr, curve.tpr, drawstyle="steps-post")
plt.plot([0, 1], [0, 1], "k:", linewidth=0.8)
plt.xlabel("false positive rate")
plt.ylabel("true positive rate")
plt.title(f"ROC (AUROC {auroc(labeled):.3f})")
plt.tight_layout()
plt.savefig("demos/out_roc.png", dpi=120)
print("wrote demos/out_roc.png")
