"""Show the synthetic phantom family: a normal head and its four
anomalous variants, generated from the same seed so only the anomaly
differs.

Run: python3 demos/03_phantom_dataset.py
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from inaad import ANOMALY_KINDS, AnomalySpec, PhantomParams, \
    generate_anomalous, generate_normal

SEED = 23
params = PhantomParams()

normal, mask = generate_normal(SEED, params)
fig, axes = plt.subplots(1, len(ANOMALY_KINDS) + 1, figsize=(15, 3.4))
axes[0].imshow(normal, cmap="gray", vmin=-1, vmax=1)
axes[0].set_title("normal")
axes[0].contour(mask, levels=[0.5], colors="cyan", linewidths=0.7)
axes[0].axis("off")

for ax, kind in zip(axes[1:], ANOMALY_KINDS):
    img, m, region = generate_anomalous(SEED, params,
                                        AnomalySpec(kind=kind, severity=0.7))
    ax.imshow(img, cmap="gray", vmin=-1, vmax=1)
    ax.add_patch(plt.Rectangle((region.left, region.top),
                               region.right - region.left,
                               region.bottom - region.top,
                               fill=False, edgecolor="red", linewidth=0.8))
    ax.set_title(kind)
    ax.axis("off")
    print(f"{kind}: ground-truth box rows {region.top}-{region.bottom}, "
          f"cols {region.left}-{region.right}")

fig.tight_layout()
fig.savefig("demos/out_phantoms.png", dpi=120)
print("wrote demos/out_phantoms.png")
