"""Full detection loop on a freshly trained tiny model.

Trains a small diffusion model on 300 phantoms for a few minutes (CPU),
scores a handful of normal and anomalous phantoms with multi-level
inpainted reconstruction, and saves reconstructions plus anomaly
heatmaps. Scores for anomalous inputs should come out higher.

Run: python3 demos/05_detect_anomalies.py      (~10 min on one CPU core)
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from inaad import (
    AnomalySpec,
    InaadConfig,
    PhantomParams,
    ReferenceUNetConfig,
    TrainConfig,
    anomaly_heatmap,
    build_unet,
    generate_anomalous,
    generate_normal,
    linear_schedule,
    score_images,
    train,
)

schedule = linear_schedule(500)
net_config = ReferenceUNetConfig(base_channels=16, channel_mults=(1, 2, 4),
                                 blocks_per_level=2)
net = build_unet(net_config, seed=0)
print(f"training a {net.parameter_count/1e6:.2f}M-parameter denoiser "
      f"on 300 phantoms...")

train_images = np.stack([generate_normal(i)[0] for i in range(300)])
train(train_images, net, schedule,
      TrainConfig(iterations=400, batch_size=16, seed=1))

params = PhantomParams()
cases = []
for k in range(3):
    img, mask = generate_normal(5000 + k)
    cases.append(("normal", img, mask))
for kind in ("cyst_blob", "missing_midline", "shrunken_head"):
    img, mask, _ = generate_anomalous(6000, params,
                                      AnomalySpec(kind=kind, severity=0.8))
    cases.append((kind, img, mask))

config = InaadConfig(noise_levels=(75, 100, 150), inpainting=True)
reports = score_images(np.stack([c[1] for c in cases]),
                       np.stack([c[2] for c in cases]),
                       seeds=list(range(len(cases))),
                       denoiser=net, schedule=schedule, config=config,
                       batch_size=len(cases))

fig, axes = plt.subplots(3, len(cases), figsize=(2.4 * len(cases), 7))
for col, ((name, img, mask), report) in enumerate(zip(cases, reports)):
    print(f"{name:18s} anomaly score {report.anomaly_score:.4f}")
    axes[0, col].imshow(img, cmap="gray", vmin=-1, vmax=1)
    axes[0, col].set_title(f"{name}\nscore {report.anomaly_score:.3f}",
                           fontsize=9)
    axes[1, col].imshow(report.reconstruction, cmap="gray", vmin=-1, vmax=1)
    heat = anomaly_heatmap(img, report.reconstruction, mask, smooth=True)
    axes[2, col].imshow(heat, cmap="inferno", vmin=0.0, vmax=0.6)
    for row in range(3):
        axes[row, col].axis("off")
axes[0, 0].set_ylabel("input")
fig.tight_layout()
fig.savefig("demos/out_detection.png", dpi=120)
print("wrote demos/out_detection.png")
