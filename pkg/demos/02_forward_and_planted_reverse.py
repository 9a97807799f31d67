"""Walk a phantom up the noise schedule and back down again.

Corrupts a synthetic head phantom to several levels with the one-jump
forward formula, then reconstructs each with the planted oracle denoiser
(which knows the clean image) to show the reverse chain recovers it
exactly when the noise prediction is perfect.

Run: python3 demos/02_forward_and_planted_reverse.py
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from inaad import (
    InaadConfig,
    forward_diffuse,
    generate_normal,
    linear_schedule,
    planted_denoiser,
    reconstruct_from_level,
    sample_gaussian,
    ssim,
)

schedule = linear_schedule(500)
x0, mask = generate_normal(11)
oracle = planted_denoiser(x0, schedule)
config = InaadConfig(noise_levels=(150,), reverse_noise_scale=0.0)

levels = (50, 150, 300, 500)
fig, axes = plt.subplots(2, len(levels) + 1, figsize=(13, 5.4))
axes[0, 0].imshow(x0, cmap="gray", vmin=-1, vmax=1)
axes[0, 0].set_title("clean x0")
axes[1, 0].axis("off")
axes[0, 0].axis("off")

for col, s in enumerate(levels, start=1):
    eps = sample_gaussian(*x0.shape, seed=1000 + s)
    noisy = forward_diffuse(x0, s, schedule, eps)
    recon = reconstruct_from_level(x0, mask, s, oracle, schedule, config,
                                   seed=2000 + s)
    value = ssim(x0, recon)
    print(f"s={s:3d}: SSIM(x0, reconstruction) = {value:.6f}")
    axes[0, col].imshow(noisy, cmap="gray", vmin=-1.5, vmax=1.5)
    axes[0, col].set_title(f"x_{s}")
    axes[1, col].imshow(recon, cmap="gray", vmin=-1, vmax=1)
    axes[1, col].set_title(f"recon (SSIM {value:.3f})")
    axes[0, col].axis("off")
    axes[1, col].axis("off")

fig.tight_layout()
fig.savefig("demos/out_forward_reverse.png", dpi=120)
print("wrote demos/out_forward_reverse.png")
