"""Seam quality: boundary-encoded tiled translation vs a naive baseline.

Both pipelines run the same DDIM inversion + structure-injected sampling on
a synthetic circular panorama.  The full pipeline extends the input, denoises
it as overlapping windows (including a stitch patch spanning the wrap), and
crops back; the baseline runs the untiled, non-extended translation with a
wrap-blind denoiser.  The seam ratio — wrap-column gap over mean interior
column gap — is ~1 for a seamless panorama and grows with a visible crack.
"""

import numpy as np

from pant360 import evalkit
from pant360.denoisers import prompt_conditioning
from pant360.pipeline import PipelineConfig, baseline_translate, translate

cfg = PipelineConfig(width=256, height=64, omega=4, control="pnp",
                     denoiser="conv-toy", denoiser_seed=7,
                     prompt="watercolor painting")
target = prompt_conditioning(cfg.prompt)

ours, base = [], []
for seed in range(5):
    pano = evalkit.synth_panorama(seed, cfg.width, cfg.height)
    _, r1 = translate(pano, target, cfg)
    _, r2 = baseline_translate(pano, target, cfg)
    ours.append(r1["seam_ratio"])
    base.append(r2["seam_ratio"])
    print(f"seed {seed}: seam_ratio ours={r1['seam_ratio']:.3f} "
          f"({r1['seam_flag']})  baseline={r2['seam_ratio']:.3f} "
          f"({r2['seam_flag']})")

print(f"\nmedian ours     = {np.median(ours):.3f}")
print(f"median baseline = {np.median(base):.3f}")
print("the boundary-encoded pipeline keeps the wrap-column gap at the level "
      "of ordinary interior gradients; the baseline leaves a visible seam.")
