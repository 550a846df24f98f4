"""Boundary continuity encoding: splice, crop back, and window matching.

A 360-degree panorama wraps horizontally, but most image models treat the
left and right edges as unrelated content.  The fix demonstrated here is to
splice two copies of the panorama at a split point `alpha`, so the wrap
region becomes interior content, then crop the translated result back.
"""

import numpy as np

from pant360 import evalkit
from pant360.geometry import ExtendSpec, count_matching_windows, crop_back, extend

WIDTH, HEIGHT = 256, 64

pano = evalkit.synth_panorama(seed=0, width=WIDTH, height=HEIGHT)
print(f"input panorama: {pano.shape}, values in [{pano.min():.3f}, {pano.max():.3f}]")

# --- extend at the default split point alpha = 3W/4 ------------------------
spec = ExtendSpec(alpha=3 * WIDTH // 4, width=WIDTH, height=HEIGHT)
ext = extend(pano, spec)
print(f"extended image: {ext.shape} (twice the width)")

# the two halves of the extended image are the same panorama, rotated:
# column j of the extension holds input column (j + alpha) mod W
halves_equal = np.array_equal(ext[:, :, :WIDTH], ext[:, :, WIDTH:])
print(f"left half == right half (bitwise): {halves_equal}")

# cropping the window [W - alpha, 2W - alpha) recovers the input exactly
recovered = crop_back(ext, spec)
print(f"crop_back(extend(I)) == I (bitwise): {np.array_equal(recovered, pano)}")

# --- how alpha interacts with the sliding-window schedule ------------------
# a window over the extended image reads an exact unrotated copy of the
# input iff its start s satisfies (s + alpha) mod W == 0.  At the paper
# scale (W=1024, omega=16) that gives 2 / 2 / 1 matches for
# alpha = W, W/2, 3W/4 -- fewer matches means the model sees more
# genuinely shifted views of the wrap region.
for alpha in (1024, 512, 768):
    report = count_matching_windows(ExtendSpec(alpha, 1024, 512), omega=16)
    print(f"alpha={alpha:4d}: {report.count} matching windows -> {report.window_ids}")
