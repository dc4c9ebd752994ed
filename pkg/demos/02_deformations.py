"""
Glyphs and their deformations
=============================

The 26 built-in 36x36 glyphs are deformed by scaling, rotation, shifting and
salt-and-pepper noise, in that order.
"""

import numpy as np

from memnet import TEST_DIST, TRAIN_DIST, DeformationParams, deform, load_glyphs, sample_params


def show(bmp):
    # two characters per pixel keep the aspect ratio roughly square
    print("\n".join("".join("##" if v else "  " for v in row) for row in bmp[::2]))


glyphs = load_glyphs()
print(glyphs.provenance, glyphs.bitmaps.shape)
show(glyphs["R"])

rng = np.random.default_rng(1)

# A fixed deformation: 20 degrees clockwise, 10% larger, 3 px right.
params = DeformationParams(noise_p=0.05, rotation_deg=20.0, scale=1.1, shift_x=3)
show(deform(glyphs["R"], params, rng))

# Random draws from the training and test distributions.
for name, dist in (("train", TRAIN_DIST), ("test", TEST_DIST)):
    p = sample_params(dist, rng)
    print(f"{name}: noise {p.noise_p:.3f} rotation {p.rotation_deg:.1f} deg "
          f"scale {p.scale:.3f} shift ({p.shift_x}, {p.shift_y})")
    show(deform(glyphs["R"], p, rng))
