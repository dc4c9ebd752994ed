"""
How often does the test protocol erase the character?
=====================================================

Shifts are drawn from a normal distribution with a 15 px spread, truncated
at three spreads (45 px).  A shift of 36 px or more moves a 36 px glyph
completely off the canvas, leaving only noise.  No recogniser can do better
than chance on those samples, which caps the achievable accuracy.
"""

import numpy as np
from scipy.stats import norm

from memnet import TEST_DIST, load_glyphs, sample_params

width = load_glyphs().shape[1]
sigma = TEST_DIST.sigma_shift

# rounding sends |draw| >= width - 0.5 to a shift of at least the width
z = (width - 0.5) / sigma
per_axis = 2 * (norm.cdf(-z) - norm.cdf(-3)) / (1 - 2 * norm.cdf(-3))
p_blank = 1 - (1 - per_axis) ** 2
print(f"analytic: {p_blank:.4f} of test samples are blank")

rng = np.random.default_rng(0)
draws = [sample_params(TEST_DIST, rng) for _ in range(100_000)]
mc = np.mean([max(abs(p.shift_x), abs(p.shift_y)) >= width for p in draws])
print(f"Monte Carlo: {mc:.4f}")

# A blank image yields one code, which decodes to at most one letter.
print(f"accuracy ceiling: {1 - p_blank * 25 / 26:.4f}")
