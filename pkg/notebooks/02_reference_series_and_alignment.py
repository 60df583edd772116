# %% [markdown]
# # Reference series and aligning an untimed window
#
# Every base pattern becomes one column of a deterministic reference series.
# At prediction time a window without timestamps is located against the tail
# of the training data by sliding Pearson correlation.

# %%
from fractions import Fraction

import numpy as np

from mfrs.alignment import align, intercept
from mfrs.refseries import generate
from mfrs.synthbench import compose_spec, generate_compose

freqs = [Fraction(1, 72), Fraction(1, 24), Fraction(1, 18)]
for waveform in ("sine", "sawtooth", "rectangle", "pulse"):
    rs = generate(freqs, 144, waveform)
    print(f"{waveform:9s}", rs.header(), np.round(rs.values[:4, 1], 3))

# %% [markdown]
# Now the alignment. The observation is cut from an arbitrary point after the
# training block, so its offset is only known modulo the longest period (72).

# %%
data = generate_compose(compose_spec("compose1", sigma=0.5, length=6000, seed=3))
X = data.X.values
block, off = intercept(X[:4000], 72, 96)
start = 4000 + 1234
res = align(X[start:start + 96], block, 72, channels=None)
print("xi", res.xi, "score", round(res.score, 3))
print("recovered", (off + res.xi) % 72, "true", start % 72)

# %% [markdown]
# Rescaling one channel leaves the score vector unchanged, since Pearson
# correlation ignores affine changes.

# %%
obs = X[start:start + 96].copy()
obs[:, 1] = 10 * obs[:, 1] + 4
print(np.max(np.abs(align(obs, block, 72, channels=None).scores - res.scores)))
