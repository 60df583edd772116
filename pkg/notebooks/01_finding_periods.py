# %% [markdown]
# # Finding base patterns in a multivariate series
#
# A traffic-like signal with a daily (24) and weekly (168) cycle, plus a few
# harmonics of the daily shape. We look at the spectrum, the period view and
# what the extractor keeps.

# %%
import numpy as np

from mfrs.basepatterns import analyze, channel_spectra, pooled_period_view
from mfrs.seriescore import MultiSeries

L = 16_800
t = np.arange(L)
rng = np.random.default_rng(0)
daily = np.sin(2 * np.pi * t / 24) + 0.5 * np.sin(4 * np.pi * t / 24) + 0.25 * np.sin(6 * np.pi * t / 24)
weekly = 0.8 * np.sin(2 * np.pi * t / 168)
X = np.stack([daily + weekly, 1.5 * daily + 0.3 * weekly, 0.7 * daily + weekly], axis=1)
series = MultiSeries(X + 0.05 * rng.normal(size=X.shape))

# %% [markdown]
# The period view maps each integer period to the nearest FFT bin. Peaks at
# 24 and 168 dominate; 12 and 8 show up as daily harmonics.

# %%
pv = pooled_period_view(channel_spectra(series))
top = np.argsort(pv.psi)[::-1][:6]
for period in sorted(top):
    print(f"period {period:4d}  psi {pv[period]:10.1f}")

# %%
bps = analyze(series)
print("primary:", bps.primary_periods)
print("harmonics:", [(str(f), round(s, 3)) for f, s in bps.harmonic_freqs])

# %% [markdown]
# Small noise peaks that happen to top their own sweep window can be added to
# the primary list. The true periods are still there, and a manual period can
# always be added on top.

# %%
from mfrs.basepatterns import merge_manual

print(merge_manual(bps, [720]).manual_periods)
