# %% [markdown]
# # Noise floors of the synthetic benchmarks
#
# The best possible forecast of a Compose series is its deterministic part, so
# the irreducible error is set by the noise alone.

# %%
import numpy as np

from mfrs.synthbench import GaussianNoise, PoissonNoise, optimal_metrics, optimal_prediction_check

for s in range(1, 6):
    m = optimal_metrics(GaussianNoise(0, s))
    print(f"gaussian sigma={s}: MSE {m.mse_opt:.3f}  MAE {m.mae_opt:.3f}")
for lam in range(1, 6):
    m = optimal_metrics(PoissonNoise(lam))
    print(f"poisson lambda={lam}: MSE {m.mse_opt:.3f}  MAE {m.mae_opt:.3f}")

# %% [markdown]
# Shifting the oracle forecast by delta raises the MSE by delta squared; the
# minimum sits at zero shift.

# %%
rep = optimal_prediction_check(GaussianNoise(0, 1), deltas=np.linspace(-1, 1, 9))
for d, mse in zip(rep.deltas, rep.mse):
    print(f"delta {d:+.2f}  MSE {mse:.3f}")
