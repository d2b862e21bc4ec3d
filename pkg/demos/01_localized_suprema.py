"""
Localized suprema on one dataset
================================

Draw one sample from the shipped scenario, compute the four localized
suprema on a grid of radii and locate the minimizer of ``s^2 - E_n(s)``.
"""

# %%
import numpy as np

from exrisk import Histogram, empirical_coefficients, fit, local_sup_curve, preset, sample
from exrisk.locproc import s_grid, variational_s_hat

sc = preset("default")
hist = Histogram(16)
data = sample(sc, 4096, seed=1)

# %%
# The coefficients a, c and M carry everything the suprema need.
coef = empirical_coefficients(data, sc, hist)
print("||a|| =", np.linalg.norm(coef.a), " lambda_max(M) =", np.linalg.eigvalsh(coef.M)[-1])

# %%
grid = s_grid(coef.s_box, points=12, min_ratio=1e-2)
curve = local_sup_curve(coef, grid)
print(f"{'s':>10} {'linear':>12} {'quadratic':>12} {'full':>12}")
for s, lin, quad, full in zip(curve.s, curve.linear, curve.quadratic, curve.full):
    print(f"{s:10.5f} {lin:12.4e} {quad:12.4e} {full:12.4e}")

# %%
# The distance of the least-squares fit to g0 is the argmin of s^2 - E_n(s).
fine = s_grid(coef.s_box, points=2000)
print("s_hat (fit)         =", fit(data, sc, hist).s_hat)
print("s_hat (variational) =", variational_s_hat(coef, fine).s_hat)
