"""Transformed density at t = 0.5: reference p, series sum and weighted Monte Carlo."""

import warnings

import numpy as np

from stable_girsanov import GridSpec, Histogram, ProcessSpec, ReferenceDensity, f_theta, mc_density, qn_recursion, sum_series

spec = ProcessSpec()
ref = ReferenceDensity()
fspec = f_theta(0.3, spec)
t, l = 0.5, 5

grid = GridSpec()
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    table = qn_recursion(spec, fspec, ref, grid, t, l, n_max=4)
row = sum_series(table, K_hint=0.5, c1_hint=1.0).values[grid.index_of(0.0)]

z = np.arange(-3.0, 3.01, 0.5)
est = mc_density(spec, fspec, ref, 0.0, t, l, 50_000, estimator=Histogram(0.1), seed=1, z_grid=z)
print(f"mean weight {est.mean_weight:.4f} +- {est.mean_weight_se:.4f}")
print(f"{'z':>5} {'p':>9} {'series':>9} {'MC':>9} {'se':>8}")
for k, zk in enumerate(z):
    print(f"{zk:>5.1f} {ref.density(t, abs(zk)):>9.5f} {row[grid.index_of(zk)]:>9.5f} "
          f"{est.values[k]:>9.5f} {est.std_err[k]:>8.5f}")
