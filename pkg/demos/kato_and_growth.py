"""Short-time smallness: the Kato functional C_t and the fitted growth rate K."""

import warnings

from stable_girsanov import GridSpec, ProcessSpec, ReferenceDensity, f_theta, fit_growth, kato_Ct
from stable_girsanov.series import qbar_recursion

spec = ProcessSpec()
ref = ReferenceDensity()
grid = GridSpec()

for theta in (0.3, 1.0):
    fspec = f_theta(theta, spec)
    print(f"theta = {theta}")
    for t, c_t in kato_Ct(spec, fspec, ref, [0.1, 0.25, 0.5, 1.0], grid):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_growth(qbar_recursion(spec, fspec, ref, grid, t, 4))
        print(f"  t={t:<5} C_t={c_t:.4f}  K={fit.k:.3f}  {'converges' if fit.converges else 'no bound'}")
