"""A^n along one path, three ways: the direct power and both recursive formulas."""

from stable_girsanov import ProcessSpec, SimMode, f_theta, simulate_path
from stable_girsanov.functional import (
    a_power_direct,
    a_power_formula_backward,
    a_power_formula_forward,
    accumulate,
)

spec = ProcessSpec()
fspec = f_theta(0.3, spec)
l = 2

path = simulate_path(spec, 0.0, 1.0, l, 1.0 / l, SimMode.PIECEWISE_CONSTANT, seed=7, path_index=3)
trace = accumulate(path, fspec, spec, l)
print(f"{len(path.large_jumps)} large jumps; B={trace.b_t:.6f} D={trace.d_t:.6f} L={trace.l_weight:.6f}")

print(f"{'n':>2} {'direct':>14} {'forward':>14} {'backward':>14}")
for n in range(1, 6):
    direct = a_power_direct(trace, n)
    fwd = a_power_formula_forward(trace, path, fspec, spec, l, n)
    bwd = a_power_formula_backward(trace, path, fspec, spec, l, n)
    print(f"{n:>2} {direct:>14.6e} {fwd:>14.6e} {bwd:>14.6e}")

# the same sums in rational arithmetic agree exactly
exact = a_power_formula_backward(trace, path, fspec, spec, l, 5, exact=True)
print("exact backward == exact direct:", exact == a_power_direct(trace, 5, exact=True))
