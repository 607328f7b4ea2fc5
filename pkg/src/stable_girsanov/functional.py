"""Additive functionals along a simulated path and the power formulas for A^n.

With truncation level ``l``:

* ``B_t`` sums ``ln(1 + F(X_{s-}, X_s))`` over jumps of size >= 1/l,
* ``D_t = int_0^t kappa_F(X_s) ds`` with
  ``kappa_F(x) = int_{|y-x| > 1/l} F(x, y) N(x, dy)``,
* ``A = B - D`` and the weight ``L_t = exp(A_t)``.

The power formulas evaluate every Stieltjes integral with the post-jump value
of ``A`` at jump times.
"""

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .exceptions import ConfigError, DomainError
from .model import sphere_area
from .sim import SimMode

__all__ = [
    "FunctionalTrace",
    "compensator_rate",
    "accumulate",
    "a_power_direct",
    "a_power_formula_forward",
    "a_power_formula_backward",
    "identity_errors",
    "write_traces_csv",
]

_QUAD_TOL = 1e-13
_rate_cache = {}


def _radial_rate(spec, fspec, l):
    key = (id(spec), id(fspec), l)
    hit = _rate_cache.get(key)
    if hit is not None and hit[0] is spec and hit[1] is fspec:
        return hit[2]
    alpha = spec.alpha
    lo = 1.0 / l

    def g(r):
        return fspec.radial(r) * r ** (-1.0 - alpha)

    pieces = [(lo, max(lo, 1.0)), (max(lo, 1.0), np.inf)]
    total = 0.0
    for a, b in pieces:
        if b > a:
            total += integrate.quad(g, a, b, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)[0]
    value = 2.0 * spec.c_max * spec.m_bar * sphere_area(spec.dim) * total
    if len(_rate_cache) > 256:
        _rate_cache.clear()
    _rate_cache[key] = (spec, fspec, value)
    return value


def compensator_rate(spec, fspec, l, x):
    """kappa_F(x) = int_{|y-x| > 1/l} 2 C(x,y) F(x,y) |x-y|^{-(d+alpha)} M(y) dy.

    Homogeneous specs with a radial ``fspec`` reduce to one radial integral;
    otherwise (dim 1) both half-lines are integrated adaptively.
    """
    if fspec.is_zero:
        return 0.0
    if spec.homogeneous and fspec.radial is not None:
        return _radial_rate(spec, fspec, l)
    if spec.dim != 1:
        raise DomainError("state-dependent compensator is implemented for dim=1")
    x = float(x)
    alpha = spec.alpha
    lo = 1.0 / l
    total = 0.0
    for sign in (1.0, -1.0):

        def g(h, sign=sign):
            y = x + sign * h
            return 2.0 * spec.c_factor(x, y) * fspec.f(x, y) * spec.density_m(y) * h ** (-1.0 - alpha)

        for a, b in ((lo, max(lo, 1.0)), (max(lo, 1.0), np.inf)):
            if b > a:
                total += integrate.quad(g, a, b, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)[0]
    return total


@dataclass(frozen=True, eq=False)
class FunctionalTrace:
    """Functionals of one path at its horizon.

    ``seg_kappa`` holds kappa_F on each segment, ``seg_dur`` its length,
    ``seg_jump`` the increment of ``B`` at each segment's left end (zero for
    the first segment and for jumps below 1/l), and ``seg_a`` the post-jump
    value of ``A`` at each left end.
    """

    path_index: int
    b_t: float
    d_t: float
    a_log: float
    a_mart: float
    l_weight: float
    per_jump: tuple
    seg_kappa: np.ndarray
    seg_dur: np.ndarray
    seg_jump: np.ndarray
    seg_a: np.ndarray


def accumulate(path, fspec, spec, l):
    """Evaluate B, D, A (both conventions) and L along ``path``.

    Raises
    ------
    ConfigError
        If the path was simulated with another ``l`` or, in piecewise-constant
        mode, with ``epsilon != 1/l``.
    DomainError
        If ``1 + F <= 0`` at a recorded jump.
    """
    if path.l != l:
        raise ConfigError(f"path simulated with l={path.l}, functional requested with l={l}", key="l")
    if path.mode is SimMode.PIECEWISE_CONSTANT and not math.isclose(path.epsilon, 1.0 / l):
        raise ConfigError("piecewise-constant paths must use epsilon = 1/l", key="epsilon")
    n_seg = path.n_segments
    if spec.homogeneous and (fspec.radial is not None or fspec.is_zero):
        seg_kappa = np.full(n_seg, compensator_rate(spec, fspec, l, path.x0))
    else:
        seg_kappa = np.array([compensator_rate(spec, fspec, l, s) for s in path.seg_state])
    seg_jump = np.zeros(n_seg)
    per_jump = []
    f_sum = 0.0
    if path.large_jumps:
        starts = path.seg_start
        for k, jump in enumerate(path.large_jumps):
            f = float(fspec.f(jump.pre_state, jump.post_state))
            if not 1.0 + f > 0:
                raise DomainError(
                    f"1 + F = {1.0 + f:.6g} <= 0 at jump {k} (t={jump.time}); inf F > -1 is violated"
                )
            ln1p = math.log1p(f)
            idx = int(np.searchsorted(starts, jump.time))
            if idx >= n_seg or starts[idx] != jump.time:
                raise DomainError(f"jump at t={jump.time} is not a segment boundary")
            seg_jump[idx] = ln1p
            per_jump.append((k, ln1p, f))
            f_sum += f
    durations = path.seg_end - path.seg_start
    drift = seg_kappa * durations
    # A at each segment's left end, after the jump there
    seg_a = np.cumsum(seg_jump) - np.concatenate([[0.0], np.cumsum(drift)[:-1]])
    b_t = float(seg_jump.sum())
    d_t = float(drift.sum())
    a_log = float(seg_a[-1] - drift[-1])
    return FunctionalTrace(
        path_index=path.path_index,
        b_t=b_t,
        d_t=d_t,
        a_log=a_log,
        a_mart=f_sum - d_t,
        l_weight=math.exp(a_log),
        per_jump=tuple(per_jump),
        seg_kappa=seg_kappa,
        seg_dur=durations,
        seg_jump=seg_jump,
        seg_a=seg_a,
    )


def _exact_path(trace):
    """Rational copies of the segment data and the post-jump A at left ends."""
    kappa = [Fraction(float(v)) for v in trace.seg_kappa]
    dur = [Fraction(float(v)) for v in trace.seg_dur]
    jump = [Fraction(float(v)) for v in trace.seg_jump]
    seg_a = []
    a = Fraction(0)
    for k in range(len(kappa)):
        a += jump[k]
        seg_a.append(a)
        a -= kappa[k] * dur[k]
    return kappa, dur, jump, seg_a, a


def a_power_direct(trace, n, exact=False):
    """(A_T)^n; ``exact=True`` returns a Fraction built from the float path data."""
    if n < 1 or n > 12:
        raise DomainError("n must lie in 1..12")
    if exact:
        return _exact_path(trace)[4] ** n
    return trace.a_log**n


@lru_cache(maxsize=None)
def _rational_rule(m):
    """Midpoint-node interpolatory rule on [0, 1] with rational weights, exact in degree m-1."""
    nodes = [Fraction(2 * j + 1, 2 * m) for j in range(m)]
    # solve sum_j w_j u_j^k = 1/(k+1), k < m, by Gaussian elimination in Q
    rows = [[u**k for u in nodes] + [Fraction(1, k + 1)] for k in range(m)]
    for c in range(m):
        piv = next(r for r in range(c, m) if rows[r][c] != 0)
        rows[c], rows[piv] = rows[piv], rows[c]
        for r in range(m):
            if r != c and rows[r][c] != 0:
                factor = rows[r][c] / rows[c][c]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[c])]
    weights = [rows[k][m] / rows[k][k] for k in range(m)]
    return tuple(nodes), tuple(weights)


def _segment_integral(trace, n, integrand):
    """sum over segments of int integrand(A_s) (-kappa) ds, Gauss-Legendre exact in degree 2n-1."""
    g, w = leggauss(max(n, 1))
    durations = trace.seg_dur
    # A_s = seg_a - kappa (s - start) at nodes of each segment
    u = (g + 1.0) / 2.0
    a_nodes = trace.seg_a[:, None] - trace.seg_kappa[:, None] * durations[:, None] * u[None, :]
    vals = integrand(a_nodes) @ (w / 2.0)
    return float(np.sum(-trace.seg_kappa * durations * vals))


def _segment_integral_exact(data, n, integrand):
    kappa, dur, _, seg_a, _ = data
    nodes, weights = _rational_rule(n)
    total = Fraction(0)
    for k in range(len(kappa)):
        if kappa[k] == 0:
            continue
        inner = sum(wj * integrand(seg_a[k] - kappa[k] * dur[k] * uj) for uj, wj in zip(nodes, weights))
        total -= kappa[k] * dur[k] * inner
    return total


def a_power_formula_forward(trace, path, fspec, spec, l, n, exact=False):
    """A_T^n = sum_i (-1)^{i-1} C(n,i) int A_s^{n-i} (ln(1+F))^{i-1} 1_{jump >= 1/l} dA_s.

    Only the ``i = 1`` term has a continuous part; jump terms use the post-jump
    A.  With ``exact=True`` the sums run in rational arithmetic on the float
    path data and the result is a Fraction.
    """
    _check(trace, path, l, n)
    if exact:
        data = _exact_path(trace)
        total = n * _segment_integral_exact(data, n, lambda a: a ** (n - 1))
        jumps, seg_a = data[2], data[3]
    else:
        total = n * _segment_integral(trace, n, lambda a: a ** (n - 1))
        jumps, seg_a = trace.seg_jump, trace.seg_a
    for k in np.nonzero(trace.seg_jump)[0]:
        gk = jumps[k]
        post = seg_a[k]
        for i in range(1, n + 1):
            total += (-1) ** (i - 1) * comb(n, i) * post ** (n - i) * gk ** (i - 1) * gk
    return total


def a_power_formula_backward(trace, path, fspec, spec, l, n, exact=False):
    """A_T^n = sum_i C(n,i) int (A_T - A_s)^{n-i} (ln(1+F))^{i-1} 1_{jump >= 1/l} dA_s."""
    _check(trace, path, l, n)
    if exact:
        data = _exact_path(trace)
        a_t = data[4]
        total = n * _segment_integral_exact(data, n, lambda a: (a_t - a) ** (n - 1))
        jumps, seg_a = data[2], data[3]
    else:
        a_t = trace.a_log
        total = n * _segment_integral(trace, n, lambda a: (a_t - a) ** (n - 1))
        jumps, seg_a = trace.seg_jump, trace.seg_a
    for k in np.nonzero(trace.seg_jump)[0]:
        gk = jumps[k]
        gap = a_t - seg_a[k]
        for i in range(1, n + 1):
            total += comb(n, i) * gap ** (n - i) * gk ** (i - 1) * gk
    return total


def _check(trace, path, l, n):
    if n < 1 or n > 12:
        raise DomainError("n must lie in 1..12")
    if path.l != l or trace.path_index != path.path_index:
        raise ConfigError("trace, path and l do not belong together", key="l")


def identity_errors(trace, path, fspec, spec, l, n, exact=False):
    """Relative errors of both formulas against the direct power.

    In float arithmetic returns ``(forward, backward, scale)`` with errors
    measured against ``scale = max(|A_T^n|, max_s |A_s|^n)``: the formulas add
    terms of size up to ``max_s |A_s|^n``, which sets the rounding floor.  With
    ``exact=True`` the plain relative errors ``|formula - A_T^n| / |A_T^n|``
    are returned (as floats) and ``scale = |A_T^n|``.
    """
    if exact:
        direct = a_power_direct(trace, n, exact=True)
        fwd = a_power_formula_forward(trace, path, fspec, spec, l, n, exact=True)
        bwd = a_power_formula_backward(trace, path, fspec, spec, l, n, exact=True)
        if direct == 0:
            return float(abs(fwd)), float(abs(bwd)), 0.0
        return float(abs(fwd - direct) / abs(direct)), float(abs(bwd - direct) / abs(direct)), float(abs(direct))
    direct = a_power_direct(trace, n)
    fwd = a_power_formula_forward(trace, path, fspec, spec, l, n)
    bwd = a_power_formula_backward(trace, path, fspec, spec, l, n)
    ends = trace.seg_a - trace.seg_kappa * trace.seg_dur
    pre = trace.seg_a - trace.seg_jump
    peak = float(np.max(np.abs(np.concatenate([trace.seg_a, ends, pre]))))
    scale = max(abs(direct), peak**n)
    if scale == 0:
        return abs(fwd), abs(bwd), 0.0
    return abs(fwd - direct) / scale, abs(bwd - direct) / scale, scale


def write_traces_csv(traces, fh):
    """CSV with columns path_id, b_t, d_t, a_log, l_weight."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["path_id", "b_t", "d_t", "a_log", "l_weight"])
    for tr in traces:
        writer.writerow(
            [tr.path_index] + [format(v, ".17g") for v in (tr.b_t, tr.d_t, tr.a_log, tr.l_weight)]
        )
