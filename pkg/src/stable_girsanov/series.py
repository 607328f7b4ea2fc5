"""Perturbation series for the transformed transition density.

The signed terms satisfy

    q_n(t,x,z) = sum_{i=1}^n C(n,i) int_0^t int int p(s,x,w) K_i(w,dy) q_{n-i}(t-s,y,z) dw ds

with q_0 = p, ``K_i(w,dy) = 2C (ln(1+F))^i 1_{|w-y|>1/l} |w-y|^{-(d+alpha)} m(dy)``
for i >= 2, and the first-order kernel carrying the compensator on the
diagonal: ``K_1(w,dy) = 2C ln(1+F) 1_{...} |w-y|^{-(d+alpha)} m(dy) - kappa_F(w) delta_w(dy)``.
Summed, ``q = sum q_n / n!`` is the density of the process weighted by
``exp(A_t)``.  The dominating terms q-bar use ``p-bar = 2p``, ``F-bar`` and
the constant C-bar, without truncation.

Everything here lives on a uniform grid in dimension one.  Transition
kernels enter as exact cell masses of the reference law, perturbation kernels
as cell integrals (Gauss-Legendre inside each cell) and time integrals as a
composite trapezoid rule on a uniform time lattice.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import DomainError, QuadratureError
from .functional import compensator_rate
from .model import ReferenceDensity, envelope, jump_potential, potential_sup

__all__ = [
    "GridSpec",
    "SeriesTable",
    "SeriesSum",
    "GrowthFit",
    "qn_recursion",
    "qbar_recursion",
    "sum_series",
    "fit_growth",
    "mass_constant",
    "empirical_t2",
    "kernel_G",
    "kato_Ct",
    "lemma_constants",
    "semigroup_check",
    "write_series_csv",
    "series_summary",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform spatial grid and time lattice.

    Parameters
    ----------
    x_max : float
        Nodes cover ``[-x_max, x_max]``.
    n_nodes : int
        Number of nodes (odd keeps 0 on the grid).
    t_quad_order : int
        Number of uniform time panels per composition (composite trapezoid).
    cell_points : int
        Gauss-Legendre points per cell for the perturbation kernels.
    """

    x_max: float = 10.0
    n_nodes: int = 201
    t_quad_order: int = 16
    cell_points: int = 8
    space_quad: str = "cell masses of p, Gauss-Legendre cell integrals of kernels, truncated at x_max"

    def __post_init__(self):
        if self.n_nodes < 3 or self.x_max <= 0:
            raise DomainError("grid needs x_max > 0 and at least 3 nodes")
        if self.t_quad_order < 2 or self.t_quad_order % 2:
            raise DomainError("t_quad_order must be an even integer >= 2")

    @property
    def x_nodes(self):
        return np.linspace(-self.x_max, self.x_max, self.n_nodes)

    @property
    def h(self):
        return 2.0 * self.x_max / (self.n_nodes - 1)

    def index_of(self, x):
        """Index of the node nearest to ``x``."""
        return int(round((x + self.x_max) / self.h))

    def check_horizon(self, t, alpha):
        if self.x_max < 10.0 * t ** (1.0 / alpha) * (1 - 1e-12):
            raise DomainError(f"x_max={self.x_max} < 10 t^(1/alpha) at t={t}")


@dataclass(eq=False)
class SeriesTable:
    """Series terms at time ``t``: ``q[n][i, j]`` = q_n(t, x_i, z_j)."""

    t: float
    grid: GridSpec
    n_max: int
    l: int
    q: np.ndarray
    q_bar: Optional[np.ndarray] = None
    quad_err: np.ndarray = None
    quad_err_bar: Optional[np.ndarray] = None
    form: str = "compensated"
    alpha: float = 1.0

    def envelope(self):
        x = self.grid.x_nodes
        return envelope(self.t, np.abs(x[None, :] - x[:, None]), self.alpha)


# -- discretized operators -----------------------------------------------------


def _require_reference(spec, ref):
    if spec.dim != 1 or ref.dim != 1:
        raise DomainError("series evaluation is implemented for dim=1")
    if not spec.is_reference or spec.alpha != ref.alpha:
        raise DomainError("series evaluation needs the reference stable spec (C = c_alpha/2, M = 1)")


def _transition_masses(ref, grid, times):
    x = grid.x_nodes
    offsets = x[None, :] - x[:, None]
    out = []
    for s in times:
        if s == 0:
            out.append(np.eye(grid.n_nodes))
        else:
            out.append(ref.cell_mass_offsets(s, offsets, grid.h))
    return out


def _cell_kernel(profile, grid, alpha, cutoff=0.0, breaks=()):
    """K[j, k] = int over cell k of profile(w_j, y) |w_j - y|^{-(1+alpha)} dy, zero inside the cutoff.

    Cells are split at ``|y - w| = cutoff`` and at the radii in ``breaks`` so
    that Gauss-Legendre only sees smooth pieces.
    """
    x = grid.x_nodes
    h = grid.h
    n = x.size
    g, w = leggauss(grid.cell_points)
    # offsets u = y - w_j only depend on k - j on a uniform grid
    shift = np.arange(-(n - 1), n) * h
    cuts = sorted({c for r in (cutoff, *breaks) if r > 0 for c in (r, -r)})
    pieces_lo, pieces_hi, owner = [], [], []
    for m, o in enumerate(shift):
        a, b = o - h / 2, o + h / 2
        edges = [a] + [c for c in cuts if a < c < b] + [b]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if cutoff > 0 and abs(0.5 * (lo + hi)) < cutoff:
                continue
            pieces_lo.append(lo)
            pieces_hi.append(hi)
            owner.append(m)
    lo = np.array(pieces_lo)
    hi = np.array(pieces_hi)
    owner = np.array(owner)
    u = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * g[None, :]
    wts = 0.5 * (hi - lo)[:, None] * w[None, :]
    # evaluate the profile for every source node (it need not be translation invariant)
    ws = x[:, None, None]
    ys = ws + u[None, :, :]
    r = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(r > cutoff, profile(ws, ys) * r ** (-1.0 - alpha), 0.0) * wts
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite perturbation kernel on the grid")
    per_piece = vals.sum(-1)
    per_shift = np.zeros((n, shift.size))
    np.add.at(per_shift, (slice(None), owner), per_piece)
    # K[j, k] uses shift index (k - j) + (n - 1)
    idx = np.arange(n)[None, :] - np.arange(n)[:, None] + (n - 1)
    return np.take_along_axis(per_shift, idx, axis=1)


def _breaks(fspec):
    return tuple(getattr(fspec.radial, "kinks", ()))


def _signed_kernels(spec, fspec, grid, l, n_max, form):
    cutoff = 1.0 / l
    c = spec.c_factor
    m = spec.density_m
    alpha = spec.alpha
    kernels = [None]
    for i in range(1, n_max + 1):
        if i == 1 and form == "literal":

            def prof(w, y):
                f = fspec.f(w, y)
                return 2.0 * c(w, y) * (np.log1p(f) - f) * m(y)

        else:

            def prof(w, y, i=i):
                return 2.0 * c(w, y) * np.log1p(fspec.f(w, y)) ** i * m(y)

        kernels.append(_cell_kernel(prof, grid, alpha, cutoff, _breaks(fspec)))
    if form == "compensated":
        x = grid.x_nodes
        if fspec.radial is not None or fspec.is_zero:
            kappa = np.full(x.size, compensator_rate(spec, fspec, l, 0.0))
        else:
            kappa = np.array([compensator_rate(spec, fspec, l, xi) for xi in x])
        kernels[1] = kernels[1] - np.diag(kappa)
    return kernels


def _bar_kernels(spec, fspec, grid, n_max):
    m = spec.density_m
    cb = fspec.c_bar
    kernels = [None]
    for i in range(1, n_max + 1):
        power = 2 if i == 1 else i
        coef = cb if i == 1 else cb**i

        def prof(w, y, power=power, coef=coef):
            return coef * fspec.fbar(w, y) ** power * m(y)

        kernels.append(_cell_kernel(prof, grid, spec.alpha, 0.0, _breaks(fspec)))
    return kernels


def _recurse(masses, kernels, n_max, dt, h, lead=1.0):
    """Trapezoid-in-time recursion; returns Q[n][k] = q_n(k dt) (density units)."""
    n_t = len(masses) - 1
    size = masses[0].shape[0]
    eye = np.eye(size)
    q = [[lead * masses[k] / h for k in range(n_t + 1)]]
    q[0][0] = lead * eye / h
    pk = {(i, j): lead * (masses[j] @ kernels[i]) for i in range(1, n_max + 1) for j in range(n_t + 1)}
    for n in range(1, n_max + 1):
        level = [np.zeros((size, size))]
        for k in range(1, n_t + 1):
            acc = np.zeros((size, size))
            for i in range(1, n + 1):
                sub = q[n - i]
                coef = comb(n, i) * dt
                for j in range(k + 1):
                    if n - i > 0 and j == k:
                        continue
                    wgt = 0.5 if j in (0, k) else 1.0
                    acc += (coef * wgt) * (pk[i, j] @ sub[k - j])
            if not np.all(np.isfinite(acc)):
                raise QuadratureError(f"non-finite value at level {n}")
            level.append(acc)
        q.append(level)
    return q


def _run(masses_full, kernels, n_max, t, h, lead):
    n_t = len(masses_full) - 1
    fine = _recurse(masses_full, kernels, n_max, t / n_t, h, lead)
    coarse = _recurse(masses_full[::2], kernels, n_max, 2 * t / n_t, h, lead)
    err = np.array([0.0] + [np.max(np.abs(fine[n][-1] - coarse[n][-1])) for n in range(1, n_max + 1)])
    return fine, err


def _signed_levels(spec, fspec, ref, grid, t, l, n_max, form):
    n_t = grid.t_quad_order
    masses = _transition_masses(ref, grid, t * np.arange(n_t + 1) / n_t)
    kernels = _signed_kernels(spec, fspec, grid, l, n_max, form)
    levels, err = _run(masses, kernels, n_max, t, grid.h, 1.0)
    return [None] + [levels[n][-1] for n in range(1, n_max + 1)], err


def qn_recursion(spec, fspec, ref, grid, t, l, n_max, form="compensated", quad_tol=1e-2,
                 richardson=False):
    """Signed series terms q_0..q_n_max at time ``t`` on ``grid``.

    Parameters
    ----------
    form : {"compensated", "literal"}
        ``"compensated"`` puts ``-kappa_F`` on the diagonal of the first-order
        kernel, which makes ``sum q_n / n!`` the density of the weighted
        process.  ``"literal"`` uses ``2C (ln(1+F) - F) |w-y|^{-(1+alpha)}``
        as an off-diagonal kernel instead; its series sums back to ``p``.
    quad_tol : float
        A warning is issued when the error estimate of any level exceeds this.
    richardson : bool
        Also solve on the grid with half the spacing and combine the two
        O(h^2)-accurate results as ``(4 q_fine - q_coarse) / 3`` on the
        coarse nodes.

    Returns
    -------
    SeriesTable
        ``q[0]`` holds ``p`` at the nodes; ``quad_err[n]`` is the max change
        when the number of time panels is halved (and, with ``richardson``,
        at least the size of the spatial correction).
    """
    if not t > 0 or n_max < 1:
        raise DomainError("need t > 0 and n_max >= 1")
    if form not in ("compensated", "literal"):
        raise DomainError(f"unknown form {form!r}")
    _require_reference(spec, ref)
    grid.check_horizon(t, spec.alpha)
    levels, err = _signed_levels(spec, fspec, ref, grid, t, l, n_max, form)
    if richardson:
        fine_grid = GridSpec(grid.x_max, 2 * grid.n_nodes - 1, grid.t_quad_order, grid.cell_points)
        fine, fine_err = _signed_levels(spec, fspec, ref, fine_grid, t, l, n_max, form)
        for n in range(1, n_max + 1):
            corr = (fine[n][::2, ::2] - levels[n]) / 3.0
            levels[n] = levels[n] + 4.0 * corr
            err[n] = max(err[n], fine_err[n], float(np.max(np.abs(corr))))
    x = grid.x_nodes
    q = np.array([ref.density(t, np.abs(x[None, :] - x[:, None]))] + [levels[n] for n in range(1, n_max + 1)])
    if np.any(err > quad_tol):
        warnings.warn(f"time-quadrature error estimate {err.max():.3g} exceeds {quad_tol:g}", RuntimeWarning)
    return SeriesTable(t=t, grid=grid, n_max=n_max, l=l, q=q, quad_err=err, form=form, alpha=spec.alpha)


def qbar_recursion(spec, fspec, ref, grid, t, n_max, table=None, quad_tol=1e-2):
    """Dominating terms q-bar_0..q-bar_n_max; fills ``table.q_bar`` when given."""
    if not t > 0 or n_max < 1:
        raise DomainError("need t > 0 and n_max >= 1")
    _require_reference(spec, ref)
    grid.check_horizon(t, spec.alpha)
    n_t = grid.t_quad_order
    masses = _transition_masses(ref, grid, t * np.arange(n_t + 1) / n_t)
    kernels = _bar_kernels(spec, fspec, grid, n_max)
    levels, err = _run(masses, kernels, n_max, t, grid.h, 2.0)
    x = grid.x_nodes
    p_bar = 2.0 * ref.density(t, np.abs(x[None, :] - x[:, None]))
    q_bar = np.array([p_bar] + [levels[n][-1] for n in range(1, n_max + 1)])
    if np.any(err > quad_tol):
        warnings.warn(f"time-quadrature error estimate {err.max():.3g} exceeds {quad_tol:g}", RuntimeWarning)
    if table is not None:
        if table.t != t or table.grid != grid or table.n_max != n_max:
            raise DomainError("table does not match (t, grid, n_max)")
        table.q_bar = q_bar
        table.quad_err_bar = err
        return table
    return SeriesTable(t=t, grid=grid, n_max=n_max, l=0, q=np.zeros_like(q_bar), q_bar=q_bar,
                       quad_err=np.zeros(n_max + 1), quad_err_bar=err, alpha=spec.alpha)


# -- growth, summation ---------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    """Log-linear fit ``max q-bar_n / (n! E) ~ C1~ K^n`` over n = 1..n_max."""

    k: float
    c1_tilde: float
    ratios: tuple

    @property
    def converges(self):
        return self.k < 1


def fit_growth(table):
    """Fit (K, C1~) from the dominating terms of ``table``."""
    if table.q_bar is None:
        raise DomainError("table has no q_bar; run qbar_recursion first")
    env = table.envelope()
    ratios = []
    for n in range(1, table.n_max + 1):
        ratios.append(float(np.max(table.q_bar[n] / (factorial(n) * env))))
    ratios = np.array(ratios)
    if np.any(ratios <= 0):
        return GrowthFit(0.0, 0.0, tuple(ratios))
    ns = np.arange(1, table.n_max + 1)
    if ns.size == 1:
        slope, intercept = 0.0, math.log(ratios[0])
    else:
        slope, intercept = np.polyfit(ns, np.log(ratios), 1)
    return GrowthFit(float(math.exp(slope)), float(math.exp(intercept)), tuple(ratios.tolist()))


def mass_constant(table, c_t, k):
    """Smallest C~ with int q-bar_n(t,x,z) dz <= C~ C_t n! K^n at every node x (and with x, z swapped)."""
    if table.q_bar is None:
        raise DomainError("table has no q_bar")
    h = table.grid.h
    best = 0.0
    for n in range(1, table.n_max + 1):
        row = table.q_bar[n].sum(axis=1).max() * h
        col = table.q_bar[n].sum(axis=0).max() * h
        best = max(best, max(row, col) / (c_t * factorial(n) * k**n))
    return float(best)


@dataclass(frozen=True)
class SeriesSum:
    values: np.ndarray
    remainder: Optional[np.ndarray]
    k: float
    c1_tilde: float
    warning: Optional[str] = None


def sum_series(table, K_hint=None, c1_hint=None):
    """sum_{n <= n_max} q_n / n! with the geometric remainder bound C1~ K^{n+1} / (1-K) E."""
    values = sum(table.q[n] / factorial(n) for n in range(table.n_max + 1))
    k, c1 = K_hint, c1_hint
    if (k is None or c1 is None) and table.q_bar is not None:
        fit = fit_growth(table)
        k = fit.k if k is None else k
        c1 = fit.c1_tilde if c1 is None else c1
    if k is None or c1 is None:
        return SeriesSum(values, None, float("nan"), float("nan"), "no growth fit available")
    if k >= 1:
        msg = f"fitted K={k:.4g} >= 1: remainder bound unavailable"
        warnings.warn(msg, RuntimeWarning)
        return SeriesSum(values, None, k, c1, msg)
    remainder = c1 * k ** (table.n_max + 1) / (1 - k) * table.envelope()
    return SeriesSum(values, remainder, k, c1)


def empirical_t2(fits):
    """Largest probe time whose fitted K is below 1; ``fits`` maps t -> GrowthFit (or K)."""
    good = [t for t, f in fits.items() if (f.k if isinstance(f, GrowthFit) else f) < 1]
    return max(good) if good else None


def semigroup_check(spec, fspec, ref, grid, t, s, l, n_max=4, x=0.0, z=0.0):
    """Compare int q(t,x,y) q(s,y,z) dy with q(t+s,x,z) using series-summed q.

    Returns ``(lhs, rhs, relative_difference)``.
    """
    i, j = grid.index_of(x), grid.index_of(z)
    q_t = sum_series(qn_recursion(spec, fspec, ref, grid, t, l, n_max)).values
    q_s = q_t if s == t else sum_series(qn_recursion(spec, fspec, ref, grid, s, l, n_max)).values
    q_ts = sum_series(qn_recursion(spec, fspec, ref, grid, t + s, l, n_max)).values
    lhs = float(q_t[i] @ q_s[:, j] * grid.h)
    rhs = float(q_ts[i, j])
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


# -- the double composition G ---------------------------------------------------


def _simplex_weight(i, j, k):
    zeros = (i == 0) + (j == 0) + (k == 0)
    return (1.0, 0.5, 1.0 / 6.0)[zeros]


def kernel_G(spec, fspec, ref, grid, t, x, z):
    """Double composition of p-bar with the kernel F-bar^2 |w-y|^{-(1+alpha)} m(dy).

    The time simplex ``s1 + s2 + s3 = t`` is covered by the lattice of step
    ``t / grid.t_quad_order`` with weights symmetric in (s1, s2, s3); the
    chain is evaluated starting from ``x``.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    _require_reference(spec, ref)
    if fspec.is_zero:
        return 0.0
    n_t = grid.t_quad_order
    dt = t / n_t
    masses = [2.0 * m for m in _transition_masses(ref, grid, dt * np.arange(n_t + 1))]
    ker = _cell_kernel(lambda w, y: fspec.fbar(w, y) ** 2 * spec.density_m(y), grid, spec.alpha, 0.0,
                       _breaks(fspec))
    ix, iz = grid.index_of(x), grid.index_of(z)
    first = [masses[a][ix] @ ker for a in range(n_t + 1)]
    total = 0.0
    for a in range(n_t + 1):
        for b in range(n_t + 1 - a):
            c = n_t - a - b
            second = (first[a] @ masses[b]) @ ker
            total += _simplex_weight(a, b, c) * float(second @ masses[c][:, iz])
    return total * dt * dt / grid.h


# -- Kato functional -----------------------------------------------------------


def kato_Ct(spec, fspec, ref, t_list, grid=None, strict=True):
    """C_t = sup_x int_0^t int p-bar(s,x,w) mu(dw) ds with mu's density int F-bar^2 |w-y|^{-(d+alpha)} dy.

    Returns a list of ``(t, C_t)``.  With ``strict`` a table that is not
    strictly increasing raises :class:`QuadratureError`.
    """
    t_list = list(t_list)
    if not t_list or any(t <= 0 for t in t_list) or sorted(t_list) != t_list:
        raise DomainError("t_list must be positive and ascending")
    if spec.dim != 1:
        raise DomainError("kato_Ct is implemented for dim=1")
    grid = grid or GridSpec()
    nodes = grid.x_nodes
    mu = jump_potential(fspec, spec.alpha, nodes, dim=1, power=2) * spec.density_m(nodes)
    table = [(t, potential_sup(ref, mu, nodes, t, density_factor=2.0)) for t in t_list]
    if strict and not fspec.is_zero:
        vals = [v for _, v in table]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise QuadratureError("C_t table is not strictly increasing")
    return table


# -- combinatorial constants ---------------------------------------------------


def _round_up(value):
    f = float(value)
    if Fraction(f) < value:
        f = float(np.nextafter(f, np.inf))
    return f


def lemma_constants(K, L, n_max=200):
    """Minimal C01, C02, C03 over n <= n_max for the two growth lemmas.

    With ``a_i = L^{i-2} K^{-i} / i!`` and ``b_i = (L/K)^i / i!``:
    ``C01 = max_n sum_{i<=n} a_i``, ``C02 = max_n sum_{i<=n} b_i`` and
    ``C03 = max_m sum_{i,j>=2, i+j<=m} a_i a_j``.  Sums run in exact rational
    arithmetic and the floats returned are rounded upward.
    """
    if not 0 < K < 1:
        raise DomainError(f"K must lie in (0, 1), got {K}")
    if not L > 0:
        raise DomainError(f"L must be positive, got {L}")
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    k = Fraction(K)
    lf = Fraction(L)
    a = [Fraction(0)] * (n_max + 1)
    b = [Fraction(0)] * (n_max + 1)
    for i in range(1, n_max + 1):
        a[i] = lf ** (i - 2) / (k**i * factorial(i))
        b[i] = (lf / k) ** i / factorial(i)
    s1 = s2 = Fraction(0)
    c01 = c02 = Fraction(0)
    for n in range(1, n_max + 1):
        s1 += a[n]
        s2 += b[n]
        c01 = max(c01, s1)
        c02 = max(c02, s2)
    s3 = Fraction(0)
    c03 = Fraction(0)
    for m in range(4, n_max + 1):
        s3 += sum(a[i] * a[m - i] for i in range(2, m - 1))
        c03 = max(c03, s3)
    return _round_up(c01), _round_up(c02), _round_up(c03)


# -- export --------------------------------------------------------------------


def write_series_csv(table, fh, n):
    """Rows x, z, q_n, q_bar_n for one level."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["x", "z", "q_n", "q_bar_n"])
    x = table.grid.x_nodes
    qb = table.q_bar[n] if table.q_bar is not None else np.full_like(table.q[n], np.nan)
    for i, xi in enumerate(x):
        for j, zj in enumerate(x):
            writer.writerow([format(v, ".17g") for v in (xi, zj, table.q[n][i, j], qb[i, j])])


def series_summary(table, c_t=None):
    """JSON-ready summary: fitted K, C1~, C~ and the max remainder bound."""
    out = {"t": table.t, "n_max": table.n_max, "l": table.l, "form": table.form,
           "quad_err": [float(v) for v in table.quad_err]}
    if table.q_bar is not None:
        fit = fit_growth(table)
        out.update(k=fit.k, c1_tilde=fit.c1_tilde, ratios=list(fit.ratios))
        ssum = sum_series(table, fit.k, fit.c1_tilde) if fit.k < 1 else None
        out["remainder_max"] = float(ssum.remainder.max()) if ssum is not None else None
        if c_t is not None and fit.k > 0:
            out["c_tilde"] = mass_constant(table, c_t, fit.k)
    return out
