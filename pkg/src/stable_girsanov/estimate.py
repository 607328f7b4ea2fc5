"""Weighted Monte Carlo densities, two-sided envelope fits and the lower-bound k.

The transformed density satisfies ``int q(t,x,z) g(z) m(dz) = E_x[L_t g(X_t)]``,
so weighting terminal states by ``L_t`` and binning (or smoothing) them
estimates ``q(t, x0, .)``.
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .exceptions import DomainError
from .functional import accumulate
from .model import ProcessSpec, check_envelope_11, envelope
from .sim import SimMode, simulate_paths

__all__ = [
    "Histogram",
    "KernelSmoother",
    "DensityEstimate",
    "BoundReport",
    "LowerBound",
    "weighted_terminals",
    "mc_density",
    "fit_two_sided",
    "lower_bound_k",
    "check_lower_bound",
    "write_density_csv",
    "bound_report_json",
]


@dataclass(frozen=True)
class Histogram:
    """Bins of width ``bin_width`` centred at the z nodes (default 0.1 t^{1/alpha})."""

    bin_width: Optional[float] = None


@dataclass(frozen=True)
class KernelSmoother:
    """Gaussian kernel; default bandwidth 0.9 min(sd, IQR/1.34) n^{-1/5}."""

    bandwidth: Optional[float] = None


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    t: float
    x0: float
    z_grid: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    n_paths: int
    estimator: Union[Histogram, KernelSmoother]
    mean_weight: float
    mean_weight_se: float
    seed: int
    l: int = 0
    ess: float = float("nan")

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)) or np.any(self.std_err < 0) or not self.mean_weight > 0:
            raise DomainError("density estimate violates finiteness / positivity invariants")


def weighted_terminals(spec, fspec, x0, t, l, n_paths, seed, epsilon=None, threads=1):
    """Terminal states and weights L_t of ``n_paths`` Asmussen-Rosinski paths."""
    eps = min(1.0 / l, 0.01) if epsilon is None else epsilon
    paths = simulate_paths(spec, x0, t, l, eps, SimMode.ASMUSSEN_ROSINSKI, n_paths, seed, threads=threads)
    terminals = np.array([p.terminal for p in paths])
    weights = np.array([accumulate(p, fspec, spec, l).l_weight for p in paths])
    return terminals, weights


def mc_density(spec, fspec, ref, x0, t, l, n_paths, estimator=None, seed=0, z_grid=None,
               epsilon=None, threads=1, z_half=5.0):
    """Estimate q(t, x0, z) on ``z_grid`` from L_t-weighted terminal states.

    Parameters
    ----------
    spec, fspec, ref
        Process, perturbation and reference density (``ref`` fixes the
        default bin width through alpha).
    x0, t, l
        Start point, horizon and truncation level.
    n_paths : int
        At least 1000.
    estimator : Histogram or KernelSmoother, optional
    z_grid : array, optional
        Defaults to nodes spaced one bin width apart on ``|z - x0| <= z_half``.
    epsilon : float, optional
        Small-jump cutoff, default ``min(1/l, 0.01)``.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if n_paths < 1000:
        raise DomainError("n_paths must be at least 1000")
    if spec.dim != 1:
        raise DomainError("density estimation is implemented for dim=1")
    estimator = estimator or Histogram()
    terminals, weights = weighted_terminals(spec, fspec, x0, t, l, n_paths, seed, epsilon, threads)
    scale = t ** (1.0 / spec.alpha)
    if isinstance(estimator, Histogram):
        width = estimator.bin_width or 0.1 * scale
        estimator = Histogram(width)
    if z_grid is None:
        step = estimator.bin_width if isinstance(estimator, Histogram) else 0.1 * scale
        k = int(math.floor(z_half / step + 1e-9))
        z_grid = x0 + step * np.arange(-k, k + 1)
    z_grid = np.asarray(z_grid, dtype=float)
    m_z = np.broadcast_to(np.asarray(spec.density_m(z_grid), dtype=float), z_grid.shape)

    if isinstance(estimator, Histogram):
        width = estimator.bin_width
        # per-path contributions are only needed where a path lands
        idx_lo = np.searchsorted(z_grid - width / 2, terminals, side="right") - 1
        contrib_sum = np.zeros(z_grid.size)
        contrib_sq = np.zeros(z_grid.size)
        ok = (idx_lo >= 0) & (idx_lo < z_grid.size)
        ok[ok] &= np.abs(terminals[ok] - z_grid[idx_lo[ok]]) < width / 2
        np.add.at(contrib_sum, idx_lo[ok], weights[ok])
        np.add.at(contrib_sq, idx_lo[ok], weights[ok] ** 2)
        norm = width * m_z
    elif isinstance(estimator, KernelSmoother):
        bw = estimator.bandwidth
        if bw is None:
            sd = np.std(terminals)
            q75, q25 = np.percentile(terminals, [75, 25])
            bw = 0.9 * min(sd, (q75 - q25) / 1.34) * n_paths ** (-0.2)
            estimator = KernelSmoother(bw)
        contrib_sum = np.zeros(z_grid.size)
        contrib_sq = np.zeros(z_grid.size)
        for start in range(0, n_paths, 4096):
            u = (z_grid[:, None] - terminals[None, start:start + 4096]) / bw
            kern = np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
            wk = kern * weights[None, start:start + 4096]
            contrib_sum += wk.sum(1)
            contrib_sq += (wk * wk).sum(1)
        norm = bw * m_z
    else:
        raise DomainError(f"unknown estimator {estimator!r}")

    mean = contrib_sum / n_paths
    var = np.maximum(contrib_sq / n_paths - mean**2, 0.0) * n_paths / (n_paths - 1)
    values = mean / norm
    std_err = np.sqrt(var / n_paths) / norm
    ess = float(weights.sum() ** 2 / np.sum(weights**2))
    if ess < 100:
        warnings.warn(f"effective sample size {ess:.1f} < 100: weights degenerate", RuntimeWarning)
    return DensityEstimate(
        t=float(t), x0=float(x0), z_grid=z_grid, values=values, std_err=std_err, n_paths=int(n_paths),
        estimator=estimator, mean_weight=float(weights.mean()),
        mean_weight_se=float(weights.std(ddof=1) / math.sqrt(n_paths)), seed=int(seed), l=int(l), ess=ess,
    )


# -- Theorem-type two-sided bounds ------------------------------------------------


@dataclass
class BoundReport:
    m1: float
    m2: float
    c3: float
    c4: float
    c5: float
    c6: float
    k_lower: Optional[int]
    violations: int
    nodes: list = field(default_factory=list)
    t_probes: list = field(default_factory=list)
    degenerate: bool = False

    def __post_init__(self):
        if self.m1 > self.m2:
            raise DomainError("m1 must not exceed m2")


def _enclosing_line(ts, ys, upper, min_slope):
    """Line a + b t above (upper) or below all points with b >= min_slope (upper) or b <= -min_slope.

    Among lines through two of the points that enclose all of them, the one
    with the smallest total gap is taken; if none has an admissible slope the
    slope is clamped and the line is shifted to touch the extreme point.
    """
    sign = 1.0 if upper else -1.0
    ts = np.asarray(ts, dtype=float)
    ys = sign * np.asarray(ys, dtype=float)
    best = None
    for i in range(ts.size):
        for j in range(i + 1, ts.size):
            b = (ys[j] - ys[i]) / (ts[j] - ts[i])
            a = ys[i] - b * ts[i]
            if b < min_slope or np.any(ys > a + b * ts + 1e-12 * (1 + np.abs(ys))):
                continue
            gap = float(np.sum(a + b * ts - ys))
            if best is None or gap < best[2]:
                best = (a, b, gap)
    if best is None:
        b = min_slope
        a = float(np.max(ys - b * ts))
    else:
        a, b, _ = best
    return sign * a, sign * b


def fit_two_sided(estimates, ref, noise_band=2.0, hard_band=4.0, min_slope=1e-6):
    """Envelope constants C3..C6 with C3 e^{-C4 t} E <= q <= C5 e^{C6 t} E on the probes.

    Nodes with ``|q_hat| < noise_band * std_err`` are excluded; any node below
    ``-hard_band * std_err`` is a hard failure.
    """
    if len(estimates) < 2:
        raise DomainError("need at least two probe times")
    x0 = estimates[0].x0
    if any(e.x0 != x0 for e in estimates):
        raise DomainError("all estimates must share x0")
    ts, lo, hi = [], [], []
    masks = []
    for est in estimates:
        if np.any(est.values < -hard_band * est.std_err):
            bad = est.z_grid[est.values < -hard_band * est.std_err]
            raise DomainError(f"negative density estimate beyond the noise band at z={bad.tolist()}")
        keep = np.abs(est.values) >= noise_band * est.std_err
        keep &= est.values > 0
        if not np.any(keep):
            raise DomainError(f"no node outside the noise band at t={est.t}")
        env = envelope(est.t, np.abs(est.z_grid - x0), ref.alpha, ref.dim)
        ratio = est.values[keep] / env[keep]
        ts.append(est.t)
        lo.append(math.log(ratio.min()))
        hi.append(math.log(ratio.max()))
        masks.append(keep)
    a5, b6 = _enclosing_line(ts, hi, True, min_slope)
    a3, b4 = _enclosing_line(ts, lo, False, min_slope)
    c5, c6 = math.exp(a5), b6
    c3, c4 = math.exp(a3), -b4
    violations = []
    for est, keep in zip(estimates, masks):
        env = envelope(est.t, np.abs(est.z_grid - x0), ref.alpha, ref.dim)
        upper = c5 * math.exp(c6 * est.t) * env
        lower = c3 * math.exp(-c4 * est.t) * env
        tol = 1e-12 * upper
        bad = keep & ((est.values > upper + tol) | (est.values < lower - tol))
        violations.extend((est.t, float(z)) for z in est.z_grid[bad])
    z_all = np.unique(np.concatenate([e.z_grid for e in estimates]))
    m1, m2 = check_envelope_11(ref, ProcessSpec(alpha=ref.alpha, dim=ref.dim), ts, z_all - x0)
    degenerate = c4 <= 10 * min_slope and c6 <= 10 * min_slope
    return BoundReport(
        m1=m1, m2=m2, c3=c3, c4=c4, c5=c5, c6=c6, k_lower=None, violations=len(violations),
        nodes=violations, t_probes=ts, degenerate=degenerate,
    )


@dataclass(frozen=True)
class LowerBound:
    k: int
    constant: float
    max_ratio: float
    node: tuple


def lower_bound_k(series_table, ref, t=None):
    """Smallest k >= 1 with max |q_1| / (k p) <= 1/2 on the grid; constant 2^{-k}."""
    t = series_table.t if t is None else t
    if t != series_table.t:
        raise DomainError("table was computed at another time")
    x = series_table.grid.x_nodes
    p = ref.density(t, np.abs(x[None, :] - x[:, None]))
    ratio = np.abs(series_table.q[1]) / p
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    worst = float(ratio[i, j])
    if not np.isfinite(worst):
        raise DomainError(f"|q_1|/p unbounded at node (x={x[i]}, z={x[j]})")
    k = max(1, math.ceil(2.0 * worst - 1e-12))
    return LowerBound(k=k, constant=2.0**-k, max_ratio=worst, node=(float(x[i]), float(x[j])))


def check_lower_bound(bound, estimate, ref, band=4.0):
    """Nodes where 2^{-k} p > q_hat + band * std_err (empty list when the bound holds)."""
    p = ref.density(estimate.t, np.abs(estimate.z_grid - estimate.x0))
    bad = bound.constant * p > estimate.values + band * estimate.std_err
    return estimate.z_grid[bad].tolist()


# -- export --------------------------------------------------------------------


def write_density_csv(estimate, fh):
    fh.write("z,q_hat,std_err\n")
    for z, v, s in zip(estimate.z_grid, estimate.values, estimate.std_err):
        fh.write(f"{z:.17g},{v:.17g},{s:.17g}\n")


def bound_report_json(report):
    """Fixed-key JSON object: m1, m2, c3..c6, k, violations, nodes."""
    return json.dumps(
        {
            "m1": report.m1, "m2": report.m2, "c3": report.c3, "c4": report.c4,
            "c5": report.c5, "c6": report.c6, "k": report.k_lower,
            "violations": report.violations, "nodes": [list(n) for n in report.nodes],
        },
        sort_keys=False,
    )
