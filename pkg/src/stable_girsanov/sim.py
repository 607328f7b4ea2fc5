"""Path simulation with an explicit record of the large jumps.

Jumps of size at least ``epsilon`` arrive by thinning a homogeneous Poisson
stream of proposals whose rate dominates the state-dependent intensity
``lambda(x) = int_{|h| >= eps} 2 C(x, x+h) M(x+h) |h|^{-(d+alpha)} dh``.
Smaller jumps are dropped (``PIECEWISE_CONSTANT``) or replaced by a Brownian
motion of matching variance (``ASMUSSEN_ROSINSKI``).
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import ConfigError, DomainError, ThinningError
from .model import sphere_area

__all__ = [
    "SimMode",
    "JumpEvent",
    "PathRecord",
    "path_rng",
    "dominating_rate",
    "acceptance_ratio",
    "small_jump_variance",
    "expected_jump_count",
    "simulate_path",
    "simulate_paths",
    "write_paths_csv",
]


class SimMode(Enum):
    PIECEWISE_CONSTANT = "piecewise_constant"
    ASMUSSEN_ROSINSKI = "asmussen_rosinski"


@dataclass(frozen=True)
class JumpEvent:
    time: float
    pre_state: object
    post_state: object
    size: float


@dataclass(frozen=True, eq=False)
class PathRecord:
    """One simulated path on [0, horizon].

    Segments are stored column-wise: ``seg_start[k] <= s < seg_end[k]`` has
    state ``seg_state[k]`` at its left end (the whole segment in
    piecewise-constant mode).  In Asmussen-Rosinski mode the path diffuses
    inside a segment and ``terminal`` includes the last Brownian increment.
    """

    x0: object
    horizon: float
    seg_start: np.ndarray
    seg_end: np.ndarray
    seg_state: np.ndarray
    large_jumps: tuple
    terminal: object
    seed: int
    path_index: int
    mode: SimMode
    epsilon: float
    l: int

    @property
    def segments(self):
        return list(zip(self.seg_start.tolist(), self.seg_end.tolist(), list(self.seg_state)))

    @property
    def n_segments(self):
        return len(self.seg_start)

    @property
    def jump_times(self):
        """Times of all segment boundaries (every simulated jump of size >= epsilon)."""
        return self.seg_start[1:]


def path_rng(seed, path_index):
    """Independent generator for one path, fixed by (master seed, path index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(path_index,))))


def dominating_rate(spec, epsilon):
    """Rate of the proposal stream: 2 c_max m_bar |S^{d-1}| eps^{-alpha} / alpha."""
    return 2.0 * spec.c_max * spec.m_bar * sphere_area(spec.dim) * epsilon ** (-spec.alpha) / spec.alpha


def small_jump_variance(spec, epsilon):
    """Per-coordinate variance rate of the jumps below epsilon (at the dominating kernel)."""
    return (
        2.0 * spec.c_max * spec.m_bar * sphere_area(spec.dim)
        * epsilon ** (2 - spec.alpha) / (2 - spec.alpha) / spec.dim
    )


def expected_jump_count(spec, T, threshold):
    """Mean number of jumps of size >= threshold on [0, T] for a homogeneous spec."""
    return T * dominating_rate(spec, threshold)


def _directions(rng, n, dim):
    if dim == 1:
        return rng.integers(0, 2, n) * 2.0 - 1.0
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _propose(rng, n, spec, epsilon):
    radii = epsilon * (1.0 - rng.random(n)) ** (-1.0 / spec.alpha)
    dirs = _directions(rng, n, spec.dim)
    return radii[:, None] * dirs if spec.dim > 1 else radii * dirs


def _state_norm(diff, dim):
    if dim == 1:
        return np.abs(diff)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def simulate_path(spec, x0, T, l, epsilon, mode=SimMode.PIECEWISE_CONSTANT, seed=0, path_index=0):
    """Simulate one path and record every jump of size >= 1/l.

    Parameters
    ----------
    spec : ProcessSpec
    x0 : point
    T : float
        Horizon.
    l : int
        Truncation level; jumps with size >= 1/l are large.
    epsilon : float
        Smallest simulated jump, ``0 < epsilon <= 1/l``.
    mode : SimMode
    seed, path_index : int
        The path's generator depends only on this pair.

    Returns
    -------
    PathRecord
    """
    mode = SimMode(mode)
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T}")
    if not (epsilon > 0 and epsilon <= 1.0 / l * (1 + 1e-12)):
        raise ConfigError(
            f"epsilon={epsilon} must lie in (0, 1/l={1.0 / l}]: large jumps would be missed",
            key="epsilon",
        )
    rng = path_rng(seed, path_index)
    dim = spec.dim
    x0 = float(x0) if dim == 1 else np.asarray(x0, dtype=float).reshape(dim)
    lam = dominating_rate(spec, epsilon)

    if lam == 0:
        times = np.empty(0)
        steps = np.empty((0,) if dim == 1 else (0, dim))
    elif spec.homogeneous:
        n = rng.poisson(lam * T)
        times = np.sort(rng.uniform(0.0, T, n))
        steps = _propose(rng, n, spec, epsilon)
    else:
        times, steps = _thinned(rng, spec, x0, T, epsilon, lam)

    n = len(times)
    sigma = 0.0
    if mode is SimMode.ASMUSSEN_ROSINSKI:
        sigma = math.sqrt(small_jump_variance(spec, epsilon))
    bounds = np.concatenate([[0.0], times, [T]])
    if sigma > 0:
        shape = (n + 1,) if dim == 1 else (n + 1, dim)
        diffusion = sigma * np.sqrt(np.diff(bounds)).reshape((n + 1,) + (1,) * (dim > 1)) * rng.standard_normal(shape)
    else:
        diffusion = np.zeros((n + 1,) if dim == 1 else (n + 1, dim))

    if spec.homogeneous or lam == 0 or sigma == 0:
        # post-jump states: x0 + diffusion up to the jump + all earlier steps
        increments = diffusion[:n] + steps
        post = x0 + np.cumsum(increments, axis=0) if n else np.empty_like(steps)
        pre = (post - steps) if n else np.empty_like(steps)
    else:
        # thinning saw the pre-diffusion states; replay with the diffusion added
        post = np.empty_like(steps)
        x = x0
        for k in range(n):
            x = x + diffusion[k] + steps[k]
            post[k] = x
        pre = post - steps
    seg_state = np.concatenate([np.asarray([x0]), post], axis=0) if n else np.asarray([x0])
    terminal = seg_state[-1] + diffusion[n]
    if dim == 1:
        terminal = float(terminal)

    sizes = _state_norm(post - pre, dim) if n else np.empty(0)
    big = np.nonzero(sizes >= 1.0 / l)[0]
    jumps = tuple(
        JumpEvent(
            float(times[k]),
            float(pre[k]) if dim == 1 else pre[k].copy(),
            float(post[k]) if dim == 1 else post[k].copy(),
            float(sizes[k]),
        )
        for k in big
    )
    return PathRecord(
        x0=x0,
        horizon=float(T),
        seg_start=bounds[:-1].copy(),
        seg_end=bounds[1:].copy(),
        seg_state=seg_state,
        large_jumps=jumps,
        terminal=terminal,
        seed=int(seed),
        path_index=int(path_index),
        mode=mode,
        epsilon=float(epsilon),
        l=int(l),
    )


def acceptance_ratio(spec, x, y):
    """Thinning acceptance probability C(x,y) M(y) / (c_max m_bar) of a proposed jump x -> y.

    Raises
    ------
    ThinningError
        If the ratio leaves [0, 1], i.e. c_max or m_bar is not a bound.
    """
    bound = spec.c_max * spec.m_bar
    ratio = np.asarray(spec.c_factor(x, y), dtype=float) * np.asarray(spec.density_m(y), dtype=float) / bound
    if np.any(ratio > 1.0 + 1e-12) or np.any(ratio < 0):
        raise ThinningError(
            f"thinning acceptance ratio {np.max(ratio):.6g} outside [0, 1] near x={x}, y={y}: "
            "c_max or m_bar does not bound C(x, y) M(y)"
        )
    return float(ratio) if ratio.ndim == 0 else ratio


def _thinned(rng, spec, x0, T, epsilon, lam):
    """State-dependent jumps by thinning; positions ignore any diffusion."""
    times, steps = [], []
    x = x0
    t = 0.0
    while True:
        t += rng.exponential(1.0 / lam)
        if t >= T:
            break
        h = _propose(rng, 1, spec, epsilon)[0]
        y = x + h
        if rng.random() < acceptance_ratio(spec, x, y):
            times.append(t)
            steps.append(h)
            x = y
    shape = (0,) if spec.dim == 1 else (0, spec.dim)
    return np.asarray(times), (np.asarray(steps) if steps else np.empty(shape))


def simulate_paths(spec, x0, T, l, epsilon, mode=SimMode.PIECEWISE_CONSTANT, n_paths=1000, seed=0,
                   threads=1, start_index=0):
    """Simulate ``n_paths`` paths; results do not depend on ``threads``."""
    indices = range(start_index, start_index + n_paths)

    def one(i):
        return simulate_path(spec, x0, T, l, epsilon, mode, seed, i)

    if threads <= 1:
        return [one(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, indices, chunksize=256))


def _fmt(value):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    return ";".join(format(v, ".17g") for v in arr)


def write_paths_csv(paths, fh):
    """One row per segment and per large jump: path_id, kind, t_start, t_end, state, jump_size."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["path_id", "kind", "t_start", "t_end", "state", "jump_size"])
    for p in paths:
        for a, b, s in zip(p.seg_start, p.seg_end, p.seg_state):
            writer.writerow([p.path_index, "segment", _fmt(a), _fmt(b), _fmt(s), ""])
        for j in p.large_jumps:
            writer.writerow([p.path_index, "jump", _fmt(j.time), _fmt(j.time), _fmt(j.post_state), _fmt(j.size)])
