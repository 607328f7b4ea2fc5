"""Process and perturbation specifications, reference density, Kato-type checks.

The reference process is the standard symmetric alpha-stable process, whose
Levy measure ``c_alpha |h|^{-(d+alpha)} dh`` reproduces the characteristic
exponent ``|xi|^alpha``.  An alpha-stable-like process is described by a jump
kernel ``N(x, dy) = 2 C(x, y) |x - y|^{-(d+alpha)} M(y) dy``; the reference is
the special case ``C = c_alpha / 2`` and ``M = 1``.

Points are floats (or float arrays, broadcasting) when ``dim == 1`` and arrays
whose last axis has length ``dim`` otherwise.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, interpolate, special

from .exceptions import DomainError, JClassViolation, QuadratureError

__all__ = [
    "ProcessSpec",
    "ReferenceDensity",
    "DensityKind",
    "JumpFunctionalSpec",
    "EnvelopeConstants",
    "stable_levy_const",
    "sphere_area",
    "distance",
    "envelope",
    "levy_kernel_density",
    "reference_p",
    "check_envelope_11",
    "check_kato_J",
    "jump_potential",
    "f_theta",
    "zero_functional",
    "constant_functional",
]


def sphere_area(dim):
    """Surface area of the unit sphere in R^dim (2 for dim=1)."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def stable_levy_const(alpha, dim=1):
    """Constant c_alpha with int (1 - cos(xi.h)) c_alpha |h|^{-(d+alpha)} dh = |xi|^alpha."""
    if not 0 < alpha < 2:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    return (
        alpha
        * 2 ** (alpha - 1)
        * math.gamma((dim + alpha) / 2)
        / (math.pi ** (dim / 2) * math.gamma(1 - alpha / 2))
    )


def distance(x, y):
    """Euclidean distance; scalar points for dim=1, last-axis vectors otherwise."""
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if diff.ndim == 0:
        return abs(float(diff))
    return np.abs(diff)


def _distance_d(x, y, dim):
    if dim == 1:
        return np.abs(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def envelope(t, r, alpha, dim=1):
    """Heat-kernel envelope t^{-d/alpha} (1 ^ t^{1/alpha}/r)^{d+alpha}."""
    r = np.asarray(r, dtype=float)
    scale = t ** (1.0 / alpha)
    with np.errstate(divide="ignore"):
        ratio = np.where(r > 0, scale / np.where(r > 0, r, 1.0), 1.0)
    return t ** (-dim / alpha) * np.minimum(1.0, ratio) ** (dim + alpha)


@dataclass(frozen=True)
class ProcessSpec:
    """An alpha-stable-like process through its Levy-system data.

    Leaving ``c_factor`` and ``density_m`` unset gives the standard symmetric
    alpha-stable process: ``C = levy_const / 2`` and ``M = 1``.

    Parameters
    ----------
    alpha : float
        Stability index in (0, 2).
    dim : int
        State dimension.
    c_factor : callable, optional
        ``C(x, y)``, bounded and nonnegative.
    c_max : float, optional
        Documented upper bound of ``C``; drives the thinning dominator.
    density_m : callable, optional
        ``M(y)`` with ``m(dy) = M(y) dy``, values in ``(0, m_bar]``.
    m_bar : float
        Upper bound of ``M``.
    levy_const : float, optional
        Normalization c_alpha; defaults to :func:`stable_levy_const`.
    """

    alpha: float = 1.0
    dim: int = 1
    c_factor: Optional[Callable] = None
    c_max: Optional[float] = None
    density_m: Optional[Callable] = None
    m_bar: float = 1.0
    levy_const: Optional[float] = None
    homogeneous: bool = field(init=False, default=False)

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dim must be a positive integer, got {self.dim}")
        if self.levy_const is None:
            object.__setattr__(self, "levy_const", stable_levy_const(self.alpha, self.dim))
        if self.levy_const <= 0:
            raise DomainError("levy_const must be positive")
        homogeneous = self.c_factor is None and self.density_m is None
        if self.c_factor is None:
            c0 = self.levy_const / 2 if self.c_max is None else self.c_max
            object.__setattr__(self, "c_factor", _Constant(c0))
            object.__setattr__(self, "c_max", c0)
        elif self.c_max is None:
            raise DomainError("c_max is required when c_factor is given")
        if self.density_m is None:
            object.__setattr__(self, "density_m", _Constant(self.m_bar))
        if self.c_max < 0 or self.m_bar <= 0:
            raise DomainError("c_max must be >= 0 and m_bar > 0")
        object.__setattr__(self, "homogeneous", homogeneous)

    @property
    def is_reference(self):
        """True when the spec is exactly the standard symmetric stable process."""
        return (
            self.homogeneous
            and math.isclose(self.c_max, self.levy_const / 2, rel_tol=1e-12)
            and math.isclose(self.m_bar, 1.0, rel_tol=1e-12)
        )

    def points(self, values):
        """Coerce ``values`` into the point representation of this spec."""
        arr = np.asarray(values, dtype=float)
        if self.dim == 1:
            return float(arr) if arr.ndim == 0 else arr
        if arr.shape[-1] != self.dim:
            raise DomainError(f"points must have trailing dimension {self.dim}")
        return arr

    def check_invariants(self, n_samples=1000, radius=10.0, seed=0):
        """Sample (x, y) pairs and verify the documented bounds on C and M."""
        rng = np.random.default_rng(seed)
        shape = (n_samples,) if self.dim == 1 else (n_samples, self.dim)
        x = rng.uniform(-radius, radius, shape)
        y = rng.uniform(-radius, radius, shape)
        c = np.broadcast_to(np.asarray(self.c_factor(x, y), dtype=float), (n_samples,))
        m = np.broadcast_to(np.asarray(self.density_m(y), dtype=float), (n_samples,))
        if np.any(c < 0) or np.any(c > self.c_max * (1 + 1e-12)):
            raise DomainError("c_factor violates 0 <= C <= c_max on sampled pairs")
        if np.any(m <= 0) or np.any(m > self.m_bar * (1 + 1e-12)):
            raise DomainError("density_m violates 0 < M <= m_bar on sampled points")


class _Constant:
    """Picklable constant callable that broadcasts over point arrays."""

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, *points):
        shape = np.broadcast_shapes(*(np.shape(p) for p in points))
        if not shape:
            return self.value
        return np.full(shape, self.value)

    def __repr__(self):
        return f"_Constant({self.value!r})"


def levy_kernel_density(spec, x, y):
    """Density 2 C(x,y) |x-y|^{-(d+alpha)} M(y) of N(x, dy) w.r.t. Lebesgue measure."""
    r = _distance_d(x, y, spec.dim)
    if np.any(r == 0):
        raise DomainError("Levy kernel is singular on the diagonal x = y")
    out = 2.0 * np.asarray(spec.c_factor(x, y)) * r ** (-(spec.dim + spec.alpha)) * np.asarray(
        spec.density_m(y)
    )
    return float(out) if np.ndim(out) == 0 else out


class DensityKind(Enum):
    CAUCHY = "cauchy"
    FOURIER = "fourier"


@dataclass(frozen=True)
class ReferenceDensity:
    """Transition density of the standard symmetric alpha-stable process.

    ``CAUCHY`` uses the closed form t / (pi ((x-y)^2 + t^2)) and needs
    ``alpha == 1, dim == 1``.  ``FOURIER`` inverts exp(-t|xi|^alpha) numerically
    (dim 1 or isotropic dim 2) and tabulates the unit-time profile at
    ``fft_points`` nodes, with the power-law asymptote beyond the table.
    """

    alpha: float = 1.0
    dim: int = 1
    kind: Optional[DensityKind] = None
    grid_halfwidth: float = 50.0
    fft_points: int = 2048
    tail_tol: float = 0.02

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        kind = self.kind
        if kind is None:
            kind = DensityKind.CAUCHY if (self.alpha == 1 and self.dim == 1) else DensityKind.FOURIER
        kind = DensityKind(kind)
        if kind is DensityKind.CAUCHY and not (self.alpha == 1 and self.dim == 1):
            raise DomainError("closed-form Cauchy density needs alpha=1, dim=1")
        if kind is DensityKind.FOURIER and self.dim not in (1, 2):
            raise DomainError("Fourier inversion is implemented for dim 1 and 2")
        object.__setattr__(self, "kind", kind)

    # -- unit-time profile ---------------------------------------------------
    def _table(self):
        return _fourier_table(self.alpha, self.dim, self.fft_points)

    def density(self, t, r):
        """p(t, x, y) as a function of the distance r = |x - y|."""
        if t <= 0:
            raise DomainError(f"t must be positive, got {t}")
        r = np.asarray(r, dtype=float)
        if self.kind is DensityKind.CAUCHY:
            return t / (math.pi * (r * r + t * t))
        scale = t ** (1.0 / self.alpha)
        return scale ** (-self.dim) * self._table().profile(r / scale)

    def pdf(self, t, x, y):
        return self.density(t, _distance_d(x, y, self.dim))

    def cdf(self, t, u):
        """P(X_t - X_0 <= u) in dimension one (t = 0 gives the step function)."""
        if self.dim != 1:
            raise DomainError("cdf is defined for dim=1 only")
        u = np.asarray(u, dtype=float)
        if t < 0:
            raise DomainError(f"t must be nonnegative, got {t}")
        if t == 0:
            return np.where(u > 0, 1.0, np.where(u < 0, 0.0, 0.5))
        if self.kind is DensityKind.CAUCHY:
            return 0.5 + np.arctan(u / t) / math.pi
        scale = t ** (1.0 / self.alpha)
        v = u / scale
        return 0.5 + np.sign(v) * self._table().half_mass(np.abs(v))

    def tail_mass(self, t, radius):
        """P(|X_t - X_0| > radius)."""
        if self.dim == 1:
            return float(2.0 * (1.0 - self.cdf(t, radius)))
        if self.kind is DensityKind.FOURIER:
            scale = t ** (1.0 / self.alpha)
            return float(self._table().radial_tail(radius / scale))
        raise DomainError("tail_mass not available for this density")

    def cell_mass_offsets(self, t, offsets, h):
        """Mass of cells [o - h/2, o + h/2] for the displacement after time t."""
        offsets = np.asarray(offsets, dtype=float)
        return self.cdf(t, offsets + h / 2) - self.cdf(t, offsets - h / 2)


class _FourierTable:
    """Unit-time radial profile g(u) = p(1, |x-y| = u) with tails."""

    def __init__(self, alpha, dim, n_points):
        self.alpha = alpha
        self.dim = dim
        c_alpha = stable_levy_const(alpha, dim)
        # p(1, u) ~ c_alpha u^{-(d+alpha)} as u -> infinity
        self.tail_coef = c_alpha
        self.u_max = 60.0 if dim == 1 else 30.0
        n_core = n_points // 2
        nodes = np.unique(
            np.concatenate(
                [
                    np.linspace(0.0, 8.0, n_core),
                    np.geomspace(8.0, self.u_max, n_points - n_core),
                ]
            )
        )
        values = np.array([_invert_at(alpha, dim, u) for u in nodes])
        if not np.all(np.isfinite(values)):
            raise QuadratureError("Fourier inversion produced non-finite values")
        self.nodes = nodes
        self.spline = interpolate.CubicSpline(nodes, values)
        if dim == 1:
            self.anti = self.spline.antiderivative()
            # normalize so the total half mass is exactly 1/2
            self.core_half = float(self.anti(self.u_max))
            self.tail_half = self.tail_coef * self.u_max ** (-alpha) / alpha
        else:
            radial = interpolate.CubicSpline(nodes, values * nodes * 2 * math.pi)
            self.radial_anti = radial.antiderivative()

    def profile(self, u):
        u = np.asarray(u, dtype=float)
        inside = u <= self.u_max
        out = np.empty_like(u)
        out[inside] = self.spline(u[inside])
        far = u[~inside]
        out[~inside] = self.tail_coef * far ** (-(self.dim + self.alpha))
        return out

    def half_mass(self, v):
        """int_0^v g for dim=1, with the asymptotic tail beyond the table."""
        v = np.asarray(v, dtype=float)
        total = self.core_half + self.tail_half
        inside = v <= self.u_max
        out = np.empty_like(v)
        out[inside] = self.anti(v[inside]) * (0.5 / total)
        far = v[~inside]
        out[~inside] = 0.5 - self.tail_coef * far ** (-self.alpha) / self.alpha * (0.5 / total)
        return out

    def radial_tail(self, v):
        if v >= self.u_max:
            return sphere_area(self.dim) * self.tail_coef * v ** (-self.alpha) / self.alpha
        tail_beyond = sphere_area(self.dim) * self.tail_coef * self.u_max ** (-self.alpha) / self.alpha
        return float(self.radial_anti(self.u_max) - self.radial_anti(v)) + tail_beyond


def _invert_at(alpha, dim, u):
    """Inverse Fourier transform of exp(-|xi|^alpha) at distance u."""
    if dim == 1:
        if u == 0:
            return math.gamma(1 + 1 / alpha) / math.pi
        val, _ = integrate.quad(lambda xi: math.exp(-(xi**alpha)), 0, np.inf, weight="cos", wvar=u)
        return val / math.pi
    # isotropic dim 2: (1/2pi) int_0^inf exp(-xi^alpha) J0(xi u) xi dxi
    xi_max = 45.0 ** (1 / alpha)
    val, _ = integrate.quad(
        lambda xi: math.exp(-(xi**alpha)) * special.j0(xi * u) * xi, 0, xi_max, limit=2000
    )
    return val / (2 * math.pi)


@lru_cache(maxsize=16)
def _fourier_table(alpha, dim, n_points):
    return _FourierTable(alpha, dim, n_points)


def reference_p(ref, t, x, y):
    """Reference transition density p(t, x, y)."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    out = ref.pdf(t, x, y)
    return float(out) if np.ndim(out) == 0 else out


class EnvelopeConstants(NamedTuple):
    m1: float
    m2: float


def check_envelope_11(ref, spec, t_set, grid):
    """Tightest M1, M2 with M1 E <= p <= M2 E over all grid pairs and times.

    ``grid`` is a 1-d array of nodes (dim 1) or an ``(n, dim)`` array; all
    ordered pairs are sampled.
    """
    t_set = list(t_set)
    grid = np.asarray(grid, dtype=float)
    if not t_set or grid.size == 0:
        raise DomainError("t_set and grid must be nonempty")
    if spec.alpha != ref.alpha or spec.dim != ref.dim:
        raise DomainError("reference density and process spec disagree on alpha/dim")
    if ref.dim == 1:
        r = np.abs(grid[None, :] - grid[:, None])
    else:
        r = np.sqrt(((grid[None, :, :] - grid[:, None, :]) ** 2).sum(-1))
    lo, hi = np.inf, -np.inf
    for t in t_set:
        p = ref.density(t, r)
        bad = ~np.isfinite(p) | (p <= 0)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise DomainError(f"non-finite or non-positive density at t={t}, nodes ({i}, {j})")
        ratio = p / envelope(t, r, ref.alpha, ref.dim)
        lo = min(lo, float(ratio.min()))
        hi = max(hi, float(ratio.max()))
    return EnvelopeConstants(lo, hi)


# -- jump functionals ----------------------------------------------------------


@dataclass(frozen=True)
class JumpFunctionalSpec:
    """Perturbation F(x, y) of the jump kernel and its constants.

    ``radial`` optionally gives the profile phi with F(x, y) = phi(|x - y|);
    it enables closed-form shortcuts for homogeneous processes.  Use
    :meth:`from_bounds` to derive ``c1, c2, c_bar, l_const`` consistently.
    """

    f: Callable
    lower_bound: float
    sup_abs: float
    c1: float
    c2: float
    c_bar: float
    l_const: float
    radial: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.lower_bound > -1:
            raise DomainError(f"inf F must exceed -1, got {self.lower_bound}")
        if self.sup_abs < 0:
            raise DomainError("sup_abs must be nonnegative")

    @classmethod
    def from_bounds(cls, f, lower_bound, sup_abs, c_max, radial=None, name="custom"):
        """Build the spec, choosing C1, C2, C-bar and L from the bounds on F."""
        if not lower_bound > -1:
            raise DomainError(f"inf F must exceed -1, got {lower_bound}")
        lb = min(lower_bound, 0.0)
        c1 = 1.0 / (2.0 * (1.0 + lb) ** 2)
        c2 = -math.log1p(lb) / (-lb) if lb < 0 else 1.0
        c_bar = max(2 * c_max * c1, 2 * c_max * c2, c2)
        l_const = max(2 * sup_abs, 2 * c_bar * sup_abs)
        return cls(f, lower_bound, sup_abs, c1, c2, c_bar, l_const, radial, name)

    @property
    def is_zero(self):
        return self.sup_abs == 0

    def fbar(self, x, y):
        """Symmetrization |F(x,y)| + |F(y,x)|."""
        return np.abs(self.f(x, y)) + np.abs(self.f(y, x))

    def radial_bar(self, r):
        """Profile of F-bar when F is radial."""
        return 2.0 * np.abs(self.radial(r))

    def check_invariants(self, n_samples=10**6, radius=10.0, seed=0, dim=1):
        """Verify bounds, diagonal vanishing and the C1/C2 log inequalities by sampling."""
        rng = np.random.default_rng(seed)
        shape = (n_samples,) if dim == 1 else (n_samples, dim)
        x = rng.uniform(-radius, radius, shape)
        y = x + rng.standard_cauchy(shape)
        v = np.asarray(self.f(x, y), dtype=float)
        diag = np.asarray(self.f(x, x), dtype=float)
        if np.any(diag != 0):
            raise DomainError("F must vanish on the diagonal")
        if np.any(v <= self.lower_bound - 1e-15) or np.any(np.abs(v) > self.sup_abs * (1 + 1e-12)):
            raise DomainError("sampled F values violate the documented bounds")
        log1p = np.log1p(v)
        # log1p(v) - v carries a rounding error of a few ulp of v
        slack = 4 * np.finfo(float).eps * np.abs(v)
        if np.any(np.abs(log1p - v) > self.c1 * v * v * (1 + 1e-9) + slack):
            raise DomainError("|ln(1+F) - F| <= C1 F^2 fails")
        if np.any(np.abs(log1p) > self.c2 * np.abs(v) * (1 + 1e-9) + 1e-300):
            raise DomainError("|ln(1+F)| <= C2 |F| fails")
        return True


class _RadialF:
    """F(x, y) = phi(|x - y|) for a radial profile phi (picklable)."""

    def __init__(self, profile, dim=1):
        self.profile = profile
        self.dim = dim

    def __call__(self, x, y):
        return self.profile(_distance_d(x, y, self.dim))


class _ThetaProfile:
    kinks = (1.0,)

    def __init__(self, theta):
        self.theta = float(theta)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self.theta * np.minimum(r, 1.0) * np.exp(-r)
        return float(out) if out.ndim == 0 else out


class _ConstantProfile:
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r > 0, self.value, 0.0)
        return float(out) if out.ndim == 0 else out


def f_theta(theta, spec=None, c_max=None):
    """The family F(x,y) = theta min(|x-y|, 1) exp(-|x-y|)."""
    if c_max is None:
        c_max = (spec or ProcessSpec()).c_max
    dim = spec.dim if spec is not None else 1
    profile = _ThetaProfile(theta)
    peak = abs(theta) / math.e
    lower = min(0.0, theta / math.e)
    return JumpFunctionalSpec.from_bounds(
        _RadialF(profile, dim), lower, peak, c_max, radial=profile, name=f"ftheta-{theta:g}"
    )


def zero_functional(spec=None, c_max=None):
    return f_theta(0.0, spec, c_max)


def constant_functional(value, spec=None, c_max=None):
    """F = value off the diagonal; fails the integrability test near the diagonal."""
    if c_max is None:
        c_max = (spec or ProcessSpec()).c_max
    dim = spec.dim if spec is not None else 1
    profile = _ConstantProfile(value)
    return JumpFunctionalSpec.from_bounds(
        _RadialF(profile, dim),
        min(0.0, value),
        abs(value),
        c_max,
        radial=profile,
        name=f"constant-{value:g}",
    )


# -- Kato-type potentials --------------------------------------------------------

_DECADES = 12


def _half_line_integral(g):
    """int_0^inf g(h) dh with a decade-by-decade divergence test at h -> 0."""
    far, _ = integrate.quad(g, 1.0, np.inf, limit=200)
    pieces = []
    for k in range(_DECADES):
        val, _ = integrate.quad(g, 10.0 ** -(k + 1), 10.0**-k, limit=200)
        pieces.append(val)
    total = far + sum(pieces)
    if not np.isfinite(total):
        raise JClassViolation("J-class violation: near-diagonal integral is not finite")
    last, prev = abs(pieces[-1]), abs(pieces[-2])
    if last == 0.0:
        return total
    if prev == 0.0 or last >= prev:
        raise JClassViolation(
            "J-class violation: F^2 |x-y|^{-(d+alpha)} is not integrable at the diagonal "
            f"(decade contributions {prev:.3e} -> {last:.3e})"
        )
    ratio = last / prev
    return total + pieces[-1] * ratio / (1.0 - ratio)


def jump_potential(fspec, alpha, y, dim=1, power=2):
    """V(y) = int Fbar^power(y, w) |y - w|^{-(d+alpha)} dw at each point y.

    Radial functionals reduce to a single radial integral (V is constant).
    Raises :class:`JClassViolation` when the singularity at w = y is not
    integrable.
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if fspec.is_zero:
        return np.zeros(y_arr.shape[0] if dim > 1 or y_arr.ndim == 1 else y_arr.shape)
    if fspec.radial is not None:
        area = sphere_area(dim)

        def g(h):
            return fspec.radial_bar(h) ** power * h ** (-1.0 - alpha)

        value = area * _half_line_integral(g)
        n = y_arr.shape[0] if dim == 1 else y_arr.shape[0]
        return np.full(n, value)
    if dim != 1:
        raise DomainError("non-radial potentials are implemented for dim=1 only")
    out = np.empty(y_arr.shape[0])
    for k, yk in enumerate(y_arr):
        right = _half_line_integral(lambda h: fspec.fbar(yk, yk + h) ** power * h ** (-1.0 - alpha))
        left = _half_line_integral(lambda h: fspec.fbar(yk, yk - h) ** power * h ** (-1.0 - alpha))
        out[k] = left + right
    return out


def potential_sup(ref, weights, nodes, t, density_factor=1.0, t_order=16):
    """sup over nodes x of int_0^t int density_factor p(s,x,w) W(w) dw ds.

    ``weights`` holds W at ``nodes`` (uniform, dim 1).  Mass of p outside the
    node range is charged at the nearest boundary value of W.
    """
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    h = nodes[1] - nodes[0]
    g, w = leggauss(t_order)
    total = np.zeros(nodes.size)
    offsets = nodes[None, :] - nodes[:, None]
    lo, hi = nodes[0] - h / 2, nodes[-1] + h / 2
    # split [0, t] at t/2: the short-time peak of p(s, .) sits near s = 0
    for a, b in ((0.0, t / 2), (t / 2, t)):
        for gk, wk in zip(g, w):
            s = a + (b - a) * (gk + 1) / 2
            mass = ref.cell_mass_offsets(s, offsets, h)
            inside = mass @ weights
            left = ref.cdf(s, lo - nodes)
            right = 1.0 - ref.cdf(s, hi - nodes)
            total += wk * (b - a) / 2 * (inside + left * weights[0] + right * weights[-1])
    return float(density_factor * total.max())


def check_kato_J(spec, fspec, t_set, ref=None, nodes=None):
    """Table of sup_x int_0^t int p(s,x,y) V(y) dy ds, V from F-bar squared.

    Returns a list of ``(t, value)``.  Raises :class:`JClassViolation` when V
    cannot be computed (F^2 decays too slowly at the diagonal).
    """
    t_set = list(t_set)
    if not t_set or any(t <= 0 for t in t_set) or sorted(t_set) != t_set:
        raise DomainError("t_set must be positive and sorted ascending")
    if spec.dim != 1:
        raise DomainError("check_kato_J is implemented for dim=1")
    ref = ref or ReferenceDensity(alpha=spec.alpha, dim=spec.dim)
    if nodes is None:
        nodes = np.linspace(-10.0, 10.0, 201)
    v = jump_potential(fspec, spec.alpha, nodes, dim=spec.dim, power=2)
    if not np.all(np.isfinite(v)):
        raise JClassViolation("J-class violation: non-finite potential")
    if fspec.is_zero:
        return [(t, 0.0) for t in t_set]
    return [(t, potential_sup(ref, v, nodes, t)) for t in t_set]
