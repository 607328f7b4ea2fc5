import io
import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stable_girsanov import ConfigError, DomainError
from stable_girsanov.functional import (
    FunctionalTrace,
    a_power_direct,
    a_power_formula_backward,
    a_power_formula_forward,
    accumulate,
    compensator_rate,
    identity_errors,
    write_traces_csv,
)
from stable_girsanov.model import JumpFunctionalSpec, ProcessSpec, f_theta
from stable_girsanov.sim import JumpEvent, PathRecord, SimMode, simulate_path

PC = SimMode.PIECEWISE_CONSTANT


def synthetic_path(x0, jumps, T, l, path_index=0):
    """Piecewise-constant path from x0 with jumps given as (time, post_state)."""
    starts, states, events = [0.0], [x0], []
    for t, post in jumps:
        events.append(JumpEvent(t, states[-1], post, abs(post - states[-1])))
        starts.append(t)
        states.append(post)
    ends = starts[1:] + [T]
    return PathRecord(
        x0=x0, horizon=T, seg_start=np.array(starts), seg_end=np.array(ends), seg_state=np.array(states),
        large_jumps=tuple(e for e in events if e.size >= 1.0 / l), terminal=states[-1], seed=0,
        path_index=path_index, mode=PC, epsilon=1.0 / l, l=l,
    )


def kappa_riemann(theta, l, n=2_000_000, upper=60.0):
    """Midpoint rule for 2 int_{1/l}^upper 2 C F(h) h^-2 dh with C = 1/(2 pi)."""
    edges = np.linspace(1.0 / l, upper, n + 1)
    h = 0.5 * (edges[1:] + edges[:-1])
    f = theta * np.minimum(h, 1.0) * np.exp(-h)
    return 2 * np.sum(2 / (2 * np.pi) * f / h**2) * (edges[1] - edges[0])


def test_compensator_rate_oracle(spec):
    for l, frozen in ((5, 0.21997036094063926), (2, 0.09337018914872935)):
        value = compensator_rate(spec, f_theta(0.3, spec), l, 0.0)
        assert value == pytest.approx(frozen, rel=1e-12)
        assert value == pytest.approx(kappa_riemann(0.3, l), rel=1e-7)


def test_compensator_rate_state_dependent_branch(spec):
    c = 1 / (2 * np.pi)
    spec_c = ProcessSpec(c_factor=lambda x, y: np.full(np.shape(x), c), c_max=c)
    fs = f_theta(0.3, spec_c)
    assert compensator_rate(spec_c, fs, 5, 2.7) == pytest.approx(compensator_rate(spec, fs, 5, 0.0), rel=1e-10)


def test_zero_functional_trace(spec, fzero):
    p = simulate_path(spec, 0.0, 1.0, 2, 0.5, PC, seed=4)
    tr = accumulate(p, fzero, spec, 2)
    assert (tr.b_t, tr.d_t, tr.a_log, tr.a_mart, tr.l_weight) == (0.0, 0.0, 0.0, 0.0, 1.0)


def test_single_jump_path(spec, ftheta):
    path = synthetic_path(0.0, [(0.4, 1.0)], 1.0, 2)
    tr = accumulate(path, ftheta, spec, 2)
    assert tr.b_t == pytest.approx(math.log(1 + 0.3 / math.e), rel=1e-15)
    assert math.log(1 + 0.3 / math.e) == pytest.approx(math.log(1.110364), abs=1e-6)
    kappa = kappa_riemann(0.3, 2)
    assert tr.d_t == pytest.approx(0.4 * kappa + 0.6 * kappa, rel=1e-7)
    assert tr.l_weight == pytest.approx(math.exp(tr.b_t - tr.d_t), rel=1e-15)
    assert tr.a_mart == pytest.approx(0.3 / math.e - tr.d_t, rel=1e-14)
    assert tr.per_jump[0][0] == 0 and tr.per_jump[0][2] == pytest.approx(0.3 / math.e)


def test_small_jumps_excluded(spec, ftheta):
    path = synthetic_path(0.0, [(0.2, 0.3), (0.5, 1.3)], 1.0, 2)
    tr = accumulate(path, ftheta, spec, 2)
    assert len(tr.per_jump) == 1
    assert tr.b_t == pytest.approx(math.log1p(0.3 / math.e))


def test_exp_cross_check(spec):
    fs = f_theta(1.0, spec)
    p = simulate_path(spec, 0.0, 2.0, 5, 0.2, PC, seed=8)
    tr = accumulate(p, fs, spec, 5)
    correction = sum(ln1p - f for _, ln1p, f in tr.per_jump)
    assert math.exp(tr.a_mart + correction) == pytest.approx(tr.l_weight, rel=1e-12)


def _trace_with(a_log):
    z = np.zeros(1)
    return FunctionalTrace(0, 0.0, -a_log, a_log, a_log, math.exp(a_log), (), z, z + 1, z, z)


def test_direct_power_examples():
    assert a_power_direct(_trace_with(-0.2), 3) == pytest.approx(-0.008, rel=1e-15)
    assert a_power_direct(_trace_with(0.0), 7) == 0.0
    assert a_power_direct(_trace_with(0.37), 1) == 0.37
    with pytest.raises(DomainError):
        a_power_direct(_trace_with(0.1), 13)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_jump_free_path(spec, ftheta, n):
    path = synthetic_path(0.0, [], 1.0, 2)
    tr = accumulate(path, ftheta, spec, 2)
    kappa = compensator_rate(spec, ftheta, 2, 0.0)
    expected = (-kappa) ** n
    for formula in (a_power_formula_forward, a_power_formula_backward):
        assert formula(tr, path, ftheta, spec, 2, n) == pytest.approx(expected, rel=1e-13)
        assert formula(tr, path, ftheta, spec, 2, n, exact=True) == Fraction(tr.a_log) ** n


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_two_jump_path(spec, ftheta, n):
    path = synthetic_path(0.0, [(0.3, 1.2), (0.7, -0.4)], 1.0, 2)
    tr = accumulate(path, ftheta, spec, 2)
    assert len(tr.per_jump) == 2
    direct = a_power_direct(tr, n)
    assert a_power_formula_forward(tr, path, ftheta, spec, 2, n) == pytest.approx(direct, rel=1e-9)
    assert a_power_formula_backward(tr, path, ftheta, spec, 2, n) == pytest.approx(direct, rel=1e-9)
    if n == 1:
        assert a_power_formula_forward(tr, path, ftheta, spec, 2, 1) == pytest.approx(tr.a_log, rel=1e-14)


def test_pre_jump_convention_fails(spec, ftheta):
    # single jump of size g at time s, no drift to the right of it is needed to see the gap
    path = synthetic_path(0.0, [(0.5, 1.0)], 1.0, 2)
    tr = accumulate(path, ftheta, spec, 2)
    g = tr.seg_jump[1]
    post, pre = tr.seg_a[1], tr.seg_a[1] - g
    n = 2
    continuous = a_power_formula_forward(tr, path, ftheta, spec, 2, n) - sum(
        (-1) ** (i - 1) * comb(n, i) * post ** (n - i) * g**i for i in range(1, n + 1)
    )
    with_pre = continuous + sum((-1) ** (i - 1) * comb(n, i) * pre ** (n - i) * g**i for i in range(1, n + 1))
    assert abs(with_pre - tr.a_log**2) == pytest.approx(2 * g * g, rel=1e-9)


def test_subset_of_jumps_across_levels(spec, ftheta):
    coarse = simulate_path(spec, 0.0, 1.0, 5, 0.05, SimMode.ASMUSSEN_ROSINSKI, seed=21, path_index=3)
    fine = simulate_path(spec, 0.0, 1.0, 20, 0.05, SimMode.ASMUSSEN_ROSINSKI, seed=21, path_index=3)
    assert {j.time for j in coarse.large_jumps} <= {j.time for j in fine.large_jumps}
    assert len(fine.large_jumps) > len(coarse.large_jumps)


def test_invalid_jump_raises(spec):
    bad = JumpFunctionalSpec.from_bounds(lambda x, y: -1.2 * (np.abs(x - y) > 0), -0.5, 1.2, spec.c_max)
    path = synthetic_path(0.0, [(0.5, 1.0)], 1.0, 2)
    with pytest.raises(DomainError, match="inf F > -1"):
        accumulate(path, bad, spec, 2)


def test_level_mismatch(spec, ftheta):
    path = synthetic_path(0.0, [(0.5, 1.0)], 1.0, 2)
    with pytest.raises(ConfigError):
        accumulate(path, ftheta, spec, 5)
    tr = accumulate(path, ftheta, spec, 2)
    with pytest.raises(ConfigError):
        a_power_formula_forward(tr, synthetic_path(0.0, [], 1.0, 2, path_index=9), ftheta, spec, 2, 2)


@given(seed=st.integers(0, 2**31), theta=st.floats(-0.89, 2.0), n=st.integers(1, 5),
       T=st.floats(0.1, 2.0))
def test_identities_property(seed, theta, n, T):
    spec = ProcessSpec()
    fs = f_theta(theta, spec)
    path = simulate_path(spec, 0.0, T, 2, 0.5, PC, seed=seed)
    tr = accumulate(path, fs, spec, 2)
    assert tr.l_weight > 0 and tr.l_weight == pytest.approx(math.exp(tr.b_t - tr.d_t), rel=1e-14)
    fwd, bwd, _ = identity_errors(tr, path, fs, spec, 2, n, exact=True)
    assert fwd <= 1e-9 and bwd <= 1e-9
    fwd, bwd, _ = identity_errors(tr, path, fs, spec, 2, n)
    assert fwd <= 1e-12 and bwd <= 1e-12


def test_traces_csv(spec, ftheta):
    path = synthetic_path(0.0, [(0.5, 1.0)], 1.0, 2)
    buf = io.StringIO()
    write_traces_csv([accumulate(path, ftheta, spec, 2)], buf)
    header, row = buf.getvalue().splitlines()
    assert header == "path_id,b_t,d_t,a_log,l_weight"
    assert float(row.split(",")[1]) == pytest.approx(math.log1p(0.3 / math.e), rel=1e-16)
