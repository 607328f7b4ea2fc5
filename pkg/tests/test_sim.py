import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from stable_girsanov import ConfigError, DomainError, ThinningError
from stable_girsanov.model import ProcessSpec
from stable_girsanov.sim import (
    SimMode,
    acceptance_ratio,
    dominating_rate,
    expected_jump_count,
    simulate_path,
    simulate_paths,
    small_jump_variance,
    write_paths_csv,
)

PC = SimMode.PIECEWISE_CONSTANT
AR = SimMode.ASMUSSEN_ROSINSKI


def test_zero_intensity_path_is_constant():
    spec = ProcessSpec(c_max=0.0)
    for mode in (PC, AR):
        p = simulate_path(spec, 1.5, 2.0, 2, 0.1, mode, seed=1)
        assert p.n_segments == 1 and p.large_jumps == ()
        assert p.terminal == 1.5 and p.seg_state[0] == 1.5


def test_rates_against_levy_measure(spec):
    eps = 0.05
    tail, _ = integrate.quad(lambda h: 2 * (1 / math.pi) * h**-2, eps, np.inf)
    assert dominating_rate(spec, eps) == pytest.approx(tail, rel=1e-10)
    var, _ = integrate.quad(lambda h: 2 * h * h * (1 / math.pi) * h**-2, 0, eps)
    assert small_jump_variance(spec, eps) == pytest.approx(var, rel=1e-12)
    assert expected_jump_count(spec, 1.0, 0.5) == pytest.approx(4 / math.pi)


def test_large_jump_count(spec):
    paths = simulate_paths(spec, 0.0, 1.0, 2, 1e-3, PC, n_paths=10_000, seed=7)
    counts = np.array([len(p.large_jumps) for p in paths])
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - 4 / math.pi) <= 3 * se


def test_terminal_law_is_cauchy(spec):
    paths = simulate_paths(spec, 0.0, 1.0, 5, 0.01, AR, n_paths=10_000, seed=11)
    x = np.array([p.terminal for p in paths])
    res = stats.kstest(x, stats.cauchy(scale=1.0).cdf)
    assert res.statistic < 1.63 / math.sqrt(x.size)  # 1% critical value


def test_piecewise_constant_terminal_law(spec):
    # dropping jumps below eps=0.01 barely moves the Cauchy law at T=1
    paths = simulate_paths(spec, 0.0, 1.0, 5, 0.01, PC, n_paths=5_000, seed=12)
    x = np.array([p.terminal for p in paths])
    assert stats.kstest(x, stats.cauchy.cdf).pvalue > 0.01


def test_reproducible_across_threads(spec):
    a = simulate_paths(spec, 0.0, 0.5, 5, 0.01, AR, n_paths=300, seed=3, threads=1)
    b = simulate_paths(spec, 0.0, 0.5, 5, 0.01, AR, n_paths=300, seed=3, threads=4)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.seg_start, pb.seg_start)
        assert np.array_equal(pa.seg_state, pb.seg_state)
        assert pa.terminal == pb.terminal
    c = simulate_path(spec, 0.0, 0.5, 5, 0.01, AR, seed=3, path_index=17)
    assert c.terminal == a[17].terminal
    assert simulate_path(spec, 0.0, 0.5, 5, 0.01, AR, seed=4, path_index=17).terminal != c.terminal


def test_thinning_with_constant_c_accepts_everything():
    c_max = 1 / (2 * math.pi)
    spec = ProcessSpec(c_factor=lambda x, y: np.full(np.shape(x), c_max), c_max=c_max)
    assert not spec.homogeneous
    y = np.linspace(-20, 20, 101)
    np.testing.assert_array_equal(acceptance_ratio(spec, np.zeros_like(y), y), 1.0)
    paths = simulate_paths(spec, 0.0, 1.0, 2, 0.1, PC, n_paths=3000, seed=5)
    counts = np.array([p.n_segments - 1 for p in paths])
    lam = dominating_rate(spec, 0.1)
    assert abs(counts.mean() - lam) <= 3 * math.sqrt(lam / counts.size)


def test_thinning_halves_the_rate():
    c_max = 1 / (2 * math.pi)
    spec = ProcessSpec(c_factor=lambda x, y: np.full(np.shape(x), c_max / 2), c_max=c_max)
    paths = simulate_paths(spec, 0.0, 1.0, 2, 0.1, PC, n_paths=3000, seed=6)
    counts = np.array([p.n_segments - 1 for p in paths])
    lam = dominating_rate(spec, 0.1) / 2
    assert abs(counts.mean() - lam) <= 3 * math.sqrt(lam / counts.size)


def test_thinning_detects_bad_bound():
    spec = ProcessSpec(c_factor=lambda x, y: np.full(np.shape(x), 1.0), c_max=0.1)
    with pytest.raises(ThinningError, match="c_max or m_bar"):
        simulate_path(spec, 0.0, 5.0, 2, 0.5, seed=0)


def test_jump_size_law(spec):
    eps = 0.05
    paths = simulate_paths(spec, 0.0, 1.0, 20, eps, PC, n_paths=800, seed=9)
    sizes = np.concatenate([np.abs(np.diff(p.seg_state)) for p in paths])
    assert sizes.size >= 10_000 and sizes.min() >= eps
    # equal-probability bins of the Pareto law P(|h| > s) = eps / s
    edges = np.append(eps / (1 - np.linspace(0, 1, 21)[:-1]), np.inf)
    observed, _ = np.histogram(sizes, edges)
    assert stats.chisquare(observed).pvalue > 0.05


@given(
    seed=st.integers(0, 2**31),
    x0=st.floats(-5, 5),
    T=st.floats(0.05, 3.0),
    l=st.integers(1, 10),
    mode=st.sampled_from([PC, AR]),
)
def test_path_invariants(seed, x0, T, l, mode):
    spec = ProcessSpec()
    eps = 0.5 / l
    p = simulate_path(spec, x0, T, l, eps, mode, seed=seed)
    assert p.seg_start[0] == 0.0 and p.seg_end[-1] == T
    np.testing.assert_array_equal(p.seg_end[:-1], p.seg_start[1:])
    assert np.all(np.diff(p.seg_start) > 0)
    times = [j.time for j in p.large_jumps]
    assert times == sorted(set(times))
    for j in p.large_jumps:
        assert j.size >= 1.0 / l and j.size == pytest.approx(abs(j.post_state - j.pre_state))
        assert j.time in set(p.seg_start[1:].tolist())
    if mode is PC:
        assert p.terminal == p.seg_state[-1]
        steps = np.abs(np.diff(p.seg_state))
        assert np.all(steps >= eps)
        assert len(p.large_jumps) == int(np.sum(steps >= 1.0 / l))


def test_two_dimensional_paths():
    spec = ProcessSpec(alpha=1.0, dim=2)
    p = simulate_path(spec, [0.0, 1.0], 1.0, 2, 0.1, AR, seed=2)
    assert p.seg_state.shape == (p.n_segments, 2)
    assert np.shape(p.terminal) == (2,)
    for j in p.large_jumps:
        assert j.size == pytest.approx(np.linalg.norm(j.post_state - j.pre_state))


def test_argument_errors(spec):
    with pytest.raises(ConfigError):
        simulate_path(spec, 0.0, 1.0, 5, 0.3)
    with pytest.raises(DomainError):
        simulate_path(spec, 0.0, 0.0, 5, 0.1)


def test_paths_csv(spec):
    paths = simulate_paths(spec, 0.0, 1.0, 2, 0.5, PC, n_paths=5, seed=1)
    buf = io.StringIO()
    write_paths_csv(paths, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "path_id,kind,t_start,t_end,state,jump_size"
    n_rows = sum(p.n_segments + len(p.large_jumps) for p in paths)
    assert len(lines) == 1 + n_rows
    assert "\r" not in buf.getvalue()
