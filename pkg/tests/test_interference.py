import itertools
import math

import numpy as np
import pytest
from scipy import stats

from acnsim import interference
from acnsim.errors import NumericalFailure
from acnsim.geometry import Position, from_polar
from acnsim.interference import (
    NO_INTERFERENCE,
    InterfererField,
    Road,
    aggregate_at,
    laplace_x,
    laplace_y,
    numerical_laplace,
    sample_field,
    truncation_error,
    truncation_exponent,
)
from acnsim.util import AtomicCounter

ORIGIN = Position(x=0.0, y=0.0)


def test_empty_roads():
    rng = np.random.default_rng(1)
    for _ in range(100):
        field = sample_field(0.0, 0.01, 0.5, 5000.0, rng)
        assert field.on_x.size == 0
        field = sample_field(0.05, 0.05, 0.0, 5000.0, rng)
        assert field.on_x.size == field.on_y.size == 0


def test_positions_stay_in_window():
    field = sample_field(0.02, 0.03, 1.0, 250.0, np.random.default_rng(2))
    assert np.all(np.abs(field.on_x) <= 250.0)
    assert np.all(np.abs(field.on_y) <= 250.0)


def test_mean_count():
    rng = np.random.default_rng(3)
    counts = np.array([sample_field(0.01, 0.01, 0.5, 10000.0, rng).on_x.size for _ in range(10000)])
    # Poisson(100): standard error of the mean is 0.1
    assert abs(counts.mean() - 100.0) < 0.4


@pytest.mark.parametrize("window", [0.0, -1.0])
def test_sample_field_rejects_bad_window(window):
    with pytest.raises(ValueError):
        sample_field(0.01, 0.01, 0.5, window, np.random.default_rng(0))


def test_aggregate_of_empty_field():
    field = InterfererField(np.array([]), np.array([]), 100.0)
    assert aggregate_at(field, ORIGIN, 2.0, np.random.default_rng(0)) == NO_INTERFERENCE


def test_single_interferer_with_unit_fading():
    field = InterfererField(np.array([100.0]), np.array([]), 1000.0)
    agg = aggregate_at(field, ORIGIN, 2.0, np.random.default_rng(0), _unit_fading=True)
    assert agg.i_x == pytest.approx(1e-4)
    assert agg.i_y == 0.0
    # a receiver off the X road sees the perpendicular offset
    agg = aggregate_at(field, Position(x=100.0, y=50.0), 2.0, np.random.default_rng(0), _unit_fading=True)
    assert agg.i_x == pytest.approx(1.0 / 2500.0)


def test_coincident_interferer_is_redrawn():
    field = InterfererField(np.array([30.0]), np.array([0.0]), 1000.0)
    redraws = AtomicCounter()
    agg = aggregate_at(field, Position(x=30.0, y=0.0), 2.0, np.random.default_rng(4), redraws=redraws)
    assert int(redraws) == 1
    assert math.isfinite(agg.i_x) and agg.i_x > 0.0
    # the field itself is left untouched
    assert field.on_x[0] == 30.0


def test_restricted_field():
    field = sample_field(0.01, 0.01, 1.0, 2000.0, np.random.default_rng(5))
    narrow = field.restricted(500.0)
    assert narrow.window == 500.0
    assert set(narrow.on_x) <= set(field.on_x)
    assert np.all(np.abs(narrow.on_y) <= 500.0)


def _independent_sampler(lam, p, window, receiver_x, alpha, rng):
    """Point-by-point re-implementation of I_X at (receiver_x, 0)."""
    total = 0.0
    for _ in range(rng.poisson(2 * window * lam * p)):
        u = rng.uniform(-window, window)
        total += rng.exponential() * abs(u - receiver_x) ** -alpha
    return total


def test_aggregate_matches_independent_sampler():
    n = 4000
    rng = np.random.default_rng(6)
    ours = [
        aggregate_at(sample_field(0.1, 0.0, 1.0, 1000.0, rng), ORIGIN, 2.0, rng).i_x for _ in range(n)
    ]
    other_rng = np.random.default_rng(60)
    theirs = [_independent_sampler(0.1, 1.0, 1000.0, 0.0, 2.0, other_rng) for _ in range(n)]
    assert stats.ks_2samp(ours, theirs).pvalue > 0.001


def test_roads_are_independent():
    n = 20000
    rng = np.random.default_rng(7)
    receiver = Position(x=40.0, y=30.0)
    samples = np.array(
        [aggregate_at(sample_field(0.01, 0.01, 0.5, 2000.0, rng), receiver, 2.0, rng) for _ in range(n)]
    )
    rho = stats.spearmanr(samples[:, 0], samples[:, 1]).correlation
    assert abs(rho) < 3.0 / math.sqrt(n)


def test_laplace_closed_form_values():
    assert laplace_x(1.0, 0.0, 0.0, 0.1, 1.0) == pytest.approx(math.exp(-0.1 * math.pi), rel=1e-12)
    assert laplace_x(1.0, 0.0, 0.0, 0.1, 1.0) == pytest.approx(0.730402, abs=1e-6)
    assert laplace_y(1.0, 50.0, 0.0, 0.1, 1.0) == pytest.approx(0.993738, abs=1e-6)
    assert laplace_x(0.0, 0.0, 0.0, 0.1, 1.0) == 1.0
    assert laplace_y(0.0, 120.0, 1.0, 0.1, 1.0) == 1.0
    assert laplace_x(5.0, 20.0, 0.3, 0.0, 1.0) == 1.0


def test_laplace_road_symmetry():
    for s, d, lam in itertools.product([0.1, 2.0], [0.0, 75.0], [0.003, 0.04]):
        assert laplace_y(s, d, 0.0, lam, 0.5) == pytest.approx(laplace_x(s, d, math.pi / 2, lam, 0.5))


def test_laplace_rejects_negative_arguments():
    with pytest.raises(ValueError):
        laplace_x(-1.0, 10.0, 0.0, 0.01, 0.5)
    with pytest.raises(ValueError):
        laplace_y(1.0, -10.0, 0.0, 0.01, 0.5)


def test_laplace_is_completely_monotone_on_grid():
    s_grid = np.geomspace(1e-3, 1e3, 60)
    values = np.array([laplace_x(s, 80.0, 0.6, 0.02, 0.7) for s in s_grid])
    assert np.all((values > 0.0) & (values <= 1.0))
    assert np.all(np.diff(values) < 0.0)
    # log-convexity on evenly spaced triples
    s_lin = np.linspace(0.01, 50.0, 101)
    logs = np.log([laplace_x(s, 80.0, 0.6, 0.02, 0.7) for s in s_lin])
    assert np.all(logs[:-2] + logs[2:] - 2.0 * logs[1:-1] >= -1e-12)


GRID = [
    (0.1, 0.0, 0.0),
    (1.0, 50.0, math.pi / 4),
    (10.0, 200.0, math.pi / 2),
    (2.0, 100.0, math.pi / 2),
    (10.0, 0.0, 0.0),
    (0.5, 50.0, 0.3),
]


@pytest.mark.parametrize("s, d, theta", GRID)
@pytest.mark.parametrize("road", [Road.X, Road.Y])
def test_numerical_laplace_matches_closed_form(s, d, theta, road):
    receiver = from_polar(d, theta)
    closed = (laplace_x if road is Road.X else laplace_y)(s, d, theta, 0.05, 0.5)
    assert numerical_laplace(s, receiver, road, 2.0, 0.05, 0.5) == pytest.approx(closed, rel=1e-8)


def test_numerical_laplace_general_alpha():
    # integral of s / (s + |u|^alpha) over the line is 2 s^(1/alpha) (pi/alpha) / sin(pi/alpha)
    expected = math.exp(-0.1 * math.pi / math.sqrt(2.0))
    assert numerical_laplace(1.0, ORIGIN, Road.X, 4.0, 0.1, 1.0) == pytest.approx(expected, rel=1e-8)
    assert expected == pytest.approx(0.80080, abs=1e-5)
    s, alpha = 3.0, 3.0
    exponent = 2 * s ** (1 / alpha) * (math.pi / alpha) / math.sin(math.pi / alpha)
    assert numerical_laplace(s, ORIGIN, Road.Y, alpha, 0.02, 0.5) == pytest.approx(
        math.exp(-0.01 * exponent), rel=1e-8
    )


def test_numerical_laplace_edge_cases():
    assert numerical_laplace(0.0, ORIGIN, Road.X, 2.0, 0.1, 1.0) == 1.0
    with pytest.raises(ValueError):
        numerical_laplace(1.0, ORIGIN, Road.X, 1.0, 0.1, 1.0)


def test_numerical_laplace_reports_nonconvergence(monkeypatch):
    def stalled_quad(*args, **kwargs):
        return 0.5, 1e-3, {}, "The maximum number of subdivisions has been achieved."

    monkeypatch.setattr(interference.integrate, "quad", stalled_quad)
    with pytest.raises(NumericalFailure) as info:
        numerical_laplace(1.0, ORIGIN, Road.X, 2.0, 0.1, 1.0)
    assert info.value.abserr == 1e-3


def test_default_window_is_sufficient():
    # small Laplace arguments: the window deficit is far below a 100k-sample standard error
    for s in (0.1, 1.0, 10.0):
        assert truncation_error(s, ORIGIN, Road.X, 2.0, 0.02, 0.5, 5000.0) < 1e-4
        assert truncation_error(s, ORIGIN, Road.X, 2.0, 0.02, 0.5, 10000.0) < truncation_error(
            s, ORIGIN, Road.X, 2.0, 0.02, 0.5, 5000.0
        )


def test_truncation_error_rejects_receiver_outside_window():
    with pytest.raises(ValueError):
        truncation_error(1.0, Position(x=600.0, y=0.0), Road.X, 2.0, 0.01, 0.5, 500.0)


def test_truncation_exponent_on_the_road():
    # receiver on the road: the tail integral of s / (s + u^2) beyond w is sqrt(s) (pi/2 - atan(w / sqrt(s)))
    for s in (1.0, 100.0, 1e4):
        expected = 0.5 * 0.005 * 2 * math.sqrt(s) * (math.pi / 2 - math.atan(5000.0 / math.sqrt(s)))
        got = truncation_exponent(s, ORIGIN, Road.X, 2.0, 0.005, 0.5, 5000.0)
        assert got == pytest.approx(expected, rel=1e-5)


def test_truncation_exponent_is_large_at_link_scale_arguments():
    # s = G / l near 1e4 is typical for 100 m links; there 5 km of road leaves about 1% of the exponent out
    receiver = Position(x=0.0, y=100.0)
    excess = truncation_exponent(1e4, receiver, Road.X, 2.0, 0.005, 0.5, 5000.0)
    assert excess > 5e-3
    assert truncation_exponent(1e4, receiver, Road.X, 2.0, 0.005, 0.5, 50000.0) < excess / 5


def test_truncation_exponent_agrees_with_truncation_error():
    receiver = from_polar(50.0, math.pi / 3)
    for road in (Road.X, Road.Y):
        full = numerical_laplace(1e3, receiver, road, 2.0, 0.01, 0.5)
        error = truncation_error(1e3, receiver, road, 2.0, 0.01, 0.5, 2000.0)
        excess = truncation_exponent(1e3, receiver, road, 2.0, 0.01, 0.5, 2000.0)
        assert excess >= 0.0
        assert excess == pytest.approx(math.log1p(error / full), rel=1e-6)


def test_truncation_exponent_vanishes_without_interferers():
    assert truncation_exponent(1e4, ORIGIN, Road.Y, 2.0, 0.0, 0.5, 100.0) == 0.0
    assert truncation_exponent(1e4, ORIGIN, Road.Y, 2.0, 0.01, 0.0, 100.0) == 0.0
    assert truncation_exponent(0.0, ORIGIN, Road.Y, 2.0, 0.01, 0.5, 100.0) == 0.0


def _keystone_grid():
    combos = []
    geometries = [(0.0, 0.0), (50.0, math.pi / 4), (200.0, math.pi / 2)]
    for i, (s, (d, theta)) in enumerate(itertools.product([0.1, 1.0, 10.0], geometries)):
        combos.append((s, d, theta, (0.001, 0.01)[i % 2], (0.5, 1.0)[(i // 2) % 2]))
    combos += [
        (1.0, 0.0, 0.0, 0.01, 1.0),
        (10.0, 50.0, math.pi / 4, 0.001, 0.5),
        (0.1, 200.0, math.pi / 2, 0.01, 0.5),
    ]
    return combos


def _empirical_laplace(s, receiver, lam, p, window, n, seed):
    rng = np.random.default_rng(seed)
    values = np.array(
        [math.exp(-s * aggregate_at(sample_field(lam, 0.0, p, window, rng), receiver, 2.0, rng).i_x) for _ in range(n)]
    )
    return values.mean(), values.std(ddof=1) / math.sqrt(n)


def _check_keystone(s, d, theta, lam, p, n, seed):
    window = 5000.0
    receiver = from_polar(d, theta)
    mean, stderr = _empirical_laplace(s, receiver, lam, p, window, n, seed)
    closed = laplace_x(s, d, theta, lam, p)
    windowed = closed + truncation_error(s, receiver, Road.X, 2.0, lam, p, window)
    assert abs(mean - windowed) <= 3.0 * stderr + 1e-12
    assert numerical_laplace(s, receiver, Road.X, 2.0, lam, p) == pytest.approx(closed, rel=1e-6)


@pytest.mark.parametrize("s, d, theta, lam, p", _keystone_grid()[:3])
def test_sampler_matches_laplace_transform(s, d, theta, lam, p):
    _check_keystone(s, d, theta, lam, p, n=20000, seed=100)


@pytest.mark.slow
@pytest.mark.parametrize("index", range(len(_keystone_grid())))
def test_sampler_matches_laplace_transform_full_grid(index):
    _check_keystone(*_keystone_grid()[index], n=100000, seed=200 + index)
