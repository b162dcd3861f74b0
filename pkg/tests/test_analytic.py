import math

import numpy as np
import pytest

from acnsim.analytic import (
    acn_analysis,
    acn_outage_d1,
    acn_outage_d2,
    direct_noma_outage_d1,
    w_function,
)
from acnsim.errors import AnalyticDomainError
from acnsim.geometry import Position


def W(scene, x, y, s):
    """L_X * L_Y written out for a receiver at (x, y)."""
    c = scene.aloha_p * math.pi * s
    return math.exp(-c * scene.lambda_x / math.sqrt(s + y * y) - c * scene.lambda_y / math.sqrt(s + x * x))


def test_w_function(road_scene):
    assert w_function((120.0, 0.4), 0.0, road_scene) == 1.0
    assert w_function((120.0, 0.4), 3.0, road_scene.with_lambda(0.0)) == 1.0
    scene = road_scene.evolve(lambda_x=0.1, lambda_y=0.1, aloha_p=1.0)
    assert w_function((0.0, 0.0), 1.0, scene) == pytest.approx(math.exp(-0.2 * math.pi))
    assert w_function((0.0, 0.0), 1.0, scene) == pytest.approx(0.533488, abs=1e-6)


def test_closed_forms_need_alpha_two(road_scene):
    scene = road_scene.evolve(alpha=3.0)
    for func in (acn_outage_d1, acn_outage_d2, direct_noma_outage_d1):
        with pytest.raises(AnalyticDomainError):
            func(scene)
    with pytest.raises(AnalyticDomainError):
        w_function((10.0, 0.0), 1.0, scene)


def test_hand_evaluated_outage(road_scene):
    a1, a2 = road_scene.a1, road_scene.a2
    t11, t12 = 2**0.5 - 1, 1.0
    t21, t22 = 1.0, 3.0
    g11, g21 = t11 / (a1 - t11 * a2), t21 / (a1 - t21 * a2)
    gmax1, gmax2 = max(g11, t12 / a2), max(g21, t22 / a2)
    l = 1e-4  # every link is 100 m long

    direct = W(road_scene, 0, 100, g11 / l)
    chain = W(road_scene, 0, 300, g21 / l) * W(road_scene, 0, 100, t21 / l)
    assert acn_outage_d1(road_scene) == pytest.approx(1 - (direct + (1 - direct) * chain), rel=1e-12)

    direct = W(road_scene, 0, 300, gmax1 / l)
    chain = W(road_scene, 0, 100, gmax2 / l) * W(road_scene, 0, 300, t22 / l)
    assert acn_outage_d2(road_scene) == pytest.approx(1 - (direct + (1 - direct) * chain), rel=1e-12)


def test_no_interference_means_no_outage(road_scene):
    scene = road_scene.with_lambda(0.0)
    assert acn_outage_d1(scene) == 0.0
    assert acn_outage_d2(scene) == 0.0
    assert direct_noma_outage_d1(scene) == 0.0


def test_infeasible_sic_means_certain_outage(road_scene):
    # theta(1,1) = 2^2.5 - 1 > a1/a2, so theta(2,1) is too
    scene = road_scene.evolve(r1=2.5)
    assert acn_outage_d1(scene) == 1.0
    assert acn_outage_d2(scene) == 1.0
    assert acn_outage_d1(scene.with_lambda(0.0)) == 1.0


def test_only_the_rescue_path_infeasible(road_scene):
    # theta(1,1) = 2^1.2 - 1 < 4 <= theta(2,1) = 2^2.4 - 1
    scene = road_scene.evolve(r1=1.2)
    outage = acn_analysis(scene)
    assert outage.terms["d1_rescue"] == 0.0
    assert outage.p_out_d1 == pytest.approx(direct_noma_outage_d1(scene), rel=1e-12)
    assert 0.0 < outage.p_out_d1 < 1.0


def test_breakdown(road_scene):
    for lam in (0.001, 0.01, 0.05):
        outage = acn_analysis(road_scene.with_lambda(lam))
        for dest in (1, 2):
            direct = outage.terms[f"d{dest}_direct"]
            rescue = outage.terms[f"d{dest}_rescue"]
            p_out = outage.p_out_d1 if dest == 1 else outage.p_out_d2
            assert direct >= 0 and rescue >= 0 and direct + rescue <= 1 + 1e-15
            assert p_out == pytest.approx(1 - (direct + rescue), abs=1e-12)
            assert outage.phases_mean(dest) == pytest.approx(2 - direct)


def test_rescue_hook_reduces_to_direct_noma(road_scene):
    for lam in (0.001, 0.005, 0.02):
        scene = road_scene.with_lambda(lam)
        reduced = acn_analysis(scene, include_rescue=False)
        expected = 1 - W(scene, 0, 100, scene.gfactors().g1[1] / 1e-4)
        assert reduced.p_out_d1 == pytest.approx(expected, rel=1e-12)
        assert reduced.p_out_d1 == pytest.approx(direct_noma_outage_d1(scene), rel=1e-15)
        assert acn_outage_d1(scene) <= reduced.p_out_d1


def test_bounds_on_random_scenes(road_scene):
    rng = np.random.default_rng(12)
    for _ in range(10000):
        a1 = rng.uniform(0.5, 0.99)
        nodes = rng.uniform(-500.0, 500.0, (3, 2))
        try:
            scene = road_scene.evolve(
                source=Position(x=nodes[0, 0], y=nodes[0, 1]),
                dest1=Position(x=nodes[1, 0], y=nodes[1, 1]),
                dest2=Position(x=nodes[2, 0], y=nodes[2, 1]),
                lambda_x=10.0 ** rng.uniform(-5.0, 0.0),
                lambda_y=10.0 ** rng.uniform(-5.0, 0.0),
                aloha_p=rng.uniform(0.0, 1.0),
                a1=a1,
                a2=1.0 - a1,
                r1=rng.uniform(0.05, 3.0),
                r2=rng.uniform(0.05, 3.0),
            )
        except ValueError:
            continue
        for value in (acn_outage_d1(scene), acn_outage_d2(scene)):
            assert 0.0 <= value <= 1.0


@pytest.mark.parametrize(
    "step",
    [
        lambda s, v: s.with_lambda(v * 0.02),
        lambda s, v: s.evolve(lambda_x=v * 0.02),
        lambda s, v: s.evolve(lambda_y=v * 0.02),
        lambda s, v: s.evolve(aloha_p=v),
        lambda s, v: s.evolve(r1=0.05 + 2 * v),
        lambda s, v: s.evolve(r2=0.05 + 2 * v),
    ],
)
def test_monotone_along_parameter_grids(road_scene, step):
    grid = np.linspace(0.01, 1.0, 40)
    d1 = [acn_outage_d1(step(road_scene, v)) for v in grid]
    d2 = [acn_outage_d2(step(road_scene, v)) for v in grid]
    assert np.all(np.diff(d1) >= -1e-12)
    assert np.all(np.diff(d2) >= -1e-12)


@pytest.mark.parametrize("lam", [0.001, 0.005, 0.02])
@pytest.mark.parametrize("r1, r2", [(0.5, 1.0), (1.2, 1.0), (0.3, 0.3)])
def test_d1_outage_falls_as_a1_grows(road_scene, lam, r1, r2):
    scene = road_scene.with_lambda(lam).evolve(r1=r1, r2=r2)
    d1 = [acn_outage_d1(scene.with_a1(a1)) for a1 in np.linspace(0.51, 0.99, 49)]
    assert np.all(np.diff(d1) <= 1e-12)


@pytest.mark.parametrize("lam", [0.001, 0.005, 0.02])
def test_finite_roads_lower_the_outage(road_scene, lam):
    scene = road_scene.with_lambda(lam).with_a1(0.9)
    infinite = acn_analysis(scene)
    windowed = acn_analysis(scene, window=5000.0)
    assert windowed.p_out_d1 < infinite.p_out_d1
    assert windowed.p_out_d2 < infinite.p_out_d2
    assert direct_noma_outage_d1(scene, window=5000.0) < direct_noma_outage_d1(scene)
    far = acn_analysis(scene, window=1e8)
    assert far.p_out_d1 == pytest.approx(infinite.p_out_d1, rel=1e-4)
    assert far.p_out_d2 == pytest.approx(infinite.p_out_d2, rel=1e-4)


def test_finite_roads_shift_d2_by_several_stderr(road_scene):
    # low intensity, a1 = 0.9: the window moves D2 further than 3 stderr of 20k trials
    scene = road_scene.with_lambda(0.001).with_a1(0.9)
    infinite = acn_outage_d2(scene)
    windowed = acn_outage_d2(scene, window=5000.0)
    stderr = math.sqrt(windowed * (1 - windowed) / 20000)
    assert infinite - windowed > 3 * stderr


def test_finite_roads_without_interferers(road_scene):
    scene = road_scene.with_lambda(0.0)
    assert acn_outage_d1(scene, window=500.0) == 0.0
    assert acn_outage_d2(scene, window=500.0) == 0.0
