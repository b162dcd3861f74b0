"""
Closed-form ACN outage at the intersection (alpha = 2 only).

Each success probability is a product of per-receiver W terms, W = L_X * L_Y,
evaluated in log space; the factorization treats interference at different
receivers and slots as independent.

With `window` set, every Laplace factor is taken over roads cut to
[-window, window], which is the event a Monte-Carlo run with that `mc.window`
samples. Without it the roads are infinite.
"""
import math
from typing import Optional

from pydantic import BaseModel

from acnsim.errors import AnalyticDomainError
from acnsim.geometry import Position, Scene, polar_of
from acnsim.interference import Road, laplace_exponent, truncation_exponent
from acnsim.noma_link import GValue, is_feasible


class AnalyticOutage(BaseModel):
    p_out_d1: float
    p_out_d2: float
    # direct / rescue success terms per destination
    terms: dict[str, float]

    class Config:
        frozen = True

    def phases_mean(self, destination: int) -> float:
        """Expected number of phases: one, plus a second whenever the direct phase fails."""
        return 2.0 - self.terms[f"d{destination}_direct"]


def _require_alpha_two(scene: Scene) -> None:
    if scene.alpha != 2.0:
        raise AnalyticDomainError(
            f"closed-form Laplace transforms assume alpha = 2, scene has alpha = {scene.alpha}"
        )


def log_w(receiver: tuple[float, float], s: float, scene: Scene) -> float:
    _require_alpha_two(scene)
    d, theta = receiver
    return laplace_exponent(
        s, d * math.sin(theta), scene.lambda_x, scene.aloha_p
    ) + laplace_exponent(s, d * math.cos(theta), scene.lambda_y, scene.aloha_p)


def w_function(receiver: tuple[float, float], s: float, scene: Scene) -> float:
    """W(s) = L_X(s) * L_Y(s) at a receiver given in polar form (d, theta)."""
    if s < 0.0:
        raise ValueError("s must be >= 0")
    return math.exp(log_w(receiver, s, scene))


def window_excess(receiver: Position, s: float, scene: Scene, window: float) -> float:
    """log W over the window minus log W over the infinite roads."""
    return truncation_exponent(
        s, receiver, Road.X, scene.alpha, scene.lambda_x, scene.aloha_p, window
    ) + truncation_exponent(s, receiver, Road.Y, scene.alpha, scene.lambda_y, scene.aloha_p, window)


def _log_success(
    receiver: Position, g: GValue, gain: float, scene: Scene, window: Optional[float]
) -> float:
    """log P(|h|^2 l >= g * I); -inf when g is infeasible."""
    if not is_feasible(g):
        return -math.inf
    s = g / gain
    log_success = log_w(polar_of(receiver), s, scene)
    if window is not None:
        log_success = min(0.0, log_success + window_excess(receiver, s, scene, window))
    return log_success


def _combine(log_direct: float, log_chain: float) -> tuple[float, float, float]:
    # 1 - [Wd + (1 - Wd) Wc] == (1 - Wd)(1 - Wc), accurate at both ends
    miss_direct = -math.expm1(log_direct)
    miss_chain = -math.expm1(log_chain)
    direct = math.exp(log_direct)
    rescue = miss_direct * math.exp(log_chain)
    p_out = min(1.0, max(0.0, miss_direct * miss_chain))
    return p_out, direct, rescue


def _d1(scene: Scene, include_rescue: bool, window: Optional[float]) -> tuple[float, float, float]:
    g = scene.gfactors()
    th = scene.thresholds()
    log_direct = _log_success(
        scene.dest1, g.g1[1], scene.gain(scene.source, scene.dest1), scene, window
    )
    log_chain = -math.inf
    if include_rescue:
        log_chain = _log_success(
            scene.dest2, g.g1[2], scene.gain(scene.source, scene.dest2), scene, window
        ) + _log_success(
            scene.dest1, th(2, 1), scene.gain(scene.dest2, scene.dest1), scene, window
        )
    return _combine(log_direct, log_chain)


def _d2(scene: Scene, include_rescue: bool, window: Optional[float]) -> tuple[float, float, float]:
    g = scene.gfactors()
    th = scene.thresholds()
    log_direct = _log_success(
        scene.dest2, g.gmax[1], scene.gain(scene.source, scene.dest2), scene, window
    )
    log_chain = -math.inf
    if include_rescue:
        log_chain = _log_success(
            scene.dest1, g.gmax[2], scene.gain(scene.source, scene.dest1), scene, window
        ) + _log_success(
            scene.dest2, th(2, 2), scene.gain(scene.dest1, scene.dest2), scene, window
        )
    return _combine(log_direct, log_chain)


def acn_analysis(
    scene: Scene, *, include_rescue: bool = True, window: Optional[float] = None
) -> AnalyticOutage:
    """
    Both destinations with the direct/rescue breakdown. `include_rescue=False`
    zeroes the rescue chain, leaving the direct-NOMA closed form.
    """
    p1, direct1, rescue1 = _d1(scene, include_rescue, window)
    p2, direct2, rescue2 = _d2(scene, include_rescue, window)
    return AnalyticOutage(
        p_out_d1=p1,
        p_out_d2=p2,
        terms={
            "d1_direct": direct1,
            "d1_rescue": rescue1,
            "d2_direct": direct2,
            "d2_rescue": rescue2,
        },
    )


def acn_outage_d1(scene: Scene, window: Optional[float] = None) -> float:
    return _d1(scene, True, window)[0]


def acn_outage_d2(scene: Scene, window: Optional[float] = None) -> float:
    return _d2(scene, True, window)[0]


def direct_noma_outage_d1(scene: Scene, window: Optional[float] = None) -> float:
    return _d1(scene, False, window)[0]
