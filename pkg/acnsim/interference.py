"""
Interference from ALOHA-thinned Poisson vehicles on the two roads.

A field realization holds interferer positions only; fading towards a receiver
is drawn afresh by every `aggregate_at` call (one call = one time slot).
"""
import logging
import math
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate

from acnsim.errors import NumericalFailure
from acnsim.geometry import MIN_LINK_DISTANCE, Position
from acnsim.util import AtomicCounter

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 5000.0


class Road(Enum):
    X = "x"
    Y = "y"


class InterfererField:
    """Positions along the X road (points (x, 0)) and the Y road (points (0, y))."""

    on_x: np.ndarray
    on_y: np.ndarray
    window: float

    def __init__(self, on_x: np.ndarray, on_y: np.ndarray, window: float) -> None:
        self.on_x = np.asarray(on_x, dtype=float)
        self.on_y = np.asarray(on_y, dtype=float)
        self.window = window

    def restricted(self, window: float) -> "InterfererField":
        """The same realization seen through a narrower window."""
        return InterfererField(
            self.on_x[np.abs(self.on_x) <= window],
            self.on_y[np.abs(self.on_y) <= window],
            window,
        )

    def __repr__(self) -> str:
        return f"InterfererField({self.on_x.size} on X, {self.on_y.size} on Y, window={self.window})"


class AggregateInterference(NamedTuple):
    i_x: float
    i_y: float

    @property
    def total(self) -> float:
        return self.i_x + self.i_y


NO_INTERFERENCE = AggregateInterference(0.0, 0.0)


def sample_field(
    lambda_x: float,
    lambda_y: float,
    aloha_p: float,
    window: float,
    rng: np.random.Generator,
) -> InterfererField:
    """
    One realization of both roads on [-window, window]. Thinning is folded into
    the intensity: count ~ Poisson(2 * window * lambda * p).
    """
    if not window > 0.0:
        raise ValueError("window must be > 0")
    if lambda_x < 0.0 or lambda_y < 0.0:
        raise ValueError("intensities must be >= 0")
    if not 0.0 <= aloha_p <= 1.0:
        raise ValueError("aloha_p must lie in [0, 1]")

    span = 2.0 * window * aloha_p
    n_x, n_y = rng.poisson((span * lambda_x, span * lambda_y))
    on_x = rng.uniform(-window, window, n_x)
    on_y = rng.uniform(-window, window, n_y)
    return InterfererField(on_x, on_y, window)


def _road_sum(
    points: np.ndarray,
    along: float,
    across: float,
    alpha: float,
    window: float,
    rng: np.random.Generator,
    unit_fading: bool,
    redraws: Optional[AtomicCounter],
) -> float:
    if points.size == 0:
        return 0.0
    dist2 = (points - along) ** 2 + across * across
    close = dist2 < MIN_LINK_DISTANCE * MIN_LINK_DISTANCE
    if close.any():
        # probability-zero event; move the offending points, not the receiver
        points = points.copy()
        for index in np.flatnonzero(close):
            while (points[index] - along) ** 2 + across * across < MIN_LINK_DISTANCE**2:
                points[index] = rng.uniform(-window, window)
        dist2 = (points - along) ** 2 + across * across
        count = int(close.sum())
        if redraws is not None:
            redraws.add(count)
        logger.debug("re-drew %d interferer(s) coincident with the receiver", count)
    gains = dist2 ** (-0.5 * alpha)
    if unit_fading:
        return float(gains.sum())
    fading = rng.exponential(1.0, points.size)
    return float(fading @ gains)


def aggregate_at(
    field: InterfererField,
    receiver: Position,
    alpha: float,
    rng: np.random.Generator,
    *,
    redraws: Optional[AtomicCounter] = None,
    _unit_fading: bool = False,
) -> AggregateInterference:
    """
    I_X and I_Y at `receiver` for one slot: sum of Exp(1) fading times path
    loss over the interferers of each road.
    """
    i_x = _road_sum(
        field.on_x, receiver.x, receiver.y, alpha, field.window, rng, _unit_fading, redraws
    )
    i_y = _road_sum(
        field.on_y, receiver.y, receiver.x, alpha, field.window, rng, _unit_fading, redraws
    )
    return AggregateInterference(i_x, i_y)


def laplace_exponent(s: float, across: float, lam: float, aloha_p: float) -> float:
    """log L(s) on one road for alpha = 2; `across` is the receiver's distance to that road."""
    if s == 0.0 or lam == 0.0 or aloha_p == 0.0:
        return 0.0
    return -s * aloha_p * lam * math.pi / math.sqrt(s + across * across)


def laplace_x(
    s: float, receiver_d: float, receiver_theta: float, lambda_x: float, aloha_p: float
) -> float:
    """E[exp(-s I_X)] for alpha = 2: exp(-s p lambda_X pi / sqrt(s + d^2 sin^2 theta))."""
    if s < 0.0 or receiver_d < 0.0:
        raise ValueError("s and d must be >= 0")
    return math.exp(
        laplace_exponent(s, receiver_d * math.sin(receiver_theta), lambda_x, aloha_p)
    )


def laplace_y(
    s: float, receiver_d: float, receiver_theta: float, lambda_y: float, aloha_p: float
) -> float:
    """E[exp(-s I_Y)] for alpha = 2, with cos^2 theta in place of sin^2 theta."""
    if s < 0.0 or receiver_d < 0.0:
        raise ValueError("s and d must be >= 0")
    return math.exp(
        laplace_exponent(s, receiver_d * math.cos(receiver_theta), lambda_y, aloha_p)
    )


def _offsets(receiver: Position, road: Road) -> tuple[float, float]:
    """(foot of the perpendicular along the road, distance to the road)."""
    if road is Road.X:
        return receiver.x, receiver.y
    return receiver.y, receiver.x


def _quad(func, lower: float, upper: float, epsrel: float, limit: int) -> float:
    result = integrate.quad(func, lower, upper, epsabs=0.0, epsrel=epsrel, limit=limit, full_output=1)
    if len(result) > 3:
        raise NumericalFailure(
            f"quadrature on [{lower}, {upper}] did not converge: {result[3]}", abserr=result[1]
        )
    return result[0]


def _kernel(s: float, across: float, alpha: float):
    across2 = across * across

    def integrand(t: float) -> float:
        # 1 - 1 / (1 + s * l(t)) with l(t) = (t^2 + across^2)^(-alpha/2)
        return s / (s + (t * t + across2) ** (0.5 * alpha))

    return integrand


def _exponent_integral(
    s: float, across: float, alpha: float, lower: float, upper: float, epsrel: float, limit: int
) -> float:
    """Integral of the Laplace-functional kernel over road offsets t in [lower, upper], lower >= 0."""
    integrand = _kernel(s, across, alpha)
    # the kernel is flat out to roughly this offset and decays like t^-alpha beyond it
    knee = max(abs(across), s ** (1.0 / alpha), 1.0)
    if lower < knee < upper:
        return _quad(integrand, lower, knee, epsrel, limit) + _quad(
            integrand, knee, upper, epsrel, limit
        )
    return _quad(integrand, lower, upper, epsrel, limit)


def numerical_laplace(
    s: float,
    receiver: Position,
    road: Road,
    alpha: float,
    lam: float,
    aloha_p: float,
    *,
    epsrel: float = 1e-10,
    limit: int = 200,
) -> float:
    """
    PPP Laplace functional over the infinite road by adaptive quadrature:
    exp(-p lambda * integral of (1 - 1/(1 + s l(u))) du). Valid for any alpha > 1.
    """
    if s < 0.0:
        raise ValueError("s must be >= 0")
    if not alpha > 1.0:
        raise ValueError("alpha must be > 1 for the interference to be finite")
    if s == 0.0 or lam == 0.0 or aloha_p == 0.0:
        return 1.0
    _, across = _offsets(receiver, road)
    # the kernel is symmetric about the foot of the perpendicular
    half = _exponent_integral(s, across, alpha, 0.0, math.inf, epsrel, limit)
    return math.exp(-aloha_p * lam * 2.0 * half)


def truncation_exponent(
    s: float,
    receiver: Position,
    road: Road,
    alpha: float,
    lam: float,
    aloha_p: float,
    window: float,
    *,
    epsrel: float = 1e-8,
    limit: int = 200,
) -> float:
    """
    log of E[exp(-s I)] on [-window, window] minus log of the infinite-road
    value: the exponent mass of the road outside the window. Always >= 0.
    """
    if s == 0.0 or lam == 0.0 or aloha_p == 0.0:
        return 0.0
    foot, across = _offsets(receiver, road)
    if abs(foot) > window:
        raise ValueError(f"receiver {receiver} lies outside the +/-{window} m window")
    # road coordinates beyond +window and below -window, as offsets from the foot
    right = _exponent_integral(s, across, alpha, max(window - foot, 0.0), math.inf, epsrel, limit)
    left = _exponent_integral(s, across, alpha, max(window + foot, 0.0), math.inf, epsrel, limit)
    return aloha_p * lam * (right + left)


def truncation_error(
    s: float,
    receiver: Position,
    road: Road,
    alpha: float,
    lam: float,
    aloha_p: float,
    window: float,
    *,
    epsrel: float = 1e-8,
    limit: int = 200,
) -> float:
    """
    How much E[exp(-s I)] overstates the infinite-road value when interferers
    are only sampled on [-window, window]. Always >= 0.
    """
    excess = truncation_exponent(
        s, receiver, road, alpha, lam, aloha_p, window, epsrel=epsrel, limit=limit
    )
    if excess == 0.0:
        return 0.0
    full = numerical_laplace(s, receiver, road, alpha, lam, aloha_p, limit=limit)
    return full * math.expm1(excess)
