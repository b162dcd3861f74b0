"""
SIR algebra for two-user downlink NOMA with perfect SIC, and the relay-hop OMA
link. Noise power is zero, so every quantity is a signal-to-interference ratio.
"""
from enum import Enum
from typing import TYPE_CHECKING, Literal, Union

if TYPE_CHECKING:
    from acnsim.interference import AggregateInterference


class _Infeasible(Enum):
    INFEASIBLE = "infeasible"

    def __repr__(self) -> str:
        return "INFEASIBLE"


# marks a G-factor whose threshold is at or above the a1/a2 ceiling
INFEASIBLE = _Infeasible.INFEASIBLE
GValue = Union[float, Literal[_Infeasible.INFEASIBLE]]


class InfiniteSir:
    """
    SIR of an interference-free post-SIC link. Compares above every finite
    threshold and refuses arithmetic.
    """

    _instance: "InfiniteSir | None" = None

    def __new__(cls) -> "InfiniteSir":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITE_SIR"

    def __ge__(self, other: object) -> bool:
        return True

    def __gt__(self, other: object) -> bool:
        return other is not self

    def __le__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        return False

    def __eq__(self, other: object) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("INFINITE_SIR")


INFINITE_SIR = InfiniteSir()
Sir = Union[float, InfiniteSir]


class PowerSplit:
    a1: float
    a2: float

    __slots__ = ("a1", "a2")

    def __init__(self, a1: float, a2: float) -> None:
        if not a2 > 0.0 or a1 < a2:
            raise ValueError(f"power split requires a1 >= a2 > 0, got a1={a1}, a2={a2}")
        if abs(a1 + a2 - 1.0) > 1e-12:
            raise ValueError(f"power split requires a1 + a2 = 1, got {a1 + a2}")
        self.a1 = a1
        self.a2 = a2

    @property
    def ceiling(self) -> float:
        """Largest SIR the strong message can reach: a1 / a2."""
        return self.a1 / self.a2

    def __repr__(self) -> str:
        return f"PowerSplit(a1={self.a1}, a2={self.a2})"


class Thresholds:
    """theta[n][i] = 2^(n * R_i) - 1, n = phases sharing the frame, i = destination."""

    theta: dict[int, dict[int, float]]

    def __init__(self, theta: dict[int, dict[int, float]]) -> None:
        self.theta = theta

    def __call__(self, n: int, i: int) -> float:
        return self.theta[n][i]

    def __repr__(self) -> str:
        return f"Thresholds({self.theta})"


def make_thresholds(r1: float, r2: float) -> Thresholds:
    if not (r1 > 0.0 and r2 > 0.0):
        raise ValueError("rates must be > 0")
    rates = {1: r1, 2: r2}
    return Thresholds({n: {i: 2.0 ** (n * rates[i]) - 1.0 for i in (1, 2)} for n in (1, 2)})


def is_feasible(g: GValue) -> bool:
    return g is not INFEASIBLE


class GFactors:
    g1: dict[int, GValue]
    g2: dict[int, float]
    gmax: dict[int, GValue]

    def __init__(
        self, g1: dict[int, GValue], g2: dict[int, float], gmax: dict[int, GValue]
    ) -> None:
        self.g1 = g1
        self.g2 = g2
        self.gmax = gmax

    def __repr__(self) -> str:
        return f"GFactors(g1={self.g1}, g2={self.g2}, gmax={self.gmax})"


def make_gfactors(split: PowerSplit, th: Thresholds) -> GFactors:
    g1: dict[int, GValue] = {}
    g2: dict[int, float] = {}
    gmax: dict[int, GValue] = {}
    for n in (1, 2):
        t1 = th(n, 1)
        # boundary t1 == a1/a2 counts as infeasible
        if t1 < split.ceiling:
            g1[n] = t1 / (split.a1 - t1 * split.a2)
        else:
            g1[n] = INFEASIBLE
        g2[n] = th(n, 2) / split.a2
        g = g1[n]
        gmax[n] = max(g, g2[n]) if is_feasible(g) else INFEASIBLE
    return GFactors(g1, g2, gmax)


def sir_noma_strong(h2: float, l: float, split: PowerSplit, agg: "AggregateInterference") -> float:
    """SIR for decoding the high-power message with the low-power one as interference."""
    signal = h2 * l
    if signal <= 0.0:
        return 0.0
    total = agg.i_x + agg.i_y
    if total == 0.0:
        return split.ceiling
    return signal * split.a1 / (signal * split.a2 + total)


def _post_sic(h2: float, l: float, fraction: float, agg: "AggregateInterference") -> Sir:
    total = agg.i_x + agg.i_y
    if total == 0.0:
        return INFINITE_SIR
    return h2 * l * fraction / total


def sir_noma_weak(h2: float, l: float, split: PowerSplit, agg: "AggregateInterference") -> Sir:
    """SIR for the low-power message once the high-power one has been cancelled."""
    return _post_sic(h2, l, split.a2, agg)


def sir_oma(h2: float, l: float, agg: "AggregateInterference") -> Sir:
    return _post_sic(h2, l, 1.0, agg)


def meets(sir: Sir, theta: float) -> bool:
    return sir is INFINITE_SIR or sir >= theta


def meets_strong(sir: float, theta: float, split: PowerSplit) -> bool:
    """Strong-stage decoding; impossible whenever theta >= a1/a2."""
    return theta < split.ceiling and sir >= theta
