"""
Per-realization decoding logic of ACN and the four baseline protocols.

Every decision is a pure function of one set of slot draws, so the same draws
can be replayed through several protocols for paired comparisons.
"""
from enum import Enum
from typing import Callable, NamedTuple, Optional

from acnsim.errors import UnknownProtocolError
from acnsim.geometry import Scene
from acnsim.interference import AggregateInterference
from acnsim.noma_link import (
    PowerSplit,
    Thresholds,
    meets,
    meets_strong,
    sir_noma_strong,
    sir_noma_weak,
    sir_oma,
)


class ProtocolKind(str, Enum):
    ACN = "ACN"
    CCN = "CCN"
    COOP_NOMA = "COOP_NOMA"
    DIRECT_NOMA = "DIRECT_NOMA"
    COOP_OMA = "COOP_OMA"

    @classmethod
    def parse(cls, name: str) -> "ProtocolKind":
        try:
            return cls(name.strip().upper())
        except ValueError as exc:
            raise UnknownProtocolError(f"unknown protocol {name!r}") from exc


class LinkBudget(NamedTuple):
    """Power fading |h|^2, path gain and the interference seen by the link's receiver."""

    h2: float
    gain: float
    agg: AggregateInterference


class SlotDraws(NamedTuple):
    # slot 1: superimposed broadcast from S
    s_d1: LinkBudget
    s_d2: LinkBudget
    # slot 2: relay hops between the destinations
    d2_d1: LinkBudget
    d1_d2: LinkBudget


class ProtocolOutcome(NamedTuple):
    d1_success: bool
    d2_success: bool
    phases_used: int
    d1_phases: int
    d2_phases: int


def _strong(link: LinkBudget, split: PowerSplit, theta: float) -> bool:
    return meets_strong(sir_noma_strong(link.h2, link.gain, split, link.agg), theta, split)


def _both_stages(link: LinkBudget, split: PowerSplit, theta1: float, theta2: float) -> bool:
    return _strong(link, split, theta1) and meets(
        sir_noma_weak(link.h2, link.gain, split, link.agg), theta2
    )


def _oma(link: LinkBudget, theta: float) -> bool:
    return meets(sir_oma(link.h2, link.gain, link.agg), theta)


def _acn_d1(draws: SlotDraws, split: PowerSplit, th: Thresholds) -> tuple[bool, int]:
    if _strong(draws.s_d1, split, th(1, 1)):
        return True, 1
    # D2 overheard D1's message in slot 1 and forwards it alone
    rescued = _strong(draws.s_d2, split, th(2, 1)) and _oma(draws.d2_d1, th(2, 1))
    return rescued, 2


def _acn_d2(draws: SlotDraws, split: PowerSplit, th: Thresholds) -> tuple[bool, int]:
    if _both_stages(draws.s_d2, split, th(1, 1), th(1, 2)):
        return True, 1
    rescued = _both_stages(draws.s_d1, split, th(2, 1), th(2, 2)) and _oma(
        draws.d1_d2, th(2, 2)
    )
    return rescued, 2


def evaluate_acn_d1(draws: SlotDraws, scene: Scene, th: Thresholds) -> bool:
    return _acn_d1(draws, scene.split(), th)[0]


def evaluate_acn_d2(draws: SlotDraws, scene: Scene, th: Thresholds) -> bool:
    return _acn_d2(draws, scene.split(), th)[0]


def _acn(draws: SlotDraws, scene: Scene, th: Thresholds) -> ProtocolOutcome:
    split = scene.split()
    d1, d1_phases = _acn_d1(draws, split, th)
    d2, d2_phases = _acn_d2(draws, split, th)
    return ProtocolOutcome(d1, d2, max(d1_phases, d2_phases), d1_phases, d2_phases)


def _direct_noma(draws: SlotDraws, scene: Scene, th: Thresholds) -> ProtocolOutcome:
    split = scene.split()
    d1 = _strong(draws.s_d1, split, th(1, 1))
    d2 = _both_stages(draws.s_d2, split, th(1, 1), th(1, 2))
    return ProtocolOutcome(d1, d2, 1, 1, 1)


def _ccn(draws: SlotDraws, scene: Scene, th: Thresholds) -> ProtocolOutcome:
    split = scene.split()
    d1 = _strong(draws.s_d1, split, th(2, 1)) or (
        _strong(draws.s_d2, split, th(2, 1)) and _oma(draws.d2_d1, th(2, 1))
    )
    d2 = _both_stages(draws.s_d2, split, th(2, 1), th(2, 2)) or (
        _both_stages(draws.s_d1, split, th(2, 1), th(2, 2)) and _oma(draws.d1_d2, th(2, 2))
    )
    return ProtocolOutcome(d1, d2, 2, 2, 2)


def _coop_noma(draws: SlotDraws, scene: Scene, th: Thresholds) -> ProtocolOutcome:
    split = scene.split()
    # the relay re-sends the superposition, so the receiving end runs SIC again
    d1 = _strong(draws.s_d1, split, th(2, 1)) or (
        _strong(draws.s_d2, split, th(2, 1)) and _strong(draws.d2_d1, split, th(2, 1))
    )
    d2 = _both_stages(draws.s_d2, split, th(2, 1), th(2, 2)) or (
        _both_stages(draws.s_d1, split, th(2, 1), th(2, 2))
        and _both_stages(draws.d1_d2, split, th(2, 1), th(2, 2))
    )
    return ProtocolOutcome(d1, d2, 2, 2, 2)


def _coop_oma(draws: SlotDraws, scene: Scene, th: Thresholds) -> ProtocolOutcome:
    t1 = scene.oma_threshold(scene.r1)
    t2 = scene.oma_threshold(scene.r2)
    d1 = _oma(draws.s_d1, t1) or (_oma(draws.s_d2, t1) and _oma(draws.d2_d1, t1))
    d2 = _oma(draws.s_d2, t2) or (_oma(draws.s_d1, t2) and _oma(draws.d1_d2, t2))
    return ProtocolOutcome(d1, d2, 2, 2, 2)


Evaluator = Callable[[SlotDraws, Scene, Thresholds], ProtocolOutcome]

BASELINES: dict[ProtocolKind, Evaluator] = {
    ProtocolKind.DIRECT_NOMA: _direct_noma,
    ProtocolKind.CCN: _ccn,
    ProtocolKind.COOP_NOMA: _coop_noma,
    ProtocolKind.COOP_OMA: _coop_oma,
}


def register_baseline(kind: ProtocolKind, evaluator: Evaluator) -> Optional[Evaluator]:
    """Swap in another formulation of a baseline; returns the one it replaced."""
    if kind is ProtocolKind.ACN:
        raise UnknownProtocolError("ACN is not a baseline")
    previous = BASELINES.get(kind)
    BASELINES[kind] = evaluator
    return previous


def evaluate_baseline(
    kind: ProtocolKind, draws: SlotDraws, scene: Scene, th: Thresholds
) -> ProtocolOutcome:
    try:
        evaluator = BASELINES[kind]
    except KeyError as exc:
        raise UnknownProtocolError(f"no baseline evaluator for {kind!r}") from exc
    return evaluator(draws, scene, th)


def evaluate(
    kind: ProtocolKind, draws: SlotDraws, scene: Scene, th: Thresholds
) -> ProtocolOutcome:
    if kind is ProtocolKind.ACN:
        return _acn(draws, scene, th)
    return evaluate_baseline(kind, draws, scene, th)
