"""
Seeded Monte-Carlo engine.

Trial i draws from its own Philox stream (key = seed and stream tag, counter
block = i), so counts do not depend on chunk size or on the number of workers.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, validator
from scipy import stats

from acnsim.geometry import Scene
from acnsim.interference import (
    DEFAULT_WINDOW,
    Road,
    aggregate_at,
    sample_field,
    truncation_error,
)
from acnsim.noma_link import Thresholds, is_feasible
from acnsim.protocols import LinkBudget, ProtocolKind, ProtocolOutcome, SlotDraws, evaluate
from acnsim.util import AtomicCounter

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 50_000
DEFAULT_BATCH = 10_000
Z95 = 1.959963984540054
# below this many outages (or successes) the normal interval is replaced by Clopper-Pearson
EXACT_CI_BELOW = 10
STREAM_ORDER = list(ProtocolKind)


class McMode(str, Enum):
    FACTORIZED = "factorized"
    CORRELATED = "correlated"


class Destination(str, Enum):
    D1 = "D1"
    D2 = "D2"


class McConfig(BaseModel):
    trials: int = DEFAULT_TRIALS
    seed: int = 1
    mode: McMode = McMode.FACTORIZED
    window: float = DEFAULT_WINDOW
    batch: int = DEFAULT_BATCH
    # draws shared by every protocol of a trial (paired) or private to each protocol
    paired: bool = False
    # 0 = one worker per core
    workers: int = 1

    class Config:
        frozen = True

    @validator("trials", "batch")
    def at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("seed")
    def unsigned_64(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return value

    @validator("window")
    def positive_window(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError("window must be > 0")
        return value

    @validator("workers")
    def nonnegative_workers(cls, value: int) -> int:
        if value < 0:
            raise ValueError("workers must be >= 0")
        return value

    def resolved_workers(self) -> int:
        return self.workers or os.cpu_count() or 1


class OutageEstimate(BaseModel):
    p_out: float
    stderr: float
    ci95: tuple[float, float]
    trials: int
    outages: int
    phases_mean: float
    protocol: ProtocolKind
    destination: Destination

    class Config:
        frozen = True


class ModeComparison(NamedTuple):
    factorized: OutageEstimate
    correlated: OutageEstimate
    gap: float

    @property
    def joint_stderr(self) -> float:
        return math.hypot(self.factorized.stderr, self.correlated.stderr)


def estimate_from_counts(
    outages: int,
    phases_sum: int,
    trials: int,
    protocol: ProtocolKind,
    destination: Destination,
) -> OutageEstimate:
    p_hat = outages / trials
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    if outages < EXACT_CI_BELOW or trials - outages < EXACT_CI_BELOW:
        low = 0.0 if outages == 0 else float(stats.beta.ppf(0.025, outages, trials - outages + 1))
        high = 1.0 if outages == trials else float(stats.beta.ppf(0.975, outages + 1, trials - outages))
    else:
        low = p_hat - Z95 * stderr
        high = p_hat + Z95 * stderr
    return OutageEstimate(
        p_out=p_hat,
        stderr=stderr,
        ci95=(max(0.0, min(low, p_hat)), min(1.0, max(high, p_hat))),
        trials=trials,
        outages=outages,
        phases_mean=phases_sum / trials,
        protocol=protocol,
        destination=destination,
    )


class SceneLinks:
    """Per-run constants: node positions and the four link gains."""

    def __init__(self, scene: Scene) -> None:
        self.scene = scene
        self.d1 = scene.dest1
        self.d2 = scene.dest2
        self.g_sd1 = scene.gain(scene.source, scene.dest1)
        self.g_sd2 = scene.gain(scene.source, scene.dest2)
        self.g_d2d1 = scene.gain(scene.dest2, scene.dest1)
        self.g_d1d2 = scene.gain(scene.dest1, scene.dest2)


def trial_rng(seed: int, tag: int, index: int) -> np.random.Generator:
    """Counter-based stream for one trial; `tag` separates modes and unpaired protocols."""
    return np.random.Generator(np.random.Philox(key=seed + (tag << 64), counter=index << 128))


def _stream_tag(mode: McMode, kind: Optional[ProtocolKind]) -> int:
    mode_part = 0 if mode is McMode.FACTORIZED else 1
    kind_part = 0 if kind is None else 1 + STREAM_ORDER.index(kind)
    return mode_part * 16 + kind_part


def draw_slots(
    links: SceneLinks,
    mode: McMode,
    window: float,
    rng: np.random.Generator,
    redraws: Optional[AtomicCounter] = None,
) -> tuple[SlotDraws, SlotDraws]:
    """
    Slot draws used for D1's events and for D2's events. In factorized mode the
    two sets, and every receiver/slot inside them, see independent fields. In
    correlated mode one field per trial is seen by both receivers in both
    slots, with fresh fading for every receiver and slot.
    """
    scene = links.scene

    def field():
        return sample_field(scene.lambda_x, scene.lambda_y, scene.aloha_p, window, rng)

    def at(fld, receiver):
        return aggregate_at(fld, receiver, scene.alpha, rng, redraws=redraws)

    def budgets(slot1_d1, slot1_d2, slot2_d1, slot2_d2) -> SlotDraws:
        h = rng.exponential(1.0, 4)
        return SlotDraws(
            s_d1=LinkBudget(float(h[0]), links.g_sd1, slot1_d1),
            s_d2=LinkBudget(float(h[1]), links.g_sd2, slot1_d2),
            d2_d1=LinkBudget(float(h[2]), links.g_d2d1, slot2_d1),
            d1_d2=LinkBudget(float(h[3]), links.g_d1d2, slot2_d2),
        )

    if mode is McMode.CORRELATED:
        fld = field()
        shared = budgets(at(fld, links.d1), at(fld, links.d2), at(fld, links.d1), at(fld, links.d2))
        return shared, shared

    def independent() -> SlotDraws:
        return budgets(
            at(field(), links.d1), at(field(), links.d2), at(field(), links.d1), at(field(), links.d2)
        )

    for_d1 = independent()
    return for_d1, independent()


def _merge(first: ProtocolOutcome, second: ProtocolOutcome) -> ProtocolOutcome:
    return ProtocolOutcome(
        first.d1_success,
        second.d2_success,
        max(first.d1_phases, second.d2_phases),
        first.d1_phases,
        second.d2_phases,
    )


def simulate_trial(
    links: SceneLinks,
    th: Thresholds,
    kinds: list[ProtocolKind],
    cfg: McConfig,
    index: int,
    redraws: Optional[AtomicCounter] = None,
) -> dict[ProtocolKind, ProtocolOutcome]:
    outcomes: dict[ProtocolKind, ProtocolOutcome] = {}
    if cfg.paired:
        rng = trial_rng(cfg.seed, _stream_tag(cfg.mode, None), index)
        for_d1, for_d2 = draw_slots(links, cfg.mode, cfg.window, rng, redraws)
    for kind in kinds:
        if not cfg.paired:
            rng = trial_rng(cfg.seed, _stream_tag(cfg.mode, kind), index)
            for_d1, for_d2 = draw_slots(links, cfg.mode, cfg.window, rng, redraws)
        outcome = evaluate(kind, for_d1, links.scene, th)
        if for_d2 is not for_d1:
            outcome = _merge(outcome, evaluate(kind, for_d2, links.scene, th))
        outcomes[kind] = outcome
    return outcomes


class _ChunkJob(NamedTuple):
    scene: Scene
    kinds: tuple[ProtocolKind, ...]
    cfg: McConfig
    start: int
    stop: int


def _run_chunk(job: _ChunkJob) -> tuple[np.ndarray, np.ndarray, int]:
    """Outage and phase counts, shape (len(kinds), 2), for trials [start, stop)."""
    links = SceneLinks(job.scene)
    th = job.scene.thresholds()
    kinds = list(job.kinds)
    outages = np.zeros((len(kinds), 2), dtype=np.int64)
    phases = np.zeros((len(kinds), 2), dtype=np.int64)
    redraws = AtomicCounter()
    for index in range(job.start, job.stop):
        outcomes = simulate_trial(links, th, kinds, job.cfg, index, redraws)
        for row, kind in enumerate(kinds):
            outcome = outcomes[kind]
            outages[row, 0] += not outcome.d1_success
            outages[row, 1] += not outcome.d2_success
            phases[row, 0] += outcome.d1_phases
            phases[row, 1] += outcome.d2_phases
    logger.debug("chunk [%d, %d) done", job.start, job.stop)
    return outages, phases, int(redraws)


def _chunks(scene: Scene, kinds: list[ProtocolKind], cfg: McConfig) -> list[_ChunkJob]:
    return [
        _ChunkJob(scene, tuple(kinds), cfg, start, min(start + cfg.batch, cfg.trials))
        for start in range(0, cfg.trials, cfg.batch)
    ]


def run_trials(scene: Scene, kinds: list[ProtocolKind], cfg: McConfig) -> list[OutageEstimate]:
    """
    Outage estimates for every protocol in `kinds` and both destinations, in
    that order (kind-major).
    """
    if cfg.trials < 1:
        raise ValueError("at least one trial is required")
    if not kinds:
        raise ValueError("no protocol to simulate")
    jobs = _chunks(scene, kinds, cfg)
    workers = min(cfg.resolved_workers(), len(jobs))
    logger.info(
        "simulating %d trial(s) of %s in %s mode: %d chunk(s), %d worker(s)",
        cfg.trials,
        ",".join(kind.value for kind in kinds),
        cfg.mode.value,
        len(jobs),
        workers,
    )

    if workers <= 1:
        results = list(map(_run_chunk, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_chunk, jobs))

    outages = sum(r[0] for r in results)
    phases = sum(r[1] for r in results)
    redrawn = sum(r[2] for r in results)
    if redrawn:
        logger.info("re-drew %d interferer position(s) coincident with a receiver", redrawn)

    estimates = [
        estimate_from_counts(
            int(outages[row, col]), int(phases[row, col]), cfg.trials, kind, destination
        )
        for row, kind in enumerate(kinds)
        for col, destination in enumerate(Destination)
    ]
    _warn_on_truncation(scene, cfg, estimates)
    return estimates


def _laplace_arguments(scene: Scene) -> list[tuple[str, float]]:
    """(receiver, s) pairs of the ACN success events."""
    g = scene.gfactors()
    th = scene.thresholds()
    pairs = [
        ("dest1", g.g1[1], scene.gain(scene.source, scene.dest1)),
        ("dest2", g.g1[2], scene.gain(scene.source, scene.dest2)),
        ("dest1", th(2, 1), scene.gain(scene.dest2, scene.dest1)),
        ("dest2", g.gmax[1], scene.gain(scene.source, scene.dest2)),
        ("dest1", g.gmax[2], scene.gain(scene.source, scene.dest1)),
        ("dest2", th(2, 2), scene.gain(scene.dest1, scene.dest2)),
    ]
    return [(node, factor / gain) for node, factor, gain in pairs if is_feasible(factor)]


def window_bias(scene: Scene, window: float) -> float:
    """Largest overstatement of a per-receiver Laplace term caused by the window."""
    worst = 0.0
    for node, s in _laplace_arguments(scene):
        receiver = getattr(scene, node)
        for road, lam in ((Road.X, scene.lambda_x), (Road.Y, scene.lambda_y)):
            worst = max(
                worst, truncation_error(s, receiver, road, scene.alpha, lam, scene.aloha_p, window)
            )
    return worst


def _warn_on_truncation(scene: Scene, cfg: McConfig, estimates: list[OutageEstimate]) -> None:
    noise = [e.stderr for e in estimates if e.stderr > 0.0]
    if not noise:
        return
    try:
        bias = window_bias(scene, cfg.window)
    except ValueError as exc:
        logger.warning("window sufficiency not checked: %s", exc)
        return
    if bias > 0.5 * min(noise):
        logger.warning(
            "window of %g m biases Laplace terms by up to %.2e (smallest stderr %.2e); "
            "consider a larger mc.window",
            cfg.window,
            bias,
            min(noise),
        )


def compare_modes(scene: Scene, kind: ProtocolKind, cfg: McConfig) -> list[ModeComparison]:
    """Factorized vs correlated estimates for D1 and D2; the modes use disjoint streams."""
    factorized = run_trials(scene, [kind], cfg.copy(update={"mode": McMode.FACTORIZED}))
    correlated = run_trials(scene, [kind], cfg.copy(update={"mode": McMode.CORRELATED}))
    return [
        ModeComparison(f, c, abs(f.p_out - c.p_out)) for f, c in zip(factorized, correlated)
    ]
