"""
Parameter sweeps over a base scene, the result table and its CSV form.
"""
import csv
import io
import logging
import math
from datetime import datetime, timezone
from enum import Enum
from typing import NamedTuple

from pydantic import BaseModel, validator

from acnsim.analytic import acn_analysis, direct_noma_outage_d1
from acnsim.errors import AnalyticDomainError, ConfigError
from acnsim.geometry import Scene
from acnsim.monte_carlo import Destination, McConfig, McMode, OutageEstimate, run_trials
from acnsim.protocols import ProtocolKind

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "sweep_param",
    "sweep_value",
    "protocol",
    "destination",
    "estimator",
    "p_out",
    "stderr",
    "ci_low",
    "ci_high",
    "trials",
    "phases_mean",
)
# protocols with a closed form for at least one destination
ANALYTIC_PROTOCOLS = (ProtocolKind.ACN, ProtocolKind.DIRECT_NOMA)


class SweepParameter(str, Enum):
    LAMBDA = "lambda"
    DISTANCE = "distance_to_intersection"
    A1 = "a1"
    ALOHA_P = "aloha_p"
    RATE_R1 = "rate_r1"
    RATE_R2 = "rate_r2"


class Outputs(str, Enum):
    MC = "mc"
    ANALYTIC = "analytic"
    BOTH = "both"

    @property
    def wants_mc(self) -> bool:
        return self is not Outputs.ANALYTIC

    @property
    def wants_analytic(self) -> bool:
        return self is not Outputs.MC


class Estimator(str, Enum):
    ANALYTIC = "analytic"
    MC = "mc"


class SweepSpec(BaseModel):
    parameter: SweepParameter
    values: tuple[float, ...]
    protocols: tuple[ProtocolKind, ...] = tuple(sorted(ProtocolKind, key=lambda kind: kind.value))
    outputs: Outputs = Outputs.BOTH
    # approach direction of distance sweeps, degrees from the X road
    direction_deg: float = 90.0

    class Config:
        frozen = True

    @validator("values")
    def nonempty_finite(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("at least one sweep value is required")
        if not all(math.isfinite(v) for v in value):
            raise ValueError("sweep values must be finite")
        return value

    @validator("protocols")
    def nonempty_unique(cls, value: tuple[ProtocolKind, ...]) -> tuple[ProtocolKind, ...]:
        if not value:
            raise ValueError("at least one protocol is required")
        if len(set(value)) != len(value):
            raise ValueError("protocols must not repeat")
        return value

    @validator("direction_deg")
    def finite_direction(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("direction must be finite")
        return value

    def check_against(self, scene: Scene) -> None:
        """Reject analytic output the closed forms cannot provide."""
        if not self.outputs.wants_analytic:
            return
        if scene.alpha != 2.0:
            raise AnalyticDomainError(
                f"analytic output needs alpha = 2 (scene.alpha = {scene.alpha}); "
                "set sweep.outputs = mc"
            )
        if self.outputs is Outputs.ANALYTIC and not any(
            kind in ANALYTIC_PROTOCOLS for kind in self.protocols
        ):
            raise ConfigError(
                "sweep.outputs", "analytic output needs ACN or DIRECT_NOMA in sweep.protocols"
            )


def scene_at(scene: Scene, spec: SweepSpec, value: float) -> Scene:
    """The base scene with the swept parameter set to `value`."""
    if spec.parameter is SweepParameter.LAMBDA:
        return scene.with_lambda(value)
    if spec.parameter is SweepParameter.DISTANCE:
        return scene.moved_to(value, math.radians(spec.direction_deg))
    if spec.parameter is SweepParameter.A1:
        return scene.with_a1(value)
    if spec.parameter is SweepParameter.ALOHA_P:
        return scene.evolve(aloha_p=value)
    if spec.parameter is SweepParameter.RATE_R1:
        return scene.evolve(r1=value)
    return scene.evolve(r2=value)


def sweep_points(scene: Scene, spec: SweepSpec) -> list[tuple[float, Scene]]:
    points = []
    for value in spec.values:
        try:
            points.append((value, scene_at(scene, spec, value)))
        except ValueError as exc:
            raise ConfigError(
                "sweep.values", f"{spec.parameter.value} = {value!r} gives an invalid scene: {exc}"
            ) from exc
    return points


class RunManifest(BaseModel):
    """Everything needed to regenerate a result file."""

    scene: Scene
    spec: SweepSpec
    cfg: McConfig
    points: list[Scene]
    version: str
    seed: int
    timestamp: str

    @classmethod
    def build(cls, scene: Scene, spec: SweepSpec, cfg: McConfig) -> "RunManifest":
        from acnsim import __version__

        return cls(
            scene=scene,
            spec=spec,
            cfg=cfg,
            points=[point for _, point in sweep_points(scene, spec)],
            version=__version__,
            seed=cfg.seed,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )


class ResultRow(NamedTuple):
    sweep_param: SweepParameter
    sweep_value: float
    protocol: ProtocolKind
    destination: Destination
    estimator: Estimator
    p_out: float
    stderr: float
    ci_low: float
    ci_high: float
    trials: int
    phases_mean: float

    @classmethod
    def from_estimate(
        cls, param: SweepParameter, value: float, estimate: OutageEstimate
    ) -> "ResultRow":
        return cls(
            param,
            value,
            estimate.protocol,
            estimate.destination,
            Estimator.MC,
            estimate.p_out,
            estimate.stderr,
            estimate.ci95[0],
            estimate.ci95[1],
            estimate.trials,
            estimate.phases_mean,
        )

    @classmethod
    def closed_form(
        cls,
        param: SweepParameter,
        value: float,
        protocol: ProtocolKind,
        destination: Destination,
        p_out: float,
        phases_mean: float,
    ) -> "ResultRow":
        return cls(
            param, value, protocol, destination, Estimator.ANALYTIC, p_out, 0.0, p_out, p_out, 0, phases_mean
        )


def analytic_rows(
    param: SweepParameter, value: float, scene: Scene, protocols: tuple[ProtocolKind, ...]
) -> list[ResultRow]:
    rows = []
    if ProtocolKind.ACN in protocols:
        outage = acn_analysis(scene)
        rows.append(
            ResultRow.closed_form(
                param, value, ProtocolKind.ACN, Destination.D1, outage.p_out_d1, outage.phases_mean(1)
            )
        )
        rows.append(
            ResultRow.closed_form(
                param, value, ProtocolKind.ACN, Destination.D2, outage.p_out_d2, outage.phases_mean(2)
            )
        )
    if ProtocolKind.DIRECT_NOMA in protocols:
        rows.append(
            ResultRow.closed_form(
                param,
                value,
                ProtocolKind.DIRECT_NOMA,
                Destination.D1,
                direct_noma_outage_d1(scene),
                1.0,
            )
        )
    return rows


def _row_order(index_of: dict[float, int]):
    def key(row: ResultRow):
        return (
            index_of[row.sweep_value],
            row.protocol.value,
            row.destination.value,
            row.estimator.value,
        )

    return key


def run_sweep(scene: Scene, spec: SweepSpec, cfg: McConfig) -> list[ResultRow]:
    """
    One row per sweep value, protocol, destination and estimator. Every point
    reuses the same seed, so neighbouring points share their random numbers.
    """
    spec.check_against(scene)
    points = sweep_points(scene, spec)
    rows: list[ResultRow] = []
    for number, (value, point) in enumerate(points, start=1):
        logger.info(
            "sweep point %d/%d: %s = %g", number, len(points), spec.parameter.value, value
        )
        if spec.outputs.wants_analytic:
            rows.extend(analytic_rows(spec.parameter, value, point, spec.protocols))
        if spec.outputs.wants_mc:
            for estimate in run_trials(point, list(spec.protocols), cfg):
                rows.append(ResultRow.from_estimate(spec.parameter, value, estimate))

    first_index: dict[float, int] = {}
    for index, value in enumerate(spec.values):
        first_index.setdefault(value, index)
    return sorted(rows, key=_row_order(first_index))


def _fmt(value: float) -> str:
    return "%.6e" % value


def emit_csv(rows: list[ResultRow]) -> bytes:
    if not rows:
        raise ValueError("cannot emit an empty result table")
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                row.sweep_param.value,
                _fmt(row.sweep_value),
                row.protocol.value,
                row.destination.value,
                row.estimator.value,
                _fmt(row.p_out),
                _fmt(row.stderr),
                _fmt(row.ci_low),
                _fmt(row.ci_high),
                str(row.trials),
                _fmt(row.phases_mean),
            ]
        )
    return buffer.getvalue().encode("utf-8")


class Deviation(NamedTuple):
    sweep_value: float
    protocol: ProtocolKind
    destination: Destination
    # closed form on infinite roads, as in the result table
    analytic: float
    # closed form on roads cut to the simulated window; what the Monte-Carlo estimates
    target: float
    mc: float
    trials: int

    @property
    def stderr(self) -> float:
        """Binomial standard error under the windowed closed-form value."""
        return math.sqrt(self.target * (1.0 - self.target) / self.trials)

    @property
    def sigmas(self) -> float:
        gap = abs(self.mc - self.target)
        if self.stderr == 0.0:
            return 0.0 if gap == 0.0 else math.inf
        return gap / self.stderr


def windowed_outages(
    scene: Scene, protocols: tuple[ProtocolKind, ...], window: float
) -> dict[tuple[ProtocolKind, Destination], float]:
    """Closed-form outages over roads cut to [-window, window]."""
    try:
        outages = {}
        if ProtocolKind.ACN in protocols:
            outage = acn_analysis(scene, window=window)
            outages[ProtocolKind.ACN, Destination.D1] = outage.p_out_d1
            outages[ProtocolKind.ACN, Destination.D2] = outage.p_out_d2
        if ProtocolKind.DIRECT_NOMA in protocols:
            outages[ProtocolKind.DIRECT_NOMA, Destination.D1] = direct_noma_outage_d1(
                scene, window=window
            )
    except ValueError as exc:
        raise ConfigError("mc.window", str(exc)) from exc
    return outages


def crosscheck(scene: Scene, spec: SweepSpec, cfg: McConfig) -> list[Deviation]:
    """
    Closed forms against factorized Monte-Carlo at every sweep point. Each
    estimate is measured against the closed form over the simulated window, so
    the check is free of truncation bias at any `mc.window`.
    """
    kinds = [kind for kind in spec.protocols if kind in ANALYTIC_PROTOCOLS]
    if not kinds:
        raise ConfigError("sweep.protocols", "crosscheck needs ACN or DIRECT_NOMA")
    spec = spec.copy(update={"protocols": tuple(kinds), "outputs": Outputs.BOTH})
    spec.check_against(scene)
    cfg = cfg.copy(update={"mode": McMode.FACTORIZED})

    rows = run_sweep(scene, spec, cfg)
    closed = {
        (row.sweep_value, row.protocol, row.destination): row.p_out
        for row in rows
        if row.estimator is Estimator.ANALYTIC
    }
    targets = {}
    for value, point in sweep_points(scene, spec):
        for (kind, dest), p_out in windowed_outages(point, spec.protocols, cfg.window).items():
            targets[value, kind, dest] = p_out
    deviations = []
    for row in rows:
        key = (row.sweep_value, row.protocol, row.destination)
        if row.estimator is Estimator.MC and key in closed:
            deviations.append(
                Deviation(
                    row.sweep_value,
                    row.protocol,
                    row.destination,
                    closed[key],
                    targets[key],
                    row.p_out,
                    row.trials,
                )
            )
    worst = max(deviations, key=lambda d: d.sigmas)
    logger.info(
        "largest deviation %.2f stderr (%s %s at %g); window shifts the closed form by up to %.2e",
        worst.sigmas,
        worst.protocol.value,
        worst.destination.value,
        worst.sweep_value,
        max(d.analytic - d.target for d in deviations),
    )
    return deviations
