"""
The experiment config document and process settings.

The document is a flat `key = value` file with dotted prefixes (scene.*,
sweep.*, mc.*), parsed with python-dotenv so comments, quoting and `export`
behave as in a .env file. run.* keys are provenance and ignored on input.
"""
import logging
import math
from io import StringIO
from typing import Callable, Optional, TypeVar

import numpy as np
from dotenv.parser import parse_stream
from pydantic import BaseSettings, ValidationError

from acnsim.errors import ConfigError, UnknownProtocolError
from acnsim.experiments import Outputs, RunManifest, SweepParameter, SweepSpec
from acnsim.geometry import Position, Scene, from_polar
from acnsim.monte_carlo import McConfig, McMode
from acnsim.protocols import ProtocolKind

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_POSITIONS = {
    "source": Position(x=0.0, y=200.0),
    "dest1": Position(x=0.0, y=100.0),
    "dest2": Position(x=0.0, y=300.0),
}
SCENE_FLOATS = ("alpha", "lambda_x", "lambda_y", "aloha_p", "a1", "a2", "r1", "r2")
REQUIRED = ("scene.lambda_x", "scene.lambda_y", "scene.r1", "scene.r2", "sweep.parameter")
KNOWN_KEYS = frozenset(
    [f"scene.{node}" for node in DEFAULT_POSITIONS]
    + [f"scene.{node}.polar" for node in DEFAULT_POSITIONS]
    + [f"scene.{name}" for name in SCENE_FLOATS]
    + ["scene.oma_slots"]
    + [f"sweep.{name}" for name in ("parameter", "values", "range", "protocols", "outputs", "direction_deg")]
    + [f"mc.{name}" for name in ("trials", "seed", "mode", "window", "batch", "paired", "workers")]
)
TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


class Settings(BaseSettings):
    log_level: str = "INFO"
    # 0 = one worker per core
    workers: int = 1
    crosscheck_threshold: float = 3.0

    class Config:
        env_prefix = "ACN_"
        env_file = ".env"


def _convert(key: str, raw: str, convert: Callable[[str], T]) -> T:
    try:
        return convert(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from exc


def _floats(raw: str) -> list[float]:
    return [float(part) for part in raw.split(",") if part.strip()]


def _pair(raw: str) -> tuple[float, float]:
    parts = _floats(raw)
    if len(parts) != 2:
        raise ValueError("expected two comma-separated numbers")
    return parts[0], parts[1]


def _bool(raw: str) -> bool:
    word = raw.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError("expected true or false")


def _read_document(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for binding in parse_stream(StringIO(text)):
        if binding.error:
            line = binding.original.line
            raise ConfigError(f"line {line}", f"malformed entry {binding.original.string.strip()!r}")
        if binding.key is None:
            continue
        key = binding.key.strip()
        if key.startswith("run."):
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown key")
        if binding.value is None:
            raise ConfigError(key, "missing value")
        if key in entries:
            raise ConfigError(key, "given more than once")
        entries[key] = binding.value.strip()
    for key in REQUIRED:
        if key not in entries:
            raise ConfigError(key, "required key is missing")
    return entries


def _position(entries: dict[str, str], node: str) -> Position:
    cartesian = f"scene.{node}"
    polar = f"scene.{node}.polar"
    if cartesian in entries and polar in entries:
        raise ConfigError(polar, f"give either {cartesian} or {polar}, not both")
    try:
        if cartesian in entries:
            x, y = _convert(cartesian, entries[cartesian], _pair)
            return Position(x=x, y=y)
        if polar in entries:
            d, theta_deg = _convert(polar, entries[polar], _pair)
            if d < 0.0:
                raise ConfigError(polar, "distance must be >= 0")
            return from_polar(d, math.radians(theta_deg))
    except ValidationError as exc:
        raise ConfigError(cartesian, "coordinates must be finite") from exc
    return DEFAULT_POSITIONS[node]


def _validation_key(section: str, exc: ValidationError, fields: tuple[str, ...]) -> tuple[str, str]:
    """Name the config key behind the first pydantic error."""
    error = exc.errors()[0]
    field = str(error["loc"][0])
    message = error["msg"]
    if field == "__root__":
        # root validators phrase their messages as "<field> must ..."
        first_word = message.split()[0]
        field = first_word if first_word in fields else fields[0]
    return f"{section}.{field}", message


def _scene(entries: dict[str, str]) -> Scene:
    fields = {
        name: _convert(f"scene.{name}", entries[f"scene.{name}"], float)
        for name in SCENE_FLOATS
        if f"scene.{name}" in entries
    }
    if "a1" in fields and "a2" not in fields:
        fields["a2"] = 1.0 - fields["a1"]
    if "scene.oma_slots" in entries:
        fields["oma_slots"] = _convert("scene.oma_slots", entries["scene.oma_slots"], int)
    for node in DEFAULT_POSITIONS:
        fields[node] = _position(entries, node)
    try:
        return Scene(**fields)
    except ValidationError as exc:
        key, message = _validation_key("scene", exc, tuple(Scene.__fields__))
        raise ConfigError(key, message) from exc


def _sweep_values(entries: dict[str, str]) -> tuple[float, ...]:
    if ("sweep.values" in entries) == ("sweep.range" in entries):
        raise ConfigError("sweep.values", "give exactly one of sweep.values or sweep.range")
    if "sweep.values" in entries:
        return tuple(_convert("sweep.values", entries["sweep.values"], _floats))
    parts = _convert("sweep.range", entries["sweep.range"], _floats)
    if len(parts) != 3 or not parts[2].is_integer() or parts[2] < 1:
        raise ConfigError("sweep.range", "expected 'start, stop, steps' with steps a positive integer")
    start, stop, steps = parts
    return tuple(float(v) for v in np.linspace(start, stop, int(steps)))


def _protocols(raw: str) -> tuple[ProtocolKind, ...]:
    try:
        return tuple(ProtocolKind.parse(name) for name in raw.split(",") if name.strip())
    except UnknownProtocolError as exc:
        raise ConfigError("sweep.protocols", str(exc.args[0])) from exc


def _sweep(entries: dict[str, str]) -> SweepSpec:
    fields: dict[str, object] = {
        "parameter": _convert("sweep.parameter", entries["sweep.parameter"], SweepParameter),
        "values": _sweep_values(entries),
    }
    if "sweep.protocols" in entries:
        fields["protocols"] = _protocols(entries["sweep.protocols"])
    if "sweep.outputs" in entries:
        fields["outputs"] = _convert("sweep.outputs", entries["sweep.outputs"].lower(), Outputs)
    if "sweep.direction_deg" in entries:
        fields["direction_deg"] = _convert("sweep.direction_deg", entries["sweep.direction_deg"], float)
    try:
        return SweepSpec(**fields)
    except ValidationError as exc:
        key, message = _validation_key("sweep", exc, tuple(SweepSpec.__fields__))
        raise ConfigError(key, message) from exc


def _mc(entries: dict[str, str], settings: Settings) -> McConfig:
    fields: dict[str, object] = {"workers": settings.workers}
    converters: dict[str, Callable[[str], object]] = {
        "trials": int,
        "seed": int,
        "mode": lambda raw: McMode(raw.lower()),
        "window": float,
        "batch": int,
        "paired": _bool,
        "workers": int,
    }
    for name, convert in converters.items():
        key = f"mc.{name}"
        if key in entries:
            fields[name] = _convert(key, entries[key], convert)
    return build_mc_config(fields)


def build_mc_config(fields: dict) -> McConfig:
    try:
        return McConfig(**fields)
    except ValidationError as exc:
        key, message = _validation_key("mc", exc, tuple(McConfig.__fields__))
        raise ConfigError(key, message) from exc


def parse_config(
    text: str, settings: Optional[Settings] = None
) -> tuple[Scene, SweepSpec, McConfig]:
    """
    Parse and fully validate a config document. Every failure is a ConfigError
    naming the offending key.
    """
    entries = _read_document(text)
    scene = _scene(entries)
    spec = _sweep(entries)
    cfg = _mc(entries, settings or Settings())
    logger.debug("parsed config: %s sweep over %d value(s)", spec.parameter.value, len(spec.values))
    return scene, spec, cfg


def _number(value: float) -> str:
    # repr is the shortest text that parses back to the same float
    return repr(float(value))


def serialize_config(
    scene: Scene, spec: SweepSpec, cfg: McConfig, manifest: Optional[RunManifest] = None
) -> str:
    """A config document that parses back to the same (scene, spec, cfg)."""
    lines = []
    for node in DEFAULT_POSITIONS:
        position: Position = getattr(scene, node)
        lines.append(f"scene.{node} = {_number(position.x)}, {_number(position.y)}")
    for name in SCENE_FLOATS:
        lines.append(f"scene.{name} = {_number(getattr(scene, name))}")
    lines.append(f"scene.oma_slots = {scene.oma_slots}")
    lines += [
        "",
        f"sweep.parameter = {spec.parameter.value}",
        f"sweep.values = {', '.join(_number(v) for v in spec.values)}",
        f"sweep.protocols = {', '.join(kind.value for kind in spec.protocols)}",
        f"sweep.outputs = {spec.outputs.value}",
        f"sweep.direction_deg = {_number(spec.direction_deg)}",
        "",
        f"mc.trials = {cfg.trials}",
        f"mc.seed = {cfg.seed}",
        f"mc.mode = {cfg.mode.value}",
        f"mc.window = {_number(cfg.window)}",
        f"mc.batch = {cfg.batch}",
        f"mc.paired = {'true' if cfg.paired else 'false'}",
        f"mc.workers = {cfg.workers}",
    ]
    if manifest is not None:
        lines += [
            "",
            f"run.version = {manifest.version}",
            f"run.seed = {manifest.seed}",
            f"run.timestamp = {manifest.timestamp}",
        ]
        for index, (value, point) in enumerate(zip(spec.values, manifest.points)):
            lines.append(
                f'run.point.{index} = "{spec.parameter.value}={_number(value)} '
                f"source={point.source} dest1={point.dest1} dest2={point.dest2} "
                f'lambda={_number(point.lambda_x)}/{_number(point.lambda_y)} a1={_number(point.a1)}"'
            )
    return "\n".join(lines) + "\n"
