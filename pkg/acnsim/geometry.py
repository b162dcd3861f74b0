"""
Intersection scene: two perpendicular infinite roads crossing at the origin.

The X road is the x axis and the Y road is the y axis. Nodes may sit on either
road or off-road; nothing ties S, D1 or D2 to an axis.
"""
import math
from typing import Any

from pydantic import BaseModel, root_validator, validator

from acnsim.errors import SceneError
from acnsim.noma_link import GFactors, PowerSplit, Thresholds, make_gfactors, make_thresholds

# communicating nodes closer than this are a degenerate scene, never clamped
MIN_LINK_DISTANCE = 1e-6
TWO_PI = 2.0 * math.pi


class Position(BaseModel):
    x: float
    y: float

    class Config:
        frozen = True

    @validator("x", "y")
    def finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("coordinates must be finite")
        return value

    def __str__(self) -> str:
        return f"({self.x:g}, {self.y:g})"


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def path_loss(a: Position, b: Position, alpha: float) -> float:
    """l_ab = ||a - b||^-alpha. Coincident positions are rejected."""
    d = distance(a, b)
    if d < MIN_LINK_DISTANCE:
        raise SceneError(f"nodes {a} and {b} coincide; path loss is singular")
    return d ** (-alpha)


def polar_of(node: Position) -> tuple[float, float]:
    """
    Distance to the intersection and angle from the X road, theta in [0, 2pi).

    d*sin(theta) is the (signed) distance to the X road and d*cos(theta) the
    distance to the Y road. The origin maps to (0, 0).
    """
    d = math.hypot(node.x, node.y)
    if d == 0.0:
        return 0.0, 0.0
    theta = math.atan2(node.y, node.x) % TWO_PI
    return d, theta


def from_polar(d: float, theta: float) -> Position:
    return Position(x=d * math.cos(theta), y=d * math.sin(theta))


class Scene(BaseModel):
    source: Position
    dest1: Position
    dest2: Position
    alpha: float = 2.0
    lambda_x: float
    lambda_y: float
    aloha_p: float = 0.5
    a1: float = 0.8
    a2: float = 0.2
    r1: float
    r2: float
    # orthogonal slots per frame used by the cooperative OMA baseline
    oma_slots: int = 2

    class Config:
        frozen = True

    @validator("alpha")
    def alpha_integrable(cls, value: float) -> float:
        if not value > 1.0:
            raise ValueError("alpha must be > 1")
        return value

    @validator("lambda_x", "lambda_y")
    def nonnegative_intensity(cls, value: float) -> float:
        if not value >= 0.0 or not math.isfinite(value):
            raise ValueError("intensity must be a finite value >= 0")
        return value

    @validator("aloha_p")
    def probability(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("aloha_p must lie in [0, 1]")
        return value

    @validator("r1", "r2")
    def positive_rate(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError("rates must be > 0")
        return value

    @validator("oma_slots")
    def at_least_two_slots(cls, value: int) -> int:
        if value < 2:
            raise ValueError("oma_slots must be >= 2")
        return value

    @root_validator(skip_on_failure=True)
    def power_split_and_links(cls, values: dict[str, Any]) -> dict[str, Any]:
        a1, a2 = values["a1"], values["a2"]
        if not a2 > 0.0:
            raise ValueError("a2 must be > 0")
        if a1 < a2:
            raise ValueError("a1 must be >= a2")
        if abs(a1 + a2 - 1.0) > 1e-12:
            raise ValueError("a1 + a2 must equal 1")

        nodes = {"source": values["source"], "dest1": values["dest1"], "dest2": values["dest2"]}
        for first, second in (("source", "dest1"), ("source", "dest2"), ("dest1", "dest2")):
            if distance(nodes[first], nodes[second]) < MIN_LINK_DISTANCE:
                raise ValueError(f"{first} and {second} coincide")
        return values

    def evolve(self, **changes: Any) -> "Scene":
        """Copy with changes, re-running every validator."""
        fields = self.dict()
        fields.update(changes)
        return Scene(**fields)

    def with_lambda(self, lam: float) -> "Scene":
        return self.evolve(lambda_x=lam, lambda_y=lam)

    def with_a1(self, a1: float) -> "Scene":
        return self.evolve(a1=a1, a2=1.0 - a1)

    def moved_to(self, dist: float, direction: float) -> "Scene":
        """
        Rigidly translate the triplet so that S sits `dist` meters from the
        intersection along `direction` (radians from the X road).
        """
        target_x = dist * math.cos(direction)
        target_y = dist * math.sin(direction)
        dx = target_x - self.source.x
        dy = target_y - self.source.y

        def shift(node: Position) -> Position:
            return Position(x=node.x + dx, y=node.y + dy)

        return self.evolve(
            source=shift(self.source), dest1=shift(self.dest1), dest2=shift(self.dest2)
        )

    def gain(self, a: Position, b: Position) -> float:
        return path_loss(a, b, self.alpha)

    def split(self) -> PowerSplit:
        return PowerSplit(self.a1, self.a2)

    def thresholds(self) -> Thresholds:
        return make_thresholds(self.r1, self.r2)

    def gfactors(self) -> GFactors:
        return make_gfactors(self.split(), self.thresholds())

    def oma_threshold(self, rate: float) -> float:
        return 2.0 ** (self.oma_slots * rate) - 1.0
