"""Streak retinoscopy optical model.

A beam position ``x`` on the pupil plane and the corresponding reflex
position ``y`` are related by

    y / x = u * f / ((f - d) * (u + d))

where ``u`` is the effective source distance of the retinoscope, ``d`` the
working distance and ``f`` the far point of the eye.  Since ``P = -1/f`` the
ratio can be written ``r = u / ((u + d) * (1 + d * P))``, which inverts to

    P = (u - (u + d) * r) / (r * d * (u + d)).

All functions here are pure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Singularity, ZeroPower, ZeroRatio

__all__ = [
    "OpticalSetup",
    "Prescription",
    "NetPower",
    "MovementRatio",
    "Movement",
    "RefractiveClass",
    "ScreeningClass",
    "CurveSample",
    "OperatingCurve",
    "far_point",
    "forward_ratio",
    "forward_ratio_composed",
    "estimate_power",
    "gross_to_net",
    "net_meridional_power",
    "movement_direction",
    "classify",
    "operating_curve",
    "SINGULARITY_EPS",
    "SINGULARITY_BAND",
]

SINGULARITY_EPS = 1e-9
ZERO_RATIO_EPS = 1e-12
# Sweep samples closer than this to P = -1/d are dropped from curves.
SINGULARITY_BAND = 0.05

# Pixel 4A primary camera.
PIXEL4A_FOCAL_M = 4.4e-3
PIXEL4A_SENSOR_M = (5.6e-3, 4.2e-3)


@dataclass(frozen=True)
class OpticalSetup:
    """Physical constants of one capture session (lengths in meters)."""

    u: float = 0.40
    d: float = 0.35
    focal_length_px: float = PIXEL4A_FOCAL_M / (PIXEL4A_SENSOR_M[0] / 3840)
    image_width_px: int = 3840
    image_height_px: int = 2160
    sensor_width_m: float = PIXEL4A_SENSOR_M[0]
    sensor_height_m: float = PIXEL4A_SENSOR_M[1]

    def __post_init__(self):
        for name in ("u", "d", "focal_length_px", "sensor_width_m", "sensor_height_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.image_width_px < 1 or self.image_height_px < 1:
            raise ValueError("image dimensions must be >= 1")

    @classmethod
    def from_camera(
        cls,
        focal_length_m: float = PIXEL4A_FOCAL_M,
        sensor_width_m: float = PIXEL4A_SENSOR_M[0],
        sensor_height_m: float = PIXEL4A_SENSOR_M[1],
        image_width_px: int = 3840,
        image_height_px: int = 2160,
        u: float = 0.40,
        d: float = 0.35,
    ) -> "OpticalSetup":
        """Build a setup from physical camera constants."""
        pixel_pitch = sensor_width_m / image_width_px
        return cls(
            u=u,
            d=d,
            focal_length_px=focal_length_m / pixel_pitch,
            image_width_px=image_width_px,
            image_height_px=image_height_px,
            sensor_width_m=sensor_width_m,
            sensor_height_m=sensor_height_m,
        )

    @property
    def focal_length_m(self) -> float:
        return self.focal_length_px * self.sensor_width_m / self.image_width_px

    def with_distance(self, d: float) -> "OpticalSetup":
        return OpticalSetup(
            u=self.u,
            d=d,
            focal_length_px=self.focal_length_px,
            image_width_px=self.image_width_px,
            image_height_px=self.image_height_px,
            sensor_width_m=self.sensor_width_m,
            sensor_height_m=self.sensor_height_m,
        )

    def scaled(self, width_px: int, height_px: int) -> "OpticalSetup":
        """Same physical camera sampled at a different resolution."""
        return OpticalSetup(
            u=self.u,
            d=self.d,
            focal_length_px=self.focal_length_px * width_px / self.image_width_px,
            image_width_px=width_px,
            image_height_px=height_px,
            sensor_width_m=self.sensor_width_m,
            sensor_height_m=self.sensor_height_m,
        )

    def to_dict(self) -> dict:
        return {
            "u_m": self.u,
            "d_m": self.d,
            "focal_length_px": self.focal_length_px,
            "image_width_px": self.image_width_px,
            "image_height_px": self.image_height_px,
            "sensor_width_m": self.sensor_width_m,
            "sensor_height_m": self.sensor_height_m,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OpticalSetup":
        """Accept either ``focal_length_px`` or ``focal_length_m`` plus sensor size."""
        width = int(data.get("image_width_px", 3840))
        height = int(data.get("image_height_px", 2160))
        sensor_w = float(data.get("sensor_width_m", PIXEL4A_SENSOR_M[0]))
        sensor_h = float(data.get("sensor_height_m", PIXEL4A_SENSOR_M[1]))
        u = float(data.get("u_m", 0.40))
        d = float(data.get("d_m", 0.35))
        if "focal_length_px" in data:
            return cls(u, d, float(data["focal_length_px"]), width, height, sensor_w, sensor_h)
        return cls.from_camera(
            float(data.get("focal_length_m", PIXEL4A_FOCAL_M)), sensor_w, sensor_h, width, height, u, d
        )


@dataclass(frozen=True)
class Prescription:
    sphere: float
    cylinder: float = 0.0
    axis: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.sphere, self.cylinder, self.axis)):
            raise ValueError("prescription fields must be finite")
        if not 0.0 <= self.axis < 180.0:
            raise ValueError(f"axis must lie in [0, 180), got {self.axis}")


@dataclass(frozen=True)
class NetPower:
    """Net refractive power (diopters) along a meridian (degrees)."""

    value: float
    meridian: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("net power must be finite")
        if not 0.0 <= self.meridian < 180.0:
            raise ValueError(f"meridian must lie in [0, 180), got {self.meridian}")

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class MovementRatio:
    """Reflex displacement divided by beam displacement."""

    r: float

    def __post_init__(self):
        if not math.isfinite(self.r):
            raise ValueError("movement ratio must be finite")

    def __float__(self):
        return float(self.r)


class Movement(str, enum.Enum):
    WITH = "with"
    AGAINST = "against"
    NEUTRAL = "neutral"


class RefractiveClass(str, enum.Enum):
    HIGH_HYPEROPIA = "high_hyperopia"
    MODERATE_HYPEROPIA = "moderate_hyperopia"
    NORMAL = "normal"
    MODERATE_MYOPIA = "moderate_myopia"
    HIGH_MYOPIA = "high_myopia"


@dataclass(frozen=True)
class ScreeningClass:
    label: RefractiveClass
    refer: bool


def _value(p) -> float:
    return float(p.value) if isinstance(p, NetPower) else float(p)


def _ratio(r) -> float:
    return float(r.r) if isinstance(r, MovementRatio) else float(r)


def far_point(p) -> float:
    """Signed far point distance ``-1/P`` in meters; negative is behind the eye."""
    value = _value(p)
    if value == 0.0:
        raise ZeroPower("emmetropic eye: far point at infinity")
    return -1.0 / value


def _check_singularity(value: float, s: OpticalSetup):
    if abs(1.0 + s.d * value) < SINGULARITY_EPS:
        raise Singularity(f"P = {value} D neutralizes at d = {s.d} m (P = -1/d)")


def forward_ratio_composed(p, s: OpticalSetup) -> MovementRatio:
    """Ratio via far point and the similar-triangle product ``u f / ((f - d)(u + d))``.

    Kept separate from :func:`forward_ratio` as an independent route for checks.
    """
    value = _value(p)
    _check_singularity(value, s)
    if value == 0.0:
        return MovementRatio(s.u / (s.u + s.d))
    f = far_point(value)
    return MovementRatio(s.u * f / ((f - s.d) * (s.u + s.d)))


def forward_ratio(p, s: OpticalSetup) -> MovementRatio:
    """Expected reflex/beam displacement ratio for an eye of net power ``p``."""
    value = _value(p)
    _check_singularity(value, s)
    return MovementRatio(s.u / ((s.u + s.d) * (1.0 + s.d * value)))


def estimate_power(r, s: OpticalSetup, meridian: float = 0.0) -> NetPower:
    """Invert the movement ratio to net refractive power."""
    ratio = _ratio(r)
    if abs(ratio) < ZERO_RATIO_EPS:
        raise ZeroRatio("movement ratio is zero")
    u, d = s.u, s.d
    return NetPower((u - (u + d) * ratio) / (ratio * d * (u + d)), meridian)


def gross_to_net(p_gross: float, d: float) -> float:
    """Subtract the working-distance lens ``1/d`` from the neutralizing power."""
    if d <= 0:
        raise ValueError("working distance must be positive")
    return p_gross - 1.0 / d


def net_meridional_power(rx: Prescription, meridian: float = 0.0) -> NetPower:
    if not 0.0 <= meridian < 180.0:
        raise ValueError(f"meridian must lie in [0, 180), got {meridian}")
    s = math.sin(math.radians(rx.axis - meridian))
    return NetPower(rx.sphere + rx.cylinder * s * s, meridian)


def movement_direction(r, neutral_threshold: float = 50.0) -> Movement:
    ratio = _ratio(r)
    if not math.isfinite(ratio):
        raise ValueError("movement ratio must be finite")
    if ratio == 0.0:
        raise ZeroRatio("movement ratio is zero")
    if abs(ratio) > neutral_threshold:
        return Movement.NEUTRAL
    return Movement.WITH if ratio > 0 else Movement.AGAINST


def classify(p) -> ScreeningClass:
    """Five-way screening label; range endpoints go to the less severe class."""
    value = _value(p)
    if not math.isfinite(value):
        raise ValueError("power must be finite")
    if value > 4.0:
        label = RefractiveClass.HIGH_HYPEROPIA
    elif value > 1.0:
        label = RefractiveClass.MODERATE_HYPEROPIA
    elif value >= -1.0:
        label = RefractiveClass.NORMAL
    elif value >= -4.0:
        label = RefractiveClass.MODERATE_MYOPIA
    else:
        label = RefractiveClass.HIGH_MYOPIA
    return ScreeningClass(label, value > 1.0 or value < -1.0)


@dataclass(frozen=True)
class CurveSample:
    power: float
    ratio: float | None
    excluded: bool = False


@dataclass(frozen=True)
class OperatingCurve:
    setup: OpticalSetup
    singularity: float
    samples: list = field(default_factory=list)

    @property
    def excluded(self) -> list:
        return [s.power for s in self.samples if s.excluded]


def operating_curve(
    s: OpticalSetup, p_min: float, p_max: float, n: int, band: float = SINGULARITY_BAND
) -> OperatingCurve:
    """Sample ``forward_ratio`` on a uniform power grid.

    Samples within ``band`` diopters of the neutralization power ``-1/d``
    (boundary included, up to grid rounding) carry ``ratio=None`` and
    ``excluded=True``.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    if p_max <= p_min:
        raise ValueError("p_max must exceed p_min")
    singular = -1.0 / s.d
    samples = []
    for p in np.linspace(p_min, p_max, n):
        p = float(p)
        if abs(p - singular) <= band + 1e-9:
            samples.append(CurveSample(p, None, True))
        else:
            samples.append(CurveSample(p, forward_ratio(p, s).r))
    return OperatingCurve(s, singular, samples)
