from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigInvalid
from ..optics import OpticalSetup
from ..pipeline.framespec import PaperFrameSpec

SCHEMA_VERSION = 1
SETUP_KEYS = {
    "u_m",
    "d_m",
    "focal_length_px",
    "focal_length_m",
    "image_width_px",
    "image_height_px",
    "sensor_width_m",
    "sensor_height_m",
}


@dataclass(frozen=True)
class Levels:
    """Scene radiance levels as fractions of full scale."""

    background: float = 0.05
    paper: float = 0.40
    ink: float = 0.10  # fiducial reflectance relative to paper
    beam: float = 0.90
    skin: float = 0.35
    pupil: float = 0.05
    reflex: float = 0.60
    purkinje: float = 0.95


@dataclass(frozen=True)
class SceneConfig:
    true_power: float = 0.0
    setup: OpticalSetup = field(default_factory=OpticalSetup)
    frame_spec: PaperFrameSpec = field(default_factory=PaperFrameSpec)
    camera_yaw_deg: float = 12.0
    fps: float = 30.0
    resolution: tuple = (3840, 2160)
    passes: int = 4
    sweep_amplitude_m: float = 0.012
    sweep_speed_mps: float = 0.0096
    sweep_center_m: float | None = None
    pupil_radius_m: float = 0.003
    pupil_center_m: tuple = (0.0008, -0.0005)
    beam_width_m: float = 0.004
    edge_blur_px: float = 1.0
    noise_sigma: float = 0.0
    jitter_px: float = 0.0
    purkinje: bool = False
    purkinje_size_m: float = 0.0012
    purkinje_offset: tuple = (0.35, -0.35)
    levels: Levels = field(default_factory=Levels)
    glare_fiducial: int | None = None
    glare_frames: tuple = ()
    distractor_frames: tuple = ()
    supersample: int = 3
    seed: int = 0

    def __post_init__(self):
        positive = {
            "fps": self.fps,
            "sweep_amplitude_m": self.sweep_amplitude_m,
            "sweep_speed_mps": self.sweep_speed_mps,
            "pupil_radius_m": self.pupil_radius_m,
            "beam_width_m": self.beam_width_m,
            "purkinje_size_m": self.purkinje_size_m,
        }
        for name, value in positive.items():
            if not (math.isfinite(value) and value > 0):
                raise ConfigInvalid(f"{name} must be positive, got {value!r}")
        if self.passes < 1 or self.supersample < 1:
            raise ConfigInvalid("passes and supersample must be >= 1")
        if len(self.resolution) != 2 or min(self.resolution) < 16:
            raise ConfigInvalid(f"bad resolution {self.resolution!r}")
        if self.noise_sigma < 0 or self.jitter_px < 0 or self.edge_blur_px < 0:
            raise ConfigInvalid("noise, jitter and blur must be non-negative")
        if not -60 < self.camera_yaw_deg < 60:
            raise ConfigInvalid("camera yaw outside (-60, 60) degrees")
        if abs(1 + self.setup.d * self.true_power) < 1e-6:
            raise ConfigInvalid("true power sits on the neutralization singularity")
        if self.glare_fiducial is not None and not 0 <= self.glare_fiducial < 5:
            raise ConfigInvalid("glare_fiducial must index one of the five fiducials")

    @property
    def camera(self) -> OpticalSetup:
        """Optical setup sampled at the render resolution."""
        w, h = self.resolution
        if (w, h) == (self.setup.image_width_px, self.setup.image_height_px):
            return self.setup
        return self.setup.scaled(int(w), int(h))

    @property
    def pass_frames(self) -> float:
        return 2 * self.sweep_amplitude_m / self.sweep_speed_mps * self.fps

    @property
    def n_frames(self) -> int:
        return int(round(self.passes * self.pass_frames))

    @property
    def center_x(self) -> float:
        return self.pupil_center_m[0] if self.sweep_center_m is None else self.sweep_center_m

    def beam_x(self, frame: int) -> float:
        """Beam center on the frame plane: a triangle wave starting at the left end."""
        period = self.pass_frames
        phase = (frame / period) % 2.0
        frac = phase if phase <= 1.0 else 2.0 - phase
        return self.center_x - self.sweep_amplitude_m + 2 * self.sweep_amplitude_m * frac

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["setup"] = self.setup.to_dict()
        data["frame_spec"] = self.frame_spec.to_dict()
        data["resolution"] = list(self.resolution)
        data["pupil_center_m"] = list(self.pupil_center_m)
        data["purkinje_offset"] = list(self.purkinje_offset)
        data["glare_frames"] = list(self.glare_frames)
        data["distractor_frames"] = list(self.distractor_frames)
        data["schema_version"] = SCHEMA_VERSION
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SceneConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigInvalid(f"unsupported scene schema_version {version}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigInvalid(f"unknown scene config keys: {unknown}")
        if "setup" in data:
            extra = sorted(set(data["setup"]) - SETUP_KEYS)
            if extra:
                raise ConfigInvalid(f"unknown setup keys: {extra}")
            data["setup"] = OpticalSetup.from_dict(data["setup"])
        if "frame_spec" in data:
            data["frame_spec"] = PaperFrameSpec.from_dict(data["frame_spec"])
        if "levels" in data:
            data["levels"] = Levels(**data["levels"])
        for key in ("resolution", "pupil_center_m", "purkinje_offset", "glare_frames", "distractor_frames"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc
