"""Deterministic synthetic retinoscopy sessions with exact ground truth."""

from .render import (
    GroundTruth,
    Renderer,
    ground_truth,
    manifest_for,
    plane_to_image,
    project_to_image,
    reflex_position,
    render_sequence,
    write_session,
)
from .scene import Levels, SceneConfig

__all__ = [
    "GroundTruth",
    "Levels",
    "Renderer",
    "SceneConfig",
    "ground_truth",
    "manifest_for",
    "plane_to_image",
    "project_to_image",
    "reflex_position",
    "render_sequence",
    "write_session",
]
