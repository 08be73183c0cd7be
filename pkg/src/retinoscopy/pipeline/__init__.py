"""Frame sequence analysis: fiducials, rectification, beam, pupil, reflex, passes."""

from .analyze import (
    SCHEMA_VERSION,
    AnalysisConfig,
    AnalysisReport,
    PassResult,
    analyze_session,
    analyze_video,
    estimate_working_distance,
    iter_session_frames,
    load_manifest,
    setup_from_manifest,
    write_outputs,
)
from .beam import BeamEdges, detect_beam_edges, subpixel_edge
from .detections import FrameDetections, beam_center_lines, beam_positions, detections_to_csv
from .fiducials import ROI, FiducialSet, Quad, detect_fiducials, detect_roi, find_quads, match_pattern
from .framespec import FIDUCIAL_NAMES, PaperFrameSpec
from .passes import PassSegment, TimestampSelection, measure_ratio, segment_passes, select_timestamps
from .perspective import (
    RectifiedGeometry,
    correct_perspective,
    fiducial_distances,
    frame_working_distance,
    rectifying_homography,
    reprojection_error,
)
from .pupil import Pupil, PupilHistogram, PupilTrack, check_pupil_size, detect_pupil, pupil_candidates, select_pupil
from .reflex import ReflexEdges, localize_reflex_edges

__all__ = [
    "SCHEMA_VERSION",
    "AnalysisConfig",
    "AnalysisReport",
    "PassResult",
    "analyze_session",
    "analyze_video",
    "estimate_working_distance",
    "iter_session_frames",
    "load_manifest",
    "setup_from_manifest",
    "write_outputs",
    "BeamEdges",
    "detect_beam_edges",
    "subpixel_edge",
    "FrameDetections",
    "beam_center_lines",
    "beam_positions",
    "detections_to_csv",
    "ROI",
    "FiducialSet",
    "Quad",
    "detect_fiducials",
    "detect_roi",
    "find_quads",
    "match_pattern",
    "FIDUCIAL_NAMES",
    "PaperFrameSpec",
    "PassSegment",
    "TimestampSelection",
    "measure_ratio",
    "segment_passes",
    "select_timestamps",
    "RectifiedGeometry",
    "correct_perspective",
    "fiducial_distances",
    "frame_working_distance",
    "rectifying_homography",
    "reprojection_error",
    "Pupil",
    "PupilHistogram",
    "PupilTrack",
    "check_pupil_size",
    "detect_pupil",
    "pupil_candidates",
    "select_pupil",
    "ReflexEdges",
    "localize_reflex_edges",
]
