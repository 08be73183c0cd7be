"""Frame sequence to net refractive power.

Stage 1 (ROI tracking and fiducials) walks the frames in order. The
per-frame stages after it run on a thread pool, and every reduction
consumes results in frame order, so output does not depend on ``jobs``.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    ConfigInvalid,
    DegenerateConfig,
    EmptyInput,
    FrameNotFound,
    OpticsError,
    PatternNotFound,
    PupilNotFound,
    PupilTooSmall,
    ReflexNotFound,
    StageError,
    TooFewValidPasses,
)
from ..imgproc import read_png, to_gray_ccir601
from ..optics import (
    OpticalSetup,
    classify,
    estimate_power,
    movement_direction,
)
from .beam import BEAM_FLOOR, N_LINES, detect_beam_edges
from .detections import FrameDetections, beam_positions, detections_to_csv
from .fiducials import ROI, FiducialSet, detect_fiducials, detect_roi
from .framespec import PaperFrameSpec
from .passes import measure_ratio, segment_passes, select_timestamps
from .perspective import RectifiedGeometry, correct_perspective, frame_working_distance
from .pupil import Pupil, PupilHistogram, check_pupil_size, pupil_candidates
from .reflex import MIN_CONTRAST, localize_reflex_edges

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AnalysisConfig:
    """Tunable pipeline thresholds."""

    rect_scale: float = 2.0
    upsample_factor: int = 4
    upsampler: str = "bicubic"
    beam_floor: float = BEAM_FLOOR
    reflex_min_contrast: float = MIN_CONTRAST
    min_speed_px: float = 0.2
    roi_margin: float = 0.10
    history: int = 3
    pupil_bin_px: float = 2.0
    min_valid_passes: int = 2
    working_distance_range: tuple = (0.2, 0.8)
    neutral_threshold: float = 50.0

    def __post_init__(self):
        if self.rect_scale <= 0 or self.upsample_factor not in (2, 4):
            raise ConfigInvalid("rect_scale must be positive and upsample_factor 2 or 4")
        if self.min_valid_passes < 1:
            raise ConfigInvalid("min_valid_passes must be >= 1")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["working_distance_range"] = list(self.working_distance_range)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigInvalid(f"unknown analysis config keys: {unknown}")
        data = dict(data)
        if "working_distance_range" in data:
            data["working_distance_range"] = tuple(data["working_distance_range"])
        return cls(**data)


@dataclass
class PassResult:
    start: int
    stop: int
    direction: str
    t1: int | None = None
    t2: int | None = None
    edge: str | None = None
    ratio: float | None = None
    power: float | None = None
    error: str | None = None


@dataclass
class AnalysisReport:
    net_power: float | None
    per_pass_powers: list
    movement: str | None
    screening: dict | None
    working_distance: float
    working_distance_source: str
    ratio: float | None
    passes: list
    diagnostics: dict
    error: dict | None = None

    @property
    def timestamps(self) -> list:
        return [(p.t1, p.t2) for p in self.passes]

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "net_power": self.net_power,
            "meridian_deg": 0.0,
            "per_pass_powers": list(self.per_pass_powers),
            "movement": self.movement,
            "screening": self.screening,
            "working_distance": self.working_distance,
            "working_distance_source": self.working_distance_source,
            "ratio": self.ratio,
            "timestamps": [list(t) for t in self.timestamps],
            "passes": [dataclasses.asdict(p) for p in self.passes],
            "diagnostics": self.diagnostics,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def setup_from_manifest(manifest: dict) -> tuple:
    try:
        setup = OpticalSetup.from_dict(manifest)
        if "frame_spec" in manifest:
            spec = PaperFrameSpec.from_dict(manifest["frame_spec"])
        else:
            spec = PaperFrameSpec(size_code=manifest.get("frame_size_code", "medium"))
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad manifest: {exc}") from exc
    return setup, spec


def estimate_working_distance(fiducials: FiducialSet, spec: PaperFrameSpec, s: OpticalSetup) -> float:
    """Camera-to-frame distance from the apparent size of the detected fiducials.

    Falls back to ``s.d`` when fewer than two fiducials were measured.
    """
    sides = np.where(fiducials.detected, fiducials.sides_px, np.nan)
    if np.isfinite(sides).sum() < 2:
        log.warning("too few fiducials for a working-distance estimate; using %.3f m", s.d)
        return s.d
    return frame_working_distance(sides, spec, s.focal_length_px)


@dataclass
class _Tracked:
    index: int
    crop: np.ndarray | None = None  # red channel of the tracked ROI
    offset: tuple = (0, 0)
    fiducials: FiducialSet | None = None
    distance: float | None = None
    dropped: str | None = None


@dataclass
class _Measured:
    rect: np.ndarray | None = None
    beam: object = None
    candidates: list = field(default_factory=list)
    dropped: str | None = None


class _Counter(dict):
    def bump(self, key):
        self[key] = self.get(key, 0) + 1


def _track(frames, spec, setup, cfg: AnalysisConfig, counts: _Counter) -> list:
    expected = setup.focal_length_px * spec.fiducial_side / setup.d
    history, tracked = [], []
    track_roi = None
    for i, frame in enumerate(frames):
        frame = np.asarray(frame)
        if frame.ndim != 3 or frame.shape[2] < 3:
            raise ConfigInvalid(f"frame {i} is not an RGB image")
        item = _Tracked(i)
        try:
            roi = detect_roi(frame, track_roi, expected, cfg.roi_margin)
            if track_roi is not None:
                roi = roi.union(track_roi)
            gray = to_gray_ccir601(roi.crop(frame))
            fs = detect_fiducials(gray, spec, history[-cfg.history :], expected, (roi.x0, roi.y0), roi.quads)
        except (FrameNotFound, PatternNotFound) as exc:
            item.dropped = exc.code
            counts.bump(exc.code)
            tracked.append(item)
            continue
        history.append(fs)
        track_roi = ROI.around(fs.centers, 2 * expected, frame.shape)
        item.crop = np.ascontiguousarray(track_roi.crop(frame)[..., 0])
        item.offset = (track_roi.x0, track_roi.y0)
        item.fiducials = fs
        item.distance = estimate_working_distance(fs, spec, setup)
        tracked.append(item)
    return tracked


def _measure(item: _Tracked, spec, geom: RectifiedGeometry, cfg: AnalysisConfig) -> _Measured:
    out = _Measured()
    if item.fiducials is None:
        out.dropped = item.dropped
        return out
    try:
        rect, _ = correct_perspective(item.crop, item.fiducials.centers, spec, geom, item.offset)
    except DegenerateConfig:
        out.dropped = "degenerate_homography"
        return out
    out.rect = rect
    rs, cs = geom.region_slices(spec.beam_search_region, 1)
    out.beam = detect_beam_edges(rect[rs, cs], cs.start, cfg.beam_floor)
    rs, cs = geom.region_slices(spec.reflex_search_region, 2)
    out.candidates = pupil_candidates(rect[rs, cs], geom.ppm, (cs.start, rs.start))
    return out


def _map(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fail(report_kw, exc):
    report_kw["error"] = {"code": getattr(exc, "code", "error"), "message": str(exc)}
    return AnalysisReport(**report_kw)


def analyze_video(frames, manifest: dict, config: AnalysisConfig | None = None, jobs: int = 1, detections_out=None):
    """Run every stage and return an :class:`AnalysisReport`.

    Failures that leave fewer than ``min_valid_passes`` usable passes are
    reported through ``report.error`` (code ``too_few_valid_passes`` or the
    error that stopped the analysis) rather than raised. ``detections_out``,
    if given, is a list that receives the per-frame :class:`FrameDetections`.
    """
    cfg = config or AnalysisConfig()
    setup, spec = setup_from_manifest(manifest)
    counts = _Counter()
    tracked = _track(frames, spec, setup, cfg, counts)
    if not tracked:
        raise EmptyInput("no frames")
    geom = RectifiedGeometry.for_spec(spec, cfg.rect_scale * setup.focal_length_px / setup.d)
    measured = _map(lambda it: _measure(it, spec, geom, cfg), tracked, jobs)

    # working distance: per-video median of per-frame estimates
    dists = [t.distance for t in tracked if t.distance is not None and math.isfinite(t.distance)]
    d_est = float(np.median(dists)) if dists else float("nan")
    lo, hi = cfg.working_distance_range
    warnings = []
    if math.isfinite(d_est) and lo <= d_est <= hi:
        d_used, d_source = d_est, "fiducials"
    else:
        d_used, d_source = setup.d, "manifest"
        warnings.append(f"fiducial working distance {d_est!r} outside [{lo}, {hi}] m; using manifest value")
    s_used = setup.with_distance(d_used)

    dets = []
    for t, m in zip(tracked, measured):
        d = FrameDetections(t.index, working_distance_est=t.distance, dropped=t.dropped or m.dropped)
        if t.fiducials is not None:
            d.fiducials = t.fiducials.centers
            d.fiducial_detected = t.fiducials.detected
        if m.beam is not None and m.beam.present:
            if math.isfinite(m.beam.left):
                d.beam_left, d.beam_left_lines = m.beam.left, m.beam.left_lines
            if math.isfinite(m.beam.right):
                d.beam_right, d.beam_right_lines = m.beam.right, m.beam.right_lines
        elif m.rect is not None:
            counts.bump("beam_absent")
        dets.append(d)

    report_kw = dict(
        net_power=None,
        per_pass_powers=[],
        movement=None,
        screening=None,
        working_distance=d_used,
        working_distance_source=d_source,
        ratio=None,
        passes=[],
        diagnostics={"frames": len(dets), "dropped": counts, "warnings": warnings},
    )
    if detections_out is not None:
        detections_out.extend(dets)

    # pupil: session histogram anchored at the top-left fiducial
    origin = tuple(geom.to_px(spec.fiducial_centers[0]))
    hist = PupilHistogram(origin, cfg.pupil_bin_px)
    for m in measured:
        hist.add(m.candidates)
    try:
        center, radius = hist.peak()
        check_pupil_size(radius, geom.ppm)
    except (PupilNotFound, PupilTooSmall) as exc:
        report_kw["diagnostics"]["pupil"] = exc.code
        return _fail(report_kw, TooFewValidPasses(f"no usable pupil: {exc}"))
    report_kw["diagnostics"]["pupil"] = {"cx": center[0], "cy": center[1], "radius": radius}
    session_pupil = Pupil(center[0], center[1], radius)
    reach = 2.0 * cfg.pupil_bin_px * math.sqrt(2)

    def reflex_stage(k):
        m = measured[k]
        if m.rect is None:
            return None, None
        p = hist.nearest(m.candidates, center, reach)
        if p is None:
            return None, "pupil_not_found"
        try:
            return p, localize_reflex_edges(
                m.rect, session_pupil, cfg.upsample_factor, cfg.upsampler, cfg.reflex_min_contrast
            )
        except ReflexNotFound:
            return p, "reflex_not_found"

    reflex = _map(reflex_stage, range(len(measured)), jobs)
    for d, (p, res) in zip(dets, reflex):
        if p is not None:
            d.pupil = (p.cx, p.cy, p.radius)
        if isinstance(res, str):
            counts.bump(res)
            continue
        if res is None:
            continue
        if not res.left_at_rim:
            d.reflex_left, d.reflex_left_lines = res.left, res.left_lines
        if not res.right_at_rim:
            d.reflex_right, d.reflex_right_lines = res.right, res.right_lines

    try:
        segments = segment_passes(beam_positions(dets), cfg.min_speed_px)
    except StageError as exc:
        return _fail(report_kw, exc)

    results, ratios, powers = [], [], []
    for seg in segments:
        pr = PassResult(seg.start, seg.stop, seg.label)
        try:
            sel = select_timestamps(seg, dets, (center[0], center[1], radius))
            pr.t1, pr.t2, pr.edge = sel.t1, sel.t2, sel.edge
            r = measure_ratio(seg, sel, dets)
            pr.ratio = r.r
            pr.power = estimate_power(r, s_used).value
        except (StageError, OpticsError) as exc:
            pr.error = exc.code
        else:
            ratios.append(pr.ratio)
            powers.append(pr.power)
        results.append(pr)
    report_kw["passes"] = results
    report_kw["per_pass_powers"] = powers
    report_kw["diagnostics"]["pass_edges"] = [p.edge for p in results]
    if len(powers) < cfg.min_valid_passes:
        return _fail(
            report_kw, TooFewValidPasses(f"{len(powers)} valid pass(es); need {cfg.min_valid_passes}")
        )
    net = float(np.median(powers))
    r_med = float(np.median(ratios))
    screen = classify(net)
    report_kw.update(
        net_power=net,
        ratio=r_med,
        movement=movement_direction(r_med, cfg.neutral_threshold).value,
        screening={"label": screen.label.value, "refer": screen.refer},
    )
    return AnalysisReport(**report_kw)


def iter_session_frames(session_dir):
    frames_dir = Path(session_dir) / "frames"
    paths = sorted(frames_dir.glob("*.png"))
    if not paths:
        raise EmptyInput(f"no frames found in {frames_dir}")
    for p in paths:
        yield read_png(p)


def load_manifest(session_dir) -> dict:
    path = Path(session_dir) / "manifest.json"
    if not path.is_file():
        raise EmptyInput(f"missing {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc


def analyze_session(session_dir, config: AnalysisConfig | None = None, jobs: int = 1):
    """Analyze a session directory; returns ``(report, detections)``."""
    manifest = load_manifest(session_dir)
    frames_dir = Path(session_dir) / "frames"
    if not frames_dir.is_dir() or not any(frames_dir.glob("*.png")):
        raise EmptyInput(f"no frames found in {frames_dir}")
    dets = []
    report = analyze_video(iter_session_frames(session_dir), manifest, config, jobs, detections_out=dets)
    return report, dets


def write_outputs(report: AnalysisReport, dets, report_path, detections_path=None) -> None:
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json())
    if detections_path is not None:
        Path(detections_path).write_text(detections_to_csv(dets))


__all__ = [
    "AnalysisConfig",
    "AnalysisReport",
    "PassResult",
    "N_LINES",
    "analyze_session",
    "analyze_video",
    "estimate_working_distance",
    "iter_session_frames",
    "load_manifest",
    "setup_from_manifest",
    "write_outputs",
]
