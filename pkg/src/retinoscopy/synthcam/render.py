from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from ..imgproc.geometry import apply_homography
from ..imgproc.io import write_png
from ..optics import OpticalSetup, forward_ratio
from .scene import SCHEMA_VERSION, SceneConfig

BEAM_LIGHT = np.array([1.0, 0.75, 0.45])
SKIN_TINT = np.array([1.0, 0.62, 0.48])
REFLEX_TINT = np.array([1.0, 0.55, 0.25])


def reflex_position(beam_x: float, p, s: OpticalSetup) -> float:
    """Reflex offset from the pupil axis for a beam offset ``beam_x`` (meters)."""
    return forward_ratio(p, s).r * beam_x


def plane_to_image(cam: OpticalSetup, yaw_deg: float = 0.0, shift=(0.0, 0.0)) -> np.ndarray:
    """Homography from frame-plane meters to image pixels.

    The camera sits at distance ``d`` from the plane origin, rotated by
    ``yaw`` about the vertical axis while still aimed at the origin. Pixel
    centers are at integer coordinates; the principal point is the image
    center, offset by ``shift`` (jitter).
    """
    t = math.radians(yaw_deg)
    f, d = cam.focal_length_px, cam.d
    cx = (cam.image_width_px - 1) / 2.0 + shift[0]
    cy = (cam.image_height_px - 1) / 2.0 + shift[1]
    s, c = math.sin(t), math.cos(t)
    # depth of plane point (X, Y) is d - X sin(yaw); lateral camera coordinate is X cos(yaw)
    return np.array(
        [
            [f * c - cx * s, 0.0, cx * d],
            [-cy * s, f, cy * d],
            [-s, 0.0, d],
        ]
    ) / d


def project_to_image(point, cam: OpticalSetup, yaw_deg: float = 0.0, shift=(0.0, 0.0)) -> np.ndarray:
    pt = np.asarray(point, dtype=np.float64)
    depth = cam.d - np.atleast_2d(pt)[:, 0] * math.sin(math.radians(yaw_deg))
    if np.any(depth <= 0):
        raise ValueError("point is behind the camera")
    return apply_homography(plane_to_image(cam, yaw_deg, shift), pt)


@dataclass
class GroundTruth:
    true_power: float
    true_ratio: float
    beam_x_m: list = field(default_factory=list)
    beam_px: list = field(default_factory=list)
    reflex_edges_m: list = field(default_factory=list)
    reflex_left_px: list = field(default_factory=list)
    reflex_right_px: list = field(default_factory=list)
    reflex_visible: list = field(default_factory=list)
    pupil_px: list = field(default_factory=list)
    fiducials_px: list = field(default_factory=list)
    jitter_px: list = field(default_factory=list)
    pair_ratios: list = field(default_factory=list)
    pupil_radius_m: float = 0.0
    pupil_center_m: tuple = (0.0, 0.0)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["schema_version"] = SCHEMA_VERSION
        out["pupil_center_m"] = list(self.pupil_center_m)
        return out


def _visible_edges(cfg: SceneConfig, bx: float, ratio: float):
    pcx = cfg.pupil_center_m[0]
    half = cfg.beam_width_m / 2
    e = sorted((pcx + ratio * (bx - half - pcx), pcx + ratio * (bx + half - pcx)))
    rho = cfg.pupil_radius_m
    inside = [abs(x - pcx) < rho for x in e]
    visible = e[1] > pcx - rho and e[0] < pcx + rho
    return e, inside, visible


def _scene_rgb(cfg: SceneConfig, X, Y, bx: float, ratio: float, blur_m: float, frame: int, aa_m: float = 1e-9):
    """Radiance (H, W, 3) in [0, 1] at frame-plane points.

    Fiducial squares get a linear coverage ramp ``aa_m`` wide so that
    supersampled rendering reproduces their sub-pixel size.
    """
    lv = cfg.levels
    spec = cfg.frame_spec
    out = np.empty(X.shape + (3,))
    out[:] = lv.background

    outline = spec.outline
    paper = outline.contains(X, Y)
    window = spec.reflex_search_region.contains(X, Y)
    paper &= ~window

    sig = max(blur_m, 1e-9)
    half = cfg.beam_width_m / 2
    beam = ndtr((X - (bx - half)) / sig) - ndtr((X - (bx + half)) / sig)
    reflect = np.ones(X.shape)
    side = spec.fiducial_side / 2
    for i, (fx, fy) in enumerate(spec.fiducial_centers):
        if cfg.glare_fiducial == i and frame in cfg.glare_frames:
            continue
        cov = np.clip((side - np.abs(X - fx)) / aa_m + 0.5, 0, 1) * np.clip((side - np.abs(Y - fy)) / aa_m + 0.5, 0, 1)
        np.minimum(reflect, 1 - (1 - lv.ink) * cov, out=reflect)
    illum = lv.paper + (lv.beam - lv.paper) * beam[..., None] * BEAM_LIGHT
    paper_rgb = np.clip(reflect[..., None] * illum, 0, 1)
    out[paper] = paper_rgb[paper]

    pcx, pcy = cfg.pupil_center_m
    rho = cfg.pupil_radius_m
    eye = np.empty(X.shape + (3,))
    eye[:] = lv.skin * SKIN_TINT
    in_pupil = (X - pcx) ** 2 + (Y - pcy) ** 2 <= rho * rho
    (lo, hi), _, _ = _visible_edges(cfg, bx, ratio)
    band = ndtr((X - lo) / sig) - ndtr((X - hi) / sig)
    pupil_rgb = lv.pupil + (lv.reflex - lv.pupil) * band[..., None] * REFLEX_TINT
    eye[in_pupil] = pupil_rgb[in_pupil]
    if cfg.purkinje:
        qx = pcx + cfg.purkinje_offset[0] * rho
        qy = pcy + cfg.purkinje_offset[1] * rho
        dot = (X - qx) ** 2 + (Y - qy) ** 2 <= (cfg.purkinje_size_m / 2) ** 2
        eye[dot] = lv.purkinje
    if frame in cfg.distractor_frames:
        win = spec.reflex_search_region
        qx = win.x0 + 0.2 * win.width
        qy = pcy
        ring = (X - qx) ** 2 + (Y - qy) ** 2 <= (0.8 * rho) ** 2
        eye[ring] = lv.purkinje
    out[window] = eye[window]
    return out


class Renderer:
    """Render frames of a :class:`SceneConfig`; each frame is a pure function of (config, index)."""

    def __init__(self, cfg: SceneConfig):
        self.cfg = cfg
        self.cam = cfg.camera
        self.ratio = forward_ratio(cfg.true_power, cfg.setup).r
        self.ppm = self.cam.focal_length_px / self.cam.d
        self.offsets = (np.arange(cfg.supersample) + 0.5) / cfg.supersample - 0.5

    def _rng(self, frame):
        return np.random.default_rng([self.cfg.seed, frame])

    def jitter(self, frame) -> tuple:
        if self.cfg.jitter_px <= 0:
            return (0.0, 0.0)
        j = np.random.default_rng([self.cfg.seed, frame, 1]).uniform(-1, 1, size=2) * self.cfg.jitter_px
        return (float(j[0]), float(j[1]))

    def homography(self, frame) -> np.ndarray:
        return plane_to_image(self.cam, self.cfg.camera_yaw_deg, self.jitter(frame))

    def render(self, frame: int) -> np.ndarray:
        cfg = self.cfg
        W, H = cfg.resolution
        Hm = self.homography(frame)
        o = cfg.frame_spec.outline
        corners = apply_homography(Hm, [(o.x0, o.y0), (o.x1, o.y0), (o.x1, o.y1), (o.x0, o.y1)])
        x0 = max(int(np.floor(corners[:, 0].min())) - 2, 0)
        x1 = min(int(np.ceil(corners[:, 0].max())) + 3, W)
        y0 = max(int(np.floor(corners[:, 1].min())) - 2, 0)
        y1 = min(int(np.ceil(corners[:, 1].max())) + 3, H)

        img = np.full((H, W, 3), cfg.levels.background * 255.0, dtype=np.float32)
        if x1 > x0 and y1 > y0:
            Hinv = np.linalg.inv(Hm)
            yy, xx = np.mgrid[y0:y1, x0:x1].astype(np.float64)
            acc = np.zeros(xx.shape + (3,))
            blur_m = cfg.edge_blur_px / self.ppm
            bx = cfg.beam_x(frame)
            aa_m = 1.0 / (self.ppm * len(self.offsets))
            for oy in self.offsets:
                for ox in self.offsets:
                    u, v = xx + ox, yy + oy
                    q = Hinv[2, 0] * u + Hinv[2, 1] * v + Hinv[2, 2]
                    X = (Hinv[0, 0] * u + Hinv[0, 1] * v + Hinv[0, 2]) / q
                    Y = (Hinv[1, 0] * u + Hinv[1, 1] * v + Hinv[1, 2]) / q
                    acc += _scene_rgb(cfg, X, Y, bx, self.ratio, blur_m, frame, aa_m)
            img[y0:y1, x0:x1] = acc * (255.0 / len(self.offsets) ** 2)
        if cfg.noise_sigma > 0:
            noise = self._rng(frame).standard_normal(img.shape, dtype=np.float32)
            noise *= np.float32(cfg.noise_sigma * 255.0)
            img += noise
        img += np.float32(0.5)
        np.floor(img, out=img)
        np.clip(img, 0, 255, out=img)
        return img.astype(np.uint8)

    def truth(self, frame: int) -> dict:
        cfg = self.cfg
        Hm = self.homography(frame)
        bx = cfg.beam_x(frame)
        edges, inside, visible = _visible_edges(cfg, bx, self.ratio)
        pcx, pcy = cfg.pupil_center_m
        beam_row = cfg.frame_spec.beam_search_region
        by = (beam_row.y0 + beam_row.y1) / 2
        left_px, right_px = apply_homography(Hm, [(edges[0], pcy), (edges[1], pcy)])[:, 0]
        center_px = apply_homography(Hm, [pcx, pcy])
        rim_px = apply_homography(Hm, [[pcx, pcy - cfg.pupil_radius_m], [pcx, pcy + cfg.pupil_radius_m]])
        return {
            "beam_x_m": bx,
            "beam_px": float(apply_homography(Hm, [bx, by])[0]),
            "reflex_edges_m": edges,
            "reflex_left_px": float(left_px) if inside[0] else None,
            "reflex_right_px": float(right_px) if inside[1] else None,
            "reflex_visible": bool(visible),
            "pupil_px": [float(center_px[0]), float(center_px[1]), float(abs(rim_px[1, 1] - rim_px[0, 1]) / 2)],
            "fiducials_px": apply_homography(Hm, cfg.frame_spec.fiducial_centers).tolist(),
            "jitter_px": list(self.jitter(frame)),
        }


def ground_truth(cfg: SceneConfig) -> GroundTruth:
    """Ground truth computed analytically, before any rasterization."""
    r = Renderer(cfg)
    gt = GroundTruth(
        true_power=cfg.true_power,
        true_ratio=r.ratio,
        pupil_radius_m=cfg.pupil_radius_m,
        pupil_center_m=tuple(cfg.pupil_center_m),
    )
    for t in range(cfg.n_frames):
        rec = r.truth(t)
        for key, value in rec.items():
            getattr(gt, key).append(value)
    bx = np.array(gt.beam_x_m)
    refl = np.array([e[0] for e in gt.reflex_edges_m])
    dbx = np.diff(bx)
    dre = np.diff(refl)
    # a reflex edge swaps role with the other when the ratio is negative; the
    # band image translates rigidly so either edge gives the same ratio
    gt.pair_ratios = [float(dr / db) if abs(db) > 1e-12 else None for dr, db in zip(dre, dbx)]
    return gt


def render_sequence(cfg: SceneConfig, jobs: int = 1):
    """Render every frame of the scene. Returns ``(frames, ground_truth)``."""
    r = Renderer(cfg)
    indices = range(cfg.n_frames)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            frames = list(pool.map(r.render, indices))
    else:
        frames = [r.render(t) for t in indices]
    return frames, ground_truth(cfg)


def manifest_for(cfg: SceneConfig, eye: str = "right") -> dict:
    cam = cfg.camera
    return {
        "schema_version": SCHEMA_VERSION,
        "fps": cfg.fps,
        "frame_size_code": cfg.frame_spec.size_code,
        "frame_spec": cfg.frame_spec.to_dict(),
        "u_m": cam.u,
        "d_m": cam.d,
        "focal_length_px": cam.focal_length_px,
        "image_width_px": cam.image_width_px,
        "image_height_px": cam.image_height_px,
        "sensor_width_m": cam.sensor_width_m,
        "sensor_height_m": cam.sensor_height_m,
        "meridian_deg": 0.0,
        "eye": eye,
        "frame_count": cfg.n_frames,
    }


def write_session(cfg: SceneConfig, out_dir, jobs: int = 1) -> GroundTruth:
    """Render a scene into the session-directory layout the pipeline ingests."""
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    r = Renderer(cfg)

    def emit(t):
        write_png(out / "frames" / f"{t:06d}.png", r.render(t))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(emit, range(cfg.n_frames)))
    else:
        for t in range(cfg.n_frames):
            emit(t)
    gt = ground_truth(cfg)
    (out / "manifest.json").write_text(json.dumps(manifest_for(cfg), indent=2, sort_keys=True) + "\n")
    (out / "ground_truth.json").write_text(json.dumps(gt.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "scene.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return gt
