import functools
import time

import numpy as np
import pytest

from retinoscopy.pipeline import analyze_video
from retinoscopy.synthcam import Renderer, SceneConfig, manifest_for

GRID = (-6.0, -4.0, -1.5, -1.0, 0.0, 1.0, 2.0, 3.0)
NOISY = dict(noise_sigma=6 / 255, jitter_px=2.0, camera_yaw_deg=12.0, purkinje=True)

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ci_scene(power, noisy=False, **kw):
    """960x540, 30 fps, 4 passes of 2.5 s: the 10 s closed-loop session."""
    base = dict(true_power=power, resolution=(960, 540))
    if noisy:
        base.update(NOISY)
    base.update(kw)
    return SceneConfig(**base)


@functools.lru_cache(maxsize=None)
def _closed_loop(power, noisy, extra):
    cfg = ci_scene(power, noisy, **dict(extra))
    r = Renderer(cfg)
    t0 = time.perf_counter()
    frames = [r.render(t) for t in range(cfg.n_frames)]
    t1 = time.perf_counter()
    dets = []
    report = analyze_video(frames, manifest_for(cfg), jobs=1, detections_out=dets)
    t2 = time.perf_counter()
    return {"cfg": cfg, "report": report, "dets": dets, "render_s": t1 - t0, "analyze_s": t2 - t1}


@pytest.fixture(scope="session")
def closed_loop():
    """Cached ``(power, noisy, **scene overrides) -> run`` so sessions are rendered once."""

    def run(power, noisy=False, **kw):
        return _closed_loop(float(power), bool(noisy), tuple(sorted(kw.items())))

    return run


@pytest.fixture
def acceptance():
    def record(name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
