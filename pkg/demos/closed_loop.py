"""Render synthetic sessions at a few powers and recover them with the pipeline.

    python3 demos/closed_loop.py --powers -4,-1,0,2 --noisy
"""

import argparse
import time

from retinoscopy.pipeline import analyze_video
from retinoscopy.synthcam import Renderer, SceneConfig, manifest_for


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--powers", default="-4,-1,0,2")
    ap.add_argument("--noisy", action="store_true", help="sensor noise, jitter and a Purkinje glint")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    extra = dict(noise_sigma=6 / 255, jitter_px=2.0, purkinje=True) if args.noisy else {}
    print(f"{'true':>7} {'estimate':>9} {'error':>7} {'class':>19} refer  seconds")
    for p in (float(v) for v in args.powers.split(",")):
        cfg = SceneConfig(true_power=p, resolution=(960, 540), **extra)
        r = Renderer(cfg)
        frames = [r.render(t) for t in range(cfg.n_frames)]
        t0 = time.perf_counter()
        rep = analyze_video(frames, manifest_for(cfg), jobs=args.jobs)
        dt = time.perf_counter() - t0
        if not rep.ok:
            print(f"{p:+7.2f}  failed: {rep.error['code']}")
            continue
        s = rep.screening
        print(f"{p:+7.2f} {rep.net_power:+9.3f} {rep.net_power - p:+7.3f} {s['label']:>19} {str(s['refer']):5} {dt:7.1f}")


if __name__ == "__main__":
    main()
