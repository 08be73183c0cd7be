"""Score a made-up cohort with the evaluation harness.

Subjective refractions are drawn at random and predictions get a bias and
scatter, then the same metrics the ``eval`` command writes are printed.
"""

import tempfile
from pathlib import Path

import numpy as np

from retinoscopy.evalharness import evaluate, load_dataset


def main(n=120, seed=3):
    rng = np.random.default_rng(seed)
    sph = np.round(rng.normal(-0.75, 2.2, n) * 4) / 4
    cyl = -np.round(np.abs(rng.normal(0, 0.6, n)) * 4) / 4
    axis = rng.choice([0, 45, 90, 135], n)
    net = sph + cyl * np.sin(np.radians(axis)) ** 2
    pred = net + 0.3 + rng.normal(0, 0.6, n)
    lines = ["session_id,eye,sph,cyl,axis,pred_power"]
    for i in range(n):
        lines.append(f"p{i // 2:03d},{'right' if i % 2 else 'left'},{sph[i]},{cyl[i]},{axis[i]},{pred[i]:.3f}")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "cohort.csv"
        path.write_text("\n".join(lines) + "\n")
        report = evaluate(load_dataset(path))
    ba = report.bland_altman
    print(f"n = {report.n}")
    print(f"MAE {report.mae:.2f} +/- {report.mae_std:.2f} D, Pearson r = {report.pearson_r:.2f}")
    print(f"bias {ba['mean_diff']:+.2f} D, LoA {ba['loa_low']:+.2f} to {ba['loa_high']:+.2f} D")
    print(f"within 0.5 D: {report.pct_within_0_5:.0f}%, within 1 D: {report.pct_within_1_0:.0f}%")
    b = report.classes.binary
    print(f"refer screen: sensitivity {b['sensitivity']:.1f}%, specificity {b['specificity']:.1f}%")
    for label, m in report.classes.per_class.items():
        sens = "--" if m["sensitivity"] is None else f"{m['sensitivity']:.1f}%"
        print(f"  {label:>19}: support {m['support']:3d}, sensitivity {sens}")


if __name__ == "__main__":
    main()
