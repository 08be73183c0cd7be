"""Agreement and screening statistics for predicted against subjective power."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DegenerateVariance, EmptyInput
from ..optics import RefractiveClass, classify

SCHEMA_VERSION = 1
CLASS_ORDER = (
    RefractiveClass.HIGH_HYPEROPIA,
    RefractiveClass.MODERATE_HYPEROPIA,
    RefractiveClass.NORMAL,
    RefractiveClass.MODERATE_MYOPIA,
    RefractiveClass.HIGH_MYOPIA,
)
LOA_Z = 1.96


def _pair(pred, truth):
    p = np.asarray([float(v) for v in pred], dtype=np.float64)
    t = np.asarray([float(v) for v in truth], dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} truths")
    return p, t


def mae_stats(pred, truth, ddof: int = 0) -> tuple:
    """Mean and std of ``|pred - truth|``; ``ddof=0`` is the population std."""
    p, t = _pair(pred, truth)
    if p.size == 0:
        raise EmptyInput("no pairs")
    if p.size <= ddof:
        raise EmptyInput(f"need more than {ddof} pairs for ddof={ddof}")
    err = np.abs(p - t)
    return float(err.mean()), float(err.std(ddof=ddof))


def bland_altman(pred, truth, ddof: int = 1) -> tuple:
    """``(mean_diff, sd, loa_low, loa_high)`` of ``pred - truth``; LoA = mean ± 1.96 sd."""
    p, t = _pair(pred, truth)
    if p.size < 2:
        raise EmptyInput("Bland-Altman needs at least two pairs")
    diff = p - t
    mean = float(diff.mean())
    sd = float(diff.std(ddof=ddof))
    return limits_of_agreement(mean, sd)


def limits_of_agreement(mean: float, sd: float) -> tuple:
    half = LOA_Z * sd
    return (mean, sd, mean - half, mean + half)


def pearson(pred, truth) -> float:
    p, t = _pair(pred, truth)
    if p.size < 2:
        raise EmptyInput("Pearson needs at least two pairs")
    dp, dt = p - p.mean(), t - t.mean()
    sp, st = float(np.sqrt(dp @ dp)), float(np.sqrt(dt @ dt))
    if sp == 0.0 or st == 0.0:
        raise DegenerateVariance("a series has zero variance")
    return float(np.clip((dp @ dt) / (sp * st), -1.0, 1.0))


def pct_within(pred, truth, tol: float) -> float:
    p, t = _pair(pred, truth)
    if p.size == 0:
        raise EmptyInput("no pairs")
    # small slack so that 0.5 D steps recorded in decimal count as within
    return float(100.0 * np.mean(np.abs(p - t) <= tol + 1e-9))


def _rate(num, den):
    return None if den == 0 else 100.0 * num / den


@dataclass
class ClassMetrics:
    per_class: dict  # label -> {sensitivity, specificity, support, absent}
    confusion: list  # rows truth, columns pred, in CLASS_ORDER
    binary: dict  # refer screen: sensitivity, specificity, counts
    labels: list = field(default_factory=lambda: [c.value for c in CLASS_ORDER])

    def to_dict(self) -> dict:
        return {"labels": self.labels, "per_class": self.per_class, "confusion": self.confusion, "binary": self.binary}


def _label(c) -> RefractiveClass:
    if isinstance(c, RefractiveClass):
        return c
    return RefractiveClass(str(c))


def class_metrics(pred_classes, truth_classes) -> ClassMetrics:
    """One-vs-all sensitivity and specificity per class, plus the refer screen.

    A class with no truth instances has undefined sensitivity (``None``) and
    is flagged ``absent``; the refer screen treats every non-normal class as
    positive.
    """
    pred = [_label(c) for c in pred_classes]
    truth = [_label(c) for c in truth_classes]
    if len(pred) != len(truth):
        raise ValueError("length mismatch")
    if not pred:
        raise EmptyInput("no pairs")
    idx = {c: i for i, c in enumerate(CLASS_ORDER)}
    conf = np.zeros((5, 5), dtype=int)
    for p, t in zip(pred, truth):
        conf[idx[t], idx[p]] += 1
    n = int(conf.sum())
    per = {}
    for c, i in idx.items():
        tp = int(conf[i, i])
        fn = int(conf[i].sum()) - tp
        fp = int(conf[:, i].sum()) - tp
        tn = n - tp - fn - fp
        per[c.value] = {
            "sensitivity": _rate(tp, tp + fn),
            "specificity": _rate(tn, tn + fp),
            "support": tp + fn,
            "absent": tp + fn == 0,
            "tp": tp,
            "fn": fn,
            "fp": fp,
            "tn": tn,
        }
    normal = RefractiveClass.NORMAL
    tp = sum(1 for p, t in zip(pred, truth) if t != normal and p != normal)
    fn = sum(1 for p, t in zip(pred, truth) if t != normal and p == normal)
    fp = sum(1 for p, t in zip(pred, truth) if t == normal and p != normal)
    tn = n - tp - fn - fp
    binary = {"sensitivity": _rate(tp, tp + fn), "specificity": _rate(tn, tn + fp), "tp": tp, "fn": fn, "fp": fp, "tn": tn}
    return ClassMetrics(per, conf.tolist(), binary)


@dataclass
class MetricsReport:
    n: int
    mae: float
    mae_std: float
    std_kind: str
    pearson_r: float | None
    bland_altman: dict
    pct_within_0_5: float
    pct_within_1_0: float
    classes: ClassMetrics
    points: list  # (session_id, eye, pred, truth)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "mae": self.mae,
            "mae_std": self.mae_std,
            "std_kind": self.std_kind,
            "pearson_r": self.pearson_r,
            "bland_altman": self.bland_altman,
            "pct_within_0_5": self.pct_within_0_5,
            "pct_within_1_0": self.pct_within_1_0,
            "classes": self.classes.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def evaluate(pairs, std: str = "population", meridian: float = 0.0) -> MetricsReport:
    """All metrics for ``(GroundTruthRecord, NetPower)`` pairs.

    ``std`` selects the MAE spread: ``"population"`` (default) or ``"sample"``.
    Pearson's r is ``None`` when either series is constant.
    """
    if std not in ("population", "sample"):
        raise ValueError("std must be 'population' or 'sample'")
    pairs = [(rec, p) for rec, p in pairs if p is not None]
    if not pairs:
        raise EmptyInput("no records with a prediction")
    pred = [float(p) for _, p in pairs]
    truth = [rec.net_power(meridian).value for rec, _ in pairs]
    mae, sd = mae_stats(pred, truth, ddof=0 if std == "population" else 1)
    try:
        r = pearson(pred, truth)
    except (DegenerateVariance, EmptyInput):
        r = None
    if len(pred) >= 2:
        m, s, lo, hi = bland_altman(pred, truth)
        ba = {"mean_diff": m, "sd_diff": s, "loa_low": lo, "loa_high": hi}
    else:
        ba = {"mean_diff": None, "sd_diff": None, "loa_low": None, "loa_high": None}
    cm = class_metrics([classify(p).label for p in pred], [classify(t).label for t in truth])
    points = [(rec.session_id, rec.eye, p, t) for (rec, _), p, t in zip(pairs, pred, truth)]
    return MetricsReport(
        n=len(pred),
        mae=mae,
        mae_std=sd,
        std_kind=std,
        pearson_r=r,
        bland_altman=ba,
        pct_within_0_5=pct_within(pred, truth, 0.5),
        pct_within_1_0=pct_within(pred, truth, 1.0),
        classes=cm,
        points=points,
    )


def bland_altman_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    buf.write("# diff = pred - truth; mean = (pred + truth) / 2; diopters\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["session_id", "eye", "pred", "truth", "mean", "diff"])
    for sid, eye, p, t in report.points:
        w.writerow([sid, eye, repr(p), repr(t), repr((p + t) / 2), repr(p - t)])
    return buf.getvalue()


def write_metrics(report: MetricsReport, metrics_path, bland_altman_path=None) -> None:
    metrics_path = Path(metrics_path)
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    metrics_path.write_text(report.to_json())
    if bland_altman_path is None:
        bland_altman_path = metrics_path.with_name("bland_altman.csv")
    Path(bland_altman_path).write_text(bland_altman_csv(report))
