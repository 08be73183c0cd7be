"""Ground-truth and prediction CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import ParseError
from ..optics import NetPower, Prescription, net_meridional_power

REQUIRED_COLUMNS = ("session_id", "eye", "sph", "cyl", "axis", "pred_power")
OPTIONAL_COLUMNS = ("ar_sph", "ar_cyl", "ar_axis", "ret_sph", "ret_cyl", "ret_axis", "age", "dilated")

_EYES = {"left": "left", "l": "left", "os": "left", "right": "right", "r": "right", "od": "right"}
_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class GroundTruthRecord:
    session_id: str
    eye: str
    subjective: Prescription
    autorefractor: Prescription | None = None
    retinoscopy: Prescription | None = None
    age: float | None = None
    dilated: bool | None = None

    @property
    def key(self) -> tuple:
        return (self.session_id, self.eye)

    def net_power(self, meridian: float = 0.0) -> NetPower:
        return net_meridional_power(self.subjective, meridian)


def _rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise ParseError(f"{path}: empty file", row=1)
    header = [h.strip() for h in reader.fieldnames]
    # data rows are numbered from 2; row 1 is the header
    return header, ((i + 2, {k.strip(): (v or "").strip() for k, v in r.items() if k}) for i, r in enumerate(reader))


def _float(row, key, n, required=True):
    raw = row.get(key, "")
    if raw == "":
        if required:
            raise ParseError(f"missing value for {key!r}", row=n)
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"{key}={raw!r} is not a number", row=n) from None
    if not math.isfinite(value):
        raise ParseError(f"{key}={raw!r} is not finite", row=n)
    return value


def _rx(row, prefix, n, required):
    sph = _float(row, f"{prefix}sph", n, required)
    cyl = _float(row, f"{prefix}cyl", n, required)
    axis = _float(row, f"{prefix}axis", n, required)
    if sph is None and cyl is None and axis is None:
        return None
    if sph is None:
        raise ParseError(f"{prefix}sph missing while {prefix}cyl/{prefix}axis present", row=n)
    cyl = 0.0 if cyl is None else cyl
    axis = 0.0 if axis is None else axis
    if axis == 180.0:
        axis = 0.0
    try:
        return Prescription(sph, cyl, axis)
    except ValueError as exc:
        raise ParseError(str(exc), row=n) from None


def _eye(row, n):
    raw = row.get("eye", "").lower()
    if raw not in _EYES:
        raise ParseError(f"eye={raw!r} is not left/right", row=n)
    return _EYES[raw]


def _bool(row, key, n):
    raw = row.get(key, "").lower()
    if raw == "":
        return None
    if raw in _TRUE:
        return True
    if raw in _FALSE:
        return False
    raise ParseError(f"{key}={raw!r} is not a boolean", row=n)


def load_dataset(path, meridian: float = 0.0, require_pred: bool = True) -> list:
    """Parse a ground-truth CSV into ``(GroundTruthRecord, NetPower | None)`` pairs.

    With ``require_pred=False`` an empty ``pred_power`` cell yields ``None``.
    """
    header, rows = _rows(path)
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if not require_pred and missing == ["pred_power"]:
        missing = []
    if missing:
        raise ParseError(f"{path}: missing columns {missing}", row=1)
    unknown = [c for c in header if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise ParseError(f"{path}: unknown columns {unknown}", row=1)
    out, seen = [], set()
    for n, row in rows:
        sid = row.get("session_id", "")
        if not sid:
            raise ParseError("empty session_id", row=n)
        rec = GroundTruthRecord(
            session_id=sid,
            eye=_eye(row, n),
            subjective=_rx(row, "", n, True),
            autorefractor=_rx(row, "ar_", n, False),
            retinoscopy=_rx(row, "ret_", n, False),
            age=_float(row, "age", n, False),
            dilated=_bool(row, "dilated", n),
        )
        if rec.key in seen:
            raise ParseError(f"duplicate (session_id, eye) {rec.key}", row=n)
        seen.add(rec.key)
        pred = _float(row, "pred_power", n, require_pred)
        out.append((rec, None if pred is None else NetPower(pred, meridian)))
    return out


def load_predictions(path, meridian: float = 0.0) -> dict:
    """``{(session_id, eye): NetPower}`` from a ``session_id,eye,pred_power`` CSV."""
    header, rows = _rows(path)
    missing = [c for c in ("session_id", "eye", "pred_power") if c not in header]
    if missing:
        raise ParseError(f"{path}: missing columns {missing}", row=1)
    out = {}
    for n, row in rows:
        key = (row.get("session_id", ""), _eye(row, n))
        if not key[0]:
            raise ParseError("empty session_id", row=n)
        if key in out:
            raise ParseError(f"duplicate prediction for {key}", row=n)
        out[key] = NetPower(_float(row, "pred_power", n), meridian)
    return out


def join_predictions(records: list, predictions: dict) -> list:
    """Replace each record's prediction with the one keyed by ``(session_id, eye)``.

    Records without a prediction are dropped; predictions without a record
    raise :class:`ParseError`.
    """
    keys = {rec.key for rec, _ in records}
    orphans = sorted(set(predictions) - keys)
    if orphans:
        raise ParseError(f"predictions without ground truth: {orphans[:5]}")
    return [(rec, predictions[rec.key]) for rec, _ in records if rec.key in predictions]


def write_dataset(path, pairs) -> None:
    """Inverse of :func:`load_dataset` for the required columns plus age/dilated."""
    cols = list(REQUIRED_COLUMNS) + ["age", "dilated"]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec, pred in pairs:
            rx = rec.subjective
            w.writerow([
                rec.session_id,
                rec.eye,
                repr(rx.sphere),
                repr(rx.cylinder),
                repr(rx.axis),
                "" if pred is None else repr(float(pred)),
                "" if rec.age is None else repr(rec.age),
                "" if rec.dilated is None else str(rec.dilated).lower(),
            ])
