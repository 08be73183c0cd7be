"""Command-line entry point: ``synth``, ``analyze``, ``eval`` and ``sweep``.

Exit codes: 0 on success, 1 for usage, configuration or input errors, 2 when
the analysis ran but could not produce a measurement (the report then
carries a machine-readable ``error``).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigInvalid, EmptyInput, ParseError, RetinoscopyError
from .optics import SINGULARITY_BAND, OpticalSetup, operating_curve

log = logging.getLogger("retinoscopy")

SCHEMA_VERSION = 1
RUN_META = "run_meta.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def parse_value(raw: str):
    """JSON when it parses (numbers, booleans, lists, null), the raw string otherwise."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` overrides to a nested dict; every key must already exist."""
    out = copy.deepcopy(config)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigInvalid(f"override {item!r} is not key=value")
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node or not isinstance(node[part], dict):
                raise ConfigInvalid(f"unknown config key {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigInvalid(f"unknown config key {key!r}")
        node[parts[-1]] = parse_value(raw)
    return out


def _read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise EmptyInput(f"{path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: expected a JSON object")
    return data


def _config_from(path, command: str) -> dict:
    """A plain config file, or the ``config`` section of a previous run's meta file."""
    if path is None:
        return {}
    data = _read_json(path)
    if "command" in data and "config" in data:
        if data["command"] != command:
            raise ConfigInvalid(f"{path} records a {data['command']!r} run, not {command!r}")
        return data["config"]
    return data


def write_run_meta(out_dir, command: str, config: dict, inputs: dict) -> None:
    # jobs is deliberately absent: it never changes the outputs
    meta = {
        "schema_version": SCHEMA_VERSION,
        "tool": "retinoscopy",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": inputs,
    }
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    (Path(out_dir) / RUN_META).write_text(_dump(meta))


def cmd_synth(args) -> int:
    from .synthcam import SceneConfig, write_session

    base = SceneConfig.from_dict(_config_from(args.config, "synth")).to_dict()
    resolved = apply_overrides(base, args.set)
    cfg = SceneConfig.from_dict(resolved)
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise ConfigInvalid(f"{out} exists and is not a directory")
    resolved = cfg.to_dict()
    write_run_meta(out, "synth", resolved, {"config": None if args.config is None else str(args.config)})
    gt = write_session(cfg, out, jobs=args.jobs)
    log.info("wrote %d frames to %s (true power %+.3f D, r %.6f)", cfg.n_frames, out, gt.true_power, gt.true_ratio)
    return 0


def cmd_analyze(args) -> int:
    from .pipeline import AnalysisConfig, analyze_session, write_outputs

    session = Path(args.session)
    if not session.is_dir():
        raise EmptyInput(f"{session} is not a directory")
    base = AnalysisConfig.from_dict(_config_from(args.config, "analyze")).to_dict()
    cfg = AnalysisConfig.from_dict(apply_overrides(base, args.set))
    out = Path(args.out)
    detections = Path(args.detections) if args.detections else out.with_name("detections.csv")
    report, dets = analyze_session(session, cfg, jobs=args.jobs)
    write_outputs(report, dets, out, detections)
    write_run_meta(out.parent, "analyze", cfg.to_dict(), {"session": str(session)})
    if not report.ok:
        log.error("analysis failed: %s", report.error["message"])
        return 2
    log.info("net power %+.3f D (%s)", report.net_power, report.screening["label"])
    return 0


def cmd_eval(args) -> int:
    from .evalharness import evaluate, join_predictions, load_dataset, load_predictions, write_metrics

    pairs = load_dataset(args.truth, require_pred=args.pred is None)
    if args.pred is not None:
        pairs = join_predictions(pairs, load_predictions(args.pred))
    report = evaluate(pairs, std=args.std)
    out = Path(args.out)
    write_metrics(report, out)
    write_run_meta(
        out.parent,
        "eval",
        {"std": args.std},
        {"truth": str(args.truth), "pred": None if args.pred is None else str(args.pred)},
    )
    log.info("n=%d mae %.3f +/- %.3f D", report.n, report.mae, report.mae_std)
    return 0


def parse_range(text: str) -> tuple:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigInvalid(f"range {text!r} is not lo:hi") from None
    if not hi > lo:
        raise ConfigInvalid("range upper bound must exceed the lower bound")
    return lo, hi


def parse_floats(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigInvalid(f"{text!r} is not a comma-separated list of numbers") from None
    if not values:
        raise ConfigInvalid("empty list")
    return values


def sweep_csv(u: float, distances, p_min: float, p_max: float, step: float, band: float = SINGULARITY_BAND) -> str:
    """Operating curves as CSV.

    One row per grid sample; samples inside the singularity band are
    ``excluded`` with an empty ratio, and each curve also carries one
    ``singularity`` row at ``P = -1/d`` when that lies in range.
    """
    n = int(round((p_max - p_min) / step)) + 1
    if n < 2:
        raise ConfigInvalid("step too large for the range")
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    buf.write(f"# samples within {band} D of P = -1/d are excluded; flag=singularity marks P = -1/d\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u_m", "d_m", "power_d", "ratio", "flag"])
    for d in distances:
        curve = operating_curve(OpticalSetup(u=u, d=d), p_min, p_max, n, band)
        rows = []
        for s in curve.samples:
            p = round(s.power, 10) + 0.0
            rows.append((p, "" if s.ratio is None else repr(s.ratio), "excluded" if s.excluded else ""))
        if p_min <= curve.singularity <= p_max:
            rows.append((curve.singularity, "", "singularity"))
        rows.sort(key=lambda row: (row[0], row[2] != "singularity"))
        for p, r, flag in rows:
            w.writerow([repr(u), repr(d), repr(p), r, flag])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    distances = parse_floats(args.d)
    p_min, p_max = parse_range(args.range)
    if args.u <= 0 or any(d <= 0 for d in distances) or args.step <= 0:
        raise ConfigInvalid("u, d and step must be positive")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep_csv(args.u, distances, p_min, p_max, args.step))
    write_run_meta(
        out.parent,
        "sweep",
        {"u": args.u, "d": distances, "range": [p_min, p_max], "step": args.step, "band": SINGULARITY_BAND},
        {},
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="retinoscopy", description="Refractive error estimation from streak retinoscopy videos.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, jobs=True):
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted-key config override")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker threads (output does not depend on it)")

    s = sub.add_parser("synth", help="render a synthetic session directory")
    s.add_argument("--config", help="scene JSON (or a previous run_meta.json)")
    s.add_argument("--out", required=True, help="session directory to create")
    common(s)
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("analyze", help="estimate net power from a session directory")
    a.add_argument("--session", required=True)
    a.add_argument("--out", required=True, help="report JSON path")
    a.add_argument("--config", help="analysis JSON (or a previous run_meta.json)")
    a.add_argument("--detections", help="per-frame CSV path (default: detections.csv next to the report)")
    common(a)
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("eval", help="agreement and screening metrics")
    e.add_argument("--truth", required=True, help="ground-truth CSV")
    e.add_argument("--pred", help="predictions CSV (session_id,eye,pred_power); default: truth's pred_power column")
    e.add_argument("--out", required=True, help="metrics JSON path")
    e.add_argument("--std", choices=("population", "sample"), default="population")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", help="operating curves r(P) for several working distances")
    w.add_argument("--u", type=float, default=0.4)
    w.add_argument("--d", default="0.2,0.4,0.66", help="comma-separated working distances (m)")
    w.add_argument("--range", default="-6:3", help="power range lo:hi (D)")
    w.add_argument("--step", type=float, default=0.01)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)
    return p


def _fix_negative_values(argv):
    # "--range -6:3" would otherwise be read as an unknown option
    out = list(argv)
    for i, tok in enumerate(out[:-1]):
        if tok in ("--range", "--d") and out[i + 1].startswith("-"):
            out[i] = f"{tok}={out[i + 1]}"
            out[i + 1] = None
    return [t for t in out if t is not None]


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_fix_negative_values(argv))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"retinoscopy: error: {exc}", file=sys.stderr)
        return 1
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        print("retinoscopy: error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigInvalid, EmptyInput, ParseError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"retinoscopy: error: {exc}", file=sys.stderr)
        return 1
    except RetinoscopyError as exc:
        print(f"retinoscopy: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"retinoscopy: error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    # console-script wrappers pass the return value to sys.exit
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
