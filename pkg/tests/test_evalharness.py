import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from retinoscopy.errors import DegenerateVariance, EmptyInput, ParseError
from retinoscopy.evalharness import (
    bland_altman,
    bland_altman_csv,
    class_metrics,
    evaluate,
    join_predictions,
    limits_of_agreement,
    load_dataset,
    load_predictions,
    mae_stats,
    pct_within,
    pearson,
    write_dataset,
    write_metrics,
)
from retinoscopy.optics import NetPower, RefractiveClass as RC, classify

HEADER = "session_id,eye,sph,cyl,axis,pred_power"
powers = st.floats(-10, 10, allow_nan=False).map(lambda v: round(v, 2))


def write(tmp_path, text, name="truth.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---- statistics ----


def test_mae_examples():
    assert mae_stats([1, 2], [1, 2]) == (0.0, 0.0)
    assert mae_stats([1, -1], [0, 0]) == (1.0, 0.0)
    assert mae_stats([0, 2], [0, 0]) == (1.0, 1.0)
    assert mae_stats([0, 2], [0, 0], ddof=1)[1] == pytest.approx(np.sqrt(2))


def test_mae_empty():
    with pytest.raises(EmptyInput):
        mae_stats([], [])


def test_bland_altman_examples():
    assert bland_altman([1, 2, 3], [1, 2, 3]) == (0.0, 0.0, 0.0, 0.0)
    assert bland_altman([2, 3], [1, 2]) == (1.0, 0.0, 1.0, 1.0)
    m, s, lo, hi = limits_of_agreement(0.5, 0.9)
    assert (round(lo, 3), round(hi, 3)) == (-1.264, 2.264)
    with pytest.raises(EmptyInput):
        bland_altman([1], [0])


def test_bland_altman_uses_sample_sd(rng):
    p, t = rng.normal(size=30), rng.normal(size=30)
    m, s, lo, hi = bland_altman(p, t)
    assert s == pytest.approx(np.std(p - t, ddof=1))


def test_pearson_examples(rng):
    x = rng.normal(size=20)
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    assert pearson([0, 1, 2], [0, 2, 1]) == pytest.approx(0.5)
    y = x + rng.normal(size=20)
    assert pearson(x, y) == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-12)
    with pytest.raises(DegenerateVariance):
        pearson([1, 1, 1], [0, 1, 2])


def test_pct_within_boundaries():
    assert pct_within([0.5, 1.0, 1.5], [0, 0, 0], 0.5) == pytest.approx(100 / 3)
    assert pct_within([0.5, 1.0, 1.5], [0, 0, 0], 1.0) == pytest.approx(200 / 3)


def test_class_metrics_hand_counts():
    truth = [RC.NORMAL] * 3 + [RC.MODERATE_MYOPIA]
    pred = [RC.NORMAL, RC.NORMAL, RC.MODERATE_MYOPIA, RC.MODERATE_MYOPIA]
    cm = class_metrics(pred, truth)
    assert cm.per_class["normal"]["sensitivity"] == pytest.approx(200 / 3)
    assert cm.per_class["normal"]["specificity"] == 100.0
    assert cm.per_class["moderate_myopia"]["sensitivity"] == 100.0
    assert cm.per_class["moderate_myopia"]["specificity"] == pytest.approx(200 / 3)
    assert cm.binary["sensitivity"] == 100.0 and cm.binary["specificity"] == pytest.approx(200 / 3)
    # truth rows, pred columns
    assert cm.confusion[2][3] == 1 and cm.confusion[2][2] == 2


def test_class_metrics_perfect_and_absent():
    labels = [RC.HIGH_MYOPIA, RC.NORMAL, RC.MODERATE_HYPEROPIA, RC.MODERATE_MYOPIA]
    cm = class_metrics(labels, labels)
    for name in ("high_myopia", "normal", "moderate_hyperopia", "moderate_myopia"):
        assert cm.per_class[name]["sensitivity"] == 100.0
        assert cm.per_class[name]["specificity"] == 100.0
    hh = cm.per_class["high_hyperopia"]
    assert hh["absent"] and hh["sensitivity"] is None and hh["specificity"] == 100.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(powers, powers), min_size=2, max_size=30), st.randoms())
def test_properties(pairs, rnd):
    pred, truth = [p for p, _ in pairs], [t for _, t in pairs]
    assert mae_stats(pred, truth) == mae_stats(truth, pred)
    assert pct_within(pred, truth, 0.5) <= pct_within(pred, truth, 1.0)
    m, s, lo, hi = bland_altman(pred, truth)
    assert hi - lo == pytest.approx(2 * 1.96 * s, abs=1e-12)
    cp, ct = [classify(v).label for v in pred], [classify(v).label for v in truth]
    order = list(range(len(pairs)))
    rnd.shuffle(order)
    a = class_metrics(cp, ct).to_dict()
    b = class_metrics([cp[i] for i in order], [ct[i] for i in order]).to_dict()
    assert a == b


# ---- ingestion ----


def test_load_dataset_net_power(tmp_path):
    p = write(tmp_path, f"# comment\n{HEADER}\ns1,OD,-1.0,-2.0,90,-2.75\ns1,left,-1.0,-2.0,180,-1.0\n")
    pairs = load_dataset(p)
    (r1, p1), (r2, p2) = pairs
    assert r1.eye == "right" and r2.eye == "left"
    # axis 90: the full cylinder acts on the horizontal meridian
    assert r1.net_power().value == pytest.approx(-3.0)
    assert r2.subjective.axis == 0.0 and r2.net_power().value == pytest.approx(-1.0)
    assert float(p1) == -2.75


@pytest.mark.parametrize(
    "body,row",
    [
        ("s1,OD,x,0,0,1\n", 2),
        ("s1,OD,0,0,0,1\ns2,up,0,0,0,1\n", 3),
        ("s1,OD,0,0,0,1\ns1,OD,0,0,0,2\n", 3),
        ("s1,OD,0,0,200,1\n", 2),
        ("s1,OD,0,0,0,\n", 2),
        (",OD,0,0,0,1\n", 2),
    ],
)
def test_parse_errors_carry_row(tmp_path, body, row):
    p = write(tmp_path, HEADER + "\n" + body)
    with pytest.raises(ParseError) as exc:
        load_dataset(p)
    assert exc.value.row == row


def test_header_errors(tmp_path):
    with pytest.raises(ParseError) as exc:
        load_dataset(write(tmp_path, "session_id,eye,sph\n"))
    assert exc.value.row == 1
    with pytest.raises(ParseError):
        load_dataset(write(tmp_path, HEADER + ",colour\n"))
    with pytest.raises(ParseError):
        load_dataset(write(tmp_path, ""))


def test_optional_columns(tmp_path):
    text = HEADER + ",ar_sph,ar_cyl,ar_axis,age,dilated\ns1,OD,1,0,0,1,1.25,-0.5,10,7,yes\ns2,OS,0,0,0,0,,,,,\n"
    (r1, _), (r2, _) = load_dataset(write(tmp_path, text))
    assert r1.autorefractor.sphere == 1.25 and r1.age == 7.0 and r1.dilated is True
    assert r2.autorefractor is None and r2.dilated is None


def test_predictions_join(tmp_path):
    truth = write(tmp_path, "session_id,eye,sph,cyl,axis\ns1,OD,-1,0,0\ns2,OD,1,0,0\n")
    preds = write(tmp_path, "session_id,eye,pred_power\ns1,r,-1.5\n", "pred.csv")
    recs = load_dataset(truth, require_pred=False)
    assert [p for _, p in recs] == [None, None]
    joined = join_predictions(recs, load_predictions(preds))
    assert len(joined) == 1 and float(joined[0][1]) == -1.5
    with pytest.raises(ParseError):
        join_predictions(recs, {("s9", "right"): NetPower(0.0)})


def test_dataset_roundtrip(tmp_path):
    p = write(tmp_path, f"{HEADER},age,dilated\ns1,right,-1.25,-0.5,45,-1.5,30,false\n")
    pairs = load_dataset(p)
    out = tmp_path / "again.csv"
    write_dataset(out, pairs)
    assert load_dataset(out) == pairs


# ---- reports ----


def test_evaluate_and_write(tmp_path):
    text = HEADER + "\n" + "".join(
        f"s{i},OD,{t},0,0,{p}\n" for i, (p, t) in enumerate([(-2.0, -2.5), (0.5, 0.0), (1.5, 1.0), (-5.0, -4.25)])
    )
    report = evaluate(load_dataset(write(tmp_path, text)))
    assert report.n == 4
    assert report.mae == pytest.approx(0.5625)
    assert report.pct_within_0_5 == 75.0 and report.pct_within_1_0 == 100.0
    write_metrics(report, tmp_path / "out" / "metrics.json")
    data = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert data["schema_version"] == 1 and data["std_kind"] == "population"
    assert data["classes"]["per_class"]["high_hyperopia"]["sensitivity"] is None
    lines = (tmp_path / "out" / "bland_altman.csv").read_text().splitlines()
    assert lines[0] == "# schema_version=1"
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    assert len(rows) == 4 and float(rows[0]["diff"]) == pytest.approx(0.5)
    assert bland_altman_csv(report) == (tmp_path / "out" / "bland_altman.csv").read_text()


def test_evaluate_constant_predictions_null_pearson(tmp_path):
    text = HEADER + "\ns1,OD,-1,0,0,0\ns2,OD,1,0,0,0\n"
    report = evaluate(load_dataset(write(tmp_path, text)))
    assert report.pearson_r is None
    assert json.loads(report.to_json())["pearson_r"] is None


def test_evaluate_single_pair_has_null_agreement(tmp_path):
    report = evaluate(load_dataset(write(tmp_path, HEADER + "\ns1,OD,-1,0,0,0\n")))
    assert report.bland_altman["sd_diff"] is None
    with pytest.raises(ValueError):
        evaluate(load_dataset(write(tmp_path, HEADER + "\ns1,OD,-1,0,0,0\n")), std="bogus")
