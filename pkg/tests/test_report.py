import json
import os

import numpy as np
import pytest

from actdiag.corpus import load_vocabulary
from actdiag.metrics import weighted_classification_map
from actdiag.report import (RunConfig, bootstrap_map_ci, main, run_report,
                            suggest)
from actdiag.stats import bootstrap_ci

VOCAB_TEXT = """class_id,verb_id,object_id,description
c000,v00,o00,hold cup
c001,v01,o00,drink from cup
c002,v00,o01,hold broom
c003,v02,o02,open door
"""

TEST_ANN = """video_id,duration,actions
V0,10.0,c000 1 4;c001 5 9
V1,10.0,c001 0 6
V2,10.0,c002 2 8
V3,10.0,c003 1 9
V4,10.0,c000 0 5;c002 6 9
V5,10.0,c001 2 7;c003 0 3
"""

TRAIN_ANN = """video_id,duration,actions
T0,10.0,c000 1 4;c001 5 9
T1,10.0,c001 0 6
T2,10.0,c002 2 8
T3,10.0,c003 1 9
T4,10.0,c000 0 5
T5,10.0,c002 1 4;c003 5 9
"""

REANN = """video_id,duration,actions
V0,10.0,c000 1.2 4.1;c001 4.8 9
V1,10.0,c001 0 5.5
V2,10.0,c002 2.4 8.2
V3,10.0,c003 1 8.6
V4,10.0,c000 0 5.2;c002 6.1 9
V5,10.0,c001 2 7;c003 0 3.3
"""


def _write_corpus(tmp_path, seed=0):
    rng = np.random.default_rng(seed)
    paths = {}
    for name, text in [("vocab.csv", VOCAB_TEXT), ("test.csv", TEST_ANN),
                       ("train.csv", TRAIN_ANN), ("reann.csv", REANN)]:
        p = tmp_path / name
        p.write_text(text)
        paths[name] = str(p)

    vids = [f"V{i}" for i in range(6)]
    lines = ["#fps=1.0"]
    for vid in vids:
        for t in range(10):
            scores = " ".join(repr(float(s)) for s in rng.random(4))
            lines.append(f"{vid} {t} {scores}")
    p = tmp_path / "cnn.txt"
    p.write_text("\n".join(lines) + "\n")
    paths["cnn"] = str(p)

    lines = [f"{vid} " + " ".join(repr(float(s)) for s in rng.random(4))
             for vid in vids]
    p = tmp_path / "svm.txt"
    p.write_text("\n".join(lines) + "\n")
    paths["svm"] = str(p)

    aux = []
    pose = [[0.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 0.0, 1.0]]
    for vid in vids + [f"T{i}" for i in range(6)]:
        for t in (2.0, 7.0):
            aux.append(json.dumps({
                "video_id": vid, "frame_time": t,
                "person_box": [0, 0, 40, 100 + 10 * (t == 7.0)],
                "person_count": 1, "motion": float(rng.random()),
                "pose": pose}))
    p = tmp_path / "aux.jsonl"
    p.write_text("\n".join(aux) + "\n")
    paths["aux"] = str(p)
    return paths


def _config(tmp_path, paths, out="diag", **kw):
    base = dict(vocab=paths["vocab.csv"], test=paths["test.csv"],
                train=paths["train.csv"],
                predictions={"cnn": paths["cnn"], "svm": paths["svm"]},
                aux=paths["aux"], reannotations=paths["reann.csv"],
                bootstrap_resamples=200, permutations=200,
                out=str(tmp_path / out))
    base.update(kw)
    return RunConfig(**base)


def test_run_report_writes_bundle(tmp_path):
    paths = _write_corpus(tmp_path)
    config = _config(tmp_path, paths)
    report = run_report(config)
    out = config.out
    assert os.path.exists(os.path.join(out, "report.json"))
    assert os.path.exists(os.path.join(out, "summary.md"))
    with open(os.path.join(out, "report.json")) as f:
        loaded = json.load(f)
    assert set(loaded["evaluation"]) == {"cnn", "svm"}
    ev = loaded["evaluation"]["cnn"]
    assert 0 <= ev["classification_map"] <= 1
    assert ev["classification_map_ci"][0] <= ev["classification_map_ci"][1]
    assert "localization_map" in ev
    assert loaded["evaluation"]["svm"]["localization"].startswith("skipped")
    assert "object" in loaded["oracles"]["single"]
    assert "temporal" in loaded["oracles"]["single"]
    assert loaded["oracles"]["single"]["object"] > ev["classification_map"]
    assert any(k.startswith("temporal+") for k in loaded["oracles"]["combined"])
    # every table named in the report exists on disk
    for fname in ("classification_cnn.csv", "localization_cnn.csv",
                  "boundary_excluded_cnn.csv", "errors_cnn.csv",
                  "confusion_svm.csv", "category_attributes.csv",
                  "video_attributes.csv", "agreement.csv", "overlap.csv",
                  "sweep_cnn.csv", "context_svm.csv", "oracle_eval.csv",
                  "suggestions.csv", "perfect_classifier_localization.csv"):
        assert os.path.exists(os.path.join(out, fname)), fname
    assert report["agreement"]["iou"]["mean"] > 0.5


def test_run_report_deterministic(tmp_path):
    paths = _write_corpus(tmp_path)
    run_report(_config(tmp_path, paths, out="a"))
    run_report(_config(tmp_path, paths, out="b"))
    a_dir, b_dir = str(tmp_path / "a"), str(tmp_path / "b")
    files = sorted(os.listdir(a_dir))
    assert files == sorted(os.listdir(b_dir))
    for f in files:
        with open(os.path.join(a_dir, f), "rb") as fa, \
             open(os.path.join(b_dir, f), "rb") as fb:
            assert fa.read() == fb.read(), f


def test_run_report_worker_count_does_not_change_output(tmp_path):
    paths = _write_corpus(tmp_path)
    run_report(_config(tmp_path, paths, out="w1", workers=1))
    run_report(_config(tmp_path, paths, out="w4", workers=4))
    for f in sorted(os.listdir(tmp_path / "w1")):
        with open(tmp_path / "w1" / f, "rb") as fa, \
             open(tmp_path / "w4" / f, "rb") as fb:
            assert fa.read() == fb.read(), f


def test_run_report_graceful_without_optional_inputs(tmp_path):
    paths = _write_corpus(tmp_path)
    config = _config(tmp_path, paths, train=None, aux=None,
                     reannotations=None, out="min")
    report = run_report(config)
    assert report["agreement"] == "skipped: no re-annotations"
    assert report["overlap"] == "skipped: no training annotations"
    assert report["oracles"]["single"]["temporal"].startswith("skipped")
    assert "object" in report["oracles"]["single"]


def test_run_report_skips_undersized_clustering(tmp_path):
    # six training videos cannot support k=30/50 intent clusters or 500
    # pose clusters; those oracles must degrade to markers, not errors
    paths = _write_corpus(tmp_path)
    report = run_report(_config(tmp_path, paths, out="sk"))
    single = report["oracles"]["single"]
    assert single["intent30"].startswith("skipped")
    assert single["intent50"].startswith("skipped")
    assert single["pose"].startswith("skipped")


def test_run_report_small_intent_k_runs(tmp_path):
    paths = _write_corpus(tmp_path)
    report = run_report(_config(tmp_path, paths, out="ik", intent_ks=(2,)))
    assert isinstance(report["oracles"]["single"]["intent2"], float)


def test_config_rejects_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        RunConfig(vocab=str(tmp_path / "nope.csv"), test=str(tmp_path / "nope2"))


def test_bootstrap_map_ci_matches_generic_bootstrap():
    rng = np.random.default_rng(0)
    n = 30
    scores = rng.random((n, 4))
    labels = rng.random((n, 4)) < 0.4
    labels[0] = True

    def stat(idx):
        w = np.bincount(np.asarray(idx, int), minlength=n)
        return weighted_classification_map(scores, labels, w)

    lo_ref, hi_ref, _ = bootstrap_ci(np.arange(n), stat, b=200, seed=5)
    lo, hi = bootstrap_map_ci(scores, labels, b=200, seed=5)
    assert lo == lo_ref and hi == hi_ref


def test_bootstrap_map_ci_worker_invariant():
    rng = np.random.default_rng(1)
    scores = rng.random((25, 3))
    labels = rng.random((25, 3)) < 0.4
    labels[0] = True
    a = bootstrap_map_ci(scores, labels, b=200, seed=2, workers=1, chunk=30)
    b = bootstrap_map_ci(scores, labels, b=200, seed=2, workers=5, chunk=30)
    assert a == b


def test_suggest_rules_trigger():
    report = {
        "evaluation": {"m": {"classification_map": 0.3,
                             "localization_map": 0.2,
                             "boundary_excluded_map": 0.25}},
        "correlations": {"m": [{"attribute": "object_complexity",
                                "rho": -0.5, "p": 0.01, "n": 20}]},
        "smoothing_sweep": {"m": {"best_fraction": 0.04}},
        "video_curves": {"m:person_size": [{"map": 0.1}, {"map": 0.5},
                                           {"map": 0.2}]},
        "oracles": {"combined": {"temporal+m": 0.5}},
    }
    rules = {r["rule"]: r["triggered"] for r in suggest(report)}
    assert rules == {"boundary_sensitivity": True, "object_confusion": True,
                     "temporal_aggregation": True, "person_crop": True,
                     "sequence_modeling": True}


def test_suggest_rules_not_triggered():
    report = {
        "evaluation": {"m": {"classification_map": 0.3,
                             "localization_map": 0.2,
                             "boundary_excluded_map": 0.205}},
        "correlations": {"m": [{"attribute": "object_complexity",
                                "rho": 0.1, "p": 0.5, "n": 20}]},
        "smoothing_sweep": {"m": {"best_fraction": 0.0}},
        "video_curves": {"m:person_size": [{"map": 0.5}, {"map": 0.2},
                                           {"map": 0.1}]},
        "oracles": {"combined": {"temporal+m": 0.31}},
    }
    assert not any(r["triggered"] for r in suggest(report))


def test_cli_eval_and_report(tmp_path, capsys):
    paths = _write_corpus(tmp_path)
    rc = main(["eval", "--vocab", paths["vocab.csv"], "--test",
               paths["test.csv"], "--pred", f"cnn={paths['cnn']}"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "classification mAP" in out and "localization mAP" in out

    rc = main(["report", "--vocab", paths["vocab.csv"], "--test",
               paths["test.csv"], "--train", paths["train.csv"],
               "--pred", f"svm={paths['svm']}", "--bootstrap", "200",
               "--out", str(tmp_path / "cli_out")])
    assert rc == 0
    assert os.path.exists(tmp_path / "cli_out" / "report.json")


def test_cli_validate_and_context(tmp_path, capsys):
    paths = _write_corpus(tmp_path)
    rc = main(["validate", "--vocab", paths["vocab.csv"], "--test",
               paths["test.csv"], "--pred", f"svm={paths['svm']}",
               "--aux", paths["aux"]])
    assert rc == 0
    assert "auxiliary coverage" in capsys.readouterr().out
    rc = main(["context", "--vocab", paths["vocab.csv"], "--test",
               paths["test.csv"], "--pred", f"svm={paths['svm']}"])
    assert rc == 0
    assert "context benefit" in capsys.readouterr().out


def test_cli_rejects_bad_pred_argument(tmp_path):
    paths = _write_corpus(tmp_path)
    with pytest.raises(SystemExit):
        main(["eval", "--vocab", paths["vocab.csv"], "--test",
              paths["test.csv"], "--pred", "no-equals-sign"])
