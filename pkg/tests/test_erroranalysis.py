import numpy as np
import pytest

from actdiag.corpus import (ActivityInstance, FramePredictions,
                            VideoAnnotation, VideoPredictions,
                            load_vocabulary)
from actdiag.erroranalysis import (LABELS, ablation_delta,
                                   classify_top_predictions, confusion_csv,
                                   cross_confusion)

VOCAB = load_vocabulary("""class_id,verb_id,object_id,description
c000,v00,o00,hold cup
c001,v01,o00,drink from cup
c002,v00,o01,hold broom
c003,v02,o02,open door
""")


def ann(vid, duration, *insts):
    return VideoAnnotation(vid, duration,
                           tuple(ActivityInstance(c, s, e) for c, s, e in insts))


def test_labels_order():
    assert LABELS == ("tp", "bnd", "obj", "vrb", "oth", "fp")


def _typed_corpus():
    # one 25-sample video engineered so each error type appears for c000:
    # c000 active [4,6]; boundary [3.33,4.67] u [5.33,6.67];
    # c001 (same object) [10,12]; c002 (same verb) [14,16];
    # c003 (unrelated) [18,20]; nothing at all near t=22.
    anns = [ann("V1", 25.0,
                ("c000", 4.0, 6.0), ("c001", 10.0, 12.0),
                ("c002", 14.0, 16.0), ("c003", 18.0, 20.0))]
    times = (np.arange(25) + 0.5)
    scores = np.zeros((25, len(VOCAB)))
    # let c000's ranking walk through the types: a tp, a bnd, an obj,
    # a vrb, an oth, and a plain fp frame
    scores[4, 0] = 1.0    # t=4.5 inside instance -> tp
    scores[3, 0] = 0.9    # t=3.5 in boundary region -> bnd
    scores[10, 0] = 0.8   # t=10.5 inside c001 (shares o00) -> obj
    scores[14, 0] = 0.7   # t=14.5 inside c002 (shares v00) -> vrb
    scores[18, 0] = 0.6   # t=18.5 inside c003 -> oth
    scores[22, 0] = 0.5   # t=22.5 inside nothing -> fp
    return anns, [FramePredictions("V1", times, scores)]


def test_classify_top_predictions_each_type():
    anns, preds = _typed_corpus()
    res = classify_top_predictions(preds, anns, VOCAB, top_n=6)
    assert res.mask[0]
    assert res.top_n[0] == 6
    assert np.allclose(res.fractions[0], [1 / 6] * 6)


def test_classify_top_predictions_default_top_n_is_positive_count():
    anns, preds = _typed_corpus()
    res = classify_top_predictions(preds, anns, VOCAB)
    # c000 has 2 positive sampled frames (t=4.5, 5.5)
    assert res.top_n[0] == 2
    assert res.fractions[0][0] == pytest.approx(0.5)   # tp at rank 1
    assert res.fractions[0][1] == pytest.approx(0.5)   # bnd at rank 2


def test_classify_fractions_sum_to_one():
    anns, preds = _typed_corpus()
    res = classify_top_predictions(preds, anns, VOCAB, top_n=10)
    for c in np.flatnonzero(res.mask):
        assert res.fractions[c].sum() == pytest.approx(1.0, abs=1e-9)


def test_classify_precedence_tp_over_boundary():
    # a frame inside the instance is tp even though instances of the same
    # class elsewhere put it inside their boundary region
    anns = [ann("V1", 10.0, ("c000", 2.0, 8.0))]
    times = (np.arange(25) + 0.5) * 10.0 / 25
    scores = np.zeros((25, len(VOCAB)))
    scores[:, 0] = np.linspace(1, 0.5, 25)
    preds = [FramePredictions("V1", times, scores)]
    res = classify_top_predictions(preds, anns, VOCAB, top_n=25)
    f = res.fractions[0]
    in_inst = ((times >= 2.0) & (times <= 8.0)).sum()
    assert f[0] == pytest.approx(in_inst / 25)
    assert f[0] + f[1] + f[5] == pytest.approx(1.0)


def test_cross_confusion_hand():
    anns = [ann("V1", 10.0, ("c001", 0.0, 5.0)),
            ann("V2", 10.0, ("c000", 0.0, 5.0)),
            ann("V3", 10.0, ("c001", 0.0, 5.0), ("c000", 6.0, 8.0))]
    preds = [VideoPredictions("V1", np.array([0.4, 0.9, 0.1, 0.0])),
             VideoPredictions("V2", np.array([0.8, 0.2, 0.1, 0.0])),
             VideoPredictions("V3", np.array([0.7, 0.8, 0.1, 0.0]))]
    mat = cross_confusion(preds, anns, VOCAB)
    # score of c000 on videos with c001 but not c000: just V1 -> 0.4
    assert mat[0, 1] == pytest.approx(0.4)
    # score of c001 on videos with c000 but not c001: just V2 -> 0.2
    assert mat[1, 0] == pytest.approx(0.2)
    assert np.isnan(mat[0, 0])
    # no video contains c003, so column 3 is undefined
    assert np.all(np.isnan(mat[:, 3]))


def test_confusion_csv_shape():
    anns = [ann("V1", 10.0, ("c000", 0.0, 5.0))]
    preds = [VideoPredictions("V1", np.array([0.5, 0.1, 0.2, 0.3]))]
    csv = confusion_csv(cross_confusion(preds, anns, VOCAB), VOCAB)
    lines = csv.splitlines()
    assert lines[0] == "class_id,c000,c001,c002,c003"
    assert len(lines) == len(VOCAB) + 1


def test_ablation_delta_sign():
    anns = [ann("V1", 10.0, ("c000", 0.0, 5.0)),
            ann("V2", 10.0, ("c001", 0.0, 5.0))]
    good = [VideoPredictions("V1", np.array([0.9, 0.1, 0.0, 0.0])),
            VideoPredictions("V2", np.array([0.1, 0.9, 0.0, 0.0]))]
    bad = [VideoPredictions("V1", np.array([0.1, 0.9, 0.0, 0.0])),
           VideoPredictions("V2", np.array([0.9, 0.1, 0.0, 0.0]))]
    res = ablation_delta(bad, good, anns, VOCAB)
    assert res.mean_b > res.mean_a
    assert all(d > 0 for _, d in res.best)


def test_ablation_delta_rejects_video_mismatch():
    anns = [ann("V1", 10.0, ("c000", 0.0, 5.0))]
    a = [VideoPredictions("V1", np.zeros(4))]
    b = [VideoPredictions("V9", np.zeros(4))]
    with pytest.raises(ValueError):
        ablation_delta(a, b, anns, VOCAB)
