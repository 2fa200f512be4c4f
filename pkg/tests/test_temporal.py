import numpy as np
import pytest

from actdiag.corpus import (ActivityInstance, FramePredictions,
                            VideoAnnotation, load_vocabulary)
from actdiag.temporal import (context_benefit, overlap_stats,
                              smooth_predictions, smoothing_sweep)

VOCAB = load_vocabulary("""class_id,verb_id,object_id,description
c000,v00,o00,hold cup
c001,v01,o00,drink from cup
c002,v00,o01,hold broom
""")


def ann(vid, duration, *insts):
    return VideoAnnotation(vid, duration,
                           tuple(ActivityInstance(c, s, e) for c, s, e in insts))


def _preds(n=20, duration=10.0, seed=0):
    rng = np.random.default_rng(seed)
    times = np.linspace(0, duration, n, endpoint=False)
    return FramePredictions("V1", times, rng.random((n, len(VOCAB))))


def test_smooth_zero_fraction_is_identity():
    p = _preds()
    out = smooth_predictions(p, 0.0, 10.0)
    assert np.array_equal(out.scores, p.scores)
    assert out.scores is not p.scores


def test_smooth_window_one_frame_is_identity():
    p = _preds()
    out = smooth_predictions(p, 0.01, 10.0)   # 0.1 s window < one 0.5 s frame
    assert np.array_equal(out.scores, p.scores)


def test_smooth_hand_window_three():
    times = np.arange(10, dtype=float)
    scores = np.zeros((10, 1))
    scores[5, 0] = 1.0
    p = FramePredictions("V1", times, scores)
    out = smooth_predictions(p, 0.3, 10.0)    # 3 s / 1 s period -> 3 frames
    want = np.zeros(10)
    want[4:7] = 1 / 3
    assert np.allclose(out.scores[:, 0], want)


def test_smooth_truncates_at_the_ends():
    times = np.arange(10, dtype=float)
    scores = np.zeros((10, 1))
    scores[0, 0] = 1.0
    p = FramePredictions("V1", times, scores)
    out = smooth_predictions(p, 0.3, 10.0)
    # first frame averages only itself and its right neighbor
    assert out.scores[0, 0] == pytest.approx(1 / 2)
    assert out.scores[1, 0] == pytest.approx(1 / 3)
    assert out.scores[2, 0] == pytest.approx(0.0)


def test_smooth_preserves_constant_signal():
    p = FramePredictions("V1", np.arange(20, dtype=float),
                         np.full((20, 2), 0.7))
    out = smooth_predictions(p, 0.5, 20.0)
    assert np.allclose(out.scores, 0.7)


def test_smooth_rejects_bad_fraction():
    with pytest.raises(ValueError):
        smooth_predictions(_preds(), 1.5, 10.0)


def test_smoothing_sweep_includes_zero_and_picks_best():
    anns = [ann("V1", 10.0, ("c000", 2.0, 8.0))]
    times = np.linspace(0, 10, 50, endpoint=False)
    rng = np.random.default_rng(1)
    clean = ((times >= 2) & (times <= 8)).astype(float)
    noisy = np.clip(clean[:, None] + rng.normal(scale=0.8, size=(50, 3)), 0, None)
    noisy[:, 1:] = rng.random((50, 2)) * 0.1
    preds = [FramePredictions("V1", times, noisy)]
    res = smoothing_sweep(preds, anns, VOCAB, fractions=(0.04, 0.16))
    assert res.fractions[0] == 0.0
    assert len(res.loc_map) == len(res.fractions) == 3
    assert res.best_fraction in res.fractions
    assert max(res.loc_map) == res.loc_map[res.fractions.index(res.best_fraction)]
    csv = res.to_csv()
    assert csv.splitlines()[0] == "fraction,loc_map,cls_map"


def test_smoothing_helps_noisy_long_instances():
    # strong iid noise over a long instance: averaging must not hurt
    anns = [ann("V1", 20.0, ("c000", 2.0, 18.0))]
    rng = np.random.default_rng(2)
    times = np.linspace(0, 20, 100, endpoint=False)
    signal = ((times >= 2) & (times <= 18)).astype(float) * 0.2
    scores = np.zeros((100, 3))
    scores[:, 0] = signal + rng.random(100)
    preds = [FramePredictions("V1", times, scores)]
    res = smoothing_sweep(preds, anns, VOCAB, fractions=(0.08, 0.16, 0.32))
    assert res.best_fraction > 0


def test_context_benefit_hand():
    anns = [ann("V1", 10.0, ("c000", 0.0, 5.0), ("c001", 0.0, 5.0)),
            ann("V2", 10.0, ("c000", 0.0, 5.0)),
            ann("V3", 10.0, ("c002", 0.0, 5.0))]
    from actdiag.corpus import VideoPredictions
    # c000's score is 0.9 when c001 present, 0.2 otherwise
    preds = [VideoPredictions("V1", np.array([0.9, 0.5, 0.1])),
             VideoPredictions("V2", np.array([0.2, 0.5, 0.1])),
             VideoPredictions("V3", np.array([0.2, 0.5, 0.1]))]
    res = context_benefit(preds, anns, VOCAB)
    assert res.counts[0] == 1          # only c001 raises c000
    assert res.counts[1] == 0          # c001's score is flat everywhere
    csv = res.to_csv(VOCAB)
    assert csv.splitlines()[1] == "c000,1"


def test_context_benefit_skips_empty_splits():
    # every video contains c000, so "without c000" is empty and can never
    # count toward any class
    anns = [ann("V1", 10.0, ("c000", 0.0, 5.0)),
            ann("V2", 10.0, ("c000", 0.0, 5.0))]
    from actdiag.corpus import VideoPredictions
    preds = [VideoPredictions("V1", np.array([0.9, 0.8, 0.1])),
             VideoPredictions("V2", np.array([0.2, 0.1, 0.1]))]
    res = context_benefit(preds, anns, VOCAB)
    assert res.counts.sum() == 0


def test_overlap_stats_disjoint_classes():
    anns = [ann("V1", 10.0, ("c000", 0.0, 4.0), ("c001", 5.0, 9.0))]
    mat = overlap_stats(anns, VOCAB)
    assert mat[0, 1] == 0.0 and mat[1, 0] == 0.0
    assert np.all(np.isnan(mat[2]))


def test_overlap_stats_nested_classes():
    # c001 [2,4] entirely inside c000 [0,8]
    anns = [ann("V1", 10.0, ("c000", 0.0, 8.0), ("c001", 2.0, 4.0))]
    mat = overlap_stats(anns, VOCAB)
    assert mat[1, 0] == pytest.approx(1.0)            # all of c001 under c000
    assert 0.2 < mat[0, 1] < 0.3                      # about a quarter of c000
    assert mat[0, 0] == 0.0                           # diagonal zeroed
