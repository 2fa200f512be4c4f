"""Core evaluation: interval IOU, normalized average precision, and
classification / per-frame localization mAP.

Normalized precision replaces the raw positive/negative counts of a ranked
list with fixed reference counts, so AP values stay comparable across data
subsets with different label balance:

    prec = R * n_pos / (R * n_pos + F * n_neg)

with R the recall and F the false-positive rate at a rank. With the
reference counts equal to the list's actual counts this reduces exactly to
classical AP.

Tie rule: entries with equal scores are ranked negatives-first
(positives-last), which makes every evaluation deterministic and
pessimistic. All-ones or binary score vectors (oracles) are therefore
scored conservatively.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NormalizationConstants:
    n_pos: float
    n_neg: float

    def __post_init__(self):
        if self.n_pos <= 0 or self.n_neg < 0:
            raise ValueError(f"bad normalization constants {self}")


@dataclass
class EvalResult:
    per_class_ap: np.ndarray   # (C,), nan where masked
    mean_ap: float             # mean over unmasked classes
    class_mask: np.ndarray     # (C,) bool, True where class had >= 1 positive
    n_pos: np.ndarray          # (C,) actual positive counts
    n_neg: np.ndarray          # (C,) actual negative counts
    constants: NormalizationConstants = None

    def to_rows(self, vocab):
        return [(vocab.categories[i].id,
                 float(self.per_class_ap[i]) if self.class_mask[i] else float("nan"),
                 int(self.n_pos[i]), int(self.n_neg[i]))
                for i in range(len(vocab))]


def interval_iou(a, b):
    """Intersection-over-union of two (start, end) intervals in seconds."""
    a0, a1 = a
    b0, b1 = b
    if a0 >= a1 or b0 >= b1:
        raise ValueError(f"degenerate interval: {a}, {b}")
    inter = max(0.0, min(a1, b1) - max(a0, b0))
    union = (a1 - a0) + (b1 - b0) - inter
    return inter / union


def normalized_precision(recall, fp_rate, consts):
    """Precision recomputed from recall and FP rate under reference counts.

    Defined as 0 when recall and fp_rate are both 0.
    """
    num = recall * consts.n_pos
    den = num + fp_rate * consts.n_neg
    if den == 0:
        return 0.0
    return num / den


def rank_order(scores, positives):
    """Indices sorting by score descending, equal scores negatives-first."""
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    # lexsort: last key is primary
    return np.lexsort((positives.astype(np.int8), -scores))


def _block_ends(sorted_scores):
    """For each rank, the last rank holding the same score; 'at or above a
    rank' then includes every tied entry, so equal scores share one
    precision value and duplicating a list changes nothing."""
    n = len(sorted_scores)
    ends = np.append(np.flatnonzero(sorted_scores[:-1] != sorted_scores[1:]),
                     n - 1)
    return ends[np.searchsorted(ends, np.arange(n))]


def normalized_ap(scores, positives, consts):
    """Normalized AP of one ranked list.

    AP is the mean, over positive entries, of the normalized precision at
    that entry's rank, with recall R = positives at or above the rank /
    total positives and F = negatives at or above / total negatives (0 when
    the list has no negatives). Entries tied in score share one rank.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    if n_pos == 0:
        raise ValueError("ranked list has no positive entries")
    n_neg = len(positives) - n_pos
    order = rank_order(scores, positives)
    pos_sorted = positives[order]
    at = _block_ends(scores[order])
    recall = np.cumsum(pos_sorted)[at] / n_pos
    if n_neg > 0:
        fp_rate = np.cumsum(~pos_sorted)[at] / n_neg
    else:
        fp_rate = np.zeros(len(positives))
    num = recall * consts.n_pos
    den = num + fp_rate * consts.n_neg
    prec = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(prec[pos_sorted].mean())


def labels_matrix(annotations, vocab):
    """(V, C) bool: video v contains an instance of class c."""
    labels = np.zeros((len(annotations), len(vocab)), dtype=bool)
    for v, ann in enumerate(annotations):
        for inst in ann.instances:
            labels[v, vocab.index[inst.category]] = True
    return labels


def subset_constants(labels):
    """Reference counts = average per-class positive/negative counts of the
    evaluated subset, so subset scores are chance-comparable."""
    n_items = labels.shape[0]
    pos = labels.sum(axis=0)
    n_pos = float(pos.mean())
    n_neg = float(n_items - pos.mean())
    if n_pos <= 0:
        raise ValueError("no positive labels in any class")
    return NormalizationConstants(n_pos, n_neg)


def _per_class_eval(scores, labels, consts=None):
    """Shared per-class AP over an items x classes score/label pair."""
    n_items, n_classes = scores.shape
    if consts is None:
        consts = subset_constants(labels)
    per_class = np.full(n_classes, np.nan)
    n_pos = labels.sum(axis=0)
    n_neg = n_items - n_pos
    mask = n_pos > 0
    for c in np.flatnonzero(mask):
        per_class[c] = normalized_ap(scores[:, c], labels[:, c], consts)
    mean_ap = float(per_class[mask].mean()) if mask.any() else float("nan")
    return EvalResult(per_class, mean_ap, mask, n_pos, n_neg, consts)


def classification_map(preds, annotations, vocab, consts=None):
    """Video-level mAP: a video is positive for class c iff it contains any
    instance of c.

    preds: list of VideoPredictions covering every annotated video.
    """
    by_id = {p.video_id: p for p in preds}
    missing = [a.video_id for a in annotations if a.video_id not in by_id]
    if missing:
        raise ValueError(f"missing predictions for {len(missing)} videos: "
                         + ", ".join(missing[:10]))
    scores = np.stack([by_id[a.video_id].scores for a in annotations])
    labels = labels_matrix(annotations, vocab)
    return _per_class_eval(scores, labels, consts)


def sample_times(duration, n):
    """n equally spaced sample times (interval midpoints) in [0, duration]."""
    return (np.arange(n) + 0.5) * duration / n


@dataclass
class LocalizationItems:
    """Pooled per-frame evaluation items over a whole prediction set."""
    video_index: np.ndarray   # (N,) index into the annotation list
    times: np.ndarray         # (N,) sampled time in seconds
    scores: np.ndarray        # (N, C)
    labels: np.ndarray        # (N, C) bool, time inside an instance of c
    annotations: list


def frame_labels(annotation, vocab, times):
    """(T, C) bool: sampled time lies inside an instance (closed interval)."""
    labels = np.zeros((len(times), len(vocab)), dtype=bool)
    for inst in annotation.instances:
        c = vocab.index[inst.category]
        labels[:, c] |= (times >= inst.start) & (times <= inst.end)
    return labels


def build_localization_items(preds, annotations, vocab, samples_per_video=25):
    """Sample each video at equally spaced times and look up the nearest
    predicted frame (within one frame period)."""
    by_id = {p.video_id: p for p in preds}
    missing = [a.video_id for a in annotations if a.video_id not in by_id]
    if missing:
        raise ValueError(f"missing frame predictions for {len(missing)} videos: "
                         + ", ".join(missing[:10]))
    vidx, all_times, all_scores, all_labels = [], [], [], []
    for v, ann in enumerate(annotations):
        fp = by_id[ann.video_id]
        times = sample_times(ann.duration, samples_per_video)
        ft = fp.frame_times
        if len(ft) > 1:
            period = float(np.median(np.diff(ft)))
            nearest = np.clip(np.searchsorted(ft, times), 1, len(ft) - 1)
            nearest = np.where(times - ft[nearest - 1] <= ft[nearest] - times,
                               nearest - 1, nearest)
            dist = np.abs(ft[nearest] - times)
            if np.any(dist > period + 1e-9):
                bad = times[dist > period + 1e-9][0]
                raise ValueError(f"{ann.video_id}: no predicted frame within one "
                                 f"frame period of t={bad:.3f}s")
        else:
            nearest = np.zeros(len(times), dtype=int)
        vidx.append(np.full(samples_per_video, v))
        all_times.append(times)
        all_scores.append(fp.scores[nearest])
        all_labels.append(frame_labels(ann, vocab, times))
    return LocalizationItems(np.concatenate(vidx), np.concatenate(all_times),
                             np.vstack(all_scores), np.vstack(all_labels),
                             list(annotations))


def localization_map(preds, annotations, vocab, samples_per_video=25, consts=None):
    """Per-frame mAP over all (video, sampled time) items pooled per class."""
    items = build_localization_items(preds, annotations, vocab, samples_per_video)
    return _per_class_eval(items.scores, items.labels, consts)


# --- weighted AP (bootstrap fast path) ---

def weighted_ap(scores, positives, weights, consts):
    """Normalized AP of the list where entry i is repeated weights[i] times.

    Exactly equals normalized_ap on the np.repeat-expanded list: tied
    entries share one rank, so a weighted positive contributes its block's
    precision weights[i] times.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    weights = np.asarray(weights, dtype=float)
    order = rank_order(scores, positives)
    pos = positives[order]
    w = weights[order]
    p_tot = float((w * pos).sum())
    if p_tot == 0:
        raise ValueError("ranked list has no positive weight")
    f_tot = float((w * ~pos).sum())
    if f_tot == 0:
        return 1.0
    at = _block_ends(scores[order])
    recall = np.cumsum(w * pos)[at] / p_tot
    fp_rate = np.cumsum(w * ~pos)[at] / f_tot
    num = recall * consts.n_pos
    den = num + fp_rate * consts.n_neg
    prec = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float((prec * w)[pos].sum() / p_tot)


def weighted_classification_map(scores, labels, weights):
    """mAP of the video multiset where video v appears weights[v] times.

    Reference counts are recomputed from the weighted subset. Videos with
    weight 0 are excluded. Used by bootstrap resampling.
    """
    total = float(weights.sum())
    pos_w = weights @ labels
    n_pos = float(pos_w.mean())
    n_neg = float(total - pos_w.mean())
    if n_pos <= 0:
        raise ValueError("resample has no positive labels")
    consts = NormalizationConstants(n_pos, n_neg)
    aps = []
    for c in np.flatnonzero(pos_w > 0):
        aps.append(weighted_ap(scores[:, c], labels[:, c], weights, consts))
    return float(np.mean(aps))


def eval_result_csv(result, vocab):
    lines = ["class_id,ap,n_pos,n_neg"]
    for cid, ap, np_, nn in result.to_rows(vocab):
        lines.append(f"{cid},{ap!r},{np_},{nn}")
    return "\n".join(lines) + "\n"
