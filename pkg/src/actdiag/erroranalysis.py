"""Typing of each class's top-ranked per-frame predictions and
cross-category confusion structure.

Top predictions are labeled by the first matching rule, in precedence
order: TP (inside an instance of the class), BND (inside a boundary region
of an instance of the class), OBJ (inside an instance of another class
sharing the object), VRB (sharing the verb), OTH (inside any other
instance), FP (inside no instance at all).
"""

from dataclasses import dataclass

import numpy as np

from .boundary import boundary_region
from .metrics import build_localization_items, classification_map, labels_matrix

LABELS = ("tp", "bnd", "obj", "vrb", "oth", "fp")


@dataclass
class ErrorBreakdown:
    """Per-category fractions over its top-ranked items; rows sum to 1."""
    fractions: np.ndarray   # (C, 6) in LABELS order, nan rows where masked
    top_n: np.ndarray       # (C,) item count actually inspected
    mask: np.ndarray        # (C,) bool

    def to_csv(self, vocab):
        lines = ["class_id," + ",".join(LABELS)]
        for i, cat in enumerate(vocab.categories):
            row = ",".join(repr(float(v)) for v in self.fractions[i])
            lines.append(f"{cat.id},{row}")
        return "\n".join(lines) + "\n"


def _boundary_masks(items, vocab):
    """(N, C) bool: item time inside a boundary region of an instance of c."""
    bnd = np.zeros_like(items.labels, dtype=bool)
    for v, ann in enumerate(items.annotations):
        rows = np.flatnonzero(items.video_index == v)
        if len(rows) == 0:
            continue
        t = items.times[rows]
        for inst in ann.instances:
            c = vocab.index[inst.category]
            for s, e in boundary_region(inst, ann.duration).intervals:
                bnd[rows[(t >= s) & (t <= e)], c] = True
    return bnd


def classify_top_predictions(preds, annotations, vocab, samples_per_video=25,
                             top_n=None):
    """Fraction of each class's top-ranked localization items per error type.

    top_n defaults per class to its positive item count; classes with zero
    positives (or zero requested items) are masked.
    """
    items = build_localization_items(preds, annotations, vocab, samples_per_video)
    bnd = _boundary_masks(items, vocab)
    active = items.labels          # (N, C) item inside an instance of c
    any_active = active.any(axis=1)
    n_classes = len(vocab)
    same_obj = vocab.object_of[None, :] == vocab.object_of[:, None]   # (C, C)
    same_verb = vocab.verb_of[None, :] == vocab.verb_of[:, None]
    np.fill_diagonal(same_obj, False)
    np.fill_diagonal(same_verb, False)

    fractions = np.full((n_classes, len(LABELS)), np.nan)
    used_n = np.zeros(n_classes, dtype=int)
    mask = np.zeros(n_classes, dtype=bool)
    for c in range(n_classes):
        n_pos = int(active[:, c].sum())
        n = n_pos if top_n is None else int(top_n)
        n = min(n, items.scores.shape[0])
        if n == 0:
            continue
        order = np.lexsort((np.arange(len(items.times)), -items.scores[:, c]))
        top = order[:n]
        counts = dict.fromkeys(LABELS, 0)
        obj_cols = np.flatnonzero(same_obj[c])
        verb_cols = np.flatnonzero(same_verb[c])
        for i in top:
            if active[i, c]:
                counts["tp"] += 1
            elif bnd[i, c]:
                counts["bnd"] += 1
            elif active[i, obj_cols].any():
                counts["obj"] += 1
            elif active[i, verb_cols].any():
                counts["vrb"] += 1
            elif any_active[i]:
                counts["oth"] += 1
            else:
                counts["fp"] += 1
        fractions[c] = [counts[k] / n for k in LABELS]
        used_n[c] = n
        mask[c] = True
    return ErrorBreakdown(fractions, used_n, mask)


def cross_confusion(preds, annotations, vocab):
    """(C, C) matrix: entry (A, B) is the mean score assigned to class A
    over videos containing B but not A; nan where no video qualifies and on
    the diagonal."""
    by_id = {p.video_id: p for p in preds}
    scores = np.stack([by_id[a.video_id].scores for a in annotations])
    labels = labels_matrix(annotations, vocab)
    absent = ~labels                              # (V, C) for the A side
    num = (scores * absent).T @ labels            # (A, B) sums
    den = absent.astype(float).T @ labels         # qualifying video counts
    mat = np.divide(num, den, out=np.full_like(num, np.nan), where=den > 0)
    np.fill_diagonal(mat, np.nan)
    return mat


def confusion_csv(mat, vocab):
    ids = [c.id for c in vocab.categories]
    lines = ["class_id," + ",".join(ids)]
    for i, cid in enumerate(ids):
        lines.append(cid + "," + ",".join(repr(float(v)) for v in mat[i]))
    return "\n".join(lines) + "\n"


@dataclass
class AblationDelta:
    per_class_a: np.ndarray
    per_class_b: np.ndarray
    delta: np.ndarray           # b - a, nan where either masked
    relative: np.ndarray        # delta / a
    mean_a: float
    mean_b: float
    best: list                  # [(class_id, delta)] largest gains
    worst: list


def ablation_delta(preds_a, preds_b, annotations, vocab, extremes=5):
    """Per-class AP difference between two prediction sets on the same
    videos (set b relative to set a)."""
    ids_a = {p.video_id for p in preds_a}
    ids_b = {p.video_id for p in preds_b}
    if ids_a != ids_b:
        diff = sorted(ids_a ^ ids_b)
        raise ValueError(f"prediction sets cover different videos: {diff[:10]}")
    res_a = classification_map(preds_a, annotations, vocab)
    res_b = classification_map(preds_b, annotations, vocab)
    delta = res_b.per_class_ap - res_a.per_class_ap
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = delta / res_a.per_class_ap
    ok = np.isfinite(delta)
    order = np.argsort(delta[ok])
    idx = np.flatnonzero(ok)[order]
    ids = [vocab.categories[i].id for i in idx]
    worst = [(ids[i], float(delta[idx[i]])) for i in range(min(extremes, len(idx)))]
    best = [(ids[-1 - i], float(delta[idx[-1 - i]])) for i in range(min(extremes, len(idx)))]
    return AblationDelta(res_a.per_class_ap, res_b.per_class_ap, delta, relative,
                         res_a.mean_ap, res_b.mean_ap, best, worst)
