"""Temporal smoothing sweeps, context-benefit measurement, and pairwise
overlap statistics."""

from dataclasses import dataclass

import numpy as np

from .corpus import FramePredictions, VideoPredictions
from .metrics import classification_map, labels_matrix, localization_map


def smooth_predictions(preds, window_fraction, duration):
    """Centered moving average per class over a window of
    window_fraction * duration seconds, truncated at the ends.

    The window is converted to frames using the median frame period and
    rounded to the nearest odd count >= 1; fraction 0 is the identity.
    """
    if not 0 <= window_fraction <= 1:
        raise ValueError(f"window_fraction {window_fraction} outside [0, 1]")
    if window_fraction == 0 or len(preds.frame_times) < 2:
        return FramePredictions(preds.video_id, preds.frame_times.copy(),
                                preds.scores.copy())
    period = float(np.median(np.diff(preds.frame_times)))
    w = int(round(window_fraction * duration / period))
    if w % 2 == 0:
        w += 1 if w < window_fraction * duration / period else -1
    w = max(w, 1)
    if w == 1:
        return FramePredictions(preds.video_id, preds.frame_times.copy(),
                                preds.scores.copy())
    half = w // 2
    n = preds.scores.shape[0]
    cum = np.vstack([np.zeros((1, preds.scores.shape[1])),
                     np.cumsum(preds.scores, axis=0)])
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    smoothed = (cum[hi] - cum[lo]) / (hi - lo)[:, None]
    return FramePredictions(preds.video_id, preds.frame_times.copy(), smoothed)


@dataclass
class SmoothingSweepResult:
    fractions: list
    loc_map: list
    cls_map: list
    best_fraction: float
    per_class_relative_change: np.ndarray   # at best fraction vs unsmoothed

    def to_csv(self):
        lines = ["fraction,loc_map,cls_map"]
        for f, lm, cm in zip(self.fractions, self.loc_map, self.cls_map):
            lines.append(f"{f!r},{lm!r},{cm!r}")
        return "\n".join(lines) + "\n"


def _maxpool_predictions(frame_preds):
    return [VideoPredictions(p.video_id, p.scores.max(axis=0)) for p in frame_preds]


def smoothing_sweep(preds, annotations, vocab, fractions=(0, 0.01, 0.02, 0.04, 0.08, 0.16),
                    samples_per_video=25):
    """Evaluate localization and classification mAP across smoothing window
    fractions; the best fraction is chosen by localization mAP."""
    fractions = sorted(set(float(f) for f in fractions) | {0.0})
    durations = {a.video_id: a.duration for a in annotations}
    loc_maps, cls_maps, loc_results = [], [], []
    for f in fractions:
        smoothed = [smooth_predictions(p, f, durations[p.video_id])
                    if p.video_id in durations else p for p in preds]
        loc = localization_map(smoothed, annotations, vocab, samples_per_video)
        cls = classification_map(_maxpool_predictions(smoothed), annotations, vocab)
        loc_maps.append(loc.mean_ap)
        cls_maps.append(cls.mean_ap)
        loc_results.append(loc)
    best_i = int(np.argmax(loc_maps))
    base = loc_results[0].per_class_ap
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = (loc_results[best_i].per_class_ap - base) / base
    return SmoothingSweepResult(fractions, loc_maps, cls_maps,
                                fractions[best_i], rel)


@dataclass
class ContextBenefit:
    counts: np.ndarray      # (C,) how many other actions raise this one
    margin: float

    def to_csv(self, vocab):
        lines = ["class_id,count"]
        for i, cat in enumerate(vocab.categories):
            lines.append(f"{cat.id},{int(self.counts[i])}")
        return "\n".join(lines) + "\n"


def context_benefit(preds, annotations, vocab, margin=0.0):
    """For each action a: how many actions b != a whose presence raises a's
    mean video-level score by more than margin. Pairs where either side of
    the presence split is empty are skipped."""
    by_id = {p.video_id: p for p in preds}
    scores = np.stack([by_id[a.video_id].scores for a in annotations])
    labels = labels_matrix(annotations, vocab)
    n_with = labels.sum(axis=0).astype(float)              # (B,)
    n_without = labels.shape[0] - n_with
    sum_with = scores.T @ labels                           # (A, B)
    sum_all = scores.sum(axis=0)                           # (A,)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_with = sum_with / n_with[None, :]
        mean_without = (sum_all[:, None] - sum_with) / n_without[None, :]
    valid = (n_with > 0) & (n_without > 0)
    gain = np.where(valid[None, :], mean_with - mean_without, -np.inf)
    np.fill_diagonal(gain, -np.inf)
    return ContextBenefit((gain > margin).sum(axis=1), margin)


def overlap_stats(annotations, vocab, grid_step=0.1):
    """(C, C) matrix: fraction of grid frames labeled A that are also
    labeled B; rows of classes with zero frames are nan."""
    n = len(vocab)
    frames = np.zeros(n)
    co = np.zeros((n, n))
    for ann in annotations:
        present = sorted({vocab.index[i.category] for i in ann.instances})
        if not present:
            continue
        times = np.arange(grid_step / 2, ann.duration, grid_step)
        active = np.zeros((len(times), len(present)), dtype=bool)
        for inst in ann.instances:
            k = present.index(vocab.index[inst.category])
            active[:, k] |= (times >= inst.start) & (times <= inst.end)
        cnt = active.T.astype(float) @ active.astype(float)
        for ki, ci in enumerate(present):
            frames[ci] += cnt[ki, ki]
            for kj, cj in enumerate(present):
                co[ci, cj] += cnt[ki, kj]
    with np.errstate(divide="ignore", invalid="ignore"):
        mat = co / frames[:, None]
    np.fill_diagonal(mat, 0.0)
    mat[frames == 0] = np.nan
    return mat
