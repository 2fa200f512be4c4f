"""Per-category and per-video attributes that condition the diagnostic
curves, including Procrustes-based pose variability.

Poses are arrays of shape (keypoints, 3) holding (x, y, confidence). Only
keypoints confident in both poses (confidence > CONF_THRESHOLD) take part
in alignment, and reflections are not allowed: poses are chiral.
"""

from dataclasses import dataclass

import numpy as np

CONF_THRESHOLD = 0.1
GRID_STEP = 0.1          # seconds; overlap/motion/frame counting grid
DEFAULT_MAX_PAIRS = 10000


class AlignmentError(ValueError):
    pass


def _confident(pose):
    return np.asarray(pose)[:, 2] > CONF_THRESHOLD


def _fit_similarity(a, b):
    """Best rotation (no reflection) and scale taking unit-normalized b
    onto unit-normalized a; returns (residual c in [0,1] term, m)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shared = _confident(a) & _confident(b)
    m = int(shared.sum())
    if m < 2:
        raise AlignmentError(f"only {m} shared confident keypoints")
    pa = a[shared, :2] - a[shared, :2].mean(axis=0)
    pb = b[shared, :2] - b[shared, :2].mean(axis=0)
    na, nb = np.linalg.norm(pa), np.linalg.norm(pb)
    if na == 0 or nb == 0:
        raise AlignmentError("degenerate pose (all keypoints coincide)")
    pa /= na
    pb /= nb
    u, sv, vt = np.linalg.svd(pb.T @ pa)
    d = np.sign(np.linalg.det(u @ vt))
    c = sv[0] + d * sv[1]
    rot = u @ np.diag([1.0, d]) @ vt
    return pa, pb, rot, c, m


def procrustes_distance(a, b):
    """Minimum RMS keypoint distance between two poses over translation,
    rotation and uniform scale, on unit-norm centered configurations.

    The residual is formed explicitly (rather than as sqrt(1 - c^2), which
    loses half the significant digits near zero)."""
    pa, pb, rot, c, m = _fit_similarity(a, b)
    return float(np.linalg.norm(pa - c * (pb @ rot)) / np.sqrt(m))


def align_pose(pose, reference):
    """Similarity-align a full pose to a reference; returns (keypoints, 2)
    coordinates of every keypoint after the fitted transform."""
    pose = np.asarray(pose, dtype=float)
    shared = _confident(pose) & _confident(reference)
    if shared.sum() < 2:
        raise AlignmentError("too few shared confident keypoints")
    _, _, rot, c, _ = _fit_similarity(reference, pose)
    pts = pose[:, :2] - pose[shared, :2].mean(axis=0)
    n = np.linalg.norm(pose[shared, :2] - pose[shared, :2].mean(axis=0))
    return (pts / n * c) @ rot


def _pair_distances(pairs, poses_a, poses_b):
    out = []
    for i, j in pairs:
        try:
            out.append(procrustes_distance(poses_a[i], poses_b[j]))
        except AlignmentError:
            continue
    return out


def _sample_pairs(n_a, n_b, max_pairs, seed, within=False):
    """All cross pairs (or unordered within-pairs) if few enough, else a
    deterministic uniform sample of max_pairs."""
    total = n_a * (n_a - 1) // 2 if within else n_a * n_b
    if total <= max_pairs:
        if within:
            return [(i, j) for i in range(n_a) for j in range(i + 1, n_a)]
        return [(i, j) for i in range(n_a) for j in range(n_b)]
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < max_pairs:
        i = int(rng.integers(n_a))
        j = int(rng.integers(n_b if not within else n_a))
        if within and i == j:
            continue
        pairs.append((i, j))
    return pairs


def pose_variability(poses, max_pairs=DEFAULT_MAX_PAIRS, seed=0):
    """Mean pairwise Procrustes distance within a pose set; None when fewer
    than two alignable poses/pairs exist."""
    poses = [np.asarray(p) for p in poses if _confident(p).sum() >= 2]
    if len(poses) < 2:
        return None
    pairs = _sample_pairs(len(poses), len(poses), max_pairs, seed, within=True)
    dists = _pair_distances(pairs, poses, poses)
    if not dists:
        return None
    return float(np.mean(dists))


def cross_category_pose_similarity(poses_by_category, max_pairs=DEFAULT_MAX_PAIRS,
                                   seed=0):
    """Symmetric matrix of mean Procrustes distance between pose pairs drawn
    one from each category; the diagonal is each category's variability.
    Returns (category ids, matrix with nan where undefined)."""
    cats = sorted(poses_by_category)
    k = len(cats)
    mat = np.full((k, k), np.nan)
    for i in range(k):
        v = pose_variability(poses_by_category[cats[i]], max_pairs, seed)
        mat[i, i] = np.nan if v is None else v
        for j in range(i + 1, k):
            pa = [np.asarray(p) for p in poses_by_category[cats[i]]
                  if _confident(p).sum() >= 2]
            pb = [np.asarray(p) for p in poses_by_category[cats[j]]
                  if _confident(p).sum() >= 2]
            if not pa or not pb:
                continue
            pairs = _sample_pairs(len(pa), len(pb), max_pairs, seed)
            dists = _pair_distances(pairs, pa, pb)
            if dists:
                mat[i, j] = mat[j, i] = float(np.mean(dists))
    return cats, mat


@dataclass
class CategoryAttributes:
    category: str
    train_examples: int
    train_frames: int
    avg_extent: float | None
    object_complexity: int
    verb_complexity: int
    motion: float | None
    pose_variability: float | None
    overlap_rate: float | None


@dataclass
class VideoAttributes:
    video_id: str
    num_actions: int
    person_size: float | None
    multi_person: bool | None
    mean_motion: float | None


def _grid_times(duration, step=GRID_STEP):
    return np.arange(step / 2, duration, step)


def complexity_counts(vocab):
    """Per category: how many *other* categories share its object / verb."""
    obj = np.bincount(vocab.object_of, minlength=vocab.object_count)
    verb = np.bincount(vocab.verb_of, minlength=vocab.verb_count)
    return obj[vocab.object_of] - 1, verb[vocab.verb_of] - 1


def poses_by_category(annotations, auxiliary, vocab):
    """Group auxiliary poses by the categories active at their frame time."""
    by_vid = {}
    for r in auxiliary:
        if r.pose is not None:
            by_vid.setdefault(r.video_id, []).append(r)
    out = {c.id: [] for c in vocab.categories}
    for ann in annotations:
        for r in by_vid.get(ann.video_id, ()):
            pose = np.asarray(r.pose)
            for inst in ann.instances:
                if inst.start <= r.frame_time <= inst.end:
                    out[inst.category].append(pose)
    return out


def category_attributes(vocab, train_annotations, auxiliary=None,
                        grid_step=GRID_STEP, motion_whole_video=False,
                        max_pairs=DEFAULT_MAX_PAIRS, seed=0):
    """Compute the per-category attribute table from the training split."""
    obj_cx, verb_cx = complexity_counts(vocab)
    n = len(vocab)
    examples = np.zeros(n, dtype=int)
    frames = np.zeros(n, dtype=int)
    overlap = np.zeros(n, dtype=int)
    extents = [[] for _ in range(n)]
    motion_sum = np.zeros(n)
    motion_cnt = np.zeros(n, dtype=int)

    aux_by_vid = {}
    for r in auxiliary or ():
        aux_by_vid.setdefault(r.video_id, []).append(r)

    for ann in train_annotations:
        present = sorted({vocab.index[i.category] for i in ann.instances})
        if present:
            times = _grid_times(ann.duration, grid_step)
            active = np.zeros((len(times), len(present)), dtype=bool)
            for inst in ann.instances:
                k = present.index(vocab.index[inst.category])
                active[:, k] |= (times >= inst.start) & (times <= inst.end)
            counts = active.sum(axis=1)
            for k, c in enumerate(present):
                frames[c] += int(active[:, k].sum())
                overlap[c] += int((active[:, k] & (counts > 1)).sum())
        for inst in ann.instances:
            c = vocab.index[inst.category]
            examples[c] += 1
            extents[c].append(inst.end - inst.start)
        for r in aux_by_vid.get(ann.video_id, ()):
            if r.motion is None:
                continue
            for inst in ann.instances:
                c = vocab.index[inst.category]
                if motion_whole_video or inst.start <= r.frame_time <= inst.end:
                    motion_sum[c] += r.motion
                    motion_cnt[c] += 1

    pose_var = {c.id: None for c in vocab.categories}
    if auxiliary:
        for cid, poses in poses_by_category(train_annotations, auxiliary, vocab).items():
            pose_var[cid] = pose_variability(poses, max_pairs, seed)

    table = {}
    for i, cat in enumerate(vocab.categories):
        table[cat.id] = CategoryAttributes(
            category=cat.id,
            train_examples=int(examples[i]),
            train_frames=int(frames[i]),
            avg_extent=float(np.mean(extents[i])) if extents[i] else None,
            object_complexity=int(obj_cx[i]),
            verb_complexity=int(verb_cx[i]),
            motion=float(motion_sum[i] / motion_cnt[i]) if motion_cnt[i] else None,
            pose_variability=pose_var[cat.id],
            overlap_rate=float(overlap[i] / frames[i]) if frames[i] else None,
        )
    return table


def video_attributes(annotations, auxiliary=None):
    """Per-video attribute table (person size from auxiliary boxes)."""
    aux_by_vid = {}
    for r in auxiliary or ():
        aux_by_vid.setdefault(r.video_id, []).append(r)
    table = {}
    for ann in annotations:
        recs = aux_by_vid.get(ann.video_id, [])
        heights = [r.person_box[3] for r in recs if r.person_box is not None]
        counts = [r.person_count for r in recs if r.person_count is not None]
        motions = [r.motion for r in recs if r.motion is not None]
        table[ann.video_id] = VideoAttributes(
            video_id=ann.video_id,
            num_actions=len(ann.instances),
            person_size=float(np.mean(heights)) if heights else None,
            multi_person=(max(counts) > 1) if counts else None,
            mean_motion=float(np.mean(motions)) if motions else None,
        )
    return table


def category_attributes_csv(table):
    cols = ["train_examples", "train_frames", "avg_extent", "object_complexity",
            "verb_complexity", "motion", "pose_variability", "overlap_rate"]
    lines = ["class_id," + ",".join(cols)]
    for cid in table:
        a = table[cid]
        vals = [getattr(a, c) for c in cols]
        lines.append(cid + "," + ",".join("" if v is None else repr(v) for v in vals))
    return "\n".join(lines) + "\n"


def video_attributes_csv(table):
    cols = ["num_actions", "person_size", "multi_person", "mean_motion"]
    lines = ["video_id," + ",".join(cols)]
    for vid in table:
        a = table[vid]
        vals = [getattr(a, c) for c in cols]
        lines.append(vid + "," + ",".join("" if v is None else repr(v) for v in vals))
    return "\n".join(lines) + "\n"
