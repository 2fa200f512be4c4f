"""CLI entry point: runs the full diagnostic battery over a corpus plus one
or more prediction sets and writes a report bundle.

The bundle is one directory with summary.md (human readable), report.json
(every table, the machine contract), and one CSV per table. Every number in
the summary also appears in a table. Outputs are deterministic given
(inputs, config, seed), independent of worker count.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import attributes as attr_mod
from . import metrics
from . import boundary as boundary_mod
from . import erroranalysis
from . import oracles as oracle_mod
from . import stats as stats_mod
from . import temporal as temporal_mod
from .corpus import (load_annotations, load_auxiliary, load_predictions,
                     load_vocabulary, validate_corpus, dump_video_predictions,
                     VideoPredictions)
from .metrics import (classification_map, eval_result_csv, labels_matrix,
                      localization_map)

DEFAULT_SWEEP = (0.0, 0.01, 0.02, 0.04, 0.08, 0.16)
DEFAULT_INTENT_KS = (30, 50)
POSE_CLUSTERS = 500

SUGGESTION_TEXT = {
    "boundary_sensitivity": "predictions are boundary-sensitive; consider fluid-boundary training",
    "object_confusion": "confusion among same-object classes; add fine-grained discrimination",
    "temporal_aggregation": "add temporal aggregation",
    "person_crop": "add person-centered cropping",
    "sequence_modeling": "add sequence modeling",
}


@dataclass
class RunConfig:
    vocab: str
    test: str
    train: str = None
    predictions: dict = field(default_factory=dict)   # name -> path
    aux: str = None
    reannotations: str = None
    seed: int = 0
    samples_per_video: int = 25
    sweep_fractions: tuple = DEFAULT_SWEEP
    intent_ks: tuple = DEFAULT_INTENT_KS
    pose_k: int = POSE_CLUSTERS
    bootstrap_resamples: int = 10000
    permutations: int = 10000
    bins: int = 6
    out: str = "diagnostics"
    workers: int = 1

    def __post_init__(self):
        for path in [self.vocab, self.test, self.train, self.aux,
                     self.reannotations, *self.predictions.values()]:
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(path)


def _is_frame_file(path):
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                return line.startswith("#fps=")
    return False


def _load_methods(config, vocab):
    """name -> dict with 'video' (always, max-pooled if needed) and
    optionally 'frame' prediction lists."""
    methods = {}
    for name in sorted(config.predictions):
        path = config.predictions[name]
        with open(path) as f:
            if _is_frame_file(path):
                frame = load_predictions(f, vocab, "frame")
                video = temporal_mod._maxpool_predictions(frame)
                methods[name] = {"frame": frame, "video": video}
            else:
                methods[name] = {"frame": None,
                                 "video": load_predictions(f, vocab, "video")}
    return methods


# --- fast bootstrap of classification mAP over videos ---

def _class_ap(args):
    """AP of one class for every resample; (b,) array plus the live mask.

    Precision is only ever read at the positive positions, so the heavy
    (b, n) work reduces to one gather and one integer cumsum; everything
    else runs on (b, n_pos) slices. Weights are integers, so the cumsums
    are exact and the result is bit-identical to weighted_ap."""
    weights, order, pos, block_end, npos_all, nneg_all, chunk = args
    b = weights.shape[0]
    pos_idx = np.flatnonzero(pos)
    sel = block_end[pos_idx]                      # block end per positive
    rank = np.searchsorted(pos_idx, sel, side="right") - 1
    ap = np.empty(b)
    live = np.empty(b, dtype=bool)
    for i in range(0, b, chunk):
        w = weights[i:i + chunk, order]
        cw = np.cumsum(w, axis=1, dtype=np.int32)
        wsel = w[:, pos_idx].astype(float)
        cwp = np.cumsum(wsel, axis=1)
        cwp_sel = cwp[:, rank]
        cw_sel = cw[:, sel].astype(float)
        ptot = cwp[:, -1]
        ftot = cw[:, -1].astype(float) - ptot
        recall = cwp_sel / np.maximum(ptot, 1e-300)[:, None]
        fp_rate = (cw_sel - cwp_sel) / np.maximum(ftot, 1e-300)[:, None]
        num = recall * npos_all[i:i + chunk, None]
        den = num + fp_rate * nneg_all[i:i + chunk, None]
        prec = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        a = (prec * wsel).sum(axis=1) / np.maximum(ptot, 1e-300)
        a[ftot == 0] = 1.0
        ap[i:i + chunk] = a
        live[i:i + chunk] = ptot > 0
    return ap, live


def bootstrap_map_ci(scores, labels, b=10000, level=0.95, seed=0, workers=1,
                     chunk=500):
    """Percentile bootstrap CI of classification mAP, resampling videos.

    Draws the same resamples as stats.bootstrap_ci (one Generator per
    (seed, index)) but evaluates the weighted mAP in a vectorized closed
    form. Work is split by class and merged in class order, so the output
    is bit-identical regardless of worker count."""
    n, n_classes = scores.shape
    weights = np.empty((b, n), dtype=np.int32)
    for i in range(b):
        rng = np.random.default_rng((seed, i))
        for _ in range(6):
            idx = rng.integers(0, n, n)
            w = np.bincount(idx, minlength=n)
            if (w @ labels).sum() > 0:
                break
        weights[i] = w
    posw = weights @ labels            # (b, C)
    npos_all = posw.mean(axis=1)
    nneg_all = n - npos_all
    tasks = []
    for c in range(n_classes):
        o = np.lexsort((labels[:, c].astype(np.int8), -scores[:, c]))
        tasks.append((weights, o, labels[o, c], metrics._block_ends(scores[o, c]),
                      npos_all, nneg_all, chunk))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_class_ap, tasks))
    else:
        parts = [_class_ap(t) for t in tasks]
    ap_sum = np.zeros(b)
    ap_cnt = np.zeros(b)
    for ap, live in parts:             # fixed class order keeps sums exact
        ap_sum[live] += ap[live]
        ap_cnt[live] += 1
    maps = ap_sum / ap_cnt
    alpha = (1 - level) / 2
    low, high = np.quantile(maps, [alpha, 1 - alpha])
    return float(low), float(high)


def _correlate(per_class_ap, mask, table, vocab, attrs, permutations, seed):
    rows = []
    for attr in attrs:
        xs, ys = [], []
        for i, cat in enumerate(vocab.categories):
            v = getattr(table[cat.id], attr)
            if v is None or not mask[i]:
                continue
            xs.append(float(v))
            ys.append(float(per_class_ap[i]))
        if len(xs) < 3:
            continue
        try:
            c = stats_mod.pearson(xs, ys, permutations, seed)
        except ValueError:
            continue
        rows.append({"attribute": attr, "rho": c.rho, "p": c.p_value, "n": c.n})
    return rows


def _category_curves(per_class_ap, mask, table, vocab, attrs, bins):
    curves = {}
    for attr in attrs:
        pairs = []
        for i, cat in enumerate(vocab.categories):
            v = getattr(table[cat.id], attr)
            if v is None or not mask[i]:
                continue
            pairs.append((float(v), float(per_class_ap[i])))
        if len(pairs) < bins:
            continue
        curves[attr] = stats_mod.bin_by_attribute(pairs, bins)
    return curves


def _video_curves(methods, annotations, vocab, vtable, attrs, bins):
    """Bin videos by an attribute and compute mAP per bin via weighted
    evaluation of the member subset."""
    curves = {}
    from .metrics import weighted_classification_map
    for name, m in methods.items():
        by_id = {p.video_id: p for p in m["video"]}
        scores = np.stack([by_id[a.video_id].scores for a in annotations])
        labels = labels_matrix(annotations, vocab)
        for attr in attrs:
            pairs = []
            for v, ann in enumerate(annotations):
                val = getattr(vtable[ann.video_id], attr)
                if val is None:
                    continue
                pairs.append((float(val), v))
            if len(pairs) < bins:
                continue
            xs = np.array([p[0] for p in pairs])
            idx = np.array([p[1] for p in pairs])
            order = np.lexsort((np.arange(len(xs)), xs))
            sizes = np.full(bins, len(xs) // bins)
            sizes[: len(xs) % bins] += 1
            bounds = np.concatenate([[0], np.cumsum(sizes)])
            rows = []
            for bi in range(bins):
                sel = idx[order[bounds[bi]:bounds[bi + 1]]]
                if len(sel) == 0:
                    continue
                w = np.zeros(len(annotations), dtype=int)
                w[sel] = 1
                try:
                    m_ap = weighted_classification_map(scores, labels, w)
                except ValueError:
                    m_ap = float("nan")
                rows.append({"x_center": float(xs[order[bounds[bi]:bounds[bi + 1]]].mean()),
                             "map": m_ap, "n": int(len(sel))})
            curves[f"{name}:{attr}"] = rows
    return curves


def suggest(report, thresholds=None):
    """Transparent threshold rules over report quantities.

    Rules (per method where the inputs exist):
      boundary_sensitivity: boundary-excluded mAP gain > 0.01
      object_confusion: rho(AP, object_complexity) < -0.2 with p < 0.05
      temporal_aggregation: best smoothing fraction > 0
      person_crop: person-size curve peaks strictly inside the range
      sequence_modeling: temporal-oracle combination gain > 0.05
    """
    th = {"boundary_gain": 0.01, "object_rho": -0.2, "object_p": 0.05,
          "temporal_gain": 0.05}
    th.update(thresholds or {})
    out = []

    def rule(rid, method, triggered):
        out.append({"rule": rid, "method": method, "triggered": bool(triggered),
                    "text": SUGGESTION_TEXT[rid],
                    "thresholds": {k: v for k, v in th.items() if k.startswith(rid.split("_")[0])}})

    for name, ev in report.get("evaluation", {}).items():
        loc = ev.get("localization_map")
        bex = ev.get("boundary_excluded_map")
        if loc is not None and bex is not None:
            rule("boundary_sensitivity", name, bex - loc > th["boundary_gain"])
        corr = {r["attribute"]: r for r in report.get("correlations", {}).get(name, [])}
        oc = corr.get("object_complexity")
        if oc is not None:
            rule("object_confusion", name,
                 oc["rho"] < th["object_rho"] and oc["p"] < th["object_p"])
        sweep = report.get("smoothing_sweep", {}).get(name)
        if sweep is not None and not isinstance(sweep, str):
            rule("temporal_aggregation", name, sweep["best_fraction"] > 0)
        curve = report.get("video_curves", {}).get(f"{name}:person_size")
        if curve:
            ys = [r["map"] for r in curve]
            peak = int(np.nanargmax(ys)) if np.isfinite(ys).any() else 0
            rule("person_crop", name, 0 < peak < len(ys) - 1)
        ora = report.get("oracles", {}).get("combined", {})
        key = f"temporal+{name}"
        base = ev.get("classification_map")
        if key in ora and base is not None:
            rule("sequence_modeling", name, ora[key] - base > th["temporal_gain"])
    return out


CATEGORY_ATTRS = ("train_examples", "train_frames", "avg_extent",
                  "object_complexity", "verb_complexity", "motion",
                  "pose_variability", "overlap_rate")
VIDEO_ATTRS = ("num_actions", "person_size", "multi_person", "mean_motion")


def run_report(config):
    """Execute the full battery and write the bundle; returns the report
    dict. Any module failure aborts before anything is written."""
    with open(config.vocab) as f:
        vocab = load_vocabulary(f)
    with open(config.test) as f:
        test_ann = load_annotations(f, vocab)
    train_ann = None
    if config.train:
        with open(config.train) as f:
            train_ann = load_annotations(f, vocab)
    aux = None
    if config.aux:
        with open(config.aux) as f:
            aux = load_auxiliary(f)
    reann = None
    if config.reannotations:
        with open(config.reannotations) as f:
            reann = load_annotations(f, vocab)
    methods = _load_methods(config, vocab)
    s = config.samples_per_video
    report = {"config": {
        "seed": config.seed, "samples_per_video": s,
        "sweep_fractions": list(config.sweep_fractions),
        "intent_ks": list(config.intent_ks),
        "bootstrap_resamples": config.bootstrap_resamples,
        "permutations": config.permutations, "bins": config.bins,
        "methods": sorted(methods),
    }}
    csvs = {}

    val = validate_corpus(test_ann, {n: m["video"] for n, m in methods.items()}, aux)
    report["validation"] = {
        "findings": val.findings,
        "auxiliary_coverage": val.auxiliary_coverage,
    }

    # evaluation core
    labels = labels_matrix(test_ann, vocab)
    report["evaluation"] = {}
    eval_results = {}
    for name, m in methods.items():
        ev = {}
        cls = classification_map(m["video"], test_ann, vocab)
        eval_results[name] = {"classification": cls}
        csvs[f"classification_{name}.csv"] = eval_result_csv(cls, vocab)
        by_id = {p.video_id: p for p in m["video"]}
        scores = np.stack([by_id[a.video_id].scores for a in test_ann])
        low, high = bootstrap_map_ci(scores, labels, config.bootstrap_resamples,
                                     0.95, config.seed, config.workers)
        ev["classification_map"] = cls.mean_ap
        ev["classification_map_ci"] = [low, high]
        if m["frame"] is not None:
            loc = localization_map(m["frame"], test_ann, vocab, s)
            bex = boundary_mod.boundary_excluded_eval(m["frame"], test_ann, vocab, s)
            eval_results[name]["localization"] = loc
            csvs[f"localization_{name}.csv"] = eval_result_csv(loc, vocab)
            csvs[f"boundary_excluded_{name}.csv"] = eval_result_csv(bex, vocab)
            ev["localization_map"] = loc.mean_ap
            ev["boundary_excluded_map"] = bex.mean_ap
            ev["boundary_gain"] = bex.mean_ap - loc.mean_ap
        else:
            ev["localization"] = "skipped: no frame predictions"
        report["evaluation"][name] = ev

    oracle_loc = boundary_mod.perfect_classifier_localization(test_ann, vocab, s)
    report["perfect_classifier_localization_map"] = oracle_loc.mean_ap
    csvs["perfect_classifier_localization.csv"] = eval_result_csv(oracle_loc, vocab)

    if reann is not None:
        records, summary = boundary_mod.agreement(reann, test_ann,
                                                  config.permutations, config.seed)
        report["agreement"] = summary
        csvs["agreement.csv"] = boundary_mod.agreement_csv(records)
    else:
        report["agreement"] = "skipped: no re-annotations"

    report["error_breakdown"] = {}
    report["confusion"] = {}
    for name, m in methods.items():
        if m["frame"] is not None:
            bd = erroranalysis.classify_top_predictions(m["frame"], test_ann, vocab, s)
            csvs[f"errors_{name}.csv"] = bd.to_csv(vocab)
            means = np.nanmean(bd.fractions[bd.mask], axis=0) if bd.mask.any() else \
                np.full(len(erroranalysis.LABELS), np.nan)
            report["error_breakdown"][name] = dict(zip(erroranalysis.LABELS,
                                                       [float(v) for v in means]))
        else:
            report["error_breakdown"][name] = "skipped: no frame predictions"
        conf = erroranalysis.cross_confusion(m["video"], test_ann, vocab)
        csvs[f"confusion_{name}.csv"] = erroranalysis.confusion_csv(conf, vocab)
        report["confusion"][name] = {"mean_offdiag": float(np.nanmean(conf))}

    attr_ann = train_ann if train_ann is not None else test_ann
    ctable = attr_mod.category_attributes(vocab, attr_ann, aux, seed=config.seed)
    vtable = attr_mod.video_attributes(test_ann, aux)
    csvs["category_attributes.csv"] = attr_mod.category_attributes_csv(ctable)
    csvs["video_attributes.csv"] = attr_mod.video_attributes_csv(vtable)
    report["category_attributes"] = "see category_attributes.csv"
    report["video_attributes"] = "see video_attributes.csv"

    report["category_curves"] = {}
    report["correlations"] = {}
    for name in methods:
        cls = eval_results[name]["classification"]
        curves = _category_curves(cls.per_class_ap, cls.class_mask, ctable,
                                  vocab, CATEGORY_ATTRS, config.bins)
        for attr, curve in curves.items():
            csvs[f"curve_{name}_{attr}.csv"] = curve.to_csv()
            report["category_curves"][f"{name}:{attr}"] = [
                {"x_center": float(x), "y_mean": float(ym), "y_std": float(ys),
                 "n": int(n)}
                for x, ym, ys, n in zip(curve.x_center, curve.y_mean,
                                        curve.y_std, curve.n)]
        report["correlations"][name] = _correlate(
            cls.per_class_ap, cls.class_mask, ctable, vocab, CATEGORY_ATTRS,
            config.permutations, config.seed)

    report["video_curves"] = _video_curves(methods, test_ann, vocab, vtable,
                                           VIDEO_ATTRS, config.bins)

    report["smoothing_sweep"] = {}
    report["context_benefit"] = {}
    for name, m in methods.items():
        if m["frame"] is not None:
            sweep = temporal_mod.smoothing_sweep(m["frame"], test_ann, vocab,
                                                 config.sweep_fractions, s)
            csvs[f"sweep_{name}.csv"] = sweep.to_csv()
            report["smoothing_sweep"][name] = {
                "fractions": sweep.fractions, "loc_map": sweep.loc_map,
                "cls_map": sweep.cls_map, "best_fraction": sweep.best_fraction}
        else:
            report["smoothing_sweep"][name] = "skipped: no frame predictions"
        cb = temporal_mod.context_benefit(m["video"], test_ann, vocab)
        csvs[f"context_{name}.csv"] = cb.to_csv(vocab)
        report["context_benefit"][name] = {"mean_count": float(cb.counts.mean()),
                                           "margin": cb.margin}

    if train_ann is not None:
        ov = temporal_mod.overlap_stats(train_ann, vocab)
        csvs["overlap.csv"] = erroranalysis.confusion_csv(ov, vocab)
        report["overlap"] = {"mean_offdiag": float(np.nanmean(ov))}
    else:
        report["overlap"] = "skipped: no training annotations"

    report["oracles"] = _oracle_section(config, vocab, test_ann, train_ann,
                                        aux, methods, csvs)

    report["suggestions"] = suggest(report)
    csvs["suggestions.csv"] = "\n".join(
        ["rule,method,triggered,text"]
        + [f"{r['rule']},{r['method']},{int(r['triggered'])},\"{r['text']}\""
           for r in report["suggestions"]]) + "\n"

    _write_bundle(config.out, report, csvs)
    return report


def _oracle_section(config, vocab, test_ann, train_ann, aux, methods, csvs):
    sec = {"single": {}, "combined": {}}
    oracle_preds = {
        "object": oracle_mod.object_oracle(test_ann, vocab),
        "verb": oracle_mod.verb_oracle(test_ann, vocab),
    }
    if train_ann is not None:
        stats = oracle_mod.build_temporal_stats(train_ann, vocab,
                                                config.samples_per_video)
        oracle_preds["temporal"] = oracle_mod.temporal_oracle(
            stats, test_ann, vocab, config.samples_per_video)
        train_labels = labels_matrix(train_ann, vocab)
        nonzero = int((train_labels.sum(axis=1) > 0).sum())
        for k in config.intent_ks:
            if nonzero < k:
                sec["single"][f"intent{k}"] = "skipped: too few training videos"
                continue
            clusters = oracle_mod.build_intent_clusters(train_ann, vocab, k,
                                                        config.seed)
            oracle_preds[f"intent{k}"] = oracle_mod.intent_oracle(
                clusters, test_ann, vocab)
        posed = sum(1 for r in aux or () if r.pose is not None)
        if aux is not None and posed >= config.pose_k:
            pc = oracle_mod.build_pose_clusters(train_ann, aux, vocab,
                                                config.pose_k, config.seed,
                                                config.samples_per_video)
            oracle_preds["pose"] = oracle_mod.pose_oracle(pc, test_ann, aux, vocab)
        else:
            sec["single"]["pose"] = "skipped: not enough posed frames"
    else:
        sec["single"]["temporal"] = "skipped: no training annotations"

    for oname, preds in oracle_preds.items():
        res = classification_map(preds, test_ann, vocab)
        sec["single"][oname] = res.mean_ap
        csvs[f"oracle_{oname}.preds"] = dump_video_predictions(preds)
        for mname, m in methods.items():
            sub = [p for p in m["video"]
                   if p.video_id in {a.video_id for a in test_ann}]
            combined = oracle_mod.combine(preds, sub)
            cres = classification_map(combined, test_ann, vocab)
            sec["combined"][f"{oname}+{mname}"] = cres.mean_ap
    rows = ["oracle,map"] + [f"{k},{v!r}" for k, v in sec["single"].items()
                             if not isinstance(v, str)]
    rows += ["combination,map"] + [f"{k},{v!r}" for k, v in sec["combined"].items()]
    csvs["oracle_eval.csv"] = "\n".join(rows) + "\n"
    return sec


def _render_summary(report):
    lines = ["# Diagnostic report", ""]
    lines.append(f"Methods: {', '.join(report['config']['methods'])}")
    lines.append(f"Seed: {report['config']['seed']}")
    lines.append("")
    lines.append("## Evaluation")
    for name, ev in report["evaluation"].items():
        ci = ev.get("classification_map_ci")
        lines.append(f"- {name}: classification mAP {ev['classification_map']:.4f}"
                     f" (95% CI [{ci[0]:.4f}, {ci[1]:.4f}])")
        if "localization_map" in ev:
            lines.append(f"  - localization mAP {ev['localization_map']:.4f}, "
                         f"boundary-excluded {ev['boundary_excluded_map']:.4f} "
                         f"(gain {ev['boundary_gain']:.4f})")
    lines.append(f"- perfect-classifier localization oracle: "
                 f"{report['perfect_classifier_localization_map']:.4f}")
    lines.append("")
    if isinstance(report["agreement"], dict):
        ag = report["agreement"]
        lines.append("## Annotator agreement")
        lines.append(f"- mean IOU {ag['iou']['mean']:.4f}, boundary-excluded "
                     f"{ag['iou_noboundary']['mean']:.4f}")
        lines.append("")
    lines.append("## Oracles (classification mAP)")
    for k, v in report["oracles"]["single"].items():
        lines.append(f"- {k}: {v:.4f}" if not isinstance(v, str) else f"- {k}: {v}")
    for k, v in report["oracles"]["combined"].items():
        lines.append(f"- {k}: {v:.4f}")
    lines.append("")
    lines.append("## Suggestions")
    for r in report["suggestions"]:
        flag = "TRIGGERED" if r["triggered"] else "not triggered"
        lines.append(f"- [{flag}] {r['rule']} ({r['method']}; "
                     f"thresholds {r['thresholds']}): {r['text']}")
    lines.append("")
    return "\n".join(lines)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _write_bundle(out_dir, report, csvs):
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as f:
            json.dump(report, f, indent=2, default=_json_default)
            f.write("\n")
        written.append(path)
        path = os.path.join(out_dir, "summary.md")
        with open(path, "w") as f:
            f.write(_render_summary(report))
        written.append(path)
        for name, text in csvs.items():
            path = os.path.join(out_dir, name)
            with open(path, "w") as f:
                f.write(text)
            written.append(path)
    except BaseException:
        for p in written:
            if os.path.exists(p):
                os.remove(p)
        raise


# --- CLI ---

def _add_common(p, train=False):
    p.add_argument("--vocab", required=True)
    p.add_argument("--test", required=True)
    if train:
        p.add_argument("--train")
    p.add_argument("--pred", action="append", default=[],
                   metavar="NAME=PATH")
    p.add_argument("--aux")
    p.add_argument("--reannotations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames-per-video", type=int, default=25)
    p.add_argument("--out", default="diagnostics")
    p.add_argument("--workers", type=int, default=1)


def _parse_preds(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"--pred expects NAME=PATH, got {pair!r}")
        name, path = pair.split("=", 1)
        out[name] = path
    return out


def _config_from_args(args):
    return RunConfig(
        vocab=args.vocab, test=args.test, train=getattr(args, "train", None),
        predictions=_parse_preds(args.pred), aux=args.aux,
        reannotations=args.reannotations, seed=args.seed,
        samples_per_video=args.frames_per_video, out=args.out,
        workers=args.workers,
        bootstrap_resamples=getattr(args, "bootstrap", 10000),
    )


def main(argv=None):
    parser = argparse.ArgumentParser(prog="actdiag",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("validate", "eval", "boundary", "agreement", "errors",
                "attributes", "correlate", "oracles", "smooth", "context",
                "report"):
        p = sub.add_parser(cmd)
        _add_common(p, train=cmd in ("attributes", "oracles", "context",
                                     "report", "correlate"))
        if cmd == "report":
            p.add_argument("--bootstrap", type=int, default=10000)
    args = parser.parse_args(argv)
    config = _config_from_args(args)

    with open(config.vocab) as f:
        vocab = load_vocabulary(f)
    with open(config.test) as f:
        test_ann = load_annotations(f, vocab)

    if args.command == "report":
        report = run_report(config)
        print(f"report written to {config.out}")
        for name, ev in report["evaluation"].items():
            print(f"{name}: classification mAP {ev['classification_map']:.4f}")
        return 0

    methods = _load_methods(config, vocab)
    s = config.samples_per_video
    if args.command == "validate":
        aux = None
        if config.aux:
            with open(config.aux) as f:
                aux = load_auxiliary(f)
        rep = validate_corpus(test_ann, {n: m["video"] for n, m in methods.items()}, aux)
        for line in rep.findings or ["no findings"]:
            print(line)
        if rep.auxiliary_coverage is not None:
            print(f"auxiliary coverage: {rep.auxiliary_coverage:.3f}")
    elif args.command == "eval":
        for name, m in methods.items():
            cls = classification_map(m["video"], test_ann, vocab)
            print(f"{name}: classification mAP {cls.mean_ap:.4f}")
            if m["frame"] is not None:
                loc = localization_map(m["frame"], test_ann, vocab, s)
                print(f"{name}: localization mAP {loc.mean_ap:.4f}")
    elif args.command == "boundary":
        oracle = boundary_mod.perfect_classifier_localization(test_ann, vocab, s)
        print(f"perfect-classifier localization mAP {oracle.mean_ap:.4f}")
        for name, m in methods.items():
            if m["frame"] is None:
                continue
            loc = localization_map(m["frame"], test_ann, vocab, s)
            bex = boundary_mod.boundary_excluded_eval(m["frame"], test_ann, vocab, s)
            print(f"{name}: localization {loc.mean_ap:.4f} -> "
                  f"boundary-excluded {bex.mean_ap:.4f}")
    elif args.command == "agreement":
        if not config.reannotations:
            raise SystemExit("agreement requires --reannotations")
        with open(config.reannotations) as f:
            reann = load_annotations(f, vocab)
        _, summary = boundary_mod.agreement(reann, test_ann, seed=config.seed)
        print(json.dumps(summary, indent=2, default=_json_default))
    elif args.command == "errors":
        for name, m in methods.items():
            if m["frame"] is None:
                print(f"{name}: skipped (no frame predictions)")
                continue
            bd = erroranalysis.classify_top_predictions(m["frame"], test_ann, vocab, s)
            means = np.nanmean(bd.fractions[bd.mask], axis=0)
            print(f"{name}: " + " ".join(f"{k}={v:.3f}" for k, v in
                                         zip(erroranalysis.LABELS, means)))
    elif args.command == "attributes":
        train_ann = test_ann
        if getattr(args, "train", None):
            with open(args.train) as f:
                train_ann = load_annotations(f, vocab)
        aux = None
        if config.aux:
            with open(config.aux) as f:
                aux = load_auxiliary(f)
        table = attr_mod.category_attributes(vocab, train_ann, aux, seed=config.seed)
        sys.stdout.write(attr_mod.category_attributes_csv(table))
    elif args.command == "correlate":
        train_ann = test_ann
        if getattr(args, "train", None):
            with open(args.train) as f:
                train_ann = load_annotations(f, vocab)
        aux = None
        if config.aux:
            with open(config.aux) as f:
                aux = load_auxiliary(f)
        table = attr_mod.category_attributes(vocab, train_ann, aux, seed=config.seed)
        for name, m in methods.items():
            cls = classification_map(m["video"], test_ann, vocab)
            for row in _correlate(cls.per_class_ap, cls.class_mask, table,
                                  vocab, CATEGORY_ATTRS, 10000, config.seed):
                print(f"{name} {row['attribute']}: rho={row['rho']:.3f} "
                      f"p={row['p']:.4f} n={row['n']}")
    elif args.command == "oracles":
        train_ann = None
        if getattr(args, "train", None):
            with open(args.train) as f:
                train_ann = load_annotations(f, vocab)
        aux = None
        if config.aux:
            with open(config.aux) as f:
                aux = load_auxiliary(f)
        csvs = {}
        sec = _oracle_section(config, vocab, test_ann, train_ann, aux, methods, csvs)
        print(json.dumps(sec, indent=2, default=_json_default))
    elif args.command == "smooth":
        for name, m in methods.items():
            if m["frame"] is None:
                print(f"{name}: skipped (no frame predictions)")
                continue
            sweep = temporal_mod.smoothing_sweep(m["frame"], test_ann, vocab,
                                                 DEFAULT_SWEEP, s)
            for f_, lm, cm in zip(sweep.fractions, sweep.loc_map, sweep.cls_map):
                print(f"{name} fraction={f_}: loc {lm:.4f} cls {cm:.4f}")
            print(f"{name} best fraction: {sweep.best_fraction}")
    elif args.command == "context":
        for name, m in methods.items():
            cb = temporal_mod.context_benefit(m["video"], test_ann, vocab)
            print(f"{name}: mean context benefit {cb.counts.mean():.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
