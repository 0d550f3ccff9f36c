"""Detection benchmarking: frame scorers, matching, ROC sweeps, reports.

Every method is wrapped as a *scorer*: a callable mapping a frame to a
valid-mode response map (one score per fully-inside window position,
degenerate windows scoring 0.0) plus ``name`` and ``window`` attributes.
Detection is local maxima of the response followed by greedy non-maximum
suppression; detections are matched one-to-one to ground truth by
ascending distance, and ROC curves aggregate hits over all truths against
false alarms per frame.
"""

import csv
import os
import re
import time
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import filterbank as fb
from . import gridio
from . import nccnet as nn
from . import patchmath as pm

DEFAULT_NMS_RADIUS = 7.0
DEFAULT_MATCH_RADIUS = 2.0
DEFAULT_THRESHOLD_COUNT = 512


# ---------------------------------------------------------------------------
# scorers


def frame_to_u16(frame):
    """Round and clamp a float frame onto the u16 pixel range."""
    f = np.asarray(frame, dtype=float)
    return np.clip(np.rint(f), 0, 0xFFFF).astype(np.uint16)


def _check_frame(frame, window):
    f = np.asarray(frame, dtype=float)
    if f.ndim != 2:
        raise ValueError(f"frame must be 2-D, got shape {f.shape}")
    if f.shape[0] < window or f.shape[1] < window:
        raise ValueError(
            f"frame {f.shape} smaller than the {window}x{window} window"
        )
    return f


class NccFilterScorer:
    """NCC response of one fixed filter (float pipeline).

    ``mode`` selects the normalization applied to each window and to the
    filter itself; ``none`` degrades to plain (unnormalized) correlation.
    """

    def __init__(self, grid, mode=pm.NORM_STD, name=None, chunk_rows=48):
        g = pm.as_patch(grid, "filter")
        self.window = g.shape[0]
        self.mode = mode
        self.name = name or f"nccfilter-{self.window}-{mode}"
        self.chunk_rows = chunk_rows
        if mode == pm.NORM_NONE:
            self._fvec = g.reshape(-1).copy()
        else:
            self._fvec = pm.normalize(g, mode).reshape(-1)

    def __call__(self, frame):
        f = _check_frame(frame, self.window)
        k = self.window
        wins = sliding_window_view(f, (k, k))
        out = np.empty(wins.shape[:2])
        for r0 in range(0, wins.shape[0], self.chunk_rows):
            block = wins[r0 : r0 + self.chunk_rows]
            flat = block.reshape(-1, k * k)
            norm, valid = nn.normalize_flat_batch(flat, self.mode)
            scores = norm @ self._fvec
            scores[~valid] = 0.0
            out[r0 : r0 + block.shape[0]] = scores.reshape(block.shape[:2])
        return out


class NetworkScorer:
    """Response of a trained filter bank applied at every window."""

    def __init__(self, net, name=None, chunk_rows=48):
        self.net = net
        self.window = net.filter_size
        self.name = name or f"net-{net.num_filters}x{net.filter_size}-{net.norm_mode}"
        self.chunk_rows = chunk_rows

    def __call__(self, frame):
        f = _check_frame(frame, self.window)
        k = self.window
        wins = sliding_window_view(f, (k, k))
        out = np.empty(wins.shape[:2])
        for r0 in range(0, wins.shape[0], self.chunk_rows):
            block = wins[r0 : r0 + self.chunk_rows]
            scores, _ = nn.forward_batch(self.net, block.reshape(-1, k, k))
            out[r0 : r0 + block.shape[0]] = scores.reshape(block.shape[:2])
        return out


class MadRatioScorer:
    """Center-pixel deviation ratio |p_c - mean| / mad over each window."""

    def __init__(self, window=15, name=None, chunk_rows=48):
        if window % 2 == 0 or window < 3:
            raise ValueError(f"window must be odd and >= 3, got {window}")
        self.window = window
        self.name = name or "mad-ratio"
        self.chunk_rows = chunk_rows

    def __call__(self, frame):
        f = _check_frame(frame, self.window)
        k = self.window
        hw = k // 2
        wins = sliding_window_view(f, (k, k))
        centers = f[hw : f.shape[0] - hw, hw : f.shape[1] - hw]
        out = np.empty(wins.shape[:2])
        for r0 in range(0, wins.shape[0], self.chunk_rows):
            block = wins[r0 : r0 + self.chunk_rows]
            flat = block.reshape(-1, k * k)
            mu = flat.mean(axis=1)
            mad = np.mean(np.abs(flat - mu[:, None]), axis=1)
            dev = np.abs(centers[r0 : r0 + block.shape[0]].reshape(-1) - mu)
            scores = np.where(mad > pm.MAD_MIN, dev / np.where(mad > 0, mad, 1.0), 0.0)
            out[r0 : r0 + block.shape[0]] = scores.reshape(block.shape[:2])
        return out


class FixedMadScorer:
    """Integer MAD-NCC pipeline; scores are the fixed outputs as floats."""

    def __init__(self, raw_taps, qformat=fb.TAP_QFORMAT, name=None,
                 out_qformat=fb.OUT_QFORMAT):
        raw = np.asarray(raw_taps)
        self.raw = raw
        self.qformat = qformat
        self.out_qformat = out_qformat
        self.window = raw.shape[0]
        self.name = name or f"fixed-mad-{self.window}"

    def __call__(self, frame):
        f = _check_frame(frame, self.window)
        u16 = frame_to_u16(f)
        raw, degenerate = fb.mad_ncc_fixed_response(
            u16, self.raw, qformat=self.qformat, out_qformat=self.out_qformat
        )
        out = raw.astype(float) / self.out_qformat.scale
        out[degenerate] = 0.0
        return out


# ---------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class Detection:
    row: int
    col: int
    score: float


def _local_maxima(response):
    """Cells >= all in-bounds 8-neighbors and > at least one of them.

    Plateau interiors and fully flat responses yield nothing; two-cell
    ties both qualify and are left for NMS to thin.  Missing neighbors
    beyond the response border neither disqualify a cell nor count as the
    required strictly-smaller neighbor.  A 1x1 response is its own peak.
    """
    r = np.asarray(response, dtype=float)
    if r.size == 1:
        return np.ones(r.shape, dtype=bool)
    lo = np.pad(r, 1, constant_values=-np.inf)  # missing: always <=
    hi = np.pad(r, 1, constant_values=np.inf)  # missing: never strictly less
    ge_all = np.ones(r.shape, dtype=bool)
    gt_any = np.zeros(r.shape, dtype=bool)
    h, w = r.shape
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            ge_all &= r >= lo[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
            gt_any |= r > hi[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    return ge_all & gt_any


def detect_candidates(frame, scorer, nms_radius=DEFAULT_NMS_RADIUS):
    """All NMS-surviving local maxima with their scores, threshold-free.

    Returns detections in frame coordinates (window centers), sorted by
    descending score with (row, col) tie-breaks; deterministic.
    """
    response = scorer(np.asarray(frame, dtype=float))
    mask = _local_maxima(response)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return []
    scores = response[rows, cols]
    order = np.lexsort((cols, rows, -scores))
    rows, cols, scores = rows[order], cols[order], scores[order]
    r2 = float(nms_radius) ** 2
    keep_r = np.empty(rows.size)
    keep_c = np.empty(rows.size)
    kept = []
    m = 0
    for i in range(rows.size):
        if m:
            d2 = (keep_r[:m] - rows[i]) ** 2 + (keep_c[:m] - cols[i]) ** 2
            if np.any(d2 <= r2):
                continue
        keep_r[m] = rows[i]
        keep_c[m] = cols[i]
        m += 1
        kept.append(i)
    half = scorer.window // 2
    return [
        Detection(int(rows[i] + half), int(cols[i] + half), float(scores[i]))
        for i in kept
    ]


def sliding_detect(frame, scorer, threshold, nms_radius=DEFAULT_NMS_RADIUS):
    """Detections = NMS-surviving local maxima with score > threshold.

    Thresholding after suppression equals suppressing the thresholded set:
    greedy NMS only ever suppresses downward in score order.
    """
    return [
        d for d in detect_candidates(frame, scorer, nms_radius)
        if d.score > threshold
    ]


# ---------------------------------------------------------------------------
# matching


@dataclass(frozen=True)
class MatchResult:
    true_positives: int
    false_alarms: int
    false_negatives: int
    matches: tuple  # ((det_index, truth_index), ...)


def _as_truths(truths):
    t = np.asarray(truths, dtype=float)
    if t.size == 0:
        return np.zeros((0, 2))
    if t.ndim != 2 or t.shape[1] != 2:
        raise ValueError(f"truths must be (T, 2), got shape {t.shape}")
    return t


def match_detections(detections, truths, match_radius=DEFAULT_MATCH_RADIUS):
    """Greedy one-to-one matching by ascending detection-truth distance.

    A detection within ``match_radius`` (Euclidean, inclusive) of an
    unclaimed truth claims the nearest one; ties break on detection index
    then truth index.  Every unmatched detection is a false alarm, every
    unmatched truth a missed detection, so two detections near one truth
    count one hit plus one false alarm.
    """
    t = _as_truths(truths)
    dets = list(detections)
    pairs = []
    for di, d in enumerate(dets):
        if t.shape[0]:
            dist = np.hypot(t[:, 0] - d.row, t[:, 1] - d.col)
            for ti in np.nonzero(dist <= match_radius)[0]:
                pairs.append((float(dist[ti]), di, int(ti)))
    pairs.sort()
    det_used = [False] * len(dets)
    truth_used = [False] * t.shape[0]
    matches = []
    for _, di, ti in pairs:
        if det_used[di] or truth_used[ti]:
            continue
        det_used[di] = True
        truth_used[ti] = True
        matches.append((di, ti))
    tp = len(matches)
    return MatchResult(
        true_positives=tp,
        false_alarms=len(dets) - tp,
        false_negatives=t.shape[0] - tp,
        matches=tuple(matches),
    )


# ---------------------------------------------------------------------------
# ROC


@dataclass(frozen=True)
class RocCurve:
    method: str
    thresholds: np.ndarray  # strictly decreasing
    hit_rates: np.ndarray  # non-decreasing along the sweep
    fa_per_frame: np.ndarray  # non-decreasing along the sweep
    auc: float
    frame_count: int
    truth_count: int


def default_thresholds(scored_frames, count=DEFAULT_THRESHOLD_COUNT):
    """Evenly spaced descending sweep between min and max candidate score."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    scores = [d.score for cands, _ in scored_frames for d in cands]
    if not scores:
        return np.array([0.0])
    lo, hi = min(scores), max(scores)
    if lo == hi:
        return np.array([hi])
    return np.linspace(hi, lo, count)


def _auc_from_points(hit, fa):
    famax = float(fa.max()) if fa.size else 0.0
    if famax == 0.0:
        # vertical curve: nothing to integrate over, report best hit rate
        return float(hit.max()) if hit.size else 0.0
    order = np.argsort(fa, kind="stable")
    return float(np.trapezoid(hit[order], fa[order]) / famax)


def roc_curve(scored_frames, thresholds, match_radius=DEFAULT_MATCH_RADIUS,
              method="unknown"):
    """Sweep thresholds over pre-scored frames.

    ``scored_frames`` is a list of ``(candidates, truths)`` pairs where
    candidates come from :func:`detect_candidates`.  For each threshold the
    per-frame detection set is the candidates scoring above it, matched
    one-to-one against that frame's truths; hit rate aggregates true
    positives over all truths while false alarms average per frame.  The
    area under the curve integrates hit rate over false alarms per frame,
    normalized by the largest false-alarm rate the sweep reached (the
    abscissa has no natural upper bound).
    """
    frames = [(list(cands), _as_truths(truths)) for cands, truths in scored_frames]
    if not frames:
        raise ValueError("no frames to sweep")
    total_truths = sum(t.shape[0] for _, t in frames)
    if total_truths == 0:
        raise ValueError("no ground truth targets in any frame")
    thr = np.sort(np.asarray(thresholds, dtype=float))[::-1]
    if thr.size == 0:
        raise ValueError("no thresholds")

    # Per frame: candidate scores (descending already) and the ascending
    # (distance, det, truth) pair list; greedy matching of any threshold's
    # surviving subset walks the same sorted pairs, skipping filtered
    # detections, which matches match_detections on the subset because
    # filtering by score preserves detection order.
    prep = []
    for cands, t in frames:
        scores = np.array([d.score for d in cands])
        pairs = []
        for di, d in enumerate(cands):
            if t.shape[0]:
                dist = np.hypot(t[:, 0] - d.row, t[:, 1] - d.col)
                for ti in np.nonzero(dist <= match_radius)[0]:
                    pairs.append((float(dist[ti]), di, int(ti)))
        pairs.sort()
        prep.append((scores, pairs, t.shape[0]))

    hits = np.empty(thr.size)
    fas = np.empty(thr.size)
    for k, t_k in enumerate(thr):
        tp_total = 0
        det_total = 0
        for scores, pairs, n_truth in prep:
            det_total += int(np.count_nonzero(scores > t_k))
            if not n_truth or not pairs:
                continue
            truth_used = [False] * n_truth
            det_used = set()
            for _, di, ti in pairs:
                if scores[di] <= t_k or di in det_used or truth_used[ti]:
                    continue
                det_used.add(di)
                truth_used[ti] = True
                tp_total += 1
        hits[k] = tp_total / total_truths
        fas[k] = (det_total - tp_total) / len(frames)
    return RocCurve(
        method=method,
        thresholds=thr,
        hit_rates=hits,
        fa_per_frame=fas,
        auc=_auc_from_points(hits, fas),
        frame_count=len(frames),
        truth_count=total_truths,
    )


# ---------------------------------------------------------------------------
# method registry


GAUSS_METHODS = {
    "gauss-0.5": 0.5,
    "gauss-1.2": 1.2,
    "gauss-2.0": 2.0,
}
HAT_IDEAL_METHODS = {"hat15-ideal": 15, "hat9-ideal": 9, "hat7-ideal": 7}
HAT_FIXED_METHODS = {"hat9-fixed-mad": 9, "hat7-fixed-mad": 7, "hat5-fixed-mad": 5}

BUILTIN_METHODS = (
    tuple(GAUSS_METHODS)
    + ("mad-ratio",)
    + tuple(HAT_IDEAL_METHODS)
    + tuple(HAT_FIXED_METHODS)
)


def resolve_method(name):
    """Turn a method name into a scorer.

    Built-ins cover the Gaussian matched filters, the MAD deviation ratio,
    and the hat family (ideal float and cropped fixed-point variants).
    ``net:<path>``, ``filter:<path>`` and ``qfilter:<path>`` load trained
    networks, plain filter grids (STD NCC) and quantized integer filters.
    """
    if name in GAUSS_METHODS:
        return NccFilterScorer(
            fb.gaussian_grid(15, GAUSS_METHODS[name]), pm.NORM_STD, name=name
        )
    if name == "mad-ratio":
        return MadRatioScorer(name=name)
    if name in HAT_IDEAL_METHODS:
        size = HAT_IDEAL_METHODS[name]
        grid = fb.crop_grid(fb.ricker_hat_grid(15), size)
        return NccFilterScorer(grid, pm.NORM_STD, name=name)
    if name in HAT_FIXED_METHODS:
        size = HAT_FIXED_METHODS[name]
        grid = fb.crop_grid(fb.ricker_hat_grid(15), size)
        return FixedMadScorer(fb.prepare_fixed_taps(grid), name=name)
    if name.startswith("net:"):
        return NetworkScorer(nn.load_network(name[4:]), name=name)
    if name.startswith("filter:"):
        return NccFilterScorer(gridio.read_grid(name[7:]), pm.NORM_STD, name=name)
    if name.startswith("qfilter:"):
        raw, qf = fb.load_quantized_filter(name[8:])
        return FixedMadScorer(raw, qformat=qf, name=name)
    raise ValueError(f"unknown method {name!r}")


# ---------------------------------------------------------------------------
# benchmark driver


@dataclass
class BenchConfig:
    nms_radius: float = DEFAULT_NMS_RADIUS
    match_radius: float = DEFAULT_MATCH_RADIUS
    threshold_count: int = DEFAULT_THRESHOLD_COUNT
    include_timing: bool = True


@dataclass
class MethodResult:
    name: str
    curve: RocCurve
    ms_per_frame: float  # None when timing disabled
    frame_candidates: list  # list per frame of Detection lists


@dataclass
class BenchReport:
    results: list
    truths: list  # per-frame (T, 2) arrays
    frame_count: int
    config: BenchConfig

    def auc(self, method):
        for r in self.results:
            if r.name == method:
                return r.curve.auc
        raise KeyError(method)


def run_benchmark(frames, truths, methods, config=None):
    """Score every frame with every method and sweep a ROC per method.

    ``methods`` entries are either name strings (see
    :func:`resolve_method`) or ready-made scorer objects.
    """
    cfg = config or BenchConfig()
    frames = [np.asarray(f, dtype=float) for f in frames]
    truth_arrays = [_as_truths(t) for t in truths]
    if len(frames) != len(truth_arrays):
        raise ValueError(
            f"{len(frames)} frames but {len(truth_arrays)} truth lists"
        )
    if not frames:
        raise ValueError("no frames")
    results = []
    for method in methods:
        scorer = resolve_method(method) if isinstance(method, str) else method
        start = time.perf_counter()
        per_frame = [
            detect_candidates(f, scorer, cfg.nms_radius) for f in frames
        ]
        elapsed = time.perf_counter() - start
        scored = list(zip(per_frame, truth_arrays))
        thresholds = default_thresholds(scored, cfg.threshold_count)
        curve = roc_curve(
            scored, thresholds, match_radius=cfg.match_radius,
            method=scorer.name,
        )
        results.append(
            MethodResult(
                name=scorer.name,
                curve=curve,
                ms_per_frame=(
                    1000.0 * elapsed / len(frames) if cfg.include_timing else None
                ),
                frame_candidates=per_frame,
            )
        )
    return BenchReport(
        results=results,
        truths=truth_arrays,
        frame_count=len(frames),
        config=cfg,
    )


# ---------------------------------------------------------------------------
# report files


def _safe_filename(name):
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def write_benchmark_report(report, out_dir):
    """Write roc.csv, auc.csv, truths.csv, meta.csv and per-method
    detection dumps under ``out_dir``.  Every float is written with repr,
    so reports are byte-stable for identical inputs (disable timing for a
    fully deterministic auc.csv)."""
    os.makedirs(out_dir, exist_ok=True)
    det_dir = os.path.join(out_dir, "detections")
    os.makedirs(det_dir, exist_ok=True)

    with open(os.path.join(out_dir, "roc.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "threshold", "hit_rate", "fa_per_frame"])
        for r in report.results:
            c = r.curve
            for t, h, fa in zip(c.thresholds, c.hit_rates, c.fa_per_frame):
                w.writerow([r.name, repr(float(t)), repr(float(h)), repr(float(fa))])

    with open(os.path.join(out_dir, "auc.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "auc", "ms_per_frame"])
        for r in report.results:
            ms = "" if r.ms_per_frame is None else repr(float(r.ms_per_frame))
            w.writerow([r.name, repr(float(r.curve.auc)), ms])

    with open(os.path.join(out_dir, "truths.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "row", "col"])
        for fi, t in enumerate(report.truths):
            for row, col in t:
                w.writerow([fi, int(row), int(col)])

    with open(os.path.join(out_dir, "meta.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        w.writerow(["frame_count", report.frame_count])
        w.writerow(["nms_radius", repr(float(report.config.nms_radius))])
        w.writerow(["match_radius", repr(float(report.config.match_radius))])
        w.writerow(["threshold_count", report.config.threshold_count])

    for r in report.results:
        path = os.path.join(det_dir, _safe_filename(r.name) + ".csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "row", "col", "score"])
            for fi, dets in enumerate(r.frame_candidates):
                for d in dets:
                    w.writerow([fi, d.row, d.col, repr(d.score)])


def read_detection_dump(path):
    """Read one detections/<method>.csv back into per-frame lists."""
    with open(path, "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["frame", "row", "col", "score"]:
        raise ValueError(f"{path}: not a detection dump")
    by_frame = {}
    for rec in rows[1:]:
        fi = int(rec[0])
        by_frame.setdefault(fi, []).append(
            Detection(int(rec[1]), int(rec[2]), float(rec[3]))
        )
    return by_frame


def read_benchmark_scores(out_dir):
    """Load a written report's inputs back for a ROC re-sweep.

    Returns ``(per_method, truths, meta)`` where ``per_method`` maps each
    method name (from roc.csv order) to per-frame candidate lists.
    """
    meta = {}
    with open(os.path.join(out_dir, "meta.csv"), "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["key", "value"]:
        raise ValueError("meta.csv: bad header")
    for key, value in rows[1:]:
        meta[key] = value
    frame_count = int(meta["frame_count"])

    truths = [[] for _ in range(frame_count)]
    with open(os.path.join(out_dir, "truths.csv"), "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["frame", "row", "col"]:
        raise ValueError("truths.csv: bad header")
    for fi, row, col in rows[1:]:
        truths[int(fi)].append((float(row), float(col)))
    truths = [np.array(t).reshape(-1, 2) for t in truths]

    with open(os.path.join(out_dir, "auc.csv"), "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["method", "auc", "ms_per_frame"]:
        raise ValueError("auc.csv: bad header")
    methods = [rec[0] for rec in rows[1:]]

    per_method = {}
    det_dir = os.path.join(out_dir, "detections")
    for name in methods:
        dump = read_detection_dump(
            os.path.join(det_dir, _safe_filename(name) + ".csv")
        )
        per_method[name] = [dump.get(fi, []) for fi in range(frame_count)]
    return per_method, truths, meta


def resweep_roc(out_dir, dest_dir):
    """Recompute roc.csv/auc.csv from a stored report's detection dumps."""
    per_method, truths, meta = read_benchmark_scores(out_dir)
    cfg = BenchConfig(
        nms_radius=float(meta["nms_radius"]),
        match_radius=float(meta["match_radius"]),
        threshold_count=int(meta["threshold_count"]),
        include_timing=False,
    )
    results = []
    for name, per_frame in per_method.items():
        scored = list(zip(per_frame, truths))
        thresholds = default_thresholds(scored, cfg.threshold_count)
        curve = roc_curve(
            scored, thresholds, match_radius=cfg.match_radius, method=name
        )
        results.append(
            MethodResult(
                name=name, curve=curve, ms_per_frame=None,
                frame_candidates=per_frame,
            )
        )
    report = BenchReport(
        results=results, truths=truths, frame_count=len(truths), config=cfg
    )
    write_benchmark_report(report, dest_dir)
    return report
