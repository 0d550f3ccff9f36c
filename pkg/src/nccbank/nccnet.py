"""Two-layer NCC network: learned filter bank + ReLU + decision weights.

The model scores a patch ``p`` as

    out = sum_i  w_i * relu( <norm(p), norm(f_i)> )

where ``norm`` is the configured normalization (``std``, ``mad``, or
``none``) applied to both the patch and each filter, ``f_i`` are the raw
filter taps, and ``w_i`` are scalar decision weights.  There are no biases.
Labels are +1 (target) / -1 (clutter) and training minimizes the mean L1
loss ``|out - label|`` with SGD plus classical momentum and weight decay.

All gradients are derived by hand.  Patches are inputs, so gradients flow
only into the filter taps (through the normalization Jacobian, via
:func:`nccbank.patchmath.backprop_normalization`) and into the weights.
Subgradient conventions at the kinks: ``relu'(0) = 0``, ``d|x|/dx = 0`` at
``x = 0``, and ``sign(0) = 0`` inside the MAD backprop.

Because normalization backprop is linear in the upstream gradient, a whole
batch can be pulled through each filter's Jacobian in one call: upstream
gradients are accumulated in normalized-filter space first.
"""

import dataclasses
import os

import numpy as np

from nccbank import gridio
from nccbank import patchmath as pm


@dataclasses.dataclass
class NccNetwork:
    """Filter bank (num_filters, k, k), decision weights (num_filters,),
    and the normalization mode shared by patches and filters."""

    filters: np.ndarray
    weights: np.ndarray
    norm_mode: str = pm.NORM_STD

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.filters.ndim != 3:
            raise ValueError(f"filters must be (N, k, k), got {self.filters.shape}")
        n, kh, kw = self.filters.shape
        if n < 1 or kh != kw or kh < 2:
            raise ValueError(f"bad filter bank shape {self.filters.shape}")
        if self.weights.shape != (n,):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match {n} filters"
            )
        if self.norm_mode not in pm.NORM_MODES:
            raise ValueError(f"unknown normalization mode {self.norm_mode!r}")

    @property
    def num_filters(self):
        return self.filters.shape[0]

    @property
    def filter_size(self):
        return self.filters.shape[1]


@dataclasses.dataclass
class GradientSet:
    filters: np.ndarray
    weights: np.ndarray


@dataclasses.dataclass
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.95
    weight_decay: float = 0.0005
    batch_size: int = 40
    max_epochs: int = 5
    holdout_fraction: float = 0.2
    seed: int = 0


@dataclasses.dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    filter_rel_change: float
    holdout_accuracy: float
    threshold: float


@dataclasses.dataclass
class TrainHistory:
    epochs: list
    train_size: int
    holdout_size: int
    skipped_degenerate: int

    @property
    def final_accuracy(self):
        return self.epochs[-1].holdout_accuracy

    @property
    def final_rel_change(self):
        return self.epochs[-1].filter_rel_change

    @property
    def final_threshold(self):
        return self.epochs[-1].threshold


def init_network(num_filters, filter_size=15, norm_mode=pm.NORM_STD, seed=0):
    """Fresh network: taps i.i.d. uniform on [-0.05, 0.05], weights 1/N."""
    rng = np.random.default_rng(seed)
    filters = rng.uniform(-0.05, 0.05, size=(num_filters, filter_size, filter_size))
    weights = np.full(num_filters, 1.0 / num_filters)
    return NccNetwork(filters=filters, weights=weights, norm_mode=norm_mode)


def normalized_filters(net):
    """Normalize every filter, returned as an (N, k*k) matrix.

    Raises DegeneratePatchError naming the filter if one has gone flat
    (possible in principle under aggressive weight decay).
    """
    flat = net.filters.reshape(net.num_filters, -1)
    out, valid = normalize_flat_batch(flat, net.norm_mode)
    if not np.all(valid):
        bad = int(np.flatnonzero(~valid)[0])
        raise pm.DegeneratePatchError(f"filter {bad} is flat and cannot be normalized")
    return out


def normalize_flat_batch(flat, mode):
    """Row-wise normalization of an (B, n) matrix.

    Returns ``(normalized, valid)`` where degenerate rows are zeroed and
    flagged False instead of raising; callers decide how to treat them.
    """
    x = np.asarray(flat, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected (B, n) matrix, got shape {x.shape}")
    if mode == pm.NORM_NONE:
        return x.copy(), np.ones(x.shape[0], dtype=bool)
    n = x.shape[1]
    q = x - x.mean(axis=1, keepdims=True)
    q -= q.mean(axis=1, keepdims=True)
    if mode == pm.NORM_STD:
        if n < 2:
            raise ValueError("STD normalization needs at least 2 pixels")
        ss = np.sqrt(np.sum(q * q, axis=1, keepdims=True))
        valid = (ss[:, 0] / np.sqrt(n - 1)) > pm.SIGMA_MIN
    elif mode == pm.NORM_MAD:
        mad = np.mean(np.abs(q), axis=1, keepdims=True)
        ss = np.sqrt(n) * mad
        valid = mad[:, 0] > pm.MAD_MIN
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    out = np.divide(q, ss, out=np.zeros_like(q), where=ss > 0)
    out[~valid] = 0.0
    return out, valid


def forward(net, patch):
    """Score a single patch.  Raises DegeneratePatchError on flat input."""
    p = pm.normalize(patch, net.norm_mode).ravel()
    scores = normalized_filters(net) @ p
    return float(np.maximum(scores, 0.0) @ net.weights)


def forward_batch(net, patches):
    """Score a stack of patches (B, k, k).

    Returns ``(outputs, valid)``; degenerate patches get output 0.0 and
    ``valid=False`` rather than raising.
    """
    arr = np.asarray(patches, dtype=float)
    if arr.ndim != 3 or arr.shape[1:] != (net.filter_size, net.filter_size):
        raise ValueError(
            f"patches must be (B, {net.filter_size}, {net.filter_size}), "
            f"got {arr.shape}"
        )
    flat = arr.reshape(arr.shape[0], -1)
    pn, valid = normalize_flat_batch(flat, net.norm_mode)
    scores = pn @ normalized_filters(net).T
    out = np.maximum(scores, 0.0) @ net.weights
    out[~valid] = 0.0
    return out, valid


def loss_and_gradients(net, patches, labels):
    """Mean L1 loss and its gradients over one batch.

    ``patches`` is (B, k, k), ``labels`` (B,) of +/-1.  Gradients are
    averaged over the batch.  Degenerate patches are rejected here; the
    training loop filters them out beforehand.
    """
    arr = np.asarray(patches, dtype=float)
    y = np.asarray(labels, dtype=float)
    if arr.ndim != 3 or arr.shape[0] != y.shape[0]:
        raise ValueError("patches (B, k, k) and labels (B,) must align")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    bsz = arr.shape[0]
    flat = arr.reshape(bsz, -1)
    pn, valid = normalize_flat_batch(flat, net.norm_mode)
    if not np.all(valid):
        raise pm.DegeneratePatchError("batch contains flat patches")
    fn = normalized_filters(net)

    scores = pn @ fn.T                      # (B, N)
    acts = np.maximum(scores, 0.0)
    out = acts @ net.weights                # (B,)
    diff = out - y
    mean_loss = float(np.mean(np.abs(diff)))

    g_out = np.sign(diff) / bsz             # d(mean loss)/d out_b
    g_weights = acts.T @ g_out              # (N,)
    g_scores = np.outer(g_out, net.weights) * (scores > 0.0)
    upstream = g_scores.T @ pn              # (N, n), normalized-filter space

    k = net.filter_size
    g_filters = np.empty_like(net.filters)
    for i in range(net.num_filters):
        g_filters[i] = pm.backprop_normalization(
            upstream[i].reshape(k, k), net.filters[i], net.norm_mode
        )
    return mean_loss, GradientSet(filters=g_filters, weights=g_weights)


def momentum_step(param, grad, velocity, lr, momentum, weight_decay):
    """One classical-momentum SGD update; returns (new_param, new_velocity).

    v <- momentum * v - lr * (grad + weight_decay * param)
    p <- p + v
    """
    v = momentum * velocity - lr * (grad + weight_decay * param)
    return param + v, v


@dataclasses.dataclass
class SgdState:
    filter_velocity: np.ndarray
    weight_velocity: np.ndarray

    @classmethod
    def zeros_like(cls, net):
        return cls(
            filter_velocity=np.zeros_like(net.filters),
            weight_velocity=np.zeros_like(net.weights),
        )


def sgd_update(net, grads, state, config):
    """Apply one momentum step to the network in place."""
    net.filters, state.filter_velocity = momentum_step(
        net.filters,
        grads.filters,
        state.filter_velocity,
        config.learning_rate,
        config.momentum,
        config.weight_decay,
    )
    net.weights, state.weight_velocity = momentum_step(
        net.weights,
        grads.weights,
        state.weight_velocity,
        config.learning_rate,
        config.momentum,
        config.weight_decay,
    )


def calibrate_threshold(scores, labels):
    """Threshold t maximizing accuracy of ``predict = +1 iff score >= t``.

    Needed because a small ReLU bank can emit one-signed outputs, so the
    natural cutoff at 0 may sit outside the score range entirely.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    pos = (y[order] > 0).astype(int)
    total_pos = int(pos.sum())
    cum_pos = np.concatenate([[0], np.cumsum(pos)])  # positives before split i
    idx = np.arange(s.size + 1)
    correct = (total_pos - cum_pos) + (idx - cum_pos)
    # splits inside a run of tied scores are not realizable thresholds
    realizable = np.ones(s.size + 1, dtype=bool)
    realizable[1:-1] = s_sorted[1:] > s_sorted[:-1]
    correct = np.where(realizable, correct, -1)
    best = int(np.argmax(correct))
    if best == 0:
        return float(s_sorted[0] - 1.0)
    if best == s.size:
        return float(s_sorted[-1] + 1.0)
    return float(0.5 * (s_sorted[best - 1] + s_sorted[best]))


def threshold_accuracy(scores, labels, threshold):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    return float(np.mean((s >= threshold) == (y > 0)))


def train(net, patches, labels, config=None):
    """Train the network in place; returns a TrainHistory.

    ``patches`` is (S, k, k) float, ``labels`` (S,) of +/-1.  The data is
    split once into train/holdout using ``config.seed`` (holdout_fraction
    of it held out), flat patches are dropped up front (counted in the
    history), and each epoch shuffles the training split into batches of
    ``batch_size``.  Holdout accuracy uses a threshold calibrated on the
    training split each epoch.  Fully deterministic for a given seed.
    """
    if config is None:
        config = TrainConfig()
    arr = np.asarray(patches, dtype=float)
    y = np.asarray(labels, dtype=float)
    if arr.ndim != 3 or arr.shape[0] != y.shape[0] or arr.shape[0] < 2:
        raise ValueError("need (S, k, k) patches and (S,) labels, S >= 2")
    if arr.shape[1:] != (net.filter_size, net.filter_size):
        raise ValueError(
            f"patch size {arr.shape[1:]} does not match filter size "
            f"{net.filter_size}"
        )
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")

    flat = arr.reshape(arr.shape[0], -1)
    _, valid = normalize_flat_batch(flat, net.norm_mode)
    skipped = int(np.sum(~valid))
    keep = np.flatnonzero(valid)
    if keep.size < 2:
        raise ValueError("fewer than 2 usable patches after dropping flat ones")

    rng = np.random.default_rng(config.seed)
    perm = keep[rng.permutation(keep.size)]
    n_hold = int(round(keep.size * config.holdout_fraction))
    n_hold = min(max(n_hold, 0), keep.size - 1)
    hold_idx = perm[:n_hold]
    train_idx = perm[n_hold:]

    state = SgdState.zeros_like(net)
    history = TrainHistory(
        epochs=[],
        train_size=int(train_idx.size),
        holdout_size=int(hold_idx.size),
        skipped_degenerate=skipped,
    )
    for epoch in range(config.max_epochs):
        start_filters = net.filters.copy()
        order = train_idx[rng.permutation(train_idx.size)]
        losses = []
        counts = []
        for lo in range(0, order.size, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            loss, grads = loss_and_gradients(net, arr[batch], y[batch])
            sgd_update(net, grads, state, config)
            losses.append(loss)
            counts.append(batch.size)
        mean_loss = float(np.average(losses, weights=counts))

        denom = max(float(np.linalg.norm(start_filters)), 1e-30)
        rel_change = float(np.linalg.norm(net.filters - start_filters)) / denom

        train_scores, _ = forward_batch(net, arr[train_idx])
        thr = calibrate_threshold(train_scores, y[train_idx])
        if hold_idx.size:
            hold_scores, _ = forward_batch(net, arr[hold_idx])
            acc = threshold_accuracy(hold_scores, y[hold_idx], thr)
        else:
            acc = threshold_accuracy(train_scores, y[train_idx], thr)
        history.epochs.append(
            EpochStats(
                epoch=epoch,
                mean_loss=mean_loss,
                filter_rel_change=rel_change,
                holdout_accuracy=acc,
                threshold=thr,
            )
        )
    return history


def filter_similarity(a, b):
    """Cosine similarity of two mean-removed filters, in [-1, 1]."""
    return pm.ncc_score(a, b, pm.NORM_STD)


def max_pairwise_similarity(net):
    """Largest |similarity| over distinct filter pairs (0.0 for N = 1)."""
    best = 0.0
    for i in range(net.num_filters):
        for j in range(i + 1, net.num_filters):
            best = max(best, abs(filter_similarity(net.filters[i], net.filters[j])))
    return best


def save_network(net, path):
    """Write a network to a text file; exact float round-trip."""
    lines = [
        "nccnet 1",
        f"norm_mode {net.norm_mode}",
        f"filters {net.num_filters}",
    ]
    for i in range(net.num_filters):
        lines.append(gridio.format_grid(net.filters[i]).rstrip("\n"))
    lines.append("weights " + " ".join(repr(v) for v in net.weights.tolist()))
    text = "\n".join(lines) + "\n"
    if isinstance(path, (str, os.PathLike)):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        path.write(text)


def load_network(path):
    """Read a network written by :func:`save_network`."""
    if isinstance(path, (str, os.PathLike)):
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    else:
        text = path.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != ["nccnet", "1"]:
        raise ValueError("not a version-1 nccnet file")
    if len(lines) < 4:
        raise ValueError("truncated nccnet file")
    tok = lines[1].split()
    if len(tok) != 2 or tok[0] != "norm_mode" or tok[1] not in pm.NORM_MODES:
        raise ValueError(f"bad norm_mode line: {lines[1]!r}")
    mode = tok[1]
    tok = lines[2].split()
    if len(tok) != 2 or tok[0] != "filters":
        raise ValueError(f"bad filters line: {lines[2]!r}")
    count = int(tok[1])
    if count < 1:
        raise ValueError("filter count must be positive")
    pos = 3
    grids = []
    for i in range(count):
        if pos >= len(lines):
            raise ValueError(f"missing grid for filter {i}")
        dims = lines[pos].split()
        if len(dims) != 2:
            raise ValueError(f"bad grid header for filter {i}: {lines[pos]!r}")
        rows = int(dims[0])
        block = "\n".join(lines[pos : pos + 1 + rows])
        grids.append(gridio.parse_grid(block))
        pos += 1 + rows
    if pos >= len(lines) or not lines[pos].startswith("weights"):
        raise ValueError("missing weights line")
    wtok = lines[pos].split()[1:]
    if len(wtok) != count:
        raise ValueError(f"expected {count} weights, found {len(wtok)}")
    weights = np.array([float(t) for t in wtok])
    return NccNetwork(filters=np.stack(grids), weights=weights, norm_mode=mode)
