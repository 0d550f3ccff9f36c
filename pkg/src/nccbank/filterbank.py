"""Engineered detection filters and the fixed-point MAD-NCC pipeline.

This module provides the non-learned half of the toolkit:

* Gaussian matched filters and the center-surround "hat" filter (a Ricker
  wavelet with a small central pit that de-tunes it from isolated
  bad-pixel impulses), plus a fitter that recovers hat parameters from an
  arbitrary filter such as a trained one.
* Cropping (central trim) and Q-format quantization for hardware-sized
  variants.
* A bit-exact integer MAD-NCC scorer modeling an FPGA datapath: 16-bit
  unsigned pixels, 32-bit sums and products, a 48-bit accumulator, all
  divisions truncating toward zero, output in Q(16, 10).  Because patches
  are square, sqrt(n) is just the patch side, so the entire pipeline is
  square-root free.
* Analytic per-frame operation counts for the benchmarked scorers, and an
  instrumented scan whose counted square roots realize the STD cost model.
"""

import csv
import dataclasses
import math
import os

import numpy as np

from nccbank import patchmath as pm

DEV_STD = "std"
DEV_MAD = "mad"
DEV_MODES = (DEV_STD, DEV_MAD)


@dataclasses.dataclass(frozen=True)
class QFormat:
    """Signed fixed-point format: value = raw / 2**frac_bits."""

    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if not (2 <= self.total_bits <= 32):
            raise ValueError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not (0 <= self.frac_bits < self.total_bits):
            raise ValueError(
                f"frac_bits must be in [0, {self.total_bits - 1}], "
                f"got {self.frac_bits}"
            )

    @property
    def raw_min(self):
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self):
        return (1 << (self.total_bits - 1)) - 1

    @property
    def scale(self):
        return 1 << self.frac_bits

    @property
    def max_value(self):
        """Largest representable magnitude, (2**(t-1) - 1) / 2**f."""
        return self.raw_max / self.scale


TAP_QFORMAT = QFormat(8, 7)
OUT_QFORMAT = QFormat(16, 10)


@dataclasses.dataclass
class FilterSpec:
    """A named 2-D filter with deviation-mode and precision metadata.

    ``grid`` always holds float taps.  For fixed-precision filters ``raw``
    holds the quantized integers and ``grid`` their dequantized values;
    for ideal filters ``raw`` is None.
    """

    name: str
    grid: np.ndarray
    deviation_mode: str = DEV_STD
    qformat: QFormat = None
    raw: np.ndarray = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim != 2 or self.grid.shape[0] != self.grid.shape[1]:
            raise ValueError(f"filter grid must be square, got {self.grid.shape}")
        if self.grid.shape[0] % 2 == 0:
            raise ValueError(f"filter side must be odd, got {self.grid.shape[0]}")
        if self.deviation_mode not in DEV_MODES:
            raise ValueError(f"unknown deviation mode {self.deviation_mode!r}")
        if (self.qformat is None) != (self.raw is None):
            raise ValueError("qformat and raw taps must be given together")
        if self.raw is not None:
            self.raw = np.asarray(self.raw)
            if self.raw.shape != self.grid.shape:
                raise ValueError("raw taps must match grid shape")

    @property
    def size(self):
        return self.grid.shape[0]

    @property
    def precision(self):
        return "ideal" if self.qformat is None else "fixed"


@dataclasses.dataclass
class HatParams:
    """Center-surround profile: a 2-D Ricker wavelet sampled on
    [-support_halfwidth, +support_halfwidth]^2 minus a narrow Gaussian pit
    of amplitude pit_depth and width pit_radius at the center."""

    support_halfwidth: float = 7.0
    ricker_sigma: float = 2.0
    pit_depth: float = 0.5
    pit_radius: float = 0.5

    def __post_init__(self):
        if self.support_halfwidth <= 0:
            raise ValueError("support_halfwidth must be > 0")
        if self.ricker_sigma <= 0:
            raise ValueError("ricker_sigma must be > 0")
        if self.pit_depth < 0:
            raise ValueError("pit_depth must be >= 0")
        if self.pit_radius <= 0:
            raise ValueError("pit_radius must be > 0")


def _radial_squared(size, halfwidth):
    # Offsets built from exact integer lattice steps so that the squared
    # radius grid is bitwise symmetric under transpose and 90 degree
    # rotation (|-x|^2 == |x|^2 exactly in IEEE arithmetic).
    half = (size - 1) // 2
    offs = (np.arange(size) - half) * (halfwidth / half if half else 1.0)
    return offs[:, None] ** 2 + offs[None, :] ** 2


def gaussian_grid(size, sigma):
    """Isotropic Gaussian, peak 1 at center, sampled at integer offsets."""
    if size % 2 == 0 or size < 1:
        raise ValueError(f"size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    rsq = _radial_squared(size, (size - 1) // 2)
    return np.exp(-rsq / (2.0 * sigma * sigma))


def gaussian_filter(size, sigma, name=None):
    if name is None:
        name = f"gauss-{sigma:g}"
    return FilterSpec(name=name, grid=gaussian_grid(size, sigma))


def ricker_hat_grid(size, params=None):
    """Hat profile: Ricker wavelet minus a central pit, exactly zero-sum.

    psi(r) = (1 - r^2/s^2) * exp(-r^2/(2 s^2)) sampled on the square
    lattice spanning [-a, a]^2, minus pit_depth * exp(-r^2/(2 rho^2)),
    then the grid mean is subtracted so the sum is exactly zero.  The
    surround is a negative annulus (a zero-sum wave) and, for the default
    parameters, the center tap sits strictly below its ring-1 neighbors:
    the pit that penalizes isolated single-pixel impulses.
    """
    if params is None:
        params = HatParams()
    if size % 2 == 0 or size < 3:
        raise ValueError(f"size must be odd and >= 3, got {size}")
    rsq = _radial_squared(size, params.support_halfwidth)
    s2 = params.ricker_sigma**2
    ricker = (1.0 - rsq / s2) * np.exp(-rsq / (2.0 * s2))
    pit = params.pit_depth * np.exp(-rsq / (2.0 * params.pit_radius**2))
    grid = ricker - pit
    return grid - grid.mean()


def ricker_hat_filter(size, params=None, name=None):
    if name is None:
        name = f"hat{size}"
    return FilterSpec(name=name, grid=ricker_hat_grid(size, params))


def _golden_max(fun, lo, hi, tol=1e-4, max_iter=60):
    """Golden-section search for the maximum of a unimodal-ish scalar fn."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def fit_hat(target, coarse_only=False):
    """Fit hat parameters to an arbitrary square odd filter grid.

    Maximizes the mean-removed cosine similarity between the generated hat
    and ``target`` by coarse grid search plus golden-section coordinate
    refinement.  The (support_halfwidth, ricker_sigma) pair is redundant up
    to a joint rescale, so the fit pins ricker_sigma = 1 and varies the
    support; the returned parameters use that convention.

    Returns ``(HatParams, similarity)``.
    """
    tgt = pm.as_patch(target, "target")
    size = tgt.shape[0]
    if tgt.shape[0] != tgt.shape[1] or size % 2 == 0:
        raise ValueError(f"target must be square with odd side, got {tgt.shape}")
    try:
        tgt_n = pm.normalize_std(tgt)
    except pm.DegeneratePatchError:
        raise pm.DegeneratePatchError("cannot fit a hat to a flat target")

    def sim(a, depth, radius):
        if a <= 0.05 or radius <= 0.02 or depth < 0:
            return -2.0
        grid = ricker_hat_grid(
            size,
            HatParams(
                support_halfwidth=a,
                ricker_sigma=1.0,
                pit_depth=depth,
                pit_radius=radius,
            ),
        )
        try:
            return float(np.sum(pm.normalize_std(grid) * tgt_n))
        except pm.DegeneratePatchError:
            return -2.0

    best = (-2.0, 1.0, 0.0, 0.3)
    for a in np.linspace(0.8, 6.0, 14):
        for depth in (0.0, 0.15, 0.3, 0.45, 0.6, 0.75):
            for radius in (0.15, 0.3, 0.5, 0.8):
                s = sim(a, depth, radius)
                if s > best[0]:
                    best = (s, float(a), float(depth), float(radius))
    _, a, depth, radius = best
    if not coarse_only:
        for _ in range(3):
            a, _ = _golden_max(lambda x: sim(x, depth, radius), max(0.2, a - 0.6), a + 0.6)
            depth, _ = _golden_max(lambda x: sim(a, x, radius), max(0.0, depth - 0.2), depth + 0.2)
            radius, _ = _golden_max(lambda x: sim(a, depth, x), max(0.05, radius - 0.2), radius + 0.2)
    params = HatParams(
        support_halfwidth=a, ricker_sigma=1.0, pit_depth=depth, pit_radius=radius
    )
    return params, sim(a, depth, radius)


def crop_grid(grid, new_size):
    """Central new_size x new_size window (trimming, not downsampling)."""
    g = pm.as_patch(grid, "filter")
    size = g.shape[0]
    if g.shape[0] != g.shape[1]:
        raise ValueError(f"filter must be square, got {g.shape}")
    if new_size % 2 == 0 or size % 2 == 0:
        raise ValueError("crop requires odd sizes")
    if not (1 <= new_size <= size):
        raise ValueError(f"cannot crop {size} -> {new_size}")
    trim = (size - new_size) // 2
    return g[trim : trim + new_size, trim : trim + new_size].copy()


def crop_filter(spec, new_size, name=None):
    if spec.raw is not None:
        raise ValueError("crop before quantizing, not after")
    if name is None:
        name = f"{spec.name}-crop{new_size}"
    return FilterSpec(
        name=name,
        grid=crop_grid(spec.grid, new_size),
        deviation_mode=spec.deviation_mode,
    )


def quantize_taps(values, qformat=TAP_QFORMAT):
    """Round-half-even to the format grid, saturating at the raw limits."""
    v = np.asarray(values, dtype=float)
    raw = np.rint(v * qformat.scale)
    return np.clip(raw, qformat.raw_min, qformat.raw_max).astype(np.int32)


def dequantize_taps(raw, qformat=TAP_QFORMAT):
    return np.asarray(raw, dtype=float) / qformat.scale


def prescale_for_qformat(grid, qformat=TAP_QFORMAT):
    """Positively rescale so max|tap| lands on the largest representable
    magnitude.  NCC-style scores are invariant to positive filter scale,
    so this only buys quantization resolution."""
    g = pm.as_patch(grid, "filter")
    peak = float(np.max(np.abs(g)))
    if peak <= 0.0:
        raise pm.DegeneratePatchError("cannot prescale an all-zero filter")
    return g * (qformat.max_value / peak)


def prepare_fixed_taps(grid, qformat=TAP_QFORMAT):
    """Canonical float -> integer tap pipeline: center to zero mean,
    prescale to the format's full range, quantize."""
    g = pm.as_patch(grid, "filter")
    centered = g - g.mean()
    return quantize_taps(prescale_for_qformat(centered, qformat), qformat)


def quantize_filter(spec, qformat=TAP_QFORMAT, name=None):
    """Fixed-precision version of an ideal filter (prescale + quantize)."""
    if spec.raw is not None:
        raise ValueError(f"filter {spec.name!r} is already quantized")
    raw = prepare_fixed_taps(spec.grid, qformat)
    if name is None:
        name = f"{spec.name}-q{qformat.total_bits}.{qformat.frac_bits}"
    return FilterSpec(
        name=name,
        grid=dequantize_taps(raw, qformat),
        deviation_mode=spec.deviation_mode,
        qformat=qformat,
        raw=raw,
    )


@dataclasses.dataclass
class FixedScore:
    """Output of the integer pipeline: raw Q(16, 10) score plus flags."""

    raw: int
    degenerate: bool = False
    saturated: bool = False
    out_qformat: QFormat = OUT_QFORMAT

    @property
    def value(self):
        return self.raw / self.out_qformat.scale


def _trunc_div_int(num, den):
    # Python // floors; hardware divides truncating toward zero.
    if num >= 0:
        return num // den
    return -((-num) // den)


def mad_ncc_fixed_score(patch, filt, qformat=None, out_qformat=OUT_QFORMAT):
    """Score one integer patch against quantized taps, bit-exactly.

    Pipeline (all integer, no square root anywhere):

    1. pixels: 16-bit unsigned (validated)
    2. sum: 32-bit; integer mean = trunc(sum / n)
    3. deviations d_i = pixel - mean; sad = sum |d_i| (32-bit).
       Note n * mad == sad exactly, and sqrt(n) == patch side k for
       square patches, so the denominator sqrt(n) * mad equals sad / k
       with no rounding.
    4. products d_i * f_i: 32-bit; accumulator: 48-bit
    5. score_raw = trunc(acc * k * 2^out_frac / (sad * 2^tap_frac)),
       truncation toward zero, saturated to the output format.

    ``filt`` is a fixed FilterSpec or an integer tap array (then
    ``qformat`` is required).  A zero-sad (flat) patch returns raw 0 with
    the degenerate flag set.
    """
    if isinstance(filt, FilterSpec):
        if filt.raw is None:
            raise ValueError(f"filter {filt.name!r} is not quantized")
        taps = filt.raw
        qformat = filt.qformat
    else:
        taps = np.asarray(filt)
        if qformat is None:
            raise ValueError("qformat is required with bare integer taps")
    if not np.issubdtype(taps.dtype, np.integer):
        raise ValueError("fixed-point taps must be integers")
    p = np.asarray(patch)
    if not np.issubdtype(p.dtype, np.integer):
        raise ValueError("fixed-point patch must be integer-valued")
    if p.shape != taps.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"patch {p.shape} must match square taps {taps.shape}")
    if np.any(p < 0) or np.any(p > 0xFFFF):
        raise ValueError("pixels must fit in 16-bit unsigned")
    if np.any(np.abs(taps) > (1 << 31) - 1):
        raise ValueError("taps exceed 32-bit range")

    k = p.shape[0]
    n = k * k
    pixels = [int(v) for v in p.ravel().tolist()]
    total = sum(pixels)
    if total >= 1 << 32:
        raise OverflowError("pixel sum exceeds the 32-bit stage")
    mean = total // n  # non-negative, so floor == trunc
    devs = [v - mean for v in pixels]
    sad = sum(abs(d) for d in devs)
    if sad >= 1 << 32:
        raise OverflowError("sad exceeds the 32-bit stage")
    if sad == 0:
        return FixedScore(raw=0, degenerate=True, out_qformat=out_qformat)
    acc = 0
    for d, f in zip(devs, [int(v) for v in taps.ravel().tolist()]):
        prod = d * f
        if not (-(1 << 31) <= prod < (1 << 31)):
            raise OverflowError("product exceeds the 32-bit stage")
        acc += prod
    if not (-(1 << 47) <= acc < (1 << 47)):
        raise OverflowError("accumulator exceeds the 48-bit stage")
    num = acc * k * out_qformat.scale
    den = sad * qformat.scale
    raw = _trunc_div_int(num, den)
    saturated = raw < out_qformat.raw_min or raw > out_qformat.raw_max
    raw = min(max(raw, out_qformat.raw_min), out_qformat.raw_max)
    return FixedScore(raw=raw, saturated=saturated, out_qformat=out_qformat)


def mad_ncc_float_score(patch, taps):
    """Float reference for the fixed pipeline: MAD-normalize the patch,
    dot with the given (already prepared) float taps."""
    p = pm.normalize_mad(np.asarray(patch, dtype=float))
    return float(np.sum(p * np.asarray(taps, dtype=float)))


def _trunc_div_array(num, den):
    # den > 0 elementwise; numpy // floors, so route negatives through
    # the negated floor to truncate toward zero like the scalar path.
    return np.where(num >= 0, num // den, -((-num) // den))


def mad_ncc_fixed_response(frame, filt, qformat=None, out_qformat=OUT_QFORMAT,
                           chunk_rows=64):
    """Valid-mode response map of the fixed-point scorer over a frame.

    Vectorized but bit-identical to calling :func:`mad_ncc_fixed_score` at
    every window position.  Returns ``(raw, degenerate)`` where ``raw`` is
    int32 of shape (H - k + 1, W - k + 1) and ``degenerate`` marks zero-sad
    windows (their raw value is 0).
    """
    if isinstance(filt, FilterSpec):
        if filt.raw is None:
            raise ValueError(f"filter {filt.name!r} is not quantized")
        taps = filt.raw
        qformat = filt.qformat
    else:
        taps = np.asarray(filt)
        if qformat is None:
            raise ValueError("qformat is required with bare integer taps")
    fr = np.asarray(frame)
    if not np.issubdtype(fr.dtype, np.integer):
        raise ValueError("fixed-point frames must be integer-valued")
    if np.any(fr < 0) or np.any(fr > 0xFFFF):
        raise ValueError("pixels must fit in 16-bit unsigned")
    k = taps.shape[0]
    if fr.ndim != 2 or fr.shape[0] < k or fr.shape[1] < k:
        raise ValueError(f"frame {fr.shape} too small for {k}x{k} taps")
    n = k * k
    t64 = taps.astype(np.int64)
    f64 = fr.astype(np.int64)
    oh, ow = fr.shape[0] - k + 1, fr.shape[1] - k + 1
    raw = np.empty((oh, ow), dtype=np.int32)
    degenerate = np.empty((oh, ow), dtype=bool)
    for r0 in range(0, oh, chunk_rows):
        r1 = min(r0 + chunk_rows, oh)
        win = np.lib.stride_tricks.sliding_window_view(
            f64[r0 : r1 + k - 1], (k, k)
        )
        sums = win.sum(axis=(2, 3))
        means = sums // n  # sums >= 0, floor == trunc
        devs = win - means[..., None, None]
        sad = np.abs(devs).sum(axis=(2, 3))
        acc = np.einsum("ijkl,kl->ij", devs, t64, optimize=True)
        num = acc * (k * out_qformat.scale)
        den = sad * qformat.scale
        safe_den = np.where(den > 0, den, 1)
        scores = _trunc_div_array(num, safe_den)
        scores = np.clip(scores, out_qformat.raw_min, out_qformat.raw_max)
        flat = sad == 0
        scores[flat] = 0
        raw[r0:r1] = scores
        degenerate[r0:r1] = flat
    return raw, degenerate


def mad_ratio_detect(patch, threshold=2.5):
    """Per-pixel deviation test: |p - mean| / mad > threshold.

    Scale and offset free (invariant to a*p + b for a > 0).  A flat patch
    has no deviations to test and returns an all-false mask.
    """
    p = pm.as_patch(patch)
    if p.size < 2:
        raise ValueError("mad_ratio_detect needs at least 2 pixels")
    dev = np.abs(p - p.mean())
    mad = float(dev.mean())
    if mad <= pm.MAD_MIN:
        return np.zeros(p.shape, dtype=bool)
    return dev / mad > threshold


@dataclasses.dataclass
class OpCount:
    multiplications: int
    additions: int
    divisions: int
    square_roots: int


OP_METHODS = ("mad-ratio", "ncc-std", "ncc-mad", "unnorm-corr")


def op_count(method, image_side, filter_side):
    """Analytic per-frame operation counts for an N x N image and f x f
    filter.  Pixel-rate work costs N^2; patch-rate work (statistics,
    normalization) is amortized once per f^2 pixels, i.e. floor(N^2/f^2).
    Only the STD scorer pays square roots."""
    if image_side < 1 or filter_side < 1:
        raise ValueError("image and filter sides must be positive")
    n2 = image_side * image_side
    per_patch = n2 // (filter_side * filter_side)
    if method == "mad-ratio":
        return OpCount(n2, per_patch, per_patch, 0)
    if method == "ncc-std":
        return OpCount(n2, 2 * per_patch, per_patch, per_patch)
    if method == "ncc-mad":
        return OpCount(n2, 2 * per_patch, per_patch, 0)
    if method == "unnorm-corr":
        return OpCount(n2, per_patch, 0, 0)
    raise ValueError(f"unknown method {method!r}; expected one of {OP_METHODS}")


def write_op_count_csv(path, image_side, filter_side, methods=OP_METHODS):
    """CSV report: method,N,f,mul,add,div,sqrt."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "N", "f", "mul", "add", "div", "sqrt"])
        for method in methods:
            c = op_count(method, image_side, filter_side)
            writer.writerow(
                [
                    method,
                    image_side,
                    filter_side,
                    c.multiplications,
                    c.additions,
                    c.divisions,
                    c.square_roots,
                ]
            )


@dataclasses.dataclass
class ScanCounts:
    square_roots: int = 0


def tiled_std_scan(frame, filt):
    """STD-NCC scan that amortizes normalization at patch rate.

    Walks all H*W pixels in raster order in runs of f*f consecutive
    pixels.  Each full run refreshes the window L2-deviation (the one
    square root) from the window anchored at the run's first pixel; the
    rest of the run reuses it, and a trailing partial run reuses the last
    one without a fresh refresh.  Correlation itself runs at pixel rate
    with windows clamped inside the frame.  The counted square roots
    therefore equal floor(H*W / f^2), matching the analytic STD cost
    model; the filter's own normalization is offline preparation and is
    not counted.

    Returns ``(scores, ScanCounts)``.  At each run's first pixel the score
    equals exact STD NCC of that window; elsewhere the shared denominator
    makes it an approximation (that is the cost tradeoff being modeled).
    """
    img = pm.as_patch(frame, "frame")
    fgrid = filt.grid if isinstance(filt, FilterSpec) else filt
    fnorm = pm.normalize_std(fgrid)  # offline filter prep, not counted
    f = fnorm.shape[0]
    hh, ww = img.shape
    if hh < f or ww < f:
        raise ValueError(f"frame {img.shape} too small for {f}x{f} filter")
    counts = ScanCounts()

    def counted_sqrt(x):
        counts.square_roots += 1
        return math.sqrt(x)

    # pixel-rate correlation, windows clamped to stay inside the frame
    corr = pm.cross_correlate_valid(img, fnorm)
    tr = np.minimum(np.arange(hh), hh - f)
    tc = np.minimum(np.arange(ww), ww - f)
    corr_all = corr[tr[:, None], tc[None, :]]

    # patch-rate normalization: one sqrt per full run of f*f pixels
    n_runs = (hh * ww) // (f * f)
    inv = np.zeros(max(n_runs, 1))
    for run in range(n_runs):
        pos = run * f * f
        r, c = divmod(pos, ww)
        win = img[tr[r] : tr[r] + f, tc[c] : tc[c] + f]
        q = win - win.mean()
        ss = counted_sqrt(float(np.sum(q * q)))
        inv[run] = 1.0 / ss if ss > pm.SIGMA_MIN else 0.0

    run_of_pixel = np.minimum(np.arange(hh * ww) // (f * f), max(n_runs - 1, 0))
    scores = corr_all.ravel() * inv[run_of_pixel]
    return scores.reshape(hh, ww), counts


def save_quantized_filter(path, raw, qformat):
    """Quantized filter file: text header with the Q-format, then the
    integer taps in the grid layout."""
    taps = np.asarray(raw)
    if not np.issubdtype(taps.dtype, np.integer) or taps.ndim != 2:
        raise ValueError("expected a 2-D integer tap array")
    lines = [
        "qfilter 1",
        f"qformat {qformat.total_bits} {qformat.frac_bits}",
        f"{taps.shape[0]} {taps.shape[1]}",
    ]
    for row in taps.tolist():
        lines.append(" ".join(str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if isinstance(path, (str, os.PathLike)):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        path.write(text)


def load_quantized_filter(path):
    """Read a quantized filter file; returns ``(raw int array, QFormat)``."""
    if isinstance(path, (str, os.PathLike)):
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    else:
        text = path.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 4 or lines[0].split() != ["qfilter", "1"]:
        raise ValueError("not a version-1 quantized filter file")
    tok = lines[1].split()
    if len(tok) != 3 or tok[0] != "qformat":
        raise ValueError(f"bad qformat line: {lines[1]!r}")
    qformat = QFormat(int(tok[1]), int(tok[2]))
    dims = lines[2].split()
    if len(dims) != 2:
        raise ValueError(f"bad dimensions line: {lines[2]!r}")
    rows, cols = int(dims[0]), int(dims[1])
    if len(lines) - 3 != rows:
        raise ValueError(f"expected {rows} tap rows, found {len(lines) - 3}")
    taps = np.empty((rows, cols), dtype=np.int32)
    for r in range(rows):
        toks = lines[3 + r].split()
        if len(toks) != cols:
            raise ValueError(f"row {r}: expected {cols} taps, found {len(toks)}")
        taps[r] = [int(t) for t in toks]
    if np.any(taps < qformat.raw_min) or np.any(taps > qformat.raw_max):
        raise ValueError("taps exceed the declared Q-format range")
    return taps, qformat
