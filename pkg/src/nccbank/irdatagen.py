"""Synthetic infrared scenes and the patch dataset pipeline.

The real mid-wave IR data this toolkit was designed around cannot ship, so
this module generates a stand-in with the same failure modes: smooth sky
gradients with cloud blobs, terraced terrain edges, sea-glint speckles,
clean collimator frames, PSF-blurred point targets, detector noise, and
isolated bad pixels that look deceptively like targets.

From scenes it builds labeled samples: each sample stores a 19x19 context
grid whose central 15x15 core is the actual patch; the 2-pixel margin
exists so +/-1, +/-2 pixel shift augmentation never reads outside recorded
data.  Positives are augmented 64x (4 rotations x 16 shifts), negatives 4x
(4 rotations); augmented outputs keep only the core (margin zeroed and
flagged invalid).  Negatives can be thinned with greedy farthest-point
subsampling under the NCC distance 1 - ncc_score(a, b).

Datasets are stored in a little-endian binary format (magic "NCCD"); see
``write_dataset``.  Contexts are stored and kept in memory as float32 so a
write/read round-trip is bit-identical.
"""

import csv
import dataclasses
import os
import pathlib
import struct

import numpy as np
from scipy import ndimage

from nccbank import gridio
from nccbank import patchmath as pm

CORE_SIZE = 15
CONTEXT_SIZE = 19
MARGIN = (CONTEXT_SIZE - CORE_SIZE) // 2
BASE_LEVEL = 1000.0  # nominal detector count floor for all scenes

SKY = "sky"
TERRAIN = "terrain"
SEA_GLINT = "sea_glint"
COLLIMATOR = "collimator"
CLUTTER_KINDS = (SKY, TERRAIN, SEA_GLINT, COLLIMATOR)

DATASET_MAGIC = b"NCCD"
DATASET_VERSION = 1


class DatasetFormatError(ValueError):
    """Base class for dataset file problems."""


class CorruptHeaderError(DatasetFormatError):
    pass


class VersionMismatchError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


@dataclasses.dataclass
class SceneConfig:
    width: int = 128
    height: int = 128
    clutter_kind: str = SKY
    clutter_strength: float = 1.0
    target_count: int = 8
    target_amplitude: float = 60.0
    psf_sigma: float = 1.2
    noise_sigma: float = 5.0
    bad_pixel_rate: float = 0.0
    rng_seed: int = 0

    def validate(self):
        if self.width < 64 or self.height < 64:
            raise ValueError("scene dimensions must be at least 64")
        if self.clutter_kind not in CLUTTER_KINDS:
            raise ValueError(f"unknown clutter kind {self.clutter_kind!r}")
        if self.clutter_strength < 0:
            raise ValueError("clutter_strength must be >= 0")
        if self.target_count < 0:
            raise ValueError("target_count must be >= 0")
        if self.psf_sigma <= 0:
            raise ValueError("psf_sigma must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not (0.0 <= self.bad_pixel_rate < 1.0):
            raise ValueError("bad_pixel_rate must be in [0, 1)")


@dataclasses.dataclass
class Scene:
    image: np.ndarray
    truths: list
    bad_pixels: list


@dataclasses.dataclass(eq=False)
class LabeledSample:
    """A +/-1 labeled patch: 19x19 context whose central 15x15 is the core.

    ``margin_valid`` is False for augmented samples, whose margin is
    zero-filled rather than real scene data.
    """

    label: int
    context: np.ndarray
    margin_valid: bool = True

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")
        self.context = np.asarray(self.context, dtype=np.float32)
        if self.context.shape != (CONTEXT_SIZE, CONTEXT_SIZE):
            raise ValueError(
                f"context must be {CONTEXT_SIZE}x{CONTEXT_SIZE}, "
                f"got {self.context.shape}"
            )

    @property
    def core(self):
        return self.context[MARGIN : MARGIN + CORE_SIZE, MARGIN : MARGIN + CORE_SIZE]


def _sky_clutter(shape, strength, rng):
    h, w = shape
    yy = np.linspace(0.0, 1.0, h)[:, None]
    xx = np.linspace(0.0, 1.0, w)[None, :]
    coef = rng.uniform(-1.0, 1.0, size=6)
    field = 40.0 * strength * (
        coef[0] * yy
        + coef[1] * xx
        + coef[2] * yy * xx
        + coef[3] * yy * yy
        + coef[4] * xx * xx
        + coef[5]
    )
    # wide soft blobs standing in for cloud structure
    for _ in range(int(rng.integers(3, 8))):
        cy = rng.uniform(0, h)
        cx = rng.uniform(0, w)
        sig = rng.uniform(8.0, 25.0)
        amp = strength * rng.uniform(10.0, 45.0)
        ys = (np.arange(h)[:, None] - cy) / sig
        xs = (np.arange(w)[None, :] - cx) / sig
        field += amp * np.exp(-0.5 * (ys * ys + xs * xs))
    return field


def _terrain_clutter(shape, strength, rng):
    h, w = shape
    field = np.zeros(shape)
    for _ in range(10):
        cy = rng.uniform(0, h)
        cx = rng.uniform(0, w)
        sig = rng.uniform(10.0, 30.0)
        amp = rng.uniform(-50.0, 50.0)
        ys = (np.arange(h)[:, None] - cy) / sig
        xs = (np.arange(w)[None, :] - cx) / sig
        field += amp * np.exp(-0.5 * (ys * ys + xs * xs))
    # quantize the smooth field into plateaus: hard high-contrast edges
    step = max(35.0 * strength, 1e-6)
    return np.floor(field / step) * step


def _sea_glint_clutter(shape, strength, rng, target_amplitude, psf_sigma):
    h, w = shape
    field = np.zeros(shape)
    # Sun glitter arrives in sparkle bands: near-horizontal chains of
    # point-like glints.  Each glint is blurred by the same optics as a
    # target, so inside a point-sized window it is indistinguishable from
    # one -- but glints come as doublets, a bright facet flash plus a
    # fainter partner flash a few pixels away.  Only a window wide enough
    # to see the partner can tell glint from target.  Lone hot pixels stay
    # below the noise floor.
    support = max(int(np.ceil(4.0 * psf_sigma)), 2)
    ys = np.arange(-support, support + 1)
    blob = np.exp(-(ys[:, None] ** 2 + ys[None, :] ** 2) / (2.0 * psf_sigma**2))

    def in_frame(rr, cc):
        return (support <= rr < h - support) and (support <= cc < w - support)

    def stamp(rr, cc, amp):
        field[rr - support : rr + support + 1,
              cc - support : cc + support + 1] += amp * blob

    mains = []
    n_bands = int(rng.integers(2, max(3, int(4 * strength) + 1)))
    for _ in range(n_bands):
        r0 = float(rng.integers(support, h - support))
        c0 = float(rng.integers(support, max(support + 1, w // 3)))
        slope = rng.uniform(-0.25, 0.25)
        length = int(rng.integers(30, max(31, min(80, w - 6))))
        pos = 0.0
        while pos < length:
            rr = int(round(r0 + slope * pos + rng.uniform(-1.5, 1.5)))
            cc = int(round(c0 + pos))
            pos += float(rng.integers(10, 16))
            angle = rng.uniform(0.0, 2.0 * np.pi)
            dist = rng.uniform(3.8, 4.4)
            pr = int(round(rr + dist * np.sin(angle)))
            pc = int(round(cc + dist * np.cos(angle)))
            # a flash only renders when its partner fits too (no orphan
            # flashes) and bands never pile flashes on top of each other
            if not (in_frame(rr, cc) and in_frame(pr, pc)):
                continue
            if any(max(abs(rr - mr), abs(cc - mc)) < 9 for mr, mc in mains):
                continue
            amp = target_amplitude * rng.uniform(0.8, 1.5)
            stamp(rr, cc, amp)
            stamp(pr, pc, amp * rng.uniform(0.4, 0.55))
            mains.append((rr, cc))
    n_singles = int(rng.integers(5, 15))
    for _ in range(n_singles):
        r = int(rng.integers(0, h))
        c = int(rng.integers(0, w))
        field[r, c] += rng.uniform(0.2, 0.8)  # sub-noise singletons
    return field


def _place_targets(config, rng, clutter):
    # Keep centers >= 10 px from borders (the 19x19 context then always
    # fits) and >= 16 px apart in Chebyshev distance (cores never overlap).
    # Targets are only annotated over locally quiet background: the 19x19
    # neighborhood of a truth (widest scoring window plus slack) must be
    # free of sharp clutter structure so the label is unambiguous (a glint
    # sitting next to the truth would be one).
    h, w = config.height, config.width
    resid = clutter - ndimage.uniform_filter(clutter, size=9, mode="nearest")
    rough = ndimage.maximum_filter(np.abs(resid), size=CONTEXT_SIZE, mode="nearest")
    # strong smooth flanks (cloud shoulders, terrace ramps) also disqualify:
    # they inflate the window's dispersion and wash out the target contrast
    swing = (ndimage.maximum_filter(clutter, size=CORE_SIZE, mode="nearest")
             - ndimage.minimum_filter(clutter, size=CORE_SIZE, mode="nearest"))
    limit = 0.15 * config.target_amplitude
    placed = []
    attempts = 0
    while len(placed) < config.target_count:
        attempts += 1
        if attempts > 10000:
            raise RuntimeError(
                f"cannot place {config.target_count} separated targets "
                f"on quiet background in a {h}x{w} scene"
            )
        r = int(rng.integers(10, h - 10))
        c = int(rng.integers(10, w - 10))
        if rough[r, c] >= limit or swing[r, c] >= 0.3 * config.target_amplitude:
            continue
        if all(max(abs(r - tr), abs(c - tc)) >= 16 for tr, tc in placed):
            placed.append((r, c))
    return placed


def _place_bad_pixels(config, truths, rng):
    h, w = config.height, config.width
    count = int(round(config.bad_pixel_rate * h * w))
    placed = []
    attempts = 0
    while len(placed) < count:
        attempts += 1
        if attempts > 100000:
            raise RuntimeError("cannot place isolated bad pixels")
        r = int(rng.integers(1, h - 1))
        c = int(rng.integers(1, w - 1))
        # defects stay clear of annotated truths so labels are unambiguous
        if any((r - tr) ** 2 + (c - tc) ** 2 <= 100 for tr, tc in truths):
            continue
        if any(max(abs(r - br), abs(c - bc)) < 2 for br, bc in placed):
            continue
        placed.append((r, c))
    return placed


def synth_scene(config):
    """Render one scene; deterministic for a given config (seed included)."""
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    h, w = config.height, config.width
    image = np.full((h, w), BASE_LEVEL)

    if config.clutter_kind == SKY:
        image += _sky_clutter((h, w), config.clutter_strength, rng)
    elif config.clutter_kind == TERRAIN:
        image += _terrain_clutter((h, w), config.clutter_strength, rng)
    elif config.clutter_kind == SEA_GLINT:
        image += _sea_glint_clutter(
            (h, w), config.clutter_strength, rng,
            config.target_amplitude, config.psf_sigma,
        )
    # COLLIMATOR: flat base, detector effects only

    truths = _place_targets(config, rng, image - BASE_LEVEL)
    support = max(int(np.ceil(4.0 * config.psf_sigma)), 2)
    for r, c in truths:
        ys = np.arange(-support, support + 1)
        blob = np.exp(-(ys[:, None] ** 2 + ys[None, :] ** 2)
                      / (2.0 * config.psf_sigma**2))
        image[r - support : r + support + 1, c - support : c + support + 1] += (
            config.target_amplitude * blob
        )

    if config.noise_sigma > 0:
        image += rng.normal(0.0, config.noise_sigma, size=(h, w))

    bad_pixels = _place_bad_pixels(config, truths, rng)
    for r, c in bad_pixels:
        # stuck-hot defect: overwrite, don't add -- contrast is independent
        # of scene content and target amplitude
        image[r, c] = BASE_LEVEL + rng.uniform(900.0, 1600.0)

    return Scene(image=image, truths=truths, bad_pixels=bad_pixels)


def extract_samples(scene):
    """Labeled samples from a scene: one positive per truth, negatives
    tiling the rest of the frame.

    Negative cores tile on a 15-pixel stride starting 2 px in (so every
    context fits) and any tile whose core center lands within 14 px of a
    truth (either axis) is skipped, which guarantees no negative core
    overlaps a positive core.  Bad-pixel tiles are ordinary negatives.
    """
    image = scene.image
    h, w = image.shape
    half_ctx = CONTEXT_SIZE // 2
    samples = []
    for r, c in scene.truths:
        if not (half_ctx <= r < h - half_ctx and half_ctx <= c < w - half_ctx):
            raise ValueError(f"truth {(r, c)} too close to the border")
        ctx = image[r - half_ctx : r + half_ctx + 1, c - half_ctx : c + half_ctx + 1]
        samples.append(LabeledSample(label=1, context=ctx))
    half_core = CORE_SIZE // 2
    for r0 in range(MARGIN, h - MARGIN - CORE_SIZE + 1, CORE_SIZE):
        for c0 in range(MARGIN, w - MARGIN - CORE_SIZE + 1, CORE_SIZE):
            center_r = r0 + half_core
            center_c = c0 + half_core
            if any(
                abs(center_r - tr) <= 2 * half_core and abs(center_c - tc) <= 2 * half_core
                for tr, tc in scene.truths
            ):
                continue
            ctx = image[
                center_r - half_ctx : center_r + half_ctx + 1,
                center_c - half_ctx : center_c + half_ctx + 1,
            ]
            samples.append(LabeledSample(label=-1, context=ctx))
    return samples


def shifted_core(context, dr, dc):
    """The 15x15 core re-windowed by (dr, dc) inside a full 19x19 context."""
    ctx = np.asarray(context)
    if ctx.shape != (CONTEXT_SIZE, CONTEXT_SIZE):
        raise ValueError(f"context must be {CONTEXT_SIZE}x{CONTEXT_SIZE}")
    if not (-MARGIN <= dr <= MARGIN and -MARGIN <= dc <= MARGIN):
        raise ValueError(f"shift ({dr}, {dc}) exceeds the {MARGIN}-pixel margin")
    r0 = MARGIN + dr
    c0 = MARGIN + dc
    return ctx[r0 : r0 + CORE_SIZE, c0 : c0 + CORE_SIZE]


def _core_only_sample(label, core):
    ctx = np.zeros((CONTEXT_SIZE, CONTEXT_SIZE), dtype=np.float32)
    ctx[MARGIN : MARGIN + CORE_SIZE, MARGIN : MARGIN + CORE_SIZE] = core
    return LabeledSample(label=label, context=ctx, margin_valid=False)


SHIFTS = tuple(
    (dr, dc)
    for dr in (-2, -1, 1, 2)
    for dc in (-2, -1, 1, 2)
)


def augment_positive(sample):
    """4 rotations x 16 shifts = 64 core-only samples (no (0,0) shift)."""
    if sample.label != 1:
        raise ValueError("augment_positive needs a positive sample")
    if not sample.margin_valid:
        raise ValueError("positive augmentation needs a full context margin")
    out = []
    for rot in range(4):
        rctx = np.rot90(sample.context, rot)
        for dr, dc in SHIFTS:
            out.append(_core_only_sample(1, shifted_core(rctx, dr, dc)))
    return out


def augment_negative(sample):
    """Original + 3 rotations = 4 core-only samples."""
    if sample.label != -1:
        raise ValueError("augment_negative needs a negative sample")
    return [
        _core_only_sample(-1, shifted_core(np.rot90(sample.context, rot), 0, 0))
        for rot in range(4)
    ]


def augment_all(samples):
    """Dispatch by label; output order follows input order."""
    out = []
    for s in samples:
        out.extend(augment_positive(s) if s.label == 1 else augment_negative(s))
    return out


def samples_to_arrays(samples):
    """Stack cores into (S, 15, 15) float64 plus a (S,) +/-1 label array."""
    if not samples:
        raise ValueError("no samples")
    patches = np.stack([s.core for s in samples]).astype(float)
    labels = np.array([float(s.label) for s in samples])
    return patches, labels


def subsample_negatives(negatives, budget, seed=0):
    """Greedy farthest-point subset under d(a, b) = 1 - ncc_score(a, b).

    Flat cores cannot be normalized and are all NCC-equidistant anyway, so
    they collapse into a single bucket: one representative (zero feature
    vector, distance 1 to everything normalizable) joins the pool and the
    rest are dropped, only returning as deterministic padding if the pool
    alone cannot fill the budget.  The first pick is seeded; ties in the
    farthest-point rule break toward the lower index.  Returns exactly
    ``budget`` samples.
    """
    negatives = list(negatives)
    if not negatives:
        raise ValueError("no negatives to subsample")
    if any(s.label != -1 for s in negatives):
        raise ValueError("subsample_negatives expects negative samples only")
    if not (1 <= budget <= len(negatives)):
        raise ValueError(f"budget must be in [1, {len(negatives)}], got {budget}")
    if budget == len(negatives):
        return negatives

    n = CORE_SIZE * CORE_SIZE
    feats = np.zeros((len(negatives), n))
    flats = []
    pool = []
    for i, s in enumerate(negatives):
        core = s.core.astype(float)
        try:
            feats[i] = pm.normalize_std(core).ravel()
            pool.append(i)
        except pm.DegeneratePatchError:
            flats.append(i)
    if flats:
        pool.append(flats[0])  # the bucket representative, feature all-zero
        pool.sort()
    dropped = flats[1:]

    if budget >= len(pool):
        chosen = pool + dropped[: budget - len(pool)]
        return [negatives[i] for i in chosen]

    fmat = feats[pool]
    rng = np.random.default_rng(seed)
    start = int(rng.integers(len(pool)))
    order = [start]
    min_d = 1.0 - fmat @ fmat[start]
    min_d[start] = -np.inf
    for _ in range(budget - 1):
        nxt = int(np.argmax(min_d))
        order.append(nxt)
        min_d = np.minimum(min_d, 1.0 - fmat @ fmat[nxt])
        min_d[nxt] = -np.inf
    return [negatives[pool[i]] for i in order]


def write_dataset(samples, path):
    """Binary dataset file, little-endian.

    Layout: magic "NCCD", version u16, core_size u16, context_size u16,
    sample_count u64; then per record: label i8 (+1/-1), flags u8
    (bit 0 = margin valid), context as float32 row-major.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("refusing to write an empty dataset")
    rec = np.empty(
        len(samples),
        dtype=np.dtype(
            [("label", "<i1"), ("flags", "<u1"),
             ("context", "<f4", (CONTEXT_SIZE, CONTEXT_SIZE))]
        ),
    )
    for i, s in enumerate(samples):
        rec[i] = (s.label, 1 if s.margin_valid else 0, s.context)
    header = DATASET_MAGIC + struct.pack(
        "<HHHQ", DATASET_VERSION, CORE_SIZE, CONTEXT_SIZE, len(samples)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def read_dataset(path):
    """Read a dataset file written by :func:`write_dataset`.

    Raises CorruptHeaderError / VersionMismatchError / TruncatedFileError;
    never returns a partial result.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != DATASET_MAGIC:
        raise CorruptHeaderError("bad magic; not a dataset file")
    if len(blob) < 18:
        raise TruncatedFileError("header cut short")
    version, core, ctx, count = struct.unpack("<HHHQ", blob[4:18])
    if version != DATASET_VERSION:
        raise VersionMismatchError(f"unsupported dataset version {version}")
    if core != CORE_SIZE or ctx != CONTEXT_SIZE or core > ctx:
        raise CorruptHeaderError(f"unsupported patch geometry {core}/{ctx}")
    rec_dtype = np.dtype(
        [("label", "<i1"), ("flags", "<u1"), ("context", "<f4", (ctx, ctx))]
    )
    want = count * rec_dtype.itemsize
    payload = blob[18:]
    if len(payload) < want:
        raise TruncatedFileError(
            f"expected {want} record bytes, found {len(payload)}"
        )
    if len(payload) > want:
        raise CorruptHeaderError("payload larger than the declared count")
    rec = np.frombuffer(payload, dtype=rec_dtype)
    samples = []
    for i in range(count):
        label = int(rec["label"][i])
        if label not in (-1, 1):
            raise DatasetFormatError(f"record {i}: bad label {label}")
        samples.append(
            LabeledSample(
                label=label,
                context=rec["context"][i].copy(),
                margin_valid=bool(rec["flags"][i] & 1),
            )
        )
    return samples


def write_frames(dirpath, scenes):
    """Frame folder: frame_NNNN.txt grids plus truths.csv (frame,row,col)."""
    d = pathlib.Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "truths.csv", "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "row", "col"])
        for i, scene in enumerate(scenes):
            name = f"frame_{i:04d}.txt"
            gridio.write_grid(scene.image, d / name)
            for r, c in scene.truths:
                writer.writerow([name, r, c])


def read_frames(dirpath):
    """Read a frame folder; returns (frames, truths) in filename order.

    ``truths[i]`` lists the (row, col) centers for ``frames[i]``; frames
    absent from truths.csv have an empty list.
    """
    d = pathlib.Path(dirpath)
    names = sorted(p.name for p in d.glob("frame_*.txt"))
    if not names:
        raise FileNotFoundError(f"no frame_*.txt files in {d}")
    frames = [gridio.read_grid(d / name) for name in names]
    truth_map = {name: [] for name in names}
    csv_path = d / "truths.csv"
    if csv_path.exists():
        with open(csv_path, "r", encoding="ascii", newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                name = row["frame"]
                if name not in truth_map:
                    raise ValueError(f"truths.csv references unknown frame {name!r}")
                truth_map[name].append((int(row["row"]), int(row["col"])))
    return frames, [truth_map[name] for name in names]


def training_scene_configs(scene_count=36, seed=1000, width=128, height=128,
                           targets_per_scene=9):
    """Training-scene recipe: cycle through all clutter kinds with jittered
    strengths and per-scene seeds drawn from one master seed."""
    rng = np.random.default_rng(seed)
    configs = []
    for i in range(scene_count):
        kind = CLUTTER_KINDS[i % len(CLUTTER_KINDS)]
        configs.append(
            SceneConfig(
                width=width,
                height=height,
                clutter_kind=kind,
                clutter_strength=float(rng.uniform(0.7, 1.3)),
                target_count=targets_per_scene,
                target_amplitude=60.0,
                psf_sigma=1.2,
                noise_sigma=5.0,
                bad_pixel_rate=3e-4,
                rng_seed=int(rng.integers(0, 2**31)),
            )
        )
    return configs


def standard_training_configs(seed=1000):
    """The reference training corpus: 60 scenes of 256x256 with 34 targets
    each, giving ~2,000 positives and a >8,000 negative pool."""
    return training_scene_configs(
        scene_count=60, seed=seed, width=256, height=256, targets_per_scene=34
    )


def benchmark_scene_configs(count=48, seed=2000):
    """Benchmark frames: every clutter kind, bad pixels on, and every sixth
    frame target-free so false alarms have somewhere to live."""
    rng = np.random.default_rng(seed)
    configs = []
    for i in range(count):
        kind = CLUTTER_KINDS[i % len(CLUTTER_KINDS)]
        configs.append(
            SceneConfig(
                width=160,
                height=160,
                clutter_kind=kind,
                clutter_strength=float(rng.uniform(0.8, 1.2)),
                target_count=0 if i % 6 == 5 else 3,
                target_amplitude=80.0,
                psf_sigma=1.2,
                noise_sigma=3.0,
                bad_pixel_rate=2.5e-4,
                rng_seed=int(rng.integers(0, 2**31)),
            )
        )
    return configs


def augmented_arrays(samples):
    """Augment straight into arrays: (patches (S, 15, 15), labels (S,)).

    Equivalent to ``samples_to_arrays(augment_all(samples))`` but without
    materializing hundreds of thousands of sample objects.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    n_pos = sum(1 for s in samples if s.label == 1)
    total = 64 * n_pos + 4 * (len(samples) - n_pos)
    patches = np.empty((total, CORE_SIZE, CORE_SIZE))
    labels = np.empty(total)
    idx = 0
    for s in samples:
        if s.label == 1:
            if not s.margin_valid:
                raise ValueError("positive augmentation needs a full context")
            for rot in range(4):
                rctx = np.rot90(s.context, rot)
                for dr, dc in SHIFTS:
                    patches[idx] = shifted_core(rctx, dr, dc)
                    labels[idx] = 1.0
                    idx += 1
        else:
            for rot in range(4):
                patches[idx] = shifted_core(np.rot90(s.context, rot), 0, 0)
                labels[idx] = -1.0
                idx += 1
    return patches, labels


def collect_samples(scenes):
    """Extract and split samples from many scenes: (positives, negatives)."""
    positives = []
    negatives = []
    for scene in scenes:
        for s in extract_samples(scene):
            (positives if s.label == 1 else negatives).append(s)
    return positives, negatives


def build_training_set(configs, negative_budget=None, subsample_seed=0):
    """Scenes -> samples -> thinned negatives, pre-augmentation.

    Returns positives followed by the subsampled negatives.  Augmentation
    happens in memory at training time (augment_all), keeping dataset
    files 64x smaller.
    """
    scenes = [synth_scene(cfg) for cfg in configs]
    positives, negatives = collect_samples(scenes)
    if not positives or not negatives:
        raise ValueError("training scenes produced an empty class")
    if negative_budget is not None and negative_budget < len(negatives):
        negatives = subsample_negatives(negatives, negative_budget, subsample_seed)
    return positives + negatives
