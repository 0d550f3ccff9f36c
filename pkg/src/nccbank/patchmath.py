"""Numerical core: patch statistics, normalization, correlation, Jacobians.

Conventions used throughout the package:

* Patches and filters are 2-D float64 arrays indexed ``[row, col]`` with the
  origin at the top-left.
* Whenever a patch is treated as a vector it is flattened row-major
  (numpy C order), and Jacobians are laid out against that same flattening.
* Two normalizations are supported.  With ``n`` the pixel count and ``mu``
  the patch mean:

  - STD: ``(p - mu) / (sqrt(n - 1) * std(p))`` where ``std`` uses the
    ``n - 1`` divisor.  This equals the centered patch scaled to unit L2
    norm, so the dot product of two STD-normalized patches is the classic
    correlation coefficient in [-1, 1].
  - MAD: ``(p - mu) / (sqrt(n) * mad(p))`` where ``mad`` is the mean
    absolute deviation about the mean.  No square root is needed to
    evaluate it in fixed point (``sqrt(n)`` is the patch side for square
    patches), which is why the FPGA path uses it.  Scores are not
    guaranteed to stay in [-1, 1].

Degenerate (flat) patches have no direction information; normalizing them
raises :class:`DegeneratePatchError` rather than silently dividing by an
epsilon.  The MAD Jacobian is undefined where any centered pixel sits on
the |x| kink; :func:`jacobian_normalize_mad` refuses those inputs with
:class:`KinkProximityError`, while the training-time backprop helper uses
the subgradient ``sign(0) = 0`` and never raises for kinks.
"""

import numpy as np

SIGMA_MIN = 1e-12
MAD_MIN = 1e-12
KINK_TOL = 1e-8

NORM_STD = "std"
NORM_MAD = "mad"
NORM_NONE = "none"
NORM_MODES = (NORM_STD, NORM_MAD, NORM_NONE)


class DegeneratePatchError(ValueError):
    """Raised when a statistically flat patch cannot be normalized."""


class KinkProximityError(ValueError):
    """Raised when a centered pixel is too close to the |x| kink for the
    strict MAD Jacobian to be well defined."""


def as_patch(values, name="patch"):
    """Validate and convert to a 2-D float64 array.

    Accepts anything ``np.asarray`` does.  Rejects empty, non-2-D, and
    non-finite input.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def patch_mean(patch):
    """Arithmetic mean of all pixels."""
    return float(np.mean(as_patch(patch)))


def patch_std(patch):
    """Sample standard deviation (n - 1 divisor)."""
    p = as_patch(patch)
    if p.size < 2:
        raise ValueError("std needs at least 2 pixels")
    return float(np.std(p, ddof=1))


def patch_mad(patch):
    """Mean absolute deviation about the mean."""
    p = as_patch(patch)
    return float(np.mean(np.abs(p - np.mean(p))))


def _centered(p):
    # Two-pass centering: the second pass removes the O(eps * scale)
    # rounding residual so the mean-zero invariant holds to ~1e-16 even
    # for patches with large offsets.
    q = p - np.mean(p)
    q -= np.mean(q)
    return q


def normalize_std(patch):
    """Center and scale to unit L2 norm (STD normalization).

    The result has mean ~0 and unit Euclidean norm when flattened, so the
    dot of two STD-normalized patches is the correlation coefficient.

    Raises
    ------
    DegeneratePatchError
        If the patch standard deviation is at or below ``SIGMA_MIN``.
    """
    p = as_patch(patch)
    if p.size < 2:
        raise ValueError("STD normalization needs at least 2 pixels")
    q = _centered(p)
    ss = float(np.sqrt(np.sum(q * q)))
    sigma = ss / np.sqrt(p.size - 1)
    if sigma <= SIGMA_MIN:
        raise DegeneratePatchError(f"flat patch: std={sigma:.3e}")
    return q / ss


def normalize_mad(patch):
    """Center and scale by ``sqrt(n) * mad`` (MAD normalization).

    Raises
    ------
    DegeneratePatchError
        If the mean absolute deviation is at or below ``MAD_MIN``.
    """
    p = as_patch(patch)
    q = _centered(p)
    mad = float(np.mean(np.abs(q)))
    if mad <= MAD_MIN:
        raise DegeneratePatchError(f"flat patch: mad={mad:.3e}")
    return q / (np.sqrt(p.size) * mad)


def normalize(patch, mode):
    """Dispatch to the requested normalization; ``none`` is the identity."""
    if mode == NORM_STD:
        return normalize_std(patch)
    if mode == NORM_MAD:
        return normalize_mad(patch)
    if mode == NORM_NONE:
        return as_patch(patch).copy()
    raise ValueError(f"unknown normalization mode {mode!r}")


def cross_correlate_valid(image, filt):
    """Valid-mode 2-D cross-correlation (no padding, no filter flip).

    ``out[i, j]`` is the dot product of ``filt`` with the image window whose
    top-left corner is ``(i, j)``.  Output shape is
    ``(H - h + 1, W - w + 1)``.
    """
    img = as_patch(image, "image")
    f = as_patch(filt, "filter")
    if f.shape[0] > img.shape[0] or f.shape[1] > img.shape[1]:
        raise ValueError(
            f"filter {f.shape} does not fit inside image {img.shape}"
        )
    win = np.lib.stride_tricks.sliding_window_view(img, f.shape)
    return np.einsum("ijkl,kl->ij", win, f, optimize=True)


def ncc_score(patch, filt, mode=NORM_STD):
    """Normalized cross-correlation of two same-shape grids.

    Both grids are normalized with ``mode`` and their flattened dot product
    is returned.  ``mode='none'`` skips normalization and returns the raw
    dot product (the unnormalized-correlation baseline).
    """
    p = as_patch(patch)
    f = as_patch(filt, "filter")
    if p.shape != f.shape:
        raise ValueError(f"shape mismatch: patch {p.shape} vs filter {f.shape}")
    a = normalize(p, mode)
    b = normalize(f, mode)
    return float(np.sum(a * b))


def _centering_matrix(n):
    return np.eye(n) - np.full((n, n), 1.0 / n)


def jacobian_normalize_std(patch):
    """Dense Jacobian of STD normalization wrt the flattened patch.

    With ``pbar`` the normalized patch and ``ss = sqrt(n - 1) * std``, the
    Jacobian is ``(I - pbar pbar^T) (I - 11^T / n) / ss``: centering is
    applied first (innermost), then the projection removing the component
    along the patch direction, then the scale.  The matrix is symmetric,
    its rows sum to zero, and ``J @ pbar = 0``.
    """
    p = as_patch(patch)
    if p.size < 2:
        raise ValueError("STD normalization needs at least 2 pixels")
    n = p.size
    q = _centered(p)
    ss = float(np.sqrt(np.sum(q * q)))
    sigma = ss / np.sqrt(n - 1)
    if sigma <= SIGMA_MIN:
        raise DegeneratePatchError(f"flat patch: std={sigma:.3e}")
    pbar = (q / ss).ravel()
    proj = np.eye(n) - np.outer(pbar, pbar)
    return proj @ _centering_matrix(n) / ss


def jacobian_normalize_mad(patch, kink_tol=KINK_TOL):
    """Dense Jacobian of MAD normalization wrt the flattened patch.

    With ``q`` the centered patch, ``s = sign(q)``, and ``d = sqrt(n) * mad``
    the denominator, the Jacobian is
    ``(I - q s^T / (n * mad)) (I - 11^T / n) / d``.
    The centering factor sits innermost (it differentiates the centering
    that happens first in the forward pass); swapping the factor order is
    wrong and breaks the row-sum-zero property.  Rows sum to zero but the
    matrix is not symmetric in general.

    Raises
    ------
    KinkProximityError
        If any ``|q_i| <= kink_tol``; |x| is not differentiable there.
    DegeneratePatchError
        If the patch is flat.
    """
    p = as_patch(patch)
    n = p.size
    q = _centered(p).ravel()
    mad = float(np.mean(np.abs(q)))
    if mad <= MAD_MIN:
        raise DegeneratePatchError(f"flat patch: mad={mad:.3e}")
    if np.min(np.abs(q)) <= kink_tol:
        raise KinkProximityError(
            f"centered pixel within {kink_tol:.1e} of the |x| kink"
        )
    s = np.sign(q)
    denom = np.sqrt(n) * mad
    scale_dir = np.eye(n) - np.outer(q, s) / (n * mad)
    return scale_dir @ _centering_matrix(n) / denom


def backprop_normalization(upstream, patch, mode):
    """Pull an upstream gradient back through a normalization, in O(n).

    Given ``u = dL/d(normalized patch)`` (same shape as ``patch``), returns
    ``dL/d(patch)``, i.e. ``u^T J`` reshaped to the patch shape.  Uses the
    factored form of the Jacobian rather than materializing it:

    * STD: ``v = u - (u . pbar) pbar``, result ``(v - mean(v)) / ss``.
    * MAD: ``w = u - (u . q) / (n * mad) * s``, result
      ``(w - mean(w)) / (sqrt(n) * mad)``.

    For MAD the subgradient convention ``sign(0) = 0`` is used, so pixels
    sitting exactly on the kink contribute nothing to the mad-derivative
    term; unlike :func:`jacobian_normalize_mad` this never raises for
    kink proximity.  ``mode='none'`` returns ``upstream`` unchanged.
    """
    u = as_patch(upstream, "upstream")
    p = as_patch(patch)
    if u.shape != p.shape:
        raise ValueError(f"shape mismatch: upstream {u.shape} vs patch {p.shape}")
    if mode == NORM_NONE:
        return u.copy()
    n = p.size
    q = _centered(p)
    if mode == NORM_STD:
        if n < 2:
            raise ValueError("STD normalization needs at least 2 pixels")
        ss = float(np.sqrt(np.sum(q * q)))
        sigma = ss / np.sqrt(n - 1)
        if sigma <= SIGMA_MIN:
            raise DegeneratePatchError(f"flat patch: std={sigma:.3e}")
        pbar = q / ss
        v = u - np.sum(u * pbar) * pbar
        return (v - np.mean(v)) / ss
    if mode == NORM_MAD:
        mad = float(np.mean(np.abs(q)))
        if mad <= MAD_MIN:
            raise DegeneratePatchError(f"flat patch: mad={mad:.3e}")
        w = u - np.sum(u * q) / (n * mad) * np.sign(q)
        return (w - np.mean(w)) / (np.sqrt(n) * mad)
    raise ValueError(f"unknown normalization mode {mode!r}")
