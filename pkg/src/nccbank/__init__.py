"""Learned NCC filter banks for infrared small-target detection.

The package is organized as a plain numpy library:

* ``patchmath``  -- patch statistics, STD/MAD normalization, valid-mode
  correlation, NCC scores, and the analytic normalization Jacobians.
* ``nccnet``     -- the small two-layer NCC network (filters + ReLU +
  decision weights), hand-derived gradients, and SGD-with-momentum training.
* ``filterbank`` -- engineered detectors: Gaussian and center-surround
  ("hat") filters, cropping, Q-format quantization, a bit-exact integer
  MAD-NCC scorer, and analytic operation counts.
* ``irdatagen``  -- synthetic infrared scene and patch-dataset generation,
  augmentation, negative subsampling, and the binary dataset format.
* ``bench``      -- sliding-window detection, detection/truth matching,
  ROC curves, and the benchmark harness.
* ``cli``        -- the ``nccbank`` command-line interface.
"""

from nccbank.patchmath import (
    DegeneratePatchError,
    KinkProximityError,
    backprop_normalization,
    cross_correlate_valid,
    jacobian_normalize_mad,
    jacobian_normalize_std,
    ncc_score,
    normalize_mad,
    normalize_std,
    patch_mad,
    patch_mean,
    patch_std,
)

__version__ = "0.1.0"

__all__ = [
    "DegeneratePatchError",
    "KinkProximityError",
    "backprop_normalization",
    "cross_correlate_valid",
    "jacobian_normalize_mad",
    "jacobian_normalize_std",
    "ncc_score",
    "normalize_mad",
    "normalize_std",
    "patch_mad",
    "patch_mean",
    "patch_std",
]
