"""Walk through the scoring core: patch statistics, the two
normalizations, score bounds, affine invariance, and why the analytic
backward pass can be trusted.

Run: python3 demos/01_ncc_basics.py
"""

import numpy as np

from nccbank import patchmath as pm


def banner(title):
    print()
    print(title)
    print("-" * len(title))


def main():
    rng = np.random.default_rng(7)

    banner("patch statistics")
    p = np.array([[1.0, 2.0], [3.0, 4.0]])
    print("patch:", p.tolist())
    print(f"mean = {pm.patch_mean(p)}")
    print(f"std  = {pm.patch_std(p):.6f}   (sample convention, n-1)")
    print(f"mad  = {pm.patch_mad(p)}")

    banner("normalization: same patch, two dispersion measures")
    print("std-normalized:")
    print(pm.normalize_std(p))
    print("mad-normalized:")
    print(pm.normalize_mad(p))
    print("both are zero-mean; the std one is also unit-norm, which is")
    print("what bounds STD scores to [-1, 1].")

    banner("scores are cosine similarities (std mode)")
    blob = np.exp(-((np.arange(9) - 4.0) ** 2) / 8.0)
    blob = blob[:, None] * blob[None, :]
    noise = rng.normal(size=(9, 9))
    print(f"blob   vs itself : {pm.ncc_score(blob, blob, pm.NORM_STD):+.6f}")
    print(f"blob   vs -blob  : {pm.ncc_score(-blob, blob, pm.NORM_STD):+.6f}")
    print(f"noise  vs blob   : {pm.ncc_score(noise, blob, pm.NORM_STD):+.6f}")
    worst = max(
        abs(pm.ncc_score(rng.normal(size=(9, 9)), blob, pm.NORM_STD))
        for _ in range(2000)
    )
    print(f"max |score| over 2000 random patches: {worst:.9f}  (bound 1.0)")

    banner("amplitude does not matter (affine invariance)")
    patch = rng.normal(loc=100.0, scale=5.0, size=(9, 9))
    for mode in (pm.NORM_STD, pm.NORM_MAD):
        s0 = pm.ncc_score(patch, blob, mode)
        s1 = pm.ncc_score(3.7 * patch + 250.0, blob, mode)
        print(f"{mode}: score {s0:+.9f} -> {s1:+.9f}  (|delta| {abs(s1 - s0):.2e})")
    s0 = pm.ncc_score(patch, blob, pm.NORM_NONE)
    s1 = pm.ncc_score(3.7 * patch + 250.0, blob, pm.NORM_NONE)
    print(f"none: score {s0:+.3f} -> {s1:+.3f}  (raw correlation is gain-sensitive)")

    banner("the backward pass is analytic, not autodiff")
    patch = rng.normal(size=(5, 5))
    jac = pm.jacobian_normalize_std(patch)
    print(f"J_std is {jac.shape[0]}x{jac.shape[1]}; max |row sum| = "
          f"{np.abs(jac.sum(axis=1)).max():.2e}")
    print("row sums vanish because adding a constant to the patch cannot")
    print("change its normalized form.")

    # crude finite-difference spot check on one column
    step = 1e-6
    hi, lo = patch.copy(), patch.copy()
    hi[2, 2] += step
    lo[2, 2] -= step
    fd_col = (pm.normalize_std(hi) - pm.normalize_std(lo)).ravel() / (2 * step)
    err = np.abs(jac[:, 12] - fd_col).max()
    print(f"column 12 vs central differences: max |delta| = {err:.2e}")

    banner("sliding correlation")
    frame = rng.normal(loc=30.0, scale=1.0, size=(32, 32))
    frame[10:19, 14:23] += 8.0 * blob
    resp = pm.cross_correlate_valid(frame - frame.mean(), pm.normalize_std(blob))
    r, c = np.unravel_index(np.argmax(resp), resp.shape)
    print(f"planted blob top-left at (10, 14); response argmax at ({r}, {c})")


if __name__ == "__main__":
    main()
