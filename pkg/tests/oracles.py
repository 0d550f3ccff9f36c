"""Independent reference implementations used to pin expected test values.

Everything in this file is deliberately naive: explicit Python loops,
textbook formulas, and finite differences.  Nothing here imports from
``nccbank``, so agreement between the two is meaningful.
"""

import numpy as np


def naive_mean(grid):
    total = 0.0
    count = 0
    for row in grid:
        for v in row:
            total += float(v)
            count += 1
    return total / count


def naive_std(grid):
    """Sample standard deviation with the n - 1 divisor, two-pass."""
    mu = naive_mean(grid)
    acc = 0.0
    count = 0
    for row in grid:
        for v in row:
            acc += (float(v) - mu) ** 2
            count += 1
    return (acc / (count - 1)) ** 0.5


def naive_mad(grid):
    mu = naive_mean(grid)
    acc = 0.0
    count = 0
    for row in grid:
        for v in row:
            acc += abs(float(v) - mu)
            count += 1
    return acc / count


def naive_normalize_std(grid):
    g = np.asarray(grid, dtype=float)
    mu = naive_mean(g)
    sd = naive_std(g)
    return (g - mu) / (np.sqrt(g.size - 1) * sd)


def naive_normalize_mad(grid):
    g = np.asarray(grid, dtype=float)
    mu = naive_mean(g)
    md = naive_mad(g)
    return (g - mu) / (np.sqrt(g.size) * md)


def naive_correlate_valid(image, filt):
    """Triple-loop valid-mode cross-correlation."""
    img = np.asarray(image, dtype=float)
    f = np.asarray(filt, dtype=float)
    oh = img.shape[0] - f.shape[0] + 1
    ow = img.shape[1] - f.shape[1] + 1
    out = np.zeros((oh, ow))
    for i in range(oh):
        for j in range(ow):
            acc = 0.0
            for r in range(f.shape[0]):
                for c in range(f.shape[1]):
                    acc += img[i + r, j + c] * f[r, c]
            out[i, j] = acc
    return out


def fd_jacobian(func, x, step=1e-6):
    """Central finite-difference Jacobian of ``func`` at flattened ``x``.

    ``func`` maps a 2-D grid to a 2-D grid of the same shape.  Returns an
    (n, n) matrix J with J[i, j] = d out_i / d x_j, both sides flattened
    row-major.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    jac = np.zeros((n, n))
    flat = x.ravel().copy()
    for j in range(n):
        hi = flat.copy()
        lo = flat.copy()
        hi[j] += step
        lo[j] -= step
        f_hi = np.asarray(func(hi.reshape(x.shape))).ravel()
        f_lo = np.asarray(func(lo.reshape(x.shape))).ravel()
        jac[:, j] = (f_hi - f_lo) / (2.0 * step)
    return jac


def fd_gradient(func, x, step=1e-6):
    """Central finite-difference gradient of a scalar function of a grid."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.size)
    flat = x.ravel().copy()
    for j in range(x.size):
        hi = flat.copy()
        lo = flat.copy()
        hi[j] += step
        lo[j] -= step
        grad[j] = (func(hi.reshape(x.shape)) - func(lo.reshape(x.shape))) / (2.0 * step)
    return grad.reshape(x.shape)


def rel_error(approx, exact):
    """max |a - e| / max(1, max |e|), a scale-aware elementwise error."""
    a = np.asarray(approx, dtype=float)
    e = np.asarray(exact, dtype=float)
    denom = max(1.0, float(np.max(np.abs(e))))
    return float(np.max(np.abs(a - e))) / denom
