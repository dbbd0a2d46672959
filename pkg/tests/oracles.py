"""Independent reference computations used by several test modules."""

import numpy as np


def exact_mise_stats(p, n, ideal):
    """Analytic C, f and |ideal|^2 for multinomial estimates of rows ``p`` with ``n`` shots."""
    p = np.asarray(p, dtype=float)
    c = p @ p.T
    for m in range(len(p)):
        c[m, m] = 1.0 / n[m] + (1.0 - 1.0 / n[m]) * float(p[m] @ p[m])
    return c, p @ ideal, float(ideal @ ideal)


def simplex_grid(m, step=1e-3):
    k = int(round(1 / step))
    if m == 2:
        a = np.arange(k + 1) / k
        return np.stack([a, 1 - a], axis=1)
    if m == 3:
        i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        keep = i + j <= k
        a, b = i[keep] / k, j[keep] / k
        return np.stack([a, b, 1 - a - b], axis=1)
    raise ValueError("grid oracle supports M in {2, 3}")


def grid_mise_min(c, f, norm, step=1e-3):
    w = simplex_grid(len(f), step)
    vals = np.einsum("ij,jk,ik->i", w, c, w) - 2 * w @ f + norm
    i = int(np.argmin(vals))
    return float(vals[i]), w[i]


def hellinger_objective(p_bar, p_hat, w):
    """Weighted sum of squared Hellinger distances from ``p_bar`` to each row of ``p_hat``."""
    d2 = 0.5 * np.sum((np.sqrt(p_bar)[None, :] - np.sqrt(p_hat)) ** 2, axis=1)
    return float(w @ d2)
