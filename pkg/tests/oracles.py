"""Independent reference implementations used only by the tests."""

from itertools import combinations

import numpy as np


def hull_distance_enumerate(query, data):
    """Exact hull distance by enumerating every nonempty row subset.

    For each subset the affine-hull projection is found from the bordered
    normal equations; feasible (nonnegative) solutions are candidate optima.
    Returns ``(distance, weights)``.
    """
    D = np.asarray(data, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64)
    n = D.shape[0]
    best = (np.inf, None)
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            S = D[list(subset)]
            G = S @ S.T
            K = np.zeros((size + 1, size + 1))
            K[:size, :size] = 2 * G
            K[:size, size] = 1
            K[size, :size] = 1
            rhs = np.concatenate([2 * S @ q, [1.0]])
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            a = sol[:size]
            if abs(a.sum() - 1) > 1e-9 or a.min() < -1e-12:
                continue
            dist = float(np.linalg.norm(q - a @ S))
            if dist < best[0] - 1e-14:
                w = np.zeros(n)
                w[list(subset)] = a
                best = (dist, w)
    return best


def simplex_projection_bisect(v, iters=200):
    """Projection onto the simplex by bisection on the threshold."""
    v = np.asarray(v, dtype=np.float64)
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0).sum() > 1:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0)


def haar_1level_direct(img):
    """One-level orthonormal Haar coefficients computed block by block."""
    h, w = img.shape
    out = np.zeros((h, w))
    for i in range(h // 2):
        for j in range(w // 2):
            a, b = img[2 * i, 2 * j], img[2 * i, 2 * j + 1]
            c, d = img[2 * i + 1, 2 * j], img[2 * i + 1, 2 * j + 1]
            out[i, j] = (a + b + c + d) / 2
            out[i, j + w // 2] = (a - b + c - d) / 2
            out[i + h // 2, j] = (a + b - c - d) / 2
            out[i + h // 2, j + w // 2] = (a - b - c + d) / 2
    return out
