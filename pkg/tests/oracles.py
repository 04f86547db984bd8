"""Independent reference implementations used to cross-check the library.

Everything here is written for clarity over speed and deliberately avoids
the library's own code paths.
"""

import numpy as np


def exhaustive_kmeans_inertia(vectors, k):
    """Globally optimal k-means inertia by enumerating all k^n labelings."""
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    total_sq = (x**2).sum()
    best = np.inf
    total = k**n
    chunk = 1 << 16
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        labelings = np.empty((codes.size, n), dtype=np.int64)
        for pos in range(n):
            labelings[:, pos] = codes % k
            codes = codes // k
        onehot = np.eye(k)[labelings]  # (L, n, k)
        counts = onehot.sum(axis=1)  # (L, k)
        sums = np.einsum("lnk,nd->lkd", onehot, x)
        with np.errstate(invalid="ignore", divide="ignore"):
            centroids = np.where(counts[:, :, None] > 0, sums / counts[:, :, None], 0.0)
        explained = (counts * (centroids**2).sum(axis=2)).sum(axis=1)
        best = min(best, float((total_sq - explained).min()))
    return best


def adjusted_rand_index(labels_a, labels_b):
    """ARI from the pair-counting contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    assert a.shape == b.shape
    classes_a = sorted(set(a.tolist()))
    classes_b = sorted(set(b.tolist()))
    table = np.zeros((len(classes_a), len(classes_b)), dtype=np.int64)
    for x, y in zip(a, b):
        table[classes_a.index(x), classes_b.index(y)] += 1

    def comb2(v):
        return v * (v - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(a.size)
    expected = sum_rows * sum_cols / total
    max_index = (sum_rows + sum_cols) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def svm_dual_objective(alpha, y, gram):
    """W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    q = (y[:, None] * y[None, :]) * np.asarray(gram)
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def solve_svm_dual_qp(gram, y, c, iterations=200_000):
    """Projected-gradient ascent on the SVM dual with exact feasibility.

    Maximizes W(alpha) subject to 0 <= alpha <= C and sum alpha_i y_i = 0.
    The projection onto the box intersected with the hyperplane is exact:
    alpha = clip(v - t*y, 0, C) where the residual g(t) = alpha @ y is
    piecewise linear and nonincreasing in the multiplier t, so the root is
    found by linear interpolation between the two bracketing breakpoints
    (the 2n values of t where a coordinate enters or leaves the box).
    Step size 1/lambda_max guarantees monotone convergence.
    """
    y = np.asarray(y, dtype=np.float64)
    gram = np.asarray(gram, dtype=np.float64)
    n = y.size
    q = (y[:, None] * y[None, :]) * gram
    lam_max = float(np.linalg.eigvalsh(q).max())
    step = 1.0 / max(lam_max, 1e-12)

    def project(v):
        b = np.concatenate([y * v, y * (v - c)])
        b.sort()
        g = np.clip(v[None, :] - b[:, None] * y[None, :], 0.0, c) @ y
        below = g <= 0.0
        if not below.any():
            t = b[-1]
        else:
            k = int(np.argmax(below))  # first breakpoint with g <= 0
            if k == 0:
                t = b[0]
            else:
                g_lo, g_hi = g[k - 1], g[k]
                width = b[k] - b[k - 1]
                t = b[k - 1] + (width * g_lo / (g_lo - g_hi) if g_lo > g_hi else 0.0)
        return np.clip(v - t * y, 0.0, c)

    alpha = project(np.zeros(n))
    for _ in range(iterations):
        grad = 1.0 - q @ alpha
        new = project(alpha + step * grad)
        if np.abs(new - alpha).max() < 1e-12:
            alpha = new
            break
        alpha = new
    return alpha
