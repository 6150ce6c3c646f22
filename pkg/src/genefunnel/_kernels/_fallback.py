"""Pure-numpy implementations of the hot kernels.

Semantics (including every tie-break) must match the compiled versions in
``_core.pyx``; the parity tests compare the two on random inputs.
"""
import numpy as np


def best_split(x, g, h, lam, gamma):
    """Exact greedy split search over all features and midpoint thresholds.

    x: (m, n) float64 node matrix; g, h: per-row gradient/hessian sums.
    Returns (feature, threshold, gain) for the highest strictly positive
    gain, ties broken by lower feature index then lower threshold, or
    (-1, 0.0, 0.0) when no split improves the objective.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    m, n = x.shape
    total_g = float(g.sum())
    total_h = float(h.sum())
    parent = total_g * total_g / (total_h + lam)
    best_feat, best_thr, best_gain = -1, 0.0, 0.0
    if m < 2:
        return best_feat, best_thr, best_gain
    for j in range(n):
        col = x[:, j]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        gl = np.cumsum(g[order])
        hl = np.cumsum(h[order])
        cuts = np.flatnonzero(xs[:-1] != xs[1:])
        if cuts.size == 0:
            continue
        left_g = gl[cuts]
        left_h = hl[cuts]
        right_g = total_g - left_g
        right_h = total_h - left_h
        gains = 0.5 * (left_g * left_g / (left_h + lam)
                       + right_g * right_g / (right_h + lam)
                       - parent) - gamma
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            best_gain = float(gains[i])
            best_thr = float(0.5 * (xs[cuts[i]] + xs[cuts[i] + 1]))
            best_feat = j
    return best_feat, best_thr, best_gain


def knn_predict(train, labels, test, k, n_classes):
    """Majority-vote k-nearest-neighbor labels under Euclidean distance.

    Neighbor order ties break on lower training index; vote ties go to
    the tied class whose nearest member comes first, then lower class.
    """
    train = np.ascontiguousarray(train, dtype=np.float64)
    test = np.ascontiguousarray(test, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    m = train.shape[0]
    k = min(k, m)
    out = np.empty(test.shape[0], dtype=np.int64)
    diffs = test[:, None, :] - train[None, :, :]
    d2 = np.einsum("qmd,qmd->qm", diffs, diffs)
    idx = np.arange(m)
    for q in range(test.shape[0]):
        order = np.lexsort((idx, d2[q]))[:k]
        votes = np.bincount(labels[order], minlength=n_classes)
        top = votes.max()
        tied = np.flatnonzero(votes == top)
        if tied.size == 1:
            out[q] = tied[0]
        else:
            winner = tied[0]
            for t in order:
                if votes[labels[t]] == top:
                    winner = labels[t]
                    break
            out[q] = winner
    return out
