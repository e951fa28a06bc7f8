"""Grouping forecast windows by shape and magnitude.

Windows are clustered as raw b-vectors (no normalisation, so amplitude stays
visible to the distance) with k-means; the number of clusters is picked by
mean silhouette. New windows are assigned by a majority vote among their
nearest historical windows under soft-DTW.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from dscp.errors import EmptySequence, HorizonMismatch, SingleCluster, TooFewWindows

MAX_ITER = 300


@dataclass(frozen=True)
class ClusterModel:
    """Result of a clustering run. Labels are 0-based."""

    k: int
    centroids: np.ndarray
    labels: np.ndarray
    silhouette: Optional[float] = None
    inertia: float = 0.0
    history: tuple = ()
    scores: Optional[dict] = None

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def _as_matrix(windows) -> np.ndarray:
    if len(windows) and hasattr(windows[0], "values"):
        windows = [w.values for w in windows]
    X = np.atleast_2d(np.asarray(windows, dtype=float))
    return X


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _sse(X: np.ndarray, labels: np.ndarray, k: int) -> float:
    total = 0.0
    for c in range(k):
        pts = X[labels == c]
        if len(pts):
            total += float(((pts - pts.mean(0)) ** 2).sum())
    return total


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = len(X)
    centers = [X[rng.integers(m)]]
    closest = _sq_dists(X, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(m)
        else:
            idx = rng.choice(m, p=closest / total)
        centers.append(X[idx])
        closest = np.minimum(closest, _sq_dists(X, X[idx][None, :])[:, 0])
    return np.array(centers)


def kmeans(windows, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding on raw window vectors.

    Iterates until the assignment reaches a fixpoint or ``max_iter``.
    A cluster left empty after an assignment step is reseeded at the point
    farthest from its current centre. ``history`` records the within-cluster
    SSE after every assignment step.
    """
    X = _as_matrix(windows)
    m = len(X)
    if k < 1:
        raise TooFewWindows("k must be >= 1")
    if m < k:
        raise TooFewWindows(f"{m} windows cannot form {k} clusters")
    if k > 1 and len(np.unique(X, axis=0)) < k:
        raise TooFewWindows(f"fewer than {k} distinct windows")

    if k == 1:
        centroid = X.mean(0, keepdims=True)
        labels = np.zeros(m, dtype=np.int64)
        sse = _sse(X, labels, 1)
        return ClusterModel(1, centroid, labels, inertia=sse, history=(sse,))

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, k, rng)
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dists(X, centroids)
        new = d.argmin(1)
        for c in range(k):
            if not np.any(new == c):
                far = int(d[np.arange(m), new].argmax())
                centroids[c] = X[far]
                new[far] = c
                d = _sq_dists(X, centroids)
        history.append(_sse(X, new, k))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = np.array([X[labels == c].mean(0) for c in range(k)])
    return ClusterModel(k, centroids, labels.astype(np.int64), inertia=history[-1], history=tuple(history))


def pairwise_distances(X, chunk: int = 256) -> np.ndarray:
    """Euclidean distance matrix from explicit differences (no norm expansion,
    which loses ~1e-9 relative accuracy)."""
    X = _as_matrix(X)
    out = np.empty((len(X), len(X)))
    for lo in range(0, len(X), chunk):
        diff = X[lo:lo + chunk, None, :] - X[None, :, :]
        out[lo:lo + chunk] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def silhouette_score(windows, labels, distances: Optional[np.ndarray] = None) -> float:
    """Mean silhouette with Euclidean distance.

    Points in singleton clusters score 0, as does any point whose intra- and
    nearest-cluster mean distances are both 0.
    """
    labels = np.asarray(labels)
    uniq, inv = np.unique(labels, return_inverse=True)
    if len(uniq) < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    D = pairwise_distances(windows) if distances is None else distances
    m = len(labels)
    k = len(uniq)
    onehot = np.zeros((m, k))
    onehot[np.arange(m), inv] = 1.0
    sums = D @ onehot
    counts = onehot.sum(0)
    own = counts[inv]
    a = np.where(own > 1, sums[np.arange(m), inv] / np.maximum(own - 1, 1), 0.0)
    other = sums / counts
    other[np.arange(m), inv] = np.inf
    b = other.min(1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def self_cluster(windows, N: int, seed: int = 0) -> ClusterModel:
    """Pick the k-means model with the best mean silhouette for k in 2..min(N, m).

    Ties go to the smaller k. Fewer than four windows, ``N == 1`` or a single
    distinct window give the single-cluster model; k never exceeds the number
    of distinct windows.
    """
    X = _as_matrix(windows)
    m = len(X)
    if m < 1:
        raise TooFewWindows("no windows to cluster")
    distinct = len(np.unique(X, axis=0))
    if m < 4 or N <= 1 or distinct < 2:
        return kmeans(X, 1)
    D = pairwise_distances(X)
    best, scores = None, {}
    for k in range(2, min(N, distinct) + 1):
        model = kmeans(X, k, seed=int(np.random.SeedSequence([seed, k]).generate_state(1)[0]))
        score = silhouette_score(X, model.labels, D)
        scores[k] = score
        if best is None or score > best[0]:
            best = (score, model)
    score, model = best
    return ClusterModel(model.k, model.centroids, model.labels, score, model.inertia, model.history, scores)


def _softmin(stack: np.ndarray, gamma: float) -> np.ndarray:
    # stack: (3, ...) candidate costs, some possibly +inf
    z = -stack / gamma
    zmax = z.max(0)
    finite = np.isfinite(zmax)
    safe = np.where(finite, zmax, 0.0)
    with np.errstate(invalid="ignore"):
        lse = safe + np.log(np.exp(z - safe).sum(0))
    return np.where(finite, -gamma * lse, np.inf)


def _softmin3(a: np.ndarray, b: np.ndarray, c: np.ndarray, gamma: float) -> np.ndarray:
    # at least one operand is finite at every interior lattice cell
    low = np.minimum(np.minimum(a, b), c)
    total = np.exp((low - a) / gamma)
    total += np.exp((low - b) / gamma)
    total += np.exp((low - c) / gamma)
    return low - gamma * np.log(total)


def soft_dtw(x, y, gamma: float = 1.0) -> float:
    """Soft-DTW discrepancy with squared-difference local cost."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise EmptySequence("soft-DTW needs non-empty sequences")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    n, m = x.size, y.size
    R = np.full((n + 1, m + 1), np.inf)
    R[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = (x[i - 1] - y[j - 1]) ** 2
            if i == 1 and j == 1:
                R[i, j] = cost
                continue
            prev = np.array([R[i - 1, j - 1], R[i - 1, j], R[i, j - 1]])
            R[i, j] = cost + float(_softmin(prev, gamma))
    return float(R[n, m])


def soft_dtw_matrix(X, Y, gamma: float = 1.0, chunk: int = 128) -> np.ndarray:
    """Soft-DTW between every row of ``X`` (p, n) and every row of ``Y`` (q, m).

    Same recursion as :func:`soft_dtw`, vectorised over all pairs.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] == 0 or Y.shape[1] == 0:
        raise EmptySequence("soft-DTW needs non-empty sequences")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    out = np.empty((len(X), len(Y)))
    for lo in range(0, len(X), chunk):
        out[lo:lo + chunk] = _soft_dtw_block(X[lo:lo + chunk], Y, gamma)
    return out


def _soft_dtw_block(X: np.ndarray, Y: np.ndarray, gamma: float) -> np.ndarray:
    p, n = X.shape
    q, m = Y.shape
    inf_row = np.full((p, q), np.inf)
    prev = [np.zeros((p, q))] + [inf_row] * m  # lattice row 0
    for i in range(1, n + 1):
        xi = X[:, i - 1][:, None]
        cur = [inf_row]
        for j in range(1, m + 1):
            cost = (xi - Y[:, j - 1][None, :]) ** 2
            if i == 1 and j == 1:
                cur.append(cost)
                continue
            cur.append(cost + _softmin3(prev[j - 1], prev[j], cur[j - 1], gamma))
        prev = cur
    return prev[m]


def assign_labels(
    new_windows,
    hist_windows: np.ndarray,
    hist_labels: np.ndarray,
    s: int,
    k: int,
    gamma: float = 1.0,
) -> np.ndarray:
    """Majority cluster among the ``s`` most soft-DTW-similar historical windows.

    Historical windows must be in anchor order: similarity ties at the
    ``s`` boundary keep the earlier window, and frequency ties go to the
    lowest label.
    """
    new = _as_matrix(new_windows)
    hist = _as_matrix(hist_windows)
    if new.shape[1] != hist.shape[1]:
        raise HorizonMismatch(f"window horizon {new.shape[1]} != store horizon {hist.shape[1]}")
    hist_labels = np.asarray(hist_labels)
    s = max(1, min(int(s), len(hist)))
    dist = soft_dtw_matrix(new, hist, gamma)
    # ascending distance == descending similarity; stable sort keeps anchor order on ties
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :s]
    votes = np.zeros((len(new), k), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(len(new)), s), hist_labels[nearest].ravel()), 1)
    return votes.argmax(1)


def assign_cluster(window, store) -> int:
    """Cluster label for one forecast window against a calibration store."""
    values = window.values if hasattr(window, "values") else np.asarray(window, dtype=float)
    if values.size != store.horizon:
        raise HorizonMismatch(f"window horizon {values.size} != store horizon {store.horizon}")
    gamma = float(store.config.get("gamma_dtw", 1.0))
    return int(assign_labels(values[None, :], store.windows, store.labels,
                             store.smallest_cluster_size, store.k, gamma)[0])
