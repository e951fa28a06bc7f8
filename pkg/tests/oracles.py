"""Independent reference implementations used by the tests.

These are deliberately slow and literal so that they share no code paths
with the library.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def sse_of_labels(X, labels):
    total = 0.0
    for c in set(labels):
        pts = X[np.asarray(labels) == c]
        total += float(((pts - pts.mean(0)) ** 2).sum())
    return total


def best_two_way_sse(X):
    """Minimum SSE over every labeling of X into two non-empty groups."""
    best = math.inf
    for bits in itertools.product([0, 1], repeat=len(X)):
        if 0 < sum(bits) < len(X):
            best = min(best, sse_of_labels(X, list(bits)))
    return best


def silhouette_direct(X, labels):
    X = np.asarray(X, dtype=float)
    labels = list(labels)
    n = len(X)
    scores = []
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not same:
            scores.append(0.0)
            continue
        a = sum(math.dist(X[i], X[j]) for j in same) / len(same)
        b = math.inf
        for c in set(labels) - {labels[i]}:
            members = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(math.dist(X[i], X[j]) for j in members) / len(members))
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    return sum(scores) / n


def dtw_classic(x, y):
    n, m = len(x), len(y)
    D = [[math.inf] * (m + 1) for _ in range(n + 1)]
    D[0][0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            D[i][j] = (x[i - 1] - y[j - 1]) ** 2 + min(D[i - 1][j - 1], D[i - 1][j], D[i][j - 1])
    return D[n][m]


def ks_series_p(D, n1, n2):
    """Asymptotic two-sample KS p-value by summing the alternating series term by term."""
    lam = D * math.sqrt(n1 * n2 / (n1 + n2))
    if lam == 0:
        return 1.0
    total, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        if term < 1e-12:
            break
        total += (-1) ** (k - 1) * term
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_d_direct(A, B):
    pooled = sorted(set(A) | set(B))
    ecdf = lambda S, x: sum(1 for s in S if s <= x) / len(S)
    return max(abs(ecdf(A, x) - ecdf(B, x)) for x in pooled)


def order_stat_quantiles(E, alpha):
    """(q_lo, q_hi) with exact rational rank arithmetic."""
    s = sorted(E)
    n = len(s)
    a = Fraction(alpha).limit_denominator(10**9)
    hi = math.ceil((n + 1) * (1 - a / 2))
    lo = math.floor((n + 1) * a / 2)
    hi = min(max(hi, 1), n)
    lo = min(max(lo, 1), n)
    return s[lo - 1], s[hi - 1]


def order_stat_abs(E_abs, alpha):
    s = sorted(E_abs)
    n = len(s)
    a = Fraction(alpha).limit_denominator(10**9)
    r = min(max(math.ceil((n + 1) * (1 - a)), 1), n)
    return s[r - 1]


def brute_window(renewable, load, backlog, prices, gamma, p_max, running=None):
    """Minimum plan cost by enumerating integer allocations over steps plus deferral."""
    steps = len(load)
    running = [0] * steps if running is None else list(running)
    total = int(round(sum(load) + backlog))
    n = steps - 1
    best = math.inf

    def rec(k, left, alloc):
        nonlocal best
        if k == steps:
            cost = left * p_max * gamma**n
            for j, x in enumerate(alloc):
                cost += max(x + running[j] - renewable[j], 0) * prices[j] * gamma**j
            best = min(best, cost)
            return
        for x in range(left + 1):
            rec(k + 1, left - x, alloc + [x])

    rec(0, total, [])
    return best
