"""Slow, independently written reference implementations used as test oracles."""

import math

import numpy as np
from scipy.optimize import minimize


# ---- features

def naive_stats(values):
    xs = [float(v) for v in values]
    n = len(xs)
    if n == 0:
        return [0.0] * 5
    mean = sum(xs) / n
    dev = [x - mean for x in xs]
    s2 = sum(d * d for d in dev)
    s3 = sum(d * d * d for d in dev)
    s4 = sum(d * d * d * d for d in dev)
    if all(x == xs[0] for x in xs):
        s2 = 0.0
    var = s2 / (n - 1) if n > 1 else 0.0
    if s2 == 0.0:
        return [mean, math.sqrt(var), var, 0.0, 0.0]
    skew = (s3 / n) / (s2 / (n - 1)) ** 1.5
    kurt = s4 / ((1.0 / n) * s2 * s2)
    return [mean, math.sqrt(var), var, skew, kurt]


def naive_normalize(powers):
    lo, hi = min(powers), max(powers)
    if lo == hi:
        return [0.0] * len(powers)
    return [(p - lo) / (hi - lo) for p in powers]


def naive_features(times, freqs, powers, window, band, T, F):
    """Feature vector by explicit interval membership, region by region."""
    f0, f1 = band

    def in_time(t, r):
        return W_edge(window, T, r) <= t < W_edge(window, T, r + 1)

    def in_freq(f, c):
        lo = f0 + (f1 - f0) * c / F
        hi = f0 + (f1 - f0) * (c + 1) / F
        if c == F - 1:
            return lo <= f <= f1
        return lo <= f < hi

    samples = list(zip(times, freqs, powers))
    out = naive_stats([p for _, _, p in samples])
    for r in range(T):
        out += naive_stats([p for t, _, p in samples if in_time(t, r)])
    for r in range(T):
        for c in range(F):
            out += naive_stats([p for t, f, p in samples if in_time(t, r) and in_freq(f, c)])
    return out


def W_edge(window, T, r):
    return window if r == T else window * r / T


# ---- one-class SVM

def dense_ocsvm(K, nu, iters=20000):
    """Reference solution of min 1/2 a'Ka, 0 <= a <= 1/(nu N), sum a = 1.

    SLSQP from a feasible start, then projected-gradient polishing with an
    exact projection onto the capped simplex (bisection on the shift).
    """
    N = K.shape[0]
    C = 1.0 / (nu * N)
    a0 = np.full(N, 1.0 / N)
    res = minimize(lambda a: 0.5 * a @ K @ a, a0, jac=lambda a: K @ a, method="SLSQP",
                   bounds=[(0.0, C)] * N,
                   constraints=[{"type": "eq", "fun": lambda a: a.sum() - 1.0,
                                 "jac": lambda a: np.ones(N)}],
                   options={"ftol": 1e-15, "maxiter": 2000})
    a = project_capped_simplex(res.x, C)
    step = 1.0 / max(np.linalg.eigvalsh(K)[-1], 1e-12)
    for _ in range(iters):
        nxt = project_capped_simplex(a - step * (K @ a), C)
        if np.max(np.abs(nxt - a)) < 1e-15:
            a = nxt
            break
        a = nxt
    return a


def project_capped_simplex(v, C):
    lo, hi = v.min() - C, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid, 0.0, C).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi), 0.0, C)


def kkt_violation(K, alphas, rho, nu):
    """Largest violation of the optimality conditions of the dual.

    With G = K a: coordinates strictly inside the box need G == rho, those
    at 0 need G >= rho and those at the cap need G <= rho.
    """
    N = K.shape[0]
    C = 1.0 / (nu * N)
    G = K @ alphas
    eps = 1e-12
    worst = abs(alphas.sum() - 1.0)
    worst = max(worst, float(np.max(np.maximum(-alphas, alphas - C))))
    for g, a in zip(G, alphas):
        if a <= eps:
            worst = max(worst, rho - g)
        elif a >= C - eps:
            worst = max(worst, g - rho)
        else:
            worst = max(worst, abs(g - rho))
    return worst


# ---- evaluation

def brute_force_threshold(pos, neg, fpr_cap):
    """Try every candidate cut; keep max TPR with FPR <= cap, ties to the higher cut."""
    values = sorted(set(pos) | set(neg))
    cands = set(values)
    cands.update((a + b) / 2 for a, b in zip(values, values[1:]))
    cands.add(np.nextafter(values[-1], np.inf))
    best = None
    for t in sorted(cands):
        tpr = sum(p >= t for p in pos) / len(pos)
        fpr = sum(n >= t for n in neg) / len(neg) if neg else 0.0
        if fpr <= fpr_cap and (best is None or tpr >= best[1]):
            best = (t, tpr)
    return best


# ---- ranking

def naive_mutual_information(x, y):
    n = len(x)
    joint = {}
    for a, b in zip(x, y):
        joint[(a, b)] = joint.get((a, b), 0) + 1
    px, py = {}, {}
    for (a, b), c in joint.items():
        px[a] = px.get(a, 0) + c
        py[b] = py.get(b, 0) + c
    return sum(c / n * math.log((c / n) / ((px[a] / n) * (py[b] / n))) for (a, b), c in joint.items())


def exhaustive_jmi_pick(D, y, selected, candidates, joint):
    """Candidate maximizing sum_s I((f, f_s); y), scanning in index order."""
    best, best_score = None, -math.inf
    for i in candidates:
        total = sum(naive_mutual_information(list(joint(D[:, i], D[:, s])), y) for s in selected)
        if total > best_score + 1e-12:
            best, best_score = i, total
    return best, best_score
