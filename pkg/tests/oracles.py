"""Independent reference implementations used only by the tests."""

import numpy as np


def full_scores(query, target):
    # Elementwise products summed per pair: no BLAS, no blocking.
    q = np.asarray(query, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    return np.clip((q[:, None, :] * t[None, :, :]).sum(axis=-1), -1.0, 1.0)


def naive_topk(query, target, k):
    """Full score matrix, then a complete sort of every row by (score desc, index asc)."""
    full = full_scores(query, target)
    cols = np.broadcast_to(np.arange(full.shape[1]), full.shape)
    order = np.lexsort((cols, -full), axis=1)[:, :k]
    return order, np.take_along_axis(full, order, axis=1)


def brute_operating_points(genuine, impostor):
    """Scan every candidate threshold with direct counting; same EER interpolation."""
    gen = np.asarray(genuine, dtype=np.float64)
    imp = np.asarray(impostor, dtype=np.float64)
    values = sorted(set(gen.tolist()) | set(imp.tolist()))
    values.append(float(np.nextafter(values[-1], np.inf)))
    fmr, fnmr = [], []
    for t in values:
        fmr.append(int(np.count_nonzero(imp >= t)) / imp.size)
        fnmr.append(int(np.count_nonzero(gen < t)) / gen.size)
    eer = eer_thr = None
    for i in range(len(values)):
        d = fmr[i] - fnmr[i]
        if d <= 0:
            if d == 0:
                eer, eer_thr = fmr[i], values[i]
            else:
                dp = fmr[i - 1] - fnmr[i - 1]
                a = dp / (dp - d)
                eer = fmr[i - 1] + a * (fmr[i] - fmr[i - 1])
                eer_thr = values[i - 1] + a * (values[i] - values[i - 1])
            break

    def at(target):
        for i in range(len(values)):
            if fmr[i] <= target:
                return fnmr[i], values[i], i == len(values) - 1

    return {"eer": eer, "eer_threshold": eer_thr, "fmr100": at(0.01), "fmr1000": at(0.001)}


def mated_law(identities, per_identity=False):
    """Exact probability of each unordered mated pair (i < j)."""
    groups = {}
    for idx, ident in enumerate(identities):
        groups.setdefault(ident, []).append(idx)
    eligible = [g for g in groups.values() if len(g) >= 2]
    total_pairs = sum(len(g) * (len(g) - 1) // 2 for g in eligible)
    law = {}
    for g in eligible:
        c = len(g) * (len(g) - 1) // 2
        for a in range(len(g)):
            for b in range(a + 1, len(g)):
                law[(g[a], g[b])] = 1 / (len(eligible) * c) if per_identity else 1 / total_pairs
    return law


def nonmated_law(identities):
    """Exact probability of each unordered cross-identity pair under the
    two-stage draw: i uniform, then j uniform over other identities."""
    n = len(identities)
    size = {ident: identities.count(ident) for ident in set(identities)}
    law = {}
    for a in range(n):
        for b in range(a + 1, n):
            if identities[a] != identities[b]:
                law[(a, b)] = (1 / (n - size[identities[a]]) + 1 / (n - size[identities[b]])) / n
    return law


def chi2_against(pairs, law):
    """Chi-squared p-value of observed pair counts against an exact law."""
    from collections import Counter

    from scipy import stats

    counts = Counter(map(tuple, np.asarray(pairs).tolist()))
    assert set(counts) <= set(law), "pair outside the valid universe"
    keys = sorted(law)
    observed = np.array([counts.get(k, 0) for k in keys], dtype=float)
    expected = np.array([law[k] for k in keys]) * len(pairs)
    if len(keys) == 1:
        return 1.0
    return stats.chisquare(observed, expected).pvalue
