"""Independent brute-force reference implementations used as test oracles.

Everything here is deliberately naive (pure Python loops, stdlib only)
and written without looking at the library code paths it checks.
"""

import itertools
import math
import statistics


def naive_signal_stats(points):
    """Eleven signal statistics computed the slow, obvious way."""
    if not points:
        return [0.0] * 11
    ts = [t for t, _ in points]
    vs = [v for _, v in points]
    n = len(vs)
    mean = sum(vs) / n
    var = sum((v - mean) ** 2 for v in vs) / n
    peaks = sum(1 for i in range(1, n - 1) if vs[i - 1] < vs[i] > vs[i + 1])
    tbar = sum(ts) / n
    sxx = sum((t - tbar) ** 2 for t in ts)
    sxy = sum((t - tbar) * (v - mean) for t, v in zip(ts, vs))
    slope = sxy / sxx if sxx > 0 else 0.0
    if n >= 2:
        diffs = [vs[i + 1] - vs[i] for i in range(n - 1)]
        msd = sum(diffs) / len(diffs)
        masd = sum(abs(d) for d in diffs) / len(diffs)
    else:
        msd = 0.0
        masd = 0.0
    return [
        float(n),
        max(vs),
        min(vs),
        mean,
        statistics.median(vs),
        math.sqrt(var),
        var,
        float(peaks),
        slope,
        msd,
        masd,
    ]


def pair_count_auroc(scores, labels):
    """Probability a random positive outranks a random negative, ties half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def pair_count_roc_area(fpr, tpr):
    """Trapezoidal area under an ROC polyline."""
    area = 0.0
    for i in range(1, len(fpr)):
        area += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2.0
    return area


def permutation_shapley(n_players, value_of):
    """Average marginal contribution over all n! player orderings.

    value_of takes a frozenset of player indices and returns the coalition
    value (including the empty set).
    """
    totals = [0.0] * n_players
    count = 0
    for order in itertools.permutations(range(n_players)):
        coalition = frozenset()
        before = value_of(coalition)
        for player in order:
            coalition = coalition | {player}
            after = value_of(coalition)
            totals[player] += after - before
            before = after
        count += 1
    return [t / count for t in totals]


def modality_totals_by_product(sizes: dict[str, int]) -> dict[int, int]:
    """Subsets covering exactly m modalities, via the product identity.

    For each choice M of m modalities, every member modality contributes a
    non-empty subset of its sources independently: prod over m in M of
    (2^size(m) - 1) combinations; summing over choices gives the total.
    """
    from itertools import combinations

    names = sorted(sizes)
    totals: dict[int, int] = {}
    for m in range(1, len(names) + 1):
        total = 0
        for combo in combinations(names, m):
            prod = 1
            for name in combo:
                prod *= (1 << sizes[name]) - 1
            total += prod
        totals[m] = total
    return totals
