"""Independent brute-force reference implementations used by the tests.

Everything here is written against the mathematical definitions with
plain Python loops, deliberately avoiding the library's code paths:
pair-counting midranks, full enumeration of rank-sum assignments, naive
tau computation and a straight-from-the-procedure screening pass.
"""

from __future__ import annotations

import math
from itertools import combinations
from statistics import fmean

import numpy as np


def midranks_bruteforce(values) -> list[float]:
    """O(n^2) midranks: 1 + (#smaller) + (#equal others)/2."""
    values = list(values)
    ranks = []
    for v in values:
        smaller = sum(1 for u in values if u < v)
        equal_others = sum(1 for u in values if u == v) - 1
        ranks.append(1.0 + smaller + equal_others / 2.0)
    return ranks


def doubled_midranks(values) -> list[int]:
    """Exact integer 2*midrank via pair counting."""
    values = list(values)
    out = []
    for v in values:
        smaller = sum(1 for u in values if u < v)
        equal_others = sum(1 for u in values if u == v) - 1
        out.append(2 + 2 * smaller + equal_others)
    return out


def wilcoxon_exact_bruteforce(a, b) -> tuple[float, float]:
    """Two-sided exact rank-sum p by enumerating every label assignment.

    p is the fraction of size-|a| subsets whose rank-sum deviates from
    the null mean at least as much as the observed one.
    """
    pooled = list(a) + list(b)
    d2 = doubled_midranks(pooled)
    n1 = len(list(a))
    n = len(pooled)
    w2_obs = sum(d2[:n1])
    mu2 = n1 * (n + 1)
    dev = abs(w2_obs - mu2)
    total = 0
    extreme = 0
    for combo in combinations(range(n), n1):
        w2 = sum(d2[i] for i in combo)
        total += 1
        if abs(w2 - mu2) >= dev:
            extreme += 1
    return w2_obs / 2.0, extreme / total


def tau_b_bruteforce(x, y) -> float:
    """Tie-adjusted Kendall correlation from explicit pair loops."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    concordant = discordant = tie_x = tie_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx == 0 and dy == 0:
                tie_x += 1
                tie_y += 1
            elif dx == 0:
                tie_x += 1
            elif dy == 0:
                tie_y += 1
            elif dx == dy:
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    den = math.sqrt((n0 - tie_x) * (n0 - tie_y))
    return (concordant - discordant) / den


def screening_bruteforce(scores, mask, policy):
    """Per-subject P/Q tallies and rejection flags computed with plain
    loops and statistics-module arithmetic.

    ``scores``/``mask`` are (subjects, videos) nested lists or arrays.
    """
    scores = np.asarray(scores, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    n_subj, n_vid = scores.shape
    p = [0] * n_subj
    q = [0] * n_subj
    kurtosis = []
    for j in range(n_vid):
        vals = [float(scores[i, j]) for i in range(n_subj) if mask[i, j]]
        n = len(vals)
        mean = fmean(vals)
        m2 = math.fsum((v - mean) ** 2 for v in vals) / n
        m4 = math.fsum((v - mean) ** 4 for v in vals) / n
        kurt = m4 / m2**2 if m2 > 0 else float("nan")
        kurtosis.append(kurt)
        if policy.kurtosis_low <= kurt <= policy.kurtosis_high:
            mult = policy.normal_multiplier
        else:
            mult = policy.nonnormal_multiplier
        if n > 1:
            std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1))
        else:
            std = float("nan")
        for i in range(n_subj):
            if not mask[i, j]:
                continue
            if scores[i, j] > mean + mult * std:
                p[i] += 1
            elif scores[i, j] < mean - mult * std:
                q[i] += 1
    rejected = []
    for i in range(n_subj):
        total = p[i] + q[i]
        ratings = int(mask[i].sum())
        if total == 0:
            rejected.append(False)
            continue
        frequent = total / ratings > policy.max_outlier_fraction
        balanced = abs(p[i] - q[i]) / total < policy.asymmetry_floor
        rejected.append(frequent and balanced)
    return p, q, rejected, kurtosis


def logistic5_reference(y, b1, b2, b3, b4, b5) -> list[float]:
    """Scalar-loop evaluation of the five-parameter logistic mapping."""
    out = []
    for v in y:
        arg = b2 * (v - b3)
        arg = max(-500.0, min(500.0, arg))
        out.append(b1 * (0.5 - 1.0 / (1.0 + math.exp(arg))) + b4 * v + b5)
    return out
