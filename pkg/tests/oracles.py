"""Independent oracles kept free of the implementation code they check."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


def chi2_1df_sf_oracle(stat: float) -> float:
    """Survival function of chi-square(1) via the error function:
    P(Z^2 > x) = erfc(sqrt(x/2))."""
    return math.erfc(math.sqrt(stat / 2.0))


def npmle_grid_oracle(counts: list[tuple[float, float]], final_step: float = 1e-4) -> np.ndarray:
    """Brute-force grid search for the NPMLE survival values.

    counts[j] = (spotted a_j, survived b_j) at ascending inspection times.
    Maximizes sum_j a_j log(1 - S_j) + b_j log S_j over the monotone chain
    1 >= S_1 >= ... >= S_m >= 0 on a grid refined down to final_step; the
    objective is concave and the feasible set convex, so refining around the
    coarse optimum is exact to grid resolution.
    """
    from scipy.special import xlogy

    m = len(counts)
    a = np.array([c[0] for c in counts], dtype=float)
    b = np.array([c[1] for c in counts], dtype=float)

    lo = np.zeros(m)
    hi = np.ones(m)
    step = 0.01
    while True:
        grids = [np.arange(lo[j], hi[j] + step / 2, step) for j in range(m)]
        mesh = np.meshgrid(*grids, indexing="ij")
        s = np.stack([g.ravel() for g in mesh], axis=1)  # [points, m]
        feasible = np.ones(len(s), dtype=bool)
        for j in range(m - 1):
            feasible &= s[:, j] >= s[:, j + 1] - 1e-12
        s = s[feasible]
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = (xlogy(a, 1.0 - s) + xlogy(b, s)).sum(axis=1)
        ll = np.where(np.isnan(ll), -np.inf, ll)
        best_s = s[int(np.argmax(ll))]
        if step <= final_step:
            return best_s
        lo = np.maximum(best_s - step, 0.0)
        hi = np.minimum(best_s + step, 1.0)
        step /= 10.0


def exhaustive_permutation_p(scores: list[float], n_a: int, t_obs: float) -> float:
    """Exact two-sided permutation p-value by enumerating every subset."""
    total = 0
    extreme = 0
    for subset in combinations(range(len(scores)), n_a):
        total += 1
        t = sum(scores[i] for i in subset)
        if abs(t) >= abs(t_obs) - 1e-12:
            extreme += 1
    return extreme / total


def trueskill_single_win_oracle(mu0: float = 25.0, sigma0: float = 25.0 / 3.0,
                                beta: float = 25.0 / 6.0, tau: float = 25.0 / 300.0,
                                draw_probability: float = 0.1) -> float:
    """Winner's posterior mean after one win over an equal opponent,
    evaluated directly from the truncated-Gaussian update formulas."""
    from scipy.special import ndtri

    margin = ndtri(0.5 * (draw_probability + 1.0)) * math.sqrt(2.0) * beta
    s2 = sigma0 ** 2 + tau ** 2
    c = math.sqrt(2.0 * s2 + 2.0 * beta ** 2)
    x = (0.0 - margin / c)
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    cdf = 0.5 * math.erfc(-x / math.sqrt(2.0))
    v = pdf / cdf
    return mu0 + (s2 / c) * v
