"""Two-player TrueSkill updates with draws.

Skills are Gaussian beliefs N(mu, sigma^2). Each comparison outcome updates
both players through the truncated-Gaussian moment-matching functions v and w;
draws use the within-margin variants. The draw margin is derived from a fixed
draw probability. A vectorized form runs many independent update chains in
lockstep for bootstrap resampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TrueSkillConfig:
    mu0: float = 25.0
    sigma0: float = 25.0 / 3.0
    beta: float = 25.0 / 6.0        # sigma0 / 2
    tau: float = 25.0 / 300.0       # sigma0 / 100
    draw_probability: float = 0.1

    @property
    def draw_margin(self) -> float:
        # margin such that two equal players draw with the configured probability
        return ndtri(0.5 * (self.draw_probability + 1.0)) * math.sqrt(2.0) * self.beta


@dataclass(frozen=True)
class Rating:
    mu: float
    sigma: float


def _pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def _cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def v_win(diff: float, margin: float) -> float:
    x = diff - margin
    denom = _cdf(x)
    return _pdf(x) / denom if denom > 1e-300 else -x


def w_win(diff: float, margin: float) -> float:
    x = diff - margin
    v = v_win(diff, margin)
    w = v * (v + x)
    return min(max(w, 1e-12), 1.0 - 1e-12)


def v_draw(diff: float, margin: float) -> float:
    abs_diff = abs(diff)
    a, b = margin - abs_diff, -margin - abs_diff
    denom = _cdf(a) - _cdf(b)
    val = (_pdf(b) - _pdf(a)) / denom if denom > 1e-300 else a
    return -val if diff < 0 else val


def w_draw(diff: float, margin: float) -> float:
    abs_diff = abs(diff)
    a, b = margin - abs_diff, -margin - abs_diff
    denom = _cdf(a) - _cdf(b)
    if denom <= 1e-300:
        return 1.0 - 1e-12
    v = v_draw(abs_diff, margin)
    w = v * v + (a * _pdf(a) - b * _pdf(b)) / denom
    return min(max(w, 1e-12), 1.0 - 1e-12)


def rate_two_players(first: Rating, second: Rating, outcome: int,
                     cfg: TrueSkillConfig = TrueSkillConfig()) -> tuple[Rating, Rating]:
    """Update two ratings for one comparison. outcome: +1 first wins, -1 second, 0 draw."""
    # dynamics: inflate both variances before the update
    s1 = first.sigma ** 2 + cfg.tau ** 2
    s2 = second.sigma ** 2 + cfg.tau ** 2
    c2 = s1 + s2 + 2.0 * cfg.beta ** 2
    c = math.sqrt(c2)
    margin = cfg.draw_margin / c
    t = (first.mu - second.mu) / c

    if outcome == 0:
        v1, v2 = v_draw(t, margin), v_draw(-t, margin)
        w = w_draw(t, margin)
        mu1 = first.mu + (s1 / c) * v1
        mu2 = second.mu + (s2 / c) * v2
    else:
        sign = 1.0 if outcome > 0 else -1.0
        v = v_win(sign * t, margin)
        w = w_win(sign * t, margin)
        mu1 = first.mu + sign * (s1 / c) * v
        mu2 = second.mu - sign * (s2 / c) * v
    sig1 = math.sqrt(s1 * (1.0 - w * (s1 / c2)))
    sig2 = math.sqrt(s2 * (1.0 - w * (s2 / c2)))
    return Rating(mu1, sig1), Rating(mu2, sig2)


def run_rating_chain(n_systems: int, first_idx: np.ndarray, second_idx: np.ndarray,
                     outcome: np.ndarray, cfg: TrueSkillConfig = TrueSkillConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Sequentially apply one comparison per step; returns final (mu, sigma) arrays."""
    ratings = [Rating(cfg.mu0, cfg.sigma0) for _ in range(n_systems)]
    for i, j, out in zip(first_idx, second_idx, outcome):
        ratings[i], ratings[j] = rate_two_players(ratings[i], ratings[j], int(out), cfg)
    return (np.array([r.mu for r in ratings]), np.array([r.sigma for r in ratings]))


# -- vectorized lockstep chains --


def _pdf_vec(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / _SQRT2PI


def run_rating_chains_vectorized(n_systems: int, first_idx: np.ndarray, second_idx: np.ndarray,
                                 outcome: np.ndarray,
                                 cfg: TrueSkillConfig = TrueSkillConfig()) -> np.ndarray:
    """Run R independent update chains in lockstep.

    first_idx/second_idx/outcome have shape [n_steps, R]: chain r processes
    comparison (first_idx[t, r], second_idx[t, r], outcome[t, r]) at step t.
    Equivalent to run_rating_chain applied per column. Returns mu[R, n_systems].
    """
    n_steps, n_chains = first_idx.shape
    mu = np.full((n_chains, n_systems), cfg.mu0)
    sig2 = np.full((n_chains, n_systems), cfg.sigma0 ** 2)
    rows = np.arange(n_chains)
    beta2_2 = 2.0 * cfg.beta ** 2
    tau2 = cfg.tau ** 2
    margin0 = cfg.draw_margin

    for step in range(n_steps):
        fi = first_idx[step]
        si = second_idx[step]
        out = outcome[step]

        s1 = sig2[rows, fi] + tau2
        s2 = sig2[rows, si] + tau2
        c2 = s1 + s2 + beta2_2
        c = np.sqrt(c2)
        margin = margin0 / c
        t = (mu[rows, fi] - mu[rows, si]) / c

        sign = np.where(out >= 0, 1.0, -1.0)
        x = sign * t - margin
        denom_w = np.maximum(ndtr(x), 1e-300)
        v_w = np.where(denom_w > 1e-300, _pdf_vec(x) / denom_w, -x)
        w_w = np.clip(v_w * (v_w + x), 1e-12, 1.0 - 1e-12)

        abs_t = np.abs(t)
        a = margin - abs_t
        b = -margin - abs_t
        denom_d = np.maximum(ndtr(a) - ndtr(b), 1e-300)
        v_abs = (_pdf_vec(b) - _pdf_vec(a)) / denom_d
        v_d1 = np.where(t < 0, -v_abs, v_abs)
        w_d = np.clip(v_abs * v_abs + (a * _pdf_vec(a) - b * _pdf_vec(b)) / denom_d,
                      1e-12, 1.0 - 1e-12)

        drawn = out == 0
        v1 = np.where(drawn, v_d1, sign * v_w)
        v2 = np.where(drawn, -v_d1, -sign * v_w)
        w = np.where(drawn, w_d, w_w)

        mu[rows, fi] = mu[rows, fi] + (s1 / c) * v1
        mu[rows, si] = mu[rows, si] + (s2 / c) * v2
        sig2[rows, fi] = s1 * (1.0 - w * (s1 / c2))
        sig2[rows, si] = s2 * (1.0 - w * (s2 / c2))
    return mu
