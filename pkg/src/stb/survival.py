"""Interval-censored survival analysis of spotting times.

An entity labeled "bot" in a k-exchange segment is a spotting event known only
to lie in (0, k]; an entity labeled "human" or "unsure" survived past k, a
right-censored point (k, inf). Because every endpoint is one of the configured
segment lengths, the nonparametric estimate needs mass only on the intervals
between consecutive inspection times, and the proportional-hazards likelihood
is an exact finite-dimensional function of the baseline survival values there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .annotation import FEATURES, AnnotationRecord, EntityLabel, encode_feature
from .batching import Plan
from .errors import (NonConvergenceError, StbError, UndefinedRateError,
                     UnidentifiableCovariateError)

INF = math.inf

EM_TOL = 1e-8
EM_MAX_ITER = 10_000

COVARIATE_NAMES = ("fluency", "specificity", "sensibleness")


@dataclass(frozen=True)
class SurvivalObservation:
    """One system's exposure in one annotated segment.

    Spotted: (left, right) = (0, k]. Survived: (left, right) = (k, inf).
    Covariates are the (fluency, specificity, sensibleness) encodings from
    this annotation, seen from this entity's slot.
    """

    system: str
    left: float
    right: float
    covariates: tuple[int, int, int]

    def __post_init__(self):
        if not self.left < self.right:
            raise StbError(f"need left < right, got ({self.left}, {self.right})")
        if self.left != 0 and not math.isinf(self.right):
            raise StbError("observation must be (0, k] spotted or (k, inf) survived")

    @property
    def spotted(self) -> bool:
        return not math.isinf(self.right)

    @property
    def inspection_time(self) -> float:
        return self.right if self.spotted else self.left


def encode_observations(records: Iterable[AnnotationRecord], plan: Plan) -> list[SurvivalObservation]:
    """Two observations per bot-bot annotation, one for each entity."""
    out: list[SurvivalObservation] = []
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None or item.kind != "bot_bot":
            continue
        for slot in (0, 1):
            covs = tuple(encode_feature(rec.preferences[f], slot) for f in FEATURES)
            spotted = rec.labels[slot] is EntityLabel.BOT
            out.append(
                SurvivalObservation(
                    system=item.systems[slot],
                    left=0.0 if spotted else float(item.k),
                    right=float(item.k) if spotted else INF,
                    covariates=covs,  # type: ignore[arg-type]
                )
            )
    return out


# -- nonparametric estimation --


@dataclass(frozen=True)
class TurnbullEstimate:
    """NPMLE masses on the support intervals induced by the inspection times."""

    intervals: tuple[tuple[float, float], ...]  # (left, right], last right = inf
    masses: tuple[float, ...]
    times: tuple[float, ...]                    # inspection times
    survival: tuple[float, ...]                 # S(t) at each inspection time
    iterations: int

    def survival_at(self, t: float) -> float:
        return survival_at(self, t)


def _grouped_counts(observations: Sequence[SurvivalObservation]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(times, spotted counts a_j, survived counts b_j) per inspection time."""
    times = sorted({obs.inspection_time for obs in observations})
    idx = {t: j for j, t in enumerate(times)}
    a = np.zeros(len(times))
    b = np.zeros(len(times))
    for obs in observations:
        j = idx[obs.inspection_time]
        if obs.spotted:
            a[j] += 1
        else:
            b[j] += 1
    return np.asarray(times, dtype=float), a, b


def _pava_decreasing(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted isotonic regression onto a non-increasing sequence."""
    levels = [[v, w] for v, w in zip(values, weights)]
    sizes = [1] * len(levels)
    i = 0
    while i < len(levels) - 1:
        if levels[i][0] < levels[i + 1][0] - 1e-15:
            v1, w1 = levels[i]
            v2, w2 = levels[i + 1]
            levels[i] = [(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2]
            sizes[i] += sizes[i + 1]
            del levels[i + 1], sizes[i + 1]
            i = max(i - 1, 0)
        else:
            i += 1
    out = []
    for (v, _), size in zip(levels, sizes):
        out.extend([v] * size)
    return np.array(out)


def turnbull_fit(observations: Sequence[SurvivalObservation]) -> TurnbullEstimate:
    """Self-consistency (EM) iteration for the NPMLE of the survival function.

    With observations of the form (0, k] and (k, inf) the support intervals
    are (0, k1], (k1, k2], ..., (km, inf). The iteration is warm-started at
    the pooled-adjacent-violators solution (plain EM crawls sublinearly when
    a support interval carries zero mass) and run until the largest mass
    change falls below EM_TOL.
    """
    if not observations:
        raise StbError("turnbull_fit needs at least one observation")
    times, a, b = _grouped_counts(observations)
    m = len(times)
    n = float(a.sum() + b.sum())

    # membership: spotted at time j covers intervals 0..j; survived covers j+1..m
    # rows: m spotted patterns then m survived patterns; weights a, b
    member = np.zeros((2 * m, m + 1), dtype=bool)
    for j in range(m):
        member[j, : j + 1] = True
        member[m + j, j + 1:] = True
    weights = np.concatenate([a, b])
    keep = weights > 0
    member = member[keep]
    weights = weights[keep]

    s_iso = _pava_decreasing(b / (a + b), a + b)
    p = np.maximum(-np.diff(np.concatenate([[1.0], s_iso, [0.0]])), 0.0)
    p /= p.sum()
    iterations = 0
    residual = np.inf
    for iterations in range(1, EM_MAX_ITER + 1):
        denom = member @ p
        p_new = p * (member.T @ (weights / denom)) / n
        residual = float(np.max(np.abs(p_new - p)))
        p = p_new
        if residual < EM_TOL:
            break
    else:
        raise NonConvergenceError(
            f"Turnbull EM hit the {EM_MAX_ITER}-iteration cap", residual=residual)

    cum = np.cumsum(p)
    survival = tuple(float(1.0 - cum[j]) for j in range(m))
    edges = [0.0, *times, INF]
    intervals = tuple((edges[i], edges[i + 1]) for i in range(m + 1))
    return TurnbullEstimate(
        intervals=intervals,
        masses=tuple(float(x) for x in p),
        times=tuple(float(t) for t in times),
        survival=survival,
        iterations=iterations,
    )


def survival_at(estimate: TurnbullEstimate, t: float) -> float:
    """S(t) at an inspection time; undefined elsewhere (NPMLE is not
    identified strictly inside a support interval)."""
    for time, value in zip(estimate.times, estimate.survival):
        if time == t:
            return value
    raise StbError(f"{t} is not an inspection time of this fit (times: {estimate.times})")


# -- generalized log-rank (permutation) --


def logrank_test(obs_a: Sequence[SurvivalObservation], obs_b: Sequence[SurvivalObservation],
                 permutations: int = 2000,
                 rng_seed: "int | np.random.SeedSequence" = 0) -> tuple[float, float]:
    """Score statistic (observed minus expected events under the pooled NPMLE)
    with a two-sided permutation p-value over group-label reassignments.

    The pooled fit is invariant under relabeling, so each permutation only
    re-draws which per-observation scores belong to the (smaller) group; the
    score vector is sorted first so the p-value is exactly invariant under
    swapping the two groups.
    """
    if not obs_a or not obs_b:
        raise StbError("logrank_test needs two non-empty groups")
    pooled = list(obs_a) + list(obs_b)
    if not any(o.spotted for o in pooled):
        return 0.0, 1.0
    fit = turnbull_fit(pooled)
    expected = {t: 1.0 - s for t, s in zip(fit.times, fit.survival)}

    def score(o: SurvivalObservation) -> float:
        return (1.0 if o.spotted else 0.0) - expected[o.inspection_time]

    stat = float(sum(score(o) for o in obs_a))

    scores = np.sort(np.array([score(o) for o in pooled]))
    n_small = min(len(obs_a), len(obs_b))
    rng = np.random.default_rng(rng_seed)
    tiled = np.tile(scores, (permutations, 1))
    perms = rng.permuted(tiled, axis=1)
    t_perm = perms[:, :n_small].sum(axis=1)
    # total score sums to zero at the NPMLE, so |group a sum| = |group b sum|
    t_obs = abs(stat)
    count = int(np.sum(np.abs(t_perm) >= t_obs - 1e-12))
    p = (1 + count) / (permutations + 1)
    return stat, float(p)


def holm_bonferroni(p_values: Mapping[tuple[str, str], float]) -> dict[tuple[str, str], float]:
    """Step-down Holm adjustment; monotone and capped at 1."""
    items = sorted(p_values.items(), key=lambda kv: kv[1])
    m = len(items)
    adjusted: dict[tuple[str, str], float] = {}
    running = 0.0
    for i, (key, p) in enumerate(items):
        running = max(running, (m - i) * p)
        adjusted[key] = min(1.0, running)
    return adjusted


@dataclass(frozen=True)
class PairwiseTestResult:
    statistic: float
    p_raw: float
    p_adjusted: float
    significant: bool


def pairwise_tests_corrected(obs_by_system: Mapping[str, Sequence[SurvivalObservation]],
                             permutations: int = 2000, rng_seed: int = 0,
                             alpha: float = 0.05) -> dict[tuple[str, str], PairwiseTestResult]:
    """Log-rank test on every unordered pair with Holm correction across pairs."""
    systems = sorted(obs_by_system)
    if len(systems) < 2:
        raise StbError("pairwise tests need at least two systems")
    pairs = [(s1, s2) for i, s1 in enumerate(systems) for s2 in systems[i + 1:]]
    streams = np.random.SeedSequence(rng_seed).spawn(len(pairs))
    raw: dict[tuple[str, str], tuple[float, float]] = {}
    for (s1, s2), stream in zip(pairs, streams):
        raw[(s1, s2)] = logrank_test(obs_by_system[s1], obs_by_system[s2],
                                     permutations=permutations, rng_seed=stream)
    adjusted = holm_bonferroni({k: v[1] for k, v in raw.items()})
    return {
        k: PairwiseTestResult(statistic=raw[k][0], p_raw=raw[k][1],
                              p_adjusted=adjusted[k], significant=adjusted[k] < alpha)
        for k in raw
    }


# -- proportional hazards on interval-censored data --


@dataclass(frozen=True)
class CoxFit:
    covariates: tuple[str, ...]
    beta: dict[str, float]
    se: dict[str, float]
    p_value: dict[str, float]
    significant: dict[str, bool]
    baseline_survival: tuple[tuple[float, float], ...]  # (time, S0)
    log_likelihood: float
    converged: bool
    grad_norm: float

    def to_dict(self) -> dict:
        return {
            "covariates": list(self.covariates),
            "beta": dict(self.beta),
            "se": dict(self.se),
            "p_value": dict(self.p_value),
            "significant": dict(self.significant),
            "baseline_survival": [list(x) for x in self.baseline_survival],
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
        }


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _softplus_inv(y: np.ndarray) -> np.ndarray:
    y = np.maximum(y, 1e-9)
    return np.where(y > 30, y, np.log(np.expm1(y)))


class _CoxProblem:
    """Negative log-likelihood and gradient for the interval-censored PH model.

    The baseline is parameterized by an unconstrained vector u mapped through
    cumulative log-logistic transforms: theta_1 = u_1, theta_j = theta_{j-1} +
    softplus(u_j), S0_j = sigmoid(-theta_j), which is strictly decreasing in
    (0, 1).
    """

    def __init__(self, k_index: np.ndarray, event: np.ndarray, x: np.ndarray, n_times: int):
        self.k_index = k_index
        self.event = event.astype(bool)
        self.x = x
        self.m = n_times
        self.p = x.shape[1]

    def unpack(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        beta, u = params[: self.p], params[self.p:]
        theta = np.empty(self.m)
        theta[0] = u[0]
        if self.m > 1:
            theta[1:] = u[0] + np.cumsum(_softplus(u[1:]))
        return beta, theta

    def nll_grad(self, params: np.ndarray) -> tuple[float, np.ndarray]:
        beta, theta = self.unpack(params)
        u = params[self.p:]
        log_s = -_softplus(theta)             # log S0 at each time, < 0
        eta = np.exp(self.x @ beta) if self.p else np.ones(len(self.k_index))
        z = np.minimum(eta * log_s[self.k_index], -1e-300)  # eta * log S0(k_i), < 0

        with np.errstate(over="ignore"):
            ll_terms = np.where(self.event, np.log(-np.expm1(z)), z)
            ll = float(ll_terms.sum())
            # d ll_i / d z_i : survived 1, spotted -1/expm1(-z)
            g = np.where(self.event, -1.0 / np.expm1(-z), 1.0)
        grad = np.empty_like(params)
        if self.p:
            grad_beta = (g * z) @ self.x      # d z/d beta_c = z * x_c
            grad[: self.p] = grad_beta
        # d ll / d log_s_j, then chain through theta and u
        dl_dlogs = np.bincount(self.k_index, weights=g * eta, minlength=self.m)
        q = dl_dlogs * (-expit(theta))        # d log_s_j / d theta_j = -sigmoid(theta_j)
        rev_cum = np.cumsum(q[::-1])[::-1]    # sum_{j >= l} q_j
        grad[self.p] = rev_cum[0]
        if self.m > 1:
            grad[self.p + 1:] = expit(u[1:]) * rev_cum[1:]
        return -ll, -grad


def _numeric_gradient(fun, params: np.ndarray, step: float = 1e-5) -> np.ndarray:
    grad = np.empty_like(params)
    for i in range(len(params)):
        hi = params.copy()
        lo = params.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (fun(hi) - fun(lo)) / (2 * step)
    return grad


def _numeric_hessian(grad_fun, params: np.ndarray, step: float = 1e-6) -> np.ndarray:
    n = len(params)
    h = np.empty((n, n))
    for i in range(n):
        hi = params.copy()
        lo = params.copy()
        delta = step * max(1.0, abs(params[i]))
        hi[i] += delta
        lo[i] -= delta
        h[i] = (grad_fun(hi) - grad_fun(lo)) / (2 * delta)
    return 0.5 * (h + h.T)


def cox_fit(observations: Sequence[SurvivalObservation],
            covariates: Sequence[str] = COVARIATE_NAMES,
            alpha: float = 0.05,
            max_starts: int = 3) -> CoxFit:
    """Joint MLE of covariate effects and the baseline survival values.

    Maximizes prod_spotted (1 - S0(k)^exp(x beta)) * prod_survived S0(k)^exp(x beta)
    by quasi-Newton descent plus a Newton polish, multi-starting on failure.
    Wald p-values come from the observed information (numeric Hessian of the
    analytic gradient).
    """
    if not observations:
        raise StbError("cox_fit needs observations")
    n_spotted = sum(1 for o in observations if o.spotted)
    if n_spotted == 0 or n_spotted == len(observations):
        raise StbError("cox_fit needs at least one spotted and one survived observation")

    cov_names = tuple(covariates)
    cov_idx = [COVARIATE_NAMES.index(c) for c in cov_names]
    times = sorted({o.inspection_time for o in observations})
    t_index = {t: j for j, t in enumerate(times)}
    k_index = np.array([t_index[o.inspection_time] for o in observations])
    event = np.array([o.spotted for o in observations])
    x = np.array([[o.covariates[c] for c in cov_idx] for o in observations], dtype=float)
    x = x.reshape(len(observations), len(cov_names))

    for j, name in enumerate(cov_names):
        if np.ptp(x[:, j]) == 0:
            raise UnidentifiableCovariateError(name)

    problem = _CoxProblem(k_index, event, x, len(times))

    # empirical, monotonized start for the baseline
    m = len(times)
    a = np.bincount(k_index[event], minlength=m).astype(float)
    n_at = np.bincount(k_index, minlength=m).astype(float)
    s_emp = 1.0 - (a + 0.5) / (n_at + 1.0)
    s_emp = np.minimum.accumulate(s_emp)
    s_emp = np.clip(s_emp, 1e-3, 1 - 1e-3)
    for j in range(1, m):
        s_emp[j] = min(s_emp[j], s_emp[j - 1] - 1e-4)
    s_emp = np.clip(s_emp, 1e-4, 1 - 1e-4)
    theta0 = np.log((1 - s_emp) / s_emp)
    u0 = np.concatenate([[theta0[0]], _softplus_inv(np.diff(theta0))])

    best: tuple[float, np.ndarray] | None = None
    rng = np.random.default_rng(0)
    for start in range(max_starts):
        params0 = np.concatenate([np.zeros(len(cov_names)), u0])
        if start > 0:
            params0[: len(cov_names)] += rng.normal(0, 0.5, len(cov_names))
            params0[len(cov_names):] += rng.normal(0, 0.3, m)
        res = minimize(problem.nll_grad, params0, jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-10})
        params, nll = _newton_polish(problem, res.x)
        if best is None or nll < best[0]:
            best = (nll, params)
        grad_norm = float(np.linalg.norm(problem.nll_grad(best[1])[1]))
        if grad_norm < 1e-6:
            break

    nll, params = best[0], best[1]
    grad_norm = float(np.linalg.norm(problem.nll_grad(params)[1]))
    converged = grad_norm < 1e-4

    beta, theta = problem.unpack(params)
    baseline = tuple((float(t), float(expit(-th))) for t, th in zip(times, theta))

    se: dict[str, float] = {}
    p_value: dict[str, float] = {}
    significant: dict[str, bool] = {}
    beta_out: dict[str, float] = {}
    if cov_names:
        for j, name in enumerate(cov_names):
            if abs(beta[j]) > 10:
                raise UnidentifiableCovariateError(name, detail="separation suspected (|beta| > 10)")
        hess = _numeric_hessian(lambda q: problem.nll_grad(q)[1], params)
        try:
            cov = np.linalg.inv(hess)
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(hess)
        for j, name in enumerate(cov_names):
            var = max(float(cov[j, j]), 0.0)
            s = math.sqrt(var) if var > 0 else math.inf
            zstat = beta[j] / s if s > 0 and math.isfinite(s) else 0.0
            p = math.erfc(abs(zstat) / math.sqrt(2.0))
            beta_out[name] = float(beta[j])
            se[name] = s
            p_value[name] = min(max(p, 0.0), 1.0)
            significant[name] = p < alpha

    return CoxFit(
        covariates=cov_names,
        beta=beta_out,
        se=se,
        p_value=p_value,
        significant=significant,
        baseline_survival=baseline,
        log_likelihood=-nll,
        converged=converged,
        grad_norm=grad_norm,
    )


def _newton_polish(problem: _CoxProblem, params: np.ndarray,
                   max_iter: int = 25) -> tuple[np.ndarray, float]:
    """Drive the gradient toward zero with damped Newton steps."""
    params = params.copy()
    nll, grad = problem.nll_grad(params)
    for _ in range(max_iter):
        if np.linalg.norm(grad) < 1e-9:
            break
        hess = _numeric_hessian(lambda q: problem.nll_grad(q)[1], params)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        scale = 1.0
        improved = False
        for _ in range(30):
            cand = params + scale * step
            cand_nll, cand_grad = problem.nll_grad(cand)
            if cand_nll <= nll + 1e-12:
                params, nll, grad = cand, cand_nll, cand_grad
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
    return params, nll


# -- per-feature win rates --


def feature_win_rate(records: Iterable[AnnotationRecord], plan: Plan, system: str,
                     feature, mode: str = "single") -> float:
    """Eq.-1-style rate of being preferred on a feature (or on both
    sensibleness and specificity for mode='ssa'); ties excluded."""
    from .annotation import Feature

    if mode not in ("single", "ssa"):
        raise StbError(f"unknown mode {mode!r}")
    wins = losses = 0
    for rec in records:
        item = plan.items_by_id.get(rec.item_id)
        if item is None or item.kind != "bot_bot" or system not in item.systems:
            continue
        slot = item.systems.index(system)
        if mode == "single":
            enc = encode_feature(rec.preferences[Feature(feature)], slot)
            if enc > 0:
                wins += 1
            elif enc < 0:
                losses += 1
        else:
            e_sens = encode_feature(rec.preferences[Feature.SENSIBLENESS], slot)
            e_spec = encode_feature(rec.preferences[Feature.SPECIFICITY], slot)
            if e_sens > 0 and e_spec > 0:
                wins += 1
            elif e_sens < 0 and e_spec < 0:
                losses += 1
    if wins + losses == 0:
        raise UndefinedRateError(f"no decisive {mode} comparisons for {system}")
    return wins / (wins + losses)
