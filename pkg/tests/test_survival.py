import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_record, plan_from_items
from oracles import exhaustive_permutation_p, npmle_grid_oracle
from stb.annotation import Choice, EntityLabel, Feature
from stb.errors import (StbError, UndefinedRateError,
                        UnidentifiableCovariateError)
from stb.survival import (SurvivalObservation, cox_fit, encode_observations,
                          feature_win_rate, holm_bonferroni, logrank_test,
                          pairwise_tests_corrected, survival_at, turnbull_fit)
from synth import hazard_tournament, pair_items

L = EntityLabel
INF = float("inf")


def spotted(k, sys="A", cov=(0, 0, 0)):
    return SurvivalObservation(sys, 0.0, float(k), cov)


def survived(k, sys="A", cov=(0, 0, 0)):
    return SurvivalObservation(sys, float(k), INF, cov)


class TestEncodeObservations:
    @pytest.fixture
    def plan(self):
        return plan_from_items(pair_items(["alpha", "beta"], n_conversations=2))

    def test_bot_label_is_interval_censored(self, plan):
        item = next(i for i in plan.items_by_id.values() if i.k == 3)
        rec = make_record(item.item_id, "w", (L.BOT, L.HUMAN))
        obs = encode_observations([rec], plan)
        alpha = next(o for o in obs if o.system == "alpha")
        assert (alpha.left, alpha.right) == (0.0, 3.0)
        assert alpha.spotted

    def test_unsure_label_is_right_censored(self, plan):
        item = next(i for i in plan.items_by_id.values() if i.k == 5)
        rec = make_record(item.item_id, "w", (L.HUMAN, L.UNSURE))
        obs = encode_observations([rec], plan)
        beta = next(o for o in obs if o.system == "beta")
        assert (beta.left, beta.right) == (5.0, INF)
        assert not beta.spotted

    def test_covariates_follow_preferences(self, plan):
        item = next(i for i in plan.items_by_id.values() if i.k == 2)
        rec = make_record(item.item_id, "w", (L.HUMAN, L.BOT),
                          prefs={f: Choice.FIRST for f in Feature})
        obs = encode_observations([rec], plan)
        alpha = next(o for o in obs if o.system == "alpha")
        beta = next(o for o in obs if o.system == "beta")
        assert alpha.covariates == (1, 1, 1)
        assert beta.covariates == (-1, -1, -1)
        assert (alpha.left, alpha.right) == (2.0, INF)


class TestTurnbull:
    def test_single_time_closed_form(self):
        est = turnbull_fit([spotted(2)] * 3 + [survived(2)])
        assert est.survival[0] == pytest.approx(0.25, abs=1e-12)
        assert est.times == (2.0,)

    @given(a=st.integers(1, 40), b=st.integers(1, 40))
    @settings(max_examples=25, deadline=None)
    def test_single_time_matches_b_over_total(self, a, b):
        est = turnbull_fit([spotted(3)] * a + [survived(3)] * b)
        assert est.survival[0] == pytest.approx(b / (a + b), abs=1e-9)

    def test_all_censored_survival_is_one(self):
        est = turnbull_fit([survived(2), survived(3), survived(5)])
        for s in est.survival:
            assert s == pytest.approx(1.0, abs=1e-7)

    def test_two_times_match_grid_oracle(self):
        obs = [spotted(1)] * 1 + [survived(1)] * 3 + [spotted(3)] * 2 + [survived(3)] * 2
        est = turnbull_fit(obs)
        oracle = npmle_grid_oracle([(1, 3), (2, 2)])
        np.testing.assert_allclose(est.survival, oracle, atol=1e-3)

    def test_empty_errors(self):
        with pytest.raises(StbError):
            turnbull_fit([])

    @given(st.lists(st.tuples(st.sampled_from([1.0, 2.0, 3.0, 5.0]), st.booleans()),
                    min_size=1, max_size=40))
    @settings(max_examples=40, deadline=None)
    def test_masses_and_monotonicity(self, raw):
        obs = [spotted(k) if ev else survived(k) for k, ev in raw]
        est = turnbull_fit(obs)
        assert sum(est.masses) <= 1.0 + 1e-9
        assert all(m >= -1e-12 for m in est.masses)
        for s1, s2 in zip(est.survival, est.survival[1:]):
            assert s1 >= s2 - 1e-9
        assert est.survival[0] <= 1.0 + 1e-9


class TestSurvivalAt:
    def test_complement_of_mass(self):
        est = turnbull_fit([spotted(2)] * 3 + [survived(2)])
        assert survival_at(est, 2.0) == pytest.approx(0.25, abs=1e-12)

    def test_no_events_is_one(self):
        est = turnbull_fit([survived(2), survived(3)])
        assert survival_at(est, 3.0) == pytest.approx(1.0, abs=1e-7)

    def test_unidentified_point_errors(self):
        est = turnbull_fit([spotted(2), survived(3)])
        with pytest.raises(StbError, match="inspection time"):
            survival_at(est, 2.5)


class TestLogrank:
    def test_identical_groups(self):
        a = [spotted(2)] * 5 + [survived(2)] * 5 + [spotted(5)] * 2 + [survived(5)] * 8
        b = [SurvivalObservation("B", o.left, o.right, o.covariates) for o in a]
        stat, p = logrank_test(a, b, permutations=400, rng_seed=0)
        assert stat == pytest.approx(0.0, abs=1e-9)
        assert p > 0.9

    def test_extreme_separation(self):
        a = [spotted(1, "A")] * 40
        b = [survived(5, "B")] * 40
        stat, p = logrank_test(a, b, permutations=2000, rng_seed=0)
        assert p < 0.01

    def test_no_events_convention(self):
        assert logrank_test([survived(2)] * 3, [survived(3)] * 3) == (0.0, 1.0)

    def test_antisymmetry_and_p_invariance(self):
        rng = np.random.default_rng(7)
        a = [spotted(int(k)) if rng.random() < 0.4 else survived(int(k))
             for k in rng.choice([2, 3, 5], 30)]
        b = [spotted(int(k), "B") if rng.random() < 0.7 else survived(int(k), "B")
             for k in rng.choice([2, 3, 5], 25)]
        stat_ab, p_ab = logrank_test(a, b, permutations=500, rng_seed=3)
        stat_ba, p_ba = logrank_test(b, a, permutations=500, rng_seed=3)
        assert stat_ab == pytest.approx(-stat_ba, abs=1e-6)
        assert p_ab == p_ba

    def test_small_case_matches_exhaustive_enumeration(self):
        a = [spotted(2), spotted(2), survived(2)]
        b = [survived(2), survived(2), survived(2), spotted(2)]
        pooled = a + b
        fit = turnbull_fit(pooled)
        expected = 1.0 - fit.survival[0]
        scores = [(1.0 if o.spotted else 0.0) - expected for o in pooled]
        t_obs = sum(scores[:3])
        exact = exhaustive_permutation_p(scores, 3, t_obs)
        _, p = logrank_test(a, b, permutations=4000, rng_seed=11)
        assert p == pytest.approx(exact, abs=0.03)


class TestHolm:
    def test_single_test_identity(self):
        assert holm_bonferroni({("a", "b"): 0.03}) == {("a", "b"): 0.03}

    def test_smallest_p_scaled_by_count(self):
        ps = {(f"s{i}", f"s{j}"): 0.2 for i in range(5) for j in range(i + 1, 5)}
        key_min = ("s0", "s1")
        ps[key_min] = 0.001
        adj = holm_bonferroni(ps)
        assert adj[key_min] == pytest.approx(0.001 * 10)

    def test_monotone_and_capped(self):
        ps = {("a", "b"): 0.04, ("a", "c"): 0.5, ("b", "c"): 0.9}
        adj = holm_bonferroni(ps)
        assert adj[("a", "b")] == pytest.approx(0.12)
        assert adj[("b", "c")] <= 1.0
        assert adj[("a", "b")] <= adj[("a", "c")] <= adj[("b", "c")]


class TestPairwiseCorrected:
    def test_identical_generators_not_significant_others_are(self):
        # twins b1/b2 share a hazard; everyone else is far apart
        plan, records = hazard_tournament(
            {"a": 0.05, "b1": 0.35, "b2": 0.35, "c": 0.8},
            n_conversations=40, rng_seed=13)
        from stb.report import observations_by_system

        grouped = observations_by_system(records, plan)
        results = pairwise_tests_corrected(grouped, permutations=600, rng_seed=1)
        assert not results[("b1", "b2")].significant
        for key, res in results.items():
            if key != ("b1", "b2"):
                assert res.significant, key

    def test_needs_two_systems(self):
        with pytest.raises(StbError):
            pairwise_tests_corrected({"a": [spotted(2)]})


class TestCox:
    def _simulate(self, beta=1.0, n=5000, lam=0.3, seed=0, times=(1, 2, 3, 5)):
        rng = np.random.default_rng(seed)
        xs = rng.choice([-1, 1], n)
        ks = rng.choice(times, n)
        p_spot = 1.0 - np.exp(-lam * np.exp(beta * xs) * ks)
        ev = rng.random(n) < p_spot
        return [
            SurvivalObservation("A", 0.0 if e else float(k), float(k) if e else INF,
                                (int(x), 0, 0))
            for x, k, e in zip(xs, ks, ev)
        ]

    def test_constant_covariate_unidentifiable(self):
        obs = [spotted(2, cov=(1, 0, 0)), survived(3, cov=(1, 0, 0))]
        with pytest.raises(UnidentifiableCovariateError, match="fluency"):
            cox_fit(obs, covariates=("fluency",))

    def test_recovers_known_coefficient(self):
        fit = cox_fit(self._simulate(seed=1), covariates=("fluency",))
        assert 0.85 <= fit.beta["fluency"] <= 1.15
        assert fit.converged
        assert fit.grad_norm < 1e-4

    def test_numeric_gradient_norm_small_at_optimum(self):
        from stb.survival import _CoxProblem, _numeric_gradient

        obs = self._simulate(n=2000, seed=2)
        fit = cox_fit(obs, covariates=("fluency",))
        times = sorted({o.inspection_time for o in obs})
        t_index = {t: j for j, t in enumerate(times)}
        k_index = np.array([t_index[o.inspection_time] for o in obs])
        event = np.array([o.spotted for o in obs])
        x = np.array([[o.covariates[0]] for o in obs], dtype=float)
        problem = _CoxProblem(k_index, event, x, len(times))
        # rebuild the optimum parameter vector from the fit outputs
        from scipy.special import logit
        from stb.survival import _softplus_inv

        theta = np.array([logit(1 - s) for _, s in fit.baseline_survival])
        u = np.concatenate([[theta[0]], _softplus_inv(np.diff(theta))])
        params = np.concatenate([[fit.beta["fluency"]], u])
        num_grad = _numeric_gradient(lambda q: problem.nll_grad(q)[0], params, step=1e-5)
        assert np.linalg.norm(num_grad) < 1e-4

    def test_baseline_consistency_with_turnbull(self):
        # no covariates: the PH optimum must reproduce the NPMLE
        rng = np.random.default_rng(3)
        obs = []
        for k, frac in ((1, 0.15), (2, 0.35), (3, 0.55), (5, 0.8)):
            for _ in range(60):
                if rng.random() < frac:
                    obs.append(spotted(k))
                else:
                    obs.append(survived(k))
        fit = cox_fit(obs, covariates=())
        est = turnbull_fit(obs)
        for (t, s0), s_np in zip(fit.baseline_survival, est.survival):
            assert s0 == pytest.approx(s_np, abs=1e-6)

    def test_null_covariate_rarely_significant(self):
        hits = 0
        for seed in range(6):
            rng = np.random.default_rng(seed + 100)
            n = 1500
            xs = rng.choice([-1, 0, 1], n)
            ks = rng.choice([1, 2, 3, 5], n)
            ev = rng.random(n) < 1.0 - np.exp(-0.3 * ks)  # independent of x
            obs = [SurvivalObservation("A", 0.0 if e else float(k),
                                       float(k) if e else INF, (int(x), 0, 0))
                   for x, k, e in zip(xs, ks, ev)]
            fit = cox_fit(obs, covariates=("fluency",))
            hits += fit.p_value["fluency"] < 0.05
        assert hits <= 1

    def test_needs_both_outcomes(self):
        with pytest.raises(StbError, match="spotted and one survived"):
            cox_fit([spotted(2, cov=(1, 0, 0)), spotted(3, cov=(-1, 0, 0))],
                    covariates=("fluency",))


class TestFeatureWinRate:
    @pytest.fixture
    def plan(self):
        return plan_from_items(pair_items(["alpha", "beta"], n_conversations=2))

    def _records(self, plan, choices):
        items = sorted((i for i in plan.items_by_id.values()), key=lambda i: i.item_id)
        return [
            make_record(item.item_id, "w", (L.UNSURE, L.UNSURE),
                        prefs={Feature.FLUENCY: c})
            for item, c in zip(items, choices)
        ]

    def test_three_of_four_decisive(self, plan):
        records = self._records(plan, [Choice.FIRST, Choice.FIRST, Choice.FIRST,
                                       Choice.SECOND, Choice.TIE])
        rate = feature_win_rate(records, plan, "alpha", "fluency")
        assert rate == 0.75

    def test_all_ties_undefined(self, plan):
        records = self._records(plan, [Choice.TIE] * 4)
        with pytest.raises(UndefinedRateError):
            feature_win_rate(records, plan, "alpha", "fluency")

    def test_printed_dr_fluency_cell(self):
        # 16 wins, 84 losses -> 0.16 like the weakest system's fluency column
        plan_big = plan_from_items(pair_items(["alpha", "beta"], n_conversations=34))
        items = sorted(plan_big.items_by_id.values(), key=lambda i: i.item_id)[:100]
        choices = [Choice.FIRST] * 16 + [Choice.SECOND] * 84
        records = [
            make_record(item.item_id, "w", (L.UNSURE, L.UNSURE),
                        prefs={Feature.FLUENCY: c})
            for item, c in zip(items, choices)
        ]
        assert feature_win_rate(records, plan_big, "alpha", "fluency") == pytest.approx(0.16)

    def test_ssa_needs_both_features(self, plan):
        items = sorted(plan.items_by_id.values(), key=lambda i: i.item_id)[:3]
        records = [
            make_record(items[0].item_id, "w", (L.UNSURE, L.UNSURE),
                        prefs={Feature.SENSIBLENESS: Choice.FIRST,
                               Feature.SPECIFICITY: Choice.FIRST}),
            make_record(items[1].item_id, "w", (L.UNSURE, L.UNSURE),
                        prefs={Feature.SENSIBLENESS: Choice.FIRST,
                               Feature.SPECIFICITY: Choice.SECOND}),  # split: excluded
            make_record(items[2].item_id, "w", (L.UNSURE, L.UNSURE),
                        prefs={Feature.SENSIBLENESS: Choice.SECOND,
                               Feature.SPECIFICITY: Choice.SECOND}),
        ]
        assert feature_win_rate(records, plan, "alpha", None, mode="ssa") == 0.5
