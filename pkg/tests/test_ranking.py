import pytest
from hypothesis import given, strategies as st

from conftest import make_record, plan_from_items
from oracles import chi2_1df_sf_oracle
from stb.annotation import EntityLabel
from stb.errors import StbError, UndefinedRateError
from stb.ranking import (WinTally, bootstrap_ranking, chi_square, fit_trueskill,
                         segment_winner, tally, win_rate)
from synth import hazard_tournament, pair_items, tally_tournament

L = EntityLabel


@pytest.fixture
def two_bot_plan():
    return plan_from_items(pair_items(["alpha", "beta"], n_conversations=4))


def first_item(plan, kind="bot_bot"):
    return next(i for i in plan.items_by_id.values() if i.kind == kind)


class TestSegmentWinner:
    def test_human_beats_bot(self, two_bot_plan):
        item = first_item(two_bot_plan)
        rec = make_record(item.item_id, "w", (L.HUMAN, L.BOT))
        assert segment_winner(rec, two_bot_plan) == "first"

    def test_unsure_beats_bot(self, two_bot_plan):
        item = first_item(two_bot_plan)
        rec = make_record(item.item_id, "w", (L.UNSURE, L.BOT))
        assert segment_winner(rec, two_bot_plan) == "first"

    def test_equal_labels_tie(self, two_bot_plan):
        item = first_item(two_bot_plan)
        rec = make_record(item.item_id, "w", (L.UNSURE, L.UNSURE))
        assert segment_winner(rec, two_bot_plan) == "tie"

    def test_human_human_item_rejected(self):
        from stb.batching import SegmentItem
        from conftest import plan_from_items

        item = SegmentItem(item_id="h::k2", conversation_id="h", k=2, kind="human_human",
                           systems=("human", "human"), domain="d",
                           exchanges=(("a", "b"), ("c", "d")))
        plan = plan_from_items([item], ks=(2,))
        with pytest.raises(StbError, match="human_human"):
            segment_winner(make_record("h::k2", "w", (L.HUMAN, L.BOT)), plan)


class TestTally:
    def test_counts_outcomes(self, two_bot_plan):
        items = sorted(two_bot_plan.items_by_id.values(), key=lambda i: i.item_id)[:3]
        records = [
            make_record(items[0].item_id, "w1", (L.HUMAN, L.BOT)),     # alpha wins
            make_record(items[1].item_id, "w1", (L.BOT, L.BOT)),       # tie
            make_record(items[2].item_id, "w1", (L.BOT, L.HUMAN)),     # beta wins
        ]
        t = tally(records, two_bot_plan, ("alpha", "beta"))
        assert (t.wins_a, t.wins_b, t.ties) == (1, 1, 1)

    def test_empty_is_zero(self, two_bot_plan):
        t = tally([], two_bot_plan, ("alpha", "beta"))
        assert (t.wins_a, t.wins_b, t.ties) == (0, 0, 0)

    def test_each_annotator_counted_separately(self, two_bot_plan):
        item = first_item(two_bot_plan)
        records = [make_record(item.item_id, w, (L.HUMAN, L.BOT)) for w in ("w1", "w2")]
        t = tally(records, two_bot_plan, ("alpha", "beta"))
        assert t.wins_a == 2


class TestWinRate:
    def test_symmetry_point(self):
        assert win_rate(WinTally("a", "b", 14, 14, 3)) == 0.5

    def test_printed_cell(self):
        assert win_rate(WinTally("GPT", "DR", 373, 27, 0)) == pytest.approx(0.93, abs=0.005)

    def test_three_to_one(self):
        assert win_rate(WinTally("a", "b", 3, 1, 0)) == 0.75

    def test_all_ties_undefined(self):
        with pytest.raises(UndefinedRateError):
            win_rate(WinTally("a", "b", 0, 0, 9))

    @given(wa=st.integers(0, 500), wb=st.integers(0, 500), ties=st.integers(0, 50))
    def test_complementarity(self, wa, wb, ties):
        t = WinTally("a", "b", wa, wb, ties)
        if t.decisive == 0:
            return
        assert win_rate(t) + win_rate(t.swapped()) == pytest.approx(1.0)


class TestChiSquare:
    def test_thirty_vs_ten(self):
        stat, p = chi_square(WinTally("a", "b", 30, 10, 0))
        assert stat == pytest.approx(10.0)
        assert p == pytest.approx(chi2_1df_sf_oracle(10.0), rel=1e-6)
        assert p == pytest.approx(0.00157, abs=2e-5)

    def test_perfect_balance(self):
        stat, p = chi_square(WinTally("a", "b", 20, 20, 5))
        assert stat == 0.0 and p == 1.0

    def test_twentyfive_vs_fifteen_not_significant(self):
        stat, p = chi_square(WinTally("a", "b", 25, 15, 0))
        assert stat == pytest.approx(2.5)
        assert p == pytest.approx(chi2_1df_sf_oracle(2.5), rel=1e-6)
        assert p > 0.05

    @given(wa=st.integers(0, 300), wb=st.integers(0, 300))
    def test_swap_invariance(self, wa, wb):
        if wa + wb == 0:
            return
        t = WinTally("a", "b", wa, wb, 0)
        assert chi_square(t)[0] == pytest.approx(chi_square(t.swapped())[0])


class TestFitTrueskill:
    def _one_win_plan(self):
        plan = plan_from_items(pair_items(["alpha", "beta"], n_conversations=1, ks=(2,)),
                               ks=(2,))
        item = next(iter(plan.items_by_id.values()))
        return plan, item

    def test_single_win_symmetric_and_in_band(self):
        plan, item = self._one_win_plan()
        records = [make_record(item.item_id, "w", (L.HUMAN, L.BOT))]
        ratings = fit_trueskill(records, plan, rng_seed=0)
        by_name = {r.system: r for r in ratings}
        assert by_name["alpha"].mu > by_name["beta"].mu
        assert by_name["alpha"].mu - 25.0 == pytest.approx(25.0 - by_name["beta"].mu)
        assert 29.2 <= by_name["alpha"].mu <= 29.6

    def test_system_without_decisive_match_errors(self):
        plan, item = self._one_win_plan()
        records = [make_record(item.item_id, "w", (L.BOT, L.BOT))]
        with pytest.raises(StbError, match="no decisive"):
            fit_trueskill(records, plan, rng_seed=0)

    def test_draws_only_give_equal_mu(self):
        plan = plan_from_items(pair_items(["alpha", "beta"], n_conversations=2, ks=(2, 3)),
                               ks=(2, 3))
        items = sorted(plan.items_by_id.values(), key=lambda i: i.item_id)
        records = [make_record(items[0].item_id, "w", (L.HUMAN, L.BOT))]
        records += [make_record(i.item_id, "w", (L.UNSURE, L.UNSURE)) for i in items[1:]]
        ratings = fit_trueskill(records, plan, rng_seed=1)
        assert len(ratings) == 2  # draws keep both in play alongside one decisive


class TestBootstrapRanking:
    def test_total_dominance_pins_range(self):
        counts = {}
        systems = ["a", "b", "c", "d"]
        for i, x in enumerate(systems):
            for y in systems[i + 1:]:
                counts[(x, y)] = (60, 0, 0)  # earlier name always wins
        plan, records = tally_tournament(counts, ks=(2, 3, 5))
        report = bootstrap_ranking(records, plan, n_bootstrap=200, rng_seed=0)
        assert report.rank_range["a"] == (1, 1)
        assert report.systems[0] == "a"

    def test_ranks_in_bounds_and_contain_fulldata_rank(self):
        plan, records = hazard_tournament(
            {"a": 0.1, "b": 0.3, "c": 0.6}, n_conversations=12, rng_seed=5)
        report = bootstrap_ranking(records, plan, n_bootstrap=150, rng_seed=5)
        full_rank = {s: i + 1 for i, s in enumerate(report.systems)}
        for s in ("a", "b", "c"):
            lo, hi = report.rank_range[s]
            assert 1 <= lo <= hi <= 3
            assert lo <= full_rank[s] <= hi

    def test_indistinguishable_pair_clusters_together(self):
        counts = {
            ("a", "b"): (30, 30, 0),    # dead even
            ("a", "c"): (55, 5, 0),
            ("b", "c"): (55, 5, 0),
        }
        plan, records = tally_tournament(counts, ks=(2, 3, 5))
        report = bootstrap_ranking(records, plan, n_bootstrap=300, rng_seed=2)
        cluster_of = {s: ci for ci, cluster in enumerate(report.clusters) for s in cluster}
        assert cluster_of["a"] == cluster_of["b"]
        assert cluster_of["c"] != cluster_of["a"]

    def test_wr_and_skill_order_agree_on_dominance_chain(self):
        plan, records = hazard_tournament(
            {"a": 0.05, "b": 0.3, "c": 0.7}, n_conversations=15, rng_seed=3)
        report = bootstrap_ranking(records, plan, n_bootstrap=100, rng_seed=3)
        by_wr = sorted(report.win_rate, key=lambda s: -report.win_rate[s])
        assert list(report.systems) == by_wr == ["a", "b", "c"]

    def test_zero_decisive_pair_errors(self):
        plan = plan_from_items(pair_items(["a", "b"], n_conversations=2, ks=(2,)), ks=(2,))
        items = sorted(plan.items_by_id.values(), key=lambda i: i.item_id)
        records = [make_record(i.item_id, "w", (L.UNSURE, L.UNSURE)) for i in items]
        with pytest.raises((UndefinedRateError, StbError)):
            bootstrap_ranking(records, plan, n_bootstrap=10, rng_seed=0)

    def test_reproducible(self):
        plan, records = hazard_tournament({"a": 0.2, "b": 0.5}, n_conversations=8, rng_seed=1)
        r1 = bootstrap_ranking(records, plan, n_bootstrap=50, rng_seed=9)
        r2 = bootstrap_ranking(records, plan, n_bootstrap=50, rng_seed=9)
        assert r1.rank_range == r2.rank_range
        assert [r.mu for r in r1.ratings] == [r.mu for r in r2.ratings]
