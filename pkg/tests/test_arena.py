import numpy as np
import pytest

from conftest import make_corpus
from stb.arena import (BotEndpoint, SamplingConfig, UnigramModel, respond,
                       sample_pair_conversations, sample_tournament)
from stb.errors import SamplingError, StbError, TransportError


def canned(name, replies):
    return BotEndpoint(system_name=name, builtin="canned", replies=tuple(replies))


class TestRespond:
    def test_echo_returns_last_utterance(self):
        echo = BotEndpoint(system_name="e", builtin="echo")
        assert respond(echo, [("self", "hi"), ("other", "hello")]) == "hello"

    def test_canned_fixed_reply(self):
        bot = canned("c", ["i see."])
        assert respond(bot, [("other", "anything")]) == "i see."

    def test_canned_cycles(self):
        bot = canned("c", ["one", "two"])
        history = [("other", "q")]
        assert respond(bot, history) == "one"
        history += [("self", "one"), ("other", "r")]
        assert respond(bot, history) == "two"
        history += [("self", "two"), ("other", "s")]
        assert respond(bot, history) == "one"

    def test_empty_history_rejected(self):
        with pytest.raises(StbError, match="non-empty"):
            respond(canned("c", ["x"]), [])

    def test_unreachable_endpoint(self):
        dead = BotEndpoint(system_name="d", url="http://127.0.0.1:9/chat", timeout=0.5)
        with pytest.raises(TransportError):
            respond(dead, [("other", "hi")])

    def test_unigram_deterministic_given_rng(self):
        model = UnigramModel.train(make_corpus(3, kind="human_human"))
        bot = BotEndpoint(system_name="u", builtin="unigram", model=model)
        r1 = respond(bot, [("other", "hi")], np.random.default_rng(5))
        r2 = respond(bot, [("other", "hi")], np.random.default_rng(5))
        assert r1 == r2 and r1.strip()

    def test_endpoint_needs_exactly_one_transport(self):
        with pytest.raises(StbError, match="exactly one"):
            BotEndpoint(system_name="x")


class TestSamplePair:
    def _config(self, n=3, target=5, seed=0, n_seeds=6):
        corpus = make_corpus(n_convs=n_seeds, kind="human_human", prefix="seed")
        return SamplingConfig(seed_corpus=corpus, conversations_per_pair=n,
                              target_exchanges=target, rng_seed=seed)

    def test_exact_counts(self):
        a, b = canned("a", ["ah."]), canned("b", ["bh."])
        convs = sample_pair_conversations(a, b, self._config(n=3, target=5))
        assert len(convs) == 3
        assert all(len(c) == 5 for c in convs)
        assert all(e.kind == "bot" for c in convs for e in c.entities)

    def test_insufficient_seeds(self):
        a, b = canned("a", ["x"]), canned("b", ["y"])
        config = self._config(n=45, n_seeds=40)
        with pytest.raises(StbError, match="need 45"):
            sample_pair_conversations(a, b, config)

    def test_first_exchange_is_seed_verbatim(self):
        a, b = canned("a", ["x"]), canned("b", ["y"])
        config = self._config(n=4)
        convs = sample_pair_conversations(a, b, config)
        seeds = {c.id: c for c in config.seed_corpus.conversations}
        for conv in convs:
            assert conv.seed_source in seeds
            assert conv.exchanges[0].texts == seeds[conv.seed_source].exchanges[0].texts

    def test_echo_vs_echo_repeats_partner(self):
        # hand simulation from seed (hi, hey): slot 0 echoes the partner's
        # last turn ("hey"), slot 1 then echoes that same text, and every
        # later exchange stays ("hey", "hey")
        from stb.corpus import Conversation, Corpus, EntityDescriptor, Exchange, Turn

        seed_conv = Conversation(
            id="s0", domain="d",
            entities=(EntityDescriptor("human", "human"), EntityDescriptor("human", "human")),
            exchanges=(Exchange(0, (Turn(0, "hi"), Turn(1, "hey"))),),
        )
        corpus = Corpus(domain="d", conversations=(seed_conv,), segment_lengths=(1,))
        config = SamplingConfig(seed_corpus=corpus, conversations_per_pair=1,
                                target_exchanges=3, rng_seed=0)
        e1 = BotEndpoint(system_name="e1", builtin="echo")
        e2 = BotEndpoint(system_name="e2", builtin="echo")
        (conv,) = sample_pair_conversations(e1, e2, config)
        assert conv.exchanges[0].texts == ("hi", "hey")
        assert conv.exchanges[1].texts == ("hey", "hey")
        assert conv.exchanges[2].texts == ("hey", "hey")

    def test_distinct_seed_sources_within_pair(self):
        a, b = canned("a", ["x"]), canned("b", ["y"])
        convs = sample_pair_conversations(a, b, self._config(n=5))
        sources = [c.seed_source for c in convs]
        assert len(set(sources)) == len(sources)

    def test_bit_reproducible(self):
        model = UnigramModel.train(make_corpus(4, kind="human_human"))
        a = BotEndpoint(system_name="a", builtin="unigram", model=model)
        b = canned("b", ["hm.", "right."])
        c1 = sample_pair_conversations(a, b, self._config(n=3, seed=11))
        c2 = sample_pair_conversations(a, b, self._config(n=3, seed=11))
        assert c1 == c2

    def test_partial_failure_reports(self):
        a = canned("a", ["x"])
        dead = BotEndpoint(system_name="d", url="http://127.0.0.1:9/chat", timeout=0.2)
        corpus = make_corpus(n_convs=4, kind="human_human", ks=(2,), n_exchanges=2)
        config = SamplingConfig(seed_corpus=corpus, conversations_per_pair=2,
                                target_exchanges=2, rng_seed=0)
        with pytest.raises(SamplingError) as info:
            sample_pair_conversations(a, dead, config)
        assert info.value.failures
        assert info.value.conversations == []

    def test_target_below_max_segment_rejected(self):
        corpus = make_corpus(n_convs=6, kind="human_human", ks=(2, 3, 5))
        with pytest.raises(StbError, match="below max segment"):
            SamplingConfig(seed_corpus=corpus, conversations_per_pair=2, target_exchanges=3)


class TestTournament:
    def test_all_pairs_sampled(self):
        bots = [canned("a", ["1"]), canned("b", ["2"]), canned("c", ["3"])]
        config = SamplingConfig(seed_corpus=make_corpus(8, kind="human_human"),
                                conversations_per_pair=2, target_exchanges=5, rng_seed=0)
        convs = sample_tournament(bots, config)
        pairs = {tuple(sorted(e.system_name for e in c.entities)) for c in convs}
        assert pairs == {("a", "b"), ("a", "c"), ("b", "c")}
        assert len(convs) == 6

    def test_duplicate_names_rejected(self):
        bots = [canned("a", ["1"]), canned("a", ["2"])]
        config = SamplingConfig(seed_corpus=make_corpus(4, kind="human_human"),
                                conversations_per_pair=2, target_exchanges=5)
        with pytest.raises(StbError, match="unique"):
            sample_tournament(bots, config)
