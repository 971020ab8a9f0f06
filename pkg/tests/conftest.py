import pytest

from stb.annotation import FEATURES, AnnotationRecord, Choice, EntityLabel
from stb.batching import Batch, Plan, PlanConfig
from stb.corpus import Conversation, Corpus, EntityDescriptor, Exchange, Turn


def make_conversation(conv_id: str, n: int = 5, kind: str = "bot_bot",
                      systems: tuple[str, str] = ("alpha", "beta"),
                      domain: str = "toy", text: str = "line") -> Conversation:
    if kind == "human_human":
        entities = (EntityDescriptor("human", "human"), EntityDescriptor("human", "human"))
    else:
        entities = (EntityDescriptor("bot", systems[0]), EntityDescriptor("bot", systems[1]))
    exchanges = tuple(
        Exchange(index=i, turns=(Turn(0, f"{text} {conv_id} a{i}"), Turn(1, f"{text} {conv_id} b{i}")))
        for i in range(n)
    )
    return Conversation(id=conv_id, domain=domain, entities=entities, exchanges=exchanges)


def make_corpus(n_convs: int = 3, ks=(2, 3, 5), kind: str = "bot_bot",
                systems=("alpha", "beta"), domain: str = "toy", n_exchanges: int = 5,
                prefix: str = "c") -> Corpus:
    convs = tuple(
        make_conversation(f"{prefix}{i:03d}", n=n_exchanges, kind=kind, systems=systems, domain=domain)
        for i in range(n_convs)
    )
    return Corpus(domain=domain, conversations=convs, segment_lengths=tuple(ks))


def plan_from_items(items, ks=(2, 3, 5), annotators_per_item: int = 2) -> Plan:
    """A trivially constraint-valid plan: one batch per segment length."""
    batches = []
    for k in sorted({i.k for i in items}):
        batch_items = tuple(i for i in items if i.k == k)
        batches.append(Batch(batch_id=f"batch-k{k}", items=batch_items))
    return Plan(
        config=PlanConfig(segment_lengths=tuple(ks), annotators_per_item=annotators_per_item),
        batches=tuple(batches),
    )


def make_record(item_id: str, worker: str, labels: tuple[EntityLabel, EntityLabel],
                prefs: dict | None = None, duration: float = 20.0) -> AnnotationRecord:
    preferences = {f: Choice.TIE for f in FEATURES}
    if prefs:
        preferences.update(prefs)
    return AnnotationRecord(item_id=item_id, worker_id=worker, labels=labels,
                            preferences=preferences, duration_seconds=duration)


@pytest.fixture
def bot_corpus():
    return make_corpus(n_convs=4, systems=("alpha", "beta"))


@pytest.fixture
def human_corpus():
    return make_corpus(n_convs=6, kind="human_human", prefix="h")
