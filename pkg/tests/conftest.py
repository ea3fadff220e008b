import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                rows.append((nodeid.split("::")[-1], status.upper()))
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, status in sorted(rows):
            terminalreporter.write_line(f"{status:7s} {name}")

from attrfool.lexicon import (
    EmbeddingStore,
    Lexicon,
    PosLexicon,
    StopWordSet,
    SynonymIndex,
    TokenSequence,
)
from attrfool.models import ModelConfig, TrainConfig, build_model, train
from attrfool.synthdata import CLUSTERS, CorpusSpec, build_embeddings, generate_sentences

from helpers import golden_fixture


@pytest.fixture
def golden():
    return golden_fixture()


def _toy_spec():
    return CorpusSpec(seed=11, train_size=160, test_size=60, embed_dim=8)


@pytest.fixture(scope="session")
def toy_lexicon():
    """Small cluster-structured lexicon for attack property tests."""
    spec = _toy_spec()
    store = EmbeddingStore(spec.embed_dim, build_embeddings(spec))
    tags = {}
    for _, tag, _, members in CLUSTERS:
        for w in members:
            tags[w] = tag
    return Lexicon(
        store=store,
        synonyms=SynonymIndex(store, neighbor_cap=15),
        pos=PosLexicon(tags),
        stopwords=StopWordSet.default(),
    )


@pytest.fixture(scope="session")
def toy_dataset():
    spec = _toy_spec()
    train_rows, test_rows = generate_sentences(spec)
    from attrfool.lexicon import tokenize

    def to_samples(rows):
        return [
            TokenSequence(tuple(tokenize(text)), 0 if label == "pos" else 1)
            for text, label in rows
        ]

    return to_samples(train_rows), to_samples(test_rows)


@pytest.fixture(scope="session")
def toy_model(toy_lexicon, toy_dataset):
    """A small trained attention-pooling classifier over the toy lexicon."""
    train_samples, _ = toy_dataset
    config = ModelConfig(
        arch="attention_pool", embed_dim=toy_lexicon.store.dimension, num_labels=2,
        hidden=8, seed=3,
    )
    model = build_model(config, toy_lexicon.store)
    train(model, train_samples, TrainConfig(epochs=12, learning_rate=0.5, seed=3))
    return model
