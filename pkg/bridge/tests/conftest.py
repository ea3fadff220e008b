import pytest

from hfbridge.demo import build_demo_model


@pytest.fixture(scope="session")
def served():
    return build_demo_model(labels=2, seed=0)


@pytest.fixture(scope="session")
def served_minimal():
    """Same classifier, with the optional capabilities switched off."""
    return build_demo_model(
        labels=2, seed=0, with_sentence_sim=False, with_language_model=False
    )
