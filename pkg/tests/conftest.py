import os

import pytest

from budgetrank.corpus import load_segments, load_taxonomy
from budgetrank.embeddings import load_store
from budgetrank.market import load_prices

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy(fixture_path("taxonomy.csv"))


@pytest.fixture(scope="session")
def corpus(taxonomy):
    return load_segments(fixture_path("segments.jsonl"), taxonomy)


@pytest.fixture(scope="session")
def store():
    return load_store(fixture_path("store.embv1"))


@pytest.fixture(scope="session")
def prices():
    return load_prices(fixture_path("prices.csv"))
