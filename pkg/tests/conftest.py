import json
from pathlib import Path

import pytest

from eclass_search.catalog import load_products, load_taxonomy
from eclass_search.evalharness import BenchSpec, generate_synthetic

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def taxonomy():
    with open(FIXTURES / "taxonomy_small.json", "rb") as fh:
        return load_taxonomy(fh)


@pytest.fixture(scope="session")
def products(taxonomy):
    with open(FIXTURES / "catalog_small.jsonl", "rb") as fh:
        return load_products(fh, taxonomy)


@pytest.fixture(scope="session")
def small_bench():
    return generate_synthetic(BenchSpec(seed=3, n_commodity_classes=8, products_per_class=10, keyword_rate=1.0))


def chain_taxonomy_json() -> bytes:
    cats = [
        {"id": "1", "level": 1, "name": "Seg"},
        {"id": "1-1", "level": 2, "name": "Main", "parent_id": "1"},
        {"id": "1-1-1", "level": 3, "name": "Group", "parent_id": "1-1"},
        {"id": "1-1-1-1", "level": 4, "name": "Class", "parent_id": "1-1-1"},
    ]
    return json.dumps({"categories": cats}).encode()
