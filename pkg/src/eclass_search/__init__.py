"""Taxonomy-augmented product search: catalog composition, BM25 and dense
retrieval, re-ranking, query rewriting and IR evaluation."""

from .catalog import (
    Category,
    ComposedDocument,
    DataLevel,
    Product,
    Taxonomy,
    category_path,
    compose_document,
    load_products,
    load_taxonomy,
    select_attributes,
)
from .pipeline import IndexSet, SearchConfig, SearchOutcome, prepare_indices, run_search

__version__ = "0.1.0"

__all__ = [
    "Category",
    "ComposedDocument",
    "DataLevel",
    "IndexSet",
    "Product",
    "SearchConfig",
    "SearchOutcome",
    "Taxonomy",
    "category_path",
    "compose_document",
    "load_products",
    "load_taxonomy",
    "prepare_indices",
    "run_search",
    "select_attributes",
]
