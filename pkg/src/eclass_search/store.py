"""On-disk store: validated taxonomy, catalog, optional synonym table and index cache."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .catalog import Product, Taxonomy, load_products, load_taxonomy
from .errors import DataError
from .pipeline import Components, IndexSet, SearchConfig, prepare_indices

TAXONOMY_FILE = "taxonomy.json"
CATALOG_FILE = "catalog.jsonl"
SYNONYMS_FILE = "synonyms.json"
MANIFEST_FILE = "manifest.json"
INDEX_DIR = "indices"


def read_file(path: str | Path) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except IsADirectoryError:
        raise DataError(f"expected a file, got a directory: {path}") from None


def load_synonyms(path: str | Path) -> dict[str, str]:
    try:
        raw = json.loads(read_file(Path(path)))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON: {exc}") from None
    if not isinstance(raw, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in raw.items()):
        raise DataError(f"{path}: synonyms must map token to token")
    return {k.lower(): v.lower() for k, v in raw.items()}


def write_store(
    root: str | Path,
    taxonomy: Taxonomy,
    products: list[Product],
    synonyms: dict[str, str] | None = None,
) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / TAXONOMY_FILE).write_text(
        json.dumps(taxonomy.to_json(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    (root / CATALOG_FILE).write_text(
        "".join(json.dumps(p.to_json(), ensure_ascii=False, separators=(",", ":")) + "\n" for p in products),
        encoding="utf-8",
    )
    syn_path = root / SYNONYMS_FILE
    if synonyms:
        syn_path.write_text(json.dumps(dict(sorted(synonyms.items())), indent=1) + "\n", encoding="utf-8")
    elif syn_path.exists():
        syn_path.unlink()
    classes = {p.commodity_class_id for p in products}
    manifest = {"products": len(products), "classes": len(classes), "synonyms": len(synonyms or {})}
    (root / MANIFEST_FILE).write_text(json.dumps(manifest, sort_keys=True) + "\n", encoding="utf-8")
    return root


def ingest(
    taxonomy_path: str | Path,
    catalog_path: str | Path,
    out: str | Path,
    synonyms_path: str | Path | None = None,
) -> Store:
    taxonomy = load_taxonomy(read_file(Path(taxonomy_path)))
    products = load_products(read_file(Path(catalog_path)), taxonomy)
    synonyms = load_synonyms(synonyms_path) if synonyms_path else None
    write_store(out, taxonomy, products, synonyms)
    return Store(Path(out))


@dataclass
class Store:
    root: Path

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        if not (self.root / MANIFEST_FILE).is_file():
            raise DataError(f"{self.root} is not an ingested store (run ingest first)")

    @cached_property
    def taxonomy(self) -> Taxonomy:
        return load_taxonomy(read_file(self.root / TAXONOMY_FILE))

    @cached_property
    def products(self) -> list[Product]:
        return load_products(read_file(self.root / CATALOG_FILE), self.taxonomy)

    @cached_property
    def synonyms(self) -> dict[str, str]:
        path = self.root / SYNONYMS_FILE
        return load_synonyms(path) if path.exists() else {}

    @property
    def index_dir(self) -> Path:
        return self.root / INDEX_DIR

    def summary(self) -> str:
        classes = {p.commodity_class_id for p in self.products}
        return f"products={len(self.products)} classes={len(classes)}"

    def prepare(self, configs: list[SearchConfig], components: Components | None = None) -> IndexSet:
        return prepare_indices(
            self.products,
            self.taxonomy,
            configs,
            cache_dir=self.index_dir,
            components=components or Components(self.synonyms),
        )
