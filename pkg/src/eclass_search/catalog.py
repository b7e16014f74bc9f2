"""Taxonomy and product catalog loading, attribute selection, document composition."""

from __future__ import annotations

import enum
import io
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import IO, Any, Union

from .errors import CatalogError

Scalar = Union[str, int, float, bool]

LEVEL_NAMES = {4: "commodity_class", 3: "group", 2: "main_group", 1: "segment"}


class DataLevel(str, enum.Enum):
    MINIMAL = "minimal"
    BASIC = "basic"
    ADVANCED = "advanced"

    @property
    def rank(self) -> int:
        return _DATA_LEVEL_RANK[self]

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, DataLevel):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: object) -> bool:
        if not isinstance(other, DataLevel):
            return NotImplemented
        return self.rank <= other.rank

    @classmethod
    def parse(cls, value: str | DataLevel) -> DataLevel:
        try:
            return cls(value)
        except ValueError:
            raise CatalogError(f"unknown data level {value!r}") from None


_DATA_LEVEL_RANK = {DataLevel.MINIMAL: 0, DataLevel.BASIC: 1, DataLevel.ADVANCED: 2}

MAX_CATEGORY_LEVEL = 4


def check_category_level(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value <= MAX_CATEGORY_LEVEL:
        raise CatalogError(f"category level must be an integer in 0..4, got {value!r}")
    return value


@dataclass(frozen=True)
class Category:
    id: str
    level: int
    name: str
    definition: str | None = None
    keywords: tuple[str, ...] = ()
    parent_id: str | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "level": self.level, "name": self.name}
        if self.definition is not None:
            out["definition"] = self.definition
        if self.keywords:
            out["keywords"] = list(self.keywords)
        if self.parent_id is not None:
            out["parent_id"] = self.parent_id
        return out


@dataclass(frozen=True)
class Taxonomy:
    categories: Mapping[str, Category]

    def __len__(self) -> int:
        return len(self.categories)

    def __getitem__(self, category_id: str) -> Category:
        return self.categories[category_id]

    def __contains__(self, category_id: object) -> bool:
        return category_id in self.categories

    def commodity_classes(self) -> list[Category]:
        return sorted((c for c in self.categories.values() if c.level == 4), key=lambda c: c.id)

    def to_json(self) -> dict[str, Any]:
        return {"categories": [self.categories[k].to_json() for k in sorted(self.categories)]}


@dataclass(frozen=True)
class Product:
    article_number: str
    name: str
    short_description: str
    commodity_class_id: str
    attributes: Mapping[str, Scalar] = field(default_factory=dict)
    basic_attribute_names: frozenset[str] = frozenset()

    def to_json(self) -> dict[str, Any]:
        return {
            "article_number": self.article_number,
            "name": self.name,
            "short_description": self.short_description,
            "commodity_class_id": self.commodity_class_id,
            "attributes": dict(self.attributes),
            "basic_attribute_names": sorted(self.basic_attribute_names),
        }


@dataclass(frozen=True)
class ComposedDocument:
    product_id: str
    data_level: DataLevel
    category_level: int
    text: str


def _read_text(source: IO[bytes] | IO[str] | bytes | str) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _parse_category(raw: Any) -> Category:
    if not isinstance(raw, dict):
        raise CatalogError(f"category entry must be an object, got {type(raw).__name__}")
    cid = raw.get("id")
    if not isinstance(cid, str) or not cid:
        raise CatalogError(f"category without a string id: {raw!r}")
    level = raw.get("level")
    if isinstance(level, bool) or not isinstance(level, int) or not 1 <= level <= 4:
        raise CatalogError(f"category {cid}: level must be 1..4, got {level!r}")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise CatalogError(f"category {cid}: missing name")
    definition = raw.get("definition")
    if definition is not None and not isinstance(definition, str):
        raise CatalogError(f"category {cid}: definition must be a string")
    if definition == "":
        definition = None
    keywords = raw.get("keywords") or []
    if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
        raise CatalogError(f"category {cid}: keywords must be a list of strings")
    parent_id = raw.get("parent_id")
    if parent_id is not None and not isinstance(parent_id, str):
        raise CatalogError(f"category {cid}: parent_id must be a string")
    return Category(cid, level, name, definition, tuple(keywords), parent_id)


def build_taxonomy(categories: Iterable[Category]) -> Taxonomy:
    """Validate categories and assemble a taxonomy."""
    by_id: dict[str, Category] = {}
    for cat in categories:
        if cat.id in by_id:
            raise CatalogError(f"duplicate category id {cat.id}")
        by_id[cat.id] = cat

    for cat in by_id.values():
        if cat.level == 1:
            if cat.parent_id is not None:
                raise CatalogError(f"category {cat.id}: segment must not have a parent")
            continue
        if cat.parent_id is None:
            raise CatalogError(f"category {cat.id}: level {cat.level} requires a parent")
        parent = by_id.get(cat.parent_id)
        if parent is None:
            raise CatalogError(f"category {cat.id}: dangling parent {cat.parent_id}")
        if parent.level != cat.level - 1:
            raise CatalogError(
                f"category {cat.id}: parent {parent.id} has level {parent.level}, expected {cat.level - 1}"
            )

    for cat in by_id.values():
        if cat.level != 4:
            continue
        depth, node, seen = 1, cat, {cat.id}
        while node.parent_id is not None:
            node = by_id[node.parent_id]
            if node.id in seen:
                raise CatalogError(f"category {cat.id}: cycle through {node.id}")
            seen.add(node.id)
            depth += 1
        if depth != 4:
            raise CatalogError(f"category {cat.id}: path depth {depth} != 4")
    return Taxonomy(by_id)


def load_taxonomy(source: IO[bytes] | IO[str] | bytes | str) -> Taxonomy:
    try:
        payload = json.loads(_read_text(source))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CatalogError(f"malformed taxonomy JSON: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("categories"), list):
        raise CatalogError('taxonomy must be an object with a "categories" list')
    return build_taxonomy(_parse_category(raw) for raw in payload["categories"])


def _parse_product(raw: Any, taxonomy: Taxonomy, where: str) -> Product:
    if not isinstance(raw, dict):
        raise CatalogError(f"{where}: product must be a JSON object")
    for key in ("article_number", "name", "short_description", "commodity_class_id"):
        if not isinstance(raw.get(key), str):
            raise CatalogError(f"{where}: missing string field {key!r}")
    pid = raw["article_number"]
    attributes = raw.get("attributes") or {}
    if not isinstance(attributes, dict):
        raise CatalogError(f"{where}: product {pid}: attributes must be an object")
    for name, value in attributes.items():
        if not isinstance(value, (str, int, float, bool)) or value is None:
            raise CatalogError(f"{where}: product {pid}: attribute {name!r} is not a scalar")
    basic = raw.get("basic_attribute_names") or []
    if not isinstance(basic, list) or not all(isinstance(b, str) for b in basic):
        raise CatalogError(f"{where}: product {pid}: basic_attribute_names must be a list of strings")
    missing = set(basic) - set(attributes)
    if missing:
        raise CatalogError(
            f"{where}: product {pid}: basic attributes not in attributes: {sorted(missing)}"
        )
    cls_id = raw["commodity_class_id"]
    cls = taxonomy.categories.get(cls_id)
    if cls is None:
        raise CatalogError(f"{where}: product {pid}: unknown commodity class {cls_id}")
    if cls.level != 4:
        raise CatalogError(f"{where}: product {pid}: category {cls_id} is level {cls.level}, not 4")
    return Product(
        article_number=pid,
        name=raw["name"],
        short_description=raw["short_description"],
        commodity_class_id=cls_id,
        attributes=dict(attributes),
        basic_attribute_names=frozenset(basic),
    )


def load_products(source: IO[bytes] | IO[str] | bytes | str, taxonomy: Taxonomy) -> list[Product]:
    """Parse a JSON-lines catalog; errors carry the 1-based line number."""
    products: list[Product] = []
    seen: set[str] = set()
    for lineno, line in enumerate(io.StringIO(_read_text(source)), start=1):
        if not line.strip():
            continue
        where = f"line {lineno}"
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"{where}: malformed JSON: {exc.msg}") from exc
        product = _parse_product(raw, taxonomy, where)
        if product.article_number in seen:
            raise CatalogError(f"{where}: duplicate article number {product.article_number}")
        seen.add(product.article_number)
        products.append(product)
    return products


def category_path(taxonomy: Taxonomy, commodity_class_id: str) -> list[Category]:
    """Return the four categories from the commodity class up to its segment."""
    node = taxonomy.categories.get(commodity_class_id)
    if node is None:
        raise CatalogError(f"unknown category {commodity_class_id}")
    if node.level != 4:
        raise CatalogError(f"category {commodity_class_id} is level {node.level}, not a commodity class")
    path = [node]
    while node.parent_id is not None:
        node = taxonomy.categories[node.parent_id]
        path.append(node)
    return path


def select_attributes(product: Product, data_level: DataLevel | str) -> dict[str, Scalar]:
    level = DataLevel.parse(data_level)
    if level is DataLevel.MINIMAL:
        return {}
    keys = sorted(product.attributes)
    if level is DataLevel.BASIC:
        keys = [k for k in keys if k in product.basic_attribute_names]
    return {k: product.attributes[k] for k in keys}


def _category_block(cat: Category) -> dict[str, Any]:
    block: dict[str, Any] = {"level_name": LEVEL_NAMES[cat.level], "name": cat.name}
    if cat.definition:
        block["definition"] = cat.definition
    if cat.keywords:
        block["keywords"] = list(cat.keywords)
    return block


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def compose_document(
    product: Product,
    taxonomy: Taxonomy,
    data_level: DataLevel | str,
    category_level: int,
) -> ComposedDocument:
    level = DataLevel.parse(data_level)
    cl = check_category_level(category_level)
    body: dict[str, Any] = {
        "name": product.name,
        "article_number": product.article_number,
        "short_description": product.short_description,
    }
    attrs = select_attributes(product, level)
    if attrs:
        body["attributes"] = attrs
    if cl > 0:
        path = category_path(taxonomy, product.commodity_class_id)
        body["categories"] = [_category_block(c) for c in path[:cl]]
    return ComposedDocument(product.article_number, level, cl, canonical_json(body))


def compose_all(
    products: Iterable[Product], taxonomy: Taxonomy, data_level: DataLevel | str, category_level: int
) -> list[ComposedDocument]:
    return [compose_document(p, taxonomy, data_level, category_level) for p in products]
