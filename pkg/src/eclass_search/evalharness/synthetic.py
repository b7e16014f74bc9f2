"""Deterministic synthetic catalogs with controlled vocabulary mismatch.

Every commodity class owns disjoint token pools:

* ``core`` tokens that every product of the class carries in its name,
* ``meta`` tokens that only ever appear in the class's category metadata,
* ``varied`` tokens used for attribute values of some products.

Groups additionally own ``shared`` tokens that every product in the group
carries, so sibling classes are confusable from product text alone. Queries
draw each token from the class metadata with probability ``mismatch_rate``
and otherwise from the tokens every relevant product carries.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any

from ..catalog import Category, Product, Taxonomy, build_taxonomy
from ..errors import ConfigError
from .datasets import EvalSample

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
_GLUE = ("with", "and", "for", "of", "in")
_RESERVED = frozenset(
    {
        "name", "article", "number", "short", "description", "attributes", "categories",
        "level", "definition", "keywords", "commodity", "class", "group", "main", "segment",
        "true", "false", *_GLUE,
    }
)
_UNITS = ("mm", "mm2", "v", "a", "kv", "ma", "hz", "w", "c")


@dataclass(frozen=True)
class BenchSpec:
    seed: int = 0
    n_segments: int = 2
    fanout: tuple[int, int] = (2, 2)
    n_commodity_classes: int = 40
    products_per_class: int = 25
    queries_per_class: int = 3
    query_length: int = 3
    mismatch_rate: float = 0.8
    definition_rate: float = 0.68
    keyword_rate: float = 0.53
    synonym_rate: float = 1.0
    attributes_per_product: tuple[int, int] = (4, 14)
    basic_fraction: float = 0.4

    def __post_init__(self) -> None:
        counts = {
            "n_segments": self.n_segments,
            "n_commodity_classes": self.n_commodity_classes,
            "products_per_class": self.products_per_class,
            "queries_per_class": self.queries_per_class,
            "query_length": self.query_length,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if len(self.fanout) != 2 or min(self.fanout) < 1:
            raise ConfigError(f"fanout must be two counts >= 1, got {self.fanout}")
        for name in ("mismatch_rate", "definition_rate", "keyword_rate", "synonym_rate", "basic_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        lo, hi = self.attributes_per_product
        if not 1 <= lo <= hi:
            raise ConfigError(f"attributes_per_product must satisfy 1 <= lo <= hi, got {self.attributes_per_product}")
        if self.mismatch_rate > 0 and self.definition_rate == 0 and self.keyword_rate == 0:
            raise ConfigError("mismatch_rate > 0 needs category definitions or keywords to draw from")
        if self.n_commodity_classes < self.n_groups:
            raise ConfigError(
                f"{self.n_commodity_classes} commodity classes cannot populate {self.n_groups} groups"
            )

    @property
    def n_groups(self) -> int:
        return self.n_segments * self.fanout[0] * self.fanout[1]


@dataclass
class SyntheticBench:
    spec: BenchSpec
    taxonomy: Taxonomy
    products: list[Product]
    dataset: list[EvalSample]
    synonyms: dict[str, str]
    # per commodity class: the token pools used to build it
    pools: dict[str, dict[str, list[str]]] = field(default_factory=dict, repr=False)


class _Words:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set(_RESERVED)

    def take(self, n: int, syllables: int = 3) -> list[str]:
        out = []
        while len(out) < n:
            word = "".join(self.rng.choice(_CONSONANTS) + self.rng.choice(_VOWELS) for _ in range(syllables))
            if word not in self.used:
                self.used.add(word)
                out.append(word)
        return out


def _cap(word: str) -> str:
    return word[:1].upper() + word[1:]


def _metadata(rng: random.Random, words: _Words, spec: BenchSpec) -> dict[str, Any]:
    pool = words.take(12)
    name = pool[:2]
    rest = pool[2:]
    definition = None
    if rng.random() < spec.definition_rate:
        picked = rng.sample(rest, 5)
        definition = f"{_cap(picked[0])} {picked[1]} {rng.choice(_GLUE)} {picked[2]} {picked[3]} {rng.choice(_GLUE)} {picked[4]}"
    keywords: list[str] = []
    if rng.random() < spec.keyword_rate:
        keywords = rng.sample(rest, max(4, spec.query_length))
    return {"name": " ".join(_cap(w) for w in name), "name_words": name, "definition": definition, "keywords": keywords}


def _meta_source(meta: dict[str, Any]) -> list[str]:
    if meta["keywords"]:
        return list(meta["keywords"])
    if meta["definition"]:
        return [w for w in meta["definition"].lower().split() if w not in _GLUE]
    return list(meta["name_words"])


def generate_synthetic(spec: BenchSpec) -> SyntheticBench:
    rng = random.Random(spec.seed)
    words = _Words(rng)
    categories: list[Category] = []
    groups: list[tuple[str, list[str]]] = []

    for s in range(spec.n_segments):
        seg_id = f"{21 + s}"
        meta = _metadata(rng, words, spec)
        categories.append(Category(seg_id, 1, meta["name"], meta["definition"], tuple(meta["keywords"])))
        for m in range(spec.fanout[0]):
            mg_id = f"{seg_id}-{m + 1:02d}"
            meta = _metadata(rng, words, spec)
            categories.append(Category(mg_id, 2, meta["name"], meta["definition"], tuple(meta["keywords"]), seg_id))
            for g in range(spec.fanout[1]):
                gr_id = f"{mg_id}-{g + 1:02d}"
                meta = _metadata(rng, words, spec)
                categories.append(
                    Category(gr_id, 3, meta["name"], meta["definition"], tuple(meta["keywords"]), mg_id)
                )
                groups.append((gr_id, words.take(2)))

    attr_names = [f"{_cap(a)} {b}" for a, b in zip(words.take(40), words.take(40))]
    products: list[Product] = []
    pools: dict[str, dict[str, list[str]]] = {}
    metas: dict[str, dict[str, Any]] = {}
    per_group: dict[str, int] = {}

    for c in range(spec.n_commodity_classes):
        group_id, shared = groups[c % len(groups)]
        per_group[group_id] = per_group.get(group_id, 0) + 1
        cls_id = f"{group_id}-{per_group[group_id]:02d}"
        meta = _metadata(rng, words, spec)
        metas[cls_id] = meta
        categories.append(Category(cls_id, 4, meta["name"], meta["definition"], tuple(meta["keywords"]), group_id))
        core = words.take(2)
        varied = words.take(12)
        pools[cls_id] = {"core": core, "shared": list(shared), "varied": varied, "meta": _meta_source(meta)}
        class_attrs = rng.sample(attr_names, min(len(attr_names), spec.attributes_per_product[1] + 2))
        basic_cut = max(1, round(len(class_attrs) * spec.basic_fraction))
        basic_names = set(class_attrs[:basic_cut])

        for p in range(spec.products_per_class):
            article = f"{1000000 + c * 1000 + p:07d}"
            code = f"{rng.choice(_CONSONANTS).upper()}{rng.randint(1, 16)}"
            extra = rng.sample(varied, 2)
            n_attr = rng.randint(*spec.attributes_per_product)
            attrs: dict[str, Any] = {}
            for aname in sorted(rng.sample(class_attrs, min(n_attr, len(class_attrs)))):
                roll = rng.random()
                if roll < 0.45:
                    attrs[aname] = f"{rng.choice([0.2, 0.5, 1, 1.5, 2.5, 4, 6, 10, 16, 24, 230, 400])} {rng.choice(_UNITS)}"
                elif roll < 0.85:
                    attrs[aname] = rng.choice(varied)
                else:
                    attrs[aname] = rng.random() < 0.5
            products.append(
                Product(
                    article_number=article,
                    name=f"{_cap(core[0])} {core[1]} {code}",
                    short_description=f"{_cap(shared[0])} {shared[1]} {core[0]} {rng.choice(_GLUE)} {extra[0]} {extra[1]}",
                    commodity_class_id=cls_id,
                    attributes=attrs,
                    basic_attribute_names=frozenset(a for a in attrs if a in basic_names),
                )
            )

    taxonomy = build_taxonomy(categories)

    synonyms: dict[str, str] = {}
    user_word: dict[str, str] = {}
    for cls_id in sorted(pools):
        for w in pools[cls_id]["core"] + pools[cls_id]["shared"] + pools[cls_id]["meta"]:
            if w not in user_word:
                user_word[w] = words.take(1)[0]
                synonyms[user_word[w]] = w

    members: dict[str, set[str]] = {}
    for prod in products:
        members.setdefault(prod.commodity_class_id, set()).add(prod.article_number)

    dataset: list[EvalSample] = []
    for cohort, prefix in (("expert", "E"), ("trainee", "T")):
        for cls_id in sorted(pools):
            pool = pools[cls_id]
            product_side = pool["core"] + pool["shared"]
            for q in range(spec.queries_per_class):
                meta_left = list(pool["meta"])
                prod_left = list(product_side)
                tokens: list[str] = []
                for _ in range(spec.query_length):
                    from_meta = rng.random() < spec.mismatch_rate
                    source = meta_left if (from_meta and meta_left) or not prod_left else prod_left
                    if not source:
                        break
                    tokens.append(source.pop(rng.randrange(len(source))))
                if cohort == "trainee":
                    tokens = [user_word[t] if rng.random() < spec.synonym_rate else t for t in tokens]
                dataset.append(
                    EvalSample(
                        query_id=f"{prefix}{cls_id}-{q + 1}",
                        query_text=" ".join(tokens),
                        relevant_ids=frozenset(members[cls_id]),
                        cohort=cohort,
                    )
                )
    return SyntheticBench(spec, taxonomy, products, dataset, synonyms, pools)
