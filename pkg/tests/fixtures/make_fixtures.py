"""Regenerate the small catalog fixtures.  Run from the repository root:

    python tests/fixtures/make_fixtures.py
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).parent

CATEGORIES = [
    {"id": "27", "level": 1, "name": "Electric engineering, automation, process control engineering",
     "definition": "Products for electric power distribution, automation and control",
     "keywords": ["electrical", "automation"]},
    {"id": "27-25", "level": 2, "name": "Terminal block, mounting rail", "parent_id": "27",
     "keywords": ["terminal", "din rail"]},
    {"id": "27-25-01", "level": 3, "name": "Terminal block systems", "parent_id": "27-25",
     "definition": "Modular terminal blocks mounted side by side on a rail"},
    {"id": "27-25-01-09", "level": 4, "name": "Measuring transformer disconnect terminal", "parent_id": "27-25-01",
     "definition": ("Terminal blocks with longitudinal and transverse disconnect function for the connection "
                    "of current and voltage transformers"),
     "keywords": ["transformer measurement", "longitudinal disconnect"]},
    {"id": "27-25-01-01", "level": 4, "name": "Feed-through terminal block", "parent_id": "27-25-01",
     "keywords": ["through", "wiring"]},
    {"id": "27-25-02", "level": 3, "name": "Mounting rails and accessories", "parent_id": "27-25"},
    {"id": "27-14", "level": 2, "name": "Control devices", "parent_id": "27",
     "definition": "Devices that switch or signal within control circuits"},
    {"id": "27-14-01", "level": 3, "name": "Relays", "parent_id": "27-14"},
    {"id": "27-14-01-01", "level": 4, "name": "Coupling relay", "parent_id": "27-14-01",
     "definition": "Relay that electrically isolates a control signal from a load circuit",
     "keywords": ["interface relay", "signal isolation", "KNX"]},
    {"id": "23", "level": 1, "name": "Machine element, fixing, mounting"},
    {"id": "23-05", "level": 2, "name": "Fixing", "parent_id": "23"},
    {"id": "23-05-01", "level": 3, "name": "Screws", "parent_id": "23-05"},
]


def products():
    rng = random.Random(7)
    out = []
    specs = [
        ("27-25-01-09", 18, "URTK", "Measuring terminal block, screw connection, slotted screw",
         ["Rated cross section [mm2]", "Rated voltage [V]", "Rated current [A]", "Color",
          "Number of connections", "Connection method", "Width [mm]", "Length [mm]",
          "Height [mm]", "Screw head"]),
        ("27-25-01-01", 20, "PT", "Feed-through terminal block, push-in connection",
         ["Rated cross section [mm2]", "Rated voltage [V]", "Rated current [A]", "Color",
          "Number of connections", "Connection method", "Width [mm]", "Length [mm]"]),
        ("27-14-01-01", 12, "PLC-RSC", "Relay module with plug-in miniature relay and screw connection",
         ["Coil voltage [V]", "Contact type", "Switching current [A]", "Width [mm]",
          "Number of contacts", "Interface"]),
    ]
    values = {
        "Rated cross section [mm2]": [1.5, 2.5, 4, 6, 10],
        "Rated voltage [V]": [400, 500, 630, 800],
        "Rated current [A]": [20, 24, 32, 41, 57],
        "Color": ["gray", "blue", "red", "black"],
        "Number of connections": [2, 3, 4],
        "Connection method": ["screw connection", "push-in connection", "spring-cage"],
        "Width [mm]": [5.2, 6.2, 8.2, 10.2, 14],
        "Length [mm]": [42.5, 48.5, 58.5, 66.5],
        "Height [mm]": [47, 51, 61],
        "Screw head": ["slotted", "cross-slotted"],
        "Coil voltage [V]": [12, 24, 120, 230],
        "Contact type": ["1 changeover", "2 changeover", "1 N/O"],
        "Switching current [A]": [6, 10, 16],
        "Number of contacts": [1, 2],
        "Interface": ["KNX", "none"],
    }
    n = 3040000
    for cls, count, family, desc, attrs in specs:
        for i in range(count):
            n += rng.randint(3, 40)
            size = rng.choice([1.5, 2.5, 4, 6, 10])
            name = f"{family} {size}" + (f"-{rng.choice(['P/P', 'DREHSI', 'TG'])}" if rng.random() < 0.4 else "")
            chosen = attrs if (cls == "27-25-01-09" and i == 0) else sorted(rng.sample(attrs, rng.randint(4, len(attrs))))
            record = {}
            for a in sorted(chosen):
                record[a] = size if a.startswith("Rated cross") else rng.choice(values[a])
            if rng.random() < 0.2:
                record["Halogen-free"] = rng.random() < 0.5
            basic = sorted(a for a in record if a in attrs[:4])
            out.append({
                "article_number": str(n),
                "name": name,
                "short_description": desc,
                "commodity_class_id": cls,
                "attributes": record,
                "basic_attribute_names": basic,
            })
    return out


def expert_fixture(catalog: list[dict]) -> tuple[list[dict], dict[str, list[str]]]:
    """35 expert queries with frozen ranked lists; queries E11 and E27 miss the top 5."""
    rng = random.Random(35)
    ids = [p["article_number"] for p in catalog]
    by_class: dict[str, list[str]] = {}
    for p in catalog:
        by_class.setdefault(p["commodity_class_id"], []).append(p["article_number"])
    topics = ["terminal blocks for KNX", "disconnect terminal 6 mm2", "coupling relay 24 V",
              "feed-through block grey", "relay with 2 changeover contacts"]
    samples, rankings = [], {}
    for q in range(1, 36):
        qid = f"E{q:02d}"
        pool = by_class[rng.choice(sorted(by_class))]
        relevant = sorted(rng.sample(pool, rng.randint(1, min(6, len(pool)))))
        others = [i for i in ids if i not in relevant]
        ranked = rng.sample(others, 20)
        if q in (11, 27):
            # first relevant just past the cutoff, or nowhere at all
            if q == 11:
                ranked.insert(5, relevant[0])
        elif q == 5:
            ranked = relevant + ranked
        else:
            for r in relevant:
                if rng.random() < 0.7:
                    ranked.insert(rng.randint(0, 12), r)
            if not any(r in ranked[:5] for r in relevant):
                ranked.insert(rng.randint(0, 4), relevant[0])
                ranked = list(dict.fromkeys(ranked))
        rankings[qid] = ranked[:20]
        samples.append({"query_id": qid, "query_text": f"{rng.choice(topics)} #{q}",
                        "relevant_ids": relevant, "cohort": "expert"})
    return samples, rankings


if __name__ == "__main__":
    (HERE / "taxonomy_small.json").write_text(json.dumps({"categories": CATEGORIES}, indent=1) + "\n")
    catalog = products()
    with open(HERE / "catalog_small.jsonl", "w") as fh:
        for p in catalog:
            fh.write(json.dumps(p, ensure_ascii=False) + "\n")
    samples, rankings = expert_fixture(catalog)
    with open(HERE / "expert_35.jsonl", "w") as fh:
        for s in samples:
            fh.write(json.dumps(s) + "\n")
    (HERE / "expert_35_rankings.json").write_text(json.dumps(rankings, indent=1) + "\n")
