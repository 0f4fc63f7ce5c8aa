#!/usr/bin/env python3
"""Generate the bundled synthetic benchmark under data/umls-synth/.

The graph mirrors the UMLS benchmark statistics exactly (135 entities,
46 relations, 5216/652/661 train/dev/test triples) and carries a latent
type structure: entities belong to groups, every relation connects a fixed
set of domain groups to a fixed set of range groups, and the dataset is a
dense subset of each relation's admissible pairs. Surface names share the
group noun, so a textual model can generalize to held-out triples.

Deterministic: re-running reproduces the committed files byte for byte.
"""

import random
from pathlib import Path

N_ENTITIES = 135
N_RELATIONS = 46
SPLITS = {"train": 5216, "dev": 652, "test": 661}
SEED = 20240911

GROUP_NOUNS = [
    "enzyme", "protein", "receptor", "antibiotic", "pathogen",
    "tissue", "organ", "cell", "lipid", "hormone",
    "vitamin", "bacterium", "virus", "fungus", "toxin",
]
QUALIFIERS = ["alpha", "beta", "gamma", "delta", "epsilon",
              "zeta", "eta", "theta", "iota"]

RELATION_STEMS = [
    "inhibits", "activates", "binds", "regulates", "degrades",
    "produces", "disrupts", "interacts with", "derived from", "part of",
    "affects", "causes", "treats", "prevents", "located in",
    "component of", "associated with", "result of", "process of", "measures",
    "secretes", "absorbs", "metabolizes", "transports", "synthesizes",
    "encodes", "expresses", "suppresses", "stabilizes", "cleaves",
    "phosphorylates", "oxidizes", "reduces", "catalyzes", "transforms",
    "carries", "stores", "releases", "detects", "targets",
    "modulates", "blocks", "enhances", "depletes", "converts", "neutralizes",
]


def main() -> None:
    rng = random.Random(SEED)
    assert len(RELATION_STEMS) == N_RELATIONS
    n_groups = len(GROUP_NOUNS)
    per_group = N_ENTITIES // n_groups
    assert per_group * n_groups == N_ENTITIES

    entities = []
    groups = {}
    for g, noun in enumerate(GROUP_NOUNS):
        for q in QUALIFIERS[:per_group]:
            eid = f"{noun}_{q}"
            entities.append(eid)
            groups.setdefault(g, []).append(eid)

    # every relation links 1-2 domain groups to 1-2 range groups
    population = []
    seen = set()
    for rel in RELATION_STEMS:
        nd = rng.choice([1, 2])
        nr = rng.choice([1, 2])
        domain = rng.sample(range(n_groups), nd)
        rnge = rng.sample(range(n_groups), nr)
        for gd in domain:
            for gr in rnge:
                for h in groups[gd]:
                    for t in groups[gr]:
                        if h == t:
                            continue
                        key = (h, rel, t)
                        if key not in seen:
                            seen.add(key)
                            population.append(key)

    total_needed = sum(SPLITS.values())
    if len(population) < total_needed:
        raise SystemExit(f"population too small: {len(population)} < {total_needed}")
    rng.shuffle(population)
    chosen = population[:total_needed]

    out = Path(__file__).resolve().parent.parent / "data" / "umls-synth"
    out.mkdir(parents=True, exist_ok=True)

    at = 0
    used_entities = set()
    used_relations = set()
    for split, count in SPLITS.items():
        rows = chosen[at:at + count]
        at += count
        with open(out / f"{split}.tsv", "w") as f:
            for h, r, t in rows:
                f.write(f"{h}\t{r.replace(' ', '_')}\t{t}\n")
        if split == "train":
            for h, r, t in rows:
                used_entities.update((h, t))
                used_relations.add(r)

    if len(used_relations) != N_RELATIONS:
        raise SystemExit("some relation is missing from train; change SEED")
    if len(used_entities) != N_ENTITIES:
        raise SystemExit("some entity is missing from train; change SEED")

    with open(out / "entity2text.txt", "w") as f:
        for e in entities:
            f.write(f"{e}\t{e.replace('_', ' ')}\n")
    with open(out / "relation2text.txt", "w") as f:
        for rel in RELATION_STEMS:
            f.write(f"{rel.replace(' ', '_')}\t{rel}\n")

    print(f"wrote {total_needed} triples over {N_ENTITIES} entities, "
          f"{N_RELATIONS} relations -> {out}")


if __name__ == "__main__":
    main()
