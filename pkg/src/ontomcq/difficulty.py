"""Stem and choice-set difficulty scores, validity, and level bucketing.

All logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .generator import ChoiceSet, Stem
from .ontology import (
    CONCEPT,
    Condition,
    Ontology,
    condition_profile,
    connectivity,
    instance_popularity,
    satisfiers,
    satisfiers_of_all,
    strictly_below,
)

TRAITS = ("beginner", "average", "expert")
LEVELS = ("low", "medium", "high")
POPULARITY_FLOOR = 1e-6


class DegenerateBatchError(ValueError):
    pass


@dataclass(frozen=True)
class StemScores:
    d_expert_raw: float
    d_beginner_raw: float
    d_average_raw: float
    d_e: float
    d_b: float
    d_a: float
    valid: bool

    def select(self, trait: str) -> float:
        return {"expert": self.d_e, "average": self.d_a, "beginner": self.d_b}[trait]


@dataclass(frozen=True)
class ChoiceSetScores:
    sim_per_distractor: tuple[float, ...]
    d_similarity: float
    d_popularity: float
    dc: float
    popularity_capped: bool = False


@dataclass(frozen=True)
class ItemScore:
    stem: StemScores
    choice_set: ChoiceSetScores
    trait: str
    d_predicted: float
    predicted_level: str


# stem measures


def predicate_popularity(o: Ontology, p: Condition) -> float:
    sat = satisfiers(o, p)
    if not sat:
        raise ValueError(f"undefined popularity: empty answer space for {p!r}")
    return sum(instance_popularity(o, p, i) for i in sat) / len(sat)


def d_expert(o: Ontology, s: Stem) -> float:
    total = 0.0
    for p in s.conditions:
        space = len(satisfiers(o, p))
        total += math.log1p(space) / max(1.0, predicate_popularity(o, p))
    return total


def _chain_ratio(members: set[str], p: str, above) -> float:
    """Position of ``p`` (top = 1) over the length of the longest chain through it.

    ``above(a, b)`` is the strict order a ⊏ b restricted to ``members``.
    """
    up_memo: dict[str, int] = {}
    down_memo: dict[str, int] = {}

    def up(a):
        if a not in up_memo:
            up_memo[a] = 1 + max((up(b) for b in members if above(a, b)), default=0)
        return up_memo[a]

    def down(a):
        if a not in down_memo:
            down_memo[a] = 1 + max((down(b) for b in members if above(b, a)), default=0)
        return down_memo[a]

    position = up(p)
    return position / (position + down(p) - 1)


def _role_below(o: Ontology, a: str, b: str) -> bool:
    return b in o.role_supers(a) and a not in o.role_supers(b)


def depth_ratio(o: Ontology, p, s: Stem) -> float:
    """Relative depth of a concept or role within the pivot's own hierarchy chains.

    ``p`` may be a :class:`Condition` or a bare concept / role identifier.
    """
    x = s.pivot
    if isinstance(p, Condition):
        is_concept = p.kind == CONCEPT
        name = p.predicate
    else:
        name = p
        is_concept = p in o.concepts
    if is_concept:
        members = set(o.types(x))
        if name not in members:
            raise ValueError(f"depth ratio: {name} is not a concept of pivot {x}")
        return _chain_ratio(members, name, lambda a, b: strictly_below(o, a, b))
    members = {r for r, _ in o.outgoing(x)} | {r for r, _ in o.incoming(x)}
    members |= {r for r, _ in o.data_values(x)}
    if name not in members:
        raise ValueError(f"depth ratio: {name} is not a role incident to pivot {x}")
    return _chain_ratio(members, name, lambda a, b: _role_below(o, a, b))


def d_beginner(o: Ontology, s: Stem) -> float:
    total = 0.0
    for p in s.conditions:
        space = len(satisfiers(o, p))
        total += depth_ratio(o, p, s) / (1.0 + math.log1p(space))
    return total


def d_average(d_expert_value: float, d_beginner_value: float) -> float:
    return (d_expert_value + d_beginner_value) / 2


def normalize_batch(scores: Sequence[float]) -> list[float]:
    top = max(scores, default=0.0)
    if top <= 0:
        raise DegenerateBatchError("degenerate batch: no positive score to normalise by")
    return [v / top for v in scores]


def validate_stem(d_e: float, d_b: float) -> bool:
    return d_e < d_b


def score_stems(o: Ontology, stems: Sequence[Stem]) -> list[StemScores]:
    """Raw and batch-normalised stem scores for one generation run."""
    if not stems:
        return []
    raw_e = [d_expert(o, s) for s in stems]
    raw_b = [d_beginner(o, s) for s in stems]
    raw_a = [d_average(e, b) for e, b in zip(raw_e, raw_b)]
    ne, nb, na = normalize_batch(raw_e), normalize_batch(raw_b), normalize_batch(raw_a)
    return [StemScores(e, b, a, de, db, da, validate_stem(de, db))
            for e, b, a, de, db, da in zip(raw_e, raw_b, raw_a, ne, nb, na)]


# choice-set measures


def generic_similarity(o: Ontology, k: str, d: str) -> float:
    ak, ad = condition_profile(o, k), condition_profile(o, d)
    shared = len(satisfiers_of_all(o, ak & ad))
    return 0.5 * (len(satisfiers_of_all(o, ak)) + len(satisfiers_of_all(o, ad))) / shared


def instance_similarity(o: Ontology, k: str, d: str, s: Stem) -> float:
    if k == d:
        raise ValueError("instance similarity needs two distinct instances")
    ck = {c for c in s.conditions if o.holds(c, k)}
    cd = {c for c in s.conditions if o.holds(c, d)}
    if not ck & cd:
        raise ValueError(f"no shared stem condition between {k} and {d}")
    first = len(satisfiers_of_all(o, ck | cd)) / len(satisfiers_of_all(o, ck & cd))
    return first + generic_similarity(o, k, d) ** 2


def d_similarity(sim_values: Sequence[float]) -> float:
    if not sim_values:
        raise ValueError("similarity mean of an empty choice set")
    return sum(sim_values) / len(sim_values)


def popularity_total(key_connectivity: int, distractor_connectivities: Sequence[int]) -> float:
    return 0.5 * key_connectivity + sum(math.log1p(c) for c in distractor_connectivities)


def popularity_score(key_connectivity: int, distractor_connectivities: Sequence[int]) -> float:
    total = popularity_total(key_connectivity, distractor_connectivities)
    return 1.0 / max(POPULARITY_FLOOR, total)


def d_popularity(o: Ontology, x: ChoiceSet) -> float:
    return popularity_score(connectivity(o, x.key), [connectivity(o, d) for d in x.distractors])


def dc(d_similarity_value: float, d_popularity_value: float) -> float:
    return d_similarity_value * d_popularity_value


class ChoiceSetScorer:
    """Memoised choice-set scoring for one stem.

    Calling the scorer returns the combined choice-set score; :meth:`scores` the full record.
    """

    def __init__(self, o: Ontology, stem: Stem):
        self.o = o
        self.stem = stem
        self._sim: dict[tuple[str, str], float] = {}
        self._conn: dict[str, int] = {}

    def connectivity(self, x: str) -> int:
        if x not in self._conn:
            self._conn[x] = connectivity(self.o, x)
        return self._conn[x]

    def similarity(self, k: str, d: str) -> float:
        if (k, d) not in self._sim:
            self._sim[(k, d)] = instance_similarity(self.o, k, d, self.stem)
        return self._sim[(k, d)]

    def scores(self, key: str, distractors: Sequence[str]) -> ChoiceSetScores:
        sims = tuple(self.similarity(key, d) for d in distractors)
        dsim = d_similarity(sims)
        total = popularity_total(self.connectivity(key), [self.connectivity(d) for d in distractors])
        dpop = 1.0 / max(POPULARITY_FLOOR, total)
        return ChoiceSetScores(sims, dsim, dpop, dc(dsim, dpop), total < POPULARITY_FLOOR)

    def __call__(self, key: str, distractors: Sequence[str]) -> float:
        return self.scores(key, distractors).dc


def score_choice_set(o: Ontology, s: Stem, x: ChoiceSet) -> ChoiceSetScores:
    return ChoiceSetScorer(o, s).scores(x.key, x.distractors)


# combined


def d_predicted(scores: StemScores, dc_value: float, trait: str) -> float:
    if trait not in TRAITS:
        raise ValueError(f"trait must be one of {TRAITS}")
    return scores.select(trait) * dc_value


def tertile_thresholds(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(np.percentile(arr, 100 / 3)), float(np.percentile(arr, 200 / 3))


def assign_predicted_levels(values: Sequence[float]) -> list[str]:
    """Tertile buckets of the batch; values on a cut point go to the lower bucket."""
    if not len(values):
        raise ValueError("cannot bucket an empty batch")
    lo, hi = tertile_thresholds(values)
    return ["low" if v <= lo else "medium" if v <= hi else "high" for v in values]
