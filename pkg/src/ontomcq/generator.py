"""Pattern-based stems, potential sets, choice sets and question text."""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .ontology import (
    CONCEPT,
    DATATYPE,
    INCOMING,
    OUTGOING,
    RDF_TYPE,
    Condition,
    Literal,
    Ontology,
    humanize,
    is_blank,
    local_name,
    satisfiers,
    satisfiers_of_all,
)

OUT_SLOT = "out"
IN_SLOT = "in"
DATA_SLOT = "data"
TYPE_SLOT = "type"
SLOT_KINDS = (IN_SLOT, OUT_SLOT, DATA_SLOT, TYPE_SLOT)

_SLOT_FOR_KIND = {OUTGOING: OUT_SLOT, INCOMING: IN_SLOT, DATATYPE: DATA_SLOT, CONCEPT: TYPE_SLOT}

# above this many distractor combinations, targeted selection goes greedy
MAX_EXHAUSTIVE_COMBINATIONS = 50_000


class InsufficientDistractorsError(ValueError):
    def __init__(self, candidate_count: int, needed: int):
        self.candidate_count = candidate_count
        self.needed = needed
        super().__init__(f"insufficient distractors: {candidate_count} eligible, {needed} needed")


@dataclass(frozen=True, order=True)
class Slot:
    kind: str
    predicate: str | None = None  # optional fixed role / concept

    def __post_init__(self):
        if self.kind not in SLOT_KINDS:
            raise ValueError(f"unknown slot kind {self.kind!r}")

    def token(self) -> str:
        return self.kind if self.predicate is None else f"{self.kind}:{self.predicate}"

    def matches(self, c: Condition) -> bool:
        return _SLOT_FOR_KIND[c.kind] == self.kind and self.predicate in (None, c.predicate)


@dataclass(frozen=True)
class PatternShape:
    slots: tuple[Slot, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.slots:
            raise ValueError("a pattern shape needs at least one slot")

    @property
    def size(self) -> int:
        return len(self.slots)

    def key(self) -> str:
        return "+".join(s.token() for s in self.slots)

    @classmethod
    def parse(cls, text: str) -> "PatternShape":
        """``"in+data"``, ``"type:http://x#Movie+out"`` or a named shape ``p1``/``p2``/``p3``."""
        if text.lower() in NAMED_SHAPES:
            return NAMED_SHAPES[text.lower()]
        slots = []
        for tok in text.split("+"):
            kind, _, pred = tok.strip().partition(":")
            slots.append(Slot(kind, pred or None))
        return cls(tuple(slots))


P1 = PatternShape((Slot(IN_SLOT), Slot(DATA_SLOT)), name="p1")
P2 = PatternShape((Slot(IN_SLOT), Slot(IN_SLOT)), name="p2")
P3 = PatternShape((Slot(OUT_SLOT),), name="p3")
NAMED_SHAPES = {"p1": P1, "p2": P2, "p3": P3}
DEFAULT_SHAPES = (P1, P2, P3)


def all_shapes(max_size: int) -> list[PatternShape]:
    """Every unbound shape (multiset of slot kinds) of size 1..max_size."""
    out = []
    for n in range(1, max_size + 1):
        for combo in itertools.combinations_with_replacement(SLOT_KINDS, n):
            out.append(PatternShape(tuple(Slot(k) for k in combo)))
    return out


@dataclass(frozen=True)
class Stem:
    pivot: str
    triples: tuple[tuple, ...]
    conditions: tuple[Condition, ...]
    shape: PatternShape
    text: str = field(default="", compare=False)


@dataclass(frozen=True)
class ChoiceSet:
    key: str
    distractors: tuple[str, ...]
    options: tuple[str, ...]  # presentation order

    @property
    def key_index(self) -> int:
        return self.options.index(self.key)


def _slot_candidates(o: Ontology, x: str, slot: Slot):
    if slot.kind == OUT_SLOT:
        for r, i in o.outgoing(x):
            if not is_blank(i):
                yield Condition.outgoing(r, i), (x, r, i)
    elif slot.kind == IN_SLOT:
        for r, i in o.incoming(x):
            if not is_blank(i):
                yield Condition.incoming(r, i), (i, r, x)
    elif slot.kind == DATA_SLOT:
        for r, v in o.data_values(x):
            yield Condition(DATATYPE, r, v), (x, r, v)
    else:
        for c in o.types(x):
            yield Condition.concept(c), (x, RDF_TYPE, c)


def _stems_for(o: Ontology, x: str, shape: PatternShape) -> list[Stem]:
    per_slot = []
    for slot in shape.slots:
        cands = sorted(((c, t) for c, t in _slot_candidates(o, x, slot) if slot.matches(c)),
                       key=lambda ct: ct[0].sort_key())
        per_slot.append(cands)
    seen = set()
    stems = []
    for combo in itertools.product(*per_slot):
        conds = tuple(c for c, _ in combo)
        key = frozenset(conds)
        if len(key) != len(conds) or key in seen:
            continue
        seen.add(key)
        stem = Stem(x, tuple(t for _, t in combo), conds, shape)
        stems.append(stem)
    return stems


def enumerate_stems(o: Ontology, shapes: Iterable[PatternShape],
                    limit: int | None = None) -> list[Stem]:
    shapes = sorted(set(shapes), key=PatternShape.key)
    stems = []
    for x in sorted(i for i in o.instances if not is_blank(i)):
        for shape in shapes:
            for s in _stems_for(o, x, shape):
                stems.append(Stem(s.pivot, s.triples, s.conditions, s.shape,
                                  verbalize_stem(o, s)))
                if limit is not None and len(stems) >= limit:
                    return stems
    return stems


def potential_set(o: Ontology, s: Stem) -> frozenset[str]:
    """Intersection of the pivot-side domain / range / named concept of every slot."""
    pool = o.instances
    for c in s.conditions:
        if c.kind == CONCEPT:
            concepts = {c.predicate}
        elif c.kind in (OUTGOING, DATATYPE):
            concepts = o.domains.get(c.predicate, set())
        else:
            concepts = o.ranges.get(c.predicate, set())
        for concept in concepts:
            pool = pool & satisfiers(o, Condition.concept(concept))
    return pool


def distractor_candidates(o: Ontology, s: Stem, key: str | None = None) -> list[str]:
    key = s.pivot if key is None else key
    alternates = satisfiers_of_all(o, s.conditions)
    out = []
    for d in potential_set(o, s):
        if d == key or d in alternates or is_blank(d):
            continue
        if any(o.holds(c, d) for c in s.conditions):
            out.append(d)
    return sorted(out)


TARGET_QUANTILES = {"low": 1 / 6, "medium": 1 / 2, "high": 5 / 6}


def _nearest_to_target(combos: Sequence[tuple[str, ...]], score, target: str):
    scored = [(score(c), c) for c in combos]
    values = sorted(v for v, _ in scored)
    pos = TARGET_QUANTILES[target] * (len(values) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(values) - 1)
    goal = values[lo] + (values[hi] - values[lo]) * (pos - lo)
    return min(scored, key=lambda vc: (abs(vc[0] - goal), vc[1]))[1]


def build_choice_set(o: Ontology, s: Stem, option_count: int = 3, target: str | None = None,
                     scorer: Callable[[str, tuple[str, ...]], float] | None = None,
                     seed: int | str = 0) -> ChoiceSet:
    """Pick ``option_count - 1`` distractors for the stem's pivot and shuffle the options.

    With ``target`` the distractor combination whose choice-set score is closest to
    that quantile of all candidate combinations is taken; otherwise a seeded draw.
    ``scorer(key, distractors)`` returns the choice-set score; it defaults to
    :class:`ontomcq.difficulty.ChoiceSetScorer`.
    """
    if option_count < 2:
        raise ValueError("option_count must be at least 2")
    key = s.pivot
    needed = option_count - 1
    cands = distractor_candidates(o, s, key)
    if len(cands) < needed:
        raise InsufficientDistractorsError(len(cands), needed)
    rng = random.Random(seed)
    if target is None:
        distractors = tuple(rng.sample(cands, needed))
    else:
        if target not in TARGET_QUANTILES:
            raise ValueError(f"target must be one of {sorted(TARGET_QUANTILES)}")
        if scorer is None:
            from .difficulty import ChoiceSetScorer
            scorer = ChoiceSetScorer(o, s)
        if math.comb(len(cands), needed) <= MAX_EXHAUSTIVE_COMBINATIONS:
            distractors = _nearest_to_target(list(itertools.combinations(cands, needed)),
                                             lambda c: scorer(key, c), target)
        else:
            chosen: tuple[str, ...] = ()
            for _ in range(needed):
                rest = [(*chosen, d) for d in cands if d not in chosen]
                chosen = _nearest_to_target(rest, lambda c: scorer(key, c), target)
            distractors = tuple(sorted(chosen))
    options = [key, *distractors]
    rng.shuffle(options)
    return ChoiceSet(key, tuple(distractors), tuple(options))


# text rendering

OPTION_LETTERS = "abcdefghijklmnopqrstuvwxyz"
TRAILING_OPTIONS = ("SKIP", "INVALID")


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def concept_label(o: Ontology, c: str) -> str:
    if c in o.labels:
        return _capitalize(o.labels[c])
    return _capitalize(humanize(local_name(c)))


def role_phrase(o: Ontology, r: str) -> str:
    return o.labels[r] if r in o.labels else humanize(local_name(r))


def instance_label(o: Ontology, i) -> str:
    if isinstance(i, Literal):
        return i.lexical
    return _capitalize(o.label(i))


def article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def verbalize_stem(o: Ontology, s: Stem) -> str:
    types = [c for c in s.conditions if c.kind == CONCEPT]
    clauses = []
    if types:
        head_label = concept_label(o, types[0].predicate)
        head = f"Choose {article(head_label)} {head_label}"
        for c in types[1:]:
            lab = concept_label(o, c.predicate)
            clauses.append(f"is {article(lab)} {lab}")
    else:
        head = "Choose the one"
    for c in s.conditions:
        if c.kind in (OUTGOING, DATATYPE):
            clauses.append(f"{role_phrase(o, c.predicate)} {instance_label(o, c.value)}")
        elif c.kind == INCOMING:
            clauses.append(f"{instance_label(o, c.value)} {role_phrase(o, c.predicate)}")
    if not clauses:
        return head + "."
    return f"{head}, which {' and '.join(clauses)}."


def option_lines(o: Ontology, c: ChoiceSet) -> list[str]:
    labels = [instance_label(o, i) for i in c.options] + list(TRAILING_OPTIONS)
    return [f"{OPTION_LETTERS[n]}. {lab}" for n, lab in enumerate(labels)]


def verbalize(o: Ontology, s: Stem, c: ChoiceSet | None = None) -> str:
    """Stem sentence on the first line, one labelled option per following line."""
    lines = [verbalize_stem(o, s)]
    if c is not None:
        lines.extend(option_lines(o, c))
    return "\n".join(lines)
