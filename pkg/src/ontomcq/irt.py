"""One-parameter logistic (Rasch) item analysis over cohort response logs."""
from __future__ import annotations

import csv
import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

COHORTS = ("high", "medium", "low")
DEFAULT_THETAS = {"low": -1.5, "medium": 0.0, "high": 1.5}
BAND = 0.45
CHOICES_SPECIAL = ("SKIP", "INVALID")
CSV_HEADER = ("learner_id", "trait_level", "item_id", "choice")


class ResponseLogError(ValueError):
    pass


@dataclass(frozen=True)
class ResponseRecord:
    learner_id: str
    trait: str
    item_id: str
    choice: str


def p_correct(theta: float, alpha: float) -> float:
    """Probability that a learner of trait ``theta`` answers an item of difficulty ``alpha``."""
    if alpha == math.inf:
        return 0.0
    if alpha == -math.inf:
        return 1.0
    z = theta - alpha
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def alpha_from_p(theta: float, p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p == 0.0:
        return math.inf
    if p == 1.0:
        return -math.inf
    return theta - (math.log(p) - math.log1p(-p))


@dataclass
class ItemStats:
    item_id: str
    p_by_trait: dict[str, float | None] = field(default_factory=dict)
    alpha_by_trait: dict[str, float | None] = field(default_factory=dict)
    correct: dict[str, int] = field(default_factory=dict)
    answered: dict[str, int] = field(default_factory=dict)
    invalid: dict[str, int] = field(default_factory=dict)
    actual_level: str | None = None

    @property
    def undefined(self) -> bool:
        return any(v is None for v in self.p_by_trait.values())


def tabulate_p(records: Iterable[ResponseRecord], answer_key: Mapping[str, str],
               cohorts: Mapping[str, Iterable[str]] | None = None) -> dict[str, ItemStats]:
    """Per-item, per-cohort proportion correct.

    SKIP counts as wrong, INVALID is dropped from numerator and denominator, and a
    learner with no record for an item counts as wrong.  ``cohorts`` defaults to the
    grouping given by the records' trait column.
    """
    records = list(records)
    if cohorts is None:
        groups: dict[str, set[str]] = defaultdict(set)
        for r in records:
            groups[r.trait].add(r.learner_id)
        cohorts = groups
    cohorts = {t: set(ls) for t, ls in cohorts.items()}
    learner_trait = {}
    for t, ls in cohorts.items():
        for lid in ls:
            if lid in learner_trait and learner_trait[lid] != t:
                raise ResponseLogError(f"learner {lid} declared in cohorts {learner_trait[lid]} and {t}")
            learner_trait[lid] = t

    correct = defaultdict(int)
    invalid = defaultdict(int)
    seen = set()
    for n, r in enumerate(records, 1):
        if r.item_id not in answer_key:
            raise ResponseLogError(f"record {n}: unknown item {r.item_id!r}")
        t = learner_trait.get(r.learner_id)
        if t is None or t != r.trait:
            raise ResponseLogError(f"record {n}: learner {r.learner_id!r} outside declared cohort {r.trait!r}")
        if (r.learner_id, r.item_id) in seen:
            raise ResponseLogError(f"record {n}: duplicate response of {r.learner_id!r} to {r.item_id!r}")
        seen.add((r.learner_id, r.item_id))
        if r.choice == "INVALID":
            invalid[(r.item_id, t)] += 1
        elif r.choice == answer_key[r.item_id]:
            correct[(r.item_id, t)] += 1

    stats = {}
    for item in answer_key:
        st = ItemStats(item)
        for t, ls in cohorts.items():
            denom = len(ls) - invalid[(item, t)]
            st.correct[t] = correct[(item, t)]
            st.invalid[t] = invalid[(item, t)]
            st.answered[t] = denom
            st.p_by_trait[t] = correct[(item, t)] / denom if denom > 0 else None
        stats[item] = st
    return stats


def estimate_alphas(stats: Mapping[str, ItemStats],
                    thetas: Mapping[str, float] = DEFAULT_THETAS) -> dict[str, ItemStats]:
    for st in stats.values():
        for t, p in st.p_by_trait.items():
            st.alpha_by_trait[t] = None if p is None else alpha_from_p(thetas[t], p)
    return dict(stats)


def level_thresholds(thetas: Mapping[str, float] = DEFAULT_THETAS, band: float = BAND):
    """Inclusive cut points: high/medium need α at or above, low needs α at or below."""
    return {
        "high": thetas["high"] - band,
        "medium": thetas["medium"] - band,
        "low": thetas["low"] + band,
    }


def level_test(level: str, alpha: float, thetas: Mapping[str, float] = DEFAULT_THETAS,
               band: float = BAND) -> bool:
    cut = level_thresholds(thetas, band)[level]
    return alpha <= cut if level == "low" else alpha >= cut


def assign_actual_level(alpha_by_trait: Mapping[str, float | None] | ItemStats, predicted_level: str,
                        thetas: Mapping[str, float] = DEFAULT_THETAS, band: float = BAND) -> str | None:
    """Actual level for an item predicted at ``predicted_level``, or None when its test fails."""
    if isinstance(alpha_by_trait, ItemStats):
        alpha_by_trait = alpha_by_trait.alpha_by_trait
    alpha = alpha_by_trait.get(predicted_level)
    if alpha is None:
        raise ValueError(f"no alpha for trait {predicted_level!r}")
    return predicted_level if level_test(predicted_level, alpha, thetas, band) else None


@dataclass
class AgreementReport:
    per_level: dict[str, tuple[int, int]]  # level -> (matched, total)
    mismatches: list[tuple[str, str, str | None]]
    excluded: list[str]
    matched: int
    total: int

    @property
    def agreement(self) -> float:
        return self.matched / self.total if self.total else 0.0


def agreement_report(predicted: Mapping[str, str], actual: Mapping[str, str | None],
                     excluded: Iterable[str] = ()) -> AgreementReport:
    excluded = sorted(set(excluded))
    for item in excluded:
        log.warning("item %s excluded from agreement: undefined P", item)
    per_level = {lvl: [0, 0] for lvl in ("high", "medium", "low")}
    mismatches = []
    matched = total = 0
    for item, pred in predicted.items():
        if item in excluded:
            continue
        act = actual.get(item)
        per_level.setdefault(pred, [0, 0])
        per_level[pred][1] += 1
        total += 1
        if act == pred:
            per_level[pred][0] += 1
            matched += 1
        else:
            mismatches.append((item, pred, act))
    return AgreementReport({k: tuple(v) for k, v in per_level.items()}, mismatches, excluded,
                           matched, total)


def simulate_responses(items: Sequence[tuple[str, str, Sequence[str]]],
                       alphas: Mapping[str, float | Mapping[str, float]],
                       cohorts: Mapping[str, int], thetas: Mapping[str, float] = DEFAULT_THETAS,
                       seed: int = 0, skip_rate: float = 0.0,
                       invalid_rate: float = 0.0) -> list[ResponseRecord]:
    """Draw 1PL responses for synthetic cohorts.

    ``items`` are ``(item_id, key_letter, option_letters)``; ``alphas[item]`` is a single
    difficulty or a per-cohort mapping.  Each learner draws from its own generator
    seeded by ``(seed, learner_id)``, so the output does not depend on iteration order.
    """
    records = []
    for trait in COHORTS:
        for n in range(cohorts.get(trait, 0)):
            lid = f"{trait}-{n + 1:05d}"
            rng = random.Random(f"{seed}:{lid}")
            for item_id, key, letters in items:
                a = alphas[item_id]
                if isinstance(a, Mapping):
                    a = a[trait]
                u = rng.random()
                if u < invalid_rate:
                    choice = "INVALID"
                elif u < invalid_rate + skip_rate:
                    choice = "SKIP"
                elif rng.random() < p_correct(thetas[trait], a):
                    choice = key
                else:
                    wrong = [x for x in letters if x != key]
                    choice = rng.choice(wrong) if wrong else "SKIP"
                records.append(ResponseRecord(lid, trait, item_id, choice))
    return records


def read_responses(path) -> list[ResponseRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ResponseLogError(f"bad header {reader.fieldnames}; expected {','.join(CSV_HEADER)}")
        for n, row in enumerate(reader, 2):
            trait = row["trait_level"]
            if trait not in COHORTS:
                raise ResponseLogError(f"row {n}: trait_level {trait!r} not in {COHORTS}")
            choice = row["choice"].strip().upper()
            if not (choice in CHOICES_SPECIAL or (len(choice) == 1 and choice.isalpha())):
                raise ResponseLogError(f"row {n}: bad choice {row['choice']!r}")
            out.append(ResponseRecord(row["learner_id"], trait, row["item_id"], choice))
    return out


def write_responses(records: Iterable[ResponseRecord], fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow((r.learner_id, r.trait, r.item_id, r.choice))


def format_extended(x: float | None, digits: int = 2) -> str:
    if x is None:
        return "undef"
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    return f"{x:.{digits}f}"


def parse_extended(text: str) -> float:
    t = text.strip().lower()
    if t in ("+inf", "inf", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(t)


def format_table(stats: Mapping[str, ItemStats], predicted: Mapping[str, str]) -> str:
    """Plain-text table: P per cohort, α per cohort, actual and predicted level."""
    head = ("item", "P_high", "P_med", "P_low", "a_high", "a_med", "a_low", "actual", "predicted")
    rows = [head]
    for item, st in stats.items():
        rows.append((item,
                     *(format_extended(st.p_by_trait.get(t)) for t in COHORTS),
                     *(format_extended(st.alpha_by_trait.get(t)) for t in COHORTS),
                     st.actual_level or "--", predicted.get(item, "")))
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)
