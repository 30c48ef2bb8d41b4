"""Question-bank persistence and the generate / simulate / calibrate pipelines."""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
import os
import random
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence

from . import difficulty as dm
from . import irt
from .generator import (
    DEFAULT_SHAPES,
    ChoiceSet,
    InsufficientDistractorsError,
    PatternShape,
    Stem,
    build_choice_set,
    enumerate_stems,
    instance_label,
)
from .ontology import Condition, Literal, Ontology, load_ontology

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SIG_DIGITS = 12


class BankError(ValueError):
    pass


def rnd(x: float) -> float:
    """Round to the precision the bank stores, so written and re-read values are identical."""
    if not math.isfinite(x):
        return x
    return float(f"{x:.{SIG_DIGITS}g}")


def _enc(x):
    if isinstance(x, float):
        if x == math.inf:
            return "+inf"
        if x == -math.inf:
            return "-inf"
        return x
    if isinstance(x, dict):
        return {k: _enc(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_enc(v) for v in x]
    return x


def _dec_num(x):
    if isinstance(x, str) and x in ("+inf", "-inf"):
        return irt.parse_extended(x)
    if isinstance(x, dict):
        return {k: _dec_num(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_dec_num(v) for v in x]
    return x


def encode_condition(c: Condition) -> dict:
    v = c.value
    if isinstance(v, Literal):
        v = {"literal": v.lexical, "datatype": v.datatype, "lang": v.lang}
    return {"kind": c.kind, "predicate": c.predicate, "value": v}


def decode_condition(d: Mapping) -> Condition:
    v = d["value"]
    if isinstance(v, dict):
        v = Literal(v["literal"], v.get("datatype"), v.get("lang"))
    return Condition(d["kind"], d["predicate"], v)


@dataclass
class BankItem:
    id: str
    stem: str
    shape: str
    shape_name: str
    pivot: str
    conditions: list[dict]
    stem_scores: dict[str, Any]
    valid: bool
    options: list[dict] | None = None
    choice_set_scores: dict[str, Any] | None = None
    d_predicted: dict[str, float] | None = None
    stem_level: str | None = None
    predicted_level: str | None = None
    skip_reason: str | None = None

    @property
    def usable(self) -> bool:
        return self.options is not None and self.predicted_level is not None

    @property
    def key_letter(self) -> str:
        for opt in self.options or ():
            if opt["is_key"]:
                return opt["letter"]
        raise BankError(f"item {self.id} has no key option")

    @property
    def letters(self) -> list[str]:
        return [opt["letter"] for opt in self.options or ()]


@dataclass
class QuestionBank:
    metadata: dict[str, Any]
    items: list[BankItem] = field(default_factory=list)

    def __post_init__(self):
        ids = [it.id for it in self.items]
        if len(ids) != len(set(ids)):
            raise BankError("duplicate item ids in bank")

    def usable_items(self) -> list[BankItem]:
        return [it for it in self.items if it.usable]

    def answer_key(self) -> dict[str, str]:
        return {it.id: it.key_letter for it in self.usable_items()}

    def item(self, item_id: str) -> BankItem:
        for it in self.items:
            if it.id == item_id:
                return it
        raise BankError(f"no item {item_id!r} in bank")

    def to_json(self) -> str:
        doc = {"schema_version": SCHEMA_VERSION, "metadata": self.metadata,
               "items": [asdict(it) for it in self.items]}
        return json.dumps(_enc(doc), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "QuestionBank":
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise BankError(f"unsupported bank schema version {doc.get('schema_version')!r}")
        items = []
        for raw in doc["items"]:
            for k in ("stem_scores", "choice_set_scores", "d_predicted"):
                if raw.get(k) is not None:
                    raw[k] = _dec_num(raw[k])
            items.append(BankItem(**raw))
        return cls(doc["metadata"], items)


def atomic_write(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bank(bank: QuestionBank, path):
    atomic_write(path, bank.to_json())


def read_bank(path) -> QuestionBank:
    with open(path, encoding="utf-8") as fh:
        return QuestionBank.from_json(fh.read())


# generate


def _stem_scores_dict(s: dm.StemScores) -> dict:
    return {"d_expert_raw": rnd(s.d_expert_raw), "d_beginner_raw": rnd(s.d_beginner_raw),
            "d_average_raw": rnd(s.d_average_raw), "d_e": rnd(s.d_e), "d_b": rnd(s.d_b),
            "d_a": rnd(s.d_a), "valid": s.valid}


def _cs_scores_dict(c: dm.ChoiceSetScores) -> dict:
    return {"sim_per_distractor": [rnd(v) for v in c.sim_per_distractor],
            "d_similarity": rnd(c.d_similarity), "d_popularity": rnd(c.d_popularity),
            "dc": rnd(c.dc), "popularity_capped": c.popularity_capped}


def _timestamp(ontology_path) -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = float(epoch) if epoch else os.stat(ontology_path).st_mtime
    return dt.datetime.fromtimestamp(int(ts), dt.timezone.utc).isoformat()


def _options(o: Ontology, cs: ChoiceSet) -> list[dict]:
    return [{"letter": chr(ord("A") + n), "instance": inst, "text": instance_label(o, inst),
             "is_key": inst == cs.key} for n, inst in enumerate(cs.options)]


def build_items(o: Ontology, stems: Sequence[Stem], option_count: int = 3,
                trait: str = "average", seed: int = 0, targeted: bool = True) -> list[BankItem]:
    """Score, validate and bucket stems, then attach choice sets to the valid ones."""
    if trait not in dm.TRAITS:
        raise ValueError(f"trait must be one of {dm.TRAITS}")
    scores = dm.score_stems(o, stems)
    items = []
    for n, (s, sc) in enumerate(zip(stems, scores), 1):
        items.append(BankItem(
            id=f"q{n:04d}", stem=s.text, shape=s.shape.key(), shape_name=s.shape.name,
            pivot=s.pivot, conditions=[encode_condition(c) for c in s.conditions],
            stem_scores=_stem_scores_dict(sc), valid=sc.valid,
            skip_reason=None if sc.valid else "invalid stem"))

    valid_idx = [n for n, sc in enumerate(scores) if sc.valid]
    if valid_idx:
        stem_levels = dm.assign_predicted_levels([scores[n].select(trait) for n in valid_idx])
        for n, lvl in zip(valid_idx, stem_levels):
            items[n].stem_level = lvl

    built = []
    for n in valid_idx:
        item, stem, sc = items[n], stems[n], scores[n]
        scorer = dm.ChoiceSetScorer(o, stem)
        try:
            cs = build_choice_set(o, stem, option_count,
                                  target=item.stem_level if targeted else None,
                                  scorer=scorer, seed=f"{seed}:{item.id}")
        except InsufficientDistractorsError as e:
            log.warning("item %s skipped: %s", item.id, e)
            item.skip_reason = str(e)
            continue
        cs_scores = scorer.scores(cs.key, cs.distractors)
        item.options = _options(o, cs)
        item.choice_set_scores = _cs_scores_dict(cs_scores)
        item.d_predicted = {t: rnd(dm.d_predicted(sc, cs_scores.dc, t)) for t in dm.TRAITS}
        built.append(item)
    if built:
        levels = dm.assign_predicted_levels([it.d_predicted[trait] for it in built])
        for it, lvl in zip(built, levels):
            it.predicted_level = lvl
    return items


def generate_bank(ontology_path, shapes: Sequence[PatternShape] = DEFAULT_SHAPES,
                  option_count: int = 3, trait: str = "average", seed: int = 0,
                  limit: int | None = None, targeted: bool = True) -> QuestionBank:
    with open(ontology_path, "rb") as fh:
        raw = fh.read()
    o = load_ontology(ontology_path)
    stems = enumerate_stems(o, shapes, limit)
    if not stems:
        log.warning("no stems generated from %s", ontology_path)
    items = build_items(o, stems, option_count, trait, seed, targeted)
    summary = summarize(items, shapes)
    meta = {
        "ontology": {"path": os.fspath(ontology_path), "sha256": hashlib.sha256(raw).hexdigest(),
                     "concepts": len(o.concepts), "object_roles": len(o.object_roles),
                     "datatype_roles": len(o.datatype_roles), "instances": len(o.instances)},
        "parameters": {"patterns": [s.name or s.key() for s in shapes], "option_count": option_count,
                       "trait": trait, "targeted_distractors": targeted, "limit": limit},
        "seed": seed,
        "timestamp": _timestamp(ontology_path),
        "summary": summary,
    }
    return QuestionBank(meta, items)


def summarize(items: Sequence[BankItem], shapes: Sequence[PatternShape] = ()) -> dict:
    per_shape = {}
    for s in shapes:
        mine = [it for it in items if it.shape == s.key()]
        per_shape[s.name or s.key()] = {"generated": len(mine),
                                        "valid": sum(it.valid for it in mine)}
    usable = [it for it in items if it.usable]
    return {
        "generated": len(items),
        "valid": sum(it.valid for it in items),
        "with_choice_set": len(usable),
        "per_level": {lvl: sum(it.predicted_level == lvl for it in usable) for lvl in dm.LEVELS},
        "per_pattern": per_shape,
    }


def synthetic_bank(item_ids: Sequence[str], predicted_levels: Sequence[str],
                   option_count: int = 3, seed: int = 0) -> QuestionBank:
    """Bank of placeholder items carrying only ids, option letters and predicted levels.

    Used to drive simulation and calibration without an ontology.
    """
    rng = random.Random(seed)
    items = []
    for item_id, lvl in zip(item_ids, predicted_levels):
        key = rng.randrange(option_count)
        opts = [{"letter": chr(ord("A") + n), "instance": f"urn:option:{item_id}:{n}",
                 "text": f"option {n + 1}", "is_key": n == key} for n in range(option_count)]
        items.append(BankItem(id=item_id, stem=f"Item {item_id}", shape="", shape_name="",
                              pivot="", conditions=[], stem_scores={}, valid=True, options=opts,
                              predicted_level=lvl))
    return QuestionBank({"synthetic": True, "seed": seed}, items)


# simulate


def read_alpha_file(path) -> dict[str, float | dict[str, float]]:
    """CSV with ``item_id`` plus either ``alpha`` or ``alpha_high,alpha_medium,alpha_low``."""
    out: dict[str, Any] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        per_trait = all(f"alpha_{t}" in cols for t in irt.COHORTS)
        if "item_id" not in cols or not (per_trait or "alpha" in cols):
            raise BankError(f"malformed alpha file {path}: columns {cols}")
        for n, row in enumerate(reader, 2):
            try:
                if per_trait:
                    out[row["item_id"]] = {t: irt.parse_extended(row[f"alpha_{t}"]) for t in irt.COHORTS}
                else:
                    out[row["item_id"]] = irt.parse_extended(row["alpha"])
            except (ValueError, TypeError) as e:
                raise BankError(f"malformed alpha file {path}, row {n}: {e}") from None
    return out


def simulate_bank(bank: QuestionBank, cohort_sizes: Mapping[str, int],
                  thetas: Mapping[str, float] = irt.DEFAULT_THETAS, seed: int = 0,
                  alphas: Mapping[str, Any] | None = None, skip_rate: float = 0.0,
                  invalid_rate: float = 0.0) -> list[irt.ResponseRecord]:
    items = bank.usable_items()
    if alphas is None:
        alphas = {it.id: thetas[it.predicted_level] for it in items}
    missing = [it.id for it in items if it.id not in alphas]
    if missing:
        raise BankError(f"no alpha for items {missing}")
    plan = [(it.id, it.key_letter, it.letters) for it in items]
    return irt.simulate_responses(plan, alphas, cohort_sizes, thetas, seed, skip_rate, invalid_rate)


# calibrate


@dataclass
class CalibrationReport:
    stats: dict[str, irt.ItemStats]
    predicted: dict[str, str]
    agreement: irt.AgreementReport
    thetas: dict[str, float]
    warnings: list[str]

    def to_dict(self) -> dict:
        items = []
        for item_id, st in self.stats.items():
            items.append({
                "item_id": item_id,
                "p": {t: st.p_by_trait.get(t) for t in irt.COHORTS},
                "alpha": {t: st.alpha_by_trait.get(t) for t in irt.COHORTS},
                "answered": {t: st.answered.get(t) for t in irt.COHORTS},
                "invalid": {t: st.invalid.get(t) for t in irt.COHORTS},
                "actual_level": st.actual_level,
                "predicted_level": self.predicted.get(item_id),
            })
        ag = self.agreement
        return _enc({
            "schema_version": SCHEMA_VERSION,
            "thetas": self.thetas,
            "items": items,
            "agreement": {
                "matched": ag.matched, "total": ag.total, "fraction": ag.agreement,
                "per_level": {k: {"matched": m, "total": t} for k, (m, t) in ag.per_level.items()},
                "mismatches": [{"item_id": i, "predicted": p, "actual": a} for i, p, a in ag.mismatches],
                "excluded": ag.excluded,
            },
            "warnings": self.warnings,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_markdown(self) -> str:
        lines = ["| item | P high | P medium | P low | α high | α medium | α low | actual | predicted |",
                 "|---|---|---|---|---|---|---|---|---|"]
        f = irt.format_extended
        for item_id, st in self.stats.items():
            cells = [item_id, *(f(st.p_by_trait.get(t)) for t in irt.COHORTS),
                     *(f(st.alpha_by_trait.get(t)) for t in irt.COHORTS),
                     st.actual_level or "--", self.predicted.get(item_id, "")]
            lines.append("| " + " | ".join(cells) + " |")
        ag = self.agreement
        lines.append("")
        lines.append(f"Agreement: {ag.matched}/{ag.total} = {ag.agreement:.4f}")
        for lvl, (m, t) in ag.per_level.items():
            lines.append(f"- {lvl}: {m}/{t}")
        for w in self.warnings:
            lines.append(f"- warning: {w}")
        return "\n".join(lines) + "\n"


def calibrate(bank: QuestionBank, records: Sequence[irt.ResponseRecord],
              thetas: Mapping[str, float] = irt.DEFAULT_THETAS) -> CalibrationReport:
    key = bank.answer_key()
    predicted = {it.id: it.predicted_level for it in bank.usable_items()}
    stats = irt.estimate_alphas(irt.tabulate_p(records, key), thetas)
    warnings = []
    excluded = []
    for item_id, st in stats.items():
        lvl = predicted[item_id]
        if st.alpha_by_trait.get(lvl) is None:
            excluded.append(item_id)
            warnings.append(f"item {item_id} excluded: P undefined for the {lvl} cohort")
            continue
        st.actual_level = irt.assign_actual_level(st, lvl, thetas)
    agreement = irt.agreement_report(predicted, {i: s.actual_level for i, s in stats.items()},
                                     excluded)
    return CalibrationReport(stats, predicted, agreement, dict(thetas), warnings)
