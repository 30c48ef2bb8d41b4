import csv
import math
from pathlib import Path

import pytest

from ontomcq.bank import synthetic_bank
from ontomcq.generator import Slot, PatternShape, Stem
from ontomcq.irt import ResponseRecord
from ontomcq.ontology import Condition, load_ontology

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
MOVIES = FIXTURES / "movies.ttl"
FILMS = FIXTURES / "films.ttl"
NS = "http://example.org/movies#"


def M(name):
    return NS + name


@pytest.fixture(scope="session")
def movies():
    return load_ontology(MOVIES)


@pytest.fixture
def movie_stem():
    """Stem {Movie, isDirectedBy d1} pivoted on m1."""
    conds = (Condition.concept(M("Movie")), Condition.outgoing(M("isDirectedBy"), M("d1")))
    shape = PatternShape((Slot("type"), Slot("out")))
    return Stem(M("m1"), (), conds, shape)


def _ext(text):
    t = text.strip()
    if t == "+inf":
        return math.inf
    if t == "-inf":
        return -math.inf
    return float(t)


def load_reference_rows():
    """Published item-analysis rows: P and alpha per cohort, actual and predicted level."""
    rows = []
    with open(FIXTURES / "reference_item_analysis.csv", newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append({
                "item_id": r["item_id"],
                "p": {t: float(r[f"p_{t}"]) for t in ("high", "medium", "low")},
                "alpha": {t: _ext(r[f"alpha_{t}"]) for t in ("high", "medium", "low")},
                "actual": None if r["actual_level"] == "--" else r["actual_level"],
                "predicted": r["predicted_level"],
            })
    return rows


@pytest.fixture(scope="session")
def reference_rows():
    return load_reference_rows()


def reference_bank(rows, seed=0):
    return synthetic_bank([r["item_id"] for r in rows], [r["predicted"] for r in rows], seed=seed)


def hand_built_log(bank, rows, cohort_size=100):
    """Deterministic log whose per-cohort proportions equal the published P values."""
    records = []
    for trait in ("high", "medium", "low"):
        learners = [f"{trait}-{n + 1:05d}" for n in range(cohort_size)]
        for r in rows:
            item = bank.item(r["item_id"])
            key = item.key_letter
            wrong = next(x for x in item.letters if x != key)
            k = round(r["p"][trait] * cohort_size)
            for n, lid in enumerate(learners):
                records.append(ResponseRecord(lid, trait, item.id, key if n < k else wrong))
    return records


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary hook prints them after the run."""
    def record(name, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
