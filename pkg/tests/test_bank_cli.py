import io
import json
import logging
import math

import pytest

from ontomcq import bank as bk
from ontomcq import difficulty as dm
from ontomcq import irt
from ontomcq.cli import main
from ontomcq.generator import PatternShape, enumerate_stems, P3
from ontomcq.ontology import load_ontology

from .conftest import FILMS, FIXTURES, MOVIES, hand_built_log, reference_bank


@pytest.fixture(autouse=True)
def fixed_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def run(*argv):
    return main([str(a) for a in argv])


def test_generate_fixture_p3(tmp_path, capsys):
    out = tmp_path / "bank.json"
    assert run("generate", "--ontology", MOVIES, "--patterns", "p3", "--options", 2, "--seed", 3,
               "--out", out) == 0
    bank = bk.read_bank(out)
    assert len(bank.items) == 5
    assert all(isinstance(it.valid, bool) for it in bank.items)
    assert bank.metadata["seed"] == 3
    assert "seed=3 generated=5" in capsys.readouterr().out


def test_generate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run("generate", "--ontology", FILMS, "--seed", 9, "--out", path) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_default_timestamp_is_stable(tmp_path, monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        run("generate", "--ontology", MOVIES, "--out", path)
    assert a.read_bytes() == b.read_bytes()


def test_bank_round_trip(tmp_path):
    bank = bk.generate_bank(FILMS, seed=1)
    path = tmp_path / "bank.json"
    bk.write_bank(bank, path)
    again = bk.read_bank(path)
    assert again == bank
    assert again.to_json() == path.read_text()
    assert len(bank.usable_items()) > 10


def test_bank_scores_rederivable():
    o = load_ontology(FILMS)
    bank = bk.generate_bank(FILMS, seed=2)
    stems = enumerate_stems(o, [PatternShape.parse(p) for p in ("p1", "p2", "p3")])
    raw = [dm.d_expert(o, s) for s in stems]
    for it, s, r in zip(bank.items, stems, raw):
        assert it.stem == s.text
        assert it.stem_scores["d_expert_raw"] == bk.rnd(r)
    for it in bank.usable_items():
        cs = it.choice_set_scores
        assert math.isclose(it.d_predicted["average"], it.stem_scores["d_a"] * cs["dc"], rel_tol=1e-10)
        assert sum(o["is_key"] for o in it.options) == 1
        assert it.valid and it.stem_level in ("low", "medium", "high")


def test_invalid_and_skipped_items_are_kept():
    bank = bk.generate_bank(FILMS, seed=0)
    invalid = [it for it in bank.items if not it.valid]
    assert invalid and all(it.skip_reason == "invalid stem" and it.options is None for it in invalid)
    skipped = [it for it in bank.items if it.valid and it.options is None]
    assert skipped and all("insufficient distractors" in it.skip_reason for it in skipped)
    s = bank.metadata["summary"]
    assert s["generated"] == len(bank.items)
    assert s["with_choice_set"] == sum(s["per_level"].values()) == len(bank.usable_items())


def test_generate_empty_ontology(tmp_path, caplog):
    onto = tmp_path / "empty.ttl"
    onto.write_text("")
    out = tmp_path / "bank.json"
    with caplog.at_level(logging.WARNING):
        assert run("generate", "--ontology", onto, "--out", out) == 0
    assert bk.read_bank(out).items == []
    assert "no stems" in caplog.text


def test_generate_errors(tmp_path):
    assert run("generate", "--ontology", tmp_path / "missing.ttl", "--out", tmp_path / "x.json") == 1
    bad = tmp_path / "bad.ttl"
    bad.write_text("@prefix : <http://x#> .\n:a :b\n")
    assert run("generate", "--ontology", bad, "--out", tmp_path / "x.json") == 1
    assert not (tmp_path / "x.json").exists()


def test_patterns_all_and_max_size(tmp_path, capsys):
    out = tmp_path / "bank.json"
    assert run("generate", "--ontology", MOVIES, "--patterns", "all", "--max-size", 1, "--out", out) == 0
    params = bk.read_bank(out).metadata["parameters"]
    assert params["patterns"] == ["in", "out", "data", "type"]


def _write_reference_bank(tmp_path, rows):
    bank = reference_bank(rows)
    path = tmp_path / "ref.json"
    bk.write_bank(bank, path)
    return bank, path


def test_simulate_row_count_and_determinism(tmp_path, reference_rows):
    _, path = _write_reference_bank(tmp_path, reference_rows)
    outs = [tmp_path / "r1.csv", tmp_path / "r2.csv"]
    for out in outs:
        assert run("simulate", "--bank", path, "--alphas", FIXTURES / "reference_alphas.csv",
                   "--cohort-sizes", "18,18,18", "--seed", 4, "--out", out) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert len(irt.read_responses(outs[0])) == 24 * 54


def test_simulate_zero_cohort(tmp_path, reference_rows):
    _, path = _write_reference_bank(tmp_path, reference_rows)
    out = tmp_path / "r.csv"
    assert run("simulate", "--bank", path, "--cohort-sizes", "0,5,5", "--out", out) == 0
    recs = irt.read_responses(out)
    assert len(recs) == 24 * 10 and not any(r.trait == "low" for r in recs)


def test_simulate_bad_alpha_file(tmp_path, reference_rows):
    _, path = _write_reference_bank(tmp_path, reference_rows)
    bad = tmp_path / "a.csv"
    bad.write_text("id,difficulty\ni1,0\n")
    assert run("simulate", "--bank", path, "--alphas", bad, "--out", tmp_path / "r.csv") == 1
    assert run("simulate", "--bank", tmp_path / "nope.json", "--out", tmp_path / "r.csv") == 1


def _thumb(level, alpha):
    return {"high": alpha >= 1.05, "medium": alpha >= -0.45, "low": alpha <= -1.05}[level]


def test_calibrate_hand_built_reference_log(tmp_path, reference_rows):
    bank, path = _write_reference_bank(tmp_path, reference_rows)
    log = tmp_path / "log.csv"
    buf = io.StringIO()
    irt.write_responses(hand_built_log(bank, reference_rows), buf)
    log.write_text(buf.getvalue())
    out = tmp_path / "report.json"
    assert run("calibrate", "--bank", path, "--responses", log, "--out", out) == 0
    report = json.loads(out.read_text())
    thetas = {"high": 1.5, "medium": 0.0, "low": -1.5}
    expected = 0
    for row, item in zip(reference_rows, report["items"]):
        assert item["p"] == pytest.approx(row["p"])
        p = row["p"][row["predicted"]]
        alpha = math.inf if p == 0 else -math.inf if p == 1 else \
            thetas[row["predicted"]] - math.log(p / (1 - p))
        want = row["predicted"] if _thumb(row["predicted"], alpha) else None
        assert item["actual_level"] == want
        expected += want == row["predicted"]
    # the proportions, not the rounded published alphas, drive this report
    assert expected == 16
    assert report["agreement"]["matched"] == 16 and report["agreement"]["total"] == 24


def test_calibrate_excludes_all_invalid_item(tmp_path, reference_rows):
    bank, path = _write_reference_bank(tmp_path, reference_rows[:3])
    recs = bk.simulate_bank(bank, {"low": 6, "medium": 6, "high": 6}, seed=1)
    recs = [irt.ResponseRecord(r.learner_id, r.trait, r.item_id,
                               "INVALID" if r.item_id == "i2" else r.choice) for r in recs]
    log = tmp_path / "log.csv"
    with open(log, "w", newline="") as fh:
        irt.write_responses(recs, fh)
    out = tmp_path / "report.md"
    assert run("calibrate", "--bank", path, "--responses", log, "--format", "md", "--out", out) == 0
    text = out.read_text()
    assert "warning: item i2 excluded" in text
    report = bk.calibrate(bank, recs)
    assert report.agreement.excluded == ["i2"] and report.agreement.total == 2
    assert report.to_dict()["agreement"]["excluded"] == ["i2"]


def test_calibrate_schema_error_names_row(tmp_path, reference_rows, caplog):
    _, path = _write_reference_bank(tmp_path, reference_rows)
    log = tmp_path / "log.csv"
    log.write_text("learner_id,trait_level,item_id,choice\nh1,high,i1,A\nh1,genius,i2,A\n")
    with caplog.at_level(logging.ERROR):
        assert run("calibrate", "--bank", path, "--responses", log) == 1
    assert "row 3" in caplog.text


def test_inspect(tmp_path, capsys):
    out = tmp_path / "bank.json"
    run("generate", "--ontology", FILMS, "--out", out)
    item = bk.read_bank(out).usable_items()[0]
    capsys.readouterr()
    assert run("inspect", "--bank", out, "--item", item.id, "--ontology", FILMS) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == item.stem
    doc = json.loads(text[text.index("{"):])
    assert doc["predicted_level"] == item.predicted_level
    assert len(doc["recomputed"]["conditions"]) == len(item.conditions)
    assert run("inspect", "--bank", out, "--item", "nope") == 1


def test_bank_rejects_duplicates_and_versions():
    item = bk.BankItem("q1", "s", "", "", "", [], {}, True)
    with pytest.raises(bk.BankError):
        bk.QuestionBank({}, [item, item])
    with pytest.raises(bk.BankError, match="schema version"):
        bk.QuestionBank.from_json('{"schema_version": 99, "metadata": {}, "items": []}')


def test_extended_reals_survive_round_trip():
    bank = bk.QuestionBank({"x": math.inf}, [bk.BankItem("q1", "s", "", "", "", [], {"d": -math.inf}, True)])
    again = bk.QuestionBank.from_json(bank.to_json())
    assert again.items[0].stem_scores["d"] == -math.inf
    assert '"-inf"' in bank.to_json()


def test_p3_fixture_has_no_choice_sets():
    # single-condition stems admit no distractor that shares yet fails a condition
    o = load_ontology(MOVIES)
    items = bk.build_items(o, enumerate_stems(o, [P3]), option_count=2)
    assert all(it.options is None for it in items)
