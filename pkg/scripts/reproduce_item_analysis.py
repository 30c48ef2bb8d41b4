"""Recompute the reference item analysis and compare it with the published columns.

Writes a placeholder bank and a response log whose proportions match the published
P values, so the CLI can be run on them:

    python scripts/reproduce_item_analysis.py --out-dir /tmp/ref
    ontomcq calibrate --bank /tmp/ref/bank.json --responses /tmp/ref/responses.csv --format md
"""
from __future__ import annotations

import argparse
import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

from ontomcq import bank as bk
from ontomcq import irt

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class Config:
    table: Path = ROOT / "fixtures" / "reference_item_analysis.csv"
    cohort_size: int = 100
    out_dir: Path | None = None


def load(path):
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append({
                "item_id": r["item_id"],
                "p": {t: float(r[f"p_{t}"]) for t in irt.COHORTS},
                "alpha": {t: irt.parse_extended(r[f"alpha_{t}"]) for t in irt.COHORTS},
                "actual": None if r["actual_level"] == "--" else r["actual_level"],
                "predicted": r["predicted_level"],
            })
    return rows


def build_log(bank, rows, n):
    records = []
    for trait in irt.COHORTS:
        learners = [f"{trait}-{k + 1:05d}" for k in range(n)]
        for r in rows:
            item = bank.item(r["item_id"])
            wrong = next(x for x in item.letters if x != item.key_letter)
            hits = round(r["p"][trait] * n)
            records += [irt.ResponseRecord(lid, trait, item.id, item.key_letter if k < hits else wrong)
                        for k, lid in enumerate(learners)]
    return records


def main(cfg: Config):
    rows = load(cfg.table)
    print("cells where alpha computed from P differs from the published alpha by more than 0.005:")
    for r in rows:
        for t in irt.COHORTS:
            got = irt.alpha_from_p(irt.DEFAULT_THETAS[t], r["p"][t])
            want = r["alpha"][t]
            same = got == want if math.isinf(want) else abs(got - want) <= 0.005
            if not same:
                print(f"  {r['item_id']:>4} {t:<6} P={r['p'][t]:.2f} computed={irt.format_extended(got, 3)} "
                      f"published={irt.format_extended(want)}")

    pred = {r["item_id"]: r["predicted"] for r in rows}
    for label, key in (("published alpha", "alpha"), ("alpha from P", None)):
        actual = {}
        for r in rows:
            alphas = r["alpha"] if key else {t: irt.alpha_from_p(irt.DEFAULT_THETAS[t], r["p"][t])
                                             for t in irt.COHORTS}
            actual[r["item_id"]] = irt.assign_actual_level(alphas, r["predicted"])
        rep = irt.agreement_report(pred, actual)
        print(f"agreement using {label}: {rep.matched}/{rep.total} = {rep.agreement:.4f} "
              + " ".join(f"{k}={m}/{n}" for k, (m, n) in rep.per_level.items()))

    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        bank = bk.synthetic_bank([r["item_id"] for r in rows], [r["predicted"] for r in rows])
        bk.write_bank(bank, cfg.out_dir / "bank.json")
        with open(cfg.out_dir / "responses.csv", "w", newline="") as fh:
            irt.write_responses(build_log(bank, rows, cfg.cohort_size), fh)
        with open(cfg.out_dir / "alphas.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item_id", *(f"alpha_{t}" for t in irt.COHORTS)])
            for r in rows:
                w.writerow([r["item_id"], *(irt.format_extended(r["alpha"][t]) for t in irt.COHORTS)])
        print(f"wrote bank.json, responses.csv and alphas.csv to {cfg.out_dir}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--table", type=Path, default=Config.table)
    ap.add_argument("--cohort-size", type=int, default=Config.cohort_size)
    ap.add_argument("--out-dir", type=Path, default=None)
    a = ap.parse_args()
    main(Config(a.table, a.cohort_size, a.out_dir))
