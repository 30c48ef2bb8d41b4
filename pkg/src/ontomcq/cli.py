"""Command-line entry point: ``ontomcq generate|simulate|calibrate|inspect``."""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys

from . import bank as bk
from . import difficulty as dm
from . import irt
from .generator import DEFAULT_SHAPES, PatternShape, all_shapes, potential_set, Stem
from .ontology import OntologyError, connectivity, load_ontology, satisfiers

log = logging.getLogger("ontomcq")

LEVEL_ORDER = ("low", "medium", "high")


def _setup_logging():
    level = os.environ.get("ONTOMCQ_LOG", "warn").lower()
    level = {"warn": "warning"}.get(level, level)
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _triple(text: str, conv, what: str) -> dict[str, object]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"{what} needs three comma-separated values (low,med,high)")
    try:
        return dict(zip(LEVEL_ORDER, map(conv, parts)))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad {what}: {e}") from None


def thetas_arg(text):
    return _triple(text, float, "--thetas")


def sizes_arg(text):
    return _triple(text, int, "--cohort-sizes")


def parse_patterns(text: str, max_size: int | None) -> list[PatternShape]:
    shapes = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        if tok == "all":
            shapes.extend(all_shapes(max_size or 2))
        else:
            shapes.append(PatternShape.parse(tok))
    if max_size is not None:
        kept = [s for s in shapes if s.size <= max_size]
        for s in shapes:
            if s.size > max_size:
                log.warning("pattern %s exceeds --max-size %d; dropped", s.name or s.key(), max_size)
        shapes = kept
    return shapes


def cmd_generate(args) -> int:
    shapes = parse_patterns(args.patterns, args.max_size) if args.patterns else list(DEFAULT_SHAPES)
    bank = bk.generate_bank(args.ontology, shapes, args.options, args.trait, args.seed,
                            args.limit, targeted=not args.random_distractors)
    bk.write_bank(bank, args.out)
    s = bank.metadata["summary"]
    print(f"seed={args.seed} generated={s['generated']} valid={s['valid']} "
          f"with_choice_set={s['with_choice_set']} "
          + " ".join(f"{k}={v}" for k, v in s["per_level"].items()))
    for name, c in s["per_pattern"].items():
        print(f"  pattern {name}: generated={c['generated']} valid={c['valid']}")
    return 0


def cmd_simulate(args) -> int:
    bank = bk.read_bank(args.bank)
    alphas = bk.read_alpha_file(args.alphas) if args.alphas else None
    records = bk.simulate_bank(bank, args.cohort_sizes, args.thetas, args.seed, alphas,
                               args.skip_rate, args.invalid_rate)
    buf = io.StringIO()
    irt.write_responses(records, buf)
    bk.atomic_write(args.out, buf.getvalue())
    print(f"seed={args.seed} items={len(bank.usable_items())} rows={len(records)}")
    return 0


def cmd_calibrate(args) -> int:
    bank = bk.read_bank(args.bank)
    records = irt.read_responses(args.responses)
    report = bk.calibrate(bank, records, args.thetas)
    text = report.to_json() if args.format == "json" else report.to_markdown()
    if args.out:
        bk.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    summary = sys.stdout if args.out else sys.stderr
    print(irt.format_table(report.stats, report.predicted), file=summary)
    ag = report.agreement
    print(f"agreement={ag.matched}/{ag.total}={ag.agreement:.4f}", file=summary)
    return 0


def _inspect_breakdown(o, item: bk.BankItem) -> dict:
    conds = [bk.decode_condition(c) for c in item.conditions]
    stem = Stem(item.pivot, (), tuple(conds), PatternShape.parse(item.shape))
    rows = []
    for c in conds:
        rows.append({"condition": repr(c), "answer_space": len(satisfiers(o, c)),
                     "predicate_popularity": dm.predicate_popularity(o, c),
                     "depth_ratio": dm.depth_ratio(o, c, stem)})
    out = {"conditions": rows, "potential_set_size": len(potential_set(o, stem)),
           "connectivity": {}}
    if item.options:
        key = next(opt["instance"] for opt in item.options if opt["is_key"])
        for opt in item.options:
            inst = opt["instance"]
            out["connectivity"][opt["letter"]] = connectivity(o, inst)
            if inst != key:
                out.setdefault("similarity", {})[opt["letter"]] = dm.instance_similarity(o, key, inst, stem)
    return out


def cmd_inspect(args) -> int:
    bank = bk.read_bank(args.bank)
    item = bank.item(args.item)
    print(item.stem)
    for opt in item.options or ():
        print(f"  {opt['letter'].lower()}. {opt['text']}{'  (key)' if opt['is_key'] else ''}")
    if item.options:
        print("  SKIP\n  INVALID")
    doc = {k: v for k, v in vars(item).items() if k not in ("stem", "options")}
    if args.ontology:
        doc["recomputed"] = _inspect_breakdown(load_ontology(args.ontology), item)
    print(json.dumps(bk._enc(doc), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ontomcq", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate and score a question bank from an ontology")
    g.add_argument("--ontology", required=True)
    g.add_argument("--patterns", default="p1,p2,p3",
                   help="comma list of p1/p2/p3, 'all', or slot shapes such as in+data")
    g.add_argument("--max-size", type=int, default=None)
    g.add_argument("--options", type=int, default=3)
    g.add_argument("--trait", choices=dm.TRAITS, default="average")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--limit", type=int, default=None)
    g.add_argument("--random-distractors", action="store_true",
                   help="draw distractors at random instead of targeting the stem's level")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="simulate 1PL responses for a bank")
    s.add_argument("--bank", required=True)
    s.add_argument("--alphas", default=None,
                   help="CSV of planted difficulties; default maps predicted level to its theta")
    s.add_argument("--cohort-sizes", type=sizes_arg, default=sizes_arg("18,18,18"))
    s.add_argument("--thetas", type=thetas_arg, default=thetas_arg("-1.5,0,1.5"))
    s.add_argument("--skip-rate", type=float, default=0.0)
    s.add_argument("--invalid-rate", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="item analysis of a response log against a bank")
    c.add_argument("--bank", required=True)
    c.add_argument("--responses", required=True)
    c.add_argument("--thetas", type=thetas_arg, default=thetas_arg("-1.5,0,1.5"))
    c.add_argument("--format", choices=("json", "md"), default="json")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_calibrate)

    i = sub.add_parser("inspect", help="print one item with its intermediate scores")
    i.add_argument("--bank", required=True)
    i.add_argument("--item", required=True)
    i.add_argument("--ontology", default=None, help="recompute per-condition breakdown")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OntologyError, bk.BankError, irt.ResponseLogError, dm.DegenerateBatchError,
            OSError, ValueError) as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
