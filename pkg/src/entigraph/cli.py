"""Command line entry points.  Every command writes line-delimited JSON.

Exit status is 0 on success and 2 when an input fails validation (or, for
``verify-bounds``, when a bound violation is found).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Iterable, TextIO

from .corpus import CorpusError, EntityState, parse_corpus, write_corpus
from .detector import DetectorError, HallucinationEvent, detect_dialogue
from .entropy import verify_separation
from .harness import PatientScenario, ScenarioError, aggregate_metrics, entity_prf, simulate_session
from .knowledge_graph import (
    DEFAULT_DECAY,
    DEFAULT_THRESHOLD,
    DEFAULT_TOP_K,
    KGFormatError,
    UnknownEntityError,
    build_knowledge_graph,
    load_kg,
    related_entities,
    save_kg,
)
from .mitigation import DEFAULT_K, ResponseKnowledge, TemplateError, build_response_knowledge, load_templates, plan_clarification

EXIT_INVALID = 2

log = logging.getLogger("entigraph")


def _dump(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False, sort_keys=True)


def _emit(records: Iterable[dict], out: TextIO) -> None:
    for rec in records:
        out.write(_dump(rec) + "\n")


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _read_jsonl(path: str) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: malformed record: {exc.msg}", lineno) from None
    return out


def _load_kg(path: str):
    return load_kg(Path(path).read_bytes())


def _load_rk(path: str) -> ResponseKnowledge:
    return ResponseKnowledge.from_json(Path(path).read_text(encoding="utf-8"))


# -- commands ---------------------------------------------------------------


def cmd_build_kg(args) -> int:
    kg = build_knowledge_graph(parse_corpus(Path(args.corpus)), args.threshold)
    Path(args.out).write_bytes(save_kg(kg))
    print(_dump({"entities": len(kg.entities), "edges": len(kg.edges), "threshold": kg.threshold, "out": args.out}))
    return 0


def cmd_build_rk(args) -> int:
    rk = build_response_knowledge(parse_corpus(Path(args.corpus)), args.k)
    Path(args.out).write_text(rk.to_json(), encoding="utf-8")
    print(_dump({"entities": len(rk.entries), "k": rk.k, "out": args.out}))
    return 0


def cmd_detect(args) -> int:
    kg = _load_kg(args.kg)
    out, close = _open_out(args.events)
    try:
        for d in parse_corpus(Path(args.dialogues)):
            events, _ = detect_dialogue(kg, d)
            _emit((e.as_record() for e in events), out)
    finally:
        if close:
            out.close()
    return 0


def cmd_predict(args) -> int:
    """After each turn, rank the entities likely to come up next."""
    kg = _load_kg(args.kg)
    for d in parse_corpus(Path(args.dialogues)):
        history: list[tuple[str, int]] = []
        for turn, u in enumerate(d.turns):
            history += [(m.label, turn) for m in u.mentions if m.state is EntityState.MENTION and m.label in kg]
            result = related_entities(kg, history, args.top_k, args.decay)
            print(_dump({"dialogue_id": d.id, "turn": turn, "predicted": [[e, s] for e, s in result.ranked]}))
    return 0


def cmd_clarify(args) -> int:
    kg, rk = _load_kg(args.kg), _load_rk(args.rk)
    templates = load_templates(args.templates) if args.templates else None
    for rec in _read_jsonl(args.events):
        plan = plan_clarification(HallucinationEvent.from_record(rec), kg, rk, None, templates)
        print(_dump(plan.as_record()))
    return 0


def cmd_simulate(args) -> int:
    kg, rk = _load_kg(args.kg), _load_rk(args.rk)
    templates = load_templates(args.templates) if args.templates else None
    scenarios = [PatientScenario.from_record(r) for r in _read_jsonl(args.scenarios)]
    if not scenarios:
        raise ScenarioError("no scenarios")
    sessions = []
    for i, sc in enumerate(scenarios):
        m = simulate_session(kg, rk, sc, args.max_turns, args.seed + i, not args.no_mitigation, templates)
        sessions.append(m)
        rec = m.as_record()
        if not args.transcripts:
            rec.pop("transcript")
        print(_dump(rec))
    mean_ge, success = aggregate_metrics(sessions)
    print(_dump({"summary": True, "sessions": len(sessions), "mean_delta_ge": mean_ge, "success_rate": success,
                 "mitigation": not args.no_mitigation}))
    return 0


def _turn_items(rec) -> list:
    items = rec.get("entities", []) if isinstance(rec, dict) else rec
    out = []
    for x in items:
        if isinstance(x, dict):
            out.append((x["label"], x.get("class")))
        elif isinstance(x, list):
            out.append(tuple(x))
        else:
            out.append(x)
    return out


def cmd_eval_prf(args) -> int:
    pred = [_turn_items(r) for r in _read_jsonl(args.pred)]
    gold = [_turn_items(r) for r in _read_jsonl(args.gold)]
    print(_dump(entity_prf(pred, gold).as_record()))
    return 0


def cmd_verify_bounds(args) -> int:
    report = verify_separation(args.n_max)
    if args.rows:
        _emit((r.as_record() for r in report.rows), sys.stdout)
    for r in report.violations:
        print(_dump({"violation": r.as_record()}))
    margins = report.margins_by_n()
    print(_dump({
        "n_max": args.n_max,
        "sequences": len(report.rows),
        "violations": len(report.violations),
        "worst_margin": {str(n): lo for n, (lo, _) in sorted(margins.items())},
    }))
    return EXIT_INVALID if report.violations else 0


def cmd_synth(args) -> int:
    """Write a synthetic training corpus and scenario set."""
    from .synthetic import generate_scenarios, make_world

    world = make_world(seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_corpus(world.corpus, out_dir / "corpus.jsonl")
    scenarios = generate_scenarios(world, args.n, seed=args.seed)
    with (out_dir / "scenarios.jsonl").open("w", encoding="utf-8") as fh:
        for sc in scenarios:
            fh.write(sc.to_json() + "\n")
    print(_dump({"corpus": len(world.corpus), "scenarios": len(scenarios), "out_dir": str(out_dir)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entigraph", description="Entity-graph hallucination detection for consultations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-kg", help="build the co-occurrence knowledge graph")
    s.add_argument("corpus")
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_kg)

    s = sub.add_parser("build-rk", help="build per-entity doctor exemplars")
    s.add_argument("corpus")
    s.add_argument("--k", type=int, default=DEFAULT_K)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_rk)

    s = sub.add_parser("detect", help="detect patient hallucinations")
    s.add_argument("dialogues")
    s.add_argument("--kg", required=True)
    s.add_argument("--events", help="output file (default stdout)")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("predict", help="rank likely next entities after every turn")
    s.add_argument("dialogues")
    s.add_argument("--kg", required=True)
    s.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    s.add_argument("--decay", type=float, default=DEFAULT_DECAY)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("clarify", help="plan clarifying questions for detected events")
    s.add_argument("--kg", required=True)
    s.add_argument("--rk", required=True)
    s.add_argument("--events", required=True)
    s.add_argument("--templates")
    s.set_defaults(func=cmd_clarify)

    s = sub.add_parser("simulate", help="run scripted-patient sessions")
    s.add_argument("--kg", required=True)
    s.add_argument("--rk", required=True)
    s.add_argument("--scenarios", required=True)
    s.add_argument("--max-turns", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-mitigation", action="store_true")
    s.add_argument("--templates")
    s.add_argument("--transcripts", action="store_true", help="include transcripts in the output")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("eval", help="evaluation metrics")
    ev = s.add_subparsers(dest="metric", required=True)
    e = ev.add_parser("prf", help="entity precision / recall / F1")
    e.add_argument("--pred", required=True)
    e.add_argument("--gold", required=True)
    e.set_defaults(func=cmd_eval_prf)

    s = sub.add_parser("verify-bounds", help="check the removal entropy bounds separate")
    s.add_argument("--n-max", type=int, default=7)
    s.add_argument("--rows", action="store_true", help="print every sequence checked")
    s.set_defaults(func=cmd_verify_bounds)

    s = sub.add_parser("synth", help="write a synthetic corpus and scenario set")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)
    return p


_INVALID = (CorpusError, KGFormatError, ScenarioError, DetectorError, UnknownEntityError, TemplateError,
            ValueError, KeyError, FileNotFoundError)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
