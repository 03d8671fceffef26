"""Command-line entry point: ``hrlsent {gen,train,eval,viz}``.

Every command writes ``manifest.json`` into ``--out`` before doing any work.
Failures print a single line ``error: <category>: <message>`` to stderr and
exit with the category's code (2 usage, 3 data/format, 4 state, 5 numeric).
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Config, load_config
from .data import SyntheticSpec, generate_synthetic, load_corpus, write_corpus
from .errors import DomainError, HrlError, ShapeError, UsageError
from .evaluation import evaluate, normalize_rewards
from .report import render_selection_report
from .trainer import Trainer

log = logging.getLogger("hrlsent")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _existing(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out: str, command: str, argv, config: dict, paths: dict) -> dict:
    """RunManifest: resolved settings, paths, command line, start time, version."""
    os.makedirs(out, exist_ok=True)
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "paths": paths,
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "version": f"v{__version__}",
    }
    _write_json(os.path.join(out, "manifest.json"), manifest)
    return manifest


def _resolve_config(args) -> Config:
    cfg = load_config(_existing(args.config, "config")) if args.config else Config()
    if args.seed is not None:
        cfg = cfg.with_overrides([f"seed={args.seed}"])
    return cfg.with_overrides(args.set or [])


# ------------------------------------------------------------------ commands


def cmd_gen(args, argv):
    data = {}
    if args.spec:
        with open(_existing(args.spec, "spec"), encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"spec is not valid JSON: {exc}") from exc
    for pair in args.set or []:
        key, sep, raw = pair.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        try:
            data[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            data[key.strip()] = raw
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        spec = SyntheticSpec.from_dict(data).validate()
    except (DomainError, TypeError) as exc:
        raise UsageError(f"invalid synthetic spec: {exc}") from exc
    corpus_path = os.path.join(args.out, "corpus.jsonl")
    write_manifest(args.out, "gen", argv, data, {"spec": args.spec, "corpus": corpus_path})
    corpus = generate_synthetic(spec)
    write_corpus(corpus, corpus_path)
    print(f"wrote {len(corpus.documents)} documents to {corpus_path}")
    return 0


def cmd_train(args, argv):
    cfg = _resolve_config(args)
    corpus = load_corpus(_existing(args.corpus, "corpus"))
    paths = {"corpus": args.corpus, "config": args.config, "out": args.out}
    write_manifest(args.out, "train", argv, cfg.to_dict(), paths)
    trainer = Trainer.from_corpus(corpus, cfg)
    train = corpus.split("train")
    trainer.pretrain_low(train)
    trainer.pretrain_high(train)
    trainer.train_policies(train)

    save_checkpoint(os.path.join(args.out, "checkpoint.bin"), trainer)
    high, low = trainer.reward_curves()
    curves = {}
    for name, series in (("high", high), ("low", low)):
        clean = [x for x in series if x is not None]
        try:
            curves[name] = normalize_rewards(clean).to_dict()
        except DomainError:
            curves[name] = {"raw": clean, "normalized": None}
    _write_json(os.path.join(args.out, "rewards.json"), curves)
    with open(os.path.join(args.out, "train_log.jsonl"), "w", encoding="utf-8") as fh:
        for e in trainer.history:
            fh.write(json.dumps(e.__dict__, sort_keys=True) + "\n")
    print(f"checkpoint written to {os.path.join(args.out, 'checkpoint.bin')}")
    return 0


def _load_pair(args):
    trainer = load_checkpoint(_existing(args.checkpoint, "checkpoint"))
    model = trainer.model
    if getattr(args, "config", None) or getattr(args, "set", None):
        cfg = _resolve_config(args)
        ck = model.config
        if (cfg.d, cfg.num_classes) != (ck.d, ck.num_classes):
            raise ShapeError(f"config has d={cfg.d}, C={cfg.num_classes}; checkpoint has "
                             f"d={ck.d}, C={ck.num_classes}")
    corpus = load_corpus(_existing(args.corpus, "corpus"))
    if corpus.num_classes != model.config.num_classes:
        raise ShapeError(f"corpus has {corpus.num_classes} classes, checkpoint "
                         f"{model.config.num_classes}")
    return trainer, corpus


def cmd_eval(args, argv):
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    trainer, corpus = _load_pair(args)
    seed = 0 if args.seed is None else args.seed
    write_manifest(args.out, "eval", argv, trainer.model.config.to_dict(),
                   {"checkpoint": args.checkpoint, "corpus": args.corpus, "split": args.split,
                    "decode": args.decode, "threads": args.threads, "seed": seed})
    result = evaluate(trainer.model, corpus.split(args.split), greedy=args.decode == "greedy",
                      seed=seed, threads=args.threads, split=args.split)
    with open(os.path.join(args.out, "metrics.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(result.to_jsonl())
    summary = result.summary()
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary)
    sys.stdout.write(summary)
    return 0


def cmd_viz(args, argv):
    trainer, corpus = _load_pair(args)
    model = trainer.model
    doc = corpus.by_id(args.doc_id)
    model.aspect_vector(args.aspect)
    seed = 0 if args.seed is None else args.seed
    write_manifest(args.out, "viz", argv, model.config.to_dict(),
                   {"checkpoint": args.checkpoint, "corpus": args.corpus, "doc_id": args.doc_id,
                    "aspect": args.aspect, "decode": args.decode, "seed": seed})
    ro = model.rollout(doc, args.aspect, None, np.random.default_rng(seed),
                       greedy=args.decode == "greedy")
    query = next((q for q in doc.queries if q.aspect == args.aspect), None)
    rep = render_selection_report(doc, args.aspect, ro,
                                  None if query is None else query.rating,
                                  None if query is None else query.gold_clause_mask)
    for name, body in (("report.txt", rep.text), ("report.html", rep.html)):
        with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
            fh.write(body)
    sys.stdout.write(rep.text)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hrlsent", description="Clause- and word-selecting sentiment classifier.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--version", action="version", version=f"hrlsent v{__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, config=True):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, help="RNG seed")
        if config:
            sp.add_argument("--config", help="JSON config file")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                            help="override one config field (repeatable)")

    def decode(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--greedy", dest="decode", action="store_const", const="greedy",
                       help="deterministic decode, select iff p >= 0.5 (default)")
        g.add_argument("--sample", dest="decode", action="store_const", const="sample",
                       help="sample selections from the policies")
        sp.set_defaults(decode="greedy")

    g = sub.add_parser("gen", help="generate a synthetic corpus")
    g.add_argument("--spec", help="JSON file of synthetic-corpus settings")
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a spec field")
    common(g, config=False)

    t = sub.add_parser("train", help="pretrain both encoders, then train the policies")
    t.add_argument("--corpus", required=True)
    common(t)

    e = sub.add_parser("eval", help="score a checkpoint on a corpus split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--split", choices=("train", "dev", "test"), default="test")
    e.add_argument("--threads", type=int, default=1)
    decode(e)
    common(e)

    v = sub.add_parser("viz", help="render one document's selections")
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--corpus", required=True)
    v.add_argument("--doc-id", required=True)
    v.add_argument("--aspect", required=True)
    decode(v)
    common(v)
    return p


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "viz": cmd_viz}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: gen, train, eval or viz")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args, argv)
    except HrlError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return UsageError.exit_code


if __name__ == "__main__":
    sys.exit(main())
