"""Command line entry points: gen-data, train, eval, dist.

Configuration precedence is defaults < --config JSON document < explicit
flags.  Exit codes: 0 success, 1 validation error, 2 runtime divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import corpus as corpus_mod
from . import training
from .corpus import CorpusSpec
from .distribution import (DomainError, KumaParams, StretchBounds,
                           prob_one, prob_zero, stretched_cdf, stretched_pdf)
from .training import DivergenceError, RunConfig


def _add_config_flag(parser):
    parser.add_argument("--config", help="JSON RunConfig document")


_BOOL_FIELDS = {"lambda_nonneg", "freeze_gates_open", "use_raw_mean_gate",
                "contiguous"}

_TYPE_MAP = {"int": int, "float": float, "str": str}


def _flag_type(f: dataclasses.Field):
    name = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    return _TYPE_MAP.get(name.replace(" | None", ""), str)


def _add_run_flags(parser):
    for f in dataclasses.fields(RunConfig):
        if f.name in ("corpus", "pairs", "target_fused"):
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name in _BOOL_FIELDS:
            parser.add_argument(flag, action="store_true", default=None)
        else:
            parser.add_argument(flag, type=_flag_type(f), default=None)
    parser.add_argument("--target-fused", type=float, default=None)
    parser.add_argument("--no-target-fused", action="store_true", default=None)


def _config_from_args(args) -> RunConfig:
    doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            doc[f.name] = value
    if getattr(args, "no_target_fused", None):
        doc["target_fused"] = None
    return RunConfig.from_doc(doc)


def _add_corpus_flags(parser):
    for f in dataclasses.fields(CorpusSpec):
        flag = "--" + f.name.replace("_", "-")
        if f.name == "contiguous":
            parser.add_argument(flag, action="store_true", default=None)
        else:
            parser.add_argument(flag, type=_flag_type(f), default=None)


def cmd_gen_data(args) -> int:
    doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh).get("corpus", {})
    for f in dataclasses.fields(CorpusSpec):
        value = getattr(args, f.name, None)
        if value is not None:
            doc[f.name] = value
    spec = CorpusSpec(**doc)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    splits = corpus_mod.generate(spec)
    for name, examples in splits.items():
        corpus_mod.write_jsonl(os.path.join(out_dir, f"{name}.jsonl"), examples)
    corpus_mod.write_vocab(os.path.join(out_dir, "vocab.json"), spec)
    print(f"wrote {len(splits['train'])}/{len(splits['valid'])}/"
          f"{len(splits['test'])} examples to {out_dir}")
    return 0


def cmd_train(args) -> int:
    config = _config_from_args(args)
    summary = training.train_run(config)
    final = summary["final"]
    print(f"finished {summary['steps']} steps; final val_acc="
          f"{final['val_acc']:.4f} rate_l0={final['rate_l0']:.4f} "
          f"precision={final['precision']:.4f}")
    print(f"checkpoint: {config.checkpoint}")
    print(f"metrics: {config.metrics}")
    return 0


def cmd_eval(args) -> int:
    config, arrays, _ = training.load_checkpoint(args.checkpoint)
    if args.corpus_dir:
        config.corpus_dir = args.corpus_dir
    model = training.restore_model(config, arrays)
    if config.model in ("attention", "attention-bag"):
        examples = corpus_mod.generate_pairs(config.pairs)[args.split]
        stats = training.evaluate_attention(model, examples, config.batch_size)
        print(f"accuracy={stats['accuracy']:.4f} "
              f"nonzero_rate={stats['rate_l0']:.4f}")
        return 0
    examples = training.load_split(config.corpus_dir, args.split)
    stats = training.evaluate_rationale(model, examples, config.batch_size,
                                        freeze_open=config.freeze_gates_open)
    print(f"accuracy={stats['accuracy']:.4f} precision={stats['precision']:.4f}"
          f" selected_rate={stats['rate_l0']:.4f} "
          f"mean_selected={stats['mean_selected']:.3f}")
    if args.dump:
        with open(args.dump, "w", encoding="utf-8", newline="\n") as fh:
            for ex, gates, pred in zip(examples, stats["gates"],
                                       stats["predictions"]):
                fh.write(json.dumps({
                    "tokens": ex.tokens,
                    "gates": [float(g) for g in gates],
                    "gold_rationale": ex.rationale_mask,
                    "prediction": int(pred),
                    "label": ex.label}))
                fh.write("\n")
        print(f"rationales: {args.dump}")
    return 0


def dist_table(a: float, b: float, l: float, r: float, grid_size: int) -> list:
    """Rows (kind, x, pdf, cdf) describing one gate distribution.

    Point rows carry the probability mass of the atoms at 0 and 1 in the pdf
    column; grid rows sample the stretched density and cdf across [l, r].
    """
    params = KumaParams(a, b)
    bounds = StretchBounds(l, r)
    rows = [("point", 0.0, float(prob_zero(params, bounds)),
             float(prob_zero(params, bounds))),
            ("point", 1.0, float(prob_one(params, bounds)), 1.0)]
    xs = np.linspace(l, r, grid_size)
    width = r - l
    k = np.clip((xs - l) / width, 1e-12, 1.0 - 1e-12)
    from .distribution import kuma_pdf, kuma_cdf
    pdf = np.asarray(kuma_pdf(k, params)) / width
    cdf = np.asarray(kuma_cdf(np.clip((xs - l) / width, 0.0, 1.0), params))
    rows.extend(("grid", float(x), float(p), float(c))
                for x, p, c in zip(xs, pdf, cdf))
    return rows


def cmd_dist(args) -> int:
    rows = dist_table(args.a, args.b, args.l, args.r, args.grid_size)
    lines = ["kind,x,pdf,cdf"]
    lines += [f"{kind},{x!r},{p!r},{c!r}" for kind, x, p, c in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardkuma",
        description="Hard Kumaraswamy gates: synthetic data, rationale "
                    "training, evaluation, and distribution tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    _add_config_flag(p)
    _add_corpus_flags(p)
    p.add_argument("--out-dir", default="data")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train a model")
    _add_config_flag(p)
    _add_run_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus-dir", default=None)
    p.add_argument("--split", default="valid",
                   choices=("train", "valid", "test"))
    p.add_argument("--dump", default=None,
                   help="write per-example rationale JSONL here")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("dist", help="dump pdf/cdf/point-mass table as CSV")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--l", type=float, default=-0.1)
    p.add_argument("--r", type=float, default=1.1)
    p.add_argument("--grid-size", type=int, default=201)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_dist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, DomainError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
