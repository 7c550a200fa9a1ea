"""Command-line entry point.

Exit codes: 0 success, 1 validation/format/runtime errors, 2 usage errors.
Machine-readable outputs go to --out paths and are byte-identical across
runs for fixed flags and seed; human summaries go to stdout and progress
logs to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .asr_noise import NoiseConfig, corpus_wer, corrupt
from .corpus import corpus_stats, load_corpus, save_corpus
from .embeddings import tokenize
from .errors import SluError
from .evaluation import (class_metrics, cross_validate, evaluate_model,
                         report_human, report_tsv)
from .gradcheck import TOL, run_all_checks
from .models import FAMILY_NAMES, ModelConfig, RuleLexicon, predict
from .synth import default_templates, load_templates, synth_generate
from .training import TrainConfig, load_checkpoint, save_checkpoint, train

DEFAULT_SEED = 1


def _log(msg):
    print(msg, file=sys.stderr)


def _seed_of(args) -> int:
    if args.seed is None:
        print(f"seed: {DEFAULT_SEED} (default)")
        return DEFAULT_SEED
    return args.seed


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        family=args.family,
        cell=args.cell,
        hidden_dim=args.hidden,
        dropout=args.dropout,
        embedding_dim=args.dim,
    )


def _train_config(args, seed) -> TrainConfig:
    return TrainConfig(lr=args.lr, batch_size=args.batch, epochs=args.epochs,
                       seed=seed)


def _add_model_flags(p):
    p.add_argument("--family", required=True, choices=FAMILY_NAMES)
    p.add_argument("--cell", default="LSTM", choices=("LSTM", "GRU"))
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--dim", type=int, default=100,
                   help="embedding dimension (ignored with --embeddings)")
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--embeddings", default=None,
                   help="pretrained embedding text file")
    p.add_argument("--lexicon", default=None,
                   help="rule lexicon JSON (hybrid families)")


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)


def cmd_gen_corpus(args) -> int:
    seed = _seed_of(args)
    templates = (load_templates(args.templates) if args.templates
                 else default_templates())
    corpus = synth_generate(templates, targets=None, seed=seed)
    save_corpus(args.out, corpus)
    print(f"wrote {len(corpus)} utterances to {args.out}")
    return 0


def cmd_stats(args) -> int:
    stats = corpus_stats(load_corpus(args.corpus))
    lines = stats.lines()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_train(args) -> int:
    seed = _seed_of(args)
    corpus = load_corpus(args.corpus)
    config = _model_config(args)
    tc = _train_config(args, seed)
    lexicon = RuleLexicon.from_file(args.lexicon) if args.lexicon else None
    model, curve = train(config, corpus, tc, pretrained=args.embeddings,
                         lexicon=lexicon, log_fn=_log)
    save_checkpoint(model, args.out)
    print(f"trained {args.family} on {len(corpus)} utterances; "
          f"final loss {curve.losses[-1]:.6f}" if curve.losses else
          f"trained {args.family} (0 epochs)")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    corpus = load_corpus(args.corpus)
    cms = evaluate_model(model, corpus)
    reports = {s: class_metrics(cm) for s, cm in cms.items()}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report_tsv(model.config.family, reports))
    print(report_human(model.config.family, reports), end="")
    return 0


def cmd_cv(args) -> int:
    seed = _seed_of(args)
    corpus = load_corpus(args.corpus)
    config = _model_config(args)
    tc = _train_config(args, seed)
    lexicon = RuleLexicon.from_file(args.lexicon) if args.lexicon else None
    result = cross_validate(config, corpus, k=args.k, seed=seed, tc=tc,
                            pretrained=args.embeddings, lexicon=lexicon,
                            log_fn=_log)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report_tsv(config.family, result.pooled, result.per_fold))
    print(report_human(config.family, result.pooled), end="")
    return 0


def cmd_predict(args) -> int:
    model = load_checkpoint(args.model)
    if args.text is not None:
        utterances = [tokenize(args.text)]
    else:
        utterances = [u.tokens for u in load_corpus(args.corpus)]
    lines = []
    for tokens in utterances:
        pred = predict(model, tokens)
        rec = {"tokens": tokens, "intent": pred.intent}
        if pred.slots is not None:
            rec["slots"] = pred.slots
        if pred.keywords is not None:
            rec["keywords"] = pred.keywords
        lines.append(json.dumps(rec, ensure_ascii=False))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def cmd_corrupt(args) -> int:
    seed = _seed_of(args)
    corpus = load_corpus(args.corpus)
    if args.noise_config:
        nc = NoiseConfig.from_file(args.noise_config)
    else:
        mix = tuple(float(x) for x in args.mix.split(","))
        nc = NoiseConfig(target_wer=args.target_wer, mix=mix, seed=seed)
    corrupted, achieved = corrupt(corpus, nc)
    save_corpus(args.out, corrupted)
    print(f"achieved WER {achieved.wer:.4f} "
          f"(S={achieved.substitutions} D={achieved.deletions} "
          f"I={achieved.insertions} N={achieved.ref_length})")
    for mode in ("singleton", "dyad"):
        try:
            sub = corpus_wer(corpus, corrupted, mode=mode)
        except ValueError:
            continue
        print(f"  {mode}: WER {sub.wer:.4f} (N={sub.ref_length})")
    return 0


def cmd_wer(args) -> int:
    ref = load_corpus(args.ref)
    hyp = load_corpus(args.hyp)
    total = corpus_wer(ref, hyp)
    print(f"WER {total.wer:.4f} (S={total.substitutions} D={total.deletions} "
          f"I={total.insertions} N={total.ref_length})")
    if args.by_mode:
        for mode in ("singleton", "dyad"):
            try:
                sub = corpus_wer(ref, hyp, mode=mode)
            except ValueError:
                continue
            print(f"  {mode}: WER {sub.wer:.4f} (N={sub.ref_length})")
    return 0


def cmd_grad_check(args) -> int:
    seeds = tuple(range(args.seeds))
    checks = run_all_checks(seeds)
    lines = []
    worst = 0.0
    for chk in checks:
        status = "pass" if chk.ok() else "FAIL"
        worst = max(worst, chk.max_rel_err)
        lines.append(f"{chk.name}\tseed={chk.seed}\t"
                     f"max_rel_err={chk.max_rel_err:.3e}\t{status}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    ok = all(c.ok() for c in checks)
    print(f"{'all checks pass' if ok else 'CHECKS FAILED'} "
          f"(worst {worst:.3e}, tolerance {TOL:.0e})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slu",
        description="Intent detection and slot filling toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--templates", default=None)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("stats", help="corpus label statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train one model")
    _add_model_flags(p)
    _add_train_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None, help="TSV report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    _add_model_flags(p)
    _add_train_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", default=None, help="TSV report path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="predict intents/tags")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", default=None)
    p.add_argument("--text", default=None, help="single raw utterance")
    p.add_argument("--out", default=None, help="JSONL predictions path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("corrupt", help="simulate ASR noise at a target WER")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target-wer", type=float, default=0.136, dest="target_wer")
    p.add_argument("--mix", default="0.7,0.2,0.1",
                   help="sub,del,ins proportions")
    p.add_argument("--noise-config", default=None, dest="noise_config",
                   help="JSON NoiseConfig file (overrides the flags above)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("wer", help="word error rate between two corpora")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--by-mode", action="store_true", dest="by_mode")
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("grad-check", help="finite-difference certification")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command == "predict" and not args.text and not args.corpus:
        parser.error_exit = True
        print("error: predict needs --corpus or --text", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except SluError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
