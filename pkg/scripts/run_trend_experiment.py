#!/usr/bin/env python3
"""Compare tagger directionality and intent-model families under 10-fold CV.

Trains hybrid-0 (LSTM tagger + rules), hybrid-1 (Bi-LSTM tagger + rules),
and hierarchical-joint-2 on the default synthetic corpus over several
seeds, then prints the slot-F1 and intent-F1 comparison table and writes
the full per-class TSV reports.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from slu.corpus import load_corpus
from slu.evaluation import cross_validate, report_tsv
from slu.models import ModelConfig
from slu.synth import default_templates, synth_generate
from slu.training import TrainConfig

FAMILIES = ("hybrid-0", "hybrid-1", "hierarchical-joint-2")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", default=None,
                    help="corpus JSONL (default: generate the 3418-utterance corpus)")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=24)
    ap.add_argument("--dim", type=int, default=48)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--out-dir", default="trend_reports")
    args = ap.parse_args(argv)

    if args.corpus:
        corpus = load_corpus(args.corpus)
    else:
        corpus = synth_generate(default_templates(), seed=1)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    intent_f1 = {f: [] for f in FAMILIES}
    slot_f1 = {f: [] for f in FAMILIES}
    for seed in args.seeds:
        for family in FAMILIES:
            cfg = ModelConfig(family=family, hidden_dim=args.hidden,
                              embedding_dim=args.dim, dropout=0.3)
            tc = TrainConfig(epochs=args.epochs, lr=args.lr, seed=seed)
            t0 = time.time()
            result = cross_validate(cfg, corpus, k=args.k, seed=seed, tc=tc)
            intent_f1[family].append(result.pooled["intent"].overall_weighted.f1)
            if "slot" in result.pooled:
                slot_f1[family].append(result.pooled["slot"].overall_weighted.f1)
            path = out_dir / f"{family}.seed{seed}.tsv"
            path.write_text(report_tsv(family, result.pooled, result.per_fold))
            print(f"{family} seed={seed}: intent F1 "
                  f"{intent_f1[family][-1]:.4f} ({time.time() - t0:.0f}s)",
                  file=sys.stderr)

    print("\nfamily                     mean intent F1   mean slot F1")
    for family in FAMILIES:
        s = (f"{np.mean(slot_f1[family]):14.4f}" if slot_f1[family] else
             f"{'n/a':>14}")
        print(f"{family:<26} {np.mean(intent_f1[family]):14.4f} {s}")
    bi, uni = np.mean(slot_f1["hybrid-1"]), np.mean(slot_f1["hybrid-0"])
    hj2, h0 = (np.mean(intent_f1["hierarchical-joint-2"]),
               np.mean(intent_f1["hybrid-0"]))
    print(f"\nBi-LSTM vs LSTM slot F1: {bi:.4f} vs {uni:.4f} "
          f"({'>=' if bi >= uni else '<'})")
    print(f"hierarchical-joint-2 vs hybrid-0 intent F1: {hj2:.4f} vs {h0:.4f} "
          f"(margin {hj2 - h0:+.4f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
