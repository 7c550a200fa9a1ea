"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines as they complete. The trend-reproduction and noise criteria train
many models and dominate the runtime (minutes, not hours).
"""

import itertools
import time

import numpy as np
import pytest

from slu.asr_noise import NoiseConfig, corpus_wer, corrupt, wer
from slu.cli import main as cli_main
from slu.corpus import INTENTS, KEYWORDS, SLOTS, corpus_stats, save_corpus
from slu.evaluation import ConfusionMatrix, class_metrics, cross_validate
from slu.gradcheck import TOL, run_all_checks
from slu.models import ModelConfig, init_model, joint_infer, predict
from slu.numerics import SeededRng
from slu.synth import default_templates, synth_generate
from slu.training import TrainConfig, train

pytestmark = pytest.mark.acceptance


def report(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")
    return ok


# -- shared desk-scale hyperparameters for the CV criteria ------------------

CV_MODEL = dict(hidden_dim=24, embedding_dim=48, dropout=0.3)
CV_TRAIN = dict(epochs=8, lr=3e-3, batch_size=32)


def pooled_f1(cv_result, section):
    return cv_result.pooled[section].overall_weighted.f1


def test_criterion_1_gradient_certification():
    """Every layer's analytic backward pass within 1e-4 of central
    differences at 5 seeds."""
    t0 = time.time()
    checks = run_all_checks(seeds=(0, 1, 2, 3, 4))
    worst = max(c.max_rel_err for c in checks)
    elapsed = time.time() - t0
    ok = all(c.ok(TOL) for c in checks)
    names = sorted({c.name for c in checks})
    report(1, ok, f"{len(checks)} checks over {len(names)} layers, "
                  f"worst rel err {worst:.2e} (tol {TOL:.0e}), {elapsed:.0f}s")
    assert elapsed < 120
    for c in checks:
        assert c.ok(TOL), f"{c.name} seed={c.seed}: {c.max_rel_err:.2e}"


def test_criterion_2_memorization(default_corpus):
    """hierarchical-joint-2 (H=32) memorizes a 32-utterance subset within
    300 epochs: 100% intent accuracy, >= 99% token-label accuracy."""
    subset = default_corpus[:32]
    cfg = ModelConfig(family="hierarchical-joint-2", hidden_dim=32,
                      embedding_dim=100, dropout=0.0)
    # 150 epochs per stage keeps the two-stage total within the 300 budget
    tc = TrainConfig(epochs=150, seed=11, dropout=0.0, lr=3e-3)
    t0 = time.time()
    model, curve = train(cfg, subset, tc)
    elapsed = time.time() - t0
    intent_hits = 0
    token_hits = token_total = 0
    for u in subset:
        pred = predict(model, u.tokens)
        intent_hits += pred.intent == u.intent
        for a, b in zip(pred.slots, u.slots):
            token_hits += a == b
            token_total += 1
        for a, b in zip(pred.keywords, u.keywords):
            token_hits += a == b
            token_total += 1
    intent_acc = intent_hits / len(subset)
    token_acc = token_hits / token_total
    ok = intent_acc == 1.0 and token_acc >= 0.99
    report(2, ok, f"intent acc {intent_acc:.3f}, token acc {token_acc:.4f}, "
                  f"{elapsed:.0f}s / {len(curve.losses)} total epochs")
    assert len(curve.losses) <= 300
    assert elapsed < 300
    assert intent_acc == 1.0
    assert token_acc >= 0.99


def test_criterion_3_trend_reproduction(default_corpus):
    """At desk scale over 3 seeds and 10-fold CV: (a) Bi-LSTM tagger slot F1
    >= LSTM tagger slot F1; (b) hierarchical-joint-2 beats hybrid-0 overall
    intent F1 by >= 0.02."""
    seeds = (0, 1, 2)
    t0 = time.time()
    scores = {"hybrid-0": [], "hybrid-1": [], "hierarchical-joint-2": []}
    slot_scores = {"hybrid-0": [], "hybrid-1": []}
    for seed in seeds:
        for family in scores:
            cfg = ModelConfig(family=family, **CV_MODEL)
            tc = TrainConfig(seed=seed, **CV_TRAIN)
            result = cross_validate(cfg, default_corpus, k=10, seed=seed, tc=tc)
            scores[family].append(pooled_f1(result, "intent"))
            if family in slot_scores:
                slot_scores[family].append(pooled_f1(result, "slot"))
    elapsed = time.time() - t0
    lstm_slot = float(np.mean(slot_scores["hybrid-0"]))
    bilstm_slot = float(np.mean(slot_scores["hybrid-1"]))
    hybrid0_intent = float(np.mean(scores["hybrid-0"]))
    hj2_intent = float(np.mean(scores["hierarchical-joint-2"]))
    ok_a = bilstm_slot >= lstm_slot
    ok_b = hj2_intent >= hybrid0_intent + 0.02
    detail_a = (f"slot F1 Bi-LSTM {bilstm_slot:.4f} vs LSTM {lstm_slot:.4f} "
                f"(per-seed {['%.4f' % v for v in slot_scores['hybrid-1']]} vs "
                f"{['%.4f' % v for v in slot_scores['hybrid-0']]})")
    detail_b = (f"intent F1 hierarchical-joint-2 {hj2_intent:.4f} vs hybrid-0 "
                f"{hybrid0_intent:.4f}, margin {hj2_intent - hybrid0_intent:.4f}")
    report("3a", ok_a, detail_a)
    report("3b", ok_b, f"{detail_b}, {elapsed:.0f}s total")
    assert elapsed < 7200
    assert ok_a, f"trend 3a failed: {detail_a}"
    assert ok_b, f"trend 3b failed: {detail_b}"


def _brute_force_counts(truths, preds, labels):
    out = {}
    for lab in labels:
        tp = sum(1 for t, p in zip(truths, preds) if t == lab and p == lab)
        fp = sum(1 for t, p in zip(truths, preds) if t != lab and p == lab)
        fn = sum(1 for t, p in zip(truths, preds) if t == lab and p != lab)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[lab] = (prec, rec, f1, tp + fn)
    return out


def test_criterion_4_metrics_and_wer_oracles():
    """class_metrics equals brute-force counting on 1000 random 10-class
    prediction vectors; wer equals exhaustive edit-distance tables on all
    pairs of length <= 6 over a 3-token alphabet."""
    rng = SeededRng(404)
    labels = tuple(f"c{i}" for i in range(10))
    for _ in range(1000):
        n = 1 + int(rng.choice(50))
        truths = [labels[rng.choice(10)] for _ in range(n)]
        preds = [labels[rng.choice(10)] for _ in range(n)]
        cm = ConfusionMatrix(labels)
        for t, p in zip(truths, preds):
            cm.add(t, p)
        rep = class_metrics(cm)
        oracle = _brute_force_counts(truths, preds, labels)
        for lab in labels:
            m = rep.per_class[lab]
            assert (m.precision, m.recall, m.f1, m.support) == oracle[lab]

    def oracle_distance(ref, hyp):
        n, m = len(ref), len(hyp)
        table = list(range(m + 1))
        for i in range(1, n + 1):
            prev, table = table, [i] + [0] * m
            for j in range(1, m + 1):
                table[j] = min(prev[j - 1] + (ref[i - 1] != hyp[j - 1]),
                               prev[j] + 1, table[j - 1] + 1)
        return table[m]

    alpha = ("a", "b", "c")
    t0 = time.time()
    seqs = [s for n in range(7) for s in itertools.product(alpha, repeat=n)]
    pairs = 0
    for ref in seqs:
        if not ref:
            continue
        for hyp in seqs:
            r = wer(ref, hyp)
            assert r.substitutions + r.deletions + r.insertions == \
                oracle_distance(ref, hyp), (ref, hyp)
            pairs += 1
    report(4, True, f"metrics oracle on 1000 vectors exact; WER exact on "
                    f"{pairs} exhaustive pairs ({time.time() - t0:.0f}s)")


def test_criterion_5_salience_fraction(default_corpus):
    """Gold-label salience filtering keeps 0.546 +/- 0.05 of tokens."""
    stats = corpus_stats(default_corpus)
    frac = stats.intent_or_valid_slot / stats.total_tokens
    ok = abs(frac - 0.546) <= 0.05
    report(5, ok, f"retained token fraction {frac:.4f} "
                  f"(target 0.546 +/- 0.05, n={stats.total_tokens})")
    assert ok


def test_criterion_6_noise_calibration_and_degradation():
    """corrupt() hits the 0.136 target within +/-0.01 on 1000 utterances;
    clean-trained CV scores >= corrupted-trained CV scores for one tagger
    and one hierarchical family."""
    targets = {i: 100 for i in INTENTS}
    corpus = synth_generate(default_templates(), targets=targets, seed=5)
    assert len(corpus) == 1000
    nc = NoiseConfig(target_wer=0.136, seed=5)
    corrupted, achieved = corrupt(corpus, nc)
    cal_ok = abs(achieved.wer - 0.136) <= 0.01
    singleton = corpus_wer(corpus, corrupted, mode="singleton")
    dyad = corpus_wer(corpus, corrupted, mode="dyad")
    report("6-cal", cal_ok,
           f"achieved WER {achieved.wer:.4f} (target 0.136 +/- 0.01); "
           f"singleton {singleton.wer:.4f}, dyad {dyad.wer:.4f}")
    assert cal_ok

    t0 = time.time()
    deltas = {}
    directional_ok = True
    for family, section in (("hybrid-1", "slot"),
                            ("hierarchical-joint-2", "intent")):
        cfg = ModelConfig(family=family, **CV_MODEL)
        # smaller corpus (900-utterance folds) needs more passes to converge
        tc = TrainConfig(seed=1, **{**CV_TRAIN, "epochs": 20})
        clean_f1 = pooled_f1(cross_validate(cfg, corpus, k=10, seed=1, tc=tc),
                             section)
        corr_f1 = pooled_f1(cross_validate(cfg, corrupted, k=10, seed=1, tc=tc),
                            section)
        deltas[family] = (section, clean_f1, corr_f1)
        directional_ok &= clean_f1 >= corr_f1
    detail = "; ".join(
        f"{fam} {sec} F1 clean {c:.4f} vs asr {a:.4f} (delta {c - a:+.4f})"
        for fam, (sec, c, a) in deltas.items())
    report("6-cv", directional_ok, f"{detail}; {time.time() - t0:.0f}s")
    assert directional_ok, detail


def test_criterion_7_cli_determinism(tmp_path):
    """Repeating any CLI command with identical flags and seed produces
    byte-identical machine-readable outputs."""
    corpus_path = tmp_path / "c.jsonl"
    targets = {i: 6 for i in INTENTS}
    save_corpus(corpus_path, synth_generate(default_templates(),
                                            targets=targets, seed=3))
    model_path = tmp_path / "model.ref.json"
    assert cli_main(["train", "--family", "joint-2", "--corpus",
                     str(corpus_path), "--epochs", "2", "--hidden", "6",
                     "--dim", "8", "--seed", "5", "--out", str(model_path)]) == 0
    runs = {
        "gen-corpus": ["gen-corpus", "--seed", "2", "--out", None],
        "stats": ["stats", "--corpus", str(corpus_path), "--out", None],
        "corrupt": ["corrupt", "--corpus", str(corpus_path),
                    "--target-wer", "0.15", "--seed", "4", "--out", None],
        "train": ["train", "--family", "joint-2", "--corpus", str(corpus_path),
                  "--epochs", "2", "--hidden", "6", "--dim", "8",
                  "--seed", "5", "--out", None],
        "eval": ["eval", "--model", str(model_path),
                 "--corpus", str(corpus_path), "--out", None],
        "predict": ["predict", "--model", str(model_path),
                    "--corpus", str(corpus_path), "--out", None],
        "cv": ["cv", "--family", "hybrid-0", "--corpus", str(corpus_path),
               "--k", "3", "--epochs", "2", "--hidden", "6", "--dim", "8",
               "--seed", "6", "--out", None],
        "grad-check": ["grad-check", "--seeds", "1", "--out", None],
    }
    all_ok = True
    for name, argv in runs.items():
        outs = []
        for run_idx in (0, 1):
            out_path = tmp_path / f"{name}.{run_idx}"
            cmd = [a if a is not None else str(out_path) for a in argv]
            code = cli_main(cmd)
            assert code == 0, f"{name} run {run_idx} exited {code}"
            outs.append(out_path.read_bytes())
        same = outs[0] == outs[1]
        all_ok &= same
        assert same, f"{name} output differs between identical runs"
    # the train reruns must also reproduce the reference checkpoint
    assert (tmp_path / "train.0").read_bytes() == model_path.read_bytes()
    report(7, all_ok, f"{len(runs)} commands byte-identical across reruns")


def test_criterion_8_joint_boundary_contract():
    """Interior positions never emit intent-space labels and boundary
    positions never emit slot-space labels, over 1000 random inferences."""
    rng = SeededRng(808)
    checked = 0
    for model_seed in range(4):
        for family in ("joint-1", "joint-2", "hierarchical-joint-2"):
            from slu.embeddings import Vocabulary, init_embedding
            vocab = Vocabulary.build(
                [["stop", "go", "left", "park", "here", "the", "car", "now"]])
            cfg = ModelConfig(family=family, hidden_dim=5, embedding_dim=5,
                              dropout=0.0)
            mrng = SeededRng(model_seed, stream=60)
            model = init_model(cfg, vocab, mrng, init_embedding(vocab, 5, mrng))
            for arr in model.parameters().values():
                arr[...] = mrng.uniform(-1.0, 1.0, arr.shape)
            words = list(vocab.tokens[4:])
            for _ in range(84):
                tokens = [words[rng.choice(len(words))]
                          for _ in range(1 + int(rng.choice(7)))]
                res = joint_infer(model, tokens)
                assert len(res.slots) == len(tokens)
                for s in res.slots:
                    assert s in SLOTS          # interior: slot space only
                if res.keywords is not None:
                    for k in res.keywords:
                        assert k in KEYWORDS   # interior: keyword space only
                assert res.intent in INTENTS   # boundary: intent space only
                assert res.bou_probs.shape == (len(INTENTS),)
                assert res.eou_probs.shape == (len(INTENTS),)
                assert res.bou_probs.sum() == pytest.approx(1.0, abs=1e-9)
                assert res.eou_probs.sum() == pytest.approx(1.0, abs=1e-9)
                checked += 1
    report(8, True, f"{checked} random joint inferences respected the "
                    f"position/label-space contract")
    assert checked >= 1000
