"""Finite-difference certification of every layer's backward pass.

Each check builds a small random instance, computes analytic gradients
through the toolkit's own backward code, and compares them entry-by-entry
against central differences. Composed checks run the real training-step
code (dropout off) so the slot/keyword/intent/joint output heads and the
embedding path are certified exactly as trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models as M
from .cells import (affine, affine_backward, attention_backward,
                    attention_forward, bidir_backward, bidir_unroll, gru_step,
                    gru_step_backward, init_affine, init_attention, init_gru,
                    init_lstm, lstm_step, lstm_step_backward)
from .embeddings import Vocabulary, init_embedding
from .numerics import SeededRng, finite_diff_check, softmax, softmax_rows

TOL = 1e-4
EPSILON = 1e-4  # large enough that roundoff stays below TOL on flat coords


def _randomize(arrays, rng: SeededRng, scale: float = 0.7):
    """Move parameters to a generic random point; near-zero inits leave
    recurrent-path gradients so small that finite differences drown in
    roundoff."""
    for arr in arrays.values():
        arr[...] = rng.uniform(-scale, scale, arr.shape)


@dataclass
class LayerCheck:
    name: str
    seed: int
    reports: list

    @property
    def max_rel_err(self) -> float:
        return max((r.max_rel_err for r in self.reports), default=0.0)

    def ok(self, tol: float = TOL) -> bool:
        return self.max_rel_err < tol


def _ce_grad(logits, target):
    probs = softmax(logits)
    d = probs.copy()
    d[target] -= 1.0
    return float(-np.log(probs[target] + 1e-12)), d


def check_lstm_step(seed: int) -> LayerCheck:
    rng = SeededRng(seed, stream=50)
    d, h, c = 3, 4, 5
    p = init_lstm(d, h, rng)
    _randomize(p.arrays(), rng)
    head = init_affine(h, c, rng)
    x = rng.normal(d)
    h0 = rng.normal(h)
    c0 = rng.normal(h)
    target = int(rng.integers(c))

    def loss_fn(_):
        tr = lstm_step(p, x, h0, c0)
        logits = affine(head, tr.h)
        return float(-np.log(softmax(logits)[target] + 1e-12))

    tr = lstm_step(p, x, h0, c0)
    _, dlogits = _ce_grad(affine(head, tr.h), target)
    grads, _, _, _ = lstm_step_backward(p, tr, dlogits @ head.w)
    return LayerCheck("lstm_step", seed,
                      finite_diff_check(loss_fn, p.arrays(), grads, epsilon=EPSILON))


def check_gru_step(seed: int) -> LayerCheck:
    rng = SeededRng(seed, stream=51)
    d, h, c = 3, 4, 5
    p = init_gru(d, h, rng)
    _randomize(p.arrays(), rng)
    head = init_affine(h, c, rng)
    x = rng.normal(d)
    h0 = rng.normal(h)
    target = int(rng.integers(c))

    def loss_fn(_):
        tr = gru_step(p, x, h0)
        return float(-np.log(softmax(affine(head, tr.h))[target] + 1e-12))

    tr = gru_step(p, x, h0)
    _, dlogits = _ce_grad(affine(head, tr.h), target)
    grads, _, _ = gru_step_backward(p, tr, dlogits @ head.w)
    return LayerCheck("gru_step", seed,
                      finite_diff_check(loss_fn, p.arrays(), grads, epsilon=EPSILON))


def check_bidir_unroll(cell: str, seed: int) -> LayerCheck:
    rng = SeededRng(seed, stream=52)
    d, h, t_len, c = 3, 4, 3, 5
    init = init_lstm if cell == "LSTM" else init_gru
    fw, bw = init(d, h, rng), init(d, h, rng)
    _randomize(fw.arrays(), rng)
    _randomize(bw.arrays(), rng)
    head = init_affine(2 * h, c, rng)
    xs = rng.normal((t_len, d))
    targets = np.array([int(rng.integers(c)) for _ in range(t_len)])

    def loss_fn(_):
        res = bidir_unroll(fw, bw, xs)
        probs = softmax_rows(affine(head, res.outputs))
        return float(-np.log(probs[np.arange(t_len), targets] + 1e-12).mean())

    res = bidir_unroll(fw, bw, xs)
    probs = softmax_rows(affine(head, res.outputs))
    dlogits = probs.copy()
    dlogits[np.arange(t_len), targets] -= 1.0
    dlogits /= t_len
    fw_g, bw_g, _ = bidir_backward(fw, bw, res, dlogits @ head.w)
    params = {f"fw.{k}": v for k, v in fw.arrays().items()}
    params.update({f"bw.{k}": v for k, v in bw.arrays().items()})
    grads = {f"fw.{k}": v for k, v in fw_g.items()}
    grads.update({f"bw.{k}": v for k, v in bw_g.items()})
    return LayerCheck(f"bidir_unroll_{cell.lower()}", seed,
                      finite_diff_check(loss_fn, params, grads, epsilon=EPSILON))


def check_attention(learned_context: bool, seed: int) -> LayerCheck:
    rng = SeededRng(seed, stream=53)
    s_dim, a_dim, t_len, c = 4, 3, 4, 5
    p = init_attention(s_dim, a_dim, learned_context, rng)
    fixed_context = p.context.copy()
    _randomize(p.arrays(), rng)
    if not learned_context:
        p.context[...] = fixed_context
    head = init_affine(s_dim, c, rng)
    states = rng.normal((t_len, s_dim))
    target = int(rng.integers(c))

    def loss_fn(_):
        pooled, _, _ = attention_forward(states, p)
        return float(-np.log(softmax(affine(head, pooled))[target] + 1e-12))

    pooled, _, trace = attention_forward(states, p)
    _, dlogits = _ce_grad(affine(head, pooled), target)
    grads, _ = attention_backward(p, trace, dlogits @ head.w)
    params = dict(p.arrays())
    if not learned_context:
        params.pop("context")
    variant = "with_context" if learned_context else "plain"
    return LayerCheck(f"attention_pool_{variant}", seed,
                      finite_diff_check(loss_fn, params, grads, epsilon=EPSILON))


def check_affine(seed: int) -> LayerCheck:
    rng = SeededRng(seed, stream=56)
    s_dim, c = 4, 5
    p = init_affine(s_dim, c, rng)
    _randomize(p.arrays(), rng)
    x = rng.normal(s_dim)
    target = int(rng.integers(c))

    def loss_fn(_):
        return float(-np.log(softmax(affine(p, x))[target] + 1e-12))

    _, dlogits = _ce_grad(affine(p, x), target)
    grads, _ = affine_backward(p, x, dlogits)
    return LayerCheck("affine", seed,
                      finite_diff_check(loss_fn, p.arrays(), grads,
                                        epsilon=EPSILON))


def check_embedding_lookup(seed: int) -> LayerCheck:
    rng = SeededRng(seed, stream=54)
    v, d, t_len, c = 7, 3, 4, 5
    emb = rng.uniform(-0.5, 0.5, (v, d))
    head = init_affine(d, c, rng)
    ids = np.array([int(rng.integers(v)) for _ in range(t_len)])
    targets = np.array([int(rng.integers(c)) for _ in range(t_len)])

    def loss_fn(params):
        probs = softmax_rows(affine(head, params["emb"][ids]))
        return float(-np.log(probs[np.arange(t_len), targets] + 1e-12).mean())

    probs = softmax_rows(affine(head, emb[ids]))
    dlogits = probs.copy()
    dlogits[np.arange(t_len), targets] -= 1.0
    dlogits /= t_len
    dx = dlogits @ head.w
    demb = np.zeros_like(emb)
    np.add.at(demb, ids, dx)
    return LayerCheck("embedding_lookup", seed,
                      finite_diff_check(loss_fn, {"emb": emb}, {"emb": demb}, epsilon=EPSILON))


def _tiny_model(family: str, seed: int, cell: str = "LSTM"):
    rng = SeededRng(seed, stream=55)
    vocab = Vocabulary.build([["stop", "the", "car", "go", "left", "please"]])
    config = M.ModelConfig(family=family, cell=cell, hidden_dim=3,
                           embedding_dim=3, dropout=0.0)
    emb = init_embedding(vocab, config.embedding_dim, rng)
    model = M.init_model(config, vocab, rng, emb)
    _randomize(model.parameters(), rng)
    return model, vocab, rng


def _composed_check(name, seed, model, step_fn) -> LayerCheck:
    params = model.parameters()

    def loss_fn(_):
        bg = step_fn()
        return bg.loss_sum / bg.positions

    bg = step_fn()
    return LayerCheck(name, seed, finite_diff_check(loss_fn, params, bg.grads, epsilon=EPSILON))


def check_tagger_loss(family: str, seed: int) -> LayerCheck:
    model, vocab, rng = _tiny_model(family, seed)
    b, t_len = 2, 3
    ids = np.array([[int(rng.integers(len(vocab))) for _ in range(t_len)]
                    for _ in range(b)])
    slot_t = np.array([[int(rng.integers(len(M.SLOTS))) for _ in range(t_len)]
                       for _ in range(b)])
    kw_t = np.array([[int(rng.integers(2)) for _ in range(t_len)] for _ in range(b)])
    unused = SeededRng(0)
    return _composed_check(
        f"tagger_loss_{family}", seed, model,
        lambda: M.tagger_batch_step(model, ids, slot_t, kw_t, 0.0, False, unused))


def check_seq2one_loss(family: str, seed: int) -> LayerCheck:
    model, vocab, rng = _tiny_model(family, seed)
    b, t_len = 2, 3
    ids = np.array([[int(rng.integers(len(vocab))) for _ in range(t_len)]
                    for _ in range(b)])
    intent_t = np.array([int(rng.integers(len(M.INTENTS))) for _ in range(b)])
    unused = SeededRng(0)
    return _composed_check(
        f"seq2one_loss_{family}", seed, model,
        lambda: M.seq2one_batch_step(model, ids, intent_t, 0.0, False, unused))


def check_joint_loss(seed: int) -> LayerCheck:
    model, vocab, rng = _tiny_model("joint-2", seed)
    b, t_len = 2, 3
    interior = [[int(rng.integers(len(vocab))) for _ in range(t_len)]
                for _ in range(b)]
    from .embeddings import BOU_IDX, EOU_IDX
    ids = np.array([[BOU_IDX] + row + [EOU_IDX] for row in interior])
    targets = []
    for _ in range(b):
        bt = M.joint_boundary_target(M.INTENTS[int(rng.integers(len(M.INTENTS)))])
        row = [bt] + [M.joint_target(M.SLOTS[int(rng.integers(len(M.SLOTS)))],
                                     "NonIntent", True) for _ in range(t_len)] + [bt]
        targets.append(row)
    targets = np.array(targets)
    unused = SeededRng(0)
    return _composed_check(
        "joint_loss_joint-2", seed, model,
        lambda: M.joint_batch_step(model, ids, targets, 0.0, False, unused))


def run_all_checks(seeds=(0, 1, 2, 3, 4)) -> list:
    """Every layer and composed loss at each seed."""
    out = []
    for seed in seeds:
        out.append(check_lstm_step(seed))
        out.append(check_gru_step(seed))
        out.append(check_bidir_unroll("LSTM", seed))
        out.append(check_bidir_unroll("GRU", seed))
        out.append(check_attention(False, seed))
        out.append(check_attention(True, seed))
        out.append(check_affine(seed))
        out.append(check_embedding_lookup(seed))
        out.append(check_tagger_loss("hybrid-0", seed))
        out.append(check_tagger_loss("hybrid-1", seed))
        out.append(check_seq2one_loss("separate-0", seed))
        out.append(check_seq2one_loss("separate-1", seed))
        out.append(check_seq2one_loss("separate-2", seed))
        out.append(check_seq2one_loss("separate-3", seed))
        out.append(check_joint_loss(seed))
    return out
