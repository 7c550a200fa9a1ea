"""Mini-batch training for every model family, plus checkpoint I/O.

Batches group utterances of identical length so sequences stay unpadded;
the loss is averaged per supervised position. Hierarchical families train
in two stages: the word-level tagger first, then the utterance-level net
on sequences filtered by the tagger's own predictions.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import models as M
from .corpus import INTENT_INDEX, KEYWORD_INDEX, SLOT_INDEX
from .embeddings import (EmbeddingMatrix, UNK, Vocabulary, init_embedding,
                         load_pretrained)
from .errors import (CheckpointIntegrityError, CheckpointVersionError,
                     ConfigError, TrainingDivergedError)
from .numerics import SeededRng, global_norm

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """Adam hyperparameters and loop controls."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 50
    clip_norm: float = 5.0
    seed: int = 0
    dropout: float | None = None  # None -> use the model config's rate

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size and epochs must be positive")
        if self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive")


@dataclass
class LossCurve:
    """Mean training loss per completed epoch (stages concatenated)."""

    losses: list = field(default_factory=list)


class Adam:
    """Adaptive-moment optimizer; embedding rows update lazily so rows of
    tokens absent from a batch are never touched."""

    def __init__(self, params: dict, tc: TrainConfig):
        self.tc = tc
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict, sparse_rows: dict | None = None):
        tc = self.tc
        self.t += 1
        c1 = 1.0 - tc.beta1 ** self.t
        c2 = 1.0 - tc.beta2 ** self.t
        for name, g in grads.items():
            p = params[name]
            rows = sparse_rows.get(name) if sparse_rows else None
            if rows is not None:
                gr = g[rows]
                self.m[name][rows] = tc.beta1 * self.m[name][rows] + (1 - tc.beta1) * gr
                self.v[name][rows] = tc.beta2 * self.v[name][rows] + (1 - tc.beta2) * gr * gr
                mhat = self.m[name][rows] / c1
                vhat = self.v[name][rows] / c2
                p[rows] -= tc.lr * mhat / (np.sqrt(vhat) + tc.eps)
            else:
                self.m[name] = tc.beta1 * self.m[name] + (1 - tc.beta1) * g
                self.v[name] = tc.beta2 * self.v[name] + (1 - tc.beta2) * g * g
                mhat = self.m[name] / c1
                vhat = self.v[name] / c2
                p -= tc.lr * mhat / (np.sqrt(vhat) + tc.eps)


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale all gradients in place so the global norm is <= max_norm."""
    norm = global_norm(grads.values())
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def _epoch_batches(n: int, lengths, batch_size: int, rng: SeededRng):
    """Deterministic same-length batches in shuffled order."""
    perm = rng.permutation(n)
    open_buckets: dict[int, list] = {}
    batches = []
    for idx in perm:
        bucket = open_buckets.setdefault(int(lengths[idx]), [])
        bucket.append(int(idx))
        if len(bucket) == batch_size:
            batches.append(np.array(bucket))
            open_buckets[int(lengths[idx])] = []
    for bucket in open_buckets.values():
        if bucket:
            batches.append(np.array(bucket))
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


@dataclass
class _Stage:
    name: str
    items: list          # per-utterance tuples of numpy arrays
    lengths: np.ndarray
    step: callable       # (model, batch arrays..., rate, rng) -> BatchGrads


def _tagger_items(model, corpus):
    items = []
    for utt in corpus:
        ids = model.vocab.encode(utt.tokens)
        slot_t = np.array([SLOT_INDEX[s] for s in utt.slots], dtype=np.int64)
        kw_t = np.array([KEYWORD_INDEX[k] for k in utt.keywords], dtype=np.int64)
        items.append((ids, slot_t, kw_t))
    return items


def _seq2one_items(model, sequences, intents):
    items = []
    for tokens, intent in zip(sequences, intents):
        toks = tokens if tokens else [UNK]
        items.append((model.vocab.encode(toks),
                      np.int64(INTENT_INDEX[intent])))
    return items


def _joint_items(model, sequences, slot_lists, kw_lists, intents):
    include_kw = model.utterance_net.include_keywords
    items = []
    for tokens, slots, keywords, intent in zip(sequences, slot_lists, kw_lists, intents):
        wrapped = M.wrap_boundaries(tokens)
        ids = model.vocab.encode(wrapped)
        boundary = M.joint_boundary_target(intent)
        targets = [boundary]
        targets += [M.joint_target(s, k, include_kw)
                    for s, k in zip(slots, keywords)]
        targets.append(boundary)
        items.append((ids, np.array(targets, dtype=np.int64)))
    return items


def _predict_tags_bulk(model, corpus):
    """Level-1 predictions for every utterance, batched by length."""
    by_len: dict[int, list] = {}
    for i, utt in enumerate(corpus):
        by_len.setdefault(len(utt.tokens), []).append(i)
    slots_out = [None] * len(corpus)
    kw_out = [None] * len(corpus)
    for length, idxs in sorted(by_len.items()):
        for start in range(0, len(idxs), 256):
            chunk = idxs[start:start + 256]
            ids = np.stack([model.vocab.encode(corpus[i].tokens) for i in chunk])
            x = model.embedding.matrix[ids]
            states, _ = M.encode_states(model.tagger, x)
            slot_idx = M.affine(model.tagger.slot_head, states).argmax(axis=-1)
            kw_idx = M.affine(model.tagger.kw_head, states).argmax(axis=-1)
            for row, i in enumerate(chunk):
                slots_out[i] = [M.SLOTS[j] for j in slot_idx[row]]
                kw_out[i] = [M.KEYWORDS[j] for j in kw_idx[row]]
    return slots_out, kw_out


def _build_stages(model, corpus):
    kind = model.config.spec.kind
    stages = []
    if kind in ("hybrid", "hier_separate", "hier_joint"):
        items = _tagger_items(model, corpus)

        def tag_step(mdl, arrs, rate, rng):
            ids, slot_t, kw_t = arrs
            return M.tagger_batch_step(mdl, ids, slot_t, kw_t, rate, True, rng)

        stages.append(_Stage("tagger", items,
                             np.array([len(u.tokens) for u in corpus]), tag_step))
    if kind == "separate":
        items = _seq2one_items(model, [u.tokens for u in corpus],
                               [u.intent for u in corpus])
        stages.append(_Stage("utterance", items,
                             np.array([it[0].size for it in items]), _s2o_step))
    if kind == "joint":
        items = _joint_items(model, [u.tokens for u in corpus],
                             [u.slots for u in corpus],
                             [u.keywords for u in corpus],
                             [u.intent for u in corpus])
        stages.append(_Stage("utterance", items,
                             np.array([it[0].size for it in items]), _joint_step))
    return stages


def _s2o_step(mdl, arrs, rate, rng):
    ids, intent_t = arrs
    return M.seq2one_batch_step(mdl, ids, intent_t, rate, True, rng)


def _joint_step(mdl, arrs, rate, rng):
    ids, targets = arrs
    return M.joint_batch_step(mdl, ids, targets, rate, True, rng)


def _hier_level2_stage(model, corpus):
    """Filtered stage-2 dataset from the trained tagger's own predictions.

    Level-2 targets for kept positions come from the gold annotation; the
    keep/drop decision comes from the level-1 predictions."""
    kind = model.config.spec.kind
    pred_slots, pred_kw = _predict_tags_bulk(model, corpus)
    sequences, slot_lists, kw_lists, intents = [], [], [], []
    for utt, ps, pk in zip(corpus, pred_slots, pred_kw):
        kept = [i for i in range(len(utt.tokens))
                if pk[i] == "Intent" or ps[i] != "None"]
        sequences.append([utt.tokens[i] for i in kept])
        slot_lists.append([utt.slots[i] for i in kept])
        kw_lists.append([utt.keywords[i] for i in kept])
        intents.append(utt.intent)
    if kind == "hier_separate":
        items = _seq2one_items(model, sequences, intents)
        return _Stage("utterance", items,
                      np.array([it[0].size for it in items]), _s2o_step)
    items = _joint_items(model, sequences, slot_lists, kw_lists, intents)
    return _Stage("utterance", items,
                  np.array([it[0].size for it in items]), _joint_step)


def _run_stage(model, stage: _Stage, tc: TrainConfig, rate, curve,
               shuffle_rng, drop_rng, log_fn):
    params = model.parameters()
    adam = Adam(params, tc)
    n = len(stage.items)
    for epoch in range(tc.epochs):
        t0 = time.perf_counter()
        loss_sum = 0.0
        position_sum = 0
        for bi, batch in enumerate(_epoch_batches(n, stage.lengths,
                                                  tc.batch_size, shuffle_rng)):
            arrs = [np.stack([stage.items[i][j] for i in batch])
                    for j in range(len(stage.items[0]))]
            bg = stage.step(model, arrs, rate, drop_rng)
            if not np.isfinite(bg.loss_sum):
                pnorm = global_norm(params.values())
                raise TrainingDivergedError(
                    f"non-finite loss in stage {stage.name}, epoch {epoch}, "
                    f"batch {bi}; parameter norm {pnorm:.3e}")
            clip_gradients(bg.grads, tc.clip_norm)
            adam.step(params, bg.grads,
                      sparse_rows={"emb.matrix": bg.touched_rows})
            loss_sum += bg.loss_sum
            position_sum += bg.positions
        epoch_loss = loss_sum / max(position_sum, 1)
        curve.losses.append(epoch_loss)
        if log_fn is not None:
            log_fn(f"stage={stage.name}\tepoch={epoch}\tloss={epoch_loss:.6f}"
                   f"\twall={time.perf_counter() - t0:.3f}s")


def train(config: M.ModelConfig, corpus, tc: TrainConfig | None = None,
          pretrained=None, lexicon=None, log_fn=None):
    """Train one model on a corpus; returns (TrainedModel, LossCurve)."""
    if not corpus:
        raise ValueError("training corpus is empty")
    tc = tc or TrainConfig()
    rate = config.dropout if tc.dropout is None else tc.dropout
    vocab = Vocabulary.build([u.tokens for u in corpus])
    init_rng = SeededRng(tc.seed, stream=1)
    shuffle_rng = SeededRng(tc.seed, stream=2)
    drop_rng = SeededRng(tc.seed, stream=3)
    emb_rng = SeededRng(tc.seed, stream=4)
    if pretrained is not None:
        embedding = load_pretrained(pretrained, vocab, emb_rng)
    else:
        embedding = init_embedding(vocab, config.embedding_dim, emb_rng)
    if embedding.dim != config.embedding_dim:
        config = M.ModelConfig(**{**asdict(config), "embedding_dim": embedding.dim})
    model = M.init_model(config, vocab, init_rng, embedding, lexicon=lexicon)
    curve = LossCurve()
    for stage in _build_stages(model, corpus):
        _run_stage(model, stage, tc, rate, curve, shuffle_rng, drop_rng, log_fn)
    if config.spec.kind in ("hier_separate", "hier_joint"):
        stage2 = _hier_level2_stage(model, corpus)
        _run_stage(model, stage2, tc, rate, curve, shuffle_rng, drop_rng, log_fn)
    return model, curve


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def _payload(model: M.TrainedModel) -> dict:
    return {
        "config": asdict(model.config),
        "vocab": list(model.vocab.tokens),
        "embedding": {"dim": model.embedding.dim,
                      "trainable": model.embedding.trainable},
        "lexicon": model.lexicon.to_dict() if model.lexicon else None,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in model.all_arrays().items()
        },
    }


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def save_checkpoint(model: M.TrainedModel, path) -> None:
    payload = _payload(model)
    blob = {
        "format_version": CHECKPOINT_VERSION,
        "checksum": hashlib.sha256(_canonical(payload).encode()).hexdigest(),
        "payload": payload,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(blob, sort_keys=True, separators=(",", ":")))
        fh.write("\n")


def load_checkpoint(path) -> M.TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        blob = json.loads(text)
    except json.JSONDecodeError:
        raise CheckpointIntegrityError(f"{path}: not parseable (truncated?)")
    if not isinstance(blob, dict) or "format_version" not in blob:
        raise CheckpointIntegrityError(f"{path}: missing format_version")
    if blob["format_version"] != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format_version {blob['format_version']} != {CHECKPOINT_VERSION}")
    payload = blob.get("payload")
    if payload is None or "checksum" not in blob:
        raise CheckpointIntegrityError(f"{path}: missing payload or checksum")
    digest = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    if digest != blob["checksum"]:
        raise CheckpointIntegrityError(f"{path}: checksum mismatch")
    config = M.ModelConfig(**payload["config"])
    vocab = Vocabulary(tokens=list(payload["vocab"]))
    emb_meta = payload["embedding"]
    embedding = EmbeddingMatrix(
        matrix=np.zeros((len(vocab), emb_meta["dim"])),
        dim=emb_meta["dim"],
        trainable=emb_meta["trainable"],
    )
    lexicon = (M.RuleLexicon.from_dict(payload["lexicon"])
               if payload["lexicon"] else None)
    model = M.init_model(config, vocab, SeededRng(0), embedding, lexicon=lexicon)
    arrays = model.all_arrays()
    saved = payload["params"]
    if set(saved) != set(arrays):
        raise CheckpointIntegrityError(
            f"{path}: parameter set mismatch "
            f"(missing {sorted(set(arrays) - set(saved))[:3]}, "
            f"extra {sorted(set(saved) - set(arrays))[:3]})")
    for name, arr in arrays.items():
        entry = saved[name]
        data = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if data.shape != arr.shape:
            raise CheckpointIntegrityError(
                f"{path}: shape mismatch for {name}")
        arr[...] = data
    return model


def checkpoint_roundtrip(model: M.TrainedModel, path) -> M.TrainedModel:
    """Save then load; the result predicts identically to the input."""
    save_checkpoint(model, path)
    return load_checkpoint(path)
