"""Model families for joint intent detection and slot filling.

Fifteen variants built from shared parts:

  hybrid-0..3                word-level tagger + rule-based intent mapping
  separate-0..3              seq2one intent classifiers (last state,
                             bidirectional merge, or attention pooling)
  joint-1..2                 seq2seq over boundary-wrapped utterances with
                             intent labels on the boundary tokens
  hierarchical-separate-0..3 tagger -> salience filter -> separate-k
  hierarchical-joint-2       tagger -> salience filter -> joint-2

A tagger always carries two softmax heads (7 slot labels, 2 keyword
labels). Joint models use one softmax head over the disjoint union of
slot, keyword, and intent labels with additive legality masks per
position: interior positions can never emit intent labels and boundary
positions can never emit slot or keyword labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .cells import (AffineParams, AttentionParams, affine, affine_backward,
                    attention_backward, attention_forward, bidir_backward,
                    bidir_unroll, dropout_forward, init_affine, init_attention,
                    make_cell, states_of, unroll, unroll_backward)
from .corpus import (INTENTS, INTENT_INDEX, KEYWORDS, KEYWORD_INDEX, NO_SLOT,
                     SLOTS, SLOT_INDEX)
from .embeddings import BOU, EOU, UNK, EmbeddingMatrix, Vocabulary
from .errors import ConfigError
from .numerics import SeededRng, softmax_rows

# ---------------------------------------------------------------------------
# Family catalogue
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    name: str
    kind: str                 # hybrid | separate | joint | hier_separate | hier_joint
    bidirectional: bool
    attention: str = "none"   # none | plain | with_context
    rule_variant: int | None = None
    joint_keywords: bool = False
    lock_cell: str | None = None


FAMILIES = {spec.name: spec for spec in [
    FamilySpec("hybrid-0", "hybrid", False, rule_variant=0, lock_cell="LSTM"),
    FamilySpec("hybrid-1", "hybrid", True, rule_variant=1),
    FamilySpec("hybrid-2", "hybrid", True, rule_variant=2),
    FamilySpec("hybrid-3", "hybrid", True, rule_variant=3),
    FamilySpec("separate-0", "separate", False, lock_cell="LSTM"),
    FamilySpec("separate-1", "separate", True),
    FamilySpec("separate-2", "separate", True, attention="plain"),
    FamilySpec("separate-3", "separate", True, attention="with_context"),
    FamilySpec("joint-1", "joint", True),
    FamilySpec("joint-2", "joint", True, joint_keywords=True),
    FamilySpec("hierarchical-separate-0", "hier_separate", False, lock_cell="LSTM"),
    FamilySpec("hierarchical-separate-1", "hier_separate", True),
    FamilySpec("hierarchical-separate-2", "hier_separate", True, attention="plain"),
    FamilySpec("hierarchical-separate-3", "hier_separate", True, attention="with_context"),
    FamilySpec("hierarchical-joint-2", "hier_joint", True, joint_keywords=True),
]}

FAMILY_NAMES = tuple(FAMILIES)


@dataclass
class ModelConfig:
    """Family selector plus network sizes.

    bidirectional / attention may be left as None to adopt the family's
    required value; setting them to a conflicting value is an error.
    """

    family: str
    cell: str = "LSTM"
    bidirectional: bool | None = None
    hidden_dim: int = 32
    attention: str | None = None
    dropout: float = 0.5
    embedding_dim: int = 100

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(
                f"unknown family '{self.family}'; valid: {', '.join(FAMILY_NAMES)}")
        spec = FAMILIES[self.family]
        if self.cell not in ("LSTM", "GRU"):
            raise ConfigError(f"unknown cell '{self.cell}'")
        if spec.lock_cell and self.cell != spec.lock_cell:
            raise ConfigError(f"{self.family} requires cell={spec.lock_cell}")
        if self.bidirectional is None:
            self.bidirectional = spec.bidirectional
        elif self.bidirectional != spec.bidirectional:
            raise ConfigError(
                f"{self.family} requires bidirectional={spec.bidirectional}")
        if self.attention is None:
            self.attention = spec.attention
        elif self.attention != spec.attention:
            raise ConfigError(f"{self.family} requires attention={spec.attention}")
        if self.hidden_dim < 1 or self.embedding_dim < 1:
            raise ConfigError("dimensions must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    @property
    def spec(self) -> FamilySpec:
        return FAMILIES[self.family]


# ---------------------------------------------------------------------------
# Joint label space
# ---------------------------------------------------------------------------

JOINT_LABELS = tuple([f"slot:{s}" for s in SLOTS]
                     + [f"kw:{k}" for k in KEYWORDS]
                     + [f"intent:{i}" for i in INTENTS])
N_JOINT = len(JOINT_LABELS)
_SLOT_LO, _SLOT_HI = 0, len(SLOTS)
_KW_LO, _KW_HI = _SLOT_HI, _SLOT_HI + len(KEYWORDS)
_INT_LO, _INT_HI = _KW_HI, _KW_HI + len(INTENTS)

MASK_NEG = -1e30


def _mask(legal_lo, legal_hi) -> np.ndarray:
    m = np.full(N_JOINT, MASK_NEG)
    m[legal_lo:legal_hi] = 0.0
    return m


BOUNDARY_MASK = _mask(_INT_LO, _INT_HI)
INTERIOR_MASK_SLOTS = _mask(_SLOT_LO, _SLOT_HI)
INTERIOR_MASK_SLOTS_KW = _mask(_SLOT_LO, _KW_HI)


def joint_target(slot: str, keyword: str, include_keywords: bool) -> int:
    """Union-space class index for an interior token."""
    if include_keywords and keyword == "Intent":
        return _KW_LO + KEYWORD_INDEX["Intent"]
    return _SLOT_LO + SLOT_INDEX[slot]


def joint_boundary_target(intent: str) -> int:
    """Union-space class index for a <BOU>/<EOU> position."""
    return _INT_LO + INTENT_INDEX[intent]


def joint_label_to_tags(idx: int) -> tuple[str, str]:
    """Map an interior union-space class back to (slot, keyword) labels."""
    if _SLOT_LO <= idx < _SLOT_HI:
        return SLOTS[idx - _SLOT_LO], "NonIntent"
    if _KW_LO <= idx < _KW_HI:
        return NO_SLOT, KEYWORDS[idx - _KW_LO]
    raise ValueError(f"class {idx} is not an interior label")


# ---------------------------------------------------------------------------
# Rule lexicon (hybrid families)
# ---------------------------------------------------------------------------


@dataclass
class RuleLexicon:
    """Keyword and slot-evidence vote tables with a tie-break priority.

    JSON config file fields:
      keyword_votes — {word: {intent: weight}}; every extracted intent
        keyword adds its weights to the named intents' scores.
      slot_votes — {slot label: {intent: weight}}; added once per slot
        TYPE present in the utterance (hybrid-2 consults only
        PositionDirection, hybrid-3 all types).
      priority — all 10 intents in tie-break order (earlier wins).
    Highest total score wins; with no votes at all the result is Other.
    """

    keyword_votes: dict
    slot_votes: dict
    priority: list

    def validate(self) -> "RuleLexicon":
        reachable = {"Other"}  # fallback when nothing votes
        for votes in self.keyword_votes.values():
            reachable.update(votes)
        for votes in self.slot_votes.values():
            reachable.update(votes)
        missing = [i for i in INTENTS if i not in reachable]
        if missing:
            raise ConfigError(f"lexicon cannot reach intents: {missing}")
        if sorted(self.priority) != sorted(INTENTS):
            raise ConfigError("lexicon priority must order all intents")
        for table in (self.keyword_votes, self.slot_votes):
            for key, votes in table.items():
                for intent in votes:
                    if intent not in INTENT_INDEX:
                        raise ConfigError(f"unknown intent '{intent}' under '{key}'")
        return self

    def to_dict(self) -> dict:
        return {"keyword_votes": self.keyword_votes,
                "slot_votes": self.slot_votes,
                "priority": self.priority}

    @classmethod
    def from_dict(cls, raw) -> "RuleLexicon":
        try:
            lex = cls(keyword_votes={k: dict(v) for k, v in raw["keyword_votes"].items()},
                      slot_votes={k: dict(v) for k, v in raw["slot_votes"].items()},
                      priority=list(raw["priority"]))
        except (KeyError, TypeError, AttributeError) as e:
            raise ConfigError(f"malformed lexicon: {e}")
        return lex.validate()

    @classmethod
    def from_file(cls, path) -> "RuleLexicon":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_lexicon() -> RuleLexicon:
    raw = json.loads(
        resources.files("slu.data").joinpath("default_lexicon.json").read_text())
    return RuleLexicon.from_dict(raw)


def rule_map(lexicon: RuleLexicon, keywords, slots, variant: int) -> str:
    """Vote extracted keywords (and slot evidence for variants 2/3) into an
    utterance intent. No votes at all -> Other; ties break by priority."""
    if variant not in (0, 1, 2, 3):
        raise ConfigError(f"unknown hybrid variant {variant}")
    votes: dict[str, float] = {}
    for word in keywords:
        for intent, weight in lexicon.keyword_votes.get(word, {}).items():
            votes[intent] = votes.get(intent, 0.0) + weight
    if variant >= 2:
        present = {label for _, label in slots if label != NO_SLOT}
        if variant == 2:
            present &= {"PositionDirection"}
        for label in present:
            for intent, weight in lexicon.slot_votes.get(label, {}).items():
                votes[intent] = votes.get(intent, 0.0) + weight
    if not votes:
        return "Other"
    rank = {intent: i for i, intent in enumerate(lexicon.priority)}
    return max(votes, key=lambda it: (votes[it], -rank[it]))


# ---------------------------------------------------------------------------
# Network components
# ---------------------------------------------------------------------------


@dataclass
class TaggerNet:
    """Word-level encoder with slot and keyword softmax heads."""

    cell: str
    fw: object
    bw: object | None
    slot_head: AffineParams
    kw_head: AffineParams


@dataclass
class SeqToOneNet:
    """Utterance-level classifier head over a sequence summary state."""

    cell: str
    fw: object
    bw: object | None
    attention: AttentionParams | None
    intent_head: AffineParams


@dataclass
class JointNet:
    """Single-head seq2seq over the union label space."""

    cell: str
    fw: object
    bw: object
    head: AffineParams
    include_keywords: bool


@dataclass
class TrainedModel:
    """Config plus every learned component. Hierarchical families carry a
    second embedding for the level-2 network so its training never shifts
    the level-1 tagger's input space."""

    config: ModelConfig
    vocab: Vocabulary
    embedding: EmbeddingMatrix
    embedding2: EmbeddingMatrix | None = None
    tagger: TaggerNet | None = None
    utterance_net: object | None = None
    lexicon: RuleLexicon | None = None

    def parameters(self) -> dict:
        """Flat name -> array view over every trainable parameter."""
        out = {}
        if self.embedding.trainable:
            out["emb.matrix"] = self.embedding.matrix
        if self.embedding2 is not None and self.embedding2.trainable:
            out["emb2.matrix"] = self.embedding2.matrix
        for prefix, net in (("tagger", self.tagger), ("utt", self.utterance_net)):
            if net is None:
                continue
            out.update(_net_params(prefix, net))
        return out

    def all_arrays(self) -> dict:
        """Every array including fixed ones, for serialization."""
        out = {"emb.matrix": self.embedding.matrix}
        if self.embedding2 is not None:
            out["emb2.matrix"] = self.embedding2.matrix
        for prefix, net in (("tagger", self.tagger), ("utt", self.utterance_net)):
            if net is None:
                continue
            out.update(_net_params(prefix, net, include_fixed=True))
        return out

    def utt_embedding(self) -> EmbeddingMatrix:
        return self.embedding2 if self.embedding2 is not None else self.embedding

    def utt_emb_name(self) -> str:
        return "emb2.matrix" if self.embedding2 is not None else "emb.matrix"

    def predict(self, tokens):
        return predict(self, tokens)


def _net_params(prefix: str, net, include_fixed: bool = False) -> dict:
    out = {}
    out.update({f"{prefix}.fw.{k}": v for k, v in net.fw.arrays().items()})
    if net.bw is not None:
        out.update({f"{prefix}.bw.{k}": v for k, v in net.bw.arrays().items()})
    if isinstance(net, TaggerNet):
        out.update({f"{prefix}.slot_head.{k}": v for k, v in net.slot_head.arrays().items()})
        out.update({f"{prefix}.kw_head.{k}": v for k, v in net.kw_head.arrays().items()})
    elif isinstance(net, SeqToOneNet):
        if net.attention is not None:
            attn = net.attention.arrays()
            if not net.attention.learned_context and not include_fixed:
                attn.pop("context")
            out.update({f"{prefix}.attn.{k}": v for k, v in attn.items()})
        out.update({f"{prefix}.intent_head.{k}": v for k, v in net.intent_head.arrays().items()})
    elif isinstance(net, JointNet):
        out.update({f"{prefix}.head.{k}": v for k, v in net.head.arrays().items()})
    return out


def init_model(config: ModelConfig, vocab: Vocabulary, rng: SeededRng,
               embedding: EmbeddingMatrix, lexicon: RuleLexicon | None = None
               ) -> TrainedModel:
    spec = config.spec
    h = config.hidden_dim
    d = embedding.dim
    state_dim = 2 * h if config.bidirectional else h

    def encoder():
        fw = make_cell(config.cell, d, h, rng)
        bw = make_cell(config.cell, d, h, rng) if config.bidirectional else None
        return fw, bw

    tagger = None
    utt = None
    if spec.kind in ("hybrid", "hier_separate", "hier_joint"):
        fw, bw = encoder()
        tagger = TaggerNet(cell=config.cell, fw=fw, bw=bw,
                           slot_head=init_affine(state_dim, len(SLOTS), rng),
                           kw_head=init_affine(state_dim, len(KEYWORDS), rng))
    if spec.kind in ("separate", "hier_separate"):
        fw, bw = encoder()
        attention = None
        if config.attention != "none":
            attention = init_attention(state_dim, state_dim,
                                       config.attention == "with_context", rng)
        utt = SeqToOneNet(cell=config.cell, fw=fw, bw=bw, attention=attention,
                          intent_head=init_affine(state_dim, len(INTENTS), rng))
    if spec.kind in ("joint", "hier_joint"):
        fw, bw = encoder()
        utt = JointNet(cell=config.cell, fw=fw, bw=bw,
                       head=init_affine(state_dim, N_JOINT, rng),
                       include_keywords=spec.joint_keywords)
    embedding2 = None
    if spec.kind in ("hier_separate", "hier_joint"):
        embedding2 = EmbeddingMatrix(matrix=embedding.matrix.copy(),
                                     dim=embedding.dim,
                                     trainable=embedding.trainable)
    if spec.kind == "hybrid" and lexicon is None:
        lexicon = default_lexicon()
    return TrainedModel(config=config, vocab=vocab, embedding=embedding,
                        embedding2=embedding2, tagger=tagger,
                        utterance_net=utt, lexicon=lexicon)


# ---------------------------------------------------------------------------
# Shared encoder forward/backward
# ---------------------------------------------------------------------------


@dataclass
class EncCache:
    bidir: object | None = None
    traces: list | None = None


def encode_states(net, x):
    """Run the net's recurrent encoder over x (..., T, D)."""
    if net.bw is not None:
        res = bidir_unroll(net.fw, net.bw, x)
        return res.outputs, EncCache(bidir=res)
    traces = unroll(net.fw, x)
    return states_of(traces), EncCache(traces=traces)


def encode_backward(net, prefix: str, cache: EncCache, dstates):
    if net.bw is not None:
        fw_g, bw_g, dx = bidir_backward(net.fw, net.bw, cache.bidir, dstates)
        grads = {f"{prefix}.fw.{k}": v for k, v in fw_g.items()}
        grads.update({f"{prefix}.bw.{k}": v for k, v in bw_g.items()})
        return grads, dx
    fw_g, dx = unroll_backward(net.fw, cache.traces, dstates)
    return {f"{prefix}.fw.{k}": v for k, v in fw_g.items()}, dx


# ---------------------------------------------------------------------------
# Loss-and-gradient steps (one batch of same-length utterances)
# ---------------------------------------------------------------------------


@dataclass
class BatchGrads:
    loss_sum: float
    positions: int
    grads: dict
    touched_rows: np.ndarray


def _emb_grad(emb: EmbeddingMatrix, ids, dx):
    demb = np.zeros_like(emb.matrix)
    flat_ids = ids.reshape(-1)
    np.add.at(demb, flat_ids, dx.reshape(-1, dx.shape[-1]))
    return demb, np.unique(flat_ids)


def _head_loss(head: AffineParams, states, targets, mask=None):
    """Summed softmax CE over the last axis; also returns dloss/dlogits."""
    logits = affine(head, states)
    if mask is not None:
        logits = logits + mask
    probs = softmax_rows(logits)
    tflat = np.asarray(targets).reshape(-1)
    flat = probs.reshape(-1, probs.shape[-1])
    rows = np.arange(tflat.size)
    loss = float(-np.log(flat[rows, tflat] + 1e-12).sum())
    dlogits = probs.copy()
    dflat = dlogits.reshape(-1, dlogits.shape[-1])
    dflat[rows, tflat] -= 1.0
    return loss, probs, dlogits


def tagger_batch_step(model, ids, slot_t, kw_t, dropout_rate, training, rng) -> BatchGrads:
    """Joint slot+keyword tagging loss over one same-length batch."""
    net = model.tagger
    x0 = model.embedding.matrix[ids]
    x, m1 = dropout_forward(x0, dropout_rate, training, rng)
    states, cache = encode_states(net, x)
    s2, m2 = dropout_forward(states, dropout_rate, training, rng)
    slot_loss, _, dslot = _head_loss(net.slot_head, s2, slot_t)
    kw_loss, _, dkw = _head_loss(net.kw_head, s2, kw_t)
    positions = 2 * ids.size
    scale = 1.0 / positions
    sg, ds2_a = affine_backward(net.slot_head, s2, dslot * scale)
    kg, ds2_b = affine_backward(net.kw_head, s2, dkw * scale)
    ds2 = ds2_a + ds2_b
    dstates = ds2 if m2 is None else ds2 * m2
    grads = {f"tagger.slot_head.{k}": v for k, v in sg.items()}
    grads.update({f"tagger.kw_head.{k}": v for k, v in kg.items()})
    enc_g, dx = encode_backward(net, "tagger", cache, dstates)
    grads.update(enc_g)
    dx0 = dx if m1 is None else dx * m1
    demb, touched = _emb_grad(model.embedding, ids, dx0)
    grads["emb.matrix"] = demb
    return BatchGrads((slot_loss + kw_loss), positions, grads, touched)


def seq2one_batch_step(model, ids, intent_t, dropout_rate, training, rng) -> BatchGrads:
    """Utterance-intent loss for separate-style nets over one batch."""
    net = model.utterance_net
    h = net.fw.hidden_dim
    T = ids.shape[-1]
    emb = model.utt_embedding()
    x0 = emb.matrix[ids]
    x, m1 = dropout_forward(x0, dropout_rate, training, rng)
    states, cache = encode_states(net, x)
    s2, m2 = dropout_forward(states, dropout_rate, training, rng)
    attn_trace = None
    if net.attention is not None:
        rep, _, attn_trace = attention_forward(s2, net.attention)
    elif net.bw is not None:
        rep = np.concatenate([s2[..., T - 1, :h], s2[..., 0, h:]], axis=-1)
    else:
        rep = s2[..., T - 1, :]
    loss, _, dlogits = _head_loss(net.intent_head, rep, intent_t)
    positions = int(np.asarray(intent_t).size)
    scale = 1.0 / positions
    hg, drep = affine_backward(net.intent_head, rep, dlogits * scale)
    grads = {f"utt.intent_head.{k}": v for k, v in hg.items()}
    ds2 = np.zeros_like(s2)
    if net.attention is not None:
        ag, ds2 = attention_backward(net.attention, attn_trace, drep)
        for k, v in ag.items():
            grads[f"utt.attn.{k}"] = v
    elif net.bw is not None:
        ds2[..., T - 1, :h] = drep[..., :h]
        ds2[..., 0, h:] = drep[..., h:]
    else:
        ds2[..., T - 1, :] = drep
    dstates = ds2 if m2 is None else ds2 * m2
    enc_g, dx = encode_backward(net, "utt", cache, dstates)
    grads.update(enc_g)
    dx0 = dx if m1 is None else dx * m1
    demb, touched = _emb_grad(emb, ids, dx0)
    grads[model.utt_emb_name()] = demb
    return BatchGrads(loss, positions, grads, touched)


def joint_position_masks(T_wrapped: int, include_keywords: bool) -> np.ndarray:
    interior = INTERIOR_MASK_SLOTS_KW if include_keywords else INTERIOR_MASK_SLOTS
    m = np.tile(interior, (T_wrapped, 1))
    m[0] = BOUNDARY_MASK
    m[-1] = BOUNDARY_MASK
    return m


def joint_batch_step(model, wrapped_ids, targets, dropout_rate, training, rng) -> BatchGrads:
    """All-position CE for joint nets; ids/targets already boundary-wrapped."""
    net = model.utterance_net
    emb = model.utt_embedding()
    x0 = emb.matrix[wrapped_ids]
    x, m1 = dropout_forward(x0, dropout_rate, training, rng)
    states, cache = encode_states(net, x)
    s2, m2 = dropout_forward(states, dropout_rate, training, rng)
    mask = joint_position_masks(wrapped_ids.shape[-1], net.include_keywords)
    loss, _, dlogits = _head_loss(net.head, s2, targets, mask=mask)
    positions = wrapped_ids.size
    scale = 1.0 / positions
    hg, ds2 = affine_backward(net.head, s2, dlogits * scale)
    grads = {f"utt.head.{k}": v for k, v in hg.items()}
    dstates = ds2 if m2 is None else ds2 * m2
    enc_g, dx = encode_backward(net, "utt", cache, dstates)
    grads.update(enc_g)
    dx0 = dx if m1 is None else dx * m1
    demb, touched = _emb_grad(emb, wrapped_ids, dx0)
    grads[model.utt_emb_name()] = demb
    return BatchGrads(loss, positions, grads, touched)


# ---------------------------------------------------------------------------
# Inference operations
# ---------------------------------------------------------------------------


@dataclass
class TagResult:
    slots: list
    keywords: list
    slot_probs: np.ndarray
    kw_probs: np.ndarray


def tag_sequence(model: TrainedModel, tokens) -> TagResult:
    """Per-token slot and keyword labels from the word-level tagger."""
    if not tokens:
        raise ValueError("cannot tag an empty utterance")
    if model.tagger is None:
        raise ConfigError(f"family {model.config.family} has no word-level tagger")
    ids = model.vocab.encode(tokens)
    x = model.embedding.matrix[ids]
    states, _ = encode_states(model.tagger, x)
    slot_probs = softmax_rows(affine(model.tagger.slot_head, states))
    kw_probs = softmax_rows(affine(model.tagger.kw_head, states))
    slots = [SLOTS[i] for i in slot_probs.argmax(axis=-1)]
    keywords = [KEYWORDS[i] for i in kw_probs.argmax(axis=-1)]
    return TagResult(slots, keywords, slot_probs, kw_probs)


def filter_salient(tokens, slots, keywords):
    """Keep tokens that are intent keywords or carry a non-None slot."""
    if not (len(tokens) == len(slots) == len(keywords)):
        raise ValueError("misaligned tagged utterance")
    kept = [i for i in range(len(tokens))
            if keywords[i] == "Intent" or slots[i] != NO_SLOT]
    return ([tokens[i] for i in kept], [slots[i] for i in kept],
            [keywords[i] for i in kept])


def wrap_boundaries(tokens) -> list:
    """<BOU> + tokens + <EOU>. Callers must not wrap twice."""
    return [BOU] + list(tokens) + [EOU]


def classify_utterance(model: TrainedModel, tokens):
    """Seq2one intent prediction. Returns (intent, probability vector)."""
    if not tokens:
        raise ValueError("cannot classify an empty utterance")
    net = model.utterance_net
    if not isinstance(net, SeqToOneNet):
        raise ConfigError(f"family {model.config.family} is not a seq2one classifier")
    h = net.fw.hidden_dim
    ids = model.vocab.encode(tokens)
    x = model.utt_embedding().matrix[ids]
    states, _ = encode_states(net, x)
    if net.attention is not None:
        rep, _, _ = attention_forward(states, net.attention)
    elif net.bw is not None:
        rep = np.concatenate([states[-1, :h], states[0, h:]], axis=-1)
    else:
        rep = states[-1]
    probs = softmax_rows(affine(net.intent_head, rep))
    return INTENTS[int(probs.argmax())], probs


@dataclass
class JointResult:
    intent: str
    intent_probs: np.ndarray
    slots: list
    keywords: list | None
    bou_probs: np.ndarray
    eou_probs: np.ndarray


def joint_infer(model: TrainedModel, tokens) -> JointResult:
    """Wrap, tag boundaries over intents and interiors over slot/keyword
    space; utterance intent averages the two boundary distributions."""
    if not isinstance(model.utterance_net, JointNet):
        raise ConfigError(f"family {model.config.family} is not a joint model")
    net = model.utterance_net
    wrapped = wrap_boundaries(tokens)
    ids = model.vocab.encode(wrapped)
    x = model.utt_embedding().matrix[ids]
    states, _ = encode_states(net, x)
    logits = affine(net.head, states) + joint_position_masks(
        len(wrapped), net.include_keywords)
    probs = softmax_rows(logits)
    bou = probs[0, _INT_LO:_INT_HI]
    eou = probs[-1, _INT_LO:_INT_HI]
    avg = 0.5 * (bou + eou)
    interior = probs[1:-1]
    slots, keywords = [], []
    for row in interior:
        idx = int(row.argmax())
        s, k = joint_label_to_tags(idx)
        slots.append(s)
        keywords.append(k)
    return JointResult(
        intent=INTENTS[int(avg.argmax())],
        intent_probs=avg,
        slots=slots,
        keywords=keywords if net.include_keywords else None,
        bou_probs=bou,
        eou_probs=eou,
    )


@dataclass
class Prediction:
    """Model output for one utterance; fields not produced by the family
    stay None."""

    intent: str
    intent_probs: np.ndarray | None = None
    slots: list | None = None
    keywords: list | None = None


def predict(model: TrainedModel, tokens) -> Prediction:
    if not tokens:
        raise ValueError("cannot predict on an empty utterance")
    kind = model.config.spec.kind
    if kind == "hybrid":
        tr = tag_sequence(model, tokens)
        kw_tokens = [t for t, k in zip(tokens, tr.keywords) if k == "Intent"]
        slot_pairs = [(t, s) for t, s in zip(tokens, tr.slots) if s != NO_SLOT]
        intent = rule_map(model.lexicon, kw_tokens, slot_pairs,
                          model.config.spec.rule_variant)
        return Prediction(intent=intent, slots=tr.slots, keywords=tr.keywords)
    if kind == "separate":
        intent, probs = classify_utterance(model, tokens)
        return Prediction(intent=intent, intent_probs=probs)
    if kind == "joint":
        res = joint_infer(model, tokens)
        return Prediction(intent=res.intent, intent_probs=res.intent_probs,
                          slots=res.slots, keywords=res.keywords)
    tr = tag_sequence(model, tokens)
    kept_tokens, _, _ = filter_salient(tokens, tr.slots, tr.keywords)
    if kind == "hier_separate":
        level2 = kept_tokens if kept_tokens else [UNK]
        intent, probs = classify_utterance(model, level2)
        return Prediction(intent=intent, intent_probs=probs,
                          slots=tr.slots, keywords=tr.keywords)
    res = joint_infer(model, kept_tokens)  # empty filter -> [<BOU>, <EOU>]
    return Prediction(intent=res.intent, intent_probs=res.intent_probs,
                      slots=tr.slots, keywords=tr.keywords)
