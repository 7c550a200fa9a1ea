"""Label taxonomies, annotated utterances, corpus I/O, stratified k-fold
splitting, and corpus statistics.

Corpus files are JSON lines, one utterance per line, with the fields
tokens / slots / keywords / intent / session_id / passenger_mode / channel.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CorpusFormatError
from .numerics import SeededRng

INTENTS = (
    "SetDestination", "SetRoute", "GoFaster", "GoSlower", "Stop",
    "Park", "PullOver", "DropOff", "OpenDoor", "Other",
)
SLOTS = (
    "Location", "PositionDirection", "Object", "TimeGuidance",
    "Person", "GestureGaze", "None",
)
KEYWORDS = ("Intent", "NonIntent")
NO_SLOT = "None"
PASSENGER_MODES = ("singleton", "dyad")
CHANNELS = ("transcript", "asr")

INTENT_INDEX = {name: i for i, name in enumerate(INTENTS)}
SLOT_INDEX = {name: i for i, name in enumerate(SLOTS)}
KEYWORD_INDEX = {name: i for i, name in enumerate(KEYWORDS)}

RECORD_FIELDS = (
    "tokens", "slots", "keywords", "intent", "session_id",
    "passenger_mode", "channel",
)


@dataclass
class AnnotatedUtterance:
    """Tokens with aligned per-token slot and keyword labels plus one
    utterance-level intent."""

    tokens: list[str]
    slots: list[str]
    keywords: list[str]
    intent: str
    session_id: str = "s01"
    passenger_mode: str = "singleton"
    channel: str = "transcript"

    def validate(self, line: int | None = None):
        n = len(self.tokens)
        if n < 1:
            raise CorpusFormatError("utterance must have at least one token",
                                    line=line, field="tokens")
        if len(self.slots) != n:
            raise CorpusFormatError(
                f"{len(self.slots)} slot labels for {n} tokens",
                line=line, field="slots")
        if len(self.keywords) != n:
            raise CorpusFormatError(
                f"{len(self.keywords)} keyword labels for {n} tokens",
                line=line, field="keywords")
        for s in self.slots:
            if s not in SLOT_INDEX:
                raise CorpusFormatError(f"unknown slot label '{s}'",
                                        line=line, field="slots")
        for k in self.keywords:
            if k not in KEYWORD_INDEX:
                raise CorpusFormatError(f"unknown keyword label '{k}'",
                                        line=line, field="keywords")
        if self.intent not in INTENT_INDEX:
            raise CorpusFormatError(f"unknown intent '{self.intent}'",
                                    line=line, field="intent")
        if self.passenger_mode not in PASSENGER_MODES:
            raise CorpusFormatError(
                f"unknown passenger_mode '{self.passenger_mode}'",
                line=line, field="passenger_mode")
        if self.channel not in CHANNELS:
            raise CorpusFormatError(f"unknown channel '{self.channel}'",
                                    line=line, field="channel")
        return self


def load_corpus(path) -> list[AnnotatedUtterance]:
    """Parse and validate a JSONL corpus; fails on the first bad record."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"invalid JSON ({e.msg})", line=lineno)
            if not isinstance(rec, dict):
                raise CorpusFormatError("record must be an object", line=lineno)
            missing = [f for f in RECORD_FIELDS if f not in rec]
            if missing:
                raise CorpusFormatError("missing field", line=lineno,
                                        field=missing[0])
            utt = AnnotatedUtterance(**{f: rec[f] for f in RECORD_FIELDS})
            utt.validate(line=lineno)
            out.append(utt)
    return out


def save_corpus(path, corpus) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt in corpus:
            fh.write(json.dumps(asdict(utt), ensure_ascii=False) + "\n")


@dataclass
class FoldAssignment:
    """Fold index in [0, k) for every utterance of a corpus."""

    k: int
    folds: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)


def stratified_kfold(corpus, k: int, seed: int = 0) -> FoldAssignment:
    """Round-robin folds per intent class after a seeded shuffle.

    Classes with fewer than k members are still spread round-robin but lose
    the per-class balance guarantee (a warning is emitted).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(corpus) < k:
        raise ValueError(f"corpus of {len(corpus)} cannot fill {k} folds")
    rng = SeededRng(seed, stream=17)
    by_intent: dict[str, list[int]] = {}
    for i, utt in enumerate(corpus):
        by_intent.setdefault(utt.intent, []).append(i)
    folds = np.zeros(len(corpus), dtype=np.int64)
    for intent in INTENTS:
        members = by_intent.get(intent)
        if not members:
            continue
        if len(members) < k:
            warnings.warn(
                f"intent {intent} has {len(members)} utterances for {k} folds; "
                "per-class balance not guaranteed")
        order = rng.permutation(len(members))
        offset = int(rng.integers(k))
        for j, pos in enumerate(order):
            folds[members[pos]] = (offset + j) % k
    sizes = np.bincount(folds, minlength=k)
    if (sizes == 0).any():
        raise ValueError("fold assignment produced an empty fold")
    return FoldAssignment(k=k, folds=folds)


@dataclass
class CorpusStats:
    """Per-label tallies plus the salient/filler token partition."""

    utterances: int
    total_tokens: int
    intent_counts: dict
    slot_counts: dict
    keyword_counts: dict
    valid_slot: int
    non_slot: int
    intent_or_valid_slot: int
    non_intent_and_non_slot: int

    def lines(self) -> list[str]:
        out = [f"utterances\t{self.utterances}", f"tokens\t{self.total_tokens}"]
        out += [f"intent\t{k}\t{v}" for k, v in self.intent_counts.items()]
        out += [f"slot\t{k}\t{v}" for k, v in self.slot_counts.items()]
        out += [f"keyword\t{k}\t{v}" for k, v in self.keyword_counts.items()]
        out.append(f"derived\tValidSlot\t{self.valid_slot}")
        out.append(f"derived\tNonSlot\t{self.non_slot}")
        out.append(f"derived\tIntentOrValidSlot\t{self.intent_or_valid_slot}")
        out.append(f"derived\tNonIntentAndNonSlot\t{self.non_intent_and_non_slot}")
        return out


def corpus_stats(corpus) -> CorpusStats:
    intent_counts = {i: 0 for i in INTENTS}
    slot_counts = {s: 0 for s in SLOTS}
    keyword_counts = {k: 0 for k in KEYWORDS}
    salient = 0
    filler = 0
    total = 0
    for utt in corpus:
        intent_counts[utt.intent] += 1
        for s, k in zip(utt.slots, utt.keywords):
            slot_counts[s] += 1
            keyword_counts[k] += 1
            total += 1
            if k == "Intent" or s != NO_SLOT:
                salient += 1
            else:
                filler += 1
    return CorpusStats(
        utterances=len(corpus),
        total_tokens=total,
        intent_counts=intent_counts,
        slot_counts=slot_counts,
        keyword_counts=keyword_counts,
        valid_slot=total - slot_counts[NO_SLOT],
        non_slot=slot_counts[NO_SLOT],
        intent_or_valid_slot=salient,
        non_intent_and_non_slot=filler,
    )
