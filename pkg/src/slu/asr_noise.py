"""Word error rate and a calibrated word-level corpus corruptor.

The corruptor degrades clean transcriptions toward a target corpus WER by
substituting, deleting, and inserting tokens at rates derived from the
configured operation mix, re-measuring and rescaling up to five rounds.
Labels are repaired so corrupted corpora stay valid: substituted tokens
keep their labels, inserted tokens get (None, NonIntent), deleted tokens
drop theirs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import NO_SLOT, AnnotatedUtterance
from .errors import ConfigError
from .numerics import SeededRng


@dataclass
class WerResult:
    substitutions: int
    deletions: int
    insertions: int
    ref_length: int

    @property
    def wer(self) -> float:
        return (self.substitutions + self.deletions + self.insertions) / self.ref_length

    def __add__(self, other: "WerResult") -> "WerResult":
        return WerResult(self.substitutions + other.substitutions,
                         self.deletions + other.deletions,
                         self.insertions + other.insertions,
                         self.ref_length + other.ref_length)


def wer(reference, hypothesis) -> WerResult:
    """Minimum-edit-distance alignment with unit costs.

    Counts come from one optimal alignment; when several edits tie, the
    backtrace prefers substitution, then deletion, then insertion. Plain
    list DP: sequences are short and numpy overhead would dominate.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    n, m = len(ref), len(hyp)
    if n == 0:
        raise ValueError("reference must be nonempty")
    dist = [list(range(m + 1))]
    for i in range(1, n + 1):
        prev = dist[i - 1]
        row = [i] + [0] * m
        r_tok = ref[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (r_tok != hyp[j - 1])
            dele = prev[j] + 1
            ins = row[j - 1] + 1
            best = sub if sub <= dele else dele
            if ins < best:
                best = ins
            row[j] = best
        dist.append(row)
    s = d = ins_n = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] != hyp[j - 1]:
                s += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            d += 1
            i -= 1
        else:
            ins_n += 1
            j -= 1
    return WerResult(substitutions=s, deletions=d, insertions=ins_n, ref_length=n)


def corpus_wer(reference_corpus, hypothesis_corpus, mode: str | None = None) -> WerResult:
    """Aggregate WER over aligned corpora, optionally restricted to one
    passenger mode (singleton / dyad) of the reference."""
    if len(reference_corpus) != len(hypothesis_corpus):
        raise ValueError("corpora must align one-to-one")
    total = WerResult(0, 0, 0, 0)
    for ref, hyp in zip(reference_corpus, hypothesis_corpus):
        if mode is not None and ref.passenger_mode != mode:
            continue
        total = total + wer(ref.tokens, hyp.tokens)
    if total.ref_length == 0:
        raise ValueError(f"no reference tokens for mode={mode}")
    return total


@dataclass
class NoiseConfig:
    """Corruption targeting a corpus-level WER.

    JSON config file fields (all optional): target_wer (default 0.136),
    mix — three proportions [substitution, deletion, insertion] summing
    to 1 (default [0.7, 0.2, 0.1]), seed, max_rounds, tolerance.
    Substitutions draw replacements from the corpus unigram distribution.
    """

    target_wer: float = 0.136
    mix: tuple = (0.7, 0.2, 0.1)
    seed: int = 0
    max_rounds: int = 5
    tolerance: float = 0.01

    def validate(self) -> "NoiseConfig":
        if not 0.0 <= self.target_wer < 1.0:
            raise ConfigError("target_wer must lie in [0, 1)")
        if len(self.mix) != 3 or any(p < 0 for p in self.mix):
            raise ConfigError("mix needs three nonnegative proportions")
        if abs(sum(self.mix) - 1.0) > 1e-9:
            raise ConfigError("mix proportions must sum to 1")
        return self

    @classmethod
    def from_file(cls, path) -> "NoiseConfig":
        import json
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - {"target_wer", "mix", "seed", "max_rounds",
                              "tolerance"}
        if unknown:
            raise ConfigError(f"unknown noise config fields: {sorted(unknown)}")
        if "mix" in raw:
            raw["mix"] = tuple(raw["mix"])
        return cls(**raw).validate()


def _unigram_table(corpus):
    counts: dict[str, int] = {}
    for utt in corpus:
        for tok in utt.tokens:
            counts[tok] = counts.get(tok, 0) + 1
    vocab = sorted(counts)
    freqs = np.array([counts[t] for t in vocab], dtype=np.float64)
    return vocab, freqs / freqs.sum()


def _corrupt_once(corpus, rates, vocab, probs, rng: SeededRng):
    p_sub, p_del, p_ins = rates
    out = []
    for utt in corpus:
        tokens, slots, keywords = [], [], []
        remaining = len(utt.tokens)
        for tok, slot, kw in zip(utt.tokens, utt.slots, utt.keywords):
            u = rng.uniform()
            if u < p_sub:
                pick = vocab[rng.choice(len(vocab), p=probs)]
                if pick == tok:  # forced change, else no error is created
                    pick = vocab[rng.choice(len(vocab), p=probs)]
                    if pick == tok:
                        pick = vocab[(vocab.index(tok) + 1) % len(vocab)]
                tokens.append(pick)
                slots.append(slot)
                keywords.append(kw)
            elif u < p_sub + p_del and remaining > 1:
                remaining -= 1
                continue
            else:
                tokens.append(tok)
                slots.append(slot)
                keywords.append(kw)
            if rng.uniform() < p_ins:
                tokens.append(vocab[rng.choice(len(vocab), p=probs)])
                slots.append(NO_SLOT)
                keywords.append("NonIntent")
        out.append(AnnotatedUtterance(
            tokens=tokens, slots=slots, keywords=keywords,
            intent=utt.intent, session_id=utt.session_id,
            passenger_mode=utt.passenger_mode, channel="asr").validate())
    return out


def corrupt(corpus, nc: NoiseConfig):
    """Degrade a corpus to nc.target_wer. Returns (corrupted, WerResult).

    Rates are rescaled for up to nc.max_rounds until the measured WER is
    within nc.tolerance of the target.
    """
    nc.validate()
    if not corpus:
        raise ValueError("corpus is empty")
    if nc.target_wer == 0.0:
        clean = [AnnotatedUtterance(
            tokens=list(u.tokens), slots=list(u.slots), keywords=list(u.keywords),
            intent=u.intent, session_id=u.session_id,
            passenger_mode=u.passenger_mode, channel="asr").validate()
            for u in corpus]
        return clean, WerResult(0, 0, 0, sum(len(u.tokens) for u in corpus))
    vocab, probs = _unigram_table(corpus)
    if len(vocab) < 2:
        raise ConfigError("need at least two distinct tokens to corrupt")
    scale = 1.0
    best = None
    for round_no in range(nc.max_rounds):
        rates = tuple(min(0.95, nc.target_wer * p * scale) for p in nc.mix)
        rng = SeededRng(nc.seed, stream=100 + round_no)
        candidate = _corrupt_once(corpus, rates, vocab, probs, rng)
        achieved = corpus_wer(corpus, candidate)
        best = (candidate, achieved)
        if abs(achieved.wer - nc.target_wer) <= nc.tolerance:
            return candidate, achieved
        if achieved.wer > 0:
            scale *= nc.target_wer / achieved.wer
        else:
            scale *= 2.0
    raise ConfigError(
        f"could not calibrate to WER {nc.target_wer:.3f} in {nc.max_rounds} "
        f"rounds; closest achieved {best[1].wer:.4f}")
