"""Vocabulary handling and word-vector loading.

Pretrained vectors use the plain text distribution format: UTF-8, one entry
per line, token followed by D decimal reals, single-space separated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EmbeddingFormatError
from .numerics import SeededRng

PAD, UNK, BOU, EOU = "<PAD>", "<UNK>", "<BOU>", "<EOU>"
RESERVED = (PAD, UNK, BOU, EOU)
PAD_IDX, UNK_IDX, BOU_IDX, EOU_IDX = 0, 1, 2, 3

OOV_SCALE = 0.05
DEFAULT_DIM = 100

_TOKEN_RE = re.compile(r"[\w']+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, detach punctuation as own tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    """Dense token -> index map with four reserved leading entries."""

    tokens: list[str]
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if tuple(self.tokens[:4]) != RESERVED:
            raise ValueError(f"vocabulary must start with {RESERVED}")
        if not self.index:
            self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, token_lists) -> "Vocabulary":
        seen = set()
        for toks in token_lists:
            seen.update(toks)
        ordinary = sorted(seen - set(RESERVED))
        return cls(tokens=list(RESERVED) + ordinary)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def encode(self, tokens) -> np.ndarray:
        """Token ids with out-of-vocabulary tokens mapped to UNK."""
        return np.array([self.index.get(t, UNK_IDX) for t in tokens], dtype=np.int64)


@dataclass
class EmbeddingMatrix:
    """V x D float64 matrix; row i is the vector for vocabulary token i."""

    matrix: np.ndarray
    dim: int
    trainable: bool = True


def init_embedding(vocab: Vocabulary, dim: int, rng: SeededRng) -> EmbeddingMatrix:
    """Random uniform(-0.05, 0.05) rows; PAD row stays zero."""
    m = np.zeros((len(vocab), dim))
    for i in range(len(vocab)):
        if i == PAD_IDX:
            continue
        m[i] = rng.uniform(-OOV_SCALE, OOV_SCALE, dim)
    return EmbeddingMatrix(matrix=m, dim=dim, trainable=True)


def _parse_line(line: str, lineno: int):
    parts = line.rstrip("\n").split(" ")
    if len(parts) < 2:
        raise EmbeddingFormatError("expected 'token v1 ... vD'", line=lineno)
    try:
        vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
    except ValueError:
        raise EmbeddingFormatError("non-numeric vector component", line=lineno)
    return parts[0], vec


def load_pretrained(path, vocab: Vocabulary, rng: SeededRng) -> EmbeddingMatrix:
    """Copy file vectors for known tokens; random-init the rest.

    Reserved tokens are never taken from the file: PAD is zero, UNK/BOU/EOU
    are uniform(-0.05, 0.05). Inconsistent dimensions raise with the line
    number of the first offending line.
    """
    file_vecs = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            token, vec = _parse_line(line, lineno)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise EmbeddingFormatError(
                    f"expected {dim} values, got {vec.size}", line=lineno
                )
            if token in vocab.index and token not in RESERVED:
                file_vecs[vocab.index[token]] = vec
    if dim is None:
        dim = DEFAULT_DIM
    m = np.zeros((len(vocab), dim))
    for i in range(len(vocab)):
        if i == PAD_IDX:
            continue
        if i in file_vecs:
            m[i] = file_vecs[i]
        else:
            m[i] = rng.uniform(-OOV_SCALE, OOV_SCALE, dim)
    return EmbeddingMatrix(matrix=m, dim=dim, trainable=True)


def lookup(emb: EmbeddingMatrix, tokens, vocab: Vocabulary) -> np.ndarray:
    """Embedding rows for a token list, (T, D). Unknown tokens use UNK."""
    ids = vocab.encode(tokens)
    return emb.matrix[ids]
