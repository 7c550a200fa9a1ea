"""Template-driven synthetic corpus generation.

Templates are whitespace-separated patterns whose tokens are either literal
words (labelled slot None / keyword NonIntent), intent-keyword markers
<INTENT:word>, or slot placeholders <LOC> <POS> <OBJ> <TIME> <PERSON>
<GESTURE> expanded from the config's word lists. A placeholder may name a
word-list variant after a colon (e.g. <OBJ:door>) while keeping the base
placeholder's slot label. The unicode bracket forms (e.g. ⟨LOC⟩) are
accepted interchangeably.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .corpus import INTENTS, NO_SLOT, AnnotatedUtterance
from .errors import ConfigError
from .numerics import SeededRng

PLACEHOLDER_SLOTS = {
    "LOC": "Location",
    "POS": "PositionDirection",
    "OBJ": "Object",
    "TIME": "TimeGuidance",
    "PERSON": "Person",
    "GESTURE": "GestureGaze",
}

# Utterance counts per intent in the default generated corpus (total 3418).
DEFAULT_INTENT_TARGETS = {
    "Stop": 317,
    "Park": 450,
    "PullOver": 295,
    "DropOff": 281,
    "SetDestination": 552,
    "SetRoute": 676,
    "GoFaster": 265,
    "GoSlower": 238,
    "OpenDoor": 142,
    "Other": 202,
}

SESSION_COUNT = 20  # first half singleton, second half dyad


@dataclass
class TemplateSet:
    """Parsed template config: patterns per intent plus expansion lists."""

    word_lists: dict
    prefixes: list
    suffixes: list
    templates: dict
    filler_rate: float = 0.5

    def validate(self) -> "TemplateSet":
        missing = [i for i in INTENTS if not self.templates.get(i)]
        if missing:
            raise ConfigError(f"no templates for intents: {', '.join(missing)}")
        used = set()
        for patterns in self.templates.values():
            for pattern in patterns:
                for tok in pattern.split():
                    kind, _ = _parse_token(tok)
                    if kind in PLACEHOLDER_SLOTS:
                        used.add(kind)
        unused = sorted(set(PLACEHOLDER_SLOTS) - used)
        if unused:
            raise ConfigError(f"templates never use slot placeholders: {unused}")
        for ph in used:
            if not any(key == ph or key.startswith(ph + ":") for key in self.word_lists):
                raise ConfigError(f"no word list for placeholder {ph}")
        return self


def _parse_token(tok: str):
    """Classify one pattern token -> (kind, payload).

    kind is 'literal', 'INTENT', or a placeholder base name; payload is the
    literal word, the keyword word, or the word-list key.
    """
    if (tok.startswith("<") and tok.endswith(">")) or (
            tok.startswith("⟨") and tok.endswith("⟩")):
        inner = tok[1:-1]
        if inner.startswith("INTENT:"):
            return "INTENT", inner[len("INTENT:"):]
        base = inner.split(":", 1)[0]
        if base in PLACEHOLDER_SLOTS:
            return base, inner
        raise ConfigError(f"unknown placeholder {tok}")
    return "literal", tok


def load_templates(path) -> TemplateSet:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return _from_dict(raw)


def default_templates() -> TemplateSet:
    raw = json.loads(
        resources.files("slu.data").joinpath("default_templates.json").read_text()
    )
    return _from_dict(raw)


def _from_dict(raw) -> TemplateSet:
    try:
        ts = TemplateSet(
            word_lists={k: [list(e) for e in v] for k, v in raw["word_lists"].items()},
            prefixes=[list(e) for e in raw.get("prefixes", [])],
            suffixes=[list(e) for e in raw.get("suffixes", [])],
            templates={k: list(v) for k, v in raw["templates"].items()},
            filler_rate=float(raw.get("filler_rate", 0.5)),
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed template config: {e}")
    return ts.validate()


def _expand(pattern: str, ts: TemplateSet, rng: SeededRng):
    tokens, slots, keywords = [], [], []
    for tok in pattern.split():
        kind, payload = _parse_token(tok)
        if kind == "literal":
            tokens.append(payload)
            slots.append(NO_SLOT)
            keywords.append("NonIntent")
        elif kind == "INTENT":
            tokens.append(payload)
            slots.append(NO_SLOT)
            keywords.append("Intent")
        else:
            options = ts.word_lists.get(payload) or ts.word_lists[kind]
            words = options[rng.choice(len(options))]
            for w in words:
                tokens.append(w)
                slots.append(PLACEHOLDER_SLOTS[kind])
                keywords.append("NonIntent")
    return tokens, slots, keywords


def synth_generate(templates: TemplateSet, targets: dict | None = None,
                   seed: int = 0, filler_rate: float | None = None):
    """Emit exactly targets[intent] utterances per intent, shuffled, with
    session ids cycling over 10 singleton and 10 dyad sessions."""
    templates.validate()
    targets = dict(DEFAULT_INTENT_TARGETS if targets is None else targets)
    unknown = [i for i in targets if i not in INTENTS]
    if unknown:
        raise ConfigError(f"unknown intents in targets: {unknown}")
    for intent, count in targets.items():
        if count > 0 and not templates.templates.get(intent):
            raise ConfigError(f"no templates for intent {intent}")
    rate = templates.filler_rate if filler_rate is None else filler_rate
    rng = SeededRng(seed, stream=29)
    drafts = []
    for intent in INTENTS:
        patterns = templates.templates.get(intent, [])
        for _ in range(targets.get(intent, 0)):
            pattern = patterns[rng.choice(len(patterns))]
            tokens, slots, keywords = _expand(pattern, templates, rng)
            if templates.prefixes and rng.uniform() < rate:
                pre = templates.prefixes[rng.choice(len(templates.prefixes))]
                tokens = list(pre) + tokens
                slots = [NO_SLOT] * len(pre) + slots
                keywords = ["NonIntent"] * len(pre) + keywords
            if templates.suffixes and rng.uniform() < rate:
                suf = templates.suffixes[rng.choice(len(templates.suffixes))]
                tokens = tokens + list(suf)
                slots = slots + [NO_SLOT] * len(suf)
                keywords = keywords + ["NonIntent"] * len(suf)
            drafts.append((intent, tokens, slots, keywords))
    order = rng.permutation(len(drafts))
    corpus = []
    for pos, draft_idx in enumerate(order):
        intent, tokens, slots, keywords = drafts[draft_idx]
        session = pos % SESSION_COUNT
        corpus.append(AnnotatedUtterance(
            tokens=tokens,
            slots=slots,
            keywords=keywords,
            intent=intent,
            session_id=f"s{session + 1:02d}",
            passenger_mode="singleton" if session < SESSION_COUNT // 2 else "dyad",
            channel="transcript",
        ).validate())
    return corpus
