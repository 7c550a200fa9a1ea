import pytest

from slu.corpus import AnnotatedUtterance
from slu.synth import default_templates, synth_generate

SMALL_TARGETS = {
    "Stop": 8, "Park": 8, "PullOver": 8, "DropOff": 8, "SetDestination": 8,
    "SetRoute": 8, "GoFaster": 8, "GoSlower": 8, "OpenDoor": 8, "Other": 8,
}


def utt(tokens, slots=None, keywords=None, intent="Stop", **kw):
    n = len(tokens)
    return AnnotatedUtterance(
        tokens=list(tokens),
        slots=list(slots) if slots else ["None"] * n,
        keywords=list(keywords) if keywords else ["NonIntent"] * n,
        intent=intent,
        **kw,
    ).validate()


@pytest.fixture(scope="session")
def templates():
    return default_templates()


@pytest.fixture(scope="session")
def small_corpus(templates):
    """80 balanced utterances, fast to train on."""
    return synth_generate(templates, targets=SMALL_TARGETS, seed=13)


@pytest.fixture(scope="session")
def default_corpus(templates):
    """The full 3418-utterance corpus with default per-intent targets."""
    return synth_generate(templates, seed=1)
