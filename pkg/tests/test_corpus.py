import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import utt
from slu.corpus import (INTENTS, corpus_stats, load_corpus, save_corpus,
                        stratified_kfold)
from slu.errors import ConfigError, CorpusFormatError
from slu.synth import (DEFAULT_INTENT_TARGETS, TemplateSet, load_templates,
                       synth_generate)


def write_records(tmp_path, records):
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


def record(**overrides):
    base = {
        "tokens": ["stop", "the", "car"],
        "slots": ["None", "None", "Object"],
        "keywords": ["Intent", "NonIntent", "NonIntent"],
        "intent": "Stop",
        "session_id": "s01",
        "passenger_mode": "singleton",
        "channel": "transcript",
    }
    base.update(overrides)
    return base


class TestLoadCorpus:
    def test_valid_two_records(self, tmp_path):
        path = write_records(tmp_path, [record(), record(intent="Park")])
        corpus = load_corpus(path)
        assert len(corpus) == 2
        assert corpus[1].intent == "Park"

    def test_misaligned_slots_reports_line(self, tmp_path):
        bad = record(tokens=["a", "b", "c", "d"])  # 4 tokens, 3 slots
        path = write_records(tmp_path, [record(), bad])
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_corpus(path)

    def test_unknown_slot_label(self, tmp_path):
        path = write_records(tmp_path, [record(slots=["None", "None", "Speed"])])
        with pytest.raises(CorpusFormatError, match="Speed"):
            load_corpus(path)

    def test_missing_field(self, tmp_path):
        rec = record()
        del rec["keywords"]
        path = write_records(tmp_path, [rec])
        with pytest.raises(CorpusFormatError, match="keywords"):
            load_corpus(path)

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text(json.dumps(record()) + "\n{oops\n")
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_corpus(path)

    def test_save_load_roundtrip(self, tmp_path, small_corpus):
        path = tmp_path / "round.jsonl"
        save_corpus(path, small_corpus)
        again = load_corpus(path)
        assert again == small_corpus


class TestStratifiedKfold:
    def test_single_class_balanced(self):
        corpus = [utt(["stop"], intent="Stop") for _ in range(20)]
        assignment = stratified_kfold(corpus, 10, seed=1)
        sizes = np.bincount(assignment.folds, minlength=10)
        assert np.all(sizes == 2)

    def test_default_corpus_proportions(self, default_corpus):
        k = 10
        assignment = stratified_kfold(default_corpus, k, seed=3)
        for intent, total in DEFAULT_INTENT_TARGETS.items():
            members = [i for i, u in enumerate(default_corpus) if u.intent == intent]
            per_fold = np.bincount(assignment.folds[members], minlength=k)
            expected = total / k
            assert np.all(np.abs(per_fold - expected) <= 2), intent

    def test_partition_exact(self, small_corpus):
        assignment = stratified_kfold(small_corpus, 5, seed=2)
        seen = np.concatenate([assignment.test_indices(f) for f in range(5)])
        assert sorted(seen) == list(range(len(small_corpus)))
        for f in range(5):
            train = set(assignment.train_indices(f))
            test = set(assignment.test_indices(f))
            assert not train & test
            assert len(train | test) == len(small_corpus)

    def test_same_seed_identical(self, small_corpus):
        a = stratified_kfold(small_corpus, 4, seed=9)
        b = stratified_kfold(small_corpus, 4, seed=9)
        assert np.array_equal(a.folds, b.folds)

    def test_small_class_warns(self):
        corpus = [utt(["stop"], intent="Stop") for _ in range(10)]
        corpus += [utt(["park"], intent="Park", keywords=["Intent"])
                   for _ in range(2)]
        with pytest.warns(UserWarning, match="Park"):
            stratified_kfold(corpus, 5, seed=0)

    def test_k_too_small(self, small_corpus):
        with pytest.raises(ValueError):
            stratified_kfold(small_corpus, 1, seed=0)


class TestCorpusStats:
    def test_empty_corpus_zeros(self):
        st_ = corpus_stats([])
        assert st_.total_tokens == 0
        assert all(v == 0 for v in st_.intent_counts.values())
        assert st_.intent_or_valid_slot == 0

    def test_hand_tally(self):
        u = utt(["park", "right", "here"],
                slots=["None", "PositionDirection", "PositionDirection"],
                keywords=["Intent", "NonIntent", "NonIntent"],
                intent="Park")
        st_ = corpus_stats([u])
        assert st_.total_tokens == 3
        assert st_.intent_counts["Park"] == 1
        assert st_.slot_counts["PositionDirection"] == 2
        assert st_.keyword_counts["Intent"] == 1
        assert st_.intent_or_valid_slot == 3  # all three salient
        assert st_.non_intent_and_non_slot == 0

    def test_partition_identity(self, default_corpus):
        st_ = corpus_stats(default_corpus)
        assert st_.intent_or_valid_slot + st_.non_intent_and_non_slot == st_.total_tokens
        assert sum(st_.slot_counts.values()) == st_.total_tokens
        assert sum(st_.keyword_counts.values()) == st_.total_tokens
        assert st_.valid_slot + st_.non_slot == st_.total_tokens


class TestSynthGenerate:
    def test_default_targets_total(self, default_corpus):
        assert len(default_corpus) == 3418
        counts = corpus_stats(default_corpus).intent_counts
        assert counts == DEFAULT_INTENT_TARGETS

    def test_single_template_single_utterance(self):
        ts = TemplateSet(
            word_lists={"LOC": [["the", "mall"]], "POS": [["left"]],
                        "OBJ": [["the", "door"]], "TIME": [["now"]],
                        "PERSON": [["him"]], "GESTURE": [["that"]]},
            prefixes=[], suffixes=[],
            templates={i: ["<INTENT:x> <LOC> <POS> <OBJ> <TIME> <PERSON> <GESTURE>"]
                       for i in INTENTS},
            filler_rate=0.0)
        ts.templates["Stop"] = ["<INTENT:stop> the car"]
        corpus = synth_generate(ts, targets={"Stop": 1}, seed=0)
        assert len(corpus) == 1
        u = corpus[0]
        assert u.tokens == ["stop", "the", "car"]
        assert u.keywords == ["Intent", "NonIntent", "NonIntent"]
        assert u.slots == ["None", "None", "None"]
        assert u.intent == "Stop"

    def test_filler_fraction_in_band(self, default_corpus):
        st_ = corpus_stats(default_corpus)
        frac = st_.non_intent_and_non_slot / st_.total_tokens
        assert 0.42 <= frac <= 0.48

    def test_deterministic_per_seed(self, templates):
        a = synth_generate(templates, targets={"Stop": 5, "Park": 5}, seed=4)
        b = synth_generate(templates, targets={"Stop": 5, "Park": 5}, seed=4)
        assert a == b

    def test_all_utterances_valid_and_slot_types_covered(self, default_corpus):
        st_ = corpus_stats(default_corpus)
        for slot, count in st_.slot_counts.items():
            assert count > 0, slot

    def test_missing_intent_template_rejected(self, templates):
        broken = TemplateSet(word_lists=templates.word_lists,
                             prefixes=[], suffixes=[],
                             templates={"Stop": ["<INTENT:stop>"]})
        with pytest.raises(ConfigError):
            broken.validate()

    def test_session_split_mechanics(self, default_corpus):
        singles = {u.session_id for u in default_corpus
                   if u.passenger_mode == "singleton"}
        dyads = {u.session_id for u in default_corpus
                 if u.passenger_mode == "dyad"}
        assert len(singles) == 10 and len(dyads) == 10
        assert not singles & dyads

    def test_templates_load_from_file(self, tmp_path, templates):
        path = tmp_path / "t.json"
        path.write_text(json.dumps({
            "word_lists": templates.word_lists,
            "prefixes": templates.prefixes,
            "suffixes": templates.suffixes,
            "templates": templates.templates,
            "filler_rate": templates.filler_rate,
        }))
        loaded = load_templates(path)
        assert loaded == templates


@pytest.mark.filterwarnings("ignore:intent .* utterances")
@given(st.lists(st.sampled_from(INTENTS), min_size=20, max_size=60))
@settings(max_examples=20, deadline=None)
def test_kfold_partition_property(intents):
    corpus = [utt(["stop"], intent=i) for i in intents]
    k = 4
    if len(corpus) < k:
        return
    assignment = stratified_kfold(corpus, k, seed=0)
    assert len(assignment.folds) == len(corpus)
    assert set(assignment.folds) <= set(range(k))
    covered = np.concatenate([assignment.test_indices(f) for f in range(k)])
    assert sorted(covered) == list(range(len(corpus)))
