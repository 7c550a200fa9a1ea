import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import utt
from slu.asr_noise import NoiseConfig, corpus_wer, corrupt, wer
from slu.errors import ConfigError
from slu.synth import default_templates, synth_generate

words = st.lists(st.sampled_from(["go", "stop", "left"]), max_size=6)


def edit_distance_oracle(ref, hyp):
    """Textbook full-table edit distance, kept independent of wer()."""
    n, m = len(ref), len(hyp)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        table[i][0] = i
    for j in range(m + 1):
        table[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            table[i][j] = min(
                table[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
            )
    return table[n][m]


class TestWer:
    def test_identical(self):
        r = wer(["go", "left"], ["go", "left"])
        assert (r.substitutions, r.deletions, r.insertions) == (0, 0, 0)
        assert r.wer == 0.0

    def test_substitution_example(self):
        r = wer(["go", "faster", "please"], ["go", "fast", "please"])
        assert (r.substitutions, r.deletions, r.insertions) == (1, 0, 0)
        assert r.wer == pytest.approx(1 / 3)

    def test_full_deletion(self):
        r = wer(["stop"], [])
        assert (r.substitutions, r.deletions, r.insertions) == (0, 1, 0)
        assert r.wer == 1.0

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            wer([], ["x"])

    def test_counts_sum_to_distance(self):
        r = wer(["a", "b", "c", "d"], ["b", "x", "d", "y", "z"])
        dist = edit_distance_oracle(["a", "b", "c", "d"],
                                    ["b", "x", "d", "y", "z"])
        assert r.substitutions + r.deletions + r.insertions == dist

    def test_wer_can_exceed_one(self):
        r = wer(["a"], ["x", "y", "z"])
        assert r.wer > 1.0

    @given(words.filter(lambda w: len(w) >= 1), words)
    @settings(max_examples=200, deadline=None)
    def test_matches_oracle(self, ref, hyp):
        r = wer(ref, hyp)
        dist = edit_distance_oracle(ref, hyp)
        assert r.substitutions + r.deletions + r.insertions == dist
        assert r.ref_length == len(ref)


def test_exhaustive_small_alphabet_up_to_length_3():
    # full exhaustive pass over length <= 6 pairs runs in the acceptance suite
    alpha = ["a", "b", "c"]
    seqs = [list(s) for n in range(4) for s in itertools.product(alpha, repeat=n)]
    for ref in seqs:
        if not ref:
            continue
        for hyp in seqs:
            r = wer(ref, hyp)
            assert r.substitutions + r.deletions + r.insertions == \
                edit_distance_oracle(ref, hyp)


@pytest.fixture(scope="module")
def noise_corpus():
    targets = {i: 30 for i in
               ("Stop", "Park", "PullOver", "DropOff", "SetDestination",
                "SetRoute", "GoFaster", "GoSlower", "OpenDoor", "Other")}
    return synth_generate(default_templates(), targets=targets, seed=21)


class TestCorrupt:
    def test_target_zero_unchanged(self, noise_corpus):
        corrupted, achieved = corrupt(noise_corpus, NoiseConfig(target_wer=0.0))
        assert achieved.wer == 0.0
        for before, after in zip(noise_corpus, corrupted):
            assert before.tokens == after.tokens
            assert before.slots == after.slots
            assert after.channel == "asr"

    def test_calibrated_within_tolerance(self, noise_corpus):
        nc = NoiseConfig(target_wer=0.136, seed=5)
        corrupted, achieved = corrupt(noise_corpus, nc)
        assert abs(achieved.wer - 0.136) <= nc.tolerance
        measured = corpus_wer(noise_corpus, corrupted)
        assert measured.wer == pytest.approx(achieved.wer)

    def test_preserves_metadata_and_count(self, noise_corpus):
        corrupted, _ = corrupt(noise_corpus, NoiseConfig(target_wer=0.2, seed=2))
        assert len(corrupted) == len(noise_corpus)
        for before, after in zip(noise_corpus, corrupted):
            assert before.intent == after.intent
            assert before.session_id == after.session_id
            assert before.passenger_mode == after.passenger_mode
            assert after.channel == "asr"
            assert len(after.tokens) == len(after.slots) == len(after.keywords)
            assert len(after.tokens) >= 1

    def test_deterministic_per_seed(self, noise_corpus):
        nc = NoiseConfig(target_wer=0.15, seed=9)
        a, ra = corrupt(noise_corpus, nc)
        b, rb = corrupt(noise_corpus, nc)
        assert a == b
        assert ra == rb

    def test_inserted_tokens_get_null_labels(self, noise_corpus):
        nc = NoiseConfig(target_wer=0.3, mix=(0.0, 0.0, 1.0), seed=4)
        corrupted, achieved = corrupt(noise_corpus, nc)
        assert achieved.insertions > 0
        assert achieved.substitutions == 0 and achieved.deletions == 0
        for before, after in zip(noise_corpus, corrupted):
            assert len(after.tokens) >= len(before.tokens)

    def test_subset_wer_reporting(self, noise_corpus):
        corrupted, _ = corrupt(noise_corpus, NoiseConfig(target_wer=0.136, seed=5))
        singleton = corpus_wer(noise_corpus, corrupted, mode="singleton")
        dyad = corpus_wer(noise_corpus, corrupted, mode="dyad")
        assert singleton.ref_length + dyad.ref_length == \
            corpus_wer(noise_corpus, corrupted).ref_length
        assert 0 < singleton.wer < 1 and 0 < dyad.wer < 1

    def test_bad_mix_rejected(self):
        with pytest.raises(ConfigError):
            NoiseConfig(mix=(0.5, 0.5, 0.5)).validate()
        with pytest.raises(ConfigError):
            NoiseConfig(target_wer=1.2).validate()

    def test_config_file_roundtrip(self, tmp_path):
        import json
        path = tmp_path / "nc.json"
        path.write_text(json.dumps({"target_wer": 0.2, "mix": [0.6, 0.2, 0.2]}))
        nc = NoiseConfig.from_file(path)
        assert nc.target_wer == 0.2
        assert nc.mix == (0.6, 0.2, 0.2)
        path.write_text(json.dumps({"target_wer": 0.2, "bogus": 1}))
        with pytest.raises(ConfigError, match="bogus"):
            NoiseConfig.from_file(path)

    def test_labels_only_tokens_change_wer(self, noise_corpus):
        # wer reads tokens only; label fields are irrelevant
        a = noise_corpus[0]
        b = utt(a.tokens, intent="Other")
        assert wer(a.tokens, b.tokens).wer == 0.0


@given(words.filter(lambda w: len(w) >= 1))
@settings(max_examples=50, deadline=None)
def test_wer_self_is_zero(tokens):
    assert wer(tokens, tokens).wer == 0.0
