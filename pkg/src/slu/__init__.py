"""Spoken-language-understanding toolkit: joint intent detection and slot
filling with from-scratch recurrent models, a synthetic corpus generator,
cross-validation evaluation, and ASR-noise simulation."""

__version__ = "0.1.0"

from .corpus import (INTENTS, KEYWORDS, SLOTS, AnnotatedUtterance,
                     corpus_stats, load_corpus, save_corpus, stratified_kfold)
from .models import (FAMILY_NAMES, ModelConfig, RuleLexicon, TrainedModel,
                     classify_utterance, filter_salient, joint_infer, predict,
                     rule_map, tag_sequence, wrap_boundaries)
from .training import TrainConfig, load_checkpoint, save_checkpoint, train
from .evaluation import class_metrics, cross_validate, evaluate_model
from .asr_noise import NoiseConfig, WerResult, corpus_wer, corrupt, wer
from .synth import default_templates, load_templates, synth_generate
from .numerics import SeededRng, cross_entropy, finite_diff_check, softmax

__all__ = [
    "INTENTS", "KEYWORDS", "SLOTS", "AnnotatedUtterance", "corpus_stats",
    "load_corpus", "save_corpus", "stratified_kfold",
    "FAMILY_NAMES", "ModelConfig", "RuleLexicon", "TrainedModel",
    "classify_utterance", "filter_salient", "joint_infer", "predict",
    "rule_map", "tag_sequence", "wrap_boundaries",
    "TrainConfig", "load_checkpoint", "save_checkpoint", "train",
    "class_metrics", "cross_validate", "evaluate_model",
    "NoiseConfig", "WerResult", "corpus_wer", "corrupt", "wer",
    "default_templates", "load_templates", "synth_generate",
    "SeededRng", "cross_entropy", "finite_diff_check", "softmax",
]
