"""Confusion-matrix metrics and the k-fold cross-validation driver.

Reports carry per-class precision/recall/F1 with supports plus two overall
summaries: support-weighted and unweighted (macro) means over classes with
nonzero support. Both are always printed since either averaging convention
is defensible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models as M
from .corpus import INTENTS, KEYWORDS, SLOTS, stratified_kfold
from .errors import TrainingDivergedError
from .training import TrainConfig, train


@dataclass
class ConfusionMatrix:
    labels: tuple
    counts: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            n = len(self.labels)
            self.counts = np.zeros((n, n), dtype=np.int64)
        self.index = {lab: i for i, lab in enumerate(self.labels)}

    def add(self, truth, predicted, weight: int = 1):
        self.counts[self.index[truth], self.index[predicted]] += weight

    def merge(self, other: "ConfusionMatrix"):
        if other.labels != self.labels:
            raise ValueError("label sets differ")
        self.counts += other.counts

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    per_class: dict
    overall_weighted: ClassMetrics
    overall_macro: ClassMetrics
    total: int


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def class_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 with support-weighted and macro
    overall rows. Classes with zero support get zero weight."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    counts = cm.counts
    tp = np.diag(counts).astype(float)
    pred = counts.sum(axis=0).astype(float)
    truth = counts.sum(axis=1).astype(float)
    per_class = {}
    for i, lab in enumerate(cm.labels):
        p = tp[i] / pred[i] if pred[i] > 0 else 0.0
        r = tp[i] / truth[i] if truth[i] > 0 else 0.0
        per_class[lab] = ClassMetrics(p, r, _f1(p, r), int(truth[i]))
    support = truth
    weight_total = support.sum()
    live = support > 0
    weighted = ClassMetrics(
        precision=float(sum(per_class[l].precision * per_class[l].support
                            for l in cm.labels) / weight_total),
        recall=float(sum(per_class[l].recall * per_class[l].support
                         for l in cm.labels) / weight_total),
        f1=float(sum(per_class[l].f1 * per_class[l].support
                     for l in cm.labels) / weight_total),
        support=int(weight_total),
    )
    live_labels = [l for i, l in enumerate(cm.labels) if live[i]]
    macro = ClassMetrics(
        precision=float(np.mean([per_class[l].precision for l in live_labels])),
        recall=float(np.mean([per_class[l].recall for l in live_labels])),
        f1=float(np.mean([per_class[l].f1 for l in live_labels])),
        support=int(weight_total),
    )
    return MetricsReport(per_class=per_class, overall_weighted=weighted,
                         overall_macro=macro, total=cm.total)


# ---------------------------------------------------------------------------
# Scoring a model on a corpus
# ---------------------------------------------------------------------------

SECTION_LABELS = {"intent": INTENTS, "slot": SLOTS, "keyword": KEYWORDS}


def model_sections(config: M.ModelConfig) -> tuple:
    """Which scoring sections a family produces."""
    kind = config.spec.kind
    if kind in ("hybrid", "hier_separate", "hier_joint"):
        return ("intent", "slot", "keyword")
    if kind == "separate":
        return ("intent",)
    if config.spec.joint_keywords:
        return ("intent", "slot", "keyword")
    return ("intent", "slot")


def evaluate_model(model: M.TrainedModel, corpus) -> dict:
    """Score every utterance; returns section -> ConfusionMatrix."""
    sections = model_sections(model.config)
    cms = {s: ConfusionMatrix(SECTION_LABELS[s]) for s in sections}
    for utt in corpus:
        pred = M.predict(model, utt.tokens)
        cms["intent"].add(utt.intent, pred.intent)
        if "slot" in cms and pred.slots is not None:
            for t, p in zip(utt.slots, pred.slots):
                cms["slot"].add(t, p)
        if "keyword" in cms and pred.keywords is not None:
            for t, p in zip(utt.keywords, pred.keywords):
                cms["keyword"].add(t, p)
    return cms


@dataclass
class CvResult:
    family: str
    k: int
    seed: int
    pooled: dict                 # section -> MetricsReport
    pooled_cms: dict             # section -> ConfusionMatrix
    per_fold: list = field(default_factory=list)  # fold -> section -> MetricsReport


def cross_validate(config: M.ModelConfig, corpus, k: int = 10, seed: int = 0,
                   tc: TrainConfig | None = None, pretrained=None,
                   lexicon=None, log_fn=None) -> CvResult:
    """Train on k-1 folds, score the held-out fold, pool all held-out
    predictions into one confusion matrix per section."""
    tc = tc or TrainConfig()
    assignment = stratified_kfold(corpus, k, seed)
    sections = model_sections(config)
    pooled = {s: ConfusionMatrix(SECTION_LABELS[s]) for s in sections}
    per_fold = []
    for fold in range(k):
        train_set = [corpus[i] for i in assignment.train_indices(fold)]
        test_set = [corpus[i] for i in assignment.test_indices(fold)]
        fold_tc = TrainConfig(**{**tc.__dict__, "seed": tc.seed + fold})
        if log_fn is not None:
            log_fn(f"fold={fold}\ttrain={len(train_set)}\ttest={len(test_set)}")
        try:
            model, _ = train(config, train_set, fold_tc, pretrained=pretrained,
                             lexicon=lexicon)
        except TrainingDivergedError as e:
            raise TrainingDivergedError(f"fold {fold}: {e}") from e
        cms = evaluate_model(model, test_set)
        per_fold.append({s: class_metrics(cm) for s, cm in cms.items()})
        for s in sections:
            pooled[s].merge(cms[s])
    return CvResult(
        family=config.family,
        k=k,
        seed=seed,
        pooled={s: class_metrics(cm) for s, cm in pooled.items()},
        pooled_cms=pooled,
        per_fold=per_fold,
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

_HEADER = "family\tsection\tclass\tprecision\trecall\tf1\tsupport\tfold"


def report_tsv(family: str, reports: dict, per_fold: list | None = None) -> str:
    """Machine-readable report: one record per class per section.

    'overall' averaging note: weighted = support-weighted mean over classes,
    macro = plain mean over classes with support > 0.
    """
    lines = ["# overall rows: OVERALL_WEIGHTED = support-weighted mean; "
             "OVERALL_MACRO = unweighted mean over classes with support > 0",
             _HEADER]

    def rows(section, report, fold_tag):
        for lab, m in report.per_class.items():
            lines.append(f"{family}\t{section}\t{lab}\t{m.precision:.6f}\t"
                         f"{m.recall:.6f}\t{m.f1:.6f}\t{m.support}\t{fold_tag}")
        w, g = report.overall_weighted, report.overall_macro
        lines.append(f"{family}\t{section}\tOVERALL_WEIGHTED\t{w.precision:.6f}\t"
                     f"{w.recall:.6f}\t{w.f1:.6f}\t{w.support}\t{fold_tag}")
        lines.append(f"{family}\t{section}\tOVERALL_MACRO\t{g.precision:.6f}\t"
                     f"{g.recall:.6f}\t{g.f1:.6f}\t{g.support}\t{fold_tag}")

    for section, report in reports.items():
        rows(section, report, "pooled")
    if per_fold:
        for fold, fold_reports in enumerate(per_fold):
            for section, report in fold_reports.items():
                rows(section, report, str(fold))
    return "\n".join(lines) + "\n"


def report_human(family: str, reports: dict) -> str:
    lines = [f"model family: {family}"]
    for section, report in reports.items():
        lines.append(f"\n[{section}]  ({report.total} scored)")
        lines.append(f"  {'class':<20} {'prec':>6} {'rec':>6} {'f1':>6} {'support':>8}")
        for lab, m in report.per_class.items():
            lines.append(f"  {lab:<20} {m.precision:6.3f} {m.recall:6.3f} "
                         f"{m.f1:6.3f} {m.support:8d}")
        w, g = report.overall_weighted, report.overall_macro
        lines.append(f"  {'overall (weighted)':<20} {w.precision:6.3f} "
                     f"{w.recall:6.3f} {w.f1:6.3f} {w.support:8d}")
        lines.append(f"  {'overall (macro)':<20} {g.precision:6.3f} "
                     f"{g.recall:6.3f} {g.f1:6.3f} {g.support:8d}")
    return "\n".join(lines) + "\n"
