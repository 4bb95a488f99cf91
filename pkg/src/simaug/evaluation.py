"""Phase 3: reference classifier, classification metrics, ROC and PR curves,
and paired significance testing over cross-validation folds.

Everything here is pure Python.  The multinomial Naive Bayes model and the
Student t machinery are small enough that owning them keeps the pipeline
dependency-light and the numbers reproducible to the last bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .datasets import Dataset, kfold_split, stratified_split
from .textproc import tokenize

SIGNIFICANCE_LEVEL = 0.05
ORIGINAL_ROW_NAME = "original (text)"


class SingleClassError(ValueError):
    """Training data must contain at least two distinct labels."""


class DegenerateSampleError(ValueError):
    """Paired differences with zero variance admit no t statistic."""


@dataclass(frozen=True)
class NaiveBayesModel:
    """Multinomial Naive Bayes with add-one smoothing over whitespace tokens.

    `labels` is sorted and fixes both the score column order and the
    tie-break order for prediction.  Tokens outside the training vocabulary
    are ignored at prediction time.
    """

    labels: tuple[str, ...]
    vocabulary: frozenset[str]
    log_priors: dict[str, float]
    token_log_likelihoods: dict[str, dict[str, float]]
    unseen_log_likelihoods: dict[str, float]


def train_reference_classifier(train: Dataset) -> NaiveBayesModel:
    labels = tuple(sorted({record.label for record in train.records}))
    if len(labels) < 2:
        raise SingleClassError(f"training data has {len(labels)} label(s); need at least 2")

    token_counts: dict[str, dict[str, int]] = {label: {} for label in labels}
    document_counts: dict[str, int] = {label: 0 for label in labels}
    vocabulary: set[str] = set()
    for record in train.records:
        document_counts[record.label] += 1
        counts = token_counts[record.label]
        for token in tokenize(record.text):
            counts[token] = counts.get(token, 0) + 1
            vocabulary.add(token)

    total_documents = len(train.records)
    vocab_size = len(vocabulary)
    log_priors = {
        label: math.log(document_counts[label] / total_documents) for label in labels
    }
    token_log_likelihoods: dict[str, dict[str, float]] = {}
    unseen_log_likelihoods: dict[str, float] = {}
    for label in labels:
        total_tokens = sum(token_counts[label].values())
        denominator = total_tokens + vocab_size
        if denominator == 0:
            # Empty vocabulary: prediction falls back to priors alone.
            token_log_likelihoods[label] = {}
            unseen_log_likelihoods[label] = 0.0
            continue
        token_log_likelihoods[label] = {
            token: math.log((count + 1) / denominator)
            for token, count in token_counts[label].items()
        }
        unseen_log_likelihoods[label] = math.log(1 / denominator)

    return NaiveBayesModel(
        labels=labels,
        vocabulary=frozenset(vocabulary),
        log_priors=log_priors,
        token_log_likelihoods=token_log_likelihoods,
        unseen_log_likelihoods=unseen_log_likelihoods,
    )


def predict(model: NaiveBayesModel, texts: list[str]) -> tuple[list[str], list[list[float]]]:
    """Predicted labels and normalized posterior rows in `model.labels` order.

    Ties in the posterior break toward the earlier label.
    """
    predicted: list[str] = []
    score_rows: list[list[float]] = []
    for text in texts:
        tokens = [token for token in tokenize(text) if token in model.vocabulary]
        log_scores = []
        for label in model.labels:
            likelihoods = model.token_log_likelihoods[label]
            unseen = model.unseen_log_likelihoods[label]
            score = model.log_priors[label]
            for token in tokens:
                score += likelihoods.get(token, unseen)
            log_scores.append(score)
        peak = max(log_scores)
        unnormalized = [math.exp(score - peak) for score in log_scores]
        total = math.fsum(unnormalized)
        posteriors = [value / total for value in unnormalized]
        best = max(range(len(model.labels)), key=lambda i: (posteriors[i], -i))
        predicted.append(model.labels[best])
        score_rows.append(posteriors)
    return predicted, score_rows


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true labels, columns predicted, both in `labels` order."""

    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def as_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": [list(row) for row in self.counts]}


@dataclass(frozen=True)
class MetricSummary:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }


def classification_metrics(
    truth: list[str], predicted: list[str]
) -> tuple[ConfusionMatrix, MetricSummary]:
    """Confusion matrix plus accuracy and macro precision/recall/F1.

    Undefined per-class ratios (0/0) count as 0, so a label never predicted
    contributes zero precision to the macro average.
    """
    if len(truth) != len(predicted):
        raise ValueError(f"length mismatch: {len(truth)} truths vs {len(predicted)} predictions")
    if not truth:
        raise ValueError("cannot score an empty prediction set")

    labels = tuple(sorted(set(truth) | set(predicted)))
    index = {label: i for i, label in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for t, p in zip(truth, predicted):
        counts[index[t]][index[p]] += 1

    precisions, recalls, f1s = [], [], []
    for i, _ in enumerate(labels):
        tp = counts[i][i]
        fp = sum(counts[r][i] for r in range(len(labels))) - tp
        fn = sum(counts[i]) - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)

    matrix = ConfusionMatrix(labels=labels, counts=tuple(tuple(row) for row in counts))
    summary = MetricSummary(
        accuracy=sum(counts[i][i] for i in range(len(labels))) / len(truth),
        macro_precision=math.fsum(precisions) / len(labels),
        macro_recall=math.fsum(recalls) / len(labels),
        macro_f1=math.fsum(f1s) / len(labels),
    )
    return matrix, summary


@dataclass(frozen=True)
class CurveSet:
    """One-vs-rest ROC and PR curves per label, with areas under ROC.

    Curve points are (threshold, x, y): x is FPR for ROC and recall for PR.
    Labels without both a positive and a negative example are excluded.
    """

    roc: dict[str, tuple[tuple[float, float, float], ...]]
    pr: dict[str, tuple[tuple[float, float, float], ...]]
    roc_auc: dict[str, float]
    macro_roc_auc: float | None

    def as_dict(self) -> dict:
        return {
            "roc": {label: [list(p) for p in points] for label, points in self.roc.items()},
            "pr": {label: [list(p) for p in points] for label, points in self.pr.items()},
            "roc_auc": dict(self.roc_auc),
            "macro_roc_auc": self.macro_roc_auc,
        }


def _binary_curves(flags: list[int], scores: list[float]):
    """ROC and PR point lists from one label's indicator flags and scores."""
    positives = sum(flags)
    negatives = len(flags) - positives
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    thresholds: list[float] = []
    tps: list[int] = []
    fps: list[int] = []
    tp = fp = 0
    for rank, i in enumerate(order):
        tp += flags[i]
        fp += 1 - flags[i]
        last_of_group = rank + 1 == len(order) or scores[order[rank + 1]] != scores[i]
        if last_of_group:
            thresholds.append(scores[i])
            tps.append(tp)
            fps.append(fp)

    anchor = thresholds[0] + 1.0
    roc = [(anchor, 0.0, 0.0)]
    pr = [(anchor, 0.0, 1.0)]
    for threshold, tp, fp in zip(thresholds, tps, fps):
        roc.append((threshold, fp / negatives, tp / positives))
        pr.append((threshold, tp / positives, tp / (tp + fp)))
    return tuple(roc), tuple(pr)


def _trapezoid_area(points) -> float:
    area = 0.0
    for (_, x0, y0), (_, x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y1 + y0) / 2.0
    return area


def roc_pr_curves(
    truth: list[str], score_rows: list[list[float]], label_order: tuple[str, ...]
) -> CurveSet:
    """One-vs-rest curves by sweeping a threshold over each label's scores.

    AUC is the trapezoid area under the ROC curve.  A label with no positive
    (or no negative) examples in `truth` is skipped with a warning and does
    not enter the macro average.
    """
    if len(truth) != len(score_rows):
        raise ValueError(f"length mismatch: {len(truth)} truths vs {len(score_rows)} score rows")
    roc: dict[str, tuple] = {}
    pr: dict[str, tuple] = {}
    roc_auc: dict[str, float] = {}
    for column, label in enumerate(label_order):
        flags = [1 if t == label else 0 for t in truth]
        scores = [row[column] for row in score_rows]
        positives = sum(flags)
        if positives == 0 or positives == len(flags):
            side = "positive" if positives == 0 else "negative"
            warnings.warn(
                f"label {label!r} has no {side} examples; ROC undefined, excluded from macro AUC",
                stacklevel=2,
            )
            continue
        roc_points, pr_points = _binary_curves(flags, scores)
        roc[label] = roc_points
        pr[label] = pr_points
        roc_auc[label] = _trapezoid_area(roc_points)
    macro = math.fsum(roc_auc.values()) / len(roc_auc) if roc_auc else None
    return CurveSet(roc=roc, pr=pr, roc_auc=roc_auc, macro_roc_auc=macro)


def _regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the continued fraction expansion (modified Lentz)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(log_front)
    # The continued fraction converges fastest below the distribution mean;
    # above it, evaluate the complement instead.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    epsilon = 1e-15
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 200):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < epsilon:
            break
    return h


def student_t_two_tailed_p(t_statistic: float, degrees_of_freedom: int) -> float:
    """Two-tailed p-value for Student's t via the incomplete beta function."""
    if degrees_of_freedom < 1:
        raise ValueError(f"degrees of freedom must be positive, got {degrees_of_freedom}")
    df = float(degrees_of_freedom)
    x = df / (df + t_statistic * t_statistic)
    p = _regularized_incomplete_beta(df / 2.0, 0.5, x)
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float
    significant: bool

    def as_dict(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value,
            "significant": self.significant,
        }


def paired_t_test(sample_a: list[float], sample_b: list[float]) -> TTestResult:
    """Two-tailed paired t-test; significance at p <= 0.05.

    Zero variance in the differences (including identical samples) raises
    `DegenerateSampleError` rather than reporting an infinite statistic.
    """
    if len(sample_a) != len(sample_b):
        raise ValueError(f"sample length mismatch: {len(sample_a)} vs {len(sample_b)}")
    n = len(sample_a)
    if n < 2:
        raise ValueError(f"need at least two paired observations, got {n}")
    differences = [x - y for x, y in zip(sample_a, sample_b)]
    mean = math.fsum(differences) / n
    variance = math.fsum((d - mean) ** 2 for d in differences) / (n - 1)
    if variance <= 0.0:
        raise DegenerateSampleError("paired differences have zero variance")
    t_statistic = mean / math.sqrt(variance / n)
    degrees_of_freedom = n - 1
    p_value = student_t_two_tailed_p(t_statistic, degrees_of_freedom)
    return TTestResult(
        t_statistic=t_statistic,
        degrees_of_freedom=degrees_of_freedom,
        p_value=p_value,
        significant=p_value <= SIGNIFICANCE_LEVEL,
    )


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0
    k: int = 5

    def to_dict(self) -> dict:
        return {"train_fraction": self.train_fraction, "seed": self.seed, "k": self.k}

    @classmethod
    def from_dict(cls, data: dict) -> "SplitConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown split options: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class SplitScores:
    """Everything measured on one test split for one trained model."""

    metrics: MetricSummary
    confusion: ConfusionMatrix
    curves: CurveSet

    def as_dict(self) -> dict:
        return {
            "metrics": self.metrics.as_dict(),
            "confusion": self.confusion.as_dict(),
            "roc_auc": self.curves.roc_auc,
            "macro_roc_auc": self.curves.macro_roc_auc,
        }


@dataclass(frozen=True)
class EvaluationReport:
    """One dataset variant's scores on its own test split and the original's."""

    name: str
    augmented_split: SplitScores
    not_augmented_split: SplitScores
    per_fold_f1: tuple[float, ...]
    split: SplitConfig

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "augmented_split": self.augmented_split.as_dict(),
            "not_augmented_split": self.not_augmented_split.as_dict(),
            "per_fold_f1": list(self.per_fold_f1),
            "split": self.split.to_dict(),
        }


def _score_on(model: NaiveBayesModel, test: Dataset) -> SplitScores:
    texts = [record.text for record in test.records]
    truth = [record.label for record in test.records]
    predicted, score_rows = predict(model, texts)
    confusion, summary = classification_metrics(truth, predicted)
    curves = roc_pr_curves(truth, score_rows, model.labels)
    return SplitScores(metrics=summary, confusion=confusion, curves=curves)


def _fold_scores(train: Dataset, split: SplitConfig) -> tuple[float, ...]:
    scores = []
    for fold_train, fold_validation in kfold_split(train, split.k, split.seed):
        model = train_reference_classifier(fold_train)
        truth = [record.label for record in fold_validation.records]
        predicted, _ = predict(model, [record.text for record in fold_validation.records])
        _, summary = classification_metrics(truth, predicted)
        scores.append(summary.macro_f1)
    return tuple(scores)


def evaluate_pipeline(
    original: Dataset,
    augmented: dict[str, Dataset],
    split: SplitConfig | None = None,
) -> tuple[dict[str, EvaluationReport], dict[str, TTestResult | None]]:
    """Run phase 3 over the original dataset and each augmented variant.

    Every variant gets the same deterministic split treatment: stratified
    train/test with the shared seed, a model trained on the train side, and
    scores on both its own test split and the original's test split.  Fold
    macro-F1 scores from identically seeded k-fold splits of each train side
    feed a paired t-test of variant vs original, paired by fold index; a
    degenerate pairing (identical scores, as when a variant equals the
    original) yields None instead of a result.
    """
    split = split if split is not None else SplitConfig()
    _, original_test = stratified_split(original, split.train_fraction, split.seed)

    variants: dict[str, Dataset] = {ORIGINAL_ROW_NAME: original}
    for name, dataset in augmented.items():
        if name == ORIGINAL_ROW_NAME:
            raise ValueError(f"variant name {name!r} is reserved for the original dataset")
        variants[name] = dataset

    reports: dict[str, EvaluationReport] = {}
    fold_scores: dict[str, tuple[float, ...]] = {}
    for name, dataset in variants.items():
        train, test = stratified_split(dataset, split.train_fraction, split.seed)
        model = train_reference_classifier(train)
        reports[name] = EvaluationReport(
            name=name,
            augmented_split=_score_on(model, test),
            not_augmented_split=_score_on(model, original_test),
            per_fold_f1=_fold_scores(train, split),
            split=split,
        )
        fold_scores[name] = reports[name].per_fold_f1

    t_tests: dict[str, TTestResult | None] = {}
    for name in variants:
        if name == ORIGINAL_ROW_NAME:
            t_tests[name] = None
            continue
        try:
            t_tests[name] = paired_t_test(
                list(fold_scores[name]), list(fold_scores[ORIGINAL_ROW_NAME])
            )
        except DegenerateSampleError:
            t_tests[name] = None
    return reports, t_tests
