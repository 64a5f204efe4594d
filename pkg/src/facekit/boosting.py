"""Decision-stump weak learners, discrete AdaBoost stages, and the
attentional cascade.

A stump predicts +1 when polarity*value < polarity*threshold. Stage
training is discrete AdaBoost: alpha = ln((1-e)/e)/2, weights scaled by
exp(-alpha*y*h) and renormalized every round. The stump search is run
for all features at once on pre-sorted columns; tie-breaks (smaller
threshold, then polarity +1, then lower feature index) are identical to
the one-feature reference path, so the batched search selects exactly
the stump a sequential scan would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .haar import HaarFeature, WindowSpec, evaluate_feature
from .images import IntegralImage


class DegenerateSamplesError(ValueError):
    """Training set holds a single class; no stump can be fit."""


EPS_FLOOR = 1e-10  # clamp for perfect stumps so alpha stays finite

_CHUNK = 4096  # feature columns per search block (memory cap)


@dataclass
class Sample:
    """One training window: precomputed feature values, label +1/-1, weight."""

    feature_values: np.ndarray
    label: int
    weight: float = 1.0


@dataclass(frozen=True)
class WeakClassifier:
    feature_index: int
    threshold: float
    polarity: int
    alpha: float = 0.0

    def predict(self, value: float) -> int:
        return 1 if self.polarity * value < self.polarity * self.threshold else -1


@dataclass(frozen=True)
class StrongClassifier:
    """Weighted stump vote; accepts when the vote reaches stage_threshold."""

    weaks: tuple[WeakClassifier, ...]
    stage_threshold: float

    def score_values(self, values: np.ndarray) -> float:
        total = 0.0
        for w in self.weaks:
            total += w.alpha * w.predict(values[w.feature_index])
        return total

    def decide_values(self, values: np.ndarray) -> bool:
        return self.score_values(values) >= self.stage_threshold

    def score_window(
        self,
        ii: IntegralImage,
        features: list[HaarFeature],
        win: WindowSpec,
        origin: tuple[int, int],
        scale: float,
    ) -> float:
        total = 0.0
        for w in self.weaks:
            v = evaluate_feature(ii, features[w.feature_index], win, origin, scale)
            total += w.alpha * w.predict(v)
        return total


@dataclass(frozen=True)
class StageRates:
    """Operating point a stage achieved on its training/validation windows."""

    tpr: float
    fpr: float


@dataclass(frozen=True)
class CascadeTrainingMeta:
    seed: int
    stage_rates: tuple[StageRates, ...]


@dataclass(frozen=True)
class Cascade:
    window: WindowSpec
    features: list[HaarFeature]
    stages: tuple[StrongClassifier, ...]
    training_meta: CascadeTrainingMeta = CascadeTrainingMeta(0, ())

    def accepts_values(self, values: np.ndarray) -> bool:
        return all(st.decide_values(values) for st in self.stages)


@dataclass(frozen=True)
class ClassifyResult:
    """accepted, the 1-based rejecting stage (None on accept), and the
    final-stage margin (score - threshold; 0 for an empty cascade)."""

    accepted: bool
    rejected_at: int | None
    margin: float


@dataclass
class CascadeConfig:
    per_stage_tpr: float = 0.99
    per_stage_fpr: float = 0.5
    overall_fpr_target: float = 1e-3
    max_stages: int = 10
    max_weaks_per_stage: int = 50
    neg_per_stage: int = 500
    seed: int = 0


def stage_scores(stage: StrongClassifier, X: np.ndarray) -> np.ndarray:
    """Vote scores for every row of X; same summation order as score_values."""
    total = np.zeros(X.shape[0], dtype=np.float64)
    for w in stage.weaks:
        col = X[:, w.feature_index]
        h = np.where(w.polarity * col < w.polarity * w.threshold, 1.0, -1.0)
        total += w.alpha * h
    return total


class StumpSearchTable:
    """Per-feature sorted columns supporting repeated weighted stump searches.

    Candidate thresholds per feature are the midpoints between consecutive
    distinct sorted values plus one sentinel below the minimum and one above
    the maximum. Sorting happens once; each search only re-gathers weights.
    """

    def __init__(self, X: np.ndarray, labels: np.ndarray):
        n = X.shape[0]
        self.X = X
        self.labels = labels.astype(np.float64)
        self.order = np.argsort(X, axis=0, kind="stable").astype(np.int32)
        self.V = np.take_along_axis(X, self.order, axis=0)
        self.pos_sorted = (labels[self.order] == 1)
        # cut c splits sorted positions [0, c) / [c, n); interior cuts are
        # valid only between distinct values
        self.valid = np.ones((n + 1, X.shape[1]), dtype=bool)
        if n > 1:
            self.valid[1:n] = self.V[1:] != self.V[:-1]

    def best_stump(self, weights: np.ndarray) -> tuple[int, float, int, float]:
        """Minimal weighted error over all features, thresholds, polarities.

        Returns (feature_index, threshold, polarity, error). Ties resolve
        to the smaller threshold, then polarity +1, then the lower feature
        index -- matching a sequential scan with strict improvement.
        """
        n, nfeat = self.X.shape
        best = None  # (err, feature_index, cut, polarity)
        for lo in range(0, nfeat, _CHUNK):
            hi = min(lo + _CHUNK, nfeat)
            w_sorted = weights[self.order[:, lo:hi]]
            pos = self.pos_sorted[:, lo:hi]
            wpos = np.where(pos, w_sorted, 0.0)
            wneg = np.where(pos, 0.0, w_sorted)
            poscum = np.zeros((n + 1, hi - lo), dtype=np.float64)
            negcum = np.zeros((n + 1, hi - lo), dtype=np.float64)
            np.cumsum(wpos, axis=0, out=poscum[1:])
            np.cumsum(wneg, axis=0, out=negcum[1:])
            postot = poscum[-1]
            negtot = negcum[-1]
            # polarity +1 predicts + below the threshold; -1 predicts + above
            err_plus = negcum + (postot[None, :] - poscum)
            err_minus = poscum + (negtot[None, :] - negcum)
            invalid = ~self.valid[:, lo:hi]
            err_plus[invalid] = np.inf
            err_minus[invalid] = np.inf

            minp = err_plus.min(axis=0)
            cutp = err_plus.argmin(axis=0)
            minm = err_minus.min(axis=0)
            cutm = err_minus.argmin(axis=0)
            plus_wins = (minp < minm) | ((minp == minm) & (cutp <= cutm))
            errs = np.where(plus_wins, minp, minm)
            j = int(errs.argmin())
            cand = (
                float(errs[j]),
                lo + j,
                int(cutp[j] if plus_wins[j] else cutm[j]),
                1 if plus_wins[j] else -1,
            )
            if best is None or cand[0] < best[0]:
                best = cand
        err, fi, cut, pol = best
        col = self.V[:, fi]
        if cut == 0:
            threshold = float(col[0]) - 1.0
        elif cut == n:
            threshold = float(col[-1]) + 1.0
        else:
            threshold = (float(col[cut - 1]) + float(col[cut])) / 2.0
        return fi, threshold, pol, err


def _check_two_classes(labels: np.ndarray) -> None:
    if not ((labels == 1).any() and (labels == -1).any()):
        raise DegenerateSamplesError("need at least one sample of each class")


def train_weak(samples: list[Sample], feature_index: int) -> tuple[WeakClassifier, float]:
    """Best stump on one feature. Sample weights must already sum to 1."""
    values = np.array([s.feature_values[feature_index] for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples])
    weights = np.array([s.weight for s in samples], dtype=np.float64)
    _check_two_classes(labels)
    table = StumpSearchTable(values[:, None], labels)
    _, threshold, polarity, err = table.best_stump(weights)
    return WeakClassifier(feature_index, threshold, polarity), err


class AdaBoostTrainer:
    """Incremental discrete AdaBoost over precomputed feature values.

    Weights are renormalized both entering and leaving a round, so they sum
    to 1 whenever the trainer is observable. A round whose best error
    reaches 0.5 is discarded and training stops; a perfect round (error 0)
    is kept with the clamped alpha and also stops training.
    """

    def __init__(self, X: np.ndarray, labels: np.ndarray, weights: np.ndarray | None = None):
        _check_two_classes(labels)
        self.X = X
        self.labels = labels.astype(np.float64)
        if weights is None:
            weights = np.full(X.shape[0], 1.0 / X.shape[0])
        self.weights = np.asarray(weights, dtype=np.float64)
        self.table = StumpSearchTable(X, labels)
        self.weaks: list[WeakClassifier] = []
        self.finished = False

    def round(self) -> WeakClassifier | None:
        if self.finished:
            return None
        w = self.weights / self.weights.sum()
        fi, threshold, polarity, eps = self.table.best_stump(w)
        if eps >= 0.5:
            self.weights = w
            self.finished = True
            return None
        eps_c = max(eps, EPS_FLOOR)
        alpha = 0.5 * math.log((1.0 - eps_c) / eps_c)
        col = self.X[:, fi]
        h = np.where(polarity * col < polarity * threshold, 1.0, -1.0)
        w = w * np.exp(-alpha * self.labels * h)
        self.weights = w / w.sum()
        weak = WeakClassifier(fi, threshold, polarity, alpha)
        self.weaks.append(weak)
        if eps == 0.0:
            self.finished = True
        return weak

    def strong(self) -> StrongClassifier:
        alpha_sum = 0.0
        for w in self.weaks:
            alpha_sum += w.alpha
        return StrongClassifier(tuple(self.weaks), 0.5 * alpha_sum)


def train_strong(samples: list[Sample], features, rounds: int) -> StrongClassifier:
    """Boost up to `rounds` stumps into a stage with the default threshold."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    X = np.stack([s.feature_values for s in samples]).astype(np.float64)
    if features is not None and X.shape[1] != len(features):
        raise ValueError(
            f"samples carry {X.shape[1]} feature values, feature list has {len(features)}"
        )
    labels = np.array([s.label for s in samples])
    weights = np.array([s.weight for s in samples], dtype=np.float64)
    trainer = AdaBoostTrainer(X, labels, weights)
    for _ in range(rounds):
        if trainer.round() is None:
            break
    return trainer.strong()


def tune_stage_threshold(
    stage: StrongClassifier, positives: list[Sample], target_tpr: float
) -> StrongClassifier:
    """Lower the stage threshold until TPR >= target_tpr on the positives.

    The threshold becomes the k-th largest positive score (k = ceil of
    target_tpr * n); it is never raised above its current value.
    """
    if not 0.0 < target_tpr <= 1.0:
        raise ValueError(f"target_tpr must be in (0, 1], got {target_tpr}")
    scores = np.array([stage.score_values(s.feature_values) for s in positives])
    n = len(scores)
    if n == 0:
        return stage
    k = max(1, math.ceil(target_tpr * n - 1e-9))
    kth = float(np.sort(scores, kind="stable")[n - k])
    return replace(stage, stage_threshold=min(stage.stage_threshold, kth))


def _tuned_stage(trainer: AdaBoostTrainer, Xpos: np.ndarray, target_tpr: float) -> StrongClassifier:
    stage = trainer.strong()
    scores = stage_scores(stage, Xpos)
    n = len(scores)
    k = max(1, math.ceil(target_tpr * n - 1e-9))
    kth = float(np.sort(scores, kind="stable")[n - k])
    return replace(stage, stage_threshold=min(stage.stage_threshold, kth))


def train_cascade(
    pos: list[Sample],
    neg_source,
    features: list[HaarFeature],
    window: WindowSpec,
    config: CascadeConfig | None = None,
) -> Cascade:
    """Grow an attentional cascade from positives and a negative sampler.

    `neg_source` is any iterable of feature-value vectors; candidates that
    pass every stage built so far become the next stage's negatives
    (bootstrapped hard-negative mining). Stages are added until the product
    of measured stage FPRs reaches the overall target, max_stages is hit,
    or the source runs out of false positives (reported as success via
    training_meta). Each stage grows weak by weak until its FPR target is
    met at per_stage_tpr.
    """
    if config is None:
        config = CascadeConfig()
    if not pos:
        raise ValueError("no positive samples")
    Xpos = np.stack([s.feature_values for s in pos]).astype(np.float64)
    npos = len(pos)
    stages: list[StrongClassifier] = []
    rates: list[StageRates] = []
    neg_iter = iter(neg_source)

    def passes_all(vec: np.ndarray) -> bool:
        return all(st.decide_values(vec) for st in stages)

    def mine(quota: int) -> list[np.ndarray]:
        out = []
        if quota <= 0:
            return out
        for vec in neg_iter:
            if passes_all(vec):
                out.append(np.asarray(vec, dtype=np.float64))
                if len(out) >= quota:
                    break
        return out

    negs = mine(config.neg_per_stage)
    if not negs and not stages:
        raise ValueError("negative source supplied no samples")
    overall_fpr = 1.0

    while negs and len(stages) < config.max_stages and overall_fpr > config.overall_fpr_target:
        Xneg = np.stack(negs)
        X = np.concatenate([Xpos, Xneg])
        labels = np.concatenate([np.ones(npos), -np.ones(len(negs))]).astype(np.int64)
        # start class-balanced: each class carries half the weight mass
        weights = np.concatenate([
            np.full(npos, 0.5 / npos),
            np.full(len(negs), 0.5 / len(negs)),
        ])
        trainer = AdaBoostTrainer(X, labels, weights)
        stage = None
        fpr = 1.0
        while len(trainer.weaks) < config.max_weaks_per_stage:
            added = trainer.round()
            if added is None and not trainer.weaks:
                break
            stage = _tuned_stage(trainer, Xpos, config.per_stage_tpr)
            fpr = float(np.mean(stage_scores(stage, Xneg) >= stage.stage_threshold))
            if fpr <= config.per_stage_fpr or trainer.finished:
                break
        if stage is None:
            break
        tpr = float(np.mean(stage_scores(stage, Xpos) >= stage.stage_threshold))
        stages.append(stage)
        rates.append(StageRates(tpr=tpr, fpr=fpr))
        overall_fpr *= fpr
        if overall_fpr <= config.overall_fpr_target:
            break
        survivors = [v for v in negs if stage.decide_values(v)]
        negs = survivors + mine(config.neg_per_stage - len(survivors))

    return Cascade(
        window=window,
        features=features,
        stages=tuple(stages),
        training_meta=CascadeTrainingMeta(config.seed, tuple(rates)),
    )


def classify_window(
    cascade: Cascade,
    ii: IntegralImage,
    origin: tuple[int, int],
    scale: float,
) -> ClassifyResult:
    """Run the cascade at one window placement, short-circuiting on rejection.

    An empty cascade accepts with margin 0.
    """
    margin = 0.0
    for k, stage in enumerate(cascade.stages, start=1):
        score = stage.score_window(ii, cascade.features, cascade.window, origin, scale)
        margin = score - stage.stage_threshold
        if margin < 0:
            return ClassifyResult(False, k, margin)
    return ClassifyResult(True, None, margin)
