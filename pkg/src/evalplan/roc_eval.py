"""Empirical ROC curves and the small-sample optimism experiment.

Scores follow one convention throughout: higher means more malicious and a
sample is flagged when ``score >= threshold``. Tied scores form a single
step of the curve.

Random draws use numpy's PCG64 generator. Trial ``t`` of an experiment
seeded with ``s`` draws from ``numpy.random.default_rng([s, t])``, so each
trial is reproducible on its own and independent of scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from statistics import NormalDist
from typing import NamedTuple, Sequence

import numpy as np

from .binom_core import DomainError, binom_sf, check_proportion, check_sample_size

__all__ = [
    "DegenerateClassError",
    "RocCurve",
    "RocPoint",
    "ScoredSample",
    "SubsampleBiasReport",
    "analytic_tpr",
    "auc",
    "roc_from_arrays",
    "roc_from_samples",
    "samples_to_arrays",
    "sign_test",
    "subsample_bias_experiment",
    "synth_arrays",
    "synth_scores",
    "tpr_at_fpr",
]

_SEED_LIMIT = 2**64
_STD_NORMAL = NormalDist()


class DegenerateClassError(DomainError):
    """Input holds samples of only one class."""


@dataclass(frozen=True, slots=True)
class ScoredSample:
    sample_id: str
    label: int
    score: float
    category: str | None = None
    first_seen: date | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DomainError(f"label must be 0 or 1, got {self.label!r}")
        if not math.isfinite(self.score):
            raise DomainError(f"score must be finite, got {self.score!r}")


class RocPoint(NamedTuple):
    fpr: float
    tpr: float
    threshold: float


@dataclass(frozen=True)
class RocCurve:
    points: tuple[RocPoint, ...]
    n_pos: int
    n_neg: int

    @property
    def fpr(self) -> np.ndarray:
        return np.array([pt.fpr for pt in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([pt.tpr for pt in self.points])

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([pt.threshold for pt in self.points])


@dataclass
class SubsampleBiasReport:
    fpr_targets: list[float]
    mean_tpr_full: list[float]
    mean_tpr_sub: list[float]
    trials: int
    optimism: list[float]
    tpr_truth: list[float] | None = None
    wins: list[int] = field(default_factory=list)
    losses: list[int] = field(default_factory=list)
    sign_p: list[float] = field(default_factory=list)
    sub_n_neg: int = 0
    sub_n_pos: int = 0
    seed: int = 0

    @property
    def reference(self) -> str:
        return "analytic" if self.tpr_truth is not None else "full-sample"

    def to_dict(self) -> dict:
        return {
            "fpr_targets": list(self.fpr_targets),
            "mean_tpr_full": list(self.mean_tpr_full),
            "mean_tpr_sub": list(self.mean_tpr_sub),
            "tpr_truth": None if self.tpr_truth is None else list(self.tpr_truth),
            "optimism": list(self.optimism),
            "reference": self.reference,
            "wins": list(self.wins),
            "losses": list(self.losses),
            "sign_p": list(self.sign_p),
            "trials": self.trials,
            "sub_n_neg": self.sub_n_neg,
            "sub_n_pos": self.sub_n_pos,
            "seed": self.seed,
        }


def samples_to_arrays(samples: Sequence[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    scores = np.fromiter((s.score for s in samples), dtype=float, count=len(samples))
    labels = np.fromiter((s.label for s in samples), dtype=np.int8, count=len(samples))
    return scores, labels


def _curve_arrays(scores: np.ndarray, labels: np.ndarray):
    """(fpr, tpr, thresholds, n_pos, n_neg) with the (0, 0) sentinel first."""
    n = scores.shape[0]
    n_pos = int(np.count_nonzero(labels))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassError(
            f"degenerate class balance: {n_pos} positive and {n_neg} negative samples"
        )
    order = np.argsort(-scores, kind="stable")
    s = scores[order] + 0.0  # folds -0.0 into 0.0
    y = labels[order].astype(np.int64)
    tp = np.cumsum(y)
    fp = np.arange(1, n + 1) - tp
    last_of_group = np.flatnonzero(np.diff(s) != 0.0)
    ends = np.append(last_of_group, n - 1)
    fpr = np.concatenate(([0.0], fp[ends] / n_neg))
    tpr = np.concatenate(([0.0], tp[ends] / n_pos))
    thr = np.concatenate(([math.inf], s[ends]))
    return fpr, tpr, thr, n_pos, n_neg


def roc_from_arrays(scores, labels) -> RocCurve:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DomainError("scores and labels must be 1-d arrays of equal length")
    if not np.all(np.isfinite(scores)):
        raise DomainError("scores must be finite")
    if not np.all((labels == 0) | (labels == 1)):
        raise DomainError("labels must be 0 or 1")
    fpr, tpr, thr, n_pos, n_neg = _curve_arrays(scores, labels)
    points = tuple(RocPoint(float(f), float(t), float(h)) for f, t, h in zip(fpr, tpr, thr))
    return RocCurve(points, n_pos, n_neg)


def roc_from_samples(samples: Sequence[ScoredSample]) -> RocCurve:
    """ROC curve with one point per distinct score plus the (0, 0) origin.

    The origin carries threshold ``+inf``; the lowest distinct score yields
    the (1, 1) end point.

    Raises:
        DegenerateClassError: all samples share one label.
    """
    scores, labels = samples_to_arrays(samples)
    return roc_from_arrays(scores, labels)


def tpr_at_fpr(curve: RocCurve, fpr_target: float) -> float:
    """TPR of the last curve point whose FPR does not exceed the target.

    This is a step read-off: no interpolation between operating points.
    """
    fpr_target = check_proportion(fpr_target, "fpr_target")
    return _read_off(curve.fpr, curve.tpr, fpr_target)


def _read_off(fpr: np.ndarray, tpr: np.ndarray, target: float) -> float:
    i = int(np.searchsorted(fpr, target, side="right")) - 1
    return float(tpr[i])


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve's points."""
    f = curve.fpr
    t = curve.tpr
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1])) / 2.0)


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def synth_arrays(n_pos: int, n_neg: int, separation: float, seed: int):
    """Scores and labels for the equal-variance normal model, negatives first."""
    n_pos = check_sample_size(n_pos, "n_pos")
    n_neg = check_sample_size(n_neg, "n_neg")
    separation = float(separation)
    if not (math.isfinite(separation) and separation >= 0.0):
        raise DomainError(f"separation must be a finite value >= 0, got {separation}")
    rng = np.random.default_rng(_check_seed(seed))
    neg = rng.standard_normal(n_neg)
    pos = separation + rng.standard_normal(n_pos)
    scores = np.concatenate((neg, pos))
    labels = np.concatenate((np.zeros(n_neg, dtype=np.int8), np.ones(n_pos, dtype=np.int8)))
    return scores, labels


def synth_scores(n_pos: int, n_neg: int, separation: float, seed: int) -> list[ScoredSample]:
    """Synthetic detector output with a known ROC.

    Benign scores are standard normal, malicious ones are normal with unit
    variance centred at ``separation``; :func:`analytic_tpr` gives the true
    curve. Identifiers are ``neg<i>`` and ``pos<i>``.
    """
    scores, labels = synth_arrays(n_pos, n_neg, separation, seed)
    n_neg = int(np.count_nonzero(labels == 0))
    out = [ScoredSample(f"neg{i}", 0, float(scores[i])) for i in range(n_neg)]
    out.extend(
        ScoredSample(f"pos{i}", 1, float(scores[n_neg + i])) for i in range(len(scores) - n_neg)
    )
    return out


def analytic_tpr(fpr: float, separation: float) -> float:
    """True TPR at a given FPR under the synthetic normal model."""
    fpr = check_proportion(fpr, "fpr")
    if fpr == 0.0:
        return 0.0
    if fpr == 1.0:
        return 1.0
    return _STD_NORMAL.cdf(_STD_NORMAL.inv_cdf(fpr) + separation)


def sign_test(wins: int, losses: int) -> float:
    """One-sided sign-test p-value for ``wins`` out of ``wins + losses``; ties dropped."""
    n = wins + losses
    if n == 0 or wins == 0:
        return 1.0
    return binom_sf(wins - 1, n, 0.5)


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("EVALPLAN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def subsample_bias_experiment(
    samples: Sequence[ScoredSample] | tuple[np.ndarray, np.ndarray],
    sub_n_neg: int,
    sub_n_pos: int,
    fpr_targets: Sequence[float],
    trials: int,
    seed: int,
    separation: float | None = None,
    workers: int | None = None,
) -> SubsampleBiasReport:
    """Mean TPR at fixed FPRs over repeated class-stratified subsamples.

    Each trial draws ``sub_n_neg`` negatives and ``sub_n_pos`` positives
    without replacement and reads the subsample's curve at every target.
    Optimism is the mean subsample TPR minus the analytic TPR when
    ``separation`` is given, else minus the full-sample TPR. ``wins`` counts
    trials strictly above that reference and ``sign_p`` is the one-sided
    sign-test p-value for optimism.
    """
    if isinstance(samples, tuple):
        scores, labels = (np.asarray(a) for a in samples)
    else:
        scores, labels = samples_to_arrays(samples)
    fpr_targets = [check_proportion(f, "fpr_target") for f in fpr_targets]
    if not fpr_targets:
        raise DomainError("fpr_targets must not be empty")
    trials = int(trials)
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    seed = _check_seed(seed)
    sub_n_neg = check_sample_size(sub_n_neg, "sub_n_neg")
    sub_n_pos = check_sample_size(sub_n_pos, "sub_n_pos")

    full_fpr, full_tpr, _, n_pos, n_neg = _curve_arrays(scores, labels)
    if sub_n_neg > n_neg or sub_n_pos > n_pos:
        raise DomainError(
            f"subsample {sub_n_neg}/{sub_n_pos} (neg/pos) exceeds population {n_neg}/{n_pos}"
        )
    neg_scores = scores[labels == 0]
    pos_scores = scores[labels == 1]
    sub_labels = np.concatenate(
        (np.zeros(sub_n_neg, dtype=np.int8), np.ones(sub_n_pos, dtype=np.int8))
    )

    def one_trial(t: int) -> list[float]:
        rng = np.random.default_rng([seed, t])
        i_neg = rng.choice(n_neg, size=sub_n_neg, replace=False)
        i_pos = rng.choice(n_pos, size=sub_n_pos, replace=False)
        sub = np.concatenate((neg_scores[i_neg], pos_scores[i_pos]))
        f, tp, _, _, _ = _curve_arrays(sub, sub_labels)
        return [_read_off(f, tp, x) for x in fpr_targets]

    n_workers = _worker_count(workers)
    if n_workers > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            per_trial = list(pool.map(one_trial, range(trials)))
    else:
        per_trial = [one_trial(t) for t in range(trials)]
    table = np.array(per_trial)  # trials x targets

    mean_full = [_read_off(full_fpr, full_tpr, x) for x in fpr_targets]
    mean_sub = [float(v) for v in table.mean(axis=0)]
    truth = None
    if separation is not None:
        truth = [analytic_tpr(x, separation) for x in fpr_targets]
    reference = truth if truth is not None else mean_full
    wins = [int(np.count_nonzero(table[:, j] > reference[j])) for j in range(len(fpr_targets))]
    losses = [int(np.count_nonzero(table[:, j] < reference[j])) for j in range(len(fpr_targets))]
    return SubsampleBiasReport(
        fpr_targets=fpr_targets,
        mean_tpr_full=mean_full,
        mean_tpr_sub=mean_sub,
        trials=trials,
        optimism=[m - r for m, r in zip(mean_sub, reference)],
        tpr_truth=truth,
        wins=wins,
        losses=losses,
        sign_p=[sign_test(w, l) for w, l in zip(wins, losses)],
        sub_n_neg=sub_n_neg,
        sub_n_pos=sub_n_pos,
        seed=seed,
    )
