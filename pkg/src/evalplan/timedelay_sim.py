"""Time-lagged evaluation over a recorded file manifest.

A detector snapshot is frozen on ``freeze_date``. Only files first seen
strictly after ``freeze_date + lag_days`` (and within the evaluation window
that follows) count as unseen. Labels assigned too soon after a file
appeared are treated as immature and held out.

Everything here works on manifests of recorded first-seen dates, labels
and scores; there is no live feed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Sequence

import numpy as np

from .binom_core import DomainError
from .planner import DEFAULT_CONFIDENCE, ToleranceSpec, coverage
from .roc_eval import synth_arrays

__all__ = [
    "DelayProtocolConfig",
    "DelayRunReport",
    "ManifestEntry",
    "contamination_rate",
    "run_delay_protocol",
    "select_eligible",
    "synth_manifest",
]

DEFAULT_LAG_DAYS = 100
DEFAULT_LABEL_MATURITY_DAYS = 30
# window half-widths used for the adequacy check, as fractions of the rate
TPR_ALPHA = 0.01
FPR_ALPHA = 0.5


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    first_seen: date
    label: int
    label_date: date | None = None
    category: str | None = None
    score: float | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DomainError(f"{self.sample_id}: label must be 0 or 1, got {self.label!r}")
        if self.label_date is not None and self.label_date < self.first_seen:
            raise DomainError(
                f"{self.sample_id}: label_date {self.label_date} precedes first_seen {self.first_seen}"
            )
        if self.score is not None and not math.isfinite(self.score):
            raise DomainError(f"{self.sample_id}: score must be finite, got {self.score!r}")


@dataclass(frozen=True)
class DelayProtocolConfig:
    """Freeze date plus the lag, label maturity and evaluation window in days.

    ``evaluation_window_days=None`` leaves the window open-ended.
    """

    freeze_date: date
    evaluation_window_days: int | None
    lag_days: int = DEFAULT_LAG_DAYS
    label_maturity_days: int = DEFAULT_LABEL_MATURITY_DAYS

    def __post_init__(self):
        if self.lag_days < 1:
            raise DomainError(f"lag_days must be >= 1, got {self.lag_days}")
        if self.label_maturity_days < 0:
            raise DomainError(f"label_maturity_days must be >= 0, got {self.label_maturity_days}")
        if self.evaluation_window_days is not None and self.evaluation_window_days < 1:
            raise DomainError(
                f"evaluation_window_days must be >= 1, got {self.evaluation_window_days}"
            )

    @property
    def cutoff(self) -> date:
        """Last day a frozen product could already have seen a file."""
        return self.freeze_date + timedelta(days=self.lag_days)

    @property
    def window_end(self) -> date | None:
        if self.evaluation_window_days is None:
            return None
        return self.cutoff + timedelta(days=self.evaluation_window_days)


@dataclass
class DelayRunReport:
    eligible_ids: list[str]
    excluded_immature_labels: int
    contamination_rate_naive: float
    tpr: float | None
    fpr: float | None
    n_pos: int
    n_neg: int
    threshold: float
    tpr_coverage: float | None = None
    fpr_coverage: float | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "eligible_ids": list(self.eligible_ids),
            "excluded_immature_labels": self.excluded_immature_labels,
            "contamination_rate_naive": self.contamination_rate_naive,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "threshold": self.threshold,
            "tpr_coverage": self.tpr_coverage,
            "fpr_coverage": self.fpr_coverage,
            "warnings": list(self.warnings),
        }


def _label_mature(entry: ManifestEntry, maturity_days: int) -> bool:
    if maturity_days == 0:
        return True
    if entry.label_date is None:
        return False
    return entry.label_date >= entry.first_seen + timedelta(days=maturity_days)


def select_eligible(
    manifest: Sequence[ManifestEntry], cfg: DelayProtocolConfig
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Split the manifest into eligible entries and in-window immature ones.

    An entry is in the window when ``cutoff < first_seen <= window_end``.
    In-window entries whose label is immature go to the second list;
    entries outside the window appear in neither.
    """
    if not manifest:
        raise DomainError("manifest is empty")
    cutoff = cfg.cutoff
    end = cfg.window_end
    eligible = []
    immature = []
    for entry in manifest:
        if entry.first_seen <= cutoff or (end is not None and entry.first_seen > end):
            continue
        if _label_mature(entry, cfg.label_maturity_days):
            eligible.append(entry)
        else:
            immature.append(entry)
    return eligible, immature


def contamination_rate(
    manifest: Sequence[ManifestEntry],
    cfg: DelayProtocolConfig,
    naive_selection: Sequence[ManifestEntry],
) -> float:
    """Fraction of a feed-style selection the frozen product could already have seen."""
    if not naive_selection:
        raise DomainError("naive_selection is empty")
    known = {e.sample_id for e in manifest}
    missing = [e.sample_id for e in naive_selection if e.sample_id not in known]
    if missing:
        raise DomainError(f"naive_selection contains ids absent from the manifest: {missing[:5]}")
    cutoff = cfg.cutoff
    seen = sum(1 for e in naive_selection if e.first_seen <= cutoff)
    return seen / len(naive_selection)


def _adequacy(rate: float, n: int, alpha: float, what: str) -> tuple[float | None, str | None]:
    if rate in (0.0, 1.0):
        return None, (
            f"{what} = {rate:g} on {n} samples is degenerate and its precision cannot be assessed"
        )
    cov = coverage(rate, n, ToleranceSpec.relative(alpha))
    if cov < DEFAULT_CONFIDENCE:
        return cov, (
            f"{what} = {rate:.6g} on {n} samples: only {cov:.3f} probability of being within "
            f"{alpha:g}x of the true rate (wanted {DEFAULT_CONFIDENCE})"
        )
    return cov, None


def run_delay_protocol(
    manifest: Sequence[ManifestEntry], cfg: DelayProtocolConfig, threshold: float
) -> DelayRunReport:
    """Evaluate the frozen detector on eligible entries only.

    A sample is flagged when ``score >= threshold``. A class missing from
    the eligible set leaves its rate as ``None``. Each available rate is
    checked for sample-size adequacy with :func:`evalplan.planner.coverage`
    at the observed rate (relative windows of 1% for TPR and 50% for FPR);
    shortfalls are listed in ``warnings``.
    """
    eligible, immature = select_eligible(manifest, cfg)
    threshold = float(threshold)
    unscored = [e.sample_id for e in eligible if e.score is None]
    if unscored:
        raise DomainError(f"eligible entries lack scores: {unscored[:5]}")
    n_pos = sum(1 for e in eligible if e.label == 1)
    n_neg = len(eligible) - n_pos
    tp = sum(1 for e in eligible if e.label == 1 and e.score >= threshold)
    fp = sum(1 for e in eligible if e.label == 0 and e.score >= threshold)
    tpr = tp / n_pos if n_pos else None
    fpr = fp / n_neg if n_neg else None

    warnings = []
    if not eligible:
        warnings.append("no eligible entries after the lag and label-maturity filters")
    tpr_cov = fpr_cov = None
    if tpr is None:
        warnings.append("no eligible malware samples, TPR unavailable")
    else:
        tpr_cov, msg = _adequacy(tpr, n_pos, TPR_ALPHA, "TPR")
        if msg:
            warnings.append(msg)
    if fpr is None:
        warnings.append("no eligible benign samples, FPR unavailable")
    else:
        fpr_cov, msg = _adequacy(fpr, n_neg, FPR_ALPHA, "FPR")
        if msg:
            warnings.append(msg)

    return DelayRunReport(
        eligible_ids=[e.sample_id for e in eligible],
        excluded_immature_labels=len(immature),
        contamination_rate_naive=contamination_rate(manifest, cfg, manifest),
        tpr=tpr,
        fpr=fpr,
        n_pos=n_pos,
        n_neg=n_neg,
        threshold=threshold,
        tpr_coverage=tpr_cov,
        fpr_coverage=fpr_cov,
        warnings=warnings,
    )


def synth_manifest(
    n_pos: int,
    n_neg: int,
    separation: float,
    seed: int,
    start: date,
    span_days: int = 365,
    max_label_delay_days: int = 0,
) -> list[ManifestEntry]:
    """Synthetic scored manifest with first-seen dates drawn independently of scores.

    Dates are uniform over ``span_days`` from ``start``; label dates trail
    first-seen by a uniform 0..``max_label_delay_days`` days.
    """
    scores, labels = synth_arrays(n_pos, n_neg, separation, seed)
    rng = np.random.default_rng([int(seed), 1])
    offsets = rng.integers(0, span_days, size=len(scores))
    delays = rng.integers(0, max_label_delay_days + 1, size=len(scores))
    out = []
    for i, (s, y, off, dl) in enumerate(zip(scores, labels, offsets, delays)):
        seen = start + timedelta(days=int(off))
        out.append(
            ManifestEntry(
                sample_id=f"f{i}",
                first_seen=seen,
                label=int(y),
                label_date=seen + timedelta(days=int(dl)),
                score=float(s),
            )
        )
    return out
