"""Category-level detection statistics recombined under deployment weights.

Benign and malware samples are split into categories, rates are measured
per category, and a weight profile describing a target environment turns
them back into a single TPR and FPR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .binom_core import DomainError

__all__ = [
    "BENIGN",
    "MALWARE",
    "AggregateResult",
    "CategoryError",
    "CategoryStats",
    "ComparisonRow",
    "NormalizationError",
    "WeightProfile",
    "aggregate",
    "compare_profiles",
]

BENIGN = "benign"
MALWARE = "malware"
WEIGHT_SUM_TOL = 1e-9


class CategoryError(DomainError):
    """A profile references a category absent from the statistics."""

    def __init__(self, category: str, cls: str):
        super().__init__(f"unknown {cls} category {category!r} in weight profile")
        self.category = category
        self.cls = cls


class NormalizationError(DomainError):
    """A weight map does not sum to one."""

    def __init__(self, cls: str, total: float):
        super().__init__(f"{cls} weights sum to {total!r}, expected 1")
        self.cls = cls
        self.total = total


@dataclass(frozen=True)
class CategoryStats:
    category: str
    cls: str
    n: int
    detected: int

    def __post_init__(self):
        if self.cls not in (BENIGN, MALWARE):
            raise DomainError(f"class must be {BENIGN!r} or {MALWARE!r}, got {self.cls!r}")
        if self.n < 1:
            raise DomainError(f"category {self.category!r}: n must be >= 1, got {self.n}")
        if not 0 <= self.detected <= self.n:
            raise DomainError(
                f"category {self.category!r}: detected must lie in [0, {self.n}], got {self.detected}"
            )

    @property
    def rate(self) -> float:
        """Flagged fraction: TPR for malware categories, FPR for benign ones."""
        return self.detected / self.n


def _check_weights(weights: Mapping[str, float], cls: str) -> dict[str, float]:
    out = {}
    for name, w in weights.items():
        w = float(w)
        if not math.isfinite(w) or w < 0.0:
            raise DomainError(f"{cls} weight for {name!r} must be finite and >= 0, got {w}")
        out[str(name)] = w
    if not out:
        raise DomainError(f"{cls} weight map is empty")
    total = math.fsum(out.values())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise NormalizationError(cls, total)
    return out


@dataclass(frozen=True)
class WeightProfile:
    """Per-class category weights; each map must sum to one."""

    name: str
    benign_weights: dict[str, float] = field(default_factory=dict)
    malware_weights: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "benign_weights", _check_weights(self.benign_weights, BENIGN))
        object.__setattr__(self, "malware_weights", _check_weights(self.malware_weights, MALWARE))

    @classmethod
    def normalized(
        cls, name: str, benign_weights: Mapping[str, float], malware_weights: Mapping[str, float]
    ) -> "WeightProfile":
        """Build a profile after rescaling each map to sum to one."""

        def rescale(weights, label):
            total = math.fsum(float(w) for w in weights.values())
            if not total > 0.0:
                raise NormalizationError(label, total)
            return {k: float(w) / total for k, w in weights.items()}

        return cls(name, rescale(benign_weights, BENIGN), rescale(malware_weights, MALWARE))

    def weights_for(self, cls: str) -> dict[str, float]:
        return self.benign_weights if cls == BENIGN else self.malware_weights


@dataclass(frozen=True)
class AggregateResult:
    profile_name: str
    tpr: float
    fpr: float
    effective_n_pos: float
    effective_n_neg: float


@dataclass(frozen=True)
class ComparisonRow:
    profile_name: str
    result: AggregateResult | None
    error: DomainError | None


def _index(stats: Sequence[CategoryStats]) -> dict[tuple[str, str], CategoryStats]:
    table = {}
    for s in stats:
        key = (s.cls, s.category)
        if key in table:
            raise DomainError(f"duplicate {s.cls} category {s.category!r} in statistics")
        table[key] = s
    return table


def _combine(table, weights: dict[str, float], cls: str) -> tuple[float, float]:
    rates = []
    precision_terms = []
    for name in sorted(weights):
        s = table.get((cls, name))
        if s is None:
            raise CategoryError(name, cls)
        w = weights[name]
        rates.append(w * s.rate)
        precision_terms.append(w * w / s.n)
    total_w = math.fsum(weights.values())
    denom = math.fsum(precision_terms)
    n_eff = total_w * total_w / denom if denom > 0.0 else 0.0
    return math.fsum(rates), n_eff


def aggregate(stats: Sequence[CategoryStats], profile: WeightProfile) -> AggregateResult:
    """Weighted TPR and FPR for one profile.

    Categories present in ``stats`` but absent from the profile get weight
    zero. The effective sample sizes ``(sum w)^2 / sum(w^2 / n)`` show how
    much data actually backs each weighted rate.

    Raises:
        CategoryError: the profile names a category missing from ``stats``.
    """
    table = _index(stats)
    for cls in (BENIGN, MALWARE):
        if not any(key[0] == cls for key in table):
            raise DomainError(f"statistics contain no {cls} categories")
    tpr, n_pos = _combine(table, profile.malware_weights, MALWARE)
    fpr, n_neg = _combine(table, profile.benign_weights, BENIGN)
    return AggregateResult(profile.name, tpr, fpr, n_pos, n_neg)


def compare_profiles(
    stats: Sequence[CategoryStats], profiles: Sequence[WeightProfile]
) -> list[ComparisonRow]:
    """One row per profile; a failing profile records its error and the rest still run."""
    rows = []
    for profile in profiles:
        try:
            rows.append(ComparisonRow(profile.name, aggregate(stats, profile), None))
        except DomainError as exc:
            rows.append(ComparisonRow(profile.name, None, exc))
    return rows
