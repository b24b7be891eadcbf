"""Baseline and post-window symptom profiles and the continuous PCSI target."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from .errors import EligibilityError
from .rules import PcsiRules

# Means of Likert scores differ by at least 1/(n1*n2) when unequal, so this
# only absorbs rounding in threshold comparisons.
_CMP_EPS = 1e-9


@dataclass(frozen=True)
class BaselineProfile:
    means: dict[str, float]
    n_records: int


@dataclass(frozen=True)
class PostProfile:
    means: dict[str, float]
    n_records: int


@dataclass(frozen=True)
class PcsiResult:
    persistent_symptoms: frozenset[str]
    lc_positive: bool
    pcsi: float
    pcsi_basis: str


def _profile(records, keep) -> tuple[dict[str, float], int]:
    values: dict[str, list[float]] = defaultdict(list)
    n = 0
    for rec in records:
        if not keep(rec.day_offset) or not rec.scores:
            continue
        n += 1
        for symptom, score in rec.scores.items():
            values[symptom].append(score)
    means = {s: math.fsum(v) / len(v) for s, v in sorted(values.items())}
    return means, n


def baseline(records, rules: PcsiRules | None = None) -> BaselineProfile:
    rules = rules or PcsiRules()
    means, n = _profile(records, rules.in_baseline)
    if n == 0:
        raise EligibilityError(
            f"no questionnaire at or before day {rules.baseline_cutoff} relative to infection"
        )
    return BaselineProfile(means, n)


def post_window(records, rules: PcsiRules | None = None) -> PostProfile:
    rules = rules or PcsiRules()
    means, n = _profile(records, rules.in_window)
    if n == 0:
        lo, hi = rules.window
        raise EligibilityError(f"no questionnaire between days {lo} and {hi} after infection")
    return PostProfile(means, n)


def classify(base: BaselineProfile, post: PostProfile, rules: PcsiRules | None = None) -> PcsiResult:
    """Apply the persistence rule and derive PCSI.

    A symptom persists when its post-window mean reaches
    ``rules.persistence_score`` and exceeds its baseline mean by at least
    ``rules.elevation``; symptoms absent at baseline count as 1. Without any
    persistent symptom the PCSI falls back to the mean over all post-window
    symptoms.
    """
    rules = rules or PcsiRules()
    persistent = sorted(
        s for s, post_mean in post.means.items()
        if post_mean >= rules.persistence_score - _CMP_EPS
        and post_mean - base.means.get(s, 1.0) >= rules.elevation - _CMP_EPS
    )
    if persistent:
        value = math.fsum(post.means[s] for s in persistent) / len(persistent)
        return PcsiResult(frozenset(persistent), True, value, "persistent_mean")
    value = math.fsum(post.means.values()) / len(post.means) if post.means else 1.0
    return PcsiResult(frozenset(), False, value, "all_symptom_mean")


def compute_all(cohort, rules: PcsiRules | None = None) -> dict[str, PcsiResult]:
    """PCSI for every participant of an eligibility-filtered cohort, keyed and ordered by id."""
    rules = rules or PcsiRules()
    out = {}
    for pid in sorted(cohort.participants):
        recs = cohort.records_for(pid)
        try:
            out[pid] = classify(baseline(recs, rules), post_window(recs, rules), rules)
        except EligibilityError as exc:
            raise EligibilityError(f"participant {pid!r}: {exc}") from exc
    return out
