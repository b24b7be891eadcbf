"""Thresholds that define baseline, post window and symptom persistence."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class PcsiRules:
    """Window and persistence thresholds.

    Attributes:
        persistence_score: minimum post-window mean for a symptom to count.
        elevation: minimum rise of the post-window mean over baseline.
        baseline_cutoff: latest day offset (relative to first infection)
            a questionnaire may carry to enter the baseline.
        window: inclusive day-offset bounds of the post-infection window.
    """

    persistence_score: float = 3.0
    elevation: float = 1.0
    baseline_cutoff: int = -7
    window: tuple[int, int] = (90, 150)

    def __post_init__(self):
        lo, hi = self.window
        if lo > hi:
            raise ConfigurationError(f"post window bounds out of order: {self.window}")
        if self.baseline_cutoff >= lo:
            raise ConfigurationError("baseline cutoff must precede the post window")
        object.__setattr__(self, "window", (int(lo), int(hi)))

    def in_baseline(self, day_offset) -> bool:
        return day_offset <= self.baseline_cutoff

    def in_window(self, day_offset) -> bool:
        return self.window[0] <= day_offset <= self.window[1]
