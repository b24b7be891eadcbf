"""Contingency-table tests and multiple correspondence analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTableError, DegenerateVariableError, DomainError, ShapeError
from .numkit import chi2_survival, svd


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] < 2 or counts.shape[1] < 2:
            raise ShapeError(f"contingency table must be at least 2x2, got shape {counts.shape}")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise DomainError("contingency counts must be non-negative integers")
        if counts.sum() < 1:
            raise DegenerateTableError("contingency table is empty")
        object.__setattr__(self, "counts", counts.astype(np.int64))
        rows = tuple(self.row_labels) if self.row_labels is not None else tuple(range(counts.shape[0]))
        cols = tuple(self.col_labels) if self.col_labels is not None else tuple(range(counts.shape[1]))
        if len(rows) != counts.shape[0] or len(cols) != counts.shape[1]:
            raise ShapeError("label count does not match table shape")
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)

    @classmethod
    def from_counts(cls, counts) -> "ContingencyTable":
        return cls(np.asarray(counts), None, None)

    @classmethod
    def crosstab(cls, a, b) -> "ContingencyTable":
        """Cross-tabulate two equal-length label sequences (levels sorted)."""
        if len(a) != len(b):
            raise ShapeError("crosstab inputs differ in length")
        rows = sorted(set(a))
        cols = sorted(set(b))
        ri = {v: i for i, v in enumerate(rows)}
        ci = {v: i for i, v in enumerate(cols)}
        counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for u, v in zip(a, b):
            counts[ri[u], ci[v]] += 1
        return cls(counts, tuple(rows), tuple(cols))

    def drop_empty(self) -> "ContingencyTable":
        """Remove all-zero rows and columns."""
        keep_r = self.counts.sum(axis=1) > 0
        keep_c = self.counts.sum(axis=0) > 0
        return ContingencyTable(
            self.counts[keep_r][:, keep_c],
            tuple(l for l, k in zip(self.row_labels, keep_r) if k),
            tuple(l for l, k in zip(self.col_labels, keep_c) if k),
        )


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    p_value: float


def _as_table(table) -> ContingencyTable:
    return table if isinstance(table, ContingencyTable) else ContingencyTable.from_counts(table)


def chi_square(table) -> ChiSquareResult:
    """Pearson chi-square test of independence, without continuity correction."""
    t = _as_table(table)
    obs = t.counts.astype(np.float64)
    rows = obs.sum(axis=1)
    cols = obs.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise DegenerateTableError("table has an all-zero row or column")
    total = obs.sum()
    expected = np.outer(rows, cols) / total
    stat = float(np.sum((obs - expected) ** 2 / expected))
    df = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    return ChiSquareResult(stat, df, min(1.0, max(0.0, chi2_survival(stat, df))))


def cramers_v(table) -> float:
    t = _as_table(table)
    stat = chi_square(t).statistic
    n = float(t.counts.sum())
    k = min(t.counts.shape) - 1
    return min(1.0, math.sqrt(stat / (n * k)))


@dataclass(frozen=True)
class McaResult:
    row_coords: np.ndarray
    col_coords: np.ndarray
    explained_inertia: np.ndarray
    total_inertia: float
    singular_values: np.ndarray
    categories: tuple  # (variable, level) per column of the indicator matrix


def indicator_matrix(data, names=None):
    """One-hot encode an n x Q categorical matrix; levels sorted per variable."""
    cols = list(zip(*data)) if not isinstance(data, np.ndarray) else [data[:, q] for q in range(data.shape[1])]
    if names is None:
        names = [f"v{q + 1}" for q in range(len(cols))]
    blocks = []
    cats = []
    for name, col in zip(names, cols):
        col = list(col)
        levels = sorted(set(col), key=lambda v: (str(type(v)), v))
        if len(levels) < 2:
            raise DegenerateVariableError(f"variable {name!r} has a single observed level")
        index = {v: i for i, v in enumerate(levels)}
        block = np.zeros((len(col), len(levels)))
        block[np.arange(len(col)), [index[v] for v in col]] = 1.0
        blocks.append(block)
        cats.extend((name, v) for v in levels)
    return np.hstack(blocks), tuple(cats)


def mca(data, n_axes: int | None = None, names=None) -> McaResult:
    """Correspondence analysis of the indicator matrix of ``data`` (rows = individuals).

    Coordinates are principal coordinates. Axes with zero inertia are dropped;
    ``n_axes`` truncates the coordinates, while explained fractions are taken
    over all non-trivial axes.
    """
    if len(data) < 2:
        raise ShapeError("MCA needs at least 2 rows")
    z, cats = indicator_matrix(data, names)
    p = z / z.sum()
    r = p.sum(axis=1)
    c = p.sum(axis=0)
    s = (p - np.outer(r, c)) / np.sqrt(np.outer(r, c))
    dec = svd(s)
    sv = dec.s
    keep = sv > 1e-10 * max(1.0, sv[0] if sv.size else 0.0)
    sv = sv[keep]
    u = dec.u[:, keep]
    v = dec.vt[keep].T
    eig = sv ** 2
    total = float(np.sum(s * s))  # equals J/Q - 1 for an indicator matrix
    explained = eig / eig.sum() if eig.size else eig
    # deterministic orientation: largest-magnitude category loading positive,
    # the first such category when magnitudes tie up to rounding
    for k in range(sv.size):
        mag = np.abs(v[:, k])
        m = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
        if v[m, k] < 0:
            u[:, k] *= -1
            v[:, k] *= -1
    row = (u / np.sqrt(r)[:, None]) * sv
    col = (v / np.sqrt(c)[:, None]) * sv
    if n_axes is not None:
        row = row[:, :n_axes]
        col = col[:, :n_axes]
    return McaResult(row, col, explained, total, sv, cats)


def discretize_pcsi(pcsi: float) -> int:
    """Round a PCSI in [1, 5] to the nearest integer, halves upward."""
    if not (1.0 <= pcsi <= 5.0):
        raise DomainError(f"PCSI {pcsi!r} outside [1, 5]")
    return int(math.floor(pcsi + 0.5))
