"""Chi-square test of independence with standardized residuals,
residual-correlation clustering, and the two-group component partition."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cluster import LinkageTree, agglomerate, cut_tree
from .errors import DataError

logger = logging.getLogger(__name__)

SMOOTHING_NONE = "none"
SMOOTHING_ADD_HALF = "add_half_zero_cells"

# Components whose residual mass identifies the high-performance
# real-time group when labeling the two-way partition.
HPRT_MARKERS = ("Real-time data", "HPC")


@dataclass(frozen=True)
class ContingencyTable:
    """Observed counts, components as rows and domains as columns."""

    observed: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self):
        obs = np.asarray(self.observed)
        if obs.ndim != 2:
            raise DataError("observed counts must be a 2-D matrix")
        if obs.shape[0] < 2 or obs.shape[1] < 2:
            raise DataError(f"table must be at least 2x2, got {obs.shape}")
        if obs.shape != (len(self.row_labels), len(self.col_labels)):
            raise DataError("label lengths do not match the observed matrix")
        if (obs < 0).any():
            raise DataError("observed counts must be non-negative")
        if obs.sum() <= 0:
            raise DataError("empty table: grand total is zero")
        object.__setattr__(self, "observed", obs.astype(float))

    @property
    def total(self) -> float:
        return float(self.observed.sum())


def _gamma_p_series(a: float, z: float) -> float:
    term = 1.0 / a
    total = term
    n = a
    for _ in range(10000):
        n += 1.0
        term *= z / n
        total += term
        if abs(term) < abs(total) * 1e-12:
            break
    return total * math.exp(-z + a * math.log(z) - math.lgamma(a))


def _gamma_q_contfrac(a: float, z: float) -> float:
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            break
    return h * math.exp(-z + a * math.log(z) - math.lgamma(a))


def chi2_sf(statistic: float, dof: int) -> float:
    """Upper-tail chi-square probability via the regularized incomplete
    gamma function Q(dof/2, statistic/2), series/continued-fraction
    evaluation with 1e-12 termination."""
    if dof <= 0:
        raise DataError(f"degrees of freedom must be positive, got {dof}")
    if statistic <= 0.0:
        return 1.0
    a = dof / 2.0
    z = statistic / 2.0
    if z < a + 1.0:
        p = min(1.0, _gamma_p_series(a, z))
        return max(1.0 - p, 5e-324)
    return max(_gamma_q_contfrac(a, z), 5e-324)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    expected: np.ndarray
    observed_used: np.ndarray
    adjusted_cells: tuple[tuple[int, int], ...]
    smoothing: str


def chi_square(t: ContingencyTable, smoothing: str = SMOOTHING_ADD_HALF) -> ChiSquareResult:
    """Pearson chi-square test of independence.

    E_ij = row_i * col_j / N. With add_half_zero_cells smoothing, 0.5 is
    added to every zero observed cell and the expectations are recomputed
    on the smoothed table; the adjusted cells are recorded. Without
    smoothing, a zero row or column is an error.
    """
    if smoothing not in (SMOOTHING_NONE, SMOOTHING_ADD_HALF):
        raise DataError(f"unknown smoothing mode {smoothing!r}")
    O = t.observed.copy()
    adjusted: list[tuple[int, int]] = []
    if smoothing == SMOOTHING_ADD_HALF:
        zr, zc = np.nonzero(O == 0)
        for i, j in zip(zr.tolist(), zc.tolist()):
            O[i, j] = 0.5
            adjusted.append((i, j))
    rows = O.sum(axis=1)
    cols = O.sum(axis=0)
    if (rows == 0).any():
        idx = int(np.nonzero(rows == 0)[0][0])
        raise DataError(f"degenerate table: zero row {t.row_labels[idx]!r}")
    if (cols == 0).any():
        idx = int(np.nonzero(cols == 0)[0][0])
        raise DataError(f"degenerate table: zero column {t.col_labels[idx]!r}")
    n = O.sum()
    E = np.outer(rows, cols) / n
    statistic = float(((O - E) ** 2 / E).sum())
    dof = (O.shape[0] - 1) * (O.shape[1] - 1)
    return ChiSquareResult(
        statistic=statistic,
        dof=dof,
        p_value=chi2_sf(statistic, dof),
        expected=E,
        observed_used=O,
        adjusted_cells=tuple(adjusted),
        smoothing=smoothing,
    )


@dataclass(frozen=True)
class ResidualMatrix:
    """Standardized residuals (O-E)/sqrt(E) with the |R| > 2 mask."""

    values: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    mask: np.ndarray

    def residual(self, row: str, col: str) -> float:
        return float(self.values[self.row_labels.index(row), self.col_labels.index(col)])

    def rank_components(self, col: str) -> list[tuple[str, float]]:
        """Components ranked by residual, descending, for one domain."""
        j = self.col_labels.index(col)
        order = sorted(
            range(len(self.row_labels)),
            key=lambda i: (-self.values[i, j], self.row_labels[i]),
        )
        return [(self.row_labels[i], float(self.values[i, j])) for i in order]

    def row_means(self) -> dict[str, float]:
        return {
            label: float(self.values[i].mean())
            for i, label in enumerate(self.row_labels)
        }


def residuals(t: ContingencyTable, result: ChiSquareResult) -> ResidualMatrix:
    """Standardized residuals of the table the statistic was computed on
    (the smoothed counts when smoothing was applied)."""
    E = result.expected
    if (E <= 0).any():
        raise DataError("zero expected cell: smoothing must have handled it")
    R = (result.observed_used - E) / np.sqrt(E)
    return ResidualMatrix(
        values=R,
        row_labels=t.row_labels,
        col_labels=t.col_labels,
        mask=np.abs(R) > 2.0,
    )


def adjusted_residuals(t: ContingencyTable, result: ChiSquareResult) -> ResidualMatrix:
    """Residuals divided by sqrt(E(1-p_row)(1-p_col)); optional variant."""
    E = result.expected
    if (E <= 0).any():
        raise DataError("zero expected cell: smoothing must have handled it")
    O = result.observed_used
    n = O.sum()
    p_row = O.sum(axis=1) / n
    p_col = O.sum(axis=0) / n
    denom = np.sqrt(E * (1 - p_row)[:, None] * (1 - p_col)[None, :])
    R = (O - E) / denom
    return ResidualMatrix(
        values=R, row_labels=t.row_labels, col_labels=t.col_labels, mask=np.abs(R) > 2.0
    )


@dataclass(frozen=True)
class ResidualCorrelation:
    """Pearson correlation between component residual rows; rows with
    zero variance correlate 0 with everything and are flagged."""

    matrix: np.ndarray
    labels: tuple[str, ...]
    flagged: tuple[str, ...]


def residual_correlation(R: ResidualMatrix) -> ResidualCorrelation:
    if R.values.shape[1] < 2:
        raise DataError("residual correlation needs at least 2 domains")
    X = R.values
    centered = X - X.mean(axis=1, keepdims=True)
    sd = np.sqrt((centered ** 2).sum(axis=1))
    n = X.shape[0]
    corr = np.zeros((n, n))
    flagged = [R.row_labels[i] for i in range(n) if sd[i] == 0.0]
    for i in range(n):
        for j in range(n):
            if i == j:
                corr[i, j] = 1.0
            elif sd[i] == 0.0 or sd[j] == 0.0:
                corr[i, j] = 0.0
            else:
                corr[i, j] = float(centered[i] @ centered[j] / (sd[i] * sd[j]))
    corr = np.clip(corr, -1.0, 1.0)
    if flagged:
        logger.warning("zero-variance residual rows: %s", flagged)
    return ResidualCorrelation(matrix=corr, labels=R.row_labels, flagged=tuple(flagged))


@dataclass(frozen=True)
class ComponentPartition:
    groups: tuple[tuple[str, ...], ...]
    labels: tuple[str, ...]
    linkage: LinkageTree

    def group_of(self, component: str) -> int:
        for idx, g in enumerate(self.groups):
            if component in g:
                return idx
        raise KeyError(component)

    def members(self, label: str) -> tuple[str, ...]:
        return self.groups[self.labels.index(label)]


def partition_components(
    corr: ResidualCorrelation,
    groups: int = 2,
    residual_matrix: ResidualMatrix | None = None,
) -> ComponentPartition:
    """Cut the average-linkage tree over 1 - correlation into `groups`.

    Components are ordered canonically (sorted by name) before
    clustering so the partition is independent of input ordering. With
    a residual matrix, the group with the higher mean residual over the
    marker components (Real-time data, HPC) is labeled HPRT and the rest
    LTDS; without one, groups are labeled group_0, group_1, ...
    """
    order = sorted(range(len(corr.labels)), key=lambda i: corr.labels[i])
    names = tuple(corr.labels[i] for i in order)
    M = corr.matrix[np.ix_(order, order)]
    dissim = 1.0 - M
    np.fill_diagonal(dissim, 0.0)
    np.maximum(dissim, 0.0, out=dissim)
    tree = agglomerate(dissim, linkage="average", leaf_labels=names)
    parts = cut_tree(tree, groups)
    member_groups = tuple(tuple(names[i] for i in g) for g in parts)

    if residual_matrix is None or groups != 2:
        labels = tuple(f"group_{i}" for i in range(len(member_groups)))
        return ComponentPartition(groups=member_groups, labels=labels, linkage=tree)

    means = residual_matrix.row_means()
    scores = []
    for g in member_groups:
        marked = [means[c] for c in g if c in HPRT_MARKERS and c in means]
        scores.append(sum(marked) / len(marked) if marked else float("-inf"))
    if all(s == float("-inf") for s in scores):
        logger.warning("no marker components present; labeling first group HPRT")
        hprt = 0
    else:
        hprt = int(np.argmax(scores))
    labels = tuple("HPRT" if i == hprt else "LTDS" for i in range(len(member_groups)))
    return ComponentPartition(groups=member_groups, labels=labels, linkage=tree)
