# formatted with ruff 0.6.4
"""Quality-variables of a grid and the binarized meta-targets built from them."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from evaluation import QualityGrid
from resampling import NO_RESAMPLING

log = logging.getLogger(__name__)

# guards the strict window comparison |m' - m| < epsilon against float noise
WINDOW_GUARD = 1e-9

Cell = "tuple[str, float]"


def pairedTtestPvalue(resampled, baseline) -> float:
    """One-sided paired t-test of H0: mean(resampled) <= mean(baseline).

    With zero-variance differences: 0 if the mean difference is positive,
    1 if negative, 0.5 if zero.
    """
    resampled = np.asarray(resampled, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    if resampled.shape != baseline.shape or resampled.ndim != 1:
        raise ValueError("paired t-test needs two vectors of equal length")
    k = resampled.shape[0]
    if k < 2:
        raise ValueError("paired t-test needs at least 2 folds")
    diff = resampled - baseline
    meanDiff = float(diff.mean())
    if np.ptp(diff) == 0.0:
        if meanDiff > 0.0:
            return 0.0
        if meanDiff < 0.0:
            return 1.0
        return 0.5
    t = meanDiff / (float(diff.std(ddof=1)) / math.sqrt(k))
    return float(stats.t.sf(t, k - 1))


@dataclass
class QualityVariables:
    q0Mean: float
    methods: "tuple[str, ...]"
    multipliers: "tuple[float, ...]"
    qMean: "dict[Cell, float]" = field(default_factory=dict)
    qPval: "dict[Cell, float]" = field(default_factory=dict)
    qPvalw: "dict[Cell, float]" = field(default_factory=dict)
    mStar: "dict[str, float]" = field(default_factory=dict)
    qMeanAtStar: "dict[str, float]" = field(default_factory=dict)
    qPvalAtStar: "dict[str, float]" = field(default_factory=dict)

    def feasibleMultipliers(self, method: str) -> "list[float]":
        return [m for m in self.multipliers if (method, m) in self.qPval]


@dataclass
class MetaTargets:
    alpha: float
    yRm: "dict[Cell, int]" = field(default_factory=dict)
    yR: "dict[str, int]" = field(default_factory=dict)
    zR: "dict[str, float]" = field(default_factory=dict)


def _argminSmallest(values: "dict[float, float]") -> float:
    """argmin over multipliers, ties to the smallest multiplier"""
    return min(values, key=lambda m: (values[m], m))


def computeQualityVariables(grid: QualityGrid, epsilon: float) -> QualityVariables:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    baseline = grid.baseline
    qv = QualityVariables(float(np.mean(baseline)), tuple(grid.methods), tuple(grid.multipliers))
    for spec, scores in grid.cells.items():
        if spec == NO_RESAMPLING:
            continue
        cell = (spec.label, spec.multiplier)
        qv.qMean[cell] = float(np.mean(scores))
        qv.qPval[cell] = pairedTtestPvalue(scores, baseline)
    for method in grid.methods:
        feasible = qv.feasibleMultipliers(method)
        if not feasible:
            log.debug("%s: every %s cell was skipped", grid.datasetId, method)
            continue
        for m in feasible:
            window = [m2 for m2 in feasible if abs(m2 - m) < epsilon - WINDOW_GUARD]
            qv.qPvalw[(method, m)] = max(qv.qPval[(method, m2)] for m2 in window)
        star = _argminSmallest({m: qv.qPvalw[(method, m)] for m in feasible})
        qv.mStar[method] = star
        qv.qMeanAtStar[method] = qv.qMean[(method, star)]
        qv.qPvalAtStar[method] = qv.qPval[(method, star)]
    return qv


def binarizeTargets(qv: QualityVariables, alpha: float, *, useWindowedPval: bool = False) -> MetaTargets:
    """y_rm = 1[p < alpha], y_r = 1[min_m p < alpha], z_r = argmin_m p.

    ``useWindowedPval`` switches p from q_pval to q_pvalw.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    pvalues = qv.qPvalw if useWindowedPval else qv.qPval
    targets = MetaTargets(alpha)
    for cell, p in pvalues.items():
        targets.yRm[cell] = int(p < alpha)
    for method in qv.methods:
        feasible = qv.feasibleMultipliers(method)
        if not feasible:
            continue
        perM = {m: pvalues[(method, m)] for m in feasible}
        targets.yR[method] = int(min(perM.values()) < alpha)
        targets.zR[method] = _argminSmallest(perM)
    return targets


def _column(kind: str, method: str, m: "float|None" = None) -> str:
    if m is None:
        return f"{kind}[{method}]"
    return f"{kind}[{method}][{m!r}]"


def qualityRow(qv: QualityVariables, targets: MetaTargets) -> "dict[str, float]":
    """one wide row: qmean[method][m], qpval[...], qpvalw[...], y[...], yr[method], zr[method]"""
    row = {"q0mean": qv.q0Mean}
    for method in qv.methods:
        for m in qv.feasibleMultipliers(method):
            row[_column("qmean", method, m)] = qv.qMean[(method, m)]
            row[_column("qpval", method, m)] = qv.qPval[(method, m)]
            row[_column("qpvalw", method, m)] = qv.qPvalw[(method, m)]
            row[_column("y", method, m)] = targets.yRm[(method, m)]
        if method in qv.mStar:
            row[_column("mstar", method)] = qv.mStar[method]
            row[_column("qmeanstar", method)] = qv.qMeanAtStar[method]
            row[_column("qpvalstar", method)] = qv.qPvalAtStar[method]
            row[_column("yr", method)] = targets.yR[method]
            row[_column("zr", method)] = targets.zR[method]
    return row


def qualityFromRow(
    row: dict, methods, multipliers, alpha: float, *, useWindowedPval: bool = False
) -> "tuple[QualityVariables, MetaTargets]":
    """Rebuilds quality-variables from a wide row (missing cells were skipped)."""
    qv = QualityVariables(float(row["q0mean"]), tuple(methods), tuple(multipliers))
    for method in methods:
        for m in multipliers:
            value = row.get(_column("qpval", method, m))
            if value is None or (isinstance(value, float) and math.isnan(value)):
                continue
            qv.qMean[(method, m)] = float(row[_column("qmean", method, m)])
            qv.qPval[(method, m)] = float(value)
            qv.qPvalw[(method, m)] = float(row[_column("qpvalw", method, m)])
        if qv.feasibleMultipliers(method):
            qv.mStar[method] = float(row[_column("mstar", method)])
            qv.qMeanAtStar[method] = float(row[_column("qmeanstar", method)])
            qv.qPvalAtStar[method] = float(row[_column("qpvalstar", method)])
    return qv, binarizeTargets(qv, alpha, useWindowedPval=useWindowedPval)
