# formatted with ruff 0.6.4
"""ROS, RUS and SMOTE with the multiplier contract IR(r_m(S)) = IR(S)/m."""

import logging
import re
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.spatial.distance import cdist

from data import Dataset, imbalanceRatio, makeRng, roundHalfUp
from errors import InfeasibleResampling

log = logging.getLogger(__name__)

Method = Literal["none", "ros", "rus", "smote"]

# relative slack when comparing a RUS multiplier with the imbalance ratio
_IR_SLACK = 1e-12

_LABEL_RE = re.compile(r"^(none|ros|rus|smote(\d+))$")


@dataclass(frozen=True)
class ResamplingSpec:
    """A resampling method with its multiplier.

    ``balance=True`` marks the balancing (EqS) variant: whatever data the spec is
    applied to, the multiplier used is that data's own imbalance ratio.
    """

    method: Method
    multiplier: float = 1.0
    kNeighbors: int = 0
    balance: bool = False

    def __post_init__(self) -> None:
        if self.method not in ("none", "ros", "rus", "smote"):
            raise ValueError(f"unknown resampling method {self.method!r}")
        if self.method == "none":
            object.__setattr__(self, "multiplier", 1.0)
            object.__setattr__(self, "balance", False)
        if self.method != "smote":
            object.__setattr__(self, "kNeighbors", 0)
        elif self.kNeighbors < 1:
            raise ValueError("SMOTE needs kNeighbors >= 1")
        object.__setattr__(self, "multiplier", float(self.multiplier))
        if self.multiplier < 1.0:
            raise InfeasibleResampling(f"multiplier {self.multiplier} is below 1")

    @property
    def label(self) -> str:
        """``none``, ``ros``, ``rus`` or ``smote<k>``"""
        if self.method == "smote":
            return f"smote{self.kNeighbors}"
        return self.method

    def withMultiplier(self, multiplier: float) -> "ResamplingSpec":
        return ResamplingSpec(self.method, multiplier, self.kNeighbors, self.balance)

    def __str__(self) -> str:
        return f"{self.label},{formatMultiplier(self.multiplier)}"


NO_RESAMPLING = ResamplingSpec("none")


def formatMultiplier(m: float) -> str:
    return repr(float(m))


def parseSpec(label: str, multiplier: float = 1.0, *, balance: bool = False) -> ResamplingSpec:
    """Inverse of ``ResamplingSpec.label``: ``smote5`` -> SMOTE with k=5"""
    match = _LABEL_RE.match(label.strip().lower())
    if match is None:
        raise ValueError(f"unknown resampling method label {label!r}")
    if match.group(2) is not None:
        return ResamplingSpec("smote", multiplier, int(match.group(2)), balance)
    return ResamplingSpec(match.group(1), multiplier, balance=balance)


def _append(s: Dataset, rows: np.ndarray) -> Dataset:
    return Dataset(
        s.id,
        np.concatenate([s.features, rows], axis=0),
        np.concatenate([s.labels, np.ones(rows.shape[0], dtype=np.int64)]),
        pool=s.pool,
        checkOrder=False,
    )


def randomOversample(s: Dataset, m: float, seed=0) -> Dataset:
    """appends round((m-1)|C1|) copies of uniformly drawn minor objects"""
    if m < 1.0:
        raise InfeasibleResampling(f"multiplier {m} is below 1")
    nAdd = roundHalfUp((m - 1.0) * s.nMinor)
    if nAdd == 0:
        return s
    rng = makeRng(seed)
    minor = s.minorIndex
    picks = minor[rng.integers(0, len(minor), size=nAdd)]
    return _append(s, s.features[picks])


def randomUndersample(s: Dataset, m: float, seed=0) -> Dataset:
    """drops a uniformly drawn subset of round(((m-1)/m)|C0|) major objects"""
    if m < 1.0:
        raise InfeasibleResampling(f"multiplier {m} is below 1")
    ir = imbalanceRatio(s)
    if m > ir * (1.0 + _IR_SLACK):
        raise InfeasibleResampling(f"{s.id}: RUS multiplier {m} exceeds IR {ir:.6g}")
    nDrop = roundHalfUp((m - 1.0) / m * s.nMajor)
    if nDrop == 0:
        return s
    if s.nMajor - nDrop < 1:
        raise InfeasibleResampling(f"{s.id}: RUS would remove the whole major class")
    rng = makeRng(seed)
    kept = rng.choice(s.majorIndex, size=s.nMajor - nDrop, replace=False)
    keep = np.sort(np.concatenate([kept, s.minorIndex]))
    return s.subset(keep)


def minorNeighbors(minor: np.ndarray, k: int) -> np.ndarray:
    """k nearest minor neighbours of every minor point.

    Euclidean distance, the point itself excluded, ties broken by lower index.
    """
    dist = cdist(minor, minor)
    np.fill_diagonal(dist, np.inf)
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def smote(s: Dataset, m: float, k: int = 5, seed=0) -> Dataset:
    """appends round((m-1)|C1|) points on segments between minor neighbours"""
    if m < 1.0:
        raise InfeasibleResampling(f"multiplier {m} is below 1")
    if k < 1:
        raise ValueError("SMOTE needs k >= 1")
    if s.nMinor < k + 1:
        raise InfeasibleResampling(
            f"{s.id}: not enough minor points for {k} neighbors ({s.nMinor} minor objects)"
        )
    nAdd = roundHalfUp((m - 1.0) * s.nMinor)
    if nAdd == 0:
        return s
    rng = makeRng(seed)
    minor = s.features[s.minorIndex]
    neighbors = minorNeighbors(minor, k)
    base = rng.integers(0, minor.shape[0], size=nAdd)
    pick = rng.integers(0, k, size=nAdd)
    u = rng.random(nAdd)
    origin = minor[base]
    target = minor[neighbors[base, pick]]
    return _append(s, origin + u[:, None] * (target - origin))


def effectiveMultiplier(s: Dataset, spec: ResamplingSpec) -> float:
    if spec.balance:
        return max(1.0, imbalanceRatio(s))
    return spec.multiplier


def isFeasible(s: Dataset, spec: ResamplingSpec) -> bool:
    """True when ``resample(s, spec)`` would not raise InfeasibleResampling"""
    m = effectiveMultiplier(s, spec)
    if spec.method == "rus":
        return m <= imbalanceRatio(s) * (1.0 + _IR_SLACK)
    if spec.method == "smote":
        return s.nMinor >= spec.kNeighbors + 1
    return True


def resample(s: Dataset, spec: ResamplingSpec, seed=0) -> Dataset:
    """r_m(S); method ``none`` returns ``s`` itself"""
    if spec.method == "none":
        return s
    m = effectiveMultiplier(s, spec)
    if spec.method == "ros":
        return randomOversample(s, m, seed)
    if spec.method == "rus":
        return randomUndersample(s, m, seed)
    return smote(s, m, spec.kNeighbors, seed)
