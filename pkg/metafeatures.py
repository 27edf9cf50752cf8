"""Dataset-level meta-features f(S) and their log-scale companions.

The registry order is fixed; meta-models index features by it. See
docs/metafeatures.md for the definitions.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from data import Dataset
from errors import MetaFeatureError

log = logging.getLogger(__name__)

# normality tests need this many observations, smaller classes get p = 1.0
MIN_TEST_SIZE = 8

GLOBAL_FEATURES = (
    "n_objects",
    "n_features",
    "objects_features_ratio",
    "reversed_IR",
    "center_distance",
)
CLASS_STATISTICS = ("abs_cov_eig", "skewness", "skew_test_pval", "kurtosis", "kurt_test_pval")
CLASS_NAMES = ("major", "minor")

BASE_REGISTRY = GLOBAL_FEATURES + tuple(
    f"{extreme}_{stat}_{cls}"
    for stat in CLASS_STATISTICS
    for cls in CLASS_NAMES
    for extreme in ("min", "max")
)
REGISTRY = BASE_REGISTRY + tuple(f"log_{name}" for name in BASE_REGISTRY)


def slog(x):
    """sign(x) * ln(1 + |x|): odd, increasing, defined on all reals"""
    return np.sign(x) * np.log1p(np.abs(x))


@dataclass(frozen=True, eq=False)
class MetaFeatures:
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(REGISTRY),):
            raise MetaFeatureError(f"expected {len(REGISTRY)} meta-features, got {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[REGISTRY.index(name)])

    def select(self, names) -> np.ndarray:
        try:
            return self.values[[REGISTRY.index(name) for name in names]]
        except ValueError as err:
            raise MetaFeatureError(f"unknown meta-feature in {list(names)}") from err

    def asDict(self) -> "dict[str, float]":
        return dict(zip(REGISTRY, self.values.tolist()))


def _isConstant(sample: np.ndarray) -> bool:
    return sample.size == 0 or np.ptp(sample) == 0.0


def skewTest(sample) -> "tuple[float, float]":
    """(Z, two-sided p) of D'Agostino's skewness test"""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.size < MIN_TEST_SIZE or _isConstant(sample):
        return 0.0, 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = stats.skewtest(sample)
    if not np.isfinite(result.pvalue):
        return 0.0, 1.0
    return float(result.statistic), float(result.pvalue)


def kurtTest(sample) -> "tuple[float, float]":
    """(Z, two-sided p) of the Anscombe-Glynn kurtosis test"""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.size < MIN_TEST_SIZE or _isConstant(sample):
        return 0.0, 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = stats.kurtosistest(sample)
    if not np.isfinite(result.pvalue):
        return 0.0, 1.0
    return float(result.statistic), float(result.pvalue)


def skewTestPvalue(sample) -> float:
    return skewTest(sample)[1]


def kurtTestPvalue(sample) -> float:
    return kurtTest(sample)[1]


def skewness(sample) -> float:
    """adjusted Fisher-Pearson skewness (biased estimate below 3 points)"""
    sample = np.asarray(sample, dtype=np.float64)
    if _isConstant(sample):
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value = stats.skew(sample, bias=sample.size < 3)
    return float(value) if np.isfinite(value) else 0.0


def excessKurtosis(sample) -> float:
    """bias-corrected excess kurtosis (biased estimate below 4 points)"""
    sample = np.asarray(sample, dtype=np.float64)
    if _isConstant(sample):
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value = stats.kurtosis(sample, fisher=True, bias=sample.size < 4)
    return float(value) if np.isfinite(value) else 0.0


def _classStatistics(X: np.ndarray) -> "dict[str, np.ndarray]":
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    columns = X.T
    return {
        "abs_cov_eig": np.abs(np.linalg.eigvalsh(cov)),
        "skewness": np.array([skewness(c) for c in columns]),
        "skew_test_pval": np.array([skewTestPvalue(c) for c in columns]),
        "kurtosis": np.array([excessKurtosis(c) for c in columns]),
        "kurt_test_pval": np.array([kurtTestPvalue(c) for c in columns]),
    }


def computeMetaFeatures(s: Dataset) -> MetaFeatures:
    major = s.features[s.labels == 0]
    minor = s.features[s.labels == 1]
    if major.shape[0] < 2 or minor.shape[0] < 2:
        raise MetaFeatureError(f"{s.id}: every class needs at least 2 objects")
    values = {
        "n_objects": float(s.nObjects),
        "n_features": float(s.nFeatures),
        "objects_features_ratio": s.nObjects / s.nFeatures,
        "reversed_IR": minor.shape[0] / major.shape[0],
        "center_distance": float(np.linalg.norm(major.mean(axis=0) - minor.mean(axis=0))),
    }
    for cls, X in zip(CLASS_NAMES, (major, minor)):
        for stat, perFeature in _classStatistics(X).items():
            values[f"min_{stat}_{cls}"] = float(perFeature.min())
            values[f"max_{stat}_{cls}"] = float(perFeature.max())
    base = np.array([values[name] for name in BASE_REGISTRY])
    if not np.all(np.isfinite(base)):
        bad = [n for n, v in zip(BASE_REGISTRY, base) if not np.isfinite(v)]
        raise MetaFeatureError(f"{s.id}: non-finite meta-features {bad}")
    return MetaFeatures(np.concatenate([base, slog(base)]))
