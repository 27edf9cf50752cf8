# formatted with ruff 0.6.4
"""Datasets, CSV ingestion, Gaussian-mixture generation and stratified folds.

Label 1 is always the minor class of an ingested or generated dataset.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field, InitVar
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from errors import CsvFormatError, DatasetError

log = logging.getLogger(__name__)

DEFAULT_LABEL_COLUMN = "label"
MAX_REDRAWS = 1000


def roundHalfUp(x: float) -> int:
    """round-half-up used for every count derived from a fraction"""
    return int(math.floor(x + 0.5))


def seedEntropy(*parts) -> "list[int]":
    """Turns a mix of ints and strings into SeedSequence entropy.

    Strings are hashed so that the same id always gives the same stream,
    independently of the interpreter's hash randomization.
    """
    entropy = []
    for part in parts:
        if isinstance(part, (int, np.integer)):
            entropy.append(int(part) & 0xFFFFFFFFFFFFFFFF)
        else:
            digest = hashlib.sha256(str(part).encode("utf-8")).digest()
            entropy.append(int.from_bytes(digest[:8], "little"))
    return entropy


def makeRng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng(np.random.SeedSequence(seedEntropy(*seed)))
    return np.random.default_rng(np.random.SeedSequence(seedEntropy(seed)))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus binary labels.

    ``checkOrder=False`` is used for training splits and resampled data, where
    oversampling past balance may legitimately make class 1 the larger one.
    """

    id: str
    features: np.ndarray
    labels: np.ndarray
    pool: str = "real"
    checkOrder: InitVar[bool] = True

    def __post_init__(self, checkOrder: bool) -> None:
        features = np.array(self.features, dtype=np.float64, copy=True)
        labels = np.array(self.labels, copy=True)
        if features.ndim != 2:
            raise DatasetError(f"{self.id}: features must be a 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DatasetError(f"{self.id}: labels must be a vector of length {features.shape[0]}")
        if features.shape[0] < 2 or features.shape[1] < 1:
            raise DatasetError(f"{self.id}: need at least 2 objects and 1 feature")
        if not np.all(np.isfinite(features)):
            raise DatasetError(f"{self.id}: non-finite feature value")
        if not np.all((labels == 0) | (labels == 1)):
            raise DatasetError(f"{self.id}: labels must be 0 or 1")
        labels = labels.astype(np.int64)
        nMinor = int(labels.sum())
        nMajor = labels.shape[0] - nMinor
        if nMinor == 0 or nMajor == 0:
            raise DatasetError(f"{self.id}: both classes must be non-empty")
        if checkOrder and nMajor < nMinor:
            raise DatasetError(f"{self.id}: label 1 must be the minor class")
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def nObjects(self) -> int:
        return self.features.shape[0]

    @property
    def nFeatures(self) -> int:
        return self.features.shape[1]

    @property
    def minorIndex(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 1)

    @property
    def majorIndex(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 0)

    @property
    def nMinor(self) -> int:
        return int(self.labels.sum())

    @property
    def nMajor(self) -> int:
        return self.nObjects - self.nMinor

    def subset(self, index: np.ndarray, *, id: "str|None" = None) -> "Dataset":
        return Dataset(
            self.id if id is None else id,
            self.features[index],
            self.labels[index],
            pool=self.pool,
            checkOrder=False,
        )

    def contentHash(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.features.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


def imbalanceRatio(s: Dataset) -> float:
    """IR(S) = |C0| / |C1|"""
    return s.nMajor / s.nMinor


def ingestCsv(
    path: "str|Path",
    labelColumn: str = DEFAULT_LABEL_COLUMN,
    *,
    id: "str|None" = None,
    pool: str = "real",
) -> Dataset:
    """Reads a binary classification dataset from a CSV file.

    The less frequent raw label becomes 1; on a tie the lexicographically
    larger raw label becomes 1. Every other column is a real feature.
    """
    path = Path(path)
    if not path.is_file():
        raise CsvFormatError(f"Found no file called {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as err:
        raise CsvFormatError(f"{path}: unparsable CSV ({err})") from err
    if labelColumn not in frame.columns:
        raise CsvFormatError(f"{path}: no label column '{labelColumn}'")
    featureColumns = [c for c in frame.columns if c != labelColumn]
    if len(featureColumns) == 0:
        raise CsvFormatError(f"{path}: no feature columns")

    raw = frame[labelColumn].to_numpy(dtype=object)
    values, counts = np.unique(raw, return_counts=True)
    if len(values) > 2:
        raise CsvFormatError(f"{path}: labels are not binary ({len(values)} distinct values)")
    if len(values) < 2:
        raise CsvFormatError(f"{path}: a class has 0 elements")
    if counts[0] < counts[1]:
        minorLabel = values[0]
    else:
        # values are sorted, so on a tie the larger one is values[1]
        minorLabel = values[1]
    labels = (raw == minorLabel).astype(np.int64)

    try:
        features = np.asarray(frame[featureColumns].to_numpy(dtype=object), dtype=np.float64)
    except ValueError as err:
        raise CsvFormatError(f"{path}: non-numeric feature cell ({err})") from err
    return Dataset(id or path.stem, features, labels, pool=pool)


def writeCsv(s: Dataset, path: "str|Path", labelColumn: str = DEFAULT_LABEL_COLUMN) -> None:
    """Writes the dataset with 17 significant digits, so re-ingesting is exact"""
    columns = {f"f{j}": s.features[:, j] for j in range(s.nFeatures)}
    columns[labelColumn] = s.labels
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g")


@dataclass(frozen=True)
class MixtureConfig:
    """Ranges of the Gaussian-mixture generator (all ranges inclusive).

    ``minorFractionRange`` holds values of 1/IR, i.e. |C1|/|C0|.
    """

    dimRange: "tuple[int, int]" = (6, 40)
    sizeRange: "tuple[int, int]" = (200, 1000)
    minorFractionRange: "tuple[float, float]" = (0.05, 0.35)
    componentsRange: "tuple[int, int]" = (1, 3)
    meanBox: "tuple[float, float]" = (-1.0, 1.0)
    covScaleRange: "tuple[float, float]" = (0.5, 2.0)
    seed: int = 0
    # smallest |C1| a draw may have; the run config sets it to the CV fold count
    minMinor: int = 2

    def __post_init__(self) -> None:
        for name in ("dimRange", "sizeRange", "minorFractionRange", "componentsRange", "meanBox", "covScaleRange"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise DatasetError(f"MixtureConfig.{name} is empty: {lo} > {hi}")
            object.__setattr__(self, name, (lo, hi))
        if self.dimRange[0] < 1:
            raise DatasetError("MixtureConfig.dimRange must start at 1 or more")
        if self.componentsRange[0] < 1:
            raise DatasetError("MixtureConfig.componentsRange must start at 1 or more")
        if not (0.0 < self.minorFractionRange[0] and self.minorFractionRange[1] <= 0.5):
            raise DatasetError("MixtureConfig.minorFractionRange must lie in (0, 0.5]")
        if self.covScaleRange[0] <= 0.0:
            raise DatasetError("MixtureConfig.covScaleRange must be positive")
        if classSizes(self.sizeRange[0], self.minorFractionRange[0])[1] < 2:
            raise DatasetError(
                f"size {self.sizeRange[0]} too small for minor fraction {self.minorFractionRange[0]}"
            )
        if self.minMinor < 2:
            raise DatasetError("MixtureConfig.minMinor must be at least 2")
        if classSizes(self.sizeRange[1], self.minorFractionRange[1])[1] < self.minMinor:
            raise DatasetError(
                f"no dataset in size {self.sizeRange} with minor fraction {self.minorFractionRange}"
                f" has {self.minMinor} minor objects"
            )


def classSizes(size: int, minorFraction: float) -> "tuple[int, int]":
    """(|C0|, |C1|) for a dataset of ``size`` objects with |C1|/|C0| = minorFraction"""
    nMinor = roundHalfUp(size * minorFraction / (1.0 + minorFraction))
    return size - nMinor, nMinor


def _randomCovarianceFactor(rng: np.random.Generator, d: int, scaleRange) -> np.ndarray:
    # cov = Q diag(s) Q^T; returns Q diag(sqrt(s)) so that z @ factor.T ~ N(0, cov)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    scales = rng.uniform(scaleRange[0], scaleRange[1], size=d)
    return q * np.sqrt(scales)


def _sampleClass(rng: np.random.Generator, n: int, d: int, config: MixtureConfig) -> np.ndarray:
    nComponents = int(rng.integers(config.componentsRange[0], config.componentsRange[1] + 1))
    weights = rng.dirichlet(np.ones(nComponents))
    counts = rng.multinomial(n, weights)
    parts = []
    for count in counts:
        mean = rng.uniform(config.meanBox[0], config.meanBox[1], size=d)
        factor = _randomCovarianceFactor(rng, d, config.covScaleRange)
        z = rng.standard_normal((int(count), d))
        parts.append(mean + z @ factor.T)
    return np.concatenate(parts, axis=0)


def generateMixture(config: MixtureConfig, index: int = 0) -> Dataset:
    """Draws one artificial dataset; each class is a Gaussian mixture.

    Deterministic given (config, index); the id is ``synth-<seed>-<index>``.
    Size and minor fraction are redrawn while |C1| is below ``config.minMinor``.
    """
    rng = makeRng([config.seed, index])
    d = int(rng.integers(config.dimRange[0], config.dimRange[1] + 1))
    size = int(rng.integers(config.sizeRange[0], config.sizeRange[1] + 1))
    fraction = float(rng.uniform(config.minorFractionRange[0], config.minorFractionRange[1]))
    nMajor, nMinor = classSizes(size, fraction)
    for _ in range(MAX_REDRAWS):
        if nMinor >= config.minMinor:
            break
        size = int(rng.integers(config.sizeRange[0], config.sizeRange[1] + 1))
        fraction = float(rng.uniform(config.minorFractionRange[0], config.minorFractionRange[1]))
        nMajor, nMinor = classSizes(size, fraction)
    if nMinor < config.minMinor:
        raise DatasetError(f"no draw in {MAX_REDRAWS} reached {config.minMinor} minor objects")
    features = np.concatenate(
        [_sampleClass(rng, nMajor, d, config), _sampleClass(rng, nMinor, d, config)], axis=0
    )
    labels = np.concatenate([np.zeros(nMajor, dtype=np.int64), np.ones(nMinor, dtype=np.int64)])
    order = rng.permutation(size)
    return Dataset(
        f"synth-{config.seed}-{index}", features[order], labels[order], pool="artificial"
    )


def generateBank(config: MixtureConfig, count: int) -> "list[Dataset]":
    return [generateMixture(config, i) for i in range(count)]


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    foldIndex: np.ndarray
    k: int
    sizes: "tuple[int, ...]" = field(init=False)

    def __post_init__(self) -> None:
        foldIndex = np.array(self.foldIndex, dtype=np.int64, copy=True)
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if foldIndex.ndim != 1 or foldIndex.min() < 0 or foldIndex.max() >= self.k:
            raise ValueError(f"fold indices must lie in [0, {self.k})")
        foldIndex.flags.writeable = False
        object.__setattr__(self, "foldIndex", foldIndex)
        object.__setattr__(self, "sizes", tuple(np.bincount(foldIndex, minlength=self.k).tolist()))

    def testIndices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.foldIndex == j)

    def trainIndices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.foldIndex != j)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FoldAssignment):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.foldIndex, other.foldIndex)


def stratifiedFolds(s: Dataset, k: int, seed: "int|Sequence" = 0) -> FoldAssignment:
    """Stratified k-fold assignment.

    Within each class the fold sizes differ by at most one; the major class
    starts where the minor class stopped, so total fold sizes stay even.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if s.nMinor < k or s.nMajor < k:
        raise DatasetError(f"{s.id}: minor class too small for {k} folds")
    rng = makeRng(seed)
    foldIndex = np.empty(s.nObjects, dtype=np.int64)
    offset = 0
    for members in (s.minorIndex, s.majorIndex):
        shuffled = rng.permutation(members)
        foldIndex[shuffled] = (offset + np.arange(len(shuffled))) % k
        offset = (offset + len(shuffled)) % k
    return FoldAssignment(foldIndex, k)
