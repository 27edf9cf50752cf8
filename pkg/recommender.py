# formatted with ruff 0.6.4
"""Meta-dataset construction and the two recommendation approaches.

Approach 1 (A1) fits one classifier per (method, multiplier) cell and picks the
cell most likely to beat no-resampling. Approach 2 (A2) fits, per method, a
classifier for "resampling with this method helps" and a regressor for the
best multiplier, then snaps the predicted multiplier to the grid.
"""

import json
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np
import pandas as pd

from data import Dataset
from errors import ArtifactError, BankTooSmallError, ConfigError, HashMismatchError
from evaluation import QualityGrid
from learners import (
    ConstantModel,
    LearnerSpec,
    Model,
    fit,
    fitRegressor,
    laplaceConstant,
    learnerSpecFromDict,
    modelFromDict,
)
from metafeatures import REGISTRY, MetaFeatures, computeMetaFeatures
from qualityvars import (
    MetaTargets,
    QualityVariables,
    binarizeTargets,
    computeQualityVariables,
    qualityFromRow,
    qualityRow,
)
from resampling import NO_RESAMPLING, ResamplingSpec, isFeasible, parseSpec

log = logging.getLogger(__name__)

Approach = Literal["A1", "A2"]
APPROACHES = ("A1", "A2")

RECOMMENDER_FORMAT = "resrec-recommender"
RECOMMENDER_VERSION = 1


# ---------------------------------------------------------------- meta-dataset


@dataclass(frozen=True, eq=False)
class MetaRecord:
    datasetId: str
    pool: str
    features: MetaFeatures
    quality: QualityVariables
    targets: MetaTargets


def buildMetaDataset(
    records: "Sequence[tuple[Dataset, QualityGrid]]",
    epsilon: float,
    alpha: float,
    *,
    useWindowedPval: bool = False,
) -> "list[MetaRecord]":
    """One MetaRecord per (dataset, grid) pair, in input order."""
    meta = []
    shape = None
    for s, grid in records:
        if grid.datasetId != s.id:
            raise ValueError(f"grid of {grid.datasetId} paired with dataset {s.id}")
        if grid.datasetHash and grid.datasetHash != s.contentHash():
            raise HashMismatchError(f"{s.id}: grid was computed on different data")
        gridShape = (tuple(grid.methods), tuple(grid.multipliers), grid.k)
        if shape is None:
            shape = gridShape
        elif gridShape != shape:
            raise ValueError(f"{s.id}: grid shape {gridShape} differs from {shape}")
        log.info("Gathering meta-features for %s", s.id)
        qv = computeQualityVariables(grid, epsilon)
        meta.append(
            MetaRecord(
                s.id,
                s.pool,
                computeMetaFeatures(s),
                qv,
                binarizeTargets(qv, alpha, useWindowedPval=useWindowedPval),
            )
        )
    return meta


def writeMetaDataset(
    meta: "Sequence[MetaRecord]", path: "str|Path", *, epsilon: float, alpha: float, k: int
) -> None:
    """Wide CSV, one row per dataset, plus a ``.json`` sidecar with the grid shape."""
    if not meta:
        raise BankTooSmallError("empty meta-dataset")
    path = Path(path)
    rows = []
    for record in meta:
        row = {"dataset_id": record.datasetId, "pool": record.pool}
        row.update(record.features.asDict())
        row.update(qualityRow(record.quality, record.targets))
        rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.17g")
    sidecar = {
        "methods": list(meta[0].quality.methods),
        "multipliers": list(meta[0].quality.multipliers),
        "epsilon": epsilon,
        "alpha": alpha,
        "k": k,
    }
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(sidecar, f, indent=1)


def readMetaDataset(
    path: "str|Path", alpha: "float|None" = None, *, useWindowedPval: bool = False
) -> "list[MetaRecord]":
    """Reads meta.csv back; targets are re-binarized at ``alpha`` (default: the stored one)."""
    path = Path(path)
    if not path.is_file() or not path.with_suffix(".json").is_file():
        raise ArtifactError(f"missing meta-dataset {path}; run the meta step first")
    with open(path.with_suffix(".json"), "r") as f:
        sidecar = json.load(f)
    alpha = sidecar["alpha"] if alpha is None else alpha
    methods = tuple(sidecar["methods"])
    multipliers = tuple(float(m) for m in sidecar["multipliers"])
    frame = pd.read_csv(
        path, float_precision="round_trip", dtype={"dataset_id": str, "pool": str}
    )
    meta = []
    for row in frame.to_dict(orient="records"):
        features = MetaFeatures(np.array([row[name] for name in REGISTRY], dtype=np.float64))
        qv, targets = qualityFromRow(
            row, methods, multipliers, alpha, useWindowedPval=useWindowedPval
        )
        meta.append(MetaRecord(row["dataset_id"], row["pool"], features, qv, targets))
    return meta


# ---------------------------------------------------------------- presets


@dataclass(frozen=True)
class RecommenderConfig:
    """Everything needed to train one recommendation system"""

    name: str
    approach: Approach
    alpha: float
    epsilon: float
    features: "tuple[str, ...]"
    classifier: LearnerSpec
    regressor: "LearnerSpec|None" = None
    useWindowedPval: bool = False

    def __post_init__(self) -> None:
        if self.approach not in APPROACHES:
            raise ConfigError(f"{self.name}: unknown approach {self.approach!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"{self.name}: alpha must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ConfigError(f"{self.name}: epsilon must be positive")
        if not self.features:
            raise ConfigError(f"{self.name}: no meta-features selected")
        unknown = [name for name in self.features if name not in REGISTRY]
        if unknown:
            raise ConfigError(f"{self.name}: unknown meta-features {unknown}")
        if self.approach == "A2" and self.regressor is None:
            raise ConfigError(f"{self.name}: approach A2 needs a regressor")


def configFromPreset(
    name: str, preset: dict, epsilon: float, *, useWindowedPval: bool = False
) -> RecommenderConfig:
    try:
        regressor = preset.get("regressor")
        return RecommenderConfig(
            name,
            preset["approach"],
            float(preset["alpha"]),
            float(epsilon),
            tuple(preset["features"]),
            learnerSpecFromDict(preset["classifier"]),
            None if regressor is None else learnerSpecFromDict(regressor),
            useWindowedPval,
        )
    except KeyError as err:
        raise ConfigError(f"preset {name} lacks the {err} entry") from err


def presetConfigs(
    presets: dict, learner: str, epsilon: float, *, useWindowedPval: bool = False
) -> "list[RecommenderConfig]":
    """The recommendation systems for one base learner, in A1, A2 order"""
    if learner not in presets:
        raise ConfigError(f"no recommender presets for learner {learner!r}")
    systems = presets[learner]
    return [
        configFromPreset(
            f"rec_system_{approach[1]}",
            {"approach": approach, **systems[approach]},
            epsilon,
            useWindowedPval=useWindowedPval,
        )
        for approach in APPROACHES
        if approach in systems
    ]


# ---------------------------------------------------------------- models


@dataclass(eq=False)
class RecommenderModel:
    config: RecommenderConfig
    methods: "tuple[str, ...]"
    multipliers: "tuple[float, ...]"
    center: np.ndarray
    scale: np.ndarray
    # A1: (method, m) -> classifier; A2: method -> classifier
    classifiers: dict = field(default_factory=dict)
    regressors: "dict[str, Model]" = field(default_factory=dict)
    trainedOn: "tuple[str, ...]" = ()

    @property
    def approach(self) -> str:
        return self.config.approach

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.center) / self.scale


def _standardization(X: np.ndarray) -> "tuple[np.ndarray, np.ndarray]":
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return center, scale


def _fitClassifier(task) -> Model:
    spec, X, y = task
    if np.all(y == y[0]):
        return laplaceConstant(y, X.shape[1])
    return fit(spec, (X, y))


def _fitAll(tasks: list, workers: int) -> "list[Model]":
    if workers > 1 and len(tasks) > 1:
        with Pool(workers) as pool:
            return pool.map(_fitClassifier, tasks, chunksize=1)
    return [_fitClassifier(task) for task in tasks]


def _prepare(meta: "Sequence[MetaRecord]", cfg: RecommenderConfig):
    if len(meta) == 0:
        raise BankTooSmallError("empty meta-dataset")
    if len(meta) < 2:
        log.warning("training %s on a single meta-record", cfg.name)
    first = meta[0].quality
    for record in meta:
        if (record.quality.methods, record.quality.multipliers) != (first.methods, first.multipliers):
            raise ValueError(f"{record.datasetId}: meta-record grid differs from {meta[0].datasetId}")
    X = np.stack([record.features.select(cfg.features) for record in meta])
    center, scale = _standardization(X)
    targets = [
        binarizeTargets(record.quality, cfg.alpha, useWindowedPval=cfg.useWindowedPval)
        for record in meta
    ]
    model = RecommenderModel(
        cfg,
        first.methods,
        first.multipliers,
        center,
        scale,
        trainedOn=tuple(record.datasetId for record in meta),
    )
    return model, model.standardize(X), targets


def trainApproach1(meta: "Sequence[MetaRecord]", cfg: RecommenderConfig, *, workers: int = 1) -> RecommenderModel:
    """One classifier per (method, multiplier) cell on y_rm.

    A cell skipped on a dataset counts as y_rm = 0 there; a cell skipped on
    every dataset gets no classifier.
    """
    model, X, targets = _prepare(meta, cfg)
    cells, tasks = [], []
    for method in model.methods:
        for m in model.multipliers:
            cell = (method, m)
            if not any(cell in record.quality.qPval for record in meta):
                log.debug("%s: no dataset could evaluate %s,%r", cfg.name, method, m)
                continue
            y = np.array([t.yRm.get(cell, 0) for t in targets], dtype=np.float64)
            cells.append(cell)
            tasks.append((cfg.classifier, X, y))
    log.info("Training %d meta-classifiers for %s", len(tasks), cfg.name)
    model.classifiers = dict(zip(cells, _fitAll(tasks, workers)))
    return model


def trainApproach2(meta: "Sequence[MetaRecord]", cfg: RecommenderConfig, *, workers: int = 1) -> RecommenderModel:
    """Per method a classifier on y_r and a regressor on z_r.

    The regressor only sees datasets with y_r = 1; without any it predicts the
    middle of the multiplier grid.
    """
    model, X, targets = _prepare(meta, cfg)
    tasks = []
    for method in model.methods:
        y = np.array([t.yR.get(method, 0) for t in targets], dtype=np.float64)
        tasks.append((cfg.classifier, X, y))
    model.classifiers = dict(zip(model.methods, _fitAll(tasks, workers)))
    midpoint = 0.5 * (min(model.multipliers) + max(model.multipliers))
    for method in model.methods:
        positive = [i for i, t in enumerate(targets) if t.yR.get(method, 0) == 1]
        if not positive:
            log.debug("%s: no dataset improves with %s, regressor predicts %r", cfg.name, method, midpoint)
            model.regressors[method] = ConstantModel(midpoint, X.shape[1])
            continue
        z = np.array([targets[i].zR[method] for i in positive])
        model.regressors[method] = fitRegressor(cfg.regressor, X[positive], z)
    return model


def train(meta: "Sequence[MetaRecord]", cfg: RecommenderConfig, *, workers: int = 1) -> RecommenderModel:
    if cfg.approach == "A1":
        return trainApproach1(meta, cfg, workers=workers)
    return trainApproach2(meta, cfg, workers=workers)


# ---------------------------------------------------------------- recommend


@dataclass(frozen=True)
class Recommendation:
    spec: ResamplingSpec
    approach: str
    detail: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def method(self) -> "str|None":
        return None if self.spec.method == "none" else self.spec.label

    @property
    def multiplier(self) -> float:
        return self.spec.multiplier

    def line(self) -> str:
        """``smote5,2.75`` or ``none,1.0``"""
        return str(self.spec)


def snapToGrid(z: float, multipliers: Sequence[float]) -> float:
    """clips to [min M, max M], then the nearest grid point, ties to the smaller one"""
    grid = np.sort(np.asarray(multipliers, dtype=np.float64))
    clipped = min(max(float(z), grid[0]), grid[-1])
    return float(grid[int(np.argmin(np.abs(grid - clipped)))])


def _cellName(method: str, m: "float|None" = None) -> str:
    return method if m is None else f"{method},{m!r}"


def recommend(
    model: RecommenderModel,
    s: Dataset,
    *,
    feasible: "Callable[[ResamplingSpec], bool]|None" = None,
) -> Recommendation:
    """(method, multiplier) for ``s``; no-resampling when nothing is predicted to help.

    Candidates with a positive prediction are ranked by probability (then method
    order, then multiplier); infeasible ones fall through to the next candidate.
    """
    x = model.standardize(computeMetaFeatures(s).select(model.config.features))
    order = {method: i for i, method in enumerate(model.methods)}
    detail = {"approach": model.approach, "system": model.config.name, "probabilities": {}}
    candidates = []
    if model.approach == "A1":
        for (method, m), classifier in model.classifiers.items():
            p = classifier.predictScore(x)
            detail["probabilities"][_cellName(method, m)] = p
            if p >= 0.5:
                candidates.append((-p, order[method], m, method))
    else:
        detail["multipliers"] = {}
        for method, classifier in model.classifiers.items():
            p = classifier.predictScore(x)
            z = model.regressors[method].predictScore(x)
            m = snapToGrid(z, model.multipliers)
            detail["probabilities"][_cellName(method)] = p
            detail["multipliers"][_cellName(method)] = {"predicted": z, "snapped": m}
            if p >= 0.5:
                candidates.append((-p, order[method], m, method))

    skipped = []
    for _, _, m, method in sorted(candidates):
        spec = parseSpec(method, m)
        if isFeasible(s, spec) and (feasible is None or feasible(spec)):
            detail["fallbacks"] = skipped
            return Recommendation(spec, model.approach, detail)
        log.debug("%s: %s is infeasible on %s, trying the next candidate", model.config.name, spec, s.id)
        skipped.append(str(spec))
    detail["fallbacks"] = skipped
    return Recommendation(NO_RESAMPLING, model.approach, detail)


# ---------------------------------------------------------------- persistence


def recommenderDocument(model: RecommenderModel) -> dict:
    cfg = model.config
    if model.approach == "A1":
        classifiers = [
            {"method": method, "multiplier": m, "model": c.toDict()}
            for (method, m), c in model.classifiers.items()
        ]
    else:
        classifiers = [{"method": method, "model": c.toDict()} for method, c in model.classifiers.items()]
    return {
        "format": RECOMMENDER_FORMAT,
        "version": RECOMMENDER_VERSION,
        "name": cfg.name,
        "approach": cfg.approach,
        "alpha": cfg.alpha,
        "epsilon": cfg.epsilon,
        "use_windowed_pval_for_targets": cfg.useWindowedPval,
        "features": list(cfg.features),
        "classifier": cfg.classifier.toDict(),
        "regressor": None if cfg.regressor is None else cfg.regressor.toDict(),
        "methods": list(model.methods),
        "multipliers": list(model.multipliers),
        "center": model.center.tolist(),
        "scale": model.scale.tolist(),
        "trained_on": list(model.trainedOn),
        "classifiers": classifiers,
        "regressors": [{"method": method, "model": r.toDict()} for method, r in model.regressors.items()],
    }


def recommenderFromDocument(doc: dict) -> RecommenderModel:
    if doc.get("format") != RECOMMENDER_FORMAT or doc.get("version") != RECOMMENDER_VERSION:
        raise ArtifactError(
            f"unsupported recommender document {doc.get('format')!r} v{doc.get('version')!r}"
        )
    regressor = doc.get("regressor")
    cfg = RecommenderConfig(
        doc["name"],
        doc["approach"],
        float(doc["alpha"]),
        float(doc["epsilon"]),
        tuple(doc["features"]),
        learnerSpecFromDict(doc["classifier"]),
        None if regressor is None else learnerSpecFromDict(regressor),
        bool(doc.get("use_windowed_pval_for_targets", False)),
    )
    model = RecommenderModel(
        cfg,
        tuple(doc["methods"]),
        tuple(float(m) for m in doc["multipliers"]),
        np.asarray(doc["center"], dtype=np.float64),
        np.asarray(doc["scale"], dtype=np.float64),
        trainedOn=tuple(doc["trained_on"]),
    )
    for entry in doc["classifiers"]:
        key = entry["method"] if cfg.approach == "A2" else (entry["method"], float(entry["multiplier"]))
        model.classifiers[key] = modelFromDict(entry["model"])
    for entry in doc["regressors"]:
        model.regressors[entry["method"]] = modelFromDict(entry["model"])
    return model


def saveRecommender(model: RecommenderModel, path: "str|Path") -> None:
    with open(path, "w") as f:
        json.dump(recommenderDocument(model), f)


def loadRecommender(path: "str|Path") -> RecommenderModel:
    if not Path(path).is_file():
        raise ArtifactError(f"missing recommender model {path}; run the train step first")
    with open(path, "r") as f:
        return recommenderFromDocument(json.load(f))
