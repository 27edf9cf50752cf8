# formatted with ruff 0.6.4
"""PR-AUC and the cross-validated quality grid over (method, multiplier) cells."""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from data import Dataset, FoldAssignment, stratifiedFolds
from errors import ArtifactError, InfeasibleResampling
from learners import LearnerSpec, fit, learnerSpecFromDict
from resampling import NO_RESAMPLING, ResamplingSpec, parseSpec, resample

log = logging.getLogger(__name__)

GRID_COLUMNS = ["dataset_id", "learner", "method", "multiplier", "fold", "score"]
SKIP_COLUMNS = ["dataset_id", "learner", "method", "multiplier", "reason"]


def prAuc(labels, scores) -> float:
    """Average precision with pooled ties.

    Precision is taken at the end of every group of tied scores and credited to
    all positives of the group, so the value does not depend on the order of
    tied objects.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError("labels and scores must be vectors of equal length")
    nPositive = int(np.sum(labels == 1))
    if nPositive == 0:
        raise ValueError("PR-AUC undefined: no positive labels")
    order = np.argsort(-scores, kind="stable")
    sortedScores = scores[order]
    sortedLabels = (labels[order] == 1).astype(np.int64)
    groupEnd = np.append(sortedScores[1:] != sortedScores[:-1], True)
    truePositives = np.cumsum(sortedLabels)[groupEnd]
    predicted = np.flatnonzero(groupEnd) + 1
    positivesInGroup = np.diff(truePositives, prepend=0)
    return float(np.sum(positivesInGroup * truePositives / predicted) / nPositive)


def _seedList(seed) -> list:
    return list(seed) if isinstance(seed, (list, tuple)) else [seed]


def cvQuality(
    s: Dataset,
    learner: LearnerSpec,
    spec: ResamplingSpec,
    folds: FoldAssignment,
    seed=0,
    *,
    trace: "list|None" = None,
) -> np.ndarray:
    """k per-fold PR-AUC values; only the training split is resampled.

    Raises InfeasibleResampling when ``spec`` cannot be applied to some split.
    ``trace`` (if given) receives per-fold class counts for protocol checks.
    """
    base = _seedList(seed)
    scores = np.empty(folds.k)
    for j in range(folds.k):
        train = s.subset(folds.trainIndices(j))
        test = s.subset(folds.testIndices(j))
        resampled = resample(train, spec, seed=base + [j])
        model = fit(learner, resampled)
        scores[j] = prAuc(test.labels, model.predictScores(test.features))
        if trace is not None:
            trace.append(
                {
                    "fold": j,
                    "train": (train.nMajor, train.nMinor),
                    "resampled": (resampled.nMajor, resampled.nMinor),
                    "test": (test.nMajor, test.nMinor),
                }
            )
    return scores


def cellSeed(seed: int, datasetId: str, spec: ResamplingSpec, multipliers: Sequence[float]) -> list:
    """RNG entropy of one cell: (master seed, dataset, method, multiplier index)"""
    if spec.method == "none":
        position = -1
    elif not spec.balance and spec.multiplier in multipliers:
        position = list(multipliers).index(spec.multiplier)
    else:
        position = f"off-grid:{spec.multiplier!r}:{spec.balance}"
    return [seed, datasetId, spec.label, position]


def foldSeed(seed: int, datasetId: str) -> list:
    return [seed, datasetId, "folds"]


def cellKey(datasetHash: str, learner: LearnerSpec, spec: ResamplingSpec, k: int, cellEntropy: list) -> str:
    """content hash identifying one cell computation (for the on-disk cache)"""
    payload = json.dumps(
        {
            "dataset": datasetHash,
            "learner": learner.toDict(),
            "spec": [spec.method, spec.multiplier, spec.kNeighbors, spec.balance],
            "k": k,
            "seed": [str(part) for part in cellEntropy],
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(eq=False)
class QualityGrid:
    """Q^kCV for every (method, multiplier) of one dataset and one learner.

    All cells share ``folds``; infeasible cells live in ``skipped`` with a reason.
    """

    datasetId: str
    learner: LearnerSpec
    k: int
    seed: int
    methods: "tuple[str, ...]"
    multipliers: "tuple[float, ...]"
    folds: FoldAssignment
    cells: "dict[ResamplingSpec, np.ndarray]" = field(default_factory=dict)
    skipped: "dict[ResamplingSpec, str]" = field(default_factory=dict)
    datasetHash: str = ""
    cacheHits: int = 0

    @property
    def baseline(self) -> np.ndarray:
        return self.cells[NO_RESAMPLING]

    def mean(self, spec: ResamplingSpec) -> float:
        return float(np.mean(self.cells[spec]))

    def means(self) -> "dict[ResamplingSpec, float]":
        return {spec: float(np.mean(v)) for spec, v in self.cells.items()}

    def cellSeed(self, spec: ResamplingSpec) -> list:
        return cellSeed(self.seed, self.datasetId, spec, self.multipliers)

    def allSpecs(self) -> "list[ResamplingSpec]":
        specs = [NO_RESAMPLING]
        for method in self.methods:
            specs.extend(parseSpec(method, m) for m in self.multipliers)
        return specs


def _evaluateCell(task) -> "tuple[str, object]":
    s, learner, spec, folds, seed = task
    try:
        return "ok", cvQuality(s, learner, spec, folds, seed)
    except InfeasibleResampling as err:
        return "skip", str(err)


def gridMultipliers(low: float, high: float, step: float) -> "tuple[float, ...]":
    """low, low+step, ..., high; values rounded to 10 decimals"""
    if step <= 0 or high < low:
        raise ValueError("multiplier grid needs low <= high and step > 0")
    count = int(np.floor((high - low) / step + 1e-9)) + 1
    return tuple(round(low + i * step, 10) for i in range(count))


def qualityGrid(
    s: Dataset,
    learner: LearnerSpec,
    methods: Sequence[str],
    multipliers: Sequence[float],
    k: int,
    seed: int,
    *,
    workers: int = 1,
    cache=None,
) -> QualityGrid:
    """Evaluates the no-resampling cell and every (method, multiplier) cell.

    ``cache`` is any mapping from cell keys to results; hits are not recomputed.
    The result does not depend on ``workers`` or on evaluation order.
    """
    if len(methods) == 0 or len(multipliers) == 0:
        raise ValueError("method and multiplier lists must be non-empty")
    multipliers = tuple(sorted({float(m) for m in multipliers}))
    folds = stratifiedFolds(s, k, foldSeed(seed, s.id))
    grid = QualityGrid(
        s.id, learner, k, seed, tuple(methods), multipliers, folds, datasetHash=s.contentHash()
    )
    pending = []
    for spec in grid.allSpecs():
        entropy = grid.cellSeed(spec)
        key = cellKey(grid.datasetHash, learner, spec, k, entropy)
        if cache is not None and key in cache:
            grid.cacheHits += 1
            _record(grid, spec, cache[key])
            continue
        pending.append((key, spec, (s, learner, spec, folds, entropy)))

    if workers > 1 and len(pending) > 1:
        with Pool(workers) as pool:
            results = pool.map(_evaluateCell, [task for _, _, task in pending], chunksize=1)
    else:
        results = [_evaluateCell(task) for _, _, task in pending]

    for (key, spec, _), result in zip(pending, results):
        status, value = result
        cached = {"scores": value.tolist()} if status == "ok" else {"skip": value}
        if cache is not None:
            cache[key] = cached
        _record(grid, spec, cached)

    if NO_RESAMPLING not in grid.cells:
        raise InfeasibleResampling(f"{s.id}: the no-resampling cell could not be evaluated")
    # keep cell order independent of which cells came from the cache
    order = {spec: i for i, spec in enumerate(grid.allSpecs())}
    grid.cells = dict(sorted(grid.cells.items(), key=lambda kv: order[kv[0]]))
    grid.skipped = dict(sorted(grid.skipped.items(), key=lambda kv: order[kv[0]]))
    for spec, reason in grid.skipped.items():
        log.debug("%s: skipped %s (%s)", s.id, spec, reason)
    return grid


def _record(grid: QualityGrid, spec: ResamplingSpec, result: dict) -> None:
    if "skip" in result:
        grid.skipped[spec] = result["skip"]
    else:
        grid.cells[spec] = np.asarray(result["scores"], dtype=np.float64)


def _gridFile(stem: Path, suffix: str) -> Path:
    # ids may contain dots, so the suffix is appended rather than substituted
    return stem.parent / f"{stem.name}{suffix}"


def writeGrid(grid: QualityGrid, stem: "str|Path") -> None:
    """``<stem>.csv`` (long format), ``<stem>.skips.csv`` and ``<stem>.json``"""
    stem = Path(stem)
    rows = []
    for spec, scores in grid.cells.items():
        for j, score in enumerate(scores):
            rows.append((grid.datasetId, grid.learner.name, spec.label, spec.multiplier, j, score))
    pd.DataFrame(rows, columns=GRID_COLUMNS).to_csv(
        _gridFile(stem, ".csv"), index=False, float_format="%.17g"
    )
    skips = [
        (grid.datasetId, grid.learner.name, spec.label, spec.multiplier, reason)
        for spec, reason in grid.skipped.items()
    ]
    pd.DataFrame(skips, columns=SKIP_COLUMNS).to_csv(
        _gridFile(stem, ".skips.csv"), index=False, float_format="%.17g"
    )
    sidecar = {
        "dataset_id": grid.datasetId,
        "dataset_hash": grid.datasetHash,
        "learner": grid.learner.toDict(),
        "k": grid.k,
        "seed": grid.seed,
        "methods": list(grid.methods),
        "multipliers": list(grid.multipliers),
        "folds": grid.folds.foldIndex.tolist(),
    }
    with open(_gridFile(stem, ".json"), "w") as f:
        json.dump(sidecar, f, indent=1)


def readGrid(stem: "str|Path") -> QualityGrid:
    stem = Path(stem)
    for path in (_gridFile(stem, ".csv"), _gridFile(stem, ".skips.csv"), _gridFile(stem, ".json")):
        if not path.is_file():
            raise ArtifactError(f"missing grid file {path}")
    with open(_gridFile(stem, ".json"), "r") as f:
        sidecar = json.load(f)
    grid = QualityGrid(
        sidecar["dataset_id"],
        learnerSpecFromDict(sidecar["learner"]),
        int(sidecar["k"]),
        int(sidecar["seed"]),
        tuple(sidecar["methods"]),
        tuple(float(m) for m in sidecar["multipliers"]),
        FoldAssignment(np.asarray(sidecar["folds"]), int(sidecar["k"])),
        datasetHash=sidecar["dataset_hash"],
    )
    frame = pd.read_csv(
        _gridFile(stem, ".csv"), float_precision="round_trip", dtype={"method": str}
    )
    for (method, multiplier), group in frame.groupby(["method", "multiplier"], sort=False):
        group = group.sort_values("fold")
        grid.cells[parseSpec(method, multiplier)] = group["score"].to_numpy(dtype=np.float64)
    skips = pd.read_csv(
        _gridFile(stem, ".skips.csv"), float_precision="round_trip", dtype={"method": str, "reason": str}
    )
    for row in skips.itertuples(index=False):
        grid.skipped[parseSpec(row.method, row.multiplier)] = row.reason
    return grid
