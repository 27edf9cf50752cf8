# formatted with ruff 0.6.4
"""Recommendation accuracy (RA), its ECDF and mean (ARA), and the k'-fold
meta-level cross-validation that compares recommenders with static strategies.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from data import Dataset, imbalanceRatio, makeRng
from errors import ArtifactError, BankTooSmallError, ConfigError, HashMismatchError, InfeasibleResampling
from evaluation import QualityGrid, cvQuality
from recommender import (
    MetaRecord,
    Recommendation,
    RecommenderConfig,
    buildMetaDataset,
    recommend,
    train,
)
from resampling import NO_RESAMPLING, ResamplingSpec, parseSpec

log = logging.getLogger(__name__)

# name -> (method, SMOTE neighbours)
STATIC_KINDS = {
    "no_resample": ("none", 0),
    "ros_eqs": ("ros", 0),
    "rus_eqs": ("rus", 0),
    "smote5_eqs": ("smote", 5),
}
RANDOM_CELL = "random_cell"
_CELL_RE = re.compile(r"^cell:([a-z]+\d*):([0-9.eE+-]+)$")

REPORT_COLUMNS = ["dataset_id", "pool", "strategy", "recommendation", "ra"]


@dataclass(frozen=True)
class StaticStrategy:
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in STATIC_KINDS:
            raise ConfigError(f"unknown static strategy {self.kind!r}")


def applyStatic(strategy: StaticStrategy, s: Dataset) -> Recommendation:
    """NoResample gives (none, 1.0); an EqS kind gives (method, IR(S)), balancing wherever applied"""
    method, k = STATIC_KINDS[strategy.kind]
    if method == "none":
        return Recommendation(NO_RESAMPLING, strategy.kind)
    m = max(1.0, imbalanceRatio(s))
    return Recommendation(ResamplingSpec(method, m, k, balance=True), strategy.kind)


def fixedCell(name: str) -> Recommendation:
    """``cell:<method>:<m>`` recommends the same cell for every dataset"""
    match = _CELL_RE.match(name)
    if match is None:
        raise ConfigError(f"cannot parse fixed-cell strategy {name!r}")
    try:
        spec = parseSpec(match.group(1), float(match.group(2)))
    except (ValueError, InfeasibleResampling) as err:
        raise ConfigError(f"bad fixed-cell strategy {name!r}: {err}") from err
    return Recommendation(spec, name)


def randomCell(grid: QualityGrid, seed: int) -> Recommendation:
    """a uniformly drawn evaluated resampling cell of ``grid``"""
    cells = [spec for spec in grid.cells if spec != NO_RESAMPLING]
    if not cells:
        return Recommendation(NO_RESAMPLING, RANDOM_CELL)
    rng = makeRng([seed, grid.datasetId, RANDOM_CELL])
    return Recommendation(cells[int(rng.integers(0, len(cells)))], RANDOM_CELL)


def checkStrategy(name: str) -> None:
    if name in STATIC_KINDS or name == RANDOM_CELL:
        return
    fixedCell(name)


def strategyRecommendation(name: str, s: Dataset, grid: QualityGrid, seed: int) -> Recommendation:
    if name in STATIC_KINDS:
        return applyStatic(StaticStrategy(name), s)
    if name == RANDOM_CELL:
        return randomCell(grid, seed)
    return fixedCell(name)


def _evaluatedPool(grid: QualityGrid, extra: "dict[ResamplingSpec, np.ndarray]") -> "dict[ResamplingSpec, float]":
    pool = grid.means()
    pool.update({spec: float(np.mean(v)) for spec, v in extra.items()})
    return pool


def evaluateOnDemand(
    s: Dataset, grid: QualityGrid, spec: ResamplingSpec, extra: "dict[ResamplingSpec, np.ndarray]"
) -> np.ndarray:
    """Q^kCV of an off-grid cell on the grid's own folds; stored in ``extra``"""
    if spec in grid.cells:
        return grid.cells[spec]
    if spec in grid.skipped:
        raise InfeasibleResampling(f"{grid.datasetId}: {spec} was skipped ({grid.skipped[spec]})")
    if spec not in extra:
        log.debug("%s: evaluating off-grid cell %s", grid.datasetId, spec)
        extra[spec] = cvQuality(s, grid.learner, spec, grid.folds, grid.cellSeed(spec))
    return extra[spec]


def recommendationAccuracy(
    grid: QualityGrid,
    rec: Recommendation,
    s: "Dataset|None" = None,
    *,
    extra: "dict[ResamplingSpec, np.ndarray]|None" = None,
) -> float:
    """(q_rec - min) / (max - min) over every evaluated cell, no-resampling included.

    An off-grid recommendation needs ``s`` and joins the pool (through ``extra``).
    All strategies compared on one dataset must share the same ``extra``.
    """
    extra = {} if extra is None else extra
    if rec.spec in grid.cells:
        q = grid.mean(rec.spec)
    elif rec.spec in extra:
        q = float(np.mean(extra[rec.spec]))
    else:
        if s is None:
            raise ValueError(f"{grid.datasetId}: off-grid cell {rec.spec} needs the dataset")
        q = float(np.mean(evaluateOnDemand(s, grid, rec.spec, extra)))
    values = list(_evaluatedPool(grid, extra).values())
    low, high = min(values), max(values)
    if high == low:
        return 1.0
    return float(min(1.0, max(0.0, (q - low) / (high - low))))


def ecdf(values) -> "list[tuple[float, float]]":
    """Points of y(x) = share of values strictly below x.

    At every distinct value v the curve has the point (v, share < v) followed by
    (v, share <= v); the curve starts at x = 0 and ends at (1, 1).
    """
    values = np.sort(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise ValueError("ECDF of an empty sample")
    n = values.size
    points = [(0.0, float(np.searchsorted(values, 0.0, side="left")) / n)]
    for v in np.unique(values):
        points.append((float(v), np.searchsorted(values, v, side="left") / n))
        points.append((float(v), np.searchsorted(values, v, side="right") / n))
    if points[-1][0] < 1.0:
        points.append((1.0, 1.0))
    deduplicated = [points[0]]
    for point in points[1:]:
        if point != deduplicated[-1]:
            deduplicated.append(point)
    return [(x, float(y)) for x, y in deduplicated]


def ecdfValue(values, x: float) -> float:
    return float(np.mean(np.asarray(values, dtype=np.float64) < x))


@dataclass
class AssessmentReport:
    strategies: "tuple[str, ...]"
    datasetIds: "tuple[str, ...]"
    pools: "dict[str, str]"
    ra: "dict[tuple[str, str], float]" = field(default_factory=dict)
    recommendations: "dict[tuple[str, str], str]" = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def values(self, strategy: str, pool: "str|None" = None) -> np.ndarray:
        return np.array(
            [
                self.ra[(i, strategy)]
                for i in self.datasetIds
                if pool is None or self.pools[i] == pool
            ]
        )

    def ara(self, strategy: str, pool: "str|None" = None) -> float:
        values = self.values(strategy, pool)
        return float(values.mean()) if values.size else float("nan")

    def poolNames(self) -> "list[str]":
        return sorted(set(self.pools.values()))

    def araTable(self) -> "dict[str, dict[str, float]]":
        """strategy -> {"all": ARA, <pool>: ARA, ...}"""
        table = {}
        for strategy in self.strategies:
            row = {"all": self.ara(strategy)}
            for pool in self.poolNames():
                row[pool] = self.ara(strategy, pool)
            table[strategy] = row
        return table

    def ecdfPoints(self, strategy: str, pool: "str|None" = None) -> "list[tuple[float, float]]":
        return ecdf(self.values(strategy, pool))


def metaFolds(ids: Sequence[str], kPrime: int, seed: int) -> "list[np.ndarray]":
    """k' disjoint index blocks covering the bank, from a seeded permutation"""
    if kPrime < 2:
        raise BankTooSmallError("meta-level cross-validation needs k' >= 2")
    if len(ids) < kPrime:
        raise BankTooSmallError(f"bank of {len(ids)} datasets is smaller than k'={kPrime}")
    order = makeRng([seed, "meta-folds"]).permutation(len(ids))
    return [np.sort(block) for block in np.array_split(order, kPrime)]


def _datasetAccuracy(task) -> "tuple[dict, dict]":
    s, grid, recs = task
    extra = {}
    # off-grid cells first so every strategy is normalized on the same pool
    for name, rec in recs.items():
        if rec.spec in grid.cells or rec.spec in grid.skipped:
            continue
        try:
            evaluateOnDemand(s, grid, rec.spec, extra)
        except InfeasibleResampling as err:
            log.warning("%s: strategy %s is infeasible (%s), RA set to 0", s.id, name, err)
    ra, warnings = {}, {}
    for name, rec in recs.items():
        if rec.spec in grid.skipped or (rec.spec not in grid.cells and rec.spec not in extra):
            if rec.spec in grid.skipped:
                log.warning("%s: strategy %s picked the skipped cell %s, RA set to 0", s.id, name, rec.spec)
            ra[name] = 0.0
            warnings[name] = "infeasible"
            continue
        ra[name] = recommendationAccuracy(grid, rec, s, extra=extra)
    return ra, warnings


def assessBank(
    bank: "Sequence[tuple[Dataset, QualityGrid]]",
    recommenderCfgs: "Sequence[RecommenderConfig]",
    strategies: Sequence[str],
    kPrime: int,
    seed: int,
    *,
    meta: "Sequence[MetaRecord]|None" = None,
    workers: int = 1,
) -> AssessmentReport:
    """Out-of-fold RA for every recommender and RA of every static strategy.

    Recommenders are trained on the meta-records outside each of the k' blocks
    and evaluated on the datasets of the block.
    """
    for name in strategies:
        checkStrategy(name)
    ids = [s.id for s, _ in bank]
    if len(set(ids)) != len(ids):
        raise ValueError("dataset ids in the bank must be unique")
    for s, grid in bank:
        if grid.datasetHash and grid.datasetHash != s.contentHash():
            raise HashMismatchError(f"{s.id}: grid was computed on different data")
    blocks = metaFolds(ids, kPrime, seed)
    if recommenderCfgs and meta is None:
        first = recommenderCfgs[0]
        meta = buildMetaDataset(bank, first.epsilon, first.alpha)
    if meta is not None and [r.datasetId for r in meta] != ids:
        raise ValueError("meta-records must follow the bank order")

    names = tuple(cfg.name for cfg in recommenderCfgs) + tuple(strategies)
    recs = {i: {} for i in ids}
    for j, block in enumerate(blocks):
        inBlock = set(block.tolist())
        held = {ids[i] for i in inBlock}
        trainRecords = [record for i, record in enumerate(meta or []) if i not in inBlock]
        for cfg in recommenderCfgs:
            log.info("Training %s on meta-fold %d/%d (%d datasets)", cfg.name, j + 1, kPrime, len(trainRecords))
            model = train(trainRecords, cfg, workers=workers)
            leaked = held & set(model.trainedOn)
            if leaked:
                raise RuntimeError(f"meta-fold {j}: {sorted(leaked)} used for training and testing")
            for i in block:
                s, grid = bank[i]
                recs[s.id][cfg.name] = recommend(
                    model, s, feasible=lambda spec, grid=grid: spec not in grid.skipped
                )
    for s, grid in bank:
        for name in strategies:
            recs[s.id][name] = strategyRecommendation(name, s, grid, seed)

    tasks = [(s, grid, recs[s.id]) for s, grid in bank]
    if workers > 1 and len(tasks) > 1:
        with Pool(workers) as pool:
            results = pool.map(_datasetAccuracy, tasks, chunksize=1)
    else:
        results = [_datasetAccuracy(task) for task in tasks]

    report = AssessmentReport(names, tuple(ids), {s.id: s.pool for s, _ in bank})
    infeasible = {}
    for (s, _), (ra, warnings) in zip(bank, results):
        for name in names:
            report.ra[(s.id, name)] = ra[name]
            report.recommendations[(s.id, name)] = recs[s.id][name].line()
        for name in warnings:
            infeasible[name] = infeasible.get(name, 0) + 1
    first = bank[0][1]
    report.metadata = {
        "k_prime": kPrime,
        "seed": seed,
        "learner": first.learner.toDict(),
        "k": first.k,
        "methods": list(first.methods),
        "multipliers": list(first.multipliers),
        "n_datasets": len(ids),
        "meta_folds": [[ids[i] for i in block] for block in blocks],
        "recommenders": [
            {"name": cfg.name, "approach": cfg.approach, "alpha": cfg.alpha, "features": list(cfg.features)}
            for cfg in recommenderCfgs
        ],
        "infeasible": infeasible,
    }
    return report


def _fileSafe(strategy: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", strategy)


def writeReport(report: AssessmentReport, outdir: "str|Path") -> None:
    """ra.csv, ecdf_<strategy>.csv and summary.json in ``outdir``"""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [
        (i, report.pools[i], name, report.recommendations.get((i, name), ""), report.ra[(i, name)])
        for i in report.datasetIds
        for name in report.strategies
    ]
    pd.DataFrame(rows, columns=REPORT_COLUMNS).to_csv(
        outdir / "ra.csv", index=False, float_format="%.17g"
    )
    for name in report.strategies:
        pd.DataFrame(report.ecdfPoints(name), columns=["x", "y"]).to_csv(
            outdir / f"ecdf_{_fileSafe(name)}.csv", index=False, float_format="%.17g"
        )
    summary = {
        "strategies": list(report.strategies),
        "pools": report.poolNames(),
        "ara": report.araTable(),
        "metadata": report.metadata,
    }
    with open(outdir / "summary.json", "w") as f:
        json.dump(summary, f, indent=1)


def readReport(outdir: "str|Path") -> AssessmentReport:
    outdir = Path(outdir)
    for name in ("summary.json", "ra.csv"):
        if not (outdir / name).is_file():
            raise ArtifactError(f"missing {outdir / name}; run the assess step first")
    with open(outdir / "summary.json", "r") as f:
        summary = json.load(f)
    frame = pd.read_csv(
        outdir / "ra.csv",
        float_precision="round_trip",
        dtype={"dataset_id": str, "pool": str, "strategy": str, "recommendation": str},
        keep_default_na=False,
    )
    ids = tuple(dict.fromkeys(frame["dataset_id"]))
    pools = dict(zip(frame["dataset_id"], frame["pool"]))
    report = AssessmentReport(tuple(summary["strategies"]), ids, pools, metadata=summary["metadata"])
    for row in frame.itertuples(index=False):
        report.ra[(row.dataset_id, row.strategy)] = float(row.ra)
        report.recommendations[(row.dataset_id, row.strategy)] = row.recommendation
    return report
