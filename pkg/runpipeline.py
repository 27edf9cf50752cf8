# formatted with ruff 0.6.4
"""Pipeline steps behind the CLI: gen, grid, meta, train, recommend, assess, report.

Every step reads its inputs from and writes its outputs to the artifact
directory (``out`` in the run config):

    out/datasets/<id>.csv, out/datasets/manifest.json
    out/grids/<id>.csv, <id>.skips.csv, <id>.json
    out/skipped.json
    out/cache/cells/<key>.json
    out/meta/meta.csv, out/meta/meta.json
    out/models/<system>.json
    out/report/...
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from assessment import assessBank, checkStrategy, readReport, writeReport
from data import Dataset, MixtureConfig, generateMixture, ingestCsv, writeCsv
from errors import (
    ArtifactError,
    ConfigError,
    DatasetError,
    HashMismatchError,
    InfeasibleResampling,
    ResRecError,
)
from evaluation import gridMultipliers, qualityGrid, readGrid, writeGrid
from learners import FIT_COUNTS, LearnerSpec, learnerSpecFromDict
from recommender import (
    buildMetaDataset,
    loadRecommender,
    presetConfigs,
    readMetaDataset,
    recommend,
    saveRecommender,
    train,
    writeMetaDataset,
)
from resampling import parseSpec
from runhelper import writeReportPage

log = logging.getLogger(__name__)

HERE = Path(__file__).resolve().parent

DEFAULT_CONFIG = {
    "seed": 0,
    "workers": 1,
    "out": "out",
    "learner": {"kind": "dtree", "params": {}},
    "methods": ["ros", "rus", "smote1", "smote3", "smote5", "smote7"],
    "multipliers": {"min": 1.25, "max": 10.0, "step": 0.25},
    "k": 20,
    "k_prime": 10,
    "alpha": 0.05,
    "epsilon": 0.75,
    "use_windowed_pval_for_targets": False,
    "datasets": {
        "generate": {
            "count": 1000,
            "dim": [6, 40],
            "size": [200, 1000],
            "minor_fraction": [0.05, 0.35],
            "components": [1, 3],
            "mean_box": [-1.0, 1.0],
            "cov_scale": [0.5, 2.0],
        },
        "csv_dir": None,
        "label_column": "label",
    },
    "recommenders": {
        "presets": str(HERE / "configs" / "presets.yml"),
        "approaches": ["A1", "A2"],
    },
    "strategies": ["no_resample", "ros_eqs", "rus_eqs", "smote5_eqs", "random_cell"],
}


def yamlToDict(filename, **yamlOpts):
    """Simply opens a yaml file an returns an object with the parsed data"""
    with open(filename, "r") as stram:
        ymldata = yaml.load(stram, **yamlOpts)
        # the return closes the file :)
        return ymldata


def mergeConfig(base: dict, update: dict) -> dict:
    """nested dictionaries are merged key by key, everything else is replaced"""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = mergeConfig(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def updateConfig(config: dict, keyPath: str, value: str) -> dict:
    """Updates or adds ``value`` under the dotted ``keyPath`` (``datasets.generate.count``).

    The value is parsed as YAML, so ``10`` becomes an int and ``[ros, rus]`` a list.
    """
    path = keyPath.split(".")
    t = config
    for addr in path[:-1]:
        if addr not in t or not isinstance(t[addr], dict):
            t[addr] = {}
        t = t[addr]
    t[path[-1]] = yaml.safe_load(value)
    return config


@dataclass
class RunConfig:
    seed: int
    workers: int
    out: Path
    learner: LearnerSpec
    methods: "tuple[str, ...]"
    multipliers: "tuple[float, ...]"
    k: int
    kPrime: int
    alpha: float
    epsilon: float
    useWindowedPval: bool
    mixture: MixtureConfig
    count: int
    csvDir: "Path|None"
    labelColumn: str
    presets: Path
    approaches: "tuple[str, ...]"
    strategies: "tuple[str, ...]"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def datasetsDir(self) -> Path:
        return self.out / "datasets"

    @property
    def manifest(self) -> Path:
        return self.datasetsDir / "manifest.json"

    @property
    def gridsDir(self) -> Path:
        return self.out / "grids"

    @property
    def skipLedger(self) -> Path:
        # outside gridsDir, where any <name>.json belongs to a dataset
        return self.out / "skipped.json"

    @property
    def cacheDir(self) -> Path:
        return self.out / "cache" / "cells"

    @property
    def metaCsv(self) -> Path:
        return self.out / "meta" / "meta.csv"

    @property
    def modelsDir(self) -> Path:
        return self.out / "models"

    @property
    def reportDir(self) -> Path:
        return self.out / "report"


def _range(values, name: str, cast):
    if not isinstance(values, (list, tuple)) or len(values) != 2:
        raise ConfigError(f"{name} must be a [low, high] pair")
    return (cast(values[0]), cast(values[1]))


def runConfigFromDict(raw: dict) -> RunConfig:
    try:
        grid = raw["multipliers"]
        multipliers = gridMultipliers(float(grid["min"]), float(grid["max"]), float(grid["step"]))
        if multipliers[0] < 1.0:
            raise ConfigError("multipliers must be at least 1")
        methods = tuple(str(m) for m in raw["methods"])
        if not methods:
            raise ConfigError("the method list is empty")
        for method in methods:
            if parseSpec(method).method == "none":
                raise ConfigError("'none' is always evaluated and cannot be listed as a method")
        alpha = float(raw["alpha"])
        if not 0.0 < alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        epsilon = float(raw["epsilon"])
        if epsilon <= 0.0:
            raise ConfigError("epsilon must be positive")
        k, kPrime = int(raw["k"]), int(raw["k_prime"])
        if k < 2 or kPrime < 2:
            raise ConfigError("k and k_prime must be at least 2")
        generate = raw["datasets"]["generate"] or {}
        mixture = MixtureConfig(
            dimRange=_range(generate.get("dim", [6, 40]), "dim", int),
            sizeRange=_range(generate.get("size", [200, 1000]), "size", int),
            minorFractionRange=_range(generate.get("minor_fraction", [0.05, 0.35]), "minor_fraction", float),
            componentsRange=_range(generate.get("components", [1, 3]), "components", int),
            meanBox=_range(generate.get("mean_box", [-1.0, 1.0]), "mean_box", float),
            covScaleRange=_range(generate.get("cov_scale", [0.5, 2.0]), "cov_scale", float),
            seed=int(raw["seed"]),
            minMinor=k,
        )
        strategies = tuple(str(s) for s in raw["strategies"] or ())
        for name in strategies:
            checkStrategy(name)
        csvDir = raw["datasets"].get("csv_dir")
        workers = int(raw["workers"])
        if workers < 1:
            raise ConfigError("workers must be at least 1")
        return RunConfig(
            seed=int(raw["seed"]),
            workers=workers,
            out=Path(raw["out"]),
            learner=learnerSpecFromDict(raw["learner"]),
            methods=methods,
            multipliers=multipliers,
            k=k,
            kPrime=kPrime,
            alpha=alpha,
            epsilon=epsilon,
            useWindowedPval=bool(raw.get("use_windowed_pval_for_targets", False)),
            mixture=mixture,
            count=int(generate.get("count", 0)),
            csvDir=None if csvDir is None else Path(csvDir),
            labelColumn=str(raw["datasets"].get("label_column", "label")),
            presets=Path(raw["recommenders"]["presets"]),
            approaches=tuple(raw["recommenders"].get("approaches", ["A1", "A2"])),
            strategies=strategies,
            raw=raw,
        )
    except ResRecError as err:
        # learner and dataset errors in a config are configuration errors
        raise ConfigError(str(err)) from err
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid run configuration: {err}") from err


def loadRunConfig(
    configFile: "str|None" = None,
    overrides=(),
    *,
    seed: "int|None" = None,
    workers: "int|None" = None,
    out: "str|None" = None,
) -> RunConfig:
    """defaults < config file < ``--set key.path=value`` < dedicated flags"""
    raw = copy.deepcopy(DEFAULT_CONFIG)
    if configFile is not None:
        if not os.path.exists(configFile):
            raise ConfigError("Found no config file called " + str(configFile))
        fromFile = yamlToDict(configFile, Loader=yaml.SafeLoader) or {}
        if not isinstance(fromFile, dict):
            raise ConfigError(f"{configFile} is not a key-value document")
        raw = mergeConfig(raw, fromFile)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key.path=value, got {item!r}")
        key, value = item.split("=", 1)
        updateConfig(raw, key.strip(), value)
    for key, value in (("seed", seed), ("workers", workers), ("out", out)):
        if value is not None:
            raw[key] = value
    return runConfigFromDict(raw)


def sha256File(path: "str|Path") -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class CellCache:
    """On-disk mapping from cell keys to {"scores": [...]} or {"skip": reason}"""

    def __init__(self, directory: "str|Path") -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def __contains__(self, key: str) -> bool:
        return self._path(key).is_file()

    def __getitem__(self, key: str) -> dict:
        with open(self._path(key), "r") as f:
            return json.load(f)

    def __setitem__(self, key: str, value: dict) -> None:
        tmp = self._path(key).with_suffix(".tmp")
        with open(tmp, "w") as f:
            json.dump(value, f)
        os.replace(tmp, self._path(key))


# ---------------------------------------------------------------- gen


def runGen(cfg: RunConfig, count: "int|None" = None) -> "list[dict]":
    """Writes the generated datasets and copies of the CSV datasets, plus the manifest."""
    count = cfg.count if count is None else count
    cfg.datasetsDir.mkdir(parents=True, exist_ok=True)
    entries = []
    for index in range(count):
        s = generateMixture(cfg.mixture, index)
        entries.append(_storeDataset(cfg, s))
    if cfg.csvDir is not None:
        if not cfg.csvDir.is_dir():
            raise ConfigError(f"csv_dir {cfg.csvDir} is not a directory")
        for path in sorted(cfg.csvDir.glob("*.csv")):
            s = ingestCsv(path, cfg.labelColumn, pool="real")
            entries.append(_storeDataset(cfg, s))
    if not entries:
        raise ConfigError("no datasets: set datasets.generate.count or datasets.csv_dir")
    with open(cfg.manifest, "w") as f:
        json.dump({"label_column": "label", "datasets": entries}, f, indent=1)
    print(f"Wrote {len(entries)} datasets to {cfg.datasetsDir}")
    return entries


def _storeDataset(cfg: RunConfig, s: Dataset) -> dict:
    print(f"Processing dataset {s.id}")
    path = cfg.datasetsDir / f"{s.id}.csv"
    writeCsv(s, path)
    return {"id": s.id, "file": path.name, "pool": s.pool, "sha256": sha256File(path)}


def loadBank(cfg: RunConfig) -> "list[Dataset]":
    """the datasets of the manifest, each checked against its recorded hash"""
    if not cfg.manifest.is_file():
        raise ArtifactError(f"missing {cfg.manifest}; run the gen step first")
    with open(cfg.manifest, "r") as f:
        manifest = json.load(f)
    bank = []
    for entry in manifest["datasets"]:
        path = cfg.datasetsDir / entry["file"]
        if not path.is_file():
            raise ArtifactError(f"missing dataset file {path}")
        if sha256File(path) != entry["sha256"]:
            raise HashMismatchError(f"{path} does not match the manifest")
        bank.append(ingestCsv(path, manifest.get("label_column", "label"), id=entry["id"], pool=entry["pool"]))
    return bank


# ---------------------------------------------------------------- grid


def runGrid(cfg: RunConfig) -> "tuple[int, int]":
    """Computes (or completes) the quality grid of every dataset; returns (cache hits, cells).

    A dataset whose grid cannot be built (e.g. fewer than k minor objects) is
    left out and listed in the skip ledger ``skipped.json``.
    """
    cfg.gridsDir.mkdir(parents=True, exist_ok=True)
    cache = CellCache(cfg.cacheDir)
    hits = cells = 0
    skipped = {}
    for s in loadBank(cfg):
        try:
            grid = qualityGrid(
                s, cfg.learner, cfg.methods, cfg.multipliers, cfg.k, cfg.seed, workers=cfg.workers, cache=cache
            )
        except (DatasetError, InfeasibleResampling) as err:
            log.warning("skipping %s: %s", s.id, err)
            print(f"Skipping dataset {s.id}: {err}")
            skipped[s.id] = str(err)
            continue
        total = len(grid.cells) + len(grid.skipped)
        print(f"Gathering grid for {s.id} (cache hits {grid.cacheHits}/{total}, skipped {len(grid.skipped)})")
        writeGrid(grid, cfg.gridsDir / s.id)
        hits += grid.cacheHits
        cells += total
    with open(cfg.skipLedger, "w") as f:
        json.dump(skipped, f, indent=1, sort_keys=True)
    print(f"Cache hits: {hits}/{cells} cells")
    return hits, cells


def skippedDatasets(cfg: RunConfig) -> "dict[str, str]":
    """dataset id -> reason, for the datasets the last grid step left out"""
    if not cfg.skipLedger.is_file():
        return {}
    with open(cfg.skipLedger, "r") as f:
        return json.load(f)


def loadGrids(cfg: RunConfig, bank: "list[Dataset]") -> list:
    pairs = []
    skipped = skippedDatasets(cfg)
    for s in bank:
        if s.id in skipped:
            log.info("no grid for %s: %s", s.id, skipped[s.id])
            continue
        grid = readGrid(cfg.gridsDir / s.id)
        if grid.datasetHash != s.contentHash():
            raise HashMismatchError(f"grid of {s.id} was computed on different data")
        if (grid.methods, grid.multipliers, grid.k, grid.learner) != (
            cfg.methods,
            cfg.multipliers,
            cfg.k,
            cfg.learner,
        ):
            raise ArtifactError(f"grid of {s.id} does not match the run configuration; rerun grid")
        pairs.append((s, grid))
    return pairs


# ---------------------------------------------------------------- meta, train, recommend


def runMeta(cfg: RunConfig):
    bank = loadGrids(cfg, loadBank(cfg))
    meta = buildMetaDataset(bank, cfg.epsilon, cfg.alpha, useWindowedPval=cfg.useWindowedPval)
    cfg.metaCsv.parent.mkdir(parents=True, exist_ok=True)
    writeMetaDataset(meta, cfg.metaCsv, epsilon=cfg.epsilon, alpha=cfg.alpha, k=cfg.k)
    print(f"Wrote {len(meta)} meta-records to {cfg.metaCsv}")
    return meta


def recommenderConfigs(cfg: RunConfig) -> list:
    if not cfg.presets.is_file():
        raise ConfigError(f"Found no presets file called {cfg.presets}")
    presets = yamlToDict(cfg.presets, Loader=yaml.SafeLoader)
    systems = presetConfigs(presets, cfg.learner.kind, cfg.epsilon, useWindowedPval=cfg.useWindowedPval)
    return [s for s in systems if s.approach in cfg.approaches]


def runTrain(cfg: RunConfig) -> "list[Path]":
    meta = readMetaDataset(cfg.metaCsv, useWindowedPval=cfg.useWindowedPval)
    cfg.modelsDir.mkdir(parents=True, exist_ok=True)
    paths = []
    for system in recommenderConfigs(cfg):
        print(f"Training {system.name} ({system.approach}) on {len(meta)} datasets")
        model = train(meta, system, workers=cfg.workers)
        path = cfg.modelsDir / f"{system.approach}.json"
        saveRecommender(model, path)
        paths.append(path)
    return paths


def runRecommend(modelPath: "str|Path", dataPath: "str|Path", labelColumn: str = "label"):
    """(recommendation, number of base-learner fits during the call)"""
    model = loadRecommender(modelPath)
    s = ingestCsv(dataPath, labelColumn)
    before = sum(FIT_COUNTS.values())
    rec = recommend(model, s)
    return rec, sum(FIT_COUNTS.values()) - before


# ---------------------------------------------------------------- assess, report


def runAssess(cfg: RunConfig):
    bank = loadGrids(cfg, loadBank(cfg))
    systems = recommenderConfigs(cfg)
    meta = None
    if systems:
        meta = buildMetaDataset(bank, cfg.epsilon, cfg.alpha, useWindowedPval=cfg.useWindowedPval)
    report = assessBank(
        bank, systems, cfg.strategies, cfg.kPrime, cfg.seed, meta=meta, workers=cfg.workers
    )
    writeReport(report, cfg.reportDir)
    for strategy, row in report.araTable().items():
        print(f"ARA {strategy}: {row['all']:.4f}")
    return report


def runReport(cfg: RunConfig, templates: "str|Path" = HERE / "templates"):
    if not (cfg.reportDir / "summary.json").is_file():
        raise ArtifactError(f"missing {cfg.reportDir / 'summary.json'}; run the assess step first")
    report = readReport(cfg.reportDir)
    writeReportPage(report, cfg.reportDir, templates=templates)
    print(f"Report written to {cfg.reportDir / 'summary.md'}")
    return report
