import numpy as np
import pytest

from conftest import bankRecord, blobDataset, makeGrid
from errors import ArtifactError, BankTooSmallError, ConfigError
from evaluation import qualityGrid
from learners import LearnerSpec
from recommender import Recommendation, RecommenderConfig
from assessment import (
    StaticStrategy,
    applyStatic,
    assessBank,
    checkStrategy,
    ecdf,
    ecdfValue,
    fixedCell,
    metaFolds,
    randomCell,
    readReport,
    recommendationAccuracy,
    writeReport,
)
from resampling import NO_RESAMPLING, ResamplingSpec, parseSpec
from runhelper import describeStrategy, orderedStrategies

TREE = LearnerSpec("dtree", {"min_leaf": 1})


def rec(label, m=1.0):
    return Recommendation(parseSpec(label, m), "test")


def test_static_strategies():
    imbalanced = blobDataset(40, 10)
    balanced = blobDataset(20, 20)
    assert applyStatic(StaticStrategy("no_resample"), imbalanced).spec == NO_RESAMPLING
    eqs = applyStatic(StaticStrategy("ros_eqs"), imbalanced).spec
    assert eqs == ResamplingSpec("ros", 4.0, balance=True)
    assert str(eqs) == "ros,4.0"
    assert applyStatic(StaticStrategy("smote5_eqs"), balanced).spec.multiplier == 1.0
    assert applyStatic(StaticStrategy("smote5_eqs"), balanced).spec.kNeighbors == 5
    with pytest.raises(ConfigError):
        StaticStrategy("adasyn_eqs")


def test_fixed_cells():
    assert fixedCell("cell:smote5:2.5").spec == parseSpec("smote5", 2.5)
    assert fixedCell("cell:rus:3").spec == parseSpec("rus", 3.0)
    for name in ("no_resample", "random_cell", "cell:ros:1.5"):
        checkStrategy(name)
    for name in ("oracle", "cell:ros", "cell:ros:x", "cell:adasyn:2", "cell:ros:0.5"):
        with pytest.raises(ConfigError):
            checkStrategy(name)


def test_random_cell_is_seeded():
    _, grid = bankRecord(0, 5.0)
    picks = {randomCell(grid, seed).spec for seed in range(40)}
    assert picks <= set(grid.cells) - {NO_RESAMPLING}
    assert len(picks) > 1
    assert randomCell(grid, 3).spec == randomCell(grid, 3).spec


def test_recommendation_accuracy_examples():
    grid = makeGrid(
        [0.5, 0.5], {("ros", 1.5): [0.75, 0.75], ("ros", 2.0): [0.625, 0.625]}
    )
    assert recommendationAccuracy(grid, rec("ros", 1.5)) == 1.0
    assert recommendationAccuracy(grid, rec("none")) == 0.0
    assert recommendationAccuracy(grid, rec("ros", 2.0)) == 0.5
    flat = makeGrid([0.5, 0.5], {("ros", 1.5): [0.5, 0.5]})
    assert recommendationAccuracy(flat, rec("none")) == 1.0
    with pytest.raises(ValueError):
        recommendationAccuracy(grid, rec("ros", 3.0))


def test_off_grid_cell_joins_the_pool():
    s = blobDataset(40, 10, shift=1.0)
    grid = qualityGrid(s, LearnerSpec("dtree"), ["ros", "rus"], [1.5, 2.0], k=4, seed=0)
    extra = {}
    eqs = applyStatic(StaticStrategy("ros_eqs"), s)
    ra = recommendationAccuracy(grid, eqs, s, extra=extra)
    assert 0.0 <= ra <= 1.0
    assert list(extra) == [eqs.spec]
    assert extra[eqs.spec].shape == (4,)
    # the same pool for every strategy once the off-grid cell is in
    values = list(grid.means().values()) + [float(np.mean(extra[eqs.spec]))]
    expected = (grid.mean(NO_RESAMPLING) - min(values)) / (max(values) - min(values))
    assert recommendationAccuracy(grid, rec("none"), s, extra=extra) == pytest.approx(expected)


def test_ecdf_examples():
    assert ecdf([0.5, 0.5, 1.0]) == [(0.0, 0.0), (0.5, 0.0), (0.5, 2 / 3), (1.0, 2 / 3), (1.0, 1.0)]
    assert ecdf([0.0, 0.25]) == [(0.0, 0.0), (0.0, 0.5), (0.25, 0.5), (0.25, 1.0), (1.0, 1.0)]
    assert ecdf([1.0]) == [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]
    with pytest.raises(ValueError):
        ecdf([])


@pytest.mark.parametrize("seed", range(10))
def test_ecdf_matches_counting(seed):
    rng = np.random.default_rng(seed)
    values = rng.choice([0.0, 0.1, 0.5, 0.75, 1.0], size=15)
    points = ecdf(values)
    xs = [x for x, _ in points]
    assert xs == sorted(xs)
    assert points[-1] == (1.0, 1.0)
    for v in np.unique(values):
        below = [y for x, y in points if x == v]
        assert below[0] == pytest.approx(ecdfValue(values, v))
        assert below[-1] == pytest.approx(np.mean(values <= v))


def test_meta_folds_partition():
    ids = [f"d{i}" for i in range(23)]
    blocks = metaFolds(ids, 5, seed=4)
    assert len(blocks) == 5
    assert sorted(np.concatenate(blocks).tolist()) == list(range(23))
    assert {len(b) for b in blocks} <= {4, 5}
    again = metaFolds(ids, 5, seed=4)
    assert all(np.array_equal(a, b) for a, b in zip(blocks, again))
    with pytest.raises(BankTooSmallError):
        metaFolds(ids[:3], 5, seed=4)
    with pytest.raises(BankTooSmallError):
        metaFolds(ids, 1, seed=4)


def test_best_fixed_cell_scores_one(bank):
    separable = bank[6:]
    report = assessBank(separable, [], ["cell:ros:1.5", "no_resample"], kPrime=2, seed=0)
    assert report.ara("cell:ros:1.5") == 1.0
    assert report.ara("no_resample") < 1.0
    assert report.metadata["infeasible"] == {}


def test_assess_bank_with_recommenders(bank):
    configs = [
        RecommenderConfig("rec_system_1", "A1", 0.05, 0.75, ("center_distance",), TREE),
        RecommenderConfig("rec_system_2", "A2", 0.05, 0.75, ("center_distance",), TREE, TREE),
    ]
    strategies = ["no_resample", "random_cell", "cell:rus:2.5"]
    report = assessBank(bank, configs, strategies, kPrime=3, seed=1)
    assert report.strategies == ("rec_system_1", "rec_system_2", *strategies)
    assert len(report.ra) == 12 * 5
    folds = report.metadata["meta_folds"]
    assert sorted(i for block in folds for i in block) == sorted(s.id for s, _ in bank)
    # held-out datasets get the cell that is best for them
    assert report.ara("rec_system_1") == 1.0
    assert report.ara("rec_system_2") == 1.0
    assert report.recommendations[("blobs0", "rec_system_1")] == "none,1.0"
    assert report.recommendations[("blobs11", "rec_system_1")] == "ros,1.5"
    # rus at 2.5 was skipped everywhere
    assert report.metadata["infeasible"] == {"cell:rus:2.5": 12}
    assert report.ara("cell:rus:2.5") == 0.0
    assert all(0.0 <= v <= 1.0 for v in report.ra.values())


def test_assess_bank_is_seeded(bank):
    first = assessBank(bank, [], ["random_cell"], kPrime=3, seed=5)
    second = assessBank(bank, [], ["random_cell"], kPrime=3, seed=5)
    assert first.ra == second.ra
    assert first.metadata["meta_folds"] == second.metadata["meta_folds"]
    with pytest.raises(ConfigError):
        assessBank(bank, [], ["oracle"], kPrime=3, seed=5)


def test_report_files_round_trip(bank, tmp_path):
    report = assessBank(bank, [], ["no_resample", "cell:ros:1.5"], kPrime=3, seed=2)
    writeReport(report, tmp_path / "report")
    assert (tmp_path / "report" / "ecdf_cell_ros_1.5.csv").is_file()
    again = readReport(tmp_path / "report")
    assert again.strategies == report.strategies
    assert again.datasetIds == report.datasetIds
    assert again.ra == report.ra
    assert again.recommendations == report.recommendations
    assert again.metadata["meta_folds"] == report.metadata["meta_folds"]
    with pytest.raises(ArtifactError):
        readReport(tmp_path / "elsewhere")


def test_report_rows_follow_the_strategy_order():
    given = ["cell:ros:2.0", "random_cell", "no_resample", "rec_system_1"]
    assert orderedStrategies(given) == ["rec_system_1", "no_resample", "random_cell", "cell:ros:2.0"]
    assert describeStrategy("no_resample") == "No resampling"
    assert describeStrategy("cell:ros:2.0") == "Always ros with multiplier 2.0"
