import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import blobDataset
from data import stratifiedFolds
from errors import ArtifactError, InfeasibleResampling
from evaluation import (
    cvQuality,
    gridMultipliers,
    prAuc,
    qualityGrid,
    readGrid,
    writeGrid,
)
from learners import LearnerSpec
from resampling import NO_RESAMPLING, ResamplingSpec, parseSpec

DTREE = LearnerSpec("dtree")


def stepCurveAp(labels, scores):
    """precision at every distinct threshold times the recall it adds"""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    positives = labels.sum()
    ap, previousTp = 0.0, 0
    for t in sorted(set(scores.tolist()), reverse=True):
        selected = scores >= t
        tp = int(labels[selected].sum())
        ap += (tp / selected.sum()) * (tp - previousTp) / positives
        previousTp = tp
    return ap


def test_pr_auc_known_values():
    assert prAuc([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1]) == pytest.approx((1 + 2 / 3) / 2)
    assert prAuc([1, 1, 0, 0], [0.9, 0.8, 0.7, 0.1]) == 1.0
    # a constant scorer gets the positive share
    assert prAuc([1, 0, 0, 0], [0.5, 0.5, 0.5, 0.5]) == 0.25
    with pytest.raises(ValueError):
        prAuc([0, 0, 0], [0.1, 0.2, 0.3])


@settings(max_examples=1000, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 1), st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0])),
        min_size=1,
        max_size=20,
    ).filter(lambda pairs: any(label == 1 for label, _ in pairs))
)
def test_pr_auc_matches_step_curve(pairs):
    labels = [label for label, _ in pairs]
    scores = [score for _, score in pairs]
    assert abs(prAuc(labels, scores) - stepCurveAp(labels, scores)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.permutations(list(range(12))))
def test_pr_auc_ignores_order_of_ties(order):
    labels = np.array([1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0])
    scores = np.array([0.9, 0.9, 0.5, 0.5, 0.5, 0.2, 0.2, 0.2, 0.2, 0.1, 0.1, 0.1])
    assert prAuc(labels[order], scores[order]) == pytest.approx(prAuc(labels, scores), abs=1e-15)


def test_cv_quality_resamples_only_training_splits(mixture):
    folds = stratifiedFolds(mixture, 4, seed=1)
    trace = []
    scores = cvQuality(mixture, DTREE, parseSpec("ros", 2.0), folds, seed=[0, "x"], trace=trace)
    assert scores.shape == (4,)
    assert np.all((scores >= 0) & (scores <= 1))
    for entry in trace:
        j = entry["fold"]
        test = folds.testIndices(j)
        assert entry["test"] == (
            int(np.sum(mixture.labels[test] == 0)),
            int(np.sum(mixture.labels[test] == 1)),
        )
        trainMajor, trainMinor = entry["train"]
        assert entry["resampled"][0] == trainMajor
        assert entry["resampled"][1] == 2 * trainMinor


def test_cv_quality_raises_on_infeasible_split():
    s = blobDataset(24, 20)
    folds = stratifiedFolds(s, 4, seed=0)
    with pytest.raises(InfeasibleResampling):
        cvQuality(s, DTREE, parseSpec("rus", 2.0), folds)


def test_grid_multipliers():
    grid = gridMultipliers(1.25, 10.0, 0.25)
    assert len(grid) == 36
    assert grid[0] == 1.25 and grid[-1] == 10.0
    assert gridMultipliers(1.5, 4.0, 0.5) == (1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
    with pytest.raises(ValueError):
        gridMultipliers(2.0, 1.0, 0.5)


def test_quality_grid_cells_and_skips():
    s = blobDataset(24, 20, shift=1.0)
    grid = qualityGrid(s, DTREE, ["ros", "rus"], [1.5, 1.0], k=4, seed=3)
    assert grid.multipliers == (1.0, 1.5)
    assert NO_RESAMPLING in grid.cells
    assert parseSpec("ros", 1.5) in grid.cells
    assert parseSpec("rus", 1.0) in grid.cells
    assert parseSpec("rus", 1.5) in grid.skipped
    assert len(grid.cells) + len(grid.skipped) == 5
    # every cell shares the folds, so m = 1 reproduces the baseline exactly
    assert np.array_equal(grid.cells[parseSpec("ros", 1.0)], grid.baseline)


def test_quality_grid_is_deterministic_and_cached(mixture):
    cache = {}
    first = qualityGrid(mixture, DTREE, ["ros", "smote3"], [1.5, 2.0], k=4, seed=5, cache=cache)
    assert first.cacheHits == 0
    second = qualityGrid(mixture, DTREE, ["ros", "smote3"], [1.5, 2.0], k=4, seed=5, cache=cache)
    assert second.cacheHits == 5
    for spec, scores in first.cells.items():
        assert np.array_equal(second.cells[spec], scores)
    assert list(second.cells) == list(first.cells)


def test_quality_grid_does_not_depend_on_workers(mixture):
    serial = qualityGrid(mixture, DTREE, ["ros", "rus"], [1.5, 2.0], k=4, seed=2, workers=1)
    parallel = qualityGrid(mixture, DTREE, ["ros", "rus"], [1.5, 2.0], k=4, seed=2, workers=2)
    assert list(serial.cells) == list(parallel.cells)
    for spec in serial.cells:
        assert np.array_equal(serial.cells[spec], parallel.cells[spec])


def test_off_grid_cells_get_their_own_stream(mixture):
    grid = qualityGrid(mixture, DTREE, ["ros"], [2.0], k=4, seed=0)
    balanced = ResamplingSpec("ros", 2.0, balance=True)
    assert grid.cellSeed(balanced) != grid.cellSeed(parseSpec("ros", 2.0))


def test_grid_files_round_trip(tmp_path):
    s = blobDataset(24, 20, shift=1.0)
    grid = qualityGrid(s, DTREE, ["rus", "smote3"], [1.0, 1.5], k=4, seed=1)
    writeGrid(grid, tmp_path / s.id)
    again = readGrid(tmp_path / s.id)
    assert again.datasetHash == s.contentHash()
    assert again.folds == grid.folds
    assert again.learner == grid.learner
    assert set(again.cells) == set(grid.cells)
    assert set(again.skipped) == set(grid.skipped)
    for spec, scores in grid.cells.items():
        assert np.array_equal(again.cells[spec], scores)
    with pytest.raises(ArtifactError):
        readGrid(tmp_path / "missing")


def test_dotted_ids_keep_separate_grid_files(tmp_path):
    grids = {}
    for id, shift in (("my.data", 1.0), ("my.other", 2.0)):
        s = blobDataset(24, 20, shift=shift, id=id)
        grids[id] = qualityGrid(s, DTREE, ["ros"], [1.5], k=4, seed=1)
        writeGrid(grids[id], tmp_path / id)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "my.data.csv",
        "my.data.json",
        "my.data.skips.csv",
        "my.other.csv",
        "my.other.json",
        "my.other.skips.csv",
    ]
    for id, grid in grids.items():
        again = readGrid(tmp_path / id)
        assert again.datasetId == id
        assert again.datasetHash == grid.datasetHash
        assert np.array_equal(again.baseline, grid.baseline)
