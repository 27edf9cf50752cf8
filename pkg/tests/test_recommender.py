from pathlib import Path

import numpy as np
import pytest
import yaml

from conftest import bankRecord, blobDataset
from errors import ArtifactError, ConfigError, HashMismatchError
from evaluation import gridMultipliers
from learners import FIT_COUNTS, ConstantModel, LearnerSpec
from recommender import (
    RecommenderConfig,
    buildMetaDataset,
    loadRecommender,
    presetConfigs,
    readMetaDataset,
    recommend,
    saveRecommender,
    snapToGrid,
    train,
    writeMetaDataset,
)
from resampling import NO_RESAMPLING, parseSpec

PRESETS = Path(__file__).resolve().parent.parent / "configs" / "presets.yml"
TREE = LearnerSpec("dtree", {"min_leaf": 1})


@pytest.fixture
def meta(bank):
    return buildMetaDataset(bank, epsilon=0.75, alpha=0.05)


def a1Config(**kwargs):
    return RecommenderConfig("rec_system_1", "A1", 0.05, 0.75, ("center_distance",), TREE, **kwargs)


def a2Config():
    return RecommenderConfig("rec_system_2", "A2", 0.05, 0.75, ("center_distance",), TREE, TREE)


def test_meta_dataset_targets(meta):
    assert [r.datasetId for r in meta] == [f"blobs{i}" for i in range(12)]
    assert meta[0].targets.yR == {"ros": 0, "rus": 0}
    assert meta[-1].targets.yR == {"ros": 1, "rus": 0}
    assert meta[-1].targets.zR["ros"] == 1.5
    assert ("rus", 2.5) not in meta[-1].targets.yRm


def test_meta_dataset_checks(bank):
    s, grid = bank[0]
    with pytest.raises(ValueError):
        buildMetaDataset([(bank[1][0], grid)], 0.75, 0.05)
    grid.datasetHash = "0" * 64
    with pytest.raises(HashMismatchError):
        buildMetaDataset([(s, grid)], 0.75, 0.05)
    other, otherGrid = bankRecord(20, 5.0)
    otherGrid.multipliers = (1.5, 2.0)
    with pytest.raises(ValueError):
        buildMetaDataset([bank[1], (other, otherGrid)], 0.75, 0.05)


def test_meta_dataset_file_round_trip(meta, tmp_path):
    path = tmp_path / "meta.csv"
    writeMetaDataset(meta, path, epsilon=0.75, alpha=0.05, k=4)
    again = readMetaDataset(path)
    assert [r.datasetId for r in again] == [r.datasetId for r in meta]
    assert [r.pool for r in again] == ["artificial"] * 12
    for before, after in zip(meta, again):
        assert np.array_equal(before.features.values, after.features.values)
        assert after.quality.qPval == before.quality.qPval
        assert after.targets.yRm == before.targets.yRm
        assert after.targets.zR == before.targets.zR
    loose = readMetaDataset(path, 0.5)
    assert loose[0].targets.yR == {"ros": 0, "rus": 0}
    assert loose[-1].targets.yR == {"ros": 1, "rus": 0}
    assert loose[0].targets.alpha == 0.5
    with pytest.raises(ArtifactError):
        readMetaDataset(tmp_path / "none.csv")


def test_approach1_classifiers(meta):
    model = train(meta, a1Config())
    # no dataset could evaluate rus at 2.5
    assert set(model.classifiers) == {
        ("ros", 1.5),
        ("ros", 2.0),
        ("ros", 2.5),
        ("rus", 1.5),
        ("rus", 2.0),
    }
    # rus never helps: a smoothed constant below one half
    assert isinstance(model.classifiers[("rus", 1.5)], ConstantModel)
    assert model.classifiers[("rus", 1.5)].value == pytest.approx(1 / 14)
    assert model.trainedOn == tuple(f"blobs{i}" for i in range(12))


def test_approach1_recommendation(meta):
    model = train(meta, a1Config())
    separable = blobDataset(30, 10, shift=5.0, seed=100)
    overlapping = blobDataset(30, 10, shift=0.3, seed=101)
    rec = recommend(model, separable)
    assert rec.spec == parseSpec("ros", 1.5)
    assert rec.line() == "ros,1.5"
    assert rec.detail["probabilities"]["ros,1.5"] == 1.0
    assert recommend(model, overlapping).spec == NO_RESAMPLING
    assert recommend(model, overlapping).line() == "none,1.0"


def test_infeasible_candidate_falls_through(meta):
    model = train(meta, a1Config())
    separable = blobDataset(30, 10, shift=5.0, seed=100)
    rec = recommend(model, separable, feasible=lambda spec: spec.multiplier != 1.5)
    assert rec.spec == parseSpec("ros", 2.0)
    assert rec.detail["fallbacks"] == ["ros,1.5"]
    nothing = recommend(model, separable, feasible=lambda spec: False)
    assert nothing.spec == NO_RESAMPLING


def test_recommendation_fits_no_base_learner(meta):
    model = train(meta, a1Config())
    before = sum(FIT_COUNTS.values())
    recommend(model, blobDataset(30, 10, shift=5.0, seed=100))
    assert sum(FIT_COUNTS.values()) == before


def test_approach2(meta):
    model = train(meta, a2Config())
    assert set(model.classifiers) == {"ros", "rus"}
    # rus never helps: the regressor falls back to the grid midpoint
    assert model.regressors["rus"] == ConstantModel(2.0, 1)
    rec = recommend(model, blobDataset(30, 10, shift=5.0, seed=100))
    assert rec.spec == parseSpec("ros", 1.5)
    assert rec.detail["multipliers"]["ros"]["snapped"] == 1.5
    assert recommend(model, blobDataset(30, 10, shift=0.3, seed=101)).spec == NO_RESAMPLING


def test_snap_to_grid():
    grid = gridMultipliers(1.25, 10.0, 0.25)
    assert snapToGrid(3.1, grid) == 3.0
    assert snapToGrid(3.13, grid) == 3.25
    assert snapToGrid(3.125, grid) == 3.0
    assert snapToGrid(0.2, grid) == 1.25
    assert snapToGrid(42.0, grid) == 10.0
    assert snapToGrid(-3.0, grid) == 1.25


@pytest.mark.parametrize("config", [a1Config, a2Config])
def test_save_and_load(meta, tmp_path, config):
    model = train(meta, config())
    saveRecommender(model, tmp_path / "model.json")
    again = loadRecommender(tmp_path / "model.json")
    assert again.config == model.config
    assert set(again.classifiers) == set(model.classifiers)
    for shift in (0.3, 5.0):
        s = blobDataset(30, 10, shift=shift, seed=7)
        first, second = recommend(model, s), recommend(again, s)
        assert first.spec == second.spec
        assert first.detail == second.detail
    with pytest.raises(ArtifactError):
        loadRecommender(tmp_path / "absent.json")


def test_recommender_config_checks():
    with pytest.raises(ConfigError):
        RecommenderConfig("bad", "A1", 0.05, 0.75, ("no_such_feature",), TREE)
    with pytest.raises(ConfigError):
        RecommenderConfig("bad", "A2", 0.05, 0.75, ("n_objects",), TREE)
    with pytest.raises(ConfigError):
        RecommenderConfig("bad", "A3", 0.05, 0.75, ("n_objects",), TREE)
    with pytest.raises(ConfigError):
        RecommenderConfig("bad", "A1", 1.5, 0.75, ("n_objects",), TREE)


def test_presets_file():
    with open(PRESETS) as f:
        presets = yaml.safe_load(f)
    for learner in ("dtree", "knn", "logreg"):
        systems = presetConfigs(presets, learner, 0.75)
        assert [c.name for c in systems] == ["rec_system_1", "rec_system_2"]
        assert [c.approach for c in systems] == ["A1", "A2"]
        assert systems[1].regressor is not None
    logreg = presetConfigs(presets, "logreg", 0.75)[0]
    assert logreg.alpha == 0.3
    assert len(logreg.features) == 8
    with pytest.raises(ConfigError):
        presetConfigs(presets, "svm", 0.75)
