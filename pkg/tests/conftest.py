import numpy as np
import pytest

from data import Dataset, FoldAssignment, MixtureConfig, generateMixture
from evaluation import QualityGrid
from learners import LearnerSpec
from resampling import NO_RESAMPLING, parseSpec

SMALL_MIXTURE = MixtureConfig(
    dimRange=(3, 5), sizeRange=(90, 140), minorFractionRange=(0.2, 0.35), seed=11
)


def blobDataset(nMajor=60, nMinor=20, *, shift=3.0, seed=0, id="blobs", d=2):
    rng = np.random.default_rng(seed)
    major = rng.normal(0.0, 1.0, size=(nMajor, d))
    minor = rng.normal(shift, 1.0, size=(nMinor, d))
    labels = np.r_[np.zeros(nMajor), np.ones(nMinor)]
    return Dataset(id, np.vstack([major, minor]), labels, pool="artificial")


def makeGrid(baseline, cells, *, methods=None, multipliers=None, skipped=(), datasetId="grid"):
    """QualityGrid from explicit fold scores; ``cells`` maps (label, m) to k scores"""
    baseline = np.asarray(baseline, dtype=np.float64)
    k = baseline.shape[0]
    methods = methods or tuple(dict.fromkeys(label for label, _ in cells))
    multipliers = multipliers or tuple(sorted({m for _, m in cells}))
    grid = QualityGrid(
        datasetId,
        LearnerSpec("dtree"),
        k,
        0,
        tuple(methods),
        tuple(multipliers),
        FoldAssignment(np.arange(2 * k) % k, k),
    )
    grid.cells[NO_RESAMPLING] = baseline
    for (label, m), scores in cells.items():
        grid.cells[parseSpec(label, m)] = np.asarray(scores, dtype=np.float64)
    for label, m in skipped:
        grid.skipped[parseSpec(label, m)] = "infeasible"
    return grid


@pytest.fixture
def blobs():
    """60 major and 20 minor objects in two well separated gaussian blobs"""
    return blobDataset()


@pytest.fixture
def mixture():
    return generateMixture(SMALL_MIXTURE, 0)


BASELINE = np.array([0.5, 0.6, 0.55, 0.65])
BETTER = BASELINE + np.array([0.1, 0.12, 0.09, 0.11])
WORSE = BASELINE - np.array([0.1, 0.12, 0.09, 0.11])
MULTIPLIERS = (1.5, 2.0, 2.5)


def bankRecord(i, shift):
    """separable blobs gain from ROS, overlapping ones do not; RUS never helps"""
    s = blobDataset(30, 10, shift=shift, seed=i, id=f"blobs{i}")
    ros = BETTER if shift > 2.0 else WORSE
    cells = {("ros", m): ros for m in MULTIPLIERS}
    cells.update({("rus", m): WORSE for m in MULTIPLIERS[:2]})
    grid = makeGrid(
        BASELINE,
        cells,
        methods=("ros", "rus"),
        multipliers=MULTIPLIERS,
        skipped=[("rus", 2.5)],
        datasetId=s.id,
    )
    return s, grid


@pytest.fixture
def bank():
    """twelve (dataset, grid) pairs: six overlapping blobs, then six separable ones"""
    shifts = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5]
    return [bankRecord(i, shift) for i, shift in enumerate(shifts)]
