import math

import numpy as np
import pytest
from scipy import integrate

from conftest import BASELINE, BETTER, WORSE, makeGrid
from qualityvars import (
    binarizeTargets,
    computeQualityVariables,
    pairedTtestPvalue,
    qualityFromRow,
    qualityRow,
)

STEPS = (1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0)


def studentPdf(x, nu):
    norm = math.gamma((nu + 1) / 2) / (math.sqrt(nu * math.pi) * math.gamma(nu / 2))
    return norm * (1 + x * x / nu) ** (-(nu + 1) / 2)


def test_t_test_against_integrated_density():
    resampled = np.array([0.71, 0.64, 0.80, 0.69, 0.75])
    baseline = np.array([0.70, 0.60, 0.72, 0.70, 0.66])
    diff = resampled - baseline
    t = diff.mean() / (diff.std(ddof=1) / math.sqrt(5))
    expected, _ = integrate.quad(studentPdf, t, np.inf, args=(4,), epsabs=1e-12, epsrel=1e-12)
    assert pairedTtestPvalue(resampled, baseline) == pytest.approx(expected, abs=1e-8)


def test_t_test_zero_variance_conventions():
    assert pairedTtestPvalue(BASELINE, BASELINE) == 0.5
    exact = np.array([0.25, 0.5, 0.625, 0.75])
    assert pairedTtestPvalue(exact + 0.125, exact) == 0.0
    assert pairedTtestPvalue(exact - 0.125, exact) == 1.0
    with pytest.raises(ValueError):
        pairedTtestPvalue([0.5], [0.4])
    with pytest.raises(ValueError):
        pairedTtestPvalue([0.5, 0.6], [0.4, 0.5, 0.6])


def test_t_test_worked_example_with_twenty_folds():
    rng = np.random.default_rng(20)
    noise = rng.normal(size=20)
    noise = (noise - noise.mean()) / noise.std(ddof=1)
    # mean / (sd / sqrt(20)) = 1.729 with sd = 0.01
    diff = 0.01 * (noise + 1.729 / math.sqrt(20))
    baseline = rng.uniform(0.4, 0.6, size=20)
    assert pairedTtestPvalue(baseline + diff, baseline) == pytest.approx(0.05, abs=1e-3)


@pytest.mark.parametrize("seed", range(10))
def test_raising_resampled_scores_lowers_p(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(3, 21))
    baseline = rng.uniform(0.3, 0.7, size=k)
    resampled = baseline + rng.normal(0.0, 0.05, size=k)
    before = pairedTtestPvalue(resampled, baseline)
    for c in (0.001, 0.01, 0.02):
        after = pairedTtestPvalue(resampled + c, baseline)
        assert after < before
        before = after
    assert pairedTtestPvalue(BASELINE + 0.01, BASELINE) < pairedTtestPvalue(BASELINE, BASELINE)


def test_t_test_direction():
    assert pairedTtestPvalue(BETTER, BASELINE) < 0.05
    assert pairedTtestPvalue(WORSE, BASELINE) > 0.95


def test_window_excludes_epsilon_distance():
    cells = {("ros", m): BETTER for m in STEPS}
    cells[("ros", 2.75)] = WORSE
    qv = computeQualityVariables(makeGrid(BASELINE, cells, multipliers=STEPS), 0.75)
    bad = qv.qPval[("ros", 2.75)]
    # 2.0 sits exactly epsilon away from 2.75
    assert qv.qPvalw[("ros", 2.0)] == qv.qPval[("ros", 2.0)]
    for m in (2.25, 2.5, 2.75, 3.0):
        assert qv.qPvalw[("ros", m)] == bad
    assert qv.mStar["ros"] == 1.25
    assert qv.qMeanAtStar["ros"] == pytest.approx(BETTER.mean())


def test_windowed_p_skips_infeasible_cells():
    cells = {("rus", m): BETTER for m in STEPS[:3]}
    grid = makeGrid(BASELINE, cells, multipliers=STEPS, skipped=[("rus", m) for m in STEPS[3:]])
    qv = computeQualityVariables(grid, 0.75)
    assert qv.feasibleMultipliers("rus") == [1.25, 1.5, 1.75]
    assert set(qv.qPvalw) == {("rus", 1.25), ("rus", 1.5), ("rus", 1.75)}
    targets = binarizeTargets(qv, 0.05)
    assert targets.yR["rus"] == 1
    assert targets.zR["rus"] == 1.25


def test_method_skipped_everywhere_has_no_targets():
    grid = makeGrid(
        BASELINE,
        {("ros", 1.5): BETTER},
        methods=("ros", "rus"),
        multipliers=(1.5,),
        skipped=[("rus", 1.5)],
    )
    qv = computeQualityVariables(grid, 0.75)
    targets = binarizeTargets(qv, 0.05)
    assert "rus" not in qv.mStar
    assert "rus" not in targets.yR
    assert targets.yRm == {("ros", 1.5): 1}


def randomGrid(seed):
    rng = np.random.default_rng(seed)
    baseline = rng.uniform(0.3, 0.8, size=5)
    cells, skipped = {}, []
    for method in ("ros", "rus", "smote5"):
        for m in STEPS:
            if method == "rus" and rng.random() < 0.3:
                skipped.append((method, m))
            else:
                cells[(method, m)] = np.clip(baseline + rng.normal(0.02, 0.05, size=5), 0, 1)
    return makeGrid(
        baseline, cells, methods=("ros", "rus", "smote5"), multipliers=STEPS, skipped=skipped
    )


@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("windowed", [False, True])
def test_targets_agree_with_brute_force(seed, windowed):
    qv = computeQualityVariables(randomGrid(seed), 0.75)
    targets = binarizeTargets(qv, 0.1, useWindowedPval=windowed)
    pvalues = qv.qPvalw if windowed else qv.qPval
    for cell, p in qv.qPval.items():
        assert qv.qPvalw[cell] >= p
    for method in qv.methods:
        feasible = [m for m in STEPS if (method, m) in qv.qPval]
        if not feasible:
            continue
        assert targets.yR[method] == max(targets.yRm[(method, m)] for m in feasible)
        best = min(pvalues[(method, m)] for m in feasible)
        assert targets.zR[method] == min(m for m in feasible if pvalues[(method, m)] == best)
        bestw = min(qv.qPvalw[(method, m)] for m in feasible)
        assert qv.mStar[method] == min(m for m in feasible if qv.qPvalw[(method, m)] == bestw)
        assert qv.qPvalAtStar[method] == qv.qPval[(method, qv.mStar[method])]


def test_row_round_trip():
    qv = computeQualityVariables(randomGrid(3), 0.75)
    targets = binarizeTargets(qv, 0.05)
    row = qualityRow(qv, targets)
    assert row["q0mean"] == qv.q0Mean
    assert row["qpval[ros][1.5]"] == qv.qPval[("ros", 1.5)]
    again, againTargets = qualityFromRow(row, qv.methods, qv.multipliers, 0.05)
    assert again.qPval == qv.qPval
    assert again.qPvalw == qv.qPvalw
    assert again.mStar == qv.mStar
    assert againTargets.yRm == targets.yRm
    assert againTargets.zR == targets.zR


def test_parameter_checks():
    qv = computeQualityVariables(randomGrid(0), 0.75)
    with pytest.raises(ValueError):
        binarizeTargets(qv, 1.0)
    with pytest.raises(ValueError):
        computeQualityVariables(randomGrid(0), 0.0)


@pytest.mark.parametrize("seed", range(100))
def test_t_test_on_random_fold_vectors(seed):
    rng = np.random.default_rng(seed)
    baseline = rng.uniform(0.3, 0.9, size=20)
    resampled = np.clip(baseline + rng.normal(rng.uniform(-0.05, 0.05), 0.05, size=20), 0, 1)
    diff = resampled - baseline
    t = diff.mean() / (diff.std(ddof=1) / math.sqrt(20))
    expected, _ = integrate.quad(studentPdf, t, np.inf, args=(19,), epsabs=1e-12, epsrel=1e-12)
    assert pairedTtestPvalue(resampled, baseline) == pytest.approx(expected, abs=1e-8)
