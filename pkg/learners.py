# formatted with ruff 0.6.4
"""Base classifiers and meta-level models, written on top of numpy.

Every model exposes a score in [0, 1] (a regression value for regressors) and
a JSON-friendly ``toDict``. All fits are deterministic: ties in split search
and neighbour search go to the lower index.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from data import Dataset
from errors import LearnerError

log = logging.getLogger(__name__)

LearnerKind = Literal["dtree", "knn", "logreg", "adaboost", "adaboost_regressor"]

DEFAULT_PARAMS = {
    "dtree": {"max_depth": None, "min_leaf": 5},
    "knn": {"k": 5},
    "logreg": {"l1_strength": 1.0, "max_iter": 500, "tol": 1e-6},
    "adaboost": {"n_estimators": 10, "learning_rate": 1.0, "max_depth": 3, "min_leaf": 1},
    "adaboost_regressor": {"n_estimators": 10, "learning_rate": 1.0, "max_depth": 3, "min_leaf": 1},
}

MODEL_FORMAT = "resrec-model"
MODEL_VERSION = 1

# weight of a boosting round with zero training error
ALPHA_CAP = math.log((1.0 - 1e-10) / 1e-10)

# number of fit calls per learner kind, read by the recommendation tests
FIT_COUNTS: Counter = Counter()


@dataclass(frozen=True)
class LearnerSpec:
    kind: LearnerKind
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in DEFAULT_PARAMS:
            raise LearnerError(f"unknown learner kind {self.kind!r}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise LearnerError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        merged = dict(DEFAULT_PARAMS[self.kind])
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        checks = {
            "k": lambda v: int(v) >= 1,
            "n_estimators": lambda v: int(v) >= 1,
            "l1_strength": lambda v: float(v) >= 0.0,
            "min_leaf": lambda v: int(v) >= 1,
            "max_depth": lambda v: v is None or int(v) >= 0,
            "learning_rate": lambda v: float(v) > 0.0,
            "max_iter": lambda v: int(v) >= 1,
            "tol": lambda v: float(v) > 0.0,
        }
        for name, value in merged.items():
            if not checks[name](value):
                raise LearnerError(f"{self.kind}: invalid {name}={value!r}")

    def param(self, name: str):
        return self.params[name]

    @property
    def name(self) -> str:
        return self.kind

    def toDict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    def __hash__(self) -> int:
        return hash((self.kind, tuple(sorted(self.params.items()))))


def learnerSpecFromDict(d: dict) -> LearnerSpec:
    return LearnerSpec(d["kind"], dict(d.get("params") or {}))


def _asXy(data) -> "tuple[np.ndarray, np.ndarray]":
    if isinstance(data, Dataset):
        return data.features, data.labels.astype(np.float64)
    X, y = data
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise LearnerError("dimension mismatch between instances and targets")
    if X.shape[0] == 0:
        raise LearnerError("empty dataset")
    return X, y


def _checkX(X, nFeatures: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != nFeatures:
        raise LearnerError(f"dimension mismatch: model expects {nFeatures} features")
    return X


class Model:
    """common prediction surface of every fitted model"""

    kind: str
    nFeatures: int

    def predictScores(self, X) -> np.ndarray:
        raise NotImplementedError

    def predictScore(self, x) -> float:
        return float(self.predictScores(_checkX(x, self.nFeatures))[0])

    def predictLabels(self, X) -> np.ndarray:
        return (self.predictScores(X) >= 0.5).astype(np.int64)

    def predictLabel(self, x) -> int:
        return int(self.predictScore(x) >= 0.5)

    def toDict(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------- constant


@dataclass(frozen=True)
class ConstantModel(Model):
    """predicts ``value`` everywhere; used for single-class meta targets"""

    value: float
    nFeatures: int
    kind: str = "constant"

    def predictScores(self, X) -> np.ndarray:
        X = _checkX(X, self.nFeatures)
        return np.full(X.shape[0], self.value)

    def toDict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "n_features": self.nFeatures}


def laplaceConstant(y: np.ndarray, nFeatures: int) -> ConstantModel:
    """class-1 prior with Laplace (add-one) smoothing"""
    return ConstantModel(float((np.sum(y) + 1.0) / (len(y) + 2.0)), nFeatures)


# ---------------------------------------------------------------- CART


def _nodeImpurity(total: float, wy: float, wy2: float, criterion: str) -> float:
    if criterion == "gini":
        p = wy / total
        return total * 2.0 * p * (1.0 - p)
    return max(wy2 - wy * wy / total, 0.0)


def _bestSplit(X, y, w, minLeaf: int, criterion: str):
    n, d = X.shape
    if n < 2 * minLeaf:
        return None
    total = w.sum()
    wy = np.dot(w, y)
    wy2 = np.dot(w, y * y)
    parent = _nodeImpurity(total, wy, wy2, criterion)
    if parent <= 0.0:
        return None
    best = None
    bestGain = 1e-12 * parent
    positions = np.arange(minLeaf - 1, n - minLeaf)
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ws = w[order]
        ys = y[order]
        valid = xs[positions] < xs[positions + 1]
        if not valid.any():
            continue
        i = positions[valid]
        cw = np.cumsum(ws)[i]
        cwy = np.cumsum(ws * ys)[i]
        wl, wr = cw, total - cw
        if criterion == "gini":
            pl = cwy / wl
            pr = (wy - cwy) / wr
            child = wl * 2.0 * pl * (1.0 - pl) + wr * 2.0 * pr * (1.0 - pr)
        else:
            cwy2 = np.cumsum(ws * ys * ys)[i]
            child = (cwy2 - cwy * cwy / wl) + ((wy2 - cwy2) - (wy - cwy) ** 2 / wr)
        gain = parent - child
        pos = int(np.argmax(gain))
        if gain[pos] > bestGain:
            bestGain = gain[pos]
            at = i[pos]
            best = (j, 0.5 * (xs[at] + xs[at + 1]))
    return best


def growTree(X, y, w, *, maxDepth, minLeaf: int, criterion: str = "gini") -> dict:
    """CART on weighted samples; returns nested nodes.

    Leaves hold the weighted mean target (the class-1 fraction for gini). A node
    is split only if the split strictly lowers the weighted impurity.
    """
    root: dict = {}
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        wi = w[idx]
        node["value"] = float(np.dot(wi, y[idx]) / wi.sum())
        node["n"] = int(len(idx))
        if maxDepth is not None and depth >= maxDepth:
            continue
        split = _bestSplit(X[idx], y[idx], wi, minLeaf, criterion)
        if split is None:
            continue
        feature, threshold = split
        goLeft = X[idx, feature] <= threshold
        node["feature"] = int(feature)
        node["threshold"] = float(threshold)
        node["left"], node["right"] = {}, {}
        stack.append((node["right"], idx[~goLeft], depth + 1))
        stack.append((node["left"], idx[goLeft], depth + 1))
    return root


def treeDepth(node: dict) -> int:
    if "feature" not in node:
        return 0
    return 1 + max(treeDepth(node["left"]), treeDepth(node["right"]))


def treeLeaves(node: dict) -> "list[dict]":
    if "feature" not in node:
        return [node]
    return treeLeaves(node["left"]) + treeLeaves(node["right"])


@dataclass(frozen=True)
class DecisionTree(Model):
    root: dict
    nFeatures: int
    criterion: str = "gini"
    kind: str = "dtree"

    def predictScores(self, X) -> np.ndarray:
        X = _checkX(X, self.nFeatures)
        out = np.empty(X.shape[0])
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if "feature" not in node:
                out[idx] = node["value"]
                continue
            goLeft = X[idx, node["feature"]] <= node["threshold"]
            stack.append((node["left"], idx[goLeft]))
            stack.append((node["right"], idx[~goLeft]))
        return out

    @property
    def depth(self) -> int:
        return treeDepth(self.root)

    def toDict(self) -> dict:
        return {
            "kind": self.kind,
            "criterion": self.criterion,
            "n_features": self.nFeatures,
            "root": self.root,
        }


def fitTree(X, y, w=None, *, maxDepth=None, minLeaf: int = 5, criterion: str = "gini") -> DecisionTree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.full(X.shape[0], 1.0 / X.shape[0]) if w is None else np.asarray(w, dtype=np.float64)
    FIT_COUNTS["dtree"] += 1
    root = growTree(X, y, w, maxDepth=maxDepth, minLeaf=minLeaf, criterion=criterion)
    return DecisionTree(root, X.shape[1], criterion)


# ---------------------------------------------------------------- kNN


@dataclass(frozen=True, eq=False)
class KNearest(Model):
    X: np.ndarray
    y: np.ndarray
    k: int
    kind: str = "knn"

    @property
    def nFeatures(self) -> int:
        return self.X.shape[1]

    def predictScores(self, X, blockSize: int = 512) -> np.ndarray:
        X = _checkX(X, self.nFeatures)
        k = min(self.k, self.X.shape[0])
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], blockSize):
            dist = cdist(X[start : start + blockSize], self.X)
            nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
            out[start : start + blockSize] = self.y[nearest].mean(axis=1)
        return out

    def toDict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "X": self.X.tolist(), "y": self.y.tolist()}


def fitKnn(X, y, k: int = 5) -> KNearest:
    FIT_COUNTS["knn"] += 1
    return KNearest(np.array(X, dtype=np.float64), np.array(y, dtype=np.float64), int(k))


# ---------------------------------------------------------------- L1 logistic


def logisticObjective(X, y, coef, intercept, l1Strength: float, w=None) -> float:
    """weighted mean log-loss + l1Strength * ||coef||_1 (intercept not penalized)"""
    w = np.full(X.shape[0], 1.0 / X.shape[0]) if w is None else w
    z = X @ coef + intercept
    loss = np.dot(w, np.logaddexp(0.0, z) - y * z)
    return float(loss + l1Strength * np.abs(coef).sum())


def logisticGradient(X, y, coef, intercept, w=None) -> "tuple[np.ndarray, float]":
    """gradient of the smooth (log-loss) part w.r.t. (coef, intercept)"""
    w = np.full(X.shape[0], 1.0 / X.shape[0]) if w is None else w
    residual = w * (expit(X @ coef + intercept) - y)
    return X.T @ residual, float(residual.sum())


@dataclass(frozen=True, eq=False)
class LogisticL1(Model):
    coef: np.ndarray
    intercept: float
    objectiveHistory: "tuple[float, ...]" = ()
    kind: str = "logreg"

    @property
    def nFeatures(self) -> int:
        return self.coef.shape[0]

    def predictScores(self, X) -> np.ndarray:
        X = _checkX(X, self.nFeatures)
        return expit(X @ self.coef + self.intercept)

    def toDict(self) -> dict:
        return {"kind": self.kind, "coef": self.coef.tolist(), "intercept": self.intercept}


def fitLogisticL1(
    X, y, *, l1Strength: float = 1.0, maxIter: int = 500, tol: float = 1e-6, w=None
) -> LogisticL1:
    """Proximal gradient (ISTA) with the fixed step 1/L.

    L bounds the curvature of the weighted mean log-loss, so the objective is
    non-increasing from one iteration to the next.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    w = np.full(n, 1.0 / n) if w is None else np.asarray(w, dtype=np.float64) / np.sum(w)
    FIT_COUNTS["logreg"] += 1
    augmented = np.hstack([X, np.ones((n, 1))])
    lipschitz = 0.25 * float(np.linalg.eigvalsh(augmented.T @ (w[:, None] * augmented)).max())
    step = 1.0 / max(lipschitz, 1e-12)
    coef = np.zeros(d)
    intercept = 0.0
    history = [logisticObjective(X, y, coef, intercept, l1Strength, w)]
    for _ in range(maxIter):
        gradCoef, gradIntercept = logisticGradient(X, y, coef, intercept, w)
        moved = coef - step * gradCoef
        newCoef = np.sign(moved) * np.maximum(np.abs(moved) - step * l1Strength, 0.0)
        newIntercept = intercept - step * gradIntercept
        change = max(np.max(np.abs(newCoef - coef), initial=0.0), abs(newIntercept - intercept))
        coef, intercept = newCoef, newIntercept
        history.append(logisticObjective(X, y, coef, intercept, l1Strength, w))
        if change < tol:
            break
    return LogisticL1(coef, float(intercept), tuple(history))


# ---------------------------------------------------------------- AdaBoost


@dataclass(frozen=True)
class AdaBoostClassifier(Model):
    """discrete two-class AdaBoost; score = weighted share of votes for class 1"""

    trees: "tuple[DecisionTree, ...]"
    weights: "tuple[float, ...]"
    nFeatures: int
    kind: str = "adaboost"

    def predictScores(self, X) -> np.ndarray:
        X = _checkX(X, self.nFeatures)
        votes = np.zeros(X.shape[0])
        for tree, weight in zip(self.trees, self.weights):
            votes += weight * tree.predictLabels(X)
        return votes / sum(self.weights)

    def toDict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.nFeatures,
            "estimators": [
                {"weight": wt, "tree": t.toDict()} for t, wt in zip(self.trees, self.weights)
            ],
        }


def fitAdaboostClassifier(
    base: LearnerSpec, nEstimators: int, data, *, learningRate: float = 1.0
) -> AdaBoostClassifier:
    """SAMME with two classes.

    err = 0 stops with the capped weight; err >= 0.5 discards the round, resets
    the sample weights once, and stops the second time it happens.
    """
    if nEstimators < 1:
        raise LearnerError("n_estimators must be at least 1")
    X, y = _asXy(data)
    n = X.shape[0]
    FIT_COUNTS["adaboost"] += 1
    w = np.full(n, 1.0 / n)
    trees, weights = [], []
    firstTree = None
    restarted = False
    for _ in range(nEstimators):
        tree = fitTree(
            X, y, w, maxDepth=base.param("max_depth"), minLeaf=base.param("min_leaf")
        )
        firstTree = firstTree or tree
        missed = tree.predictLabels(X) != y
        err = float(np.dot(w, missed) / w.sum())
        if err <= 0.0:
            trees.append(tree)
            weights.append(ALPHA_CAP)
            break
        if err >= 0.5:
            if restarted:
                break
            restarted = True
            w = np.full(n, 1.0 / n)
            continue
        alpha = learningRate * math.log((1.0 - err) / err)
        trees.append(tree)
        weights.append(alpha)
        w = w * np.exp(alpha * missed)
        w /= w.sum()
    if not trees:
        # every round was worse than chance: keep the plain first tree
        trees, weights = [firstTree], [1.0]
    return AdaBoostClassifier(tuple(trees), tuple(weights), X.shape[1])


@dataclass(frozen=True)
class AdaBoostRegressor(Model):
    """AdaBoost.R2; prediction = weighted median of the trees"""

    trees: "tuple[DecisionTree, ...]"
    weights: "tuple[float, ...]"
    nFeatures: int
    kind: str = "adaboost_regressor"

    def predictScores(self, X) -> np.ndarray:
        X = _checkX(X, self.nFeatures)
        preds = np.column_stack([t.predictScores(X) for t in self.trees])
        weights = np.asarray(self.weights)
        order = np.argsort(preds, axis=1, kind="stable")
        cumulative = np.cumsum(weights[order], axis=1)
        median = np.argmax(cumulative >= 0.5 * cumulative[:, -1:], axis=1)
        return preds[np.arange(X.shape[0]), order[np.arange(X.shape[0]), median]]

    def toDict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.nFeatures,
            "estimators": [
                {"weight": wt, "tree": t.toDict()} for t, wt in zip(self.trees, self.weights)
            ],
        }


def fitAdaboostRegressor(
    base: LearnerSpec, nEstimators: int, X, y, *, learningRate: float = 1.0
) -> AdaBoostRegressor:
    """AdaBoost.R2 with linear loss on weighted regression trees"""
    if nEstimators < 1:
        raise LearnerError("n_estimators must be at least 1")
    X, y = _asXy((X, y))
    n = X.shape[0]
    FIT_COUNTS["adaboost_regressor"] += 1
    w = np.full(n, 1.0 / n)
    trees, weights = [], []
    for _ in range(nEstimators):
        tree = fitTree(
            X, y, w, maxDepth=base.param("max_depth"), minLeaf=base.param("min_leaf"), criterion="mse"
        )
        error = np.abs(tree.predictScores(X) - y)
        worst = error.max()
        if worst <= 0.0:
            trees.append(tree)
            weights.append(1.0)
            break
        loss = error / worst
        meanLoss = float(np.dot(w, loss))
        if meanLoss >= 0.5:
            if not trees:
                trees.append(tree)
                weights.append(1.0)
            break
        beta = meanLoss / (1.0 - meanLoss)
        trees.append(tree)
        weights.append(learningRate * math.log(1.0 / beta))
        w = w * np.power(beta, (1.0 - loss) * learningRate)
        w /= w.sum()
    return AdaBoostRegressor(tuple(trees), tuple(weights), X.shape[1])


# ---------------------------------------------------------------- dispatch


def fit(spec: LearnerSpec, data) -> Model:
    """Fits a classifier given by ``spec`` on a Dataset or an (X, y) pair."""
    X, y = _asXy(data)
    if spec.kind == "dtree":
        return fitTree(X, y, maxDepth=spec.param("max_depth"), minLeaf=spec.param("min_leaf"))
    if spec.kind == "knn":
        return fitKnn(X, y, spec.param("k"))
    if spec.kind == "logreg":
        return fitLogisticL1(
            X,
            y,
            l1Strength=spec.param("l1_strength"),
            maxIter=spec.param("max_iter"),
            tol=spec.param("tol"),
        )
    if spec.kind == "adaboost":
        base = LearnerSpec(
            "dtree", {"max_depth": spec.param("max_depth"), "min_leaf": spec.param("min_leaf")}
        )
        return fitAdaboostClassifier(
            base, spec.param("n_estimators"), (X, y), learningRate=spec.param("learning_rate")
        )
    raise LearnerError(f"{spec.kind} is not a classifier")


def fitRegressor(spec: LearnerSpec, X, y) -> Model:
    X, y = _asXy((X, y))
    if spec.kind == "dtree":
        return fitTree(
            X, y, maxDepth=spec.param("max_depth"), minLeaf=spec.param("min_leaf"), criterion="mse"
        )
    if spec.kind == "adaboost_regressor":
        base = LearnerSpec(
            "dtree", {"max_depth": spec.param("max_depth"), "min_leaf": spec.param("min_leaf")}
        )
        return fitAdaboostRegressor(
            base, spec.param("n_estimators"), X, y, learningRate=spec.param("learning_rate")
        )
    raise LearnerError(f"{spec.kind} is not a regressor")


def modelFromDict(d: dict) -> Model:
    kind = d["kind"]
    if kind == "constant":
        return ConstantModel(float(d["value"]), int(d["n_features"]))
    if kind == "dtree":
        return DecisionTree(d["root"], int(d["n_features"]), d.get("criterion", "gini"))
    if kind == "knn":
        return KNearest(np.asarray(d["X"], dtype=np.float64), np.asarray(d["y"], dtype=np.float64), int(d["k"]))
    if kind == "logreg":
        return LogisticL1(np.asarray(d["coef"], dtype=np.float64), float(d["intercept"]))
    if kind in ("adaboost", "adaboost_regressor"):
        trees = tuple(modelFromDict(e["tree"]) for e in d["estimators"])
        weights = tuple(float(e["weight"]) for e in d["estimators"])
        cls = AdaBoostClassifier if kind == "adaboost" else AdaBoostRegressor
        return cls(trees, weights, int(d["n_features"]))
    raise LearnerError(f"unknown model kind {kind!r}")


def modelDocument(model: Model) -> dict:
    """versioned JSON document for a fitted model"""
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "model": model.toDict()}


def modelFromDocument(doc: dict) -> Model:
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise LearnerError(f"unsupported model document {doc.get('format')!r} v{doc.get('version')!r}")
    return modelFromDict(doc["model"])
