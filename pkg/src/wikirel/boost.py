"""Deterministic gradient-boosted regression trees with exact attributions.

Newton-style boosting on weighted logistic loss. Split search is exact and
greedy over midpoint thresholds of adjacent distinct values; ties break to the
lowest feature id, then the lowest threshold, so identical inputs always yield
an identical ensemble. Leaf values are stored unscaled; the learning rate is
applied at prediction time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .features import FeatureMatrix, catalog_fingerprint

SCHEMA = "stump-ensemble-v1"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_depth: int = 1
    rounds: int = 100
    reg_lambda: float = 1.0
    min_gain: float = 0.0
    pos_weight: float | None = None  # None: computed as n_neg / n_pos
    base_margin: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 1 <= int(self.max_depth) <= 5:
            raise ValueError("max_depth must be between 1 and 5")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.min_gain < 0:
            raise ValueError("min_gain must be >= 0")
        if self.pos_weight is not None and self.pos_weight <= 0:
            raise ValueError("pos_weight must be positive")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "rounds": self.rounds,
            "reg_lambda": self.reg_lambda,
            "min_gain": self.min_gain,
            "pos_weight": self.pos_weight,
            "base_margin": self.base_margin,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        return cls(**{k: obj[k] for k in cls().to_dict() if k in obj})


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; node 0 is the root, feature -1 marks a leaf."""

    feature: tuple[int, ...]
    threshold: tuple[float, ...]
    left: tuple[int, ...]
    right: tuple[int, ...]
    value: tuple[float, ...]

    def leaf_indices(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feats = feature[nodes]
            internal = feats >= 0
            if not internal.any():
                return nodes
            rows = np.nonzero(internal)[0]
            go_left = X[rows, feats[rows]] < threshold[nodes[rows]]
            nodes[rows] = np.where(go_left, left[nodes[rows]], right[nodes[rows]])

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value)[self.leaf_indices(X)]

    def split_features(self) -> tuple[int, ...]:
        return tuple(sorted({f for f in self.feature if f >= 0}))

    def is_stump(self) -> bool:
        return len(self.feature) == 3 and self.feature[0] >= 0


def _sigmoid(margin: np.ndarray) -> np.ndarray:
    out = np.empty_like(margin, dtype=np.float64)
    positive = margin >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-margin[positive]))
    exp_m = np.exp(margin[~positive])
    out[~positive] = exp_m / (1.0 + exp_m)
    return out


def weighted_logloss(y: np.ndarray, margin: np.ndarray, weights: np.ndarray) -> float:
    """Sum of w_i * logistic loss; computed in log-space for stability."""
    per_row = np.where(y == 1, np.logaddexp(0.0, -margin), np.logaddexp(0.0, margin))
    return float(np.sum(weights * per_row))


class _TreeBuilder:
    def __init__(self, X: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: TrainConfig):
        self.X = X
        self.g = g
        self.h = h
        self.cfg = cfg
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _leaf_weight(self, rows: np.ndarray) -> float:
        G = float(self.g[rows].sum())
        H = float(self.h[rows].sum())
        denominator = H + self.cfg.reg_lambda
        return -G / denominator if denominator > 0 else 0.0

    def _best_split(self, rows: np.ndarray) -> tuple[float, int, float] | None:
        """(gain, feature, threshold) of the best positive-gain split, or None.

        Features are scanned in ascending id and thresholds ascending within a
        feature; only strictly larger gains replace the incumbent, which pins
        the tie-breaking order.
        """
        lam = self.cfg.reg_lambda
        G = float(self.g[rows].sum())
        H = float(self.h[rows].sum())
        parent = G * G / (H + lam) if H + lam > 0 else 0.0
        best: tuple[float, int, float] | None = None
        for j in range(self.X.shape[1]):
            column = self.X[rows, j]
            order = np.argsort(column, kind="stable")
            vs = column[order]
            g_sorted = self.g[rows][order]
            h_sorted = self.h[rows][order]
            boundaries = np.nonzero(vs[:-1] != vs[1:])[0]
            if boundaries.size == 0:
                continue
            GL = np.cumsum(g_sorted)[boundaries]
            HL = np.cumsum(h_sorted)[boundaries]
            with np.errstate(divide="ignore", invalid="ignore"):
                gains = 0.5 * (
                    GL * GL / (HL + lam)
                    + (G - GL) * (G - GL) / (H - HL + lam)
                    - parent
                ) - self.cfg.min_gain
            gains = np.where(np.isfinite(gains), gains, -np.inf)
            pick = int(np.argmax(gains))
            gain = float(gains[pick])
            if gain <= 0.0:
                continue
            if best is None or gain > best[0]:
                a = float(vs[boundaries[pick]])
                b = float(vs[boundaries[pick] + 1])
                # Midpoint can round down onto the left value for adjacent
                # floats; bump to the right value so a < threshold <= b and
                # "x < threshold" reproduces the training partition.
                threshold = a + (b - a) / 2.0
                if threshold <= a:
                    threshold = b
                best = (gain, j, threshold)
        return best

    def build(self, rows: np.ndarray, depth: int) -> int:
        node = self._new_node()
        split = self._best_split(rows) if depth < self.cfg.max_depth else None
        if split is None:
            self.value[node] = self._leaf_weight(rows)
            return node
        _, feature_id, threshold = split
        go_left = self.X[rows, feature_id] < threshold
        self.feature[node] = feature_id
        self.threshold[node] = threshold
        self.left[node] = self.build(rows[go_left], depth + 1)
        self.right[node] = self.build(rows[~go_left], depth + 1)
        return node

    def tree(self) -> Tree:
        return Tree(
            feature=tuple(self.feature),
            threshold=tuple(self.threshold),
            left=tuple(self.left),
            right=tuple(self.right),
            value=tuple(self.value),
        )


@dataclass(frozen=True)
class StumpEnsemble:
    """Trained additive model: margin(x) = base + eta * sum of tree leaves."""

    base_margin: float
    learning_rate: float
    trees: tuple[Tree, ...]
    n_features: int
    fingerprint: str | None = None
    config: TrainConfig = field(default_factory=TrainConfig)
    class_counts: tuple[int, int] = (0, 0)  # (n_unreliable, n_reliable) seen in training

    def check_rows(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X


def resolve_pos_weight(y: np.ndarray, cfg: TrainConfig) -> float:
    """Configured weight, or the negative/positive count ratio."""
    if cfg.pos_weight is not None:
        return cfg.pos_weight
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("training needs at least one example of each class")
    return n_neg / n_pos


def fit_ensemble(X: np.ndarray, y: np.ndarray, cfg: TrainConfig | None = None) -> StumpEnsemble:
    """Boost ``cfg.rounds`` trees on a dense matrix with 0/1 labels."""
    if cfg is None:
        cfg = TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-d matrix")
    if np.isnan(X).any():
        raise ValueError("X contains NaN values; the feature contract is dense")
    if set(np.unique(y)) - {0, 1}:
        raise ValueError("y must contain only 0/1 labels")
    pos_weight = resolve_pos_weight(y, cfg)
    weights = np.where(y == 1, pos_weight, 1.0)

    margins = np.full(X.shape[0], cfg.base_margin, dtype=np.float64)
    trees: list[Tree] = []
    all_rows = np.arange(X.shape[0])
    y_float = y.astype(np.float64)
    for _ in range(cfg.rounds):
        p = _sigmoid(margins)
        g = weights * (p - y_float)
        h = weights * p * (1.0 - p)
        builder = _TreeBuilder(X, g, h, cfg)
        builder.build(all_rows, depth=0)
        tree = builder.tree()
        trees.append(tree)
        margins += cfg.learning_rate * tree.leaf_values(X)

    return StumpEnsemble(
        base_margin=cfg.base_margin,
        learning_rate=cfg.learning_rate,
        trees=tuple(trees),
        n_features=X.shape[1],
        fingerprint=None,
        config=TrainConfig(**{**cfg.to_dict(), "pos_weight": pos_weight}),
        class_counts=(int(np.sum(y == 0)), int(np.sum(y == 1))),
    )


def predict_margin(ensemble: StumpEnsemble, X: np.ndarray) -> np.ndarray:
    X = ensemble.check_rows(X)
    margins = np.full(X.shape[0], ensemble.base_margin, dtype=np.float64)
    for tree in ensemble.trees:
        margins += ensemble.learning_rate * tree.leaf_values(X)
    return margins


def predict_proba(ensemble: StumpEnsemble, X: np.ndarray) -> np.ndarray:
    return _sigmoid(predict_margin(ensemble, X))


def staged_margins(ensemble: StumpEnsemble, X: np.ndarray) -> Iterator[np.ndarray]:
    """Margins after each boosting round (rounds + 1 arrays, base first)."""
    X = ensemble.check_rows(X)
    margins = np.full(X.shape[0], ensemble.base_margin, dtype=np.float64)
    yield margins.copy()
    for tree in ensemble.trees:
        margins += ensemble.learning_rate * tree.leaf_values(X)
        yield margins.copy()


@dataclass(frozen=True)
class Attribution:
    """Additive decomposition of one row's margin: base + sum(contributions)."""

    contributions: np.ndarray  # catalog order, length n_features
    base_value: float

    @property
    def margin(self) -> float:
        return self.base_value + float(self.contributions.sum())


def _stump_phi(tree: Tree, X: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Exact Shapley for a single-split tree: leaf(x) minus mean background leaf."""
    phi = np.zeros((X.shape[0], X.shape[1]), dtype=np.float64)
    phi[:, tree.feature[0]] = tree.leaf_values(X) - float(tree.leaf_values(background).mean())
    return phi


def _tree_paths(tree: Tree) -> list[tuple[dict[int, list[tuple[float, bool]]], float]]:
    """(conditions, leaf value) per leaf; conditions: feature -> [(threshold, go_left)]."""
    paths: list[tuple[dict[int, list[tuple[float, bool]]], float]] = []

    def walk(node: int, conditions: dict[int, list[tuple[float, bool]]]) -> None:
        if tree.feature[node] < 0:
            paths.append(({f: list(c) for f, c in conditions.items()}, tree.value[node]))
            return
        feat, thr = tree.feature[node], tree.threshold[node]
        for child, go_left in ((tree.left[node], True), (tree.right[node], False)):
            conditions.setdefault(feat, []).append((thr, go_left))
            walk(child, conditions)
            conditions[feat].pop()
            if not conditions[feat]:
                del conditions[feat]

    walk(0, {})
    return paths


def _satisfies(value: float, conditions: list[tuple[float, bool]]) -> bool:
    return all((value < thr) == go_left for thr, go_left in conditions)


def _deep_tree_phi(tree: Tree, X: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Exact per-leaf Shapley for trees of any depth, averaged over background rows.

    Per (row, background) pair each leaf partitions its path features into a
    required-in set A (only the row satisfies) and a required-out set B (only
    the background satisfies); contributions follow the closed-form factorial
    weights over the tree's split features. Features absent from the tree are
    dummies and receive zero.
    """
    players = tree.split_features()
    n = len(players)
    paths = _tree_paths(tree)
    factorial = [math.factorial(k) for k in range(n + 1)]

    def shapley_weight_sum(a: int, b: int, offset: int) -> float:
        # sum over t of C(m_free, t) * w(t + offset), w(s) = s!(n-s-1)!/n!
        m_free = n - a - b
        total = 0.0
        for t in range(m_free + 1):
            s = t + offset
            total += (
                math.comb(m_free, t) * factorial[s] * factorial[n - s - 1] / factorial[n]
            )
        return total

    phi = np.zeros((X.shape[0], X.shape[1]), dtype=np.float64)
    for i in range(X.shape[0]):
        row = X[i]
        for bg in background:
            for conditions, leaf_value in paths:
                required_in: list[int] = []
                required_out: list[int] = []
                reachable = True
                for feat, cond in conditions.items():
                    row_ok = _satisfies(row[feat], cond)
                    bg_ok = _satisfies(bg[feat], cond)
                    if row_ok and not bg_ok:
                        required_in.append(feat)
                    elif bg_ok and not row_ok:
                        required_out.append(feat)
                    elif not row_ok and not bg_ok:
                        reachable = False
                        break
                if not reachable or (not required_in and not required_out):
                    continue
                a, b = len(required_in), len(required_out)
                if required_in:
                    w_in = leaf_value * shapley_weight_sum(a, b, a - 1)
                    for feat in required_in:
                        phi[i, feat] += w_in
                if required_out:
                    w_out = -leaf_value * shapley_weight_sum(a, b, a)
                    for feat in required_out:
                        phi[i, feat] += w_out
    return phi / background.shape[0]


def attribute_rows(
    ensemble: StumpEnsemble, X: np.ndarray, background: np.ndarray
) -> tuple[np.ndarray, float]:
    """(contributions grid, base value) for every row of X.

    Base value is the mean background margin; base + row contributions equals
    the row's margin exactly (local accuracy).
    """
    X = ensemble.check_rows(X)
    background = ensemble.check_rows(background)
    if background.shape[0] == 0:
        raise ValueError("background must be non-empty")
    phi = np.zeros((X.shape[0], ensemble.n_features), dtype=np.float64)
    for tree in ensemble.trees:
        if tree.is_stump():
            phi += ensemble.learning_rate * _stump_phi(tree, X, background)
        elif tree.feature[0] < 0:
            continue  # single-leaf tree: constant, contributes only to the base
        else:
            phi += ensemble.learning_rate * _deep_tree_phi(tree, X, background)
    base_value = float(predict_margin(ensemble, background).mean())
    return phi, base_value


def attribute(
    ensemble: StumpEnsemble, row: np.ndarray, background: np.ndarray
) -> Attribution:
    phi, base_value = attribute_rows(ensemble, np.asarray(row).reshape(1, -1), background)
    return Attribution(contributions=phi[0], base_value=base_value)


def _tree_to_dict(tree: Tree) -> dict:
    return {
        "feature": list(tree.feature),
        "threshold": list(tree.threshold),
        "left": list(tree.left),
        "right": list(tree.right),
        "value": list(tree.value),
    }


def _tree_from_dict(obj: dict) -> Tree:
    return Tree(
        feature=tuple(int(v) for v in obj["feature"]),
        threshold=tuple(float(v) for v in obj["threshold"]),
        left=tuple(int(v) for v in obj["left"]),
        right=tuple(int(v) for v in obj["right"]),
        value=tuple(float(v) for v in obj["value"]),
    )


def dumps_ensemble(ensemble: StumpEnsemble) -> str:
    document = {
        "schema": SCHEMA,
        "base_margin": ensemble.base_margin,
        "learning_rate": ensemble.learning_rate,
        "n_features": ensemble.n_features,
        "fingerprint": ensemble.fingerprint,
        "config": ensemble.config.to_dict(),
        "class_counts": list(ensemble.class_counts),
        "trees": [_tree_to_dict(t) for t in ensemble.trees],
    }
    return json.dumps(document, indent=2) + "\n"


def loads_ensemble(text: str) -> StumpEnsemble:
    document = json.loads(text)
    if document.get("schema") != SCHEMA:
        raise ValueError(f"unsupported ensemble schema {document.get('schema')!r}")
    return StumpEnsemble(
        base_margin=float(document["base_margin"]),
        learning_rate=float(document["learning_rate"]),
        trees=tuple(_tree_from_dict(t) for t in document["trees"]),
        n_features=int(document["n_features"]),
        fingerprint=document.get("fingerprint"),
        config=TrainConfig.from_dict(document.get("config", {})),
        class_counts=tuple(document.get("class_counts", (0, 0))),
    )


def dump_ensemble(ensemble: StumpEnsemble, path: str | Path) -> None:
    Path(path).write_text(dumps_ensemble(ensemble), encoding="utf-8")


def load_ensemble(path: str | Path) -> StumpEnsemble:
    return loads_ensemble(Path(path).read_text(encoding="utf-8"))


def _check_fingerprint(ensemble: StumpEnsemble) -> None:
    if ensemble.fingerprint is not None and ensemble.fingerprint != catalog_fingerprint():
        raise ValueError(
            "ensemble was trained against a different feature catalog "
            f"(fingerprint {ensemble.fingerprint} != {catalog_fingerprint()})"
        )


def train_matrix(matrix: FeatureMatrix, cfg: TrainConfig | None = None) -> StumpEnsemble:
    """Train on the labeled rows of a FeatureMatrix; stamps the catalog fingerprint."""
    X, y, _ = matrix.labeled_rows()
    if X.shape[0] == 0:
        raise ValueError("matrix has no labeled rows")
    ensemble = fit_ensemble(X, y, cfg)
    return StumpEnsemble(
        base_margin=ensemble.base_margin,
        learning_rate=ensemble.learning_rate,
        trees=ensemble.trees,
        n_features=ensemble.n_features,
        fingerprint=catalog_fingerprint(),
        config=ensemble.config,
        class_counts=ensemble.class_counts,
    )


def score_matrix(
    ensemble: StumpEnsemble, matrix: FeatureMatrix
) -> list[tuple[str, float, float]]:
    """(domain, margin, probability) for every row of the matrix."""
    _check_fingerprint(ensemble)
    margins = predict_margin(ensemble, matrix.values) if len(matrix) else np.zeros(0)
    probas = _sigmoid(margins)
    return [
        (domain, float(margins[i]), float(probas[i]))
        for i, domain in enumerate(matrix.domains)
    ]


def attribute_matrix(
    ensemble: StumpEnsemble,
    matrix: FeatureMatrix,
    background: FeatureMatrix | None = None,
) -> tuple[np.ndarray, float]:
    """Contribution grid for all matrix rows; background defaults to the matrix itself."""
    _check_fingerprint(ensemble)
    bg_values = matrix.values if background is None else background.values
    return attribute_rows(ensemble, matrix.values, bg_values)


class StumpBoostClassifier(BaseEstimator, ClassifierMixin):
    """Boosted-stumps binary classifier with the estimator interface.

    Parameters mirror :class:`TrainConfig`. The positive class is
    ``classes_[1]`` (the larger label under numpy ordering); its instance
    weight defaults to the negative/positive count ratio.
    """

    def __init__(
        self,
        learning_rate: float = 0.1,
        max_depth: int = 1,
        rounds: int = 100,
        reg_lambda: float = 1.0,
        min_gain: float = 0.0,
        pos_weight: float | None = None,
        base_margin: float = 0.0,
    ):
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.rounds = rounds
        self.reg_lambda = reg_lambda
        self.min_gain = min_gain
        self.pos_weight = pos_weight
        self.base_margin = base_margin

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            max_depth=self.max_depth,
            rounds=self.rounds,
            reg_lambda=self.reg_lambda,
            min_gain=self.min_gain,
            pos_weight=self.pos_weight,
            base_margin=self.base_margin,
        )

    def fit(self, X, y) -> "StumpBoostClassifier":
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError(f"need exactly 2 classes, got {list(self.classes_)}")
        y_binary = (y == self.classes_[1]).astype(np.int64)
        self.ensemble_ = fit_ensemble(X, y_binary, self._config())
        self.n_features_in_ = X.shape[1]
        self._train_X = X.copy()
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "ensemble_")
        X = check_array(X, dtype=np.float64)
        return predict_margin(self.ensemble_, X)

    def predict_proba(self, X) -> np.ndarray:
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return self.classes_[(self.decision_function(X) >= 0.0).astype(int)]

    def explain(self, X, background: np.ndarray | None = None) -> tuple[np.ndarray, float]:
        """Per-row contributions and the base value; background defaults to the fit data."""
        check_is_fitted(self, "ensemble_")
        X = check_array(X, dtype=np.float64)
        if background is None:
            background = self._train_X
        return attribute_rows(self.ensemble_, X, np.asarray(background, dtype=np.float64))
