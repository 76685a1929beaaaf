"""Native binary classifiers: boosted trees and a logistic baseline.

The boosted-tree trainer follows second-order logistic boosting with exact
greedy split search: per node, every boundary between consecutive distinct
sorted feature values is scored by the gain

    1/2 * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam))

and the winning split uses the midpoint threshold. Feature columns are
argsorted once per training; node membership is carried as per-feature
sorted index blocks that partition exactly into the children, so a tree
costs O(features * samples * depth) regardless of node count. Everything
is plain numpy with a fixed reduction order, which makes training
bitwise-reproducible.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateDataError,
    DimensionError,
    FoldDegeneracyError,
    NonConvergenceError,
    NonFiniteError,
    ValidationError,
)
from .evaluation import auroc


@dataclass(frozen=True)
class GbdtHyperparams:
    max_depth: int = 6
    n_estimators: int = 300
    learning_rate: float = 0.1
    l2_leaf_reg: float = 1.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValidationError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.n_estimators < 1:
            raise ValidationError(
                f"n_estimators must be >= 1, got {self.n_estimators}"
            )
        if not self.learning_rate > 0:
            raise ValidationError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.l2_leaf_reg < 0 or self.min_child_weight < 0:
            raise ValidationError("regularization terms must be >= 0")


def default_grid() -> tuple[GbdtHyperparams, ...]:
    """The 4 x 2 x 3 search grid: depth, estimator count, learning rate."""
    return tuple(
        GbdtHyperparams(max_depth=d, n_estimators=n, learning_rate=lr)
        for d in (5, 6, 7, 8)
        for n in (200, 300)
        for lr in (0.05, 0.1, 0.3)
    )


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass(frozen=True)
class TrainedEnsemble:
    base_score: float
    hyperparams: GbdtHyperparams
    seed: int
    n_features: int
    trees: tuple[Tree, ...]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_loss(margins: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy on raw margins."""
    return float(np.mean(np.logaddexp(0.0, margins) - y * margins))


def _check_training_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValidationError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValidationError(
            f"y must be 1-D with {X.shape[0]} entries, got shape {y.shape}"
        )
    if not np.isfinite(X).all():
        raise NonFiniteError("X contains non-finite entries")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("y must contain only 0 and 1")
    y = y.astype(np.float64)
    if y.min() == y.max():
        raise DegenerateDataError("training labels contain a single class")
    return X, y


class _TreeScratch:
    """Reusable buffers shared by every tree of one training run."""

    def __init__(self, n: int, d: int):
        self.member = np.zeros(n, dtype=bool)
        self.offsets = np.arange(n, dtype=np.int64)
        self.rows = np.arange(d, dtype=np.intp)[:, None]
        self.level = [
            (
                np.empty((d, n), dtype=np.int64),
                np.empty((d, n), dtype=np.float64),
                np.empty((d, n), dtype=np.complex128),
            )
            for _ in range(2)
        ]


class _TreeBuilder:
    """Grows one tree from presorted per-feature blocks.

    Each node carries three aligned (features, members) arrays: the member
    row indices in per-feature sorted order, the sorted feature values,
    and the gradient/hessian pair packed into a complex number (real = g,
    imag = h) so one cumsum produces both prefix sums. Splitting a node
    scatters the blocks into a shared next-level buffer; because the walk
    is breadth-first, two buffers alternated by depth never overlap live
    nodes, so no per-node allocation is needed.
    """

    def __init__(self, hp: GbdtHyperparams, scratch: _TreeScratch):
        self.hp = hp
        self.scratch = scratch
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def find_split(self, xs: np.ndarray, gh: np.ndarray, G: float, H: float):
        """Best (feature, position, threshold) by gain, or None."""
        hp = self.hp
        m = xs.shape[1]
        lam = hp.l2_leaf_reg
        mcw = hp.min_child_weight
        cum = np.cumsum(gh[:, :-1], axis=1)
        GL = cum.real
        HL = cum.imag
        hr = H - HL
        valid = xs[:, 1:] > xs[:, :-1]
        if mcw > 0:
            valid &= HL >= mcw
            valid &= hr >= mcw
        elif lam <= 0:  # guard divisions when both regularizers are off
            valid &= HL > 0
            valid &= hr > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = GL * GL
            gain /= HL + lam
            gr = G - GL
            gr *= gr
            hr += lam
            gr /= hr
            gain += gr
        gain[~valid] = -np.inf
        flat = int(np.argmax(gain))  # row-major: lowest feature, lowest threshold
        denom = H + lam
        base = G * G / denom if denom > 0 else 0.0
        best_gain = 0.5 * (gain.flat[flat] - base)
        if not best_gain > 0.0:
            return None
        j, pos = divmod(flat, m - 1)
        a = float(xs[j, pos])
        b = float(xs[j, pos + 1])
        t = 0.5 * (a + b)
        if not t > a:  # midpoint rounded down onto the left value
            t = b
        return j, pos, t, float(GL[j, pos]), float(HL[j, pos])

    def build(
        self,
        root_idx: np.ndarray,
        root_xs: np.ndarray,
        root_gh: np.ndarray,
        leaf_out: np.ndarray,
    ) -> Tree:
        hp = self.hp
        ws = self.scratch
        root = self.new_node()
        totals = root_gh[0].sum()
        queue = deque([(root, 0, root_idx.shape[1], 0, totals.real, totals.imag)])
        while queue:
            node, a, b, depth, G, H = queue.popleft()
            if depth == 0:
                idx, xs, gh = root_idx, root_xs, root_gh
            else:
                bidx, bxs, bgh = ws.level[depth & 1]
                idx = bidx[:, a:b]
                xs = bxs[:, a:b]
                gh = bgh[:, a:b]
            m = b - a
            split = None
            if depth < hp.max_depth and m >= 2:
                split = self.find_split(xs, gh, G, H)
            if split is None:
                denom = H + hp.l2_leaf_reg
                leaf = -hp.learning_rate * G / denom if denom > 0 else 0.0
                self.value[node] = leaf
                leaf_out[idx[0]] = leaf
                continue
            j, pos, t, GLv, HLv = split
            went = ws.member
            left_members = idx[j, : pos + 1]
            went[left_members] = True
            wl = went[idx]
            went[left_members] = False
            nl = pos + 1
            # Stable partition: row-wise destination columns, then one scatter
            # per array into the next level's buffer; children address the
            # result by column range.
            c = np.cumsum(wl, axis=1)
            newpos = ws.offsets[:m] - c
            newpos += nl
            c -= 1
            np.copyto(newpos, c, where=wl)
            didx, dxs, dgh = ws.level[(depth + 1) & 1]
            didx[:, a:b][ws.rows, newpos] = idx
            dxs[:, a:b][ws.rows, newpos] = xs
            dgh[:, a:b][ws.rows, newpos] = gh
            left_id = self.new_node()
            right_id = self.new_node()
            self.feature[node] = j
            self.threshold[node] = t
            self.left[node] = left_id
            self.right[node] = right_id
            queue.append((left_id, a, a + nl, depth + 1, GLv, HLv))
            queue.append((right_id, a + nl, b, depth + 1, G - GLv, H - HLv))
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )


def train_gbdt(X, y, hp: GbdtHyperparams, seed: int = 0) -> TrainedEnsemble:
    """Boost `hp.n_estimators` trees against binary logistic loss."""
    X, y = _check_training_inputs(X, y)
    n, d = X.shape
    p = float(y.mean())
    base = math.log(p / (1.0 - p))
    Xt = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    xs_root = Xt[np.arange(d)[:, None], order]  # sorted values, shared by all trees
    margin = np.full(n, base, dtype=np.float64)
    scratch = _TreeScratch(n, d)
    trees = []
    for _ in range(hp.n_estimators):
        prob = _sigmoid(margin)
        gh = np.empty(n, dtype=np.complex128)
        gh.real = prob - y
        gh.imag = prob * (1.0 - prob)
        delta = np.zeros(n, dtype=np.float64)
        builder = _TreeBuilder(hp, scratch)
        trees.append(builder.build(order, xs_root, gh[order], delta))
        margin += delta
    return TrainedEnsemble(
        base_score=base,
        hyperparams=hp,
        seed=seed,
        n_features=d,
        trees=tuple(trees),
    )


def _tree_margins(tree: Tree, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int32)
    rows = np.arange(n)
    while True:
        f = tree.feature[node]
        internal = f >= 0
        if not internal.any():
            break
        go_left = X[rows, np.where(internal, f, 0)] < tree.threshold[node]
        node = np.where(
            internal, np.where(go_left, tree.left[node], tree.right[node]), node
        )
    return tree.value[node]


def predict_margin(model: TrainedEnsemble, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionError(
            f"expected {model.n_features} features, got matrix of shape {X.shape}"
        )
    margin = np.full(X.shape[0], model.base_score, dtype=np.float64)
    for tree in model.trees:
        margin += _tree_margins(tree, X)
    return margin


def predict_scores(model: TrainedEnsemble, X) -> np.ndarray:
    """Probability scores in (0, 1); a row-wise deterministic map."""
    return _sigmoid(predict_margin(model, X))


def staged_log_losses(model: TrainedEnsemble, X, y) -> list[float]:
    """Log loss after 0, 1, ... trees; boosting must not increase it."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    margin = np.full(X.shape[0], model.base_score, dtype=np.float64)
    losses = [log_loss(margin, y)]
    for tree in model.trees:
        margin += _tree_margins(tree, X)
        losses.append(log_loss(margin, y))
    return losses


def model_to_json(model: TrainedEnsemble) -> str:
    trees = []
    for tree in model.trees:
        nodes = []
        for i in range(tree.feature.shape[0]):
            if tree.feature[i] < 0:
                nodes.append({"leaf": float(tree.value[i])})
            else:
                nodes.append(
                    {
                        "feature": int(tree.feature[i]),
                        "threshold": float(tree.threshold[i]),
                        "left": int(tree.left[i]),
                        "right": int(tree.right[i]),
                    }
                )
        trees.append({"nodes": nodes})
    hp = model.hyperparams
    payload = {
        "base_score": model.base_score,
        "n_features": model.n_features,
        "seed": model.seed,
        "hyperparams": {
            "max_depth": hp.max_depth,
            "n_estimators": hp.n_estimators,
            "learning_rate": hp.learning_rate,
            "l2_leaf_reg": hp.l2_leaf_reg,
            "min_child_weight": hp.min_child_weight,
        },
        "trees": trees,
    }
    return json.dumps(payload)


def model_from_json(text: str) -> TrainedEnsemble:
    payload = json.loads(text)
    trees = []
    for td in payload["trees"]:
        nodes = td["nodes"]
        k = len(nodes)
        feature = np.full(k, -1, dtype=np.int32)
        threshold = np.full(k, math.nan, dtype=np.float64)
        left = np.full(k, -1, dtype=np.int32)
        right = np.full(k, -1, dtype=np.int32)
        value = np.zeros(k, dtype=np.float64)
        for i, nd in enumerate(nodes):
            if "leaf" in nd:
                value[i] = nd["leaf"]
            else:
                feature[i] = nd["feature"]
                threshold[i] = nd["threshold"]
                left[i] = nd["left"]
                right[i] = nd["right"]
        trees.append(
            Tree(
                feature=feature,
                threshold=threshold,
                left=left,
                right=right,
                value=value,
            )
        )
    return TrainedEnsemble(
        base_score=payload["base_score"],
        hyperparams=GbdtHyperparams(**payload["hyperparams"]),
        seed=payload["seed"],
        n_features=payload["n_features"],
        trees=tuple(trees),
    )


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    l2: float
    n_iters: int


def _logreg_loss(w, b, X, y, l2) -> float:
    m = X @ w + b
    return log_loss(m, y) + 0.5 * l2 * float(w @ w)


def train_logreg(
    X, y, l2: float = 1e-3, max_iters: int = 5000, tol: float = 1e-6
) -> LinearModel:
    """Gradient descent with Armijo backtracking on L2-regularized log loss.

    The intercept is not regularized. Converged when the gradient norm
    drops below tol.
    """
    X, y = _check_training_inputs(X, y)
    n, d = X.shape
    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    loss = _logreg_loss(w, b, X, y, l2)
    for it in range(max_iters):
        p = _sigmoid(X @ w + b)
        r = (p - y) / n
        gw = X.T @ r + l2 * w
        gb = float(r.sum())
        gnorm2 = float(gw @ gw) + gb * gb
        if math.sqrt(gnorm2) < tol:
            return LinearModel(weights=w, intercept=b, l2=l2, n_iters=it)
        step = 1.0
        while True:
            w2 = w - step * gw
            b2 = b - step * gb
            loss2 = _logreg_loss(w2, b2, X, y, l2)
            if loss2 <= loss - 0.5 * step * gnorm2 or step < 1e-20:
                break
            step *= 0.5
        w, b, loss = w2, b2, loss2
    raise NonConvergenceError(
        f"gradient norm still above {tol} after {max_iters} iterations"
    )


def predict_scores_linear(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise DimensionError(
            f"expected {model.weights.shape[0]} features, got shape {X.shape}"
        )
    return _sigmoid(X @ model.weights + model.intercept)


def grouped_kfold(groups: Sequence[str], k: int, seed: int = 0) -> np.ndarray:
    """Fold index per row; all rows of a group share a fold."""
    groups = np.asarray(groups)
    unique = np.unique(groups)
    if unique.shape[0] < k:
        raise FoldDegeneracyError(
            f"{unique.shape[0]} groups cannot fill {k} folds"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(unique.shape[0])
    fold_of_group = np.empty(unique.shape[0], dtype=np.int64)
    for fold, chunk in enumerate(np.array_split(perm, k)):
        fold_of_group[chunk] = fold
    position = {g: i for i, g in enumerate(unique.tolist())}
    return np.array([fold_of_group[position[g]] for g in groups.tolist()])


def grid_search_cv(
    X,
    y,
    groups: Sequence[str],
    grid: Sequence[GbdtHyperparams],
    k: int = 5,
    seed: int = 0,
) -> GbdtHyperparams:
    """Mean validation AUROC over patient-grouped folds; first best wins."""
    if not grid:
        raise ValidationError("hyperparameter grid is empty")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    folds = grouped_kfold(groups, k, seed=seed)
    masks = []
    for f in range(k):
        val = folds == f
        tr = ~val
        for name, mask in (("validation", val), ("training", tr)):
            part = y[mask]
            if part.size == 0 or part.min() == part.max():
                raise FoldDegeneracyError(
                    f"fold {f}: {name} part lacks a class"
                )
        masks.append((tr, val))
    best_hp = None
    best_score = -math.inf
    for hp in grid:
        scores = []
        for tr, val in masks:
            model = train_gbdt(X[tr], y[tr], hp, seed=seed)
            scores.append(auroc(predict_scores(model, X[val]), y[val]))
        mean = math.fsum(scores) / k
        if mean > best_score:
            best_score = mean
            best_hp = hp
    return best_hp
