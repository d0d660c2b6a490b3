"""Deterministic binary classifiers and cost-threshold decision rules.

Four model families are provided: L2-regularized logistic regression trained
by damped full-batch Newton steps, CART-style decision trees grown on Gini
(or entropy) gain, bagged forests of such trees, and a constant-rate
baseline. Training is a pure function of (spec, data, seed): re-running a
fit reproduces bitwise-identical parameters, which the bootstrap layer
relies on for scheduling-independent results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import TabularDataset
from .errors import InputError
from .seeding import derive_seed

MODEL_KINDS = ("logistic", "tree", "forest", "constant")
CRITERIA = ("gini", "entropy")


@dataclass(frozen=True)
class CostModel:
    """Misclassification costs: c01 for false positives, c10 for false negatives."""

    c01: float = 1.0
    c10: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.c01) and np.isfinite(self.c10)):
            raise InputError("costs must be finite")
        if self.c01 <= 0 or self.c10 <= 0:
            raise InputError("costs must be strictly positive")

    @property
    def tau(self) -> float:
        """Decision threshold induced by the costs, in (0, 1)."""
        return self.c01 / (self.c01 + self.c10)

    def loss(self, observed: int, predicted: int) -> float:
        if observed == predicted:
            return 0.0
        return self.c01 if observed == 0 else self.c10

    def loss_matrix(self) -> np.ndarray:
        """2x2 table indexed as [observed, predicted]."""
        return np.array([[0.0, self.c01], [self.c10, 0.0]])

    def to_dict(self) -> dict:
        return {"c01": self.c01, "c10": self.c10}

    @classmethod
    def from_dict(cls, d: dict) -> "CostModel":
        return cls(c01=float(d.get("c01", 1.0)), c10=float(d.get("c10", 1.0)))


def cost_threshold(costs: CostModel) -> float:
    """Probability threshold c01/(c01+c10) that a positive call must clear."""
    return costs.tau


@dataclass(frozen=True)
class ModelSpec:
    """Hyperparameters for one model family, fixed across an experiment."""

    kind: str
    # logistic
    max_iters: int = 500
    tol: float = 1e-6
    l2: float = 1.0
    # tree
    max_depth: int | None = None
    min_leaf: int = 1
    criterion: str = "gini"
    # forest
    n_trees: int = 11
    feature_subsample: int | str | None = "sqrt"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InputError(f"unknown model kind {self.kind!r}, expected one of {MODEL_KINDS}")
        if self.criterion not in CRITERIA:
            raise InputError(f"unknown split criterion {self.criterion!r}")
        if self.max_iters < 1 or self.tol <= 0 or self.l2 < 0:
            raise InputError("logistic hyperparameters out of range")
        if self.min_leaf < 1 or (self.max_depth is not None and self.max_depth < 0):
            raise InputError("tree hyperparameters out of range")
        if self.n_trees < 1:
            raise InputError("forest needs at least one tree")
        if isinstance(self.feature_subsample, str) and self.feature_subsample != "sqrt":
            raise InputError("feature_subsample must be an int, 'sqrt', or None")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "logistic":
            d.update(max_iters=self.max_iters, tol=self.tol, l2=self.l2)
        elif self.kind == "tree":
            d.update(max_depth=self.max_depth, min_leaf=self.min_leaf, criterion=self.criterion)
        elif self.kind == "forest":
            d.update(
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                criterion=self.criterion,
                n_trees=self.n_trees,
                feature_subsample=self.feature_subsample,
            )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        allowed = {
            "kind", "max_iters", "tol", "l2",
            "max_depth", "min_leaf", "criterion",
            "n_trees", "feature_subsample",
        }
        unknown = set(d) - allowed
        if unknown:
            raise InputError(f"unknown model fields: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# Model containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantModel:
    """Predicts one fixed positive-class probability for every input."""

    p: float
    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], self.p, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"kind": "constant", "p": self.p, "n_features": self.n_features}


@dataclass(frozen=True)
class LogisticModel:
    """Weights and intercept of a fitted logistic regressor."""

    weights: np.ndarray
    intercept: float
    n_iter: int
    converged: bool
    loss_history: tuple = field(repr=False, default=())

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z = X @ self.weights + self.intercept
        return _sigmoid(z)

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "p", "n")

    def __init__(self, p: float, n: int):
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.p = p
        self.n = n

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class TreeModel:
    """CART-style binary classification tree; leaves hold class-1 fractions."""

    root: _Node
    n_features: int
    depth: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if node.is_leaf:
                out[idx] = node.p
            else:
                left = X[idx, node.feature] <= node.threshold
                stack.append((node.left, idx[left]))
                stack.append((node.right, idx[~left]))
        return out

    def to_dict(self) -> dict:
        def walk(node):
            if node.is_leaf:
                return {"p": node.p, "n": node.n}
            return {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": walk(node.left),
                "right": walk(node.right),
            }

        return {"kind": "tree", "n_features": self.n_features, "depth": self.depth,
                "root": walk(self.root)}


@dataclass(frozen=True)
class ForestModel:
    """Bagged trees; the regressor output is the mean member probability."""

    trees: tuple
    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / len(self.trees)

    def to_dict(self) -> dict:
        return {"kind": "forest", "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}


TrainedModel = ConstantModel | LogisticModel | TreeModel | ForestModel


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def fit(spec: ModelSpec, train: TabularDataset, seed: int) -> TrainedModel:
    """Train one model; deterministic given (spec, train, seed).

    A single-class training set yields a constant model rather than an error,
    whatever the requested family.
    """
    X = train.features
    y = train.labels.astype(np.float64)
    if not np.isfinite(X).all():
        raise InputError("training features contain non-finite values")
    if y.min() == y.max():
        return ConstantModel(p=float(y[0]), n_features=X.shape[1])
    if spec.kind == "constant":
        return ConstantModel(p=float(y.mean()), n_features=X.shape[1])
    if spec.kind == "logistic":
        return _fit_logistic(X, y, spec)
    if spec.kind == "tree":
        return _fit_tree(X, train.labels, spec, rng=None)
    return _fit_forest(X, train.labels, spec, seed)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logistic_loss(X, y, w, b, l2) -> float:
    z = X @ w + b
    # log(1 + e^z) - y*z, computed stably.
    nll = np.logaddexp(0.0, z) - y * z
    n = X.shape[0]
    return float(nll.mean() + l2 * (w @ w) / (2.0 * n))


def _fit_logistic(X, y, spec: ModelSpec) -> LogisticModel:
    """Damped Newton descent on the regularized mean log-loss.

    The intercept is unpenalized. Step halving enforces a non-increasing
    loss at every iteration; convergence is declared at gradient norm
    <= spec.tol.
    """
    n, m = X.shape
    w = np.zeros(m)
    b = 0.0
    loss = _logistic_loss(X, y, w, b, spec.l2)
    history = [loss]
    converged = False
    it = 0
    for it in range(1, spec.max_iters + 1):
        p = _sigmoid(X @ w + b)
        resid = p - y
        g_w = X.T @ resid / n + (spec.l2 / n) * w
        g_b = float(resid.mean())
        grad = np.concatenate([g_w, [g_b]])
        if np.linalg.norm(grad) <= spec.tol:
            converged = True
            it -= 1
            break
        s = p * (1.0 - p)
        H = np.empty((m + 1, m + 1))
        H[:m, :m] = (X.T * s) @ X / n + (spec.l2 / n) * np.eye(m)
        H[:m, m] = X.T @ s / n
        H[m, :m] = H[:m, m]
        H[m, m] = float(s.mean())
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # Halve until the loss does not increase; keeps the per-iteration
        # monotonicity contract even when the quadratic model overshoots.
        alpha = 1.0
        for _ in range(60):
            w_new = w - alpha * step[:m]
            b_new = b - alpha * step[m]
            new_loss = _logistic_loss(X, y, w_new, b_new, spec.l2)
            if new_loss <= loss:
                break
            alpha *= 0.5
        else:
            converged = True  # no descent direction left at float precision
            it -= 1
            break
        w, b, loss = w_new, b_new, new_loss
        history.append(loss)
    return LogisticModel(
        weights=w,
        intercept=float(b),
        n_iter=it,
        converged=converged,
        loss_history=tuple(history),
    )


def _impurity_pair(c0, c1, n, criterion: str):
    """Vectorized impurity of nodes with class counts (c0, c1), size n."""
    if criterion == "gini":
        return 1.0 - (c0 * c0 + c1 * c1) / (n * n)
    with np.errstate(divide="ignore", invalid="ignore"):
        p0 = c0 / n
        p1 = c1 / n
        h = np.zeros_like(p0, dtype=np.float64)
        mask0 = p0 > 0
        mask1 = p1 > 0
        h = np.where(mask0, h - p0 * np.log2(np.where(mask0, p0, 1.0)), h)
        h = np.where(mask1, h - p1 * np.log2(np.where(mask1, p1, 1.0)), h)
    return h


def _best_split(X, y, candidates, min_leaf: int, criterion: str):
    """Best (feature, threshold) by impurity gain.

    Candidate features are scanned in ascending index order and thresholds in
    ascending value order; a new best is accepted only on strictly greater
    gain, so ties resolve to the lowest feature index, then the lowest
    threshold. Thresholds are midpoints between consecutive distinct sorted
    values.
    """
    n = y.shape[0]
    n1 = int(y.sum())
    parent = float(_impurity_pair(np.array([n - n1]), np.array([n1]), np.array([n]), criterion)[0])
    best_gain = 0.0
    best = None
    positions = np.arange(1, n)
    for f in candidates:
        v = X[:, f]
        order = np.argsort(v, kind="mergesort")
        vs = v[order]
        ys = y[order]
        valid = vs[1:] != vs[:-1]
        valid &= (positions >= min_leaf) & (n - positions >= min_leaf)
        if not valid.any():
            continue
        c1_prefix = np.cumsum(ys)[:-1]
        nl = positions[valid].astype(np.float64)
        nr = n - nl
        c1l = c1_prefix[valid].astype(np.float64)
        c0l = nl - c1l
        c1r = n1 - c1l
        c0r = nr - c1r
        child = (nl * _impurity_pair(c0l, c1l, nl, criterion)
                 + nr * _impurity_pair(c0r, c1r, nr, criterion)) / n
        gains = parent - child
        k = int(np.argmax(gains))
        if gains[k] > best_gain:
            pos = positions[valid][k]
            best_gain = float(gains[k])
            best = (int(f), float(0.5 * (vs[pos - 1] + vs[pos])))
    return best


def _grow(X, y, depth: int, spec: ModelSpec, rng, depth_seen: list) -> _Node:
    node = _Node(p=float(y.mean()), n=y.shape[0])
    depth_seen[0] = max(depth_seen[0], depth)
    if spec.max_depth is not None and depth >= spec.max_depth:
        return node
    if y.shape[0] < 2 * spec.min_leaf or y.min() == y.max():
        return node
    m = X.shape[1]
    if rng is not None:
        k = _resolve_subsample(spec.feature_subsample, m)
        candidates = np.sort(rng.choice(m, size=k, replace=False)) if k < m else np.arange(m)
    else:
        candidates = np.arange(m)
    split = _best_split(X, y, candidates, spec.min_leaf, spec.criterion)
    if split is None:
        return node
    f, thr = split
    node.feature = f
    node.threshold = thr
    left = X[:, f] <= thr
    node.left = _grow(X[left], y[left], depth + 1, spec, rng, depth_seen)
    node.right = _grow(X[~left], y[~left], depth + 1, spec, rng, depth_seen)
    return node


def _fit_tree(X, y, spec: ModelSpec, rng) -> TreeModel:
    depth_seen = [0]
    root = _grow(X, y.astype(np.int64), 0, spec, rng, depth_seen)
    return TreeModel(root=root, n_features=X.shape[1], depth=depth_seen[0])


def _resolve_subsample(setting, m: int) -> int:
    if setting is None:
        return m
    if setting == "sqrt":
        return max(1, min(m, int(round(np.sqrt(m)))))
    return max(1, min(m, int(setting)))


def _fit_forest(X, y, spec: ModelSpec, seed: int) -> ForestModel:
    """Bag trees over row bootstraps; tree b draws rows and per-node feature
    subsets from a generator seeded by hash(seed, b)."""
    n = X.shape[0]
    trees = []
    for b in range(spec.n_trees):
        rng = np.random.default_rng(derive_seed(seed, b))
        rows = rng.integers(0, n, size=n)
        Xb, yb = X[rows], y[rows]
        if yb.min() == yb.max():
            trees.append(ConstantModel(p=float(yb[0]), n_features=X.shape[1]))
        else:
            trees.append(_fit_tree(Xb, yb, spec, rng))
    return ForestModel(trees=tuple(trees), n_features=X.shape[1])


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def _as_matrix(model: TrainedModel, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2:
        raise InputError("inputs must be a feature row or a 2-D matrix")
    if X.shape[1] != model.n_features:
        raise InputError(
            f"model expects {model.n_features} features, got {X.shape[1]}"
        )
    return X, single


def predict_proba(model: TrainedModel, x):
    """Positive-class probability for one feature row or a matrix of rows."""
    X, single = _as_matrix(model, x)
    p = model.predict_proba(X)
    return float(p[0]) if single else p


def predict_label(model: TrainedModel, x, costs: CostModel):
    """Thresholded decision: 1 iff the probability reaches cost_threshold."""
    p = predict_proba(model, x)
    tau = costs.tau
    if np.isscalar(p):
        return int(p >= tau)
    return (p >= tau).astype(np.int8)
