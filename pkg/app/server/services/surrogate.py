from typing import Optional

import numpy as np

from app.server.models.surrogate import ForestParams, TrainingSet

_LEAF = -1


class RegressionTree:
    """
    CART regression tree stored as flat node arrays.

    Internal nodes route `x[feature] <= threshold` to `left`, else `right`;
    leaves have feature == -1 and predict the mean of their resident targets.
    """

    __slots__ = ('feature', 'threshold', 'left', 'right', 'value')

    def __init__(self, feature: np.ndarray, threshold: np.ndarray, left: np.ndarray, right: np.ndarray, value: np.ndarray) -> None:
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == _LEAF))

    @classmethod
    def grow(cls, xs: np.ndarray, ys: np.ndarray, min_samples_split: int, max_depth: Optional[int]) -> 'RegressionTree':
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []

        def new_node(rows: np.ndarray) -> int:
            feature.append(_LEAF)
            threshold.append(0.0)
            left.append(_LEAF)
            right.append(_LEAF)
            value.append(float(np.mean(ys[rows])))
            return len(value) - 1

        stack = [(new_node(np.arange(len(ys))), np.arange(len(ys)), 0)]
        while stack:
            node, rows, depth = stack.pop()
            if len(rows) < min_samples_split or (max_depth is not None and depth >= max_depth):
                continue
            split = best_split(xs[rows], ys[rows])
            if split is None:
                continue
            split_feature, split_threshold = split
            goes_left = xs[rows, split_feature] <= split_threshold
            left_rows, right_rows = rows[goes_left], rows[~goes_left]
            feature[node] = split_feature
            threshold[node] = split_threshold
            left[node] = new_node(left_rows)
            right[node] = new_node(right_rows)
            stack.append((right[node], right_rows, depth + 1))
            stack.append((left[node], left_rows, depth + 1))

        return cls(
            np.asarray(feature, dtype=np.intp),
            np.asarray(threshold, dtype=np.float64),
            np.asarray(left, dtype=np.intp),
            np.asarray(right, dtype=np.intp),
            np.asarray(value, dtype=np.float64),
        )

    def predict(self, xs: np.ndarray) -> np.ndarray:
        node = np.zeros(len(xs), dtype=np.intp)
        rows = np.arange(len(xs))
        while True:
            split_feature = self.feature[node]
            pending = split_feature != _LEAF
            if not pending.any():
                return self.value[node]
            current = node[pending]
            goes_left = xs[rows[pending], split_feature[pending]] <= self.threshold[current]
            node[pending] = np.where(goes_left, self.left[current], self.right[current])


def best_split(xs: np.ndarray, ys: np.ndarray) -> Optional[tuple[int, float]]:
    """
    Finds the split minimizing the summed squared error of the two children.

    Candidate thresholds are midpoints between consecutive distinct sorted values of a feature.
    Ties go to the lowest feature index, then the lowest threshold.

    Returns:
        (feature, threshold), or None when targets are constant or no feature varies.
    """
    n_rows = len(ys)
    if n_rows < 2 or np.all(ys == ys[0]):
        return None
    order = np.argsort(xs, axis=0, kind='stable')
    sorted_x = np.take_along_axis(xs, order, axis=0)
    sorted_y = ys[order]
    sum_left = np.cumsum(sorted_y, axis=0)[:-1]
    sq_left = np.cumsum(sorted_y**2, axis=0)[:-1]
    total, total_sq = ys.sum(), np.square(ys).sum()
    n_left = np.arange(1, n_rows, dtype=np.float64)[:, None]
    n_right = n_rows - n_left
    sse = (sq_left - sum_left**2 / n_left) + ((total_sq - sq_left) - (total - sum_left) ** 2 / n_right)
    sse[sorted_x[1:] <= sorted_x[:-1]] = np.inf
    # feature-major flattening makes argmin pick the lowest feature, then the lowest threshold
    flat = sse.T.ravel()
    best = int(np.argmin(flat))
    if not np.isfinite(flat[best]):
        return None
    split_feature, position = divmod(best, n_rows - 1)
    midpoint = (sorted_x[position, split_feature] + sorted_x[position + 1, split_feature]) / 2.0
    return split_feature, float(midpoint)


class SurrogateForest:
    """
    Random-forest surrogate giving a mean and an across-tree standard deviation.

    A fitted forest is immutable; refitting returns a new instance, so concurrent `predict` calls are safe.
    """

    def __init__(self, trees: list[RegressionTree], params: ForestParams, seed: int, dimension: int, target_range: tuple[float, float]) -> None:
        self.trees = trees
        self.params = params
        self.seed = seed
        self.dimension = dimension
        self.target_range = target_range

    @classmethod
    def fit(cls, data: TrainingSet, params: ForestParams = None, seed: int = 0) -> 'SurrogateForest':
        """
        Trains `params.n_trees` CART trees, each on a same-size resample drawn with replacement
        (or on the full data when bootstrap is off). Deterministic for equal (data, params, seed).

        Args:
            data: Encoded configurations and minimize-oriented objectives.
            params: Forest hyperparameters; defaults from config.
            seed: Seed of the per-tree random streams.
        Returns:
            The fitted forest.
        """
        params = params or ForestParams()
        n_rows = len(data.ys)
        trees = []
        for stream in np.random.SeedSequence(seed).spawn(params.n_trees):
            rows = np.random.default_rng(stream).integers(0, n_rows, n_rows) if params.bootstrap else np.arange(n_rows)
            trees.append(RegressionTree.grow(data.xs[rows], data.ys[rows], params.min_samples_split, params.max_depth))
        return cls(trees, params, seed, data.dimension, (float(data.ys.min()), float(data.ys.max())))

    def predict_many(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and population standard deviation of the per-tree predictions, one pair per row"""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.dimension:
            raise ValueError(f'dimension mismatch: forest expects vectors of length {self.dimension}, got shape {xs.shape}')
        per_tree = np.stack([tree.predict(xs) for tree in self.trees])
        agree = np.ptp(per_tree, axis=0) == 0
        mu = np.where(agree, per_tree[0], per_tree.mean(axis=0))
        sigma = np.where(agree, 0.0, per_tree.std(axis=0))
        return np.clip(mu, *self.target_range), sigma

    def predict(self, x: np.ndarray) -> tuple[float, float]:
        mu, sigma = self.predict_many(np.asarray(x, dtype=np.float64).reshape(1, -1))
        return float(mu[0]), float(sigma[0])
