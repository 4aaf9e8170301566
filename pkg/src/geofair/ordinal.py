"""Quantile binning of prices into ordinal classes and confidence scores.

Classes are 1-based throughout the public API.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_K = 5


class DegenerateBinningError(ValueError):
    pass


@dataclass(frozen=True)
class OrdinalScheme:
    """Cuts ``q_0 <= ... <= q_K`` defining K classes."""

    cuts: tuple

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if len(cuts) < 3:
            raise ValueError("need at least 2 classes (3 cuts)")
        if any(b - a <= 0 for a, b in zip(cuts, cuts[1:])):
            raise DegenerateBinningError(
                f"zero-length class interval in cuts {cuts}; use a smaller K"
            )

    @property
    def K(self):
        return len(self.cuts) - 1

    @property
    def midpoints(self):
        c = np.asarray(self.cuts)
        return (c[:-1] + c[1:]) / 2

    @property
    def lengths(self):
        return np.diff(np.asarray(self.cuts))

    def to_dict(self):
        return {"K": self.K, "cuts": list(self.cuts)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        scheme = cls(tuple(data["cuts"]))
        if "K" in data and int(data["K"]) != scheme.K:
            raise ValueError("K does not match number of cuts")
        return scheme


def fit_binning(values, K=DEFAULT_K):
    """Cuts at the empirical k/K quantiles, linear interpolation (numpy's default)."""
    values = np.asarray(values, dtype=np.float64)
    if K < 2:
        raise ValueError("K must be >= 2")
    if len(np.unique(values)) < K:
        raise DegenerateBinningError(f"fewer than K={K} distinct values; use a smaller K")
    cuts = np.quantile(values, np.arange(K + 1) / K, method="linear")
    return OrdinalScheme(tuple(cuts))


def assign_class(z, scheme):
    """Class of each value: ``[q_{k-1}, q_k)`` for k < K, last interval closed.

    Values outside ``[q_0, q_K]`` clamp to the end classes. Scalar in,
    scalar out.
    """
    interior = np.asarray(scheme.cuts[1:-1])
    out = np.searchsorted(interior, np.asarray(z, dtype=np.float64), side="right") + 1
    return int(out) if np.ndim(out) == 0 else out.astype(np.int64)


def confidence_scores(z_pred, scheme, temperature=1.0):
    """Softmax over negated, length-normalised distances to class midpoints.

    Returns shape ``(K,)`` for a scalar input, ``(n, K)`` otherwise.
    """
    z = np.asarray(z_pred, dtype=np.float64)
    s = -np.abs(z[..., None] - scheme.midpoints) / scheme.lengths / temperature
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def argmax_class(scores):
    """1-based argmax, lowest index on ties."""
    return np.argmax(scores, axis=-1).astype(np.int64) + 1


@dataclass(frozen=True, eq=False)
class ScoredTable:
    """Observations with true/predicted classes and score vectors."""

    region_id: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    scores: np.ndarray
    z_true: np.ndarray | None = None
    z_pred: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.y)
        if len(self.y_hat) != n or self.scores.shape[0] != n or len(self.region_id) != n:
            raise ValueError("misaligned ScoredTable columns")

    def __len__(self):
        return len(self.y)

    @property
    def K(self):
        return self.scores.shape[1]

    @property
    def confidence(self):
        return self.scores.max(axis=1)

    def take(self, mask):
        return ScoredTable(
            region_id=self.region_id[mask],
            y=self.y[mask],
            y_hat=self.y_hat[mask],
            scores=self.scores[mask],
            z_true=None if self.z_true is None else self.z_true[mask],
            z_pred=None if self.z_pred is None else self.z_pred[mask],
        )

    def with_predictions(self, y_hat, scores):
        return replace(self, y_hat=np.asarray(y_hat, dtype=np.int64), scores=np.asarray(scores))


def score_table(table, scheme, yhat_from="interval", temperature=1.0):
    """Discretise an ObservationTable.

    ``yhat_from="interval"`` assigns the predicted class by the interval that
    contains ``z_pred``; ``"argmax"`` uses the argmax of the scores instead.
    """
    scores = confidence_scores(table.z_pred, scheme, temperature)
    if yhat_from == "interval":
        y_hat = assign_class(table.z_pred, scheme)
    elif yhat_from == "argmax":
        y_hat = argmax_class(scores)
    else:
        raise ValueError(f"yhat_from must be 'interval' or 'argmax', got {yhat_from!r}")
    return ScoredTable(
        region_id=np.asarray(table.region_id),
        y=assign_class(table.z_true, scheme),
        y_hat=np.asarray(y_hat, dtype=np.int64),
        scores=scores,
        z_true=table.z_true,
        z_pred=table.z_pred,
    )


def random_baseline(n, K, seed, confidence=0.5):
    """Uniformly random predictions.

    Scores are ``confidence * one_hot + (1 - confidence) / K``; confidence 1
    gives one-hot scores.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= confidence <= 1:
        raise ValueError("confidence must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    y_hat = rng.integers(1, K + 1, size=n)
    scores = np.full((n, K), (1 - confidence) / K)
    scores[np.arange(n), y_hat - 1] += confidence
    return y_hat.astype(np.int64), scores
