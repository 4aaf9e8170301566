"""Post-processing for demographic parity between two groups.

The fair score of class k for a row in group a is
``prior[a] * score_k - sign[a] * lam[k]`` and the mitigated prediction is its
argmax (lowest class on ties). ``lam`` minimises the convex dual

    H(lam) = mean_i max_k (score_ik - sign[a_i] * lam_k / prior[a_i])

whose subgradient in ``lam_k`` is P(pred=k | sign -1) - P(pred=k | sign +1).
Fitting is plain subgradient descent from zero with step ``step / sqrt(t)``,
keeping the iterate with the lowest empirical DP gap.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .metrics import GroupAssignment, MetricError

DEFAULT_EPSILON = 0.01
DEFAULT_MAX_ITERS = 1000
DEFAULT_STEP = 0.1
JITTER_SCALE = 1e-5


@dataclass(frozen=True)
class MitigationModel:
    lam: tuple
    priors: dict
    signs: dict
    epsilon: float
    iterations: int
    initial_dp: float
    final_dp: float
    step: float = DEFAULT_STEP
    jitter: bool = False
    seed: int | None = None
    objective_trace: tuple = field(default=(), repr=False)
    dp_trace: tuple = field(default=(), repr=False)

    @property
    def K(self):
        return len(self.lam)

    def to_dict(self):
        return {
            "lambda": list(self.lam),
            "priors": {str(k): v for k, v in self.priors.items()},
            "sign_encoding": {str(k): v for k, v in self.signs.items()},
            "epsilon": self.epsilon,
            "iterations": self.iterations,
            "initial_dp": self.initial_dp,
            "final_dp": self.final_dp,
            "step": self.step,
            "jitter": self.jitter,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            lam=tuple(float(v) for v in data["lambda"]),
            priors=dict(data["priors"]),
            signs={k: int(v) for k, v in data["sign_encoding"].items()},
            epsilon=float(data["epsilon"]),
            iterations=int(data["iterations"]),
            initial_dp=float(data.get("initial_dp", math.nan)),
            final_dp=float(data["final_dp"]),
            step=float(data.get("step", DEFAULT_STEP)),
            jitter=bool(data.get("jitter", False)),
            seed=data.get("seed"),
        )


class _Problem:
    """Row-level arrays shared by fitting, evaluation and application."""

    def __init__(self, scores, groups, positive=None, priors=None, signs=None):
        if groups.M != 2:
            raise MetricError(f"mitigation needs exactly two groups, got {groups.M}")
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        if len(groups) != len(scores):
            raise MetricError("group assignment does not cover the table")
        labels = groups.groups
        if signs is None:
            positive = labels[0] if positive is None else positive
            if positive not in labels:
                raise MetricError(f"positive group {positive!r} not among {labels}")
            signs = {g: (1 if g == positive else -1) for g in labels}
        if priors is None:
            n = len(groups)
            priors = {g: float(np.sum(groups.codes == c)) / n for c, g in enumerate(labels)}
        missing = [g for g in labels if _lookup(priors, g) is None or _lookup(signs, g) is None]
        if missing:
            raise MetricError(f"model has no prior/sign for group(s) {missing}")
        self.scores = np.ascontiguousarray(scores, dtype=np.float64)
        self.codes = groups.codes
        self.labels = labels
        self.priors = {g: _lookup(priors, g) for g in labels}
        self.signs = {g: int(_lookup(signs, g)) for g in labels}
        self.sign_by_code = np.array([self.signs[g] for g in labels], dtype=np.float64)
        self.prior_by_code = np.array([self.priors[g] for g in labels], dtype=np.float64)
        self.row_scale = self.prior_by_code[self.codes]
        self.K = self.scores.shape[1]

    def predict(self, lam):
        offsets = self.sign_by_code[:, None] * np.asarray(lam, dtype=np.float64)[None, :]
        return kernels.plugin_argmax(self.scores, self.row_scale, self.codes, offsets)

    def class_rates(self, pred):
        cnt = kernels.confusion_counts(np.zeros_like(pred), pred, self.codes, self.K, 2)[:, 0, :]
        return cnt / cnt.sum(axis=1, keepdims=True), cnt

    def dp(self, pred):
        rates, cnt = self.class_rates(pred)
        marginal = cnt.sum(axis=0) / cnt.sum()
        return float(np.abs(rates - marginal).max())

    def subgradient(self, pred):
        rates, _ = self.class_rates(pred)
        plus = rates[self.sign_by_code > 0][0]
        minus = rates[self.sign_by_code < 0][0]
        return minus - plus

    def dual(self, lam):
        shift = (self.sign_by_code / self.prior_by_code)[self.codes][:, None] * np.asarray(lam)[None, :]
        return float((self.scores - shift).max(axis=1).mean())


def _lookup(mapping, key):
    # JSON round-trips turn labels into strings
    if key in mapping:
        return mapping[key]
    return mapping.get(str(key))


def _scores_for(table, jitter, seed):
    scores = np.asarray(table.scores, dtype=np.float64)
    if jitter:
        rng = np.random.default_rng(seed)
        scores = scores + rng.uniform(0.0, JITTER_SCALE, size=scores.shape)
    return scores


def dual_objective(table, groups, lam, positive=None):
    return _Problem(table.scores, groups, positive).dual(lam)


def dual_subgradient(table, groups, lam, positive=None):
    prob = _Problem(table.scores, groups, positive)
    return prob.subgradient(prob.predict(lam))


def fit_lambda(
    table,
    groups,
    epsilon=DEFAULT_EPSILON,
    max_iters=DEFAULT_MAX_ITERS,
    step=DEFAULT_STEP,
    positive=None,
    jitter=False,
    seed=None,
):
    """Fit the class offsets for the two groups in ``groups``.

    ``positive`` picks the group with sign +1 (default: the first label in
    sorted order).
    """
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    prob = _Problem(_scores_for(table, jitter, seed), groups, positive)
    lam = np.zeros(prob.K)
    best_lam, best_dp = lam.copy(), math.inf
    initial_dp = None
    objective, dps = [], []
    t = 0
    while True:
        pred = prob.predict(lam)
        dp = prob.dp(pred)
        objective.append(prob.dual(lam))
        dps.append(dp)
        if initial_dp is None:
            initial_dp = dp
        if dp < best_dp:
            best_lam, best_dp = lam.copy(), dp
        if dp <= epsilon or t >= max_iters:
            break
        t += 1
        lam = lam - step / math.sqrt(t) * prob.subgradient(pred)
    return MitigationModel(
        lam=tuple(float(v) for v in best_lam),
        priors=prob.priors,
        signs=prob.signs,
        epsilon=epsilon,
        iterations=t,
        initial_dp=initial_dp,
        final_dp=best_dp,
        step=step,
        jitter=jitter,
        seed=seed,
        objective_trace=tuple(objective),
        dp_trace=tuple(dps),
    )


@dataclass(frozen=True, eq=False)
class MitigatedPredictions:
    original: np.ndarray
    mitigated: np.ndarray
    fair_scores: np.ndarray
    original_price: np.ndarray | None = None
    mitigated_price: np.ndarray | None = None


def apply_mitigation(table, groups, model, scheme=None):
    """Mitigated predictions for ``table``; scores are not modified.

    ``original`` is the argmax of the unshifted scores. With an ordinal
    ``scheme`` the class midpoints of both predictions are attached.
    """
    prob = _Problem(
        _scores_for(table, model.jitter, model.seed), groups,
        priors=model.priors, signs=model.signs,
    )
    if prob.K != model.K:
        raise ValueError(f"model has {model.K} classes, table has {prob.K}")
    lam = np.asarray(model.lam)
    offsets = prob.sign_by_code[:, None] * lam[None, :]
    fair = prob.row_scale[:, None] * prob.scores - offsets[prob.codes]
    original = np.argmax(prob.scores, axis=1).astype(np.int64) + 1
    mitigated = prob.predict(lam) + 1
    prices = {}
    if scheme is not None:
        mids = scheme.midpoints
        prices = dict(original_price=mids[original - 1], mitigated_price=mids[mitigated - 1])
    return MitigatedPredictions(original, mitigated, fair, **prices)


def binary_groups(region_ids, members, inside="1", outside="2", descriptor=""):
    """Two-group assignment: rows whose region is in ``members`` vs the rest."""
    members = set(members)
    labels = np.array([inside if rid in members else outside for rid in region_ids])
    return GroupAssignment(labels, descriptor)
