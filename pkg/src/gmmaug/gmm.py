"""One-dimensional Gaussian mixture fitting by expectation-maximization.

The mixture density is p(v) = sum_k w_k N(v | mu_k, var_k). All
posterior and likelihood computations run in log space with log-sum-exp
normalization, so widely separated components and tiny variances do not
underflow.

Fitting is fully deterministic for a given (values, config) pair:
initial means sit at equally spaced sample quantiles, initial variances
at sample variance / k^2, initial weights uniform. Optional subsampling
of large inputs is driven by a seeded Philox generator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateComponentError, InputError, InsufficientDataError

LOG_2PI = math.log(2.0 * math.pi)

# Smallest variance a fitted or perturbed component may carry on
# [0, 1]-normalized data; prevents singular collapse.
VARIANCE_FLOOR = 1e-8

# A component whose total responsibility mass falls below this has
# effectively lost all its voxels.
_MASS_FLOOR = 1e-12


@dataclass(frozen=True)
class EmConfig:
    """Convergence and subsampling knobs for :func:`fit_em`.

    ``tol`` bounds the relative log-likelihood change between
    iterations (denominator ``max(1, |previous|)``). Inputs longer than
    ``subsample_cap`` are reduced to that many values drawn without
    replacement by a Philox generator keyed with ``subsample_seed``;
    set the cap to ``None`` to always fit every value.
    """

    tol: float = 1e-6
    max_iter: int = 500
    variance_floor: float = VARIANCE_FLOOR
    subsample_cap: int | None = 2_000_000
    subsample_seed: int = 0

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise InputError("tol must be > 0 and max_iter >= 1")
        if self.variance_floor < VARIANCE_FLOOR:
            raise InputError(f"variance_floor below the global floor {VARIANCE_FLOOR}")
        if self.subsample_cap is not None and self.subsample_cap < 1:
            raise InputError("subsample_cap must be None or >= 1")


@dataclass(frozen=True)
class GmmParams:
    """Fitted mixture, components sorted ascending by mean.

    On T1w brain data the sort realises the CSF < GM < WM intensity
    convention. ``ll_trajectory`` keeps the per-iteration log-likelihood
    for monotonicity checks; it is not serialized.
    """

    k: int
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: float
    iterations: int
    ll_trajectory: tuple[float, ...] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        means = np.asarray(self.means, dtype=np.float64).ravel()
        variances = np.asarray(self.variances, dtype=np.float64).ravel()
        if not (self.k == weights.size == means.size == variances.size):
            raise InputError("k, weights, means, variances sizes disagree")
        if abs(weights.sum() - 1.0) > 1e-9 or np.any(weights < 0):
            raise InputError("weights must be non-negative and sum to 1")
        if np.any(variances < VARIANCE_FLOOR):
            raise InputError(f"variances must be >= {VARIANCE_FLOOR}")
        if np.any(np.diff(means) < 0):
            raise InputError("means must be sorted ascending")
        for name, arr in (("weights", weights), ("means", means), ("variances", variances)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GmmParams":
        try:
            return cls(
                k=int(obj["k"]),
                weights=np.asarray(obj["weights"], dtype=np.float64),
                means=np.asarray(obj["means"], dtype=np.float64),
                variances=np.asarray(obj["variances"], dtype=np.float64),
                log_likelihood=float(obj["log_likelihood"]),
                iterations=int(obj["iterations"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed mixture parameters: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def _as_values(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size and not np.all(np.isfinite(v)):
        raise InputError("values must be finite")
    return v


def _component_log_prob(weights, means, variances, values) -> np.ndarray:
    """(k, n) array of log(w_k) + log N(v | mu_k, var_k).

    Component-major layout keeps every reduction in the EM loop
    contiguous.
    """
    with np.errstate(divide="ignore"):  # zero weights -> -inf is fine
        log_w = np.log(weights)
    diff = values[None, :] - means[:, None]
    return log_w[:, None] - 0.5 * (
        LOG_2PI + np.log(variances)[:, None] + diff * diff / variances[:, None]
    )


def _posterior(log_prob: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize (k, n) log probabilities: (responsibilities, log-evidence).

    One shared exp pass; rows where every density underflows still
    resolve, and exact ties split evenly.
    """
    top = log_prob.max(axis=0)
    unnorm = np.exp(log_prob - top[None, :])
    total = unnorm.sum(axis=0)
    return unnorm / total[None, :], top + np.log(total)


def log_likelihood(params: GmmParams, values) -> float:
    """Total log-likelihood of ``values`` under ``params`` (log-sum-exp form)."""
    v = _as_values(values)
    if v.size == 0:
        return 0.0
    lp = _component_log_prob(params.weights, params.means, params.variances, v)
    return float(_posterior(lp)[1].sum())


def responsibilities(params: GmmParams, values) -> np.ndarray:
    """(n, k) posterior p(component | value), rows summing to 1."""
    v = _as_values(values)
    lp = _component_log_prob(params.weights, params.means, params.variances, v)
    return np.ascontiguousarray(_posterior(lp)[0].T)


def _subsample(v: np.ndarray, cfg: EmConfig) -> np.ndarray:
    if cfg.subsample_cap is None or v.size <= cfg.subsample_cap:
        return v
    rng = np.random.Generator(np.random.Philox(cfg.subsample_seed))
    return v[rng.choice(v.size, size=cfg.subsample_cap, replace=False)]


def fit_em(values, k: int = 3, cfg: EmConfig | None = None) -> GmmParams:
    """Fit a k-component mixture to 1-D samples by EM.

    Iterates until the relative log-likelihood change drops below
    ``cfg.tol`` or ``cfg.max_iter`` sweeps have run. The reported
    ``log_likelihood`` always refers to the returned parameters, and
    ``ll_trajectory`` holds every evaluation in order.

    Raises:
        InsufficientDataError: fewer than ``10 * k`` values.
        DegenerateComponentError: a component's responsibility mass
            collapsed below 1e-12.
    """
    cfg = cfg or EmConfig()
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    v = _as_values(values)
    if v.size < 10 * k:
        raise InsufficientDataError(f"need at least {10 * k} values, got {v.size}")
    v = _subsample(v, cfg)
    if v.size < 10 * k:
        raise InsufficientDataError(
            f"subsample cap {cfg.subsample_cap} leaves fewer than {10 * k} values"
        )
    n = v.size

    quantiles = 100.0 * np.arange(1, k + 1) / (k + 1)
    means = np.percentile(v, quantiles)
    variances = np.full(k, max(float(np.var(v)) / (k * k), cfg.variance_floor))
    weights = np.full(k, 1.0 / k)

    trajectory: list[float] = []
    ll_prev = None
    sweeps = 0
    for _ in range(cfg.max_iter):
        log_prob = _component_log_prob(weights, means, variances, v)
        resp, log_evidence = _posterior(log_prob)
        ll = float(log_evidence.sum())
        trajectory.append(ll)
        if ll_prev is not None and abs(ll - ll_prev) < cfg.tol * max(1.0, abs(ll_prev)):
            break
        ll_prev = ll

        mass = resp.sum(axis=1)
        if np.any(mass < _MASS_FLOOR):
            dead = int(np.argmin(mass))
            raise DegenerateComponentError(
                f"component {dead} responsibility mass {mass[dead]:.3e} collapsed"
            )
        weights = mass / n
        means = (resp * v[None, :]).sum(axis=1) / mass
        diff = v[None, :] - means[:, None]
        variances = np.maximum(
            (resp * diff * diff).sum(axis=1) / mass, cfg.variance_floor
        )
        sweeps += 1
    else:
        # max_iter exhausted after an M-step: evaluate the final params
        log_prob = _component_log_prob(weights, means, variances, v)
        ll = float(_posterior(log_prob)[1].sum())
        trajectory.append(ll)

    order = np.lexsort((variances, means))  # stable tie-break on variance
    return GmmParams(
        k=k,
        weights=weights[order],
        means=means[order],
        variances=variances[order],
        log_likelihood=ll,
        iterations=sweeps,
        ll_trajectory=tuple(trajectory),
    )
