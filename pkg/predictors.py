"""
Kriging predictor family
Simple/Ordinary Kriging, CMLE, CBPK(delta), Limit Kriging and SiNK, all of the
form beta + w * k(x0)^T K^-1 (y - beta 1) with a per-method residual weight w
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

from errors import (
    ConfigurationError,
    DegenerateConditioningError,
    InputError,
    NumericalConsistencyError,
    UnboundedPredictorError,
    UndefinedLimitWeightError,
)
from gp_model import LOG_2PI, FittedModel
from kernels import cross_cov

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
RHO_CLAMP_TOL = 1e-8
CMLE_MIN_RHO = 1e-6
LIMIT_MIN_WEIGHT_DENOM = 1e-12
CONDITIONING_MAX_RHO = 1.0 - 1e-8

METHODS = ("kriging", "cmle", "cbpk", "cbpk_spatial", "limit", "sink")


@dataclass(frozen=True)
class PredictorKind:
    """
    One member of the predictor family

    - name: kriging, cmle, cbpk, limit or sink
    - delta: CBPK penalty multiple; None means the spatial choice delta = 1/rho(x0)
    - epsilon: SiNK floor on rho
    """
    name: str
    delta: Optional[float] = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.name not in ("kriging", "cmle", "cbpk", "limit", "sink"):
            raise ConfigurationError(
                f"Unknown predictor '{self.name}'. Available: ['kriging', 'cmle', 'cbpk', 'limit', 'sink']"
            )
        if self.delta is not None and not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ConfigurationError(f"CBPK delta must be finite and nonnegative, got {self.delta}")
        if not 0 <= self.epsilon < 1:
            raise ConfigurationError(f"SiNK epsilon must lie in [0, 1), got {self.epsilon}")

    @classmethod
    def kriging(cls) -> "PredictorKind":
        return cls("kriging")

    @classmethod
    def cmle(cls) -> "PredictorKind":
        return cls("cmle")

    @classmethod
    def cbpk(cls, delta: float = 1.0) -> "PredictorKind":
        return cls("cbpk", delta=float(delta))

    @classmethod
    def cbpk_spatial(cls) -> "PredictorKind":
        return cls("cbpk", delta=None)

    @classmethod
    def limit(cls) -> "PredictorKind":
        return cls("limit")

    @classmethod
    def sink(cls, epsilon: float = DEFAULT_EPSILON) -> "PredictorKind":
        return cls("sink", epsilon=float(epsilon))

    @property
    def label(self) -> str:
        """Column name used in batch outputs"""
        if self.name == "cbpk" and self.delta is None:
            return "cbpk_spatial"
        return self.name


@dataclass
class PredictionBundle:
    """
    Everything known about one query point

    Means of methods that were not requested stay None; methods that were
    requested but failed are NaN with the reason in `failures`.
    epsilon_clipped is only set when SiNK was evaluated.
    """
    x0: List[float]
    rho: float
    k00: float
    var_kriging: float
    mspe_sink: float
    mean_kriging: Optional[float] = None
    mean_cmle: Optional[float] = None
    mean_cbpk: Optional[float] = None
    mean_cbpk_spatial: Optional[float] = None
    mean_limit: Optional[float] = None
    mean_sink: Optional[float] = None
    weights: Dict[str, float] = field(default_factory=dict)
    epsilon: float = DEFAULT_EPSILON
    cbpk_delta: Optional[float] = None
    epsilon_clipped: bool = False
    kind: Optional[str] = None
    failures: Dict[str, str] = field(default_factory=dict)

    def mean(self, method: str) -> Optional[float]:
        if method not in METHODS:
            raise ConfigurationError(f"Unknown method '{method}'. Available: {list(METHODS)}")
        return getattr(self, f"mean_{method}")

    @property
    def weight_used(self) -> Optional[float]:
        """Residual weight of the requested method (SiNK for predict_all)"""
        return self.weights.get(self.kind or "sink")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class _QueryStats:
    k00: float
    kKk: float
    resid: float
    kK1: float
    rho: float


def _query_stats(model: FittedModel, k: np.ndarray, k00: float) -> _QueryStats:
    k = np.asarray(k, dtype=float).ravel()
    if k.shape[0] != model.n:
        raise InputError(f"Covariance vector has length {k.shape[0]}, model has {model.n} points")
    if not k00 > 0:
        raise InputError(f"k(x0, x0) must be positive, got {k00}")

    v = solve_triangular(model.chol, k, lower=True, check_finite=False)
    kKk = float(v @ v)
    return _QueryStats(
        k00=float(k00),
        kKk=kKk,
        resid=float(k @ model.alpha),
        kK1=float(k @ model.kinv_ones),
        rho=_clamp_rho(math.sqrt(kKk / k00)),
    )


def _clamp_rho(value: float) -> float:
    if value > 1.0 + RHO_CLAMP_TOL:
        raise NumericalConsistencyError(
            f"rho = {value:.12g} exceeds 1 beyond roundoff; the factorization is inaccurate"
        )
    return min(value, 1.0)


def cbpk_weight(rho_value: float, delta: Optional[float]) -> float:
    """(delta + 1) / (delta rho^2 + 1); delta None uses delta = 1/rho"""
    if delta is None:
        if rho_value == 0.0:
            return math.inf
        delta = 1.0 / rho_value
    return (delta + 1.0) / (delta * rho_value * rho_value + 1.0)


def sink_weight(rho_value: float, epsilon: float = DEFAULT_EPSILON) -> Tuple[float, bool]:
    """1 / max(rho, epsilon) and whether the floor was active"""
    clipped = rho_value < epsilon
    floor = max(rho_value, epsilon)
    return (math.inf if floor == 0.0 else 1.0 / floor), clipped


def _weight(kind: PredictorKind, stats: _QueryStats) -> float:
    rho_value = stats.rho
    if kind.name == "kriging":
        return 1.0
    if kind.name == "cmle":
        if rho_value < CMLE_MIN_RHO:
            raise UnboundedPredictorError(
                f"CMLE is unbounded at rho = {rho_value:.3e} (< {CMLE_MIN_RHO:.0e}); use SiNK instead"
            )
        return 1.0 / (rho_value * rho_value)
    if kind.name == "cbpk":
        return cbpk_weight(rho_value, kind.delta)
    if kind.name == "limit":
        if stats.kK1 < LIMIT_MIN_WEIGHT_DENOM:
            raise UndefinedLimitWeightError(
                f"Limit Kriging weight undefined: k(x0)^T K^-1 1 = {stats.kK1:.3e}"
            )
        return 1.0 / stats.kK1
    return sink_weight(rho_value, kind.epsilon)[0]


def _inflate(beta: float, weight: float, resid: float) -> float:
    # an infinite weight only arises at rho = 0, where k = 0 and the residual term vanishes
    if math.isinf(weight):
        return beta
    return beta + weight * resid


def _bundle(model: FittedModel, stats: _QueryStats, x0, kinds: List[PredictorKind],
            raise_errors: bool, epsilon: float, cbpk_delta: Optional[float]) -> PredictionBundle:
    var_kriging = max(stats.k00 - stats.kKk, 0.0)
    bundle = PredictionBundle(
        x0=[float(v) for v in np.atleast_1d(x0)] if x0 is not None else [],
        rho=stats.rho,
        k00=stats.k00,
        var_kriging=var_kriging,
        mspe_sink=2.0 / (1.0 + stats.rho) * var_kriging,
        epsilon=epsilon,
        cbpk_delta=cbpk_delta,
        epsilon_clipped=any(kind.name == "sink" for kind in kinds) and stats.rho < epsilon,
    )
    for kind in kinds:
        try:
            weight = _weight(kind, stats)
        except (UnboundedPredictorError, UndefinedLimitWeightError) as exc:
            if raise_errors:
                raise
            bundle.failures[kind.label] = str(exc)
            bundle.weights[kind.label] = math.nan
            setattr(bundle, f"mean_{kind.label}", math.nan)
            continue
        bundle.weights[kind.label] = weight
        setattr(bundle, f"mean_{kind.label}", _inflate(model.beta, weight, stats.resid))
    return bundle


def _all_kinds(epsilon: float, cbpk_delta: float) -> List[PredictorKind]:
    return [
        PredictorKind.kriging(),
        PredictorKind.cmle(),
        PredictorKind.cbpk(cbpk_delta),
        PredictorKind.cbpk_spatial(),
        PredictorKind.limit(),
        PredictorKind.sink(epsilon),
    ]


def _kvec(model: FittedModel, x0) -> Tuple[np.ndarray, np.ndarray, float]:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.ndim != 1 or x0.shape[0] != model.dim:
        raise InputError(f"Query point must have {model.dim} coordinates, got shape {x0.shape}")
    k = cross_cov(model.spec, model.X, x0[None, :])[:, 0]
    return x0, k, model.spec.sigma2


def rho(model: FittedModel, x0) -> float:
    """
    sqrt(k(x0)^T K^-1 k(x0) / k(x0, x0)) through one triangular solve

    Roundoff above 1 by at most 1e-8 is clamped; larger excess raises
    NumericalConsistencyError.
    """
    _, k, k00 = _kvec(model, x0)
    return _query_stats(model, k, k00).rho


def predict(model: FittedModel, x0, kind: PredictorKind) -> PredictionBundle:
    """
    Single-method prediction; CMLE and Limit failures raise

    Args:
        model: fitted model
        x0: query point
        kind: which predictor to evaluate

    Returns:
        PredictionBundle with rho, variances and the one requested mean
    """
    x0, k, k00 = _kvec(model, x0)
    stats = _query_stats(model, k, k00)
    bundle = _bundle(model, stats, x0, [kind], raise_errors=True,
                     epsilon=kind.epsilon, cbpk_delta=kind.delta)
    bundle.kind = kind.label
    return bundle


def predict_all(model: FittedModel, x0, epsilon: float = DEFAULT_EPSILON,
                cbpk_delta: float = 1.0) -> PredictionBundle:
    """Every predictor at one point; CMLE/Limit failures become NaN entries"""
    x0, k, k00 = _kvec(model, x0)
    stats = _query_stats(model, k, k00)
    return _bundle(model, stats, x0, _all_kinds(epsilon, cbpk_delta), raise_errors=False,
                   epsilon=epsilon, cbpk_delta=cbpk_delta)


def predict_from_kvec(model: FittedModel, k, k00: float, kind: Optional[PredictorKind] = None,
                      epsilon: float = DEFAULT_EPSILON, cbpk_delta: float = 1.0,
                      x0=None) -> PredictionBundle:
    """
    Predictors from a supplied covariance vector k(x0) and variance k(x0, x0)

    Lets callers build synthetic queries (one-point model, scaled rays)
    without a point in input space. kind None fills every method.
    """
    stats = _query_stats(model, k, k00)
    if kind is None:
        return _bundle(model, stats, x0, _all_kinds(epsilon, cbpk_delta), raise_errors=False,
                       epsilon=epsilon, cbpk_delta=cbpk_delta)
    bundle = _bundle(model, stats, x0, [kind], raise_errors=True,
                     epsilon=kind.epsilon, cbpk_delta=kind.delta)
    bundle.kind = kind.label
    return bundle


def predict_batch(model: FittedModel, X0, epsilon: float = DEFAULT_EPSILON,
                  cbpk_delta: float = 1.0, chunk_size: int = 2048) -> pd.DataFrame:
    """
    Vectorized prediction over many query points

    Args:
        model: fitted model
        X0: (m, d) query points
        epsilon: SiNK floor
        cbpk_delta: fixed delta for the cbpk column (cbpk_spatial uses 1/rho)
        chunk_size: rows per covariance block

    Returns:
        DataFrame with x0_1..x0_d, rho, kriging, sink, limit, cmle, cbpk,
        cbpk_spatial, var_kriging, mspe_sink, epsilon_clipped, cmle_failed,
        limit_failed
    """
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim == 1:
        X0 = X0[None, :]
    if X0.ndim != 2 or X0.shape[1] != model.dim:
        raise InputError(f"Query points must be (m, {model.dim}), got shape {X0.shape}")
    if chunk_size < 1:
        raise ConfigurationError(f"chunk_size must be positive, got {chunk_size}")
    PredictorKind.sink(epsilon)
    PredictorKind.cbpk(cbpk_delta)

    m = X0.shape[0]
    k00 = model.spec.sigma2
    kKk = np.empty(m)
    resid = np.empty(m)
    kK1 = np.empty(m)
    for start in range(0, m, chunk_size):
        stop = min(start + chunk_size, m)
        Kx = cross_cov(model.spec, model.X, X0[start:stop])
        V = solve_triangular(model.chol, Kx, lower=True, check_finite=False)
        kKk[start:stop] = np.sum(V * V, axis=0)
        resid[start:stop] = Kx.T @ model.alpha
        kK1[start:stop] = Kx.T @ model.kinv_ones

    rho_raw = np.sqrt(kKk / k00)
    if np.any(rho_raw > 1.0 + RHO_CLAMP_TOL):
        worst = int(np.argmax(rho_raw))
        raise NumericalConsistencyError(
            f"rho = {rho_raw[worst]:.12g} exceeds 1 beyond roundoff at query row {worst}"
        )
    rho_values = np.minimum(rho_raw, 1.0)
    beta = model.beta

    with np.errstate(divide="ignore", invalid="ignore"):
        cmle_ok = rho_values >= CMLE_MIN_RHO
        cmle = np.where(cmle_ok, beta + resid / np.where(cmle_ok, rho_values ** 2, 1.0), np.nan)

        limit_ok = kK1 >= LIMIT_MIN_WEIGHT_DENOM
        limit = np.where(limit_ok, beta + resid / np.where(limit_ok, kK1, 1.0), np.nan)

        cbpk = beta + (cbpk_delta + 1.0) / (cbpk_delta * rho_values ** 2 + 1.0) * resid

        positive = rho_values > 0
        safe_rho = np.where(positive, rho_values, 1.0)
        spatial_delta = 1.0 / safe_rho
        spatial_w = (spatial_delta + 1.0) / (spatial_delta * safe_rho ** 2 + 1.0)
        cbpk_spatial = np.where(positive, beta + spatial_w * resid, beta)

        floor = np.maximum(rho_values, epsilon)
        sink = np.where(floor > 0, beta + resid / np.where(floor > 0, floor, 1.0), beta)

    var_kriging = np.maximum(k00 - kKk, 0.0)
    frame = pd.DataFrame({f"x0_{j + 1}": X0[:, j] for j in range(model.dim)})
    frame["rho"] = rho_values
    frame["kriging"] = beta + resid
    frame["sink"] = sink
    frame["limit"] = limit
    frame["cmle"] = cmle
    frame["cbpk"] = cbpk
    frame["cbpk_spatial"] = cbpk_spatial
    frame["var_kriging"] = var_kriging
    frame["mspe_sink"] = 2.0 / (1.0 + rho_values) * var_kriging
    frame["epsilon_clipped"] = rho_values < epsilon
    frame["cmle_failed"] = ~cmle_ok
    frame["limit_failed"] = ~limit_ok

    n_cmle, n_limit = int((~cmle_ok).sum()), int((~limit_ok).sum())
    if n_cmle or n_limit:
        logger.debug("Batch of %d queries: %d CMLE and %d Limit failures", m, n_cmle, n_limit)
    return frame


def _conditioning_terms(model: FittedModel, x0) -> Tuple[_QueryStats, float]:
    _, k, k00 = _kvec(model, x0)
    stats = _query_stats(model, k, k00)
    if stats.rho >= CONDITIONING_MAX_RHO:
        raise DegenerateConditioningError(
            f"rho = {stats.rho:.12g} leaves K conditioned on Y(x0) singular"
        )
    return stats, model.quad_form()


def conditional_loglik(model: FittedModel, x0, y0):
    """
    Log-likelihood of the data given Y(x0) = y0

    y | Y(x0) = y0 is Gaussian with mean beta 1 + k (y0 - beta) / k00 and
    covariance K - k k^T / k00. Its inverse and determinant come from the
    factor of K by the Woodbury identity and the matrix determinant lemma.

    Args:
        model: fitted model
        x0: query point (not a training point)
        y0: candidate value(s) for Y(x0), scalar or array

    Returns:
        Log-likelihood with the shape of y0
    """
    stats, a = _conditioning_terms(model, x0)
    b, c, k00 = stats.resid, stats.kKk, stats.k00

    y0 = np.asarray(y0, dtype=float)
    u = (y0 - model.beta) / k00
    quad = a - 2.0 * u * b + u * u * c + (b - u * c) ** 2 / (k00 - c)
    log_det = model.log_det + math.log1p(-c / k00)
    out = -0.5 * quad - 0.5 * log_det - 0.5 * model.n * LOG_2PI
    return out if out.ndim else float(out)


def sink_log_posterior(model: FittedModel, x0, y0):
    """
    Conditional log-likelihood plus the local prior term of SiNK

    -(y0 - beta)^2 rho / (2 k00 (1 + rho)); the maximizer over y0 is the
    SiNK mean with epsilon = 0.
    """
    stats, _ = _conditioning_terms(model, x0)
    y0 = np.asarray(y0, dtype=float)
    penalty = (y0 - model.beta) ** 2 * stats.rho / (2.0 * stats.k00 * (1.0 + stats.rho))
    out = conditional_loglik(model, x0, y0) - penalty
    return out if np.ndim(out) else float(out)


def write_predictions_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info("Wrote %d predictions to %s", len(frame), path)
    return path
