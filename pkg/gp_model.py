"""
Gaussian process model container
Factorizes K, estimates the constant mean and the stationary variance in
closed form, and fits length-scales by profile maximum likelihood
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_solve, cholesky, LinAlgError
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial.distance import pdist, squareform
from scipy.stats import qmc

from errors import ConfigurationError, InputError, SingularModelError
from kernels import KernelSpec, coordinate_range, corr_from_lags, cov_matrix, pair_lags

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-6
JITTER_GROWTH = 10.0
DUPLICATE_TOL = 1e-12
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FitOptions:
    """
    Settings for maximum-likelihood length-scale fitting

    theta_bounds holds one (lo, hi) pair per dimension; None means
    [1e-2 * range, 10 * range] from the design's coordinate span.
    simplex_scale sets the initial simplex edge as a fraction of each
    log-bounds width. warm_start adds one extra restart from the best
    common position inside the log-bounds box, found by a 1-d search.
    """
    theta_bounds: Optional[Tuple[Tuple[float, float], ...]] = None
    n_restarts: int = 10
    tol: float = 1e-6
    estimate_beta: bool = True
    known_beta: float = 0.0
    fixed_theta: Optional[Tuple[float, ...]] = None
    seed: int = 0
    max_iter: Optional[int] = None
    workers: int = 1
    simplex_scale: float = 0.2
    warm_start: bool = False

    def __post_init__(self):
        if self.n_restarts < 1:
            raise ConfigurationError(f"n_restarts must be at least 1, got {self.n_restarts}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}")
        if not 0 < self.simplex_scale <= 1:
            raise ConfigurationError(f"simplex_scale must lie in (0, 1], got {self.simplex_scale}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.theta_bounds is not None:
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.theta_bounds)
            for lo, hi in bounds:
                if not (0 < lo < hi):
                    raise ConfigurationError(f"Length-scale bounds need 0 < lo < hi, got ({lo}, {hi})")
            object.__setattr__(self, "theta_bounds", bounds)
        if self.fixed_theta is not None:
            object.__setattr__(self, "fixed_theta", tuple(float(t) for t in self.fixed_theta))


@dataclass
class RestartOutcome:
    """One local optimization of the profile log-likelihood over log theta"""
    index: int
    start: List[float]
    theta: List[float]
    loglik: float
    n_evals: int
    trace: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class MleReport:
    """Audit trail of mle_fit: midpoint baseline, every restart, outcome"""
    midpoint_theta: List[float]
    midpoint_loglik: float
    restarts: List[RestartOutcome] = field(default_factory=list)
    best_index: Optional[int] = None
    degraded: bool = False

    def to_dict(self) -> Dict:
        return {
            "midpoint_theta": self.midpoint_theta,
            "midpoint_loglik": self.midpoint_loglik,
            "restarts": [r.to_dict() for r in self.restarts],
            "best_index": self.best_index,
            "degraded": self.degraded,
        }


@dataclass(frozen=True, eq=False)
class FittedModel:
    """
    Immutable fitted model; safe to share across threads

    Attributes:
    - X: (n, d) training inputs
    - y: (n,) outputs
    - spec: kernel with the stationary variance in use
    - beta: constant mean shared by every predictor
    - chol: lower Cholesky factor L of K + jitter_used * I
    - alpha: K^-1 (y - beta 1)
    - kinv_ones: K^-1 1
    - log_det: log det(K + jitter_used * I)
    - jitter_used: diagonal jitter actually added
    - mle_report: present when the model came from mle_fit
    """
    X: np.ndarray
    y: np.ndarray
    spec: KernelSpec
    beta: float
    chol: np.ndarray
    alpha: np.ndarray
    kinv_ones: np.ndarray
    log_det: float
    jitter_used: float
    mle_report: Optional[MleReport] = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def factor(self) -> Tuple[np.ndarray, bool]:
        """Factor in the (c, lower) form scipy's cho_solve expects"""
        return self.chol, True

    def solve(self, b) -> np.ndarray:
        """K^-1 b through the cached factor"""
        return cho_solve(self.factor, np.asarray(b, dtype=float), check_finite=False)

    def quad_form(self) -> float:
        """(y - beta 1)^T K^-1 (y - beta 1)"""
        return float((self.y - self.beta) @ self.alpha)

    def log_likelihood(self) -> float:
        return _gaussian_loglik(self.quad_form(), self.log_det, self.n)

    def to_dict(self) -> Dict[str, Any]:
        data = self.spec.to_dict()
        data.update({
            "beta": self.beta,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "jitter_used": self.jitter_used,
        })
        return data


def _gaussian_loglik(quad: float, log_det: float, n: int) -> float:
    return -0.5 * quad - 0.5 * log_det - 0.5 * n * LOG_2PI


def _prepare_data(X, y) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise InputError(f"Training inputs must be an (n, d) array with n >= 1, got {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise InputError(f"{X.shape[0]} training inputs but {y.shape[0]} outputs")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("Training data contains non-finite values")
    return X, y


def closest_pair(X: np.ndarray) -> Tuple[int, int, float]:
    """Indices and distance of the closest pair of rows"""
    if X.shape[0] < 2:
        return 0, 0, math.inf
    dist = squareform(pdist(X))
    np.fill_diagonal(dist, np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    i, j = sorted((int(i), int(j)))
    return i, j, float(dist[i, j])


def check_distinct(X: np.ndarray):
    """Reject training rows closer than 1e-12 times the coordinate span"""
    if X.shape[0] < 2:
        return
    span = float(np.max(coordinate_range(X)))
    i, j, dist = closest_pair(X)
    # zero span: all rows coincide and dist == 0
    if dist <= DUPLICATE_TOL * span:
        raise InputError(
            f"Duplicate training points: rows {i} and {j} are {dist:.3e} apart"
        )


def factorize(K: np.ndarray, sigma2: float, X: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float]:
    """
    Cholesky factor of K with escalating diagonal jitter

    Starts without jitter, then 1e-10 * sigma2 growing tenfold up to
    1e-6 * sigma2.

    Returns:
        (lower factor L, jitter added)
    """
    n = K.shape[0]
    jitter = 0.0
    while True:
        try:
            A = K if jitter == 0.0 else K + jitter * np.eye(n)
            L = cholesky(A, lower=True, check_finite=False)
            if jitter > 0:
                logger.warning("Covariance factorized with jitter %.1e (sigma2 units)", jitter / sigma2)
            return L, jitter
        except LinAlgError:
            if jitter == 0.0:
                jitter = JITTER_START * sigma2
            elif jitter < JITTER_MAX * sigma2 * (1 - 1e-9):
                jitter *= JITTER_GROWTH
            else:
                break

    detail = ""
    if X is not None and X.shape[0] >= 2:
        i, j, dist = closest_pair(X)
        detail = f"; closest pair is rows {i} and {j} at distance {dist:.3e}"
    raise SingularModelError(
        f"Covariance matrix is singular even with jitter {JITTER_MAX:.0e}*sigma2{detail}"
    )


def fit_fixed(X, y, spec: KernelSpec, beta: Optional[float] = None) -> FittedModel:
    """
    Fit a model with given kernel hyperparameters

    Args:
        X: (n, d) training inputs, distinct rows
        y: (n,) outputs
        spec: kernel specification
        beta: known constant mean; None estimates it by generalized least squares

    Returns:
        FittedModel with cached factor and residual solve
    """
    X, y = _prepare_data(X, y)
    if spec.composition == "tensor" and X.shape[1] != len(spec.theta):
        raise InputError(
            f"Training inputs have dimension {X.shape[1]} but the kernel has {len(spec.theta)} length-scales"
        )
    check_distinct(X)

    K = cov_matrix(spec, X)
    L, jitter = factorize(K, spec.sigma2, X)
    ones = np.ones(X.shape[0])
    kinv_ones = cho_solve((L, True), ones, check_finite=False)

    if beta is None:
        beta = float(kinv_ones @ y / (ones @ kinv_ones))
    beta = float(beta)

    alpha = cho_solve((L, True), y - beta, check_finite=False)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))

    return FittedModel(
        X=X, y=y, spec=spec, beta=beta, chol=L, alpha=alpha,
        kinv_ones=kinv_ones, log_det=log_det, jitter_used=jitter,
    )


def log_likelihood(X, y, spec: KernelSpec, beta: Optional[float] = None) -> float:
    """
    Gaussian log-density of y under the model N(beta 1, K)

    -1/2 (y - beta 1)^T K^-1 (y - beta 1) - 1/2 log det K - n/2 log 2 pi
    """
    return fit_fixed(X, y, spec, beta).log_likelihood()


def profile_loglik(
    X, y, nu: float, theta: Sequence[float], composition: str = "tensor",
    estimate_beta: bool = True, known_beta: float = 0.0
) -> Tuple[float, float, float]:
    """
    Log-likelihood with beta and sigma2 profiled out

    Works on the correlation matrix R; sigma2_hat = r^T R^-1 r / n.

    Returns:
        (profile log-likelihood, beta_hat, sigma2_hat)
    """
    X, y = _prepare_data(X, y)
    corr_spec = KernelSpec(theta=tuple(theta), nu=nu, sigma2=1.0, composition=composition)
    if corr_spec.dim and corr_spec.dim != X.shape[1]:
        raise InputError(
            f"Training inputs have dimension {X.shape[1]} but the kernel has {corr_spec.dim} length-scales"
        )
    check_distinct(X)
    return _profile_from_lags(X, y, nu, corr_spec.theta, pair_lags(X, composition),
                              estimate_beta, known_beta)


def _profile_from_lags(
    X: np.ndarray, y: np.ndarray, nu: float, theta, lags: np.ndarray,
    estimate_beta: bool, known_beta: float
) -> Tuple[float, float, float]:
    # inputs are already validated; this is the per-evaluation path of mle_fit
    n = X.shape[0]
    R = squareform(corr_from_lags(nu, theta, lags))
    np.fill_diagonal(R, 1.0)
    L, _ = factorize(R, 1.0, X)
    ones = np.ones(n)
    kinv_ones = cho_solve((L, True), ones, check_finite=False)
    beta = float(kinv_ones @ y / (ones @ kinv_ones)) if estimate_beta else float(known_beta)
    resid = y - beta
    sigma2_hat = float(resid @ cho_solve((L, True), resid, check_finite=False)) / n
    if sigma2_hat <= 0:
        sigma2_hat = np.finfo(float).tiny
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    loglik = -0.5 * n * math.log(sigma2_hat) - 0.5 * log_det - 0.5 * n * (1.0 + LOG_2PI)
    return loglik, beta, sigma2_hat


def default_theta_bounds(X: np.ndarray, composition: str = "tensor") -> np.ndarray:
    """[1e-2 * range, 10 * range] per dimension (one row for isotropic)"""
    span = coordinate_range(X)
    if composition == "isotropic":
        span = np.array([float(np.linalg.norm(span))])
    span = np.where(span > 0, span, 1.0)
    return np.column_stack([1e-2 * span, 10.0 * span])


def _resolve_bounds(X: np.ndarray, options: FitOptions, composition: str) -> np.ndarray:
    n_theta = 1 if composition == "isotropic" else X.shape[1]
    if options.theta_bounds is None:
        return default_theta_bounds(X, composition)
    bounds = np.asarray(options.theta_bounds, dtype=float)
    if bounds.shape != (n_theta, 2):
        raise ConfigurationError(
            f"Expected {n_theta} (lo, hi) length-scale bounds, got shape {bounds.shape}"
        )
    return bounds


def _negative_profile(X, y, nu, lags, options: FitOptions):
    def objective(log_theta):
        try:
            value, _, _ = _profile_from_lags(
                X, y, nu, np.exp(log_theta), lags, options.estimate_beta, options.known_beta
            )
        except SingularModelError:
            return np.inf
        return -value
    return objective


def initial_simplex(start: np.ndarray, log_bounds: np.ndarray, scale: float) -> np.ndarray:
    """
    Nelder-Mead starting simplex around start

    Vertex j + 1 moves coordinate j by scale times its log-bounds width,
    upward when that stays inside the box and downward otherwise.
    """
    start = np.asarray(start, dtype=float)
    lo, hi = log_bounds[:, 0], log_bounds[:, 1]
    simplex = np.tile(start, (len(start) + 1, 1))
    for j in range(len(start)):
        step = scale * (hi[j] - lo[j])
        moved = start[j] + step if start[j] + step <= hi[j] else start[j] - step
        simplex[j + 1, j] = min(max(moved, lo[j]), hi[j])
    return simplex


def _common_scale_start(objective, log_bounds: np.ndarray) -> np.ndarray:
    """Best point on the diagonal of the log-bounds box, by a bounded 1-d search"""
    lo = log_bounds[:, 0]
    width = log_bounds[:, 1] - lo
    result = minimize_scalar(lambda s: objective(lo + s * width), bounds=(0.0, 1.0),
                             method="bounded", options={"xatol": 1e-3})
    logger.debug("Common-scale start at fraction %.4f of the log-bounds box", result.x)
    return lo + float(result.x) * width


def _local_search(
    objective, options: FitOptions, log_bounds: np.ndarray, start: np.ndarray, index: int
) -> RestartOutcome:
    trace: List[float] = []

    def record(intermediate_result):
        trace.append(float(-intermediate_result.fun))

    result = minimize(
        objective, start, method="Nelder-Mead",
        bounds=list(map(tuple, log_bounds)),
        callback=record,
        options={
            "fatol": options.tol,
            "xatol": 1e-4,
            "maxiter": options.max_iter or 200 * len(start),
            "adaptive": True,
            "initial_simplex": initial_simplex(start, log_bounds, options.simplex_scale),
        },
    )
    logger.debug("Restart %d finished at log-likelihood %.6f after %d evaluations",
                 index, -result.fun, result.nfev)
    return RestartOutcome(
        index=index,
        start=np.exp(start).tolist(),
        theta=np.exp(result.x).tolist(),
        loglik=float(-result.fun),
        n_evals=int(result.nfev),
        trace=trace,
    )


def mle_fit(X, y, nu: float = 2.5, options: Optional[FitOptions] = None,
            composition: str = "tensor") -> FittedModel:
    """
    Fit length-scales by profile maximum likelihood

    beta and sigma2 are profiled in closed form; log theta is searched with
    adaptive Nelder-Mead from n_restarts Latin-hypercube starts (plus the
    common-scale start when options.warm_start is set). The best restart
    wins, ties going to the lower restart index. If no restart beats the
    bounds-midpoint start, the midpoint fit is returned and flagged degraded.

    Args:
        X: (n, d) training inputs
        y: (n,) outputs
        nu: Matern smoothness
        options: FitOptions
        composition: 'tensor' or 'isotropic'

    Returns:
        FittedModel with spec.sigma2 = sigma2_hat and an MleReport attached
    """
    options = options or FitOptions()
    X, y = _prepare_data(X, y)
    n, d = X.shape
    if n < d + 2:
        logger.warning("Only %d training points for %d dimensions; estimates may be unreliable", n, d)

    if options.fixed_theta is not None:
        theta = np.asarray(options.fixed_theta, dtype=float)
        _, beta_hat, sigma2_hat = profile_loglik(
            X, y, nu, theta, composition, options.estimate_beta, options.known_beta
        )
        spec = KernelSpec(theta=tuple(options.fixed_theta), nu=nu, sigma2=sigma2_hat,
                          composition=composition)
        return fit_fixed(X, y, spec, beta_hat)

    check_distinct(X)
    log_bounds = np.log(_resolve_bounds(X, options, composition))
    objective = _negative_profile(X, y, nu, pair_lags(X, composition), options)
    midpoint = log_bounds.mean(axis=1)
    mid_loglik = -objective(midpoint)

    sampler = qmc.LatinHypercube(d=len(midpoint), seed=options.seed)
    starts = list(qmc.scale(sampler.random(options.n_restarts), log_bounds[:, 0], log_bounds[:, 1]))
    if options.warm_start and len(midpoint) > 1:
        starts.append(_common_scale_start(objective, log_bounds))

    def run(item):
        index, start = item
        return _local_search(objective, options, log_bounds, start, index)

    if options.workers > 1:
        with ThreadPoolExecutor(max_workers=options.workers) as pool:
            outcomes = list(pool.map(run, enumerate(starts)))
    else:
        outcomes = [run(item) for item in enumerate(starts)]

    report = MleReport(midpoint_theta=np.exp(midpoint).tolist(), midpoint_loglik=float(mid_loglik),
                       restarts=outcomes)
    best = None
    for outcome in outcomes:
        if np.isfinite(outcome.loglik) and (best is None or outcome.loglik > best.loglik):
            best = outcome

    if best is None or not best.loglik > mid_loglik:
        if not np.isfinite(mid_loglik):
            raise SingularModelError("Every length-scale candidate gave a singular covariance matrix")
        logger.warning("No restart improved on the bounds midpoint; returning a degraded fit")
        report.degraded = True
        theta = np.exp(midpoint)
    else:
        report.best_index = best.index
        theta = np.asarray(best.theta)

    _, beta_hat, sigma2_hat = profile_loglik(
        X, y, nu, theta, composition, options.estimate_beta, options.known_beta
    )
    spec = KernelSpec(theta=tuple(theta), nu=nu, sigma2=sigma2_hat, composition=composition)
    model = fit_fixed(X, y, spec, beta_hat)
    object.__setattr__(model, "mle_report", report)
    logger.info("MLE fit: theta=%s sigma2=%.4g beta=%.4g", np.round(theta, 4).tolist(),
                sigma2_hat, beta_hat)
    return model


def save_model(model: FittedModel, path) -> Path:
    """Write the model as a JSON document; the factor is not stored"""
    path = Path(path)
    path.write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
    return path


def load_model(path) -> FittedModel:
    """Read a model document and re-factorize"""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        spec = KernelSpec.from_dict(data)
        X, y, beta = data["X"], data["y"], data["beta"]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"Malformed model document {path}: {exc}") from exc
    return fit_fixed(X, y, spec, beta)
