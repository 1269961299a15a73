"""
Theory evaluators and Monte Carlo oracles
Conditional MSPE formulas, critical thresholds, region-conditional ratio
curves, dense linear-algebra checks, and seeded samplers that verify them
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import cho_solve, solve_triangular
from scipy.stats import norm

from errors import ConfigurationError, DegenerateConditioningError, InputError
from gp_model import FittedModel, fit_fixed
from kernels import KernelSpec, cov_matrix, cross_cov
from predictors import CONDITIONING_MAX_RHO, DEFAULT_EPSILON, METHODS, predict_from_kvec

logger = logging.getLogger(__name__)

MC_METHODS = METHODS


@dataclass(frozen=True)
class TheoryPoint:
    """
    A point of the conditional-MSPE theory

    - rho: correlation measure in (0, 1]
    - z: |Y(x0) - beta| / sqrt(k00)
    - M: region threshold for Z > M
    """
    rho: float
    z: float = 0.0
    M: float = 2.0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise InputError(f"rho must lie in (0, 1], got {self.rho}")
        if self.z < 0 or self.M < 0:
            raise InputError(f"z and M must be nonnegative, got z={self.z}, M={self.M}")

    def critical_z(self) -> float:
        return critical_z(self.rho)

    def sink_wins(self) -> bool:
        """SiNK's conditional MSPE is at most Kriging's at this z"""
        return cond_mspe("sink", self.rho, self.z) <= cond_mspe("kriging", self.rho, self.z)


def _check_rho(rho: float):
    if not 0 <= rho <= 1:
        raise InputError(f"rho must lie in [0, 1], got {rho}")


def cond_mspe_weight(w: float, rho: float, z: float, k00: float = 1.0) -> float:
    """
    E[(Yhat - y0)^2 | Y(x0) = y0] for Yhat = beta + w k^T K^-1 (y - beta 1)

    k00 * (w^2 (rho^2 - rho^4) + z^2 (1 - w rho^2)^2)
    """
    _check_rho(rho)
    r2 = rho * rho
    return k00 * (w * w * (r2 - r2 * r2) + z * z * (1.0 - w * r2) ** 2)


def cond_mspe(kind: str, rho: float, z: float, k00: float = 1.0) -> float:
    """
    Conditional MSPE of Kriging or SiNK given |Y(x0) - beta| = z sqrt(k00)

    Args:
        kind: 'kriging' or 'sink'
        rho: correlation measure in [0, 1]
        z: standardized deviation, nonnegative
        k00: k(x0, x0)

    Returns:
        k00 (rho^2 - rho^4 + z^2 (1 - rho^2)^2) for Kriging,
        k00 (1 - rho^2 + z^2 (1 - rho)^2) for SiNK
    """
    _check_rho(rho)
    if z < 0 or not k00 > 0:
        raise InputError(f"Need z >= 0 and k00 > 0, got z={z}, k00={k00}")
    r2 = rho * rho
    if kind == "kriging":
        return k00 * (r2 - r2 * r2 + z * z * (1.0 - r2) ** 2)
    if kind == "sink":
        return k00 * (1.0 - r2 + z * z * (1.0 - rho) ** 2)
    raise ConfigurationError(f"Unknown kind '{kind}'. Available: ['kriging', 'sink']")


def critical_z(rho: float) -> float:
    """z above which SiNK's conditional MSPE is at most Kriging's; inf at rho = 0"""
    _check_rho(rho)
    if rho == 0:
        return math.inf
    # (1 + rho)^2 - 1 written as rho (2 + rho) to keep precision for small rho
    return math.sqrt((1.0 + rho) ** 2 / (rho * (2.0 + rho)))


def region_z2(M: float) -> float:
    """E[Z^2 | Z > M] for standard normal Z: (M phi(M) + 1 - Phi(M)) / (1 - Phi(M))"""
    if not M >= 0:
        raise InputError(f"Region threshold must be nonnegative, got {M}")
    tail = norm.sf(M)
    return float((M * norm.pdf(M) + tail) / tail)


def critical_rho_region(M: float) -> float:
    """
    rho above which SiNK's MSPE over the region |Z| > M is at most Kriging's

    -1 + sqrt(1 + (1 - Phi(M)) / (M phi(M)))
    """
    if not M > 0:
        raise InputError(f"Region threshold must be positive, got {M}")
    return float(-1.0 + math.sqrt(1.0 + norm.sf(M) / (M * norm.pdf(M))))


def region_cmspe(kind: Union[str, float], rho: float, M: float, k00: float = 1.0) -> float:
    """
    MSPE conditional on |Z| > M

    kind is 'kriging', 'sink' or a residual weight w.
    """
    if kind == "kriging":
        w = 1.0
    elif kind == "sink":
        if rho == 0:
            return k00 * (1.0 + region_z2(M))
        w = 1.0 / rho
    elif isinstance(kind, (int, float)):
        w = float(kind)
    else:
        raise ConfigurationError(f"Unknown kind '{kind}'. Available: ['kriging', 'sink'] or a weight")
    return cond_mspe_weight(w, rho, math.sqrt(region_z2(M)), k00)


def cmspe_ratio_grid(rho_grid: Sequence[float], M_grid: Sequence[float]) -> np.ndarray:
    """
    SiNK / Kriging region-conditional MSPE ratio

    Returns:
        (len(rho_grid), len(M_grid)) array; entries at rho = 1 are 1 by continuity
    """
    rho_grid = np.asarray(rho_grid, dtype=float)
    M_grid = np.asarray(M_grid, dtype=float)
    if np.any(rho_grid <= 0) or np.any(rho_grid > 1) or np.any(M_grid <= 0):
        raise InputError("Grids must satisfy 0 < rho <= 1 and M > 0")

    z2 = np.array([region_z2(M) for M in M_grid])[None, :]
    r = rho_grid[:, None]
    r2 = r * r
    sink = 1.0 - r2 + z2 * (1.0 - r) ** 2
    kriging = r2 - r2 * r2 + z2 * (1.0 - r2) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = sink / kriging
    return np.where(r == 1.0, 1.0, ratio)


def figure2_tables(rho_grid: Sequence[float], M_grid: Sequence[float]) -> Tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """
    Data behind the region-ratio and critical-threshold curves

    Returns:
        (ratio frame with rho, M, ratio, degenerate;
         critical-z frame with rho, critical_z;
         critical-rho frame with M, critical_rho)
    """
    rho_grid = np.asarray(rho_grid, dtype=float)
    M_grid = np.asarray(M_grid, dtype=float)
    ratio = cmspe_ratio_grid(rho_grid, M_grid)
    rr, mm = np.meshgrid(rho_grid, M_grid, indexing="ij")
    ratio_frame = pd.DataFrame({
        "rho": rr.ravel(),
        "M": mm.ravel(),
        "ratio": ratio.ravel(),
        "degenerate": (rr == 1.0).ravel(),
    })
    z_frame = pd.DataFrame({
        "rho": rho_grid,
        "critical_z": [critical_z(r) for r in rho_grid],
    })
    rho_frame = pd.DataFrame({
        "M": M_grid,
        "critical_rho": [critical_rho_region(M) for M in M_grid],
    })
    return ratio_frame, z_frame, rho_frame


def one_point_model(rho: float, beta: float = 0.0, y1: float = 1.0,
                    sigma2: float = 1.0) -> Tuple[FittedModel, np.ndarray]:
    """
    One-observation model whose query point has correlation rho with the datum

    Exponential kernel with theta = 1, datum at 0, query at -log(rho).
    """
    if not 0 < rho <= 1:
        raise InputError(f"rho must lie in (0, 1], got {rho}")
    spec = KernelSpec(theta=(1.0,), nu=0.5, sigma2=sigma2)
    model = fit_fixed(np.zeros((1, 1)), [y1], spec, beta)
    return model, np.array([-math.log(rho)])


def cholesky_downdate(L: np.ndarray, w: np.ndarray) -> np.ndarray:
    """
    Lower factor of L L^T - w w^T by Givens-style rotations

    Raises DegenerateConditioningError when the result is not positive definite.
    """
    L = np.array(L, dtype=float, copy=True)
    x = np.array(w, dtype=float, copy=True).ravel()
    n = L.shape[0]
    if L.shape != (n, n) or x.shape[0] != n:
        raise InputError(f"Factor {L.shape} and vector {x.shape} do not match")

    for k in range(n):
        r2 = L[k, k] ** 2 - x[k] ** 2
        if r2 <= 0:
            raise DegenerateConditioningError(
                f"Rank-one downdate lost positive definiteness at pivot {k}"
            )
        r = math.sqrt(r2)
        c = r / L[k, k]
        s = x[k] / L[k, k]
        L[k, k] = r
        if k + 1 < n:
            L[k + 1:, k] = (L[k + 1:, k] - s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]
    return L


def _query(model: FittedModel, x0) -> Tuple[np.ndarray, float]:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.dim,):
        raise InputError(f"Query point must have {model.dim} coordinates, got shape {x0.shape}")
    return cross_cov(model.spec, model.X, x0[None, :])[:, 0], model.spec.sigma2


def conditional_factor(model: FittedModel, x0) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """
    Factor of K - k k^T / k00, the covariance of y given Y(x0)

    Returns:
        (lower factor, k, k00, rho)
    """
    k, k00 = _query(model, x0)
    rho = predict_from_kvec(model, k, k00, epsilon=0.0).rho
    if rho >= CONDITIONING_MAX_RHO:
        raise DegenerateConditioningError(f"rho = {rho:.12g} leaves the conditional covariance singular")
    return cholesky_downdate(model.chol, k / math.sqrt(k00)), k, k00, rho


def _dense_K(model: FittedModel) -> np.ndarray:
    return cov_matrix(model.spec, model.X) + model.jitter_used * np.eye(model.n)


def woodbury_row_dense(model: FittedModel, x0) -> np.ndarray:
    """k^T (K - k k^T / k00)^-1 by a dense solve; oracle for the Woodbury shortcut"""
    k, k00 = _query(model, x0)
    K_cond = _dense_K(model) - np.outer(k, k) / k00
    return np.linalg.solve(K_cond, k)


def cbpk_lambda_dense(model: FittedModel, x0, delta: float) -> np.ndarray:
    """Minimizer of cbpk_objective from (K + (delta/k00) k k^T) lambda = (1 + delta) k"""
    k, k00 = _query(model, x0)
    A = _dense_K(model) + (delta / k00) * np.outer(k, k)
    return np.linalg.solve(A, (1.0 + delta) * k)


def cbpk_objective(model: FittedModel, x0, lam, delta: float) -> float:
    """
    MSPE plus delta times the expected squared conditional bias of the
    linear predictor beta + lam^T (y - beta 1)
    """
    k, k00 = _query(model, x0)
    lam = np.asarray(lam, dtype=float)
    mspe = float(lam @ _dense_K(model) @ lam - 2.0 * lam @ k + k00)
    bias2 = k00 * (float(lam @ k) / k00 - 1.0) ** 2
    return mspe + delta * bias2


@dataclass(frozen=True, eq=False)
class McConfig:
    """
    Monte Carlo settings

    - model: fitted model whose kernel and beta define the Gaussian law
    - queries: (m, d) query points
    - n_draws: draws per query
    - seed: root of the SeedSequence tree; chunks get spawned children
    - chunk_size: draws per chunk; results do not depend on workers
    """
    model: FittedModel
    queries: np.ndarray
    n_draws: int = 100_000
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    cbpk_delta: float = 1.0
    chunk_size: int = 50_000
    workers: int = 1

    def __post_init__(self):
        queries = np.atleast_2d(np.asarray(self.queries, dtype=float))
        if queries.shape[1] != self.model.dim:
            raise InputError(f"Queries must have {self.model.dim} columns, got {queries.shape}")
        object.__setattr__(self, "queries", queries)
        if self.n_draws < 2:
            raise ConfigurationError(f"n_draws must be at least 2, got {self.n_draws}")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigurationError("chunk_size and workers must be positive")
        if self.n_draws < 10_000:
            logger.debug("Monte Carlo with only %d draws per query", self.n_draws)


def _chunk_sizes(n_draws: int, chunk_size: int) -> List[int]:
    full, rest = divmod(n_draws, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _accumulate(seq: np.random.SeedSequence, cfg: McConfig,
                draw: Callable[[np.random.Generator, int], np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Run draw() over seeded chunks and reduce in chunk order

    draw returns an (size, p) array of per-draw quantities.

    Returns:
        (means, standard errors), each of length p
    """
    sizes = _chunk_sizes(cfg.n_draws, cfg.chunk_size)
    children = seq.spawn(len(sizes))

    def run(item):
        child, size = item
        values = draw(np.random.default_rng(child), size)
        return values.sum(axis=0), (values * values).sum(axis=0)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(run, zip(children, sizes)))
    else:
        parts = [run(item) for item in zip(children, sizes)]

    total = np.zeros_like(parts[0][0])
    total_sq = np.zeros_like(parts[0][1])
    for part_sum, part_sq in parts:
        total += part_sum
        total_sq += part_sq

    N = cfg.n_draws
    mean = total / N
    var = np.maximum(total_sq / N - mean * mean, 0.0) * N / (N - 1)
    return mean, np.sqrt(var / N)


def _predict_residuals(beta: float, weights: Dict[str, float], t: np.ndarray) -> np.ndarray:
    """(size, methods) predictions beta + w t; an infinite weight means the prediction is beta"""
    cols = []
    for method in MC_METHODS:
        w = weights[method]
        if math.isinf(w):
            cols.append(np.full_like(t, beta))
        else:
            cols.append(beta + w * t)
    return np.column_stack(cols)


def mc_joint_mspe(cfg: McConfig) -> pd.DataFrame:
    """
    Unconditional MSPE of Kriging and SiNK by joint simulation of (Y(x0), y)

    y = beta 1 + L z and Y(x0) = beta + v^T z + s e with v = L^-1 k; the
    Kriging residual is recomputed from y through the model factor.

    Returns:
        One row per query: rho, var_kriging, mspe_kriging, mspe_sink, their
        standard errors, ratio and ratio_theory = 2/(1+rho)
    """
    model = cfg.model
    rows = []
    query_seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.queries))
    for q, (x0, seq) in enumerate(zip(cfg.queries, query_seeds)):
        k, k00 = _query(model, x0)
        bundle = predict_from_kvec(model, k, k00, epsilon=cfg.epsilon, cbpk_delta=cfg.cbpk_delta)
        v = solve_triangular(model.chol, k, lower=True, check_finite=False)
        s = math.sqrt(bundle.var_kriging)
        w_sink = bundle.weights["sink"]

        def draw(rng, size, k=k, v=v, s=s, w_sink=w_sink):
            Z = rng.standard_normal((size, model.n))
            e = rng.standard_normal(size)
            Y = model.chol @ Z.T
            t = k @ cho_solve(model.factor, Y, check_finite=False)
            target = Z @ v + s * e
            err_k = t - target
            err_s = (-target if math.isinf(w_sink) else w_sink * t - target)
            return np.column_stack([err_k ** 2, err_s ** 2])

        mean, se = _accumulate(seq, cfg, draw)
        rows.append({
            "query": q,
            "rho": bundle.rho,
            "var_kriging": bundle.var_kriging,
            "mspe_kriging": mean[0],
            "mspe_kriging_se": se[0],
            "mspe_sink": mean[1],
            "mspe_sink_se": se[1],
            "ratio": mean[1] / mean[0] if mean[0] > 0 else math.nan,
            "ratio_theory": 2.0 / (1.0 + bundle.rho),
            "n_draws": cfg.n_draws,
        })
        logger.debug("Joint MC query %d: rho=%.4f ratio=%.4f", q, bundle.rho, rows[-1]["ratio"])
    return pd.DataFrame(rows)


def _truncated_normal_tail(rng: np.random.Generator, M: float, size: int) -> np.ndarray:
    """|Z| given |Z| > M, by inverse-CDF of the upper tail, with a random sign"""
    u = 1.0 - rng.random(size)
    z = norm.isf(u * norm.sf(M))
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * z


def mc_conditional(cfg: McConfig, y0: Optional[Union[float, Sequence[float]]] = None,
                   M: Optional[float] = None) -> pd.DataFrame:
    """
    Conditional bias and MSPE by sampling y given the target value

    Exactly one of y0 (fixed target value, scalar or one per query) and M
    (target drawn from the normal tail |Z| > M) is given. y is drawn from
    N(beta 1 + k u, K - k k^T / k00) with u = (y0 - beta)/k00 through the
    downdated factor.

    Returns:
        One row per query with, for every method, the estimated conditional
        mean, bias, MSPE and its standard error next to the closed forms,
        plus the paired SiNK - Kriging squared-error difference
    """
    if (y0 is None) == (M is None):
        raise ConfigurationError("Give exactly one of y0 and M")
    if M is not None and not M > 0:
        raise ConfigurationError(f"Region threshold must be positive, got {M}")

    model = cfg.model
    m = len(cfg.queries)
    if y0 is not None:
        targets = np.broadcast_to(np.asarray(y0, dtype=float), (m,))

    n_methods = len(MC_METHODS)
    rows = []
    query_seeds = np.random.SeedSequence(cfg.seed).spawn(m)
    for q, (x0, seq) in enumerate(zip(cfg.queries, query_seeds)):
        L_cond, k, k00, rho = conditional_factor(model, x0)
        weights = predict_from_kvec(model, k, k00, epsilon=cfg.epsilon,
                                    cbpk_delta=cfg.cbpk_delta).weights
        active = {name: (w if np.isfinite(w) or math.isinf(w) else 0.0) for name, w in weights.items()}
        target = None if y0 is None else float(targets[q])

        def draw(rng, size, k=k, k00=k00, L_cond=L_cond, active=active, target=target):
            if target is None:
                dev = _truncated_normal_tail(rng, M, size) * math.sqrt(k00)
            else:
                dev = np.full(size, target - model.beta)
            Z = rng.standard_normal((size, model.n))
            Y = np.outer(k, dev / k00) + L_cond @ Z.T
            t = k @ cho_solve(model.factor, Y, check_finite=False)
            err = _predict_residuals(model.beta, active, t) - (model.beta + dev)[:, None]
            sq = err * err
            return np.column_stack([err, sq, sq[:, -1] - sq[:, 0]])

        mean, se = _accumulate(seq, cfg, draw)
        row = {
            "query": q,
            "rho": rho,
            "k00": k00,
            "y0": math.nan if target is None else target,
            "M": math.nan if M is None else float(M),
        }
        z = None if target is None else abs(target - model.beta) / math.sqrt(k00)
        for j, method in enumerate(MC_METHODS):
            w = weights[method]
            failed = not (np.isfinite(w) or math.isinf(w))
            bias = math.nan if failed else float(mean[j])
            row[f"bias_{method}"] = bias
            row[f"mean_{method}"] = math.nan if target is None else target + bias
            row[f"cmspe_{method}"] = math.nan if failed else float(mean[n_methods + j])
            row[f"cmspe_se_{method}"] = math.nan if failed else float(se[n_methods + j])
            if failed or math.isinf(w):
                row[f"cmspe_theory_{method}"] = math.nan
                row[f"mean_theory_{method}"] = math.nan
            elif target is None:
                row[f"cmspe_theory_{method}"] = region_cmspe(float(w), rho, M, k00)
                row[f"mean_theory_{method}"] = math.nan
            else:
                row[f"cmspe_theory_{method}"] = cond_mspe_weight(w, rho, z, k00)
                row[f"mean_theory_{method}"] = model.beta + w * rho * rho * (target - model.beta)
        row["diff_sink_kriging"] = float(mean[-1])
        row["diff_sink_kriging_se"] = float(se[-1])
        row["n_draws"] = cfg.n_draws
        rows.append(row)
        logger.debug("Conditional MC query %d: rho=%.4f diff=%.4g", q, rho, row["diff_sink_kriging"])
    return pd.DataFrame(rows)
