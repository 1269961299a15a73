"""
Stationary Matern covariance kernels
Tensor-product and isotropic composition, covariance matrix/vector assembly
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from errors import ConfigurationError, InputError

logger = logging.getLogger(__name__)

SUPPORTED_NU = (0.5, 1.5, 2.5)
COMPOSITIONS = ("tensor", "isotropic")


def _check_nu(nu: float) -> float:
    nu = float(nu)
    if nu not in SUPPORTED_NU:
        raise ConfigurationError(
            f"Unsupported Matern smoothness nu={nu}. Available: {list(SUPPORTED_NU)}"
        )
    return nu


@dataclass(frozen=True)
class KernelSpec:
    """
    Covariance sigma2 * C(h) with Matern correlation C

    Attributes:
    - nu: smoothness, one of 1/2, 3/2, 5/2
    - theta: length-scales, one per input dimension (tensor) or a single one (isotropic)
    - sigma2: stationary variance k(x, x)
    - composition: 'tensor' (product of 1-d kernels) or 'isotropic' (Euclidean distance)
    """
    theta: Tuple[float, ...]
    nu: float = 2.5
    sigma2: float = 1.0
    composition: str = "tensor"

    def __post_init__(self):
        object.__setattr__(self, "nu", _check_nu(self.nu))
        theta = tuple(float(t) for t in np.atleast_1d(np.asarray(self.theta, dtype=float)))
        object.__setattr__(self, "theta", theta)

        if self.composition not in COMPOSITIONS:
            raise ConfigurationError(
                f"Unknown composition '{self.composition}'. Available: {list(COMPOSITIONS)}"
            )
        if not theta or not all(np.isfinite(t) and t > 0 for t in theta):
            raise ConfigurationError(f"Length-scales must be positive and finite, got {theta}")
        if self.composition == "isotropic" and len(theta) != 1:
            raise ConfigurationError(
                f"Isotropic kernels take a single length-scale, got {len(theta)}"
            )
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ConfigurationError(f"Stationary variance must be positive, got {self.sigma2}")
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def dim(self) -> int:
        """Input dimension for tensor kernels; 0 when any dimension is accepted"""
        return len(self.theta) if self.composition == "tensor" else 0

    def with_theta(self, theta: Sequence[float]) -> "KernelSpec":
        return replace(self, theta=tuple(theta))

    def with_sigma2(self, sigma2: float) -> "KernelSpec":
        return replace(self, sigma2=sigma2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nu": self.nu,
            "theta": list(self.theta),
            "sigma2": self.sigma2,
            "composition": self.composition,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KernelSpec":
        return cls(
            theta=tuple(data["theta"]),
            nu=data.get("nu", 2.5),
            sigma2=data.get("sigma2", 1.0),
            composition=data.get("composition", "tensor"),
        )


def matern_corr(nu: float, t):
    """
    Matern correlation C_1(t) at scaled distance t = d / theta

    Closed polynomial-exponential forms; the argument convention is
    sqrt(2 nu) * d / theta inside the exponential.

    Args:
        nu: smoothness, one of 1/2, 3/2, 5/2
        t: nonnegative scaled distance, scalar or array

    Returns:
        Correlation with the shape of t, 1 at t = 0
    """
    nu = _check_nu(nu)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("Scaled distance must be nonnegative")

    if nu == 0.5:
        out = np.exp(-t)
    elif nu == 1.5:
        s = np.sqrt(3.0) * t
        out = (1.0 + s) * np.exp(-s)
    else:
        s = np.sqrt(5.0) * t
        out = (1.0 + s + s * s / 3.0) * np.exp(-s)

    return out if out.ndim else float(out)


def _as_points(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InputError(f"{name} must be a 2-d array of points, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError(f"{name} contains non-finite coordinates")
    return X


def _check_dims(spec: KernelSpec, d: int):
    if spec.composition == "tensor" and d != len(spec.theta):
        raise InputError(
            f"Point dimension {d} does not match {len(spec.theta)} length-scales"
        )


def cross_cov(spec: KernelSpec, X, Y) -> np.ndarray:
    """
    Covariance between two point sets

    Args:
        spec: kernel specification
        X: (n, d) points
        Y: (m, d) points

    Returns:
        (n, m) matrix with entries cov(X[i], Y[j])
    """
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"Dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    _check_dims(spec, X.shape[1])

    if spec.composition == "isotropic":
        dist = cdist(X, Y, metric="euclidean")
        return spec.sigma2 * matern_corr(spec.nu, dist / spec.theta[0])

    corr = np.ones((X.shape[0], Y.shape[0]))
    for j, theta_j in enumerate(spec.theta):
        h = np.abs(X[:, j][:, None] - Y[:, j][None, :])
        corr *= matern_corr(spec.nu, h / theta_j)
    return spec.sigma2 * corr


def pair_lags(X, composition: str = "tensor") -> np.ndarray:
    """
    Unscaled lags of every pair i < j of a design, in condensed order

    Returns:
        (d, n(n-1)/2) per-coordinate |x_i - x_j| for tensor, or a single row
        of Euclidean distances for isotropic
    """
    X = _as_points(X)
    if composition == "isotropic":
        return pdist(X, metric="euclidean")[None, :]
    return np.stack([pdist(X[:, [j]], metric="cityblock") for j in range(X.shape[1])])


def corr_from_lags(nu: float, theta: Sequence[float], lags: np.ndarray) -> np.ndarray:
    """Condensed correlations from pair_lags; one length-scale per lag row"""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (lags.shape[0],):
        raise InputError(f"Expected {lags.shape[0]} length-scales, got {theta.shape}")
    corr = np.ones(lags.shape[1])
    for lag, theta_j in zip(lags, theta):
        corr *= matern_corr(nu, lag / theta_j)
    return corr


def cov(spec: KernelSpec, x, y) -> float:
    """Covariance between two single points"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"Points must be 1-d with equal length, got {x.shape} and {y.shape}")
    return float(cross_cov(spec, x[None, :], y[None, :])[0, 0])


def cov_matrix(spec: KernelSpec, X) -> np.ndarray:
    """
    Symmetric covariance matrix K of a design

    Duplicate rows are allowed here; the factorization layer deals with the
    resulting singularity.
    """
    X = _as_points(X)
    K = cross_cov(spec, X, X)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, spec.sigma2)
    return K


def cov_vector(spec: KernelSpec, X, x0) -> np.ndarray:
    """Covariance vector k(x0) between a design and one query point"""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.ndim != 1:
        raise InputError(f"Query point must be 1-d, got shape {x0.shape}")
    return cross_cov(spec, X, x0[None, :])[:, 0]


def coordinate_range(X) -> np.ndarray:
    """Per-dimension span of a design; used for default length-scale bounds"""
    X = _as_points(X)
    return np.ptp(X, axis=0)
