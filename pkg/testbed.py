"""
Deterministic test functions and design generators
Zakharov, piston, borehole, Welch, Friedman and robot arm on their native
domains, unit-cube scaling, uniform and randomized Faure designs
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import comb

from errors import ConfigurationError, InputError, NumericalConsistencyError

logger = logging.getLogger(__name__)

FAURE_DIGIT_DEPTH = 12


def _zakharov(X: np.ndarray) -> np.ndarray:
    i = np.arange(1, X.shape[1] + 1)
    s = (0.5 * i * X).sum(axis=1)
    return (X ** 2).sum(axis=1) + s ** 2 + s ** 4


def _piston(X: np.ndarray) -> np.ndarray:
    M, S, V0, k, P0, Ta, T0 = X.T
    A = P0 * S + 19.62 * M - k * V0 / S
    disc = A ** 2 + 4.0 * k * P0 * V0 / T0 * Ta
    if np.any(disc <= 0):
        raise NumericalConsistencyError("Piston discriminant is not positive inside the domain")
    V = S / (2.0 * k) * (np.sqrt(disc) - A)
    return 2.0 * np.pi * np.sqrt(M / (k + S ** 2 * P0 * V0 / T0 * Ta / V ** 2))


def _borehole(X: np.ndarray) -> np.ndarray:
    rw, r, Tu, Hu, Tl, Hl, L, Kw = X.T
    log_ratio = np.log(r / rw)
    denom = log_ratio * (1.5 + 2.0 * L * Tu / (log_ratio * rw ** 2 * Kw) + Tu / Tl)
    return 2.0 * np.pi * Tu * (Hu - Hl) / denom


def _welch(X: np.ndarray) -> np.ndarray:
    x = {j + 1: X[:, j] for j in range(20)}
    return (
        5.0 * x[12] / (1.0 + x[1]) + 5.0 * (x[4] - x[20]) ** 2 + x[5] + 40.0 * x[19] ** 3 - 5.0 * x[19]
        + 0.05 * x[2] + 0.08 * x[3] - 0.03 * x[6] + 0.03 * x[7] - 0.09 * x[9] - 0.01 * x[10]
        - 0.07 * x[11] + 0.25 * x[13] ** 2 - 0.04 * x[14] + 0.06 * x[15] - 0.01 * x[17]
        - 0.03 * x[18]
    )


def _friedman(X: np.ndarray) -> np.ndarray:
    x1, x2, x3, x4, x5 = X.T
    return 10.0 * np.sin(np.pi * x1 * x2) + 20.0 * (x3 - 0.5) ** 2 + 10.0 * x4 + 5.0 * x5


def _robotarm(X: np.ndarray) -> np.ndarray:
    angles = np.cumsum(X[:, :4], axis=1)
    lengths = X[:, 4:]
    u = (lengths * np.cos(angles)).sum(axis=1)
    v = (lengths * np.sin(angles)).sum(axis=1)
    return np.sqrt(u ** 2 + v ** 2)


TEST_FUNCTIONS: Dict[str, Dict] = {
    "zakharov": {
        "dim": 2,
        "domain": None,
        "names": None,
        "func": _zakharov,
        "description": "Zakharov function on [0,1]^d",
    },
    "piston": {
        "dim": 7,
        "domain": [(30.0, 60.0), (0.005, 0.020), (0.002, 0.010), (1000.0, 5000.0),
                   (90000.0, 110000.0), (290.0, 296.0), (340.0, 360.0)],
        "names": ["M", "S", "V0", "k", "P0", "Ta", "T0"],
        "func": _piston,
        "description": "Piston cycle time in seconds",
    },
    "borehole": {
        "dim": 8,
        "domain": [(0.05, 0.15), (100.0, 50000.0), (63070.0, 115600.0), (990.0, 1110.0),
                   (63.1, 116.0), (700.0, 820.0), (1120.0, 1680.0), (9855.0, 12045.0)],
        "names": ["rw", "r", "Tu", "Hu", "Tl", "Hl", "L", "Kw"],
        "func": _borehole,
        "description": "Water flow rate through a borehole",
    },
    "welch": {
        "dim": 20,
        "domain": [(-0.5, 0.5)] * 20,
        "names": None,
        "func": _welch,
        "description": "Welch screening function on [-0.5,0.5]^20",
    },
    "friedman": {
        "dim": 5,
        "domain": [(0.0, 1.0)] * 5,
        "names": None,
        "func": _friedman,
        "description": "Friedman function on [0,1]^5",
    },
    "robotarm": {
        "dim": 8,
        "domain": [(0.0, 2.0 * math.pi)] * 4 + [(0.0, 1.0)] * 4,
        "names": ["theta1", "theta2", "theta3", "theta4", "L1", "L2", "L3", "L4"],
        "func": _robotarm,
        "description": "Distance of a four-segment robot arm end from the origin",
    },
}


@dataclass(frozen=True)
class TestFunction:
    """
    A deterministic simulator on a box domain

    func takes an (n, dim) array of native inputs and returns n values.
    """
    id: str
    dim: int
    domain: Tuple[Tuple[float, float], ...]
    func: Callable[[np.ndarray], np.ndarray]
    names: Tuple[str, ...] = ()
    description: str = ""

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.domain])

    def to_dict(self) -> Dict:
        return {
            "id": self.id,
            "dim": self.dim,
            "domain": [list(b) for b in self.domain],
            "names": list(self.names),
            "description": self.description,
        }


def list_test_functions() -> List[str]:
    return list(TEST_FUNCTIONS.keys())


def get_test_function(fn_id: str, dim: Optional[int] = None) -> TestFunction:
    """
    Look up a test function by id

    Only zakharov accepts a dimension other than its default.
    """
    if fn_id not in TEST_FUNCTIONS:
        raise ConfigurationError(
            f"Unknown test function '{fn_id}'. Available: {list_test_functions()}"
        )
    entry = TEST_FUNCTIONS[fn_id]
    d = entry["dim"] if dim is None else int(dim)
    if d != entry["dim"] and fn_id != "zakharov":
        raise ConfigurationError(f"{fn_id} has fixed dimension {entry['dim']}, got {d}")
    if d < 1:
        raise ConfigurationError(f"Dimension must be positive, got {d}")

    domain = entry["domain"] or [(0.0, 1.0)] * d
    names = entry["names"] or [f"x{j + 1}" for j in range(d)]
    return TestFunction(
        id=fn_id,
        dim=d,
        domain=tuple(tuple(b) for b in domain),
        func=entry["func"],
        names=tuple(names),
        description=entry["description"],
    )


def _as_rows(U, dim: int) -> Tuple[np.ndarray, bool]:
    U = np.asarray(U, dtype=float)
    single = U.ndim == 1
    if single:
        U = U[None, :]
    if U.ndim != 2 or U.shape[1] != dim:
        raise InputError(f"Expected points with {dim} coordinates, got shape {U.shape}")
    return U, single


def to_native(fn: TestFunction, U) -> np.ndarray:
    """Affine map from [0,1]^dim to the function's domain"""
    U, single = _as_rows(U, fn.dim)
    X = fn.lower + U * (fn.upper - fn.lower)
    return X[0] if single else X


def to_unit(fn: TestFunction, X) -> np.ndarray:
    """Inverse of to_native"""
    X, single = _as_rows(X, fn.dim)
    U = (X - fn.lower) / (fn.upper - fn.lower)
    return U[0] if single else U


def evaluate(fn: TestFunction, U):
    """
    Evaluate at unit-cube points

    Args:
        fn: test function
        U: one point (dim,) or a batch (n, dim) in [0,1]^dim

    Returns:
        float for one point, (n,) array for a batch
    """
    U, single = _as_rows(U, fn.dim)
    if not np.all(np.isfinite(U)) or np.any(U < 0.0) or np.any(U > 1.0):
        raise InputError(f"{fn.id}: inputs must lie in the unit cube")
    y = fn.func(fn.lower + U * (fn.upper - fn.lower))
    return float(y[0]) if single else y


def evaluate_native(fn: TestFunction, X):
    """Evaluate at points given in native units; no domain check"""
    X, single = _as_rows(X, fn.dim)
    y = fn.func(X)
    return float(y[0]) if single else y


def design_table(fn: TestFunction, U) -> pd.DataFrame:
    """One row per point: u_1..u_d, x_1..x_d, y"""
    U, _ = _as_rows(U, fn.dim)
    X = to_native(fn, U)
    frame = pd.DataFrame({f"u_{j + 1}": U[:, j] for j in range(fn.dim)})
    for j in range(fn.dim):
        frame[f"x_{j + 1}"] = X[:, j]
    frame["y"] = evaluate(fn, U)
    return frame


def _is_prime(b: int) -> bool:
    if b < 2:
        return False
    return all(b % p for p in range(2, int(math.isqrt(b)) + 1))


@dataclass(frozen=True)
class DesignSpec:
    """
    Point-set recipe

    - kind: 'uniform' (i.i.d.) or 'faure' (randomized Faure sequence)
    - base: prime base for faure, at least dim
    """
    kind: str
    n: int
    dim: int
    seed: int = 0
    base: int = 7

    def __post_init__(self):
        if self.kind not in ("uniform", "faure"):
            raise ConfigurationError(f"Unknown design kind '{self.kind}'. Available: ['uniform', 'faure']")
        if self.n < 1 or self.dim < 1:
            raise ConfigurationError(f"Design needs n >= 1 and dim >= 1, got n={self.n}, dim={self.dim}")
        if self.kind == "faure":
            if not _is_prime(self.base):
                raise ConfigurationError(f"Faure base must be prime, got {self.base}")
            if self.base < self.dim:
                raise ConfigurationError(
                    f"Faure base {self.base} is smaller than the dimension {self.dim}"
                )

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "n": self.n, "dim": self.dim, "seed": self.seed, "base": self.base}


def _n_digits(n: int, base: int) -> int:
    m = 1
    while base ** m < n:
        m += 1
    return m


def _faure_digits(n: int, dim: int, base: int, depth: int) -> np.ndarray:
    """
    Output digits of the first n Faure points

    Returns:
        (dim, n, depth) integer array; digit r of coordinate k of point i
    """
    m = _n_digits(n, base)
    index = np.arange(n)
    a = np.stack([(index // base ** c) % base for c in range(m)], axis=1)

    rows = np.arange(depth)[:, None]
    cols = np.arange(m)[None, :]
    binom = comb(cols, rows, exact=False).round().astype(np.int64) % base
    digits = np.empty((dim, n, depth), dtype=np.int64)
    for k in range(dim):
        power = np.where(cols >= rows, np.power(k, np.maximum(cols - rows, 0)) % base, 0)
        C = (binom * power) % base
        digits[k] = (a @ C.T) % base
    return digits


def faure_points(n: int, dim: int, base: int = 7) -> np.ndarray:
    """Unscrambled Faure sequence, first n points"""
    DesignSpec("faure", n, dim, base=base)
    m = _n_digits(n, base)
    digits = _faure_digits(n, dim, base, m)
    scale = float(base) ** -np.arange(1, m + 1)
    return (digits @ scale).T


def _scrambled_faure(spec: DesignSpec) -> np.ndarray:
    depth = max(FAURE_DIGIT_DEPTH, _n_digits(spec.n, spec.base))
    digits = _faure_digits(spec.n, spec.dim, spec.base, depth)
    rng = np.random.default_rng(spec.seed)

    # per coordinate and digit position: a digit permutation followed by a digital shift
    perms = np.argsort(rng.random((spec.dim, depth, spec.base)), axis=2)
    shifts = rng.integers(0, spec.base, size=(spec.dim, depth))
    scrambled = np.empty_like(digits)
    for k in range(spec.dim):
        for r in range(depth):
            scrambled[k, :, r] = (perms[k, r][digits[k, :, r]] + shifts[k, r]) % spec.base

    scale = float(spec.base) ** -np.arange(1, depth + 1)
    points = (scrambled @ scale).T
    points += rng.random(points.shape) * float(spec.base) ** -depth
    return np.minimum(points, np.nextafter(1.0, 0.0))


def design(spec: DesignSpec) -> np.ndarray:
    """
    n x dim design in [0,1)^dim, deterministic per seed

    uniform: i.i.d. draws; faure: base-b Faure sequence with random digit
    permutations and digital shifts per coordinate and digit position.
    """
    if spec.kind == "uniform":
        return np.random.default_rng(spec.seed).random((spec.n, spec.dim))
    return _scrambled_faure(spec)
