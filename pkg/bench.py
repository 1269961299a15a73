"""
Benchmark experiment runner
Builds designs, fits models, scores every predictor by EISE, R^2 and
extreme-value metrics, and assembles deterministic JSON/CSV reports
"""

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError

from errors import ConfigurationError, InputError, SinkError, UndefinedRSquaredError
from gp_model import FitOptions, FittedModel, factorize, fit_fixed, mle_fit
from kernels import COMPOSITIONS, SUPPORTED_NU, KernelSpec, cov_matrix, cross_cov
from pdf_export import generate_benchmark_pdf, get_pdf_filename
from predictors import DEFAULT_EPSILON, predict_batch
from presets import get_preset, get_table
from testbed import TEST_FUNCTIONS, DesignSpec, design, evaluate, get_test_function

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCORED_METHODS = ("kriging", "limit", "sink", "cbpk")
COMPARED_METHODS = ("limit", "sink", "cbpk")


@dataclass(frozen=True)
class DesignConfig:
    kind: str = "uniform"
    n: int = 100
    base: int = 7

    def spec(self, dim: int, seed: int) -> DesignSpec:
        return DesignSpec(kind=self.kind, n=self.n, dim=dim, seed=seed, base=self.base)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One benchmark protocol

    function is a test-function id or 'gp' for draws from a known Gaussian
    process (dim, theta, sigma2, beta give the truth). fit is 'mle' or
    'fixed'; fixed uses theta (and, in gp mode, the true sigma2 and beta).
    max_iter and warm_start tune the MLE search for high-dimensional inputs.
    """
    name: str
    function: str
    train: DesignConfig
    test: DesignConfig
    dim: Optional[int] = None
    theta: Optional[Tuple[float, ...]] = None
    sigma2: float = 1.0
    beta: float = 0.0
    nu: float = 2.5
    composition: str = "tensor"
    fit: str = "mle"
    n_restarts: int = 10
    max_iter: Optional[int] = None
    warm_start: bool = False
    test_equals_train: bool = False
    epsilon: float = DEFAULT_EPSILON
    threshold_m: float = 2.0
    cbpk_delta: float = 1.0
    replications: int = 20
    seed: int = 0
    workers: int = 1
    slow: bool = False
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"Unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}"
            )
        if self.function != "gp" and self.function not in TEST_FUNCTIONS:
            raise ConfigurationError(
                f"Unknown function '{self.function}'. Available: {['gp'] + list(TEST_FUNCTIONS)}"
            )
        if self.fit not in ("mle", "fixed"):
            raise ConfigurationError(f"Unknown fit mode '{self.fit}'. Available: ['mle', 'fixed']")
        if float(self.nu) not in SUPPORTED_NU:
            raise ConfigurationError(f"Unsupported Matern smoothness nu={self.nu}. Available: {list(SUPPORTED_NU)}")
        if self.composition not in COMPOSITIONS:
            raise ConfigurationError(f"Unknown composition '{self.composition}'. Available: {list(COMPOSITIONS)}")
        if self.replications < 1:
            raise ConfigurationError(f"replications must be at least 1, got {self.replications}")
        if not self.threshold_m > 0:
            raise ConfigurationError(f"threshold_m must be positive, got {self.threshold_m}")
        if self.train.n < 2:
            raise ConfigurationError(f"Need at least 2 training points, got {self.train.n}")
        if not 0 <= self.epsilon < 1:
            raise ConfigurationError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.cbpk_delta < 0:
            raise ConfigurationError(f"cbpk_delta must be nonnegative, got {self.cbpk_delta}")
        if self.workers < 1 or self.n_restarts < 1:
            raise ConfigurationError("workers and n_restarts must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be at least 1, got {self.max_iter}")

        if self.theta is not None:
            object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if self.function == "gp":
            if self.dim is None or self.theta is None:
                raise ConfigurationError("Gaussian process experiments need dim and theta")
        elif self.fit == "fixed" and self.theta is None:
            raise ConfigurationError("fit='fixed' needs theta")

        dim = self.input_dim
        if self.theta is not None:
            KernelSpec(theta=self.theta, nu=self.nu, sigma2=self.sigma2, composition=self.composition)
            if self.composition == "tensor" and len(self.theta) != dim:
                raise ConfigurationError(f"theta has {len(self.theta)} entries for dimension {dim}")
        for part in (self.train, self.test):
            part.spec(dim, 0)

    @property
    def input_dim(self) -> int:
        if self.function == "gp":
            return int(self.dim)
        return get_test_function(self.function, self.dim).dim

    def truth_spec(self) -> KernelSpec:
        return KernelSpec(theta=self.theta, nu=self.nu, sigma2=self.sigma2, composition=self.composition)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Replace fields, ignoring overrides that are None"""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["theta"] = list(self.theta) if self.theta is not None else None
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Build from a configuration document

        A 'preset' key starts from that named preset; the other keys override it.
        """
        data = dict(data)
        if "preset" in data:
            base = get_preset(data.pop("preset"))
            base.update(data)
            data = base

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {unknown}")
        try:
            for part in ("train", "test"):
                if isinstance(data.get(part), dict):
                    data[part] = DesignConfig(**data[part])
            if "name" not in data:
                data["name"] = data.get("function", "experiment")
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(f"Malformed configuration: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigurationError(f"Configuration file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"Configuration {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"Configuration {path} must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ExperimentConfig":
        return cls.from_dict(get_preset(name)).with_overrides(**overrides)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class BenchReport:
    """
    Outcome of one experiment

    points holds the raw per-point predictions of every replication and is
    written as the companion CSV, not into the JSON document.
    """
    name: str
    config: Dict[str, Any]
    replications: List[Dict[str, Any]] = field(default_factory=list)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    blup_calibration: Optional[Dict[str, Any]] = None
    points: Optional[pd.DataFrame] = None
    schema_version: int = SCHEMA_VERSION

    @property
    def n_succeeded(self) -> int:
        return len(self.replications)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "config": self.config,
            "replications": self.replications,
            "failures": self.failures,
            "summary": self.summary,
            "blup_calibration": self.blup_calibration,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True, allow_nan=False)


def eise(predictions, truths) -> float:
    """Empirical integrated squared error, the mean of squared test errors"""
    predictions = np.asarray(predictions, dtype=float).ravel()
    truths = np.asarray(truths, dtype=float).ravel()
    if predictions.shape != truths.shape:
        raise InputError(f"{predictions.shape[0]} predictions but {truths.shape[0]} truths")
    if truths.shape[0] < 1:
        raise InputError("EISE needs at least one test point")
    return float(np.mean((predictions - truths) ** 2))


def r_squared(predictions, truths) -> float:
    """1 - EISE / population variance of the test truths"""
    truths = np.asarray(truths, dtype=float).ravel()
    error = eise(predictions, truths)
    variance = float(np.var(truths))
    if truths.shape[0] < 2 or variance == 0.0:
        raise UndefinedRSquaredError("R^2 is undefined for test truths with zero variance")
    return 1.0 - error / variance


def extreme_subset(truths, beta_hat: float, sigma2_hat: float, M: float = 2.0) -> np.ndarray:
    """Indices j with |y_j - beta_hat| / sigma_hat > M (strict)"""
    if not sigma2_hat > 0:
        raise InputError(f"sigma2_hat must be positive, got {sigma2_hat}")
    truths = np.asarray(truths, dtype=float).ravel()
    z = np.abs(truths - beta_hat) / math.sqrt(sigma2_hat)
    return np.flatnonzero(z > M)


def _safe_ratio(num: float, den: float) -> float:
    if not (math.isfinite(num) and math.isfinite(den)) or den == 0.0:
        return math.nan
    return num / den


def summarize_replication(predictions: pd.DataFrame, truths, beta_hat: float,
                          sigma2_hat: float, M: float = 2.0) -> Dict[str, Any]:
    """
    Score one replication

    Args:
        predictions: predict_batch output for the test points
        truths: test values
        beta_hat, sigma2_hat: fitted mean and variance used for z-scores
        M: extreme threshold

    Returns:
        Dict with eise, r2, ratio_overall, eise_extreme, ratio_extreme,
        extreme_size, nan_extreme and mean_var_kriging
    """
    truths = np.asarray(truths, dtype=float).ravel()
    scores: Dict[str, Dict[str, float]] = {"eise": {}, "r2": {}, "eise_extreme": {}}
    idx = extreme_subset(truths, beta_hat, sigma2_hat, M)

    for method in SCORED_METHODS:
        values = predictions[method].to_numpy()
        if np.all(np.isfinite(values)):
            scores["eise"][method] = eise(values, truths)
            scores["r2"][method] = r_squared(values, truths)
            scores["eise_extreme"][method] = eise(values[idx], truths[idx]) if idx.size else math.nan
        else:
            scores["eise"][method] = scores["r2"][method] = scores["eise_extreme"][method] = math.nan

    base, base_extreme = scores["eise"]["kriging"], scores["eise_extreme"]["kriging"]
    return {
        **scores,
        "ratio_overall": {
            f"{m}_over_kriging": _safe_ratio(scores["eise"][m], base) for m in COMPARED_METHODS
        },
        "ratio_extreme": {
            f"{m}_over_kriging": _safe_ratio(scores["eise_extreme"][m], base_extreme) for m in COMPARED_METHODS
        },
        "extreme_size": int(idx.size),
        "nan_extreme": bool(idx.size == 0),
        "mean_var_kriging": float(predictions["var_kriging"].mean()),
    }


def _int_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def _sample_data(cfg: ExperimentConfig, seq: np.random.SeedSequence):
    s_train, s_test, s_field, s_fit = seq.spawn(4)
    dim = cfg.input_dim
    U_train = design(cfg.train.spec(dim, _int_seed(s_train)))
    U_test = U_train.copy() if cfg.test_equals_train else design(cfg.test.spec(dim, _int_seed(s_test)))

    if cfg.function == "gp":
        # train and test values come from one joint draw of the field
        spec = cfg.truth_spec()
        points = U_train if cfg.test_equals_train else np.vstack([U_train, U_test])
        L, _ = factorize(cov_matrix(spec, points), spec.sigma2, points)
        values = cfg.beta + L @ np.random.default_rng(s_field).standard_normal(points.shape[0])
        y_train = values[:U_train.shape[0]]
        y_test = y_train.copy() if cfg.test_equals_train else values[U_train.shape[0]:]
    else:
        fn = get_test_function(cfg.function, cfg.dim)
        y_train = evaluate(fn, U_train)
        y_test = evaluate(fn, U_test)
    return U_train, y_train, U_test, y_test, _int_seed(s_fit)


def _fit(cfg: ExperimentConfig, X: np.ndarray, y: np.ndarray, seed: int) -> FittedModel:
    if cfg.fit == "mle":
        options = FitOptions(n_restarts=cfg.n_restarts, seed=seed, max_iter=cfg.max_iter,
                             warm_start=cfg.warm_start)
        return mle_fit(X, y, cfg.nu, options, cfg.composition)
    if cfg.function == "gp":
        return fit_fixed(X, y, cfg.truth_spec(), cfg.beta)
    return mle_fit(X, y, cfg.nu, FitOptions(fixed_theta=cfg.theta), cfg.composition)


def _run_replication(cfg: ExperimentConfig, r: int, seq: np.random.SeedSequence):
    started = time.perf_counter()
    X, y, X_test, y_test, fit_seed = _sample_data(cfg, seq)
    model = _fit(cfg, X, y, fit_seed)
    frame = predict_batch(model, X_test, epsilon=cfg.epsilon, cbpk_delta=cfg.cbpk_delta)

    scores = summarize_replication(frame, y_test, model.beta, model.spec.sigma2, cfg.threshold_m)
    record = {
        "replication": r,
        "theta_hat": list(model.spec.theta),
        "sigma2_hat": model.spec.sigma2,
        "beta_hat": model.beta,
        "jitter_used": model.jitter_used,
        "degraded": bool(model.mle_report.degraded) if model.mle_report else False,
        "n_cmle_failed": int(frame["cmle_failed"].sum()),
        "n_limit_failed": int(frame["limit_failed"].sum()),
        "n_epsilon_clipped": int(frame["epsilon_clipped"].sum()),
        **scores,
    }

    extreme = np.zeros(len(y_test), dtype=bool)
    extreme[extreme_subset(y_test, model.beta, model.spec.sigma2, cfg.threshold_m)] = True
    points = pd.DataFrame({
        "replication": r,
        "point": np.arange(len(y_test)),
        "y": y_test,
        **{m: frame[m].to_numpy() for m in SCORED_METHODS},
        "rho": frame["rho"].to_numpy(),
        "var_kriging": frame["var_kriging"].to_numpy(),
        "extreme": extreme,
    })
    logger.info("%s replication %d done in %.2fs: SiNK/OK EISE ratio %.4f",
                cfg.name, r, time.perf_counter() - started,
                record["ratio_overall"]["sink_over_kriging"])
    return record, points


def _describe(values: Sequence[float]) -> Dict[str, Any]:
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return {"median": math.nan, "mean": math.nan, "q25": math.nan, "q75": math.nan,
                "iqr": math.nan, "n": 0, "n_nan": int(values.size)}
    q25, median, q75 = np.percentile(finite, [25, 50, 75])
    return {
        "median": float(median),
        "mean": float(finite.mean()),
        "q25": float(q25),
        "q75": float(q75),
        "iqr": float(q75 - q25),
        "n": int(finite.size),
        "n_nan": int(values.size - finite.size),
    }


def _summarize(records: List[Dict[str, Any]]) -> Dict[str, Any]:
    summary: Dict[str, Any] = {}
    for group in ("r2", "eise", "ratio_overall", "ratio_extreme"):
        keys = records[0][group].keys()
        summary[group] = {k: _describe([rec[group][k] for rec in records]) for k in keys}
    summary["extreme_size"] = _describe([rec["extreme_size"] for rec in records])
    summary["nan_extreme_count"] = sum(rec["nan_extreme"] for rec in records)

    extreme = np.array([rec["ratio_extreme"]["sink_over_kriging"] for rec in records], dtype=float)
    summary["extreme_sink_better_fraction"] = float(np.mean(extreme < 1.0))
    summary["degraded_fits"] = sum(rec["degraded"] for rec in records)
    return summary


def blup_calibration(records: List[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Mean squared Kriging error against mean Kriging variance

    The standard error comes from the spread of the per-replication
    differences, which are independent across replications.
    """
    errors = np.array([rec["eise"]["kriging"] for rec in records])
    variances = np.array([rec["mean_var_kriging"] for rec in records])
    diffs = errors - variances
    se = float(np.std(diffs, ddof=1) / math.sqrt(len(diffs))) if len(diffs) > 1 else math.nan
    z = float(diffs.mean() / se) if se and math.isfinite(se) else math.nan
    return {
        "mean_squared_error": float(errors.mean()),
        "mean_var_kriging": float(variances.mean()),
        "standard_error": se,
        "z": z,
        "within_3se": bool(math.isfinite(z) and abs(z) <= 3.0),
    }


def run_experiment(cfg: ExperimentConfig) -> BenchReport:
    """
    Run every replication of an experiment

    Replication r draws its designs, field values and optimizer starts from
    the r-th child of SeedSequence(seed), so results do not depend on
    workers. Failed replications are recorded with their error and left out
    of the summary.
    """
    logger.info("Running %s: %d replications, %d train / %d test points",
                cfg.name, cfg.replications, cfg.train.n, cfg.test.n)
    started = time.perf_counter()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)

    def run(item):
        r, seq = item
        try:
            return r, _run_replication(cfg, r, seq), None
        except (SinkError, LinAlgError) as exc:
            logger.error("%s replication %d failed: %s: %s", cfg.name, r, type(exc).__name__, exc)
            return r, None, {"replication": r, "error": type(exc).__name__, "message": str(exc)}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run, enumerate(seeds)))
    else:
        outcomes = [run(item) for item in enumerate(seeds)]

    report = BenchReport(name=cfg.name, config=cfg.to_dict())
    frames = []
    for _, result, failure in outcomes:
        if failure is not None:
            report.failures.append(failure)
            continue
        record, points = result
        report.replications.append(record)
        frames.append(points)

    if report.replications:
        report.summary = _summarize(report.replications)
        report.points = pd.concat(frames, ignore_index=True)
        if cfg.function == "gp" and cfg.fit == "fixed":
            report.blup_calibration = blup_calibration(report.replications)
    logger.info("%s finished in %.1fs (%d ok, %d failed)", cfg.name,
                time.perf_counter() - started, report.n_succeeded, len(report.failures))
    return report


def write_report(report: BenchReport, out_dir) -> Tuple[Path, Optional[Path]]:
    """<name>.json plus <name>_points.csv with the raw per-point predictions"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{report.name}.json"
    json_path.write_text(report.to_json() + "\n", encoding="utf-8")
    csv_path = None
    if report.points is not None:
        csv_path = out_dir / f"{report.name}_points.csv"
        report.points.to_csv(csv_path, index=False)
    logger.info("Wrote %s", json_path)
    return json_path, csv_path


def grid_predictions(function: str = "zakharov", design_points: Optional[Sequence[Sequence[float]]] = None,
                     thetas: Sequence[float] = (1.0, 0.05), nu: float = 2.5, grid: int = 41,
                     epsilon: float = 0.0) -> pd.DataFrame:
    """
    Kriging and SiNK over a regular grid for a fixed common length-scale

    Defaults reproduce the four edge-midpoint design on the unit square.
    nearest_index is the design point with the largest covariance to the
    grid point; dominance is the second-largest covariance over the largest.

    Returns:
        DataFrame with theta, u_1, u_2, truth, kriging, sink, limit, rho,
        beta_hat, nearest_index, nearest_value, dominance, is_design
    """
    fn = get_test_function(function, 2)
    if design_points is None:
        design_points = [[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]]
    X = np.asarray(design_points, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise InputError(f"Grid designs must be (n, 2), got shape {X.shape}")
    if grid < 2:
        raise ConfigurationError(f"grid must be at least 2, got {grid}")
    y = evaluate(fn, X)

    axis = np.linspace(0.0, 1.0, grid)
    uu, vv = np.meshgrid(axis, axis, indexing="ij")
    G = np.column_stack([uu.ravel(), vv.ravel()])
    truth = evaluate(fn, G)
    is_design = (np.abs(G[:, None, :] - X[None, :, :]).max(axis=2) < 1e-12).any(axis=1)

    frames = []
    for theta in thetas:
        model = mle_fit(X, y, nu, FitOptions(fixed_theta=(theta, theta)))
        preds = predict_batch(model, G, epsilon=epsilon)
        C = cross_cov(model.spec, G, X)
        order = np.argsort(-C, axis=1, kind="stable")
        first = C[np.arange(len(G)), order[:, 0]]
        second = C[np.arange(len(G)), order[:, 1]] if X.shape[0] > 1 else np.zeros(len(G))
        with np.errstate(divide="ignore", invalid="ignore"):
            dominance = np.where(first > 0, second / first, 1.0)
        frames.append(pd.DataFrame({
            "theta": theta,
            "u_1": G[:, 0],
            "u_2": G[:, 1],
            "truth": truth,
            "kriging": preds["kriging"].to_numpy(),
            "sink": preds["sink"].to_numpy(),
            "limit": preds["limit"].to_numpy(),
            "rho": preds["rho"].to_numpy(),
            "beta_hat": model.beta,
            "nearest_index": order[:, 0],
            "nearest_value": y[order[:, 0]],
            "dominance": dominance,
            "is_design": is_design,
        }))
        logger.info("Grid for theta=%g: beta_hat=%.4f, %d of %d points with rho < 1e-3",
                    theta, model.beta, int((preds["rho"] < 1e-3).sum()), len(G))
    return pd.concat(frames, ignore_index=True)


@dataclass
class TablesResult:
    which: str
    reports: Dict[str, BenchReport]
    summary: pd.DataFrame
    skipped: List[str] = field(default_factory=list)


def summary_row(report: BenchReport) -> Dict[str, Any]:
    """One column of a results table, as medians over replications"""
    cfg = report.config
    s = report.summary

    def med(group, key):
        return s[group][key]["median"] if s else math.nan

    return {
        "preset": report.name,
        "function": cfg["function"],
        "dim": cfg["dim"] if cfg["function"] == "gp" else get_test_function(cfg["function"], cfg["dim"]).dim,
        "n_train": cfg["train"]["n"],
        "n_test": cfg["test"]["n"],
        "replications": report.n_succeeded,
        "failed": len(report.failures),
        "r2_kriging": med("r2", "kriging"),
        "r2_limit": med("r2", "limit"),
        "r2_sink": med("r2", "sink"),
        "ratio_limit": med("ratio_overall", "limit_over_kriging"),
        "ratio_sink": med("ratio_overall", "sink_over_kriging"),
        "extreme_ratio_limit": med("ratio_extreme", "limit_over_kriging"),
        "extreme_ratio_sink": med("ratio_extreme", "sink_over_kriging"),
        "nan_extreme": s.get("nan_extreme_count", 0) if s else 0,
    }


def run_tables(which: str, overrides: Optional[Dict[str, Any]] = None,
               include_slow: bool = False) -> TablesResult:
    """
    Run the presets of one results table

    overrides holds ExperimentConfig fields (seed, replications, epsilon,
    threshold_m, workers); None values are ignored. Slow presets are skipped
    unless include_slow is set.
    """
    overrides = overrides or {}
    reports: Dict[str, BenchReport] = {}
    skipped = []
    for name in get_table(which):
        cfg = ExperimentConfig.from_preset(name, **overrides)
        if cfg.slow and not include_slow:
            logger.info("Skipping slow preset %s", name)
            skipped.append(name)
            continue
        reports[name] = run_experiment(cfg)
    summary = pd.DataFrame([summary_row(r) for r in reports.values()])
    return TablesResult(which=str(which), reports=reports, summary=summary, skipped=skipped)


def write_tables(result: TablesResult, out_dir, pdf: bool = False) -> List[Path]:
    """Per-preset reports, table_<which>.csv/.json and optionally table_<which>.pdf"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for report in result.reports.values():
        written.extend(p for p in write_report(report, out_dir) if p is not None)

    stem = out_dir / f"table_{result.which}"
    result.summary.to_csv(stem.with_suffix(".csv"), index=False)
    document = {
        "schema_version": SCHEMA_VERSION,
        "table": result.which,
        "skipped": result.skipped,
        "rows": result.summary.to_dict(orient="records"),
    }
    stem.with_suffix(".json").write_text(
        json.dumps(_jsonable(document), indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8",
    )
    written += [stem.with_suffix(".csv"), stem.with_suffix(".json")]

    if pdf:
        pdf_path = out_dir / get_pdf_filename(result.which)
        pdf_path.write_bytes(generate_benchmark_pdf(result.which, result.summary, result.skipped))
        written.append(pdf_path)
    logger.info("Wrote table %s summary to %s", result.which, stem.with_suffix(".csv"))
    return written
