"""Labeled scenario generators, a Benjamini-Hochberg baseline, and the
replication harness that aggregates R / FDR / TPR tables.

Four scenarios of progressively richer covariate dependence are provided.
Responses are drawn by pushing Beta-distributed quantiles through a truncated
normal: symmetric Beta(a,a) quantiles for nulls (keeping the conditional null
symmetric about the truncated normal's mean) and right-concentrated
Beta(10,0.5) quantiles for alternatives (placing signal in the upper
truncation region). 4000 nulls and 1000 alternatives per replicate by default.

All randomness flows through numpy's PCG64 generator seeded from explicit
integer material; replicate seeds derive deterministically from the master
seed, so runs are reproducible for a fixed numpy version regardless of worker
count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import beta as beta_dist
from scipy.stats import norm

from .dataset import Dataset, scale_covariates
from .errors import ValidationError
from .mirror import all_pvalues, to_pvalue_scale
from .threshold import TrainConfig, fit_threshold, rejections
from .trimming import TrimConfig, estimate_all_centers

_OPEN_EPS = 1e-15


def truncnorm_quantile(q, mu, v, zcut: float = 2.5):
    """Quantile of N(mu, v) truncated to mu +- zcut * sqrt(v).

    y = mu + sqrt(v) * Phi^-1(Phi(-zcut) + q (Phi(zcut) - Phi(-zcut))).
    q must lie strictly inside (0, 1); v is a variance.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or np.any(q >= 1):
        raise ValidationError("quantile level q must lie in (0, 1)")
    if np.any(np.asarray(v) <= 0):
        raise ValidationError("variance must be positive")
    if not zcut > 0:
        raise ValidationError("zcut must be positive")
    lo = norm.cdf(-zcut)
    hi = norm.cdf(zcut)
    out = mu + np.sqrt(v) * norm.ppf(lo + q * (hi - lo))
    return out if out.shape else float(out)


@dataclass(frozen=True)
class TruncatedNormalSpec:
    """Covariate-dependent truncated normal: mean mu(x), variance v(x)."""

    mean_fn: Callable
    var_fn: Callable
    zcut: float = 2.5


@dataclass(frozen=True)
class Law:
    """Sampling law on [0, 1]: uniform or Beta(a, b), drawn via inverse CDF."""

    name: str
    a: float = 0.0
    b: float = 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        if self.name == "uniform":
            return u
        if self.name == "beta":
            u = np.clip(u, _OPEN_EPS, 1.0 - _OPEN_EPS)
            return beta_dist.ppf(u, self.a, self.b)
        raise ValidationError(f"unknown law {self.name!r}")


UNIFORM = Law("uniform")


# module-level mean/variance functions keep ScenarioSpec picklable
def _const_10(x):
    return np.full_like(np.asarray(x, dtype=float), 10.0)


def _const(x, c):
    return np.full_like(np.asarray(x, dtype=float), c)


def _mean_5exp(x):
    return 5.0 * np.exp(x)


def _var_10_minus_sin(x):
    return 10.0 - np.sin(np.pi * x)


def _mean_10exp(x):
    return 10.0 * np.exp(x)


def _var_5_plus_sin(x):
    return 5.0 + np.sin(np.pi * x)


def _mean_two_sines(x):
    return np.sin(4.0 * x) + np.sin(8.0 * x)


def _var_5(x):
    return _const(x, 5.0)


def _var_10(x):
    return _const(x, 10.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario: covariate laws, quantile laws, response laws.

    scale="std" reinterprets the truncated normal's second parameter as a
    standard deviation instead of a variance, for sensitivity runs.
    """

    id: int
    n_null: int = 4000
    n_alt: int = 1000
    null_cov_law: Law = UNIFORM
    alt_cov_law: Law = UNIFORM
    null_q_law: Law = field(default_factory=lambda: Law("beta", 2, 2))
    alt_q_law: Law = field(default_factory=lambda: Law("beta", 10, 0.5))
    null_phi: TruncatedNormalSpec = None
    alt_phi: TruncatedNormalSpec = None
    scale: str = "variance"

    def __post_init__(self):
        if self.n_null < 1 or self.n_alt < 1:
            raise ValidationError("n_null and n_alt must be >= 1")
        if self.scale not in ("variance", "std"):
            raise ValidationError("scale must be 'variance' or 'std'")


def scenario(sid: int, n_null: int = 4000, n_alt: int = 1000,
             scale: str = "variance") -> ScenarioSpec:
    """The four built-in scenarios.

    1: fixed null N(10, 10); alternative mean 5 e^x, variance 10 - sin(pi x).
    2: null and alternative share N(10 e^x, 5 + sin(pi x)).
    3: like 2 with Beta(3,3) null quantiles and Beta(2,2) alternative
       covariates (signal concentrates mid-range).
    4: periodic mean sin(4x) + sin(8x), variance 5, Beta(0.5,0.5) alternative
       covariates (signal concentrates at the boundaries).
    """
    common = dict(n_null=n_null, n_alt=n_alt, scale=scale)
    if sid == 1:
        return ScenarioSpec(
            id=1,
            null_phi=TruncatedNormalSpec(_const_10, _var_10),
            alt_phi=TruncatedNormalSpec(_mean_5exp, _var_10_minus_sin),
            **common,
        )
    if sid == 2:
        phi = TruncatedNormalSpec(_mean_10exp, _var_5_plus_sin)
        return ScenarioSpec(id=2, null_phi=phi, alt_phi=phi, **common)
    if sid == 3:
        phi = TruncatedNormalSpec(_mean_10exp, _var_5_plus_sin)
        return ScenarioSpec(
            id=3,
            null_q_law=Law("beta", 3, 3),
            alt_cov_law=Law("beta", 2, 2),
            null_phi=phi,
            alt_phi=phi,
            **common,
        )
    if sid == 4:
        phi = TruncatedNormalSpec(_mean_two_sines, _var_5)
        return ScenarioSpec(
            id=4,
            alt_cov_law=Law("beta", 0.5, 0.5),
            null_phi=phi,
            alt_phi=phi,
            **common,
        )
    raise ValidationError(f"unknown scenario id {sid}")


def _draw(rng, cov_law: Law, q_law: Law, phi: TruncatedNormalSpec,
          size: int, scale: str) -> tuple:
    x = cov_law.sample(rng, size)
    q = np.clip(q_law.sample(rng, size), _OPEN_EPS, 1.0 - _OPEN_EPS)
    second = np.asarray(phi.var_fn(x), dtype=float)
    v = second ** 2 if scale == "std" else second
    y = truncnorm_quantile(q, np.asarray(phi.mean_fn(x), dtype=float), v, phi.zcut)
    return x, y


def generate(spec: ScenarioSpec, seed) -> Dataset:
    """One labeled replicate: nulls then alternatives, rows shuffled by seed."""
    rng = np.random.default_rng(seed)
    x0, y0 = _draw(rng, spec.null_cov_law, spec.null_q_law, spec.null_phi,
                   spec.n_null, spec.scale)
    x1, y1 = _draw(rng, spec.alt_cov_law, spec.alt_q_law, spec.alt_phi,
                   spec.n_alt, spec.scale)
    x = np.concatenate([x0, x1])
    y = np.concatenate([y0, y1])
    labels = np.concatenate([
        np.zeros(spec.n_null, dtype=np.int8),
        np.ones(spec.n_alt, dtype=np.int8),
    ])
    perm = rng.permutation(x.size)
    return Dataset(x=x[perm, None], y=y[perm], labels=labels[perm])


def bh_procedure(p, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up: reject the k smallest p-values where
    k = max{i : p_(i) <= i alpha / n}. Returns sorted rejected indices."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ValidationError("p-values must lie in [0, 1]")
    n = p.size
    if n == 0:
        return np.array([], dtype=int)
    order = np.argsort(p, kind="stable")
    passed = np.nonzero(p[order] <= alpha * np.arange(1, n + 1) / n)[0]
    if passed.size == 0:
        return np.array([], dtype=int)
    k = int(passed[-1]) + 1
    return np.sort(order[:k])


@dataclass(frozen=True)
class Metrics:
    """Replication summary for one (method, alpha) cell."""

    method: str
    alpha: float
    reps: int
    failures: int
    r_mean: float
    r_std: float
    fdr_mean: float
    fdr_std: float
    tpr_mean: float
    tpr_std: float


def _summarize(method, alpha, rows, failures) -> Metrics:
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    reps = arr.shape[0]

    def agg(col):
        mean = float(arr[:, col].mean()) if reps else float("nan")
        std = float(arr[:, col].std(ddof=1)) if reps > 1 else 0.0
        return mean, std

    r_mean, r_std = agg(0)
    f_mean, f_std = agg(1)
    t_mean, t_std = agg(2)
    return Metrics(method=method, alpha=alpha, reps=reps, failures=failures,
                   r_mean=r_mean, r_std=r_std, fdr_mean=f_mean, fdr_std=f_std,
                   tpr_mean=t_mean, tpr_std=t_std)


def run_methods(ds: Dataset, alphas: Sequence[float], methods: Sequence[str],
                trim: TrimConfig, train: TrainConfig,
                net_seed_base) -> dict:
    """Shared per-replicate pipeline: centers, p-values, then each method.

    Returns {(method, alpha): (R, FDP, TPR)} computed against the true labels.
    """
    if ds.labels is None:
        raise ValidationError("replicate metrics require labeled data")
    ds = scale_covariates(ds)
    centers = estimate_all_centers(ds, trim)
    pvals = all_pvalues(ds, centers, trim.query)
    targets = to_pvalue_scale(ds, centers, trim.query, centers.t0)
    n_alt = int(ds.labels.sum())
    out = {}
    for ai, alpha in enumerate(alphas):
        for method in methods:
            if method == "proposed":
                if alpha == 0.0:
                    rejected = np.array([], dtype=int)
                else:
                    cfg = replace(train, alpha=alpha,
                                  seed=np.random.SeedSequence(
                                      entropy=net_seed_base,
                                      spawn_key=(ai,)).generate_state(1)[0])
                    net, _ = fit_threshold(ds.x, pvals.p, targets, cfg)
                    rejected = rejections(net, ds.x, pvals.p).rejected
            elif method == "bh":
                rejected = bh_procedure(pvals.p, alpha)
            else:
                raise ValidationError(f"unknown method {method!r}")
            r = rejected.size
            v = int((ds.labels[rejected] == 0).sum())
            true_pos = r - v
            out[(method, alpha)] = (r, v / max(r, 1), true_pos / n_alt)
    return out


def _replicate_worker(args):
    spec, rep, alphas, methods, trim, train, seed = args
    try:
        ds = generate(spec, [seed, rep])
        return rep, run_methods(ds, alphas, methods, trim, train,
                                net_seed_base=[seed, rep]), None
    except Exception as exc:  # recorded and excluded, never silently dropped
        return rep, None, f"{type(exc).__name__}: {exc}"


def replicate(spec: ScenarioSpec, reps: int, alphas: Sequence[float],
              methods: Sequence[str] = ("proposed",), seed: int = 0,
              trim: TrimConfig = TrimConfig(),
              train: TrainConfig = TrainConfig(),
              threads: int = 1) -> tuple:
    """Run the full pipeline on fresh replicates and aggregate metrics.

    Returns (list of Metrics in (alpha, method) order, list of failure
    strings). Replicates run in parallel when threads > 1; per-replicate
    seeds derive from the master seed, so results do not depend on threads.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    jobs = [(spec, rep, tuple(alphas), tuple(methods), trim, train, seed)
            for rep in range(reps)]
    results = {}
    failures = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_replicate_worker, jobs))
    else:
        outcomes = [_replicate_worker(j) for j in jobs]
    for rep, cells, err in outcomes:
        if err is not None:
            failures.append(f"replicate {rep}: {err}")
        else:
            results[rep] = cells
    table = []
    for alpha in alphas:
        for method in methods:
            rows = [results[rep][(method, alpha)] for rep in sorted(results)]
            table.append(_summarize(method, alpha, rows, len(failures)))
    return table, failures
