"""Conditional null-center estimation by iterative tail trimming.

For each hypothesis i, take the responses in its covariate neighborhood and
repeatedly test them for mean-median symmetry. While the test rejects, remove
batch_k values from the tail on the skewed side (the larger values when the
mean exceeds the median, the smaller ones otherwise). On stop, the center
estimate m_hat(X_i) is the median of the retained responses and the initial
threshold t0(X_i) is their maximum: under the one-sided alternative
assumption, everything above t0 is expected to be signal.

Each hypothesis is processed independently against the full dataset; trimming
never mutates the Dataset, only a per-hypothesis working multiset.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, Neighborhood, NeighborhoodQuery, neighborhood
from .errors import NumericalError, ValidationError
from .symmetry import KdeConfig, TrimDecision, stats_from_sorted, trim_decision

#: diagnostic flag names
FLAG_DELTA_EXPANDED = "delta_expanded"
FLAG_VARIANCE_CLAMPED = "variance_clamped"
FLAG_FLOOR_HIT = "floor_hit"
FLAG_STATS_FAILED = "stats_failed"


@dataclass(frozen=True)
class TrimConfig:
    """Controls for the trimming loop.

    batch_k values are removed per iteration (5 by default; removing several
    at once cuts iteration counts with no practical effect on the result).
    min_retained is the hard floor on the retained count, needed to keep the
    kernel density estimate usable. sqrt_n=False selects the unnormalized
    stopping rule as a compatibility mode.
    """

    z_crit: float = 1.96
    batch_k: int = 5
    min_retained: int = 30
    kde: KdeConfig = field(default_factory=KdeConfig)
    query: NeighborhoodQuery = field(default_factory=lambda: NeighborhoodQuery(delta=0.05))
    sqrt_n: bool = True

    def __post_init__(self):
        if not self.z_crit > 0:
            raise ValidationError("z_crit must be positive")
        if self.batch_k < 1:
            raise ValidationError("batch_k must be >= 1")
        if self.min_retained < 10:
            raise ValidationError("min_retained must be >= 10")


@dataclass(frozen=True)
class CenterEstimate:
    """Per-hypothesis result of the trimming loop."""

    m_hat: float
    t0: float
    retained: np.ndarray
    iterations: int
    flags: frozenset
    delta: float


@dataclass(frozen=True)
class CenterEstimates:
    """Vectorized results for all hypotheses, indexed by input order."""

    m: np.ndarray
    t0: np.ndarray
    retained: list
    iterations: np.ndarray
    flags: list

    @property
    def n(self) -> int:
        return self.m.size


def _expanded_neighborhood(ds: Dataset, i: int, cfg: TrimConfig) -> Neighborhood:
    # the trim floor may exceed the query's min_size; expand to whichever is larger
    target = max(cfg.query.min_size, cfg.min_retained)
    q = cfg.query if cfg.query.min_size >= target else NeighborhoodQuery(
        delta=cfg.query.delta, norm=cfg.query.norm, min_size=target)
    return neighborhood(ds, i, q)


def estimate_center(ds: Dataset, i: int, cfg: TrimConfig = TrimConfig()) -> CenterEstimate:
    """Run the trimming loop for hypothesis i.

    Returns the center (median of retained responses), the initial threshold
    (their maximum), the retained dataset indices, the iteration count, and
    diagnostic flags. Numerical failures inside the symmetry statistics stop
    the loop with a flag rather than raising.
    """
    nbhd = _expanded_neighborhood(ds, i, cfg)
    idx = nbhd.indices
    vals = ds.y[idx]
    # ascending by value; ties ordered by descending index so that removal
    # from the top end takes the lowest-indexed duplicate first
    order = np.lexsort((-idx, vals))
    z = vals[order]
    zidx = idx[order]

    flags = set()
    if nbhd.expanded:
        flags.add(FLAG_DELTA_EXPANDED)

    lo, hi = 0, z.size
    iterations = 0
    while hi - lo > cfg.min_retained:
        try:
            stats = stats_from_sorted(z[lo:hi], cfg.kde)
        except NumericalError:
            flags.add(FLAG_STATS_FAILED)
            break
        if stats.variance_clamped:
            flags.add(FLAG_VARIANCE_CLAMPED)
        decision = trim_decision(stats, cfg.z_crit, cfg.sqrt_n)
        if decision is TrimDecision.STOP:
            break
        k = min(cfg.batch_k, (hi - lo) - cfg.min_retained)
        if decision is TrimDecision.TRIM_MAX:
            hi -= k
        else:
            lo += k
        iterations += 1
        if hi - lo <= cfg.min_retained:
            flags.add(FLAG_FLOOR_HIT)
    window = z[lo:hi]
    nw = window.size
    m_hat = 0.5 * (window[(nw - 1) // 2] + window[nw // 2])
    return CenterEstimate(
        m_hat=float(m_hat),
        t0=float(window[-1]),
        retained=np.sort(zidx[lo:hi]),
        iterations=iterations,
        flags=frozenset(flags),
        delta=nbhd.delta,
    )


def _estimate_chunk(args):
    ds, lo, hi, cfg = args
    return [estimate_center(ds, i, cfg) for i in range(lo, hi)]


def estimate_all_centers(ds: Dataset, cfg: TrimConfig = TrimConfig(),
                         n_jobs: int = 1) -> CenterEstimates:
    """Apply :func:`estimate_center` to every hypothesis independently.

    Results are indexed by input order and identical for any n_jobs; workers
    read the immutable Dataset and fill disjoint output slots.
    """
    n = ds.n
    if n < max(cfg.query.min_size, cfg.min_retained):
        raise ValidationError(
            f"dataset of size {n} smaller than the neighborhood floor")
    if n_jobs > 1 and n > 1:
        chunk = math.ceil(n / (n_jobs * 4))
        bounds = [(ds, s, min(s + chunk, n), cfg) for s in range(0, n, chunk)]
        results: list[CenterEstimate] = []
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for part in pool.map(_estimate_chunk, bounds):
                results.extend(part)
    else:
        results = [estimate_center(ds, i, cfg) for i in range(n)]
    return CenterEstimates(
        m=np.array([r.m_hat for r in results]),
        t0=np.array([r.t0 for r in results]),
        retained=[r.retained for r in results],
        iterations=np.array([r.iterations for r in results], dtype=int),
        flags=[r.flags for r in results],
    )
