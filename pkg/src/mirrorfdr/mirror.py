"""Mirror-based empirical null and per-hypothesis p-values.

The responses of a neighborhood that fall at or below the estimated center are
reflected across it; the union of the kept and reflected values forms a
synthetic symmetric null sample for the upper half, from which the p-value of
a response y is the fraction of values strictly above y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, NeighborhoodQuery, neighborhood
from .errors import EmptyNullError, ValidationError
from .trimming import CenterEstimates

FLAG_EMPTY_NULL = "empty_null"


@dataclass(frozen=True)
class MirrorNull:
    """Below-center responses, their reflection, and the combined multiset."""

    center: float
    below: np.ndarray
    mirrored: np.ndarray
    combined: np.ndarray


@dataclass(frozen=True)
class PValueVector:
    """Per-hypothesis mirror p-values with the size of each empirical null."""

    p: np.ndarray
    source_size: np.ndarray
    flags: list


def mirror_null(responses, m_hat: float) -> MirrorNull:
    """Build the mirrored empirical null from neighborhood responses.

    Duplicates are preserved (multiset semantics); values equal to m_hat
    contribute themselves and their identical reflection. Raises
    EmptyNullError when no response lies at or below the center.
    """
    responses = np.asarray(responses, dtype=float)
    below = responses[responses <= m_hat]
    if below.size == 0:
        raise EmptyNullError(f"no responses at or below center {m_hat:g}")
    mirrored = 2.0 * m_hat - below
    return MirrorNull(
        center=float(m_hat),
        below=below,
        mirrored=mirrored,
        combined=np.concatenate([below, mirrored]),
    )


def empirical_pvalue(y: float, null: MirrorNull) -> float:
    """Fraction of the combined null strictly above y."""
    if null.combined.size == 0:
        raise ValidationError("empty mirror null")
    return float(np.count_nonzero(null.combined > y)) / null.combined.size


def all_pvalues(ds: Dataset, centers: CenterEstimates, q: NeighborhoodQuery,
                source: str = "original") -> PValueVector:
    """Mirror p-value for every hypothesis.

    source="original" (default) builds each null from the full untrimmed
    neighborhood: with alternatives lying above the center, the below-center
    half is uncontaminated and using all of it maximizes the null sample.
    source="trimmed" uses the post-trim retained sets for comparison.
    Hypotheses with an empty null get p = 1 and a flag (never rejected).
    """
    if source not in ("original", "trimmed"):
        raise ValidationError(f"unknown p-value source {source!r}")
    if centers.n != ds.n:
        raise ValidationError("center estimates do not match dataset size")
    n = ds.n
    p = np.empty(n)
    size = np.empty(n, dtype=int)
    flags: list = [frozenset()] * n
    for i in range(n):
        if source == "original":
            idx = neighborhood(ds, i, q).indices
        else:
            idx = centers.retained[i]
        try:
            null = mirror_null(ds.y[idx], centers.m[i])
        except EmptyNullError:
            p[i] = 1.0
            size[i] = 0
            flags[i] = frozenset({FLAG_EMPTY_NULL})
            continue
        p[i] = empirical_pvalue(ds.y[i], null)
        size[i] = null.combined.size
    return PValueVector(p=p, source_size=size, flags=flags)


def to_pvalue_scale(ds: Dataset, centers: CenterEstimates, q: NeighborhoodQuery,
                    values: np.ndarray, clip: tuple = (0.01, 0.99),
                    source: str = "original") -> np.ndarray:
    """Map per-hypothesis response-scale thresholds through each mirror null.

    Used to convert the trimming thresholds t0 into p-scale pretraining
    targets: target_i = empirical p-value of values[i] under hypothesis i's
    own null, clipped away from the ends.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (ds.n,):
        raise ValidationError("values must hold one threshold per hypothesis")
    out = np.empty(ds.n)
    for i in range(ds.n):
        if source == "original":
            idx = neighborhood(ds, i, q).indices
        else:
            idx = centers.retained[i]
        try:
            null = mirror_null(ds.y[idx], centers.m[i])
        except EmptyNullError:
            out[i] = clip[1]
            continue
        out[i] = empirical_pvalue(values[i], null)
    return np.clip(out, clip[0], clip[1])
