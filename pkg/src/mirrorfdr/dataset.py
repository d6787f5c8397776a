"""Hypothesis data: ingestion, response transforms, covariate scaling, and
local neighborhood queries.

A :class:`Dataset` holds ``n`` records of (covariate vector, response) with an
optional 0/1 truth label column used only by simulations. Records are stored
columnar (numpy arrays) and the object is treated as immutable: every
transformation returns a new Dataset, so instances are safe to share across
parallel workers.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ValidationError

Norm = str  # "euclidean" | "max"


class Hypothesis(NamedTuple):
    """One record: covariate vector, response, optional truth label."""

    x: np.ndarray
    y: float
    label: int | None


@dataclass(frozen=True)
class Scaler:
    """Per-dimension affine map (x - lo) / (hi - lo) onto [0, 1].

    Dimensions with hi == lo are flagged constant and map to 0.5.
    """

    lo: np.ndarray
    hi: np.ndarray
    constant: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        span = np.where(self.constant, 1.0, self.hi - self.lo)
        out = (x - self.lo) / span
        out[:, self.constant] = 0.5
        return out


@dataclass(frozen=True)
class Dataset:
    """n records of (covariate vector in R^d, response, optional label)."""

    x: np.ndarray
    y: np.ndarray
    labels: np.ndarray | None = None
    scaler: Scaler | None = None
    response_transform: str = "identity"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValidationError("covariates must be a 2-D array with d >= 1")
        if y.shape != (x.shape[0],):
            raise ValidationError("response length does not match covariates")
        if not np.all(np.isfinite(x)):
            raise ValidationError("covariates contain non-finite values")
        if not np.all(np.isfinite(y)):
            raise ValidationError("responses contain non-finite values")
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (x.shape[0],) or not np.isin(lab, (0, 1)).all():
                raise ValidationError("labels must be 0/1 and match record count")
            object.__setattr__(self, "labels", lab.astype(np.int8))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def hypothesis(self, i: int) -> Hypothesis:
        label = None if self.labels is None else int(self.labels[i])
        return Hypothesis(self.x[i], float(self.y[i]), label)


@dataclass(frozen=True)
class NeighborhoodQuery:
    """Bandwidth query: all j with ||x_i - x_j|| < delta, expanded to min_size.

    delta is interpreted on scaled covariates. For d > 1 the default norm is
    Euclidean (max-norm selectable). If fewer than min_size points fall inside
    delta, the bandwidth grows geometrically (x1.5) until min_size is met.
    """

    delta: float
    norm: Norm = "euclidean"
    min_size: int = 50

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        if self.norm not in ("euclidean", "max"):
            raise ValidationError(f"unknown norm {self.norm!r}")
        if self.min_size < 1:
            raise ValidationError("min_size must be >= 1")


@dataclass(frozen=True)
class Neighborhood:
    """Result of a neighborhood query, with the effective bandwidth used."""

    indices: np.ndarray
    delta: float
    expanded: bool


def load_csv(
    path,
    covariates: Sequence[str],
    response: str,
    label: str | None = None,
) -> Dataset:
    """Read a UTF-8 CSV with a header row into an unscaled Dataset.

    Rows keep file order; all downstream outputs reference rows by this
    0-based order. Cells must parse as finite reals (the label column as 0/1).
    """
    if not covariates:
        raise ValidationError("at least one covariate column is required")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty file")
        missing = [c for c in [*covariates, response, *([label] if label else [])]
                   if c not in reader.fieldnames]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        xs, ys, labs = [], [], []
        for row_idx, row in enumerate(reader):
            def cell(col, kind="real"):
                raw = row.get(col)
                if raw is None or raw.strip() == "":
                    raise ValidationError(
                        f"{path}: empty cell at row {row_idx}, column {col!r}")
                try:
                    val = float(raw)
                except ValueError:
                    raise ValidationError(
                        f"{path}: unparseable cell at row {row_idx}, column {col!r}: {raw!r}")
                if not math.isfinite(val):
                    raise ValidationError(
                        f"{path}: non-finite value at row {row_idx}, column {col!r}")
                if kind == "label" and val not in (0.0, 1.0):
                    raise ValidationError(
                        f"{path}: label must be 0/1 at row {row_idx}, column {col!r}")
                return val

            xs.append([cell(c) for c in covariates])
            ys.append(cell(response))
            if label:
                labs.append(int(cell(label, kind="label")))
    if not xs:
        raise ValidationError(f"{path}: no data rows")
    return Dataset(
        x=np.asarray(xs, dtype=float),
        y=np.asarray(ys, dtype=float),
        labels=np.asarray(labs, dtype=np.int8) if label else None,
    )


def transform_response(ds: Dataset, kind: str, shift: float = 0.0) -> Dataset:
    """Apply identity / log / shifted-log to the responses.

    kind "log" requires all y > 0; "log_shift" requires all y + shift > 0.
    Covariates are untouched; the transformation is recorded on the Dataset.
    """
    if kind == "identity":
        return replace(ds, response_transform="identity")
    if kind == "log":
        arg, desc = ds.y, "log"
    elif kind == "log_shift":
        arg, desc = ds.y + shift, f"log_shift({shift:g})"
    else:
        raise ValidationError(f"unknown transform {kind!r}")
    bad = np.nonzero(arg <= 0)[0]
    if bad.size:
        raise ValidationError(
            f"{desc}: nonpositive argument at row {int(bad[0])} (y={ds.y[bad[0]]:g})")
    return replace(ds, y=np.log(arg), response_transform=desc)


def scale_covariates(ds: Dataset) -> Dataset:
    """Affinely map each covariate dimension onto [0, 1] and store the scaler.

    Constant dimensions map to 0.5 and raise a warning rather than an error.
    Idempotent: rescaling an already scaled dataset leaves values unchanged.
    """
    if ds.n < 2:
        raise ValidationError("scaling requires n >= 2")
    lo = ds.x.min(axis=0)
    hi = ds.x.max(axis=0)
    constant = hi <= lo
    if constant.any():
        dims = np.nonzero(constant)[0].tolist()
        warnings.warn(f"constant covariate dimension(s) {dims} mapped to 0.5")
    scaler = Scaler(lo=lo, hi=hi, constant=constant)
    return replace(ds, x=scaler.apply(ds.x), scaler=scaler)


def _distances(ds: Dataset, i: int, norm: Norm) -> np.ndarray:
    diff = ds.x - ds.x[i]
    if ds.d == 1:
        return np.abs(diff[:, 0])
    if norm == "euclidean":
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return np.abs(diff).max(axis=1)


def neighborhood(ds: Dataset, i: int, q: NeighborhoodQuery) -> Neighborhood:
    """Indices within distance < delta of record i (always including i).

    If the ball holds fewer than q.min_size points, delta grows by factors of
    1.5 until the minimum is met; the effective delta is reported back.
    """
    if not 0 <= i < ds.n:
        raise ValidationError(f"index {i} out of range for n={ds.n}")
    dist = _distances(ds, i, q.norm)
    delta = q.delta
    idx = np.nonzero(dist < delta)[0]
    expanded = False
    target = min(q.min_size, ds.n)
    while idx.size < target:
        delta *= 1.5
        expanded = True
        idx = np.nonzero(dist < delta)[0]
    return Neighborhood(indices=idx, delta=delta, expanded=expanded)
