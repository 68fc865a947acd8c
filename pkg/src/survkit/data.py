"""Right-censored survival data: the dataset model, CSV I/O, splitting and scaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

RESERVED = ("id", "time", "status", "mvi")

# Covariates of the cross-country GDP-target study; used as defaults by the
# OLS vulnerability regression and by the replica fixture.
REFERENCE_FEATURES = (
    "Natural_risk",
    "Commercial_risk",
    "Financial_risk",
    "Endogenous_risk",
    "Vul_Inherent",
    "Vul_Fragility_Democracy",
    "Vul_Human_Rights",
    "Vul_Homes",
    "Vul_Companies",
    "Capabilities_State",
    "Social_Cohesion_Capabilities",
)


@dataclass(frozen=True)
class SurvivalRow:
    """One subject. ``x`` entries are ``None`` where the covariate is absent."""

    id: str
    time: int
    status: int
    x: tuple
    mvi: float | None = None

    def __post_init__(self):
        if self.status not in (0, 1):
            raise ValidationError(f"subject {self.id!r}: status must be 0 or 1, got {self.status!r}")
        if not (isinstance(self.time, (int, np.integer)) and self.time >= 1):
            raise ValidationError(f"subject {self.id!r}: time must be an integer >= 1, got {self.time!r}")


@dataclass(frozen=True)
class SurvivalDataset:
    rows: tuple
    feature_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        p = len(self.feature_names)
        seen = set()
        for r in self.rows:
            if len(r.x) != p:
                raise ValidationError(
                    f"subject {r.id!r} has {len(r.x)} covariates, expected {p}"
                )
            if r.id in seen:
                raise ValidationError(f"duplicate id: {r.id!r}")
            seen.add(r.id)

    @classmethod
    def from_arrays(cls, times, status, X=None, feature_names=None, ids=None, mvi=None):
        """Build a dataset from parallel arrays; NaN covariates become absent."""
        times = np.asarray(times, dtype=float)
        status = np.asarray(status)
        n = len(times)
        if np.any(times != np.round(times)):
            raise ValidationError("times must be whole months")
        if X is None:
            X = np.zeros((n, 0))
        X = np.asarray(X, dtype=float).reshape(n, -1)
        if feature_names is None:
            feature_names = [f"x{k + 1}" for k in range(X.shape[1])]
        if ids is None:
            width = len(str(n))
            ids = [f"s{i + 1:0{width}d}" for i in range(n)]
        rows = []
        for i in range(n):
            x = tuple(None if math.isnan(v) else float(v) for v in X[i])
            m = None
            if mvi is not None and not math.isnan(float(mvi[i])):
                m = float(mvi[i])
            rows.append(SurvivalRow(str(ids[i]), int(times[i]), int(status[i]), x, m))
        return cls(tuple(rows), tuple(feature_names))

    def __len__(self):
        return len(self.rows)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.rows]

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.rows], dtype=float)

    @property
    def status(self) -> np.ndarray:
        return np.array([r.status for r in self.rows], dtype=int)

    @property
    def n_events(self) -> int:
        return sum(r.status for r in self.rows)

    @property
    def n_censored(self) -> int:
        return len(self.rows) - self.n_events

    @property
    def X(self) -> np.ndarray:
        """Covariate matrix with NaN marking absent cells."""
        out = np.full((len(self.rows), self.n_features), np.nan)
        for i, r in enumerate(self.rows):
            for k, v in enumerate(r.x):
                if v is not None:
                    out[i, k] = v
        return out

    @property
    def mvi(self) -> np.ndarray:
        return np.array([np.nan if r.mvi is None else r.mvi for r in self.rows])

    @property
    def has_mvi(self) -> bool:
        return any(r.mvi is not None for r in self.rows)

    def covariates(self) -> np.ndarray:
        """Complete covariate matrix; rows with absent cells are rejected."""
        X = self.X
        bad = np.isnan(X).any(axis=1)
        if bad.any():
            ids = [self.rows[i].id for i in np.flatnonzero(bad)]
            raise ValidationError(
                f"{len(ids)} row(s) have missing covariates (first: {ids[0]!r}); "
                "only the MVI regression performs listwise deletion"
            )
        return X

    def column(self, name: str) -> np.ndarray:
        if name == "mvi":
            return self.mvi
        if name == "time":
            return self.times
        try:
            k = self.feature_names.index(name)
        except ValueError:
            raise SchemaError(name) from None
        return self.X[:, k]

    def subset(self, indices: Iterable[int]) -> "SurvivalDataset":
        return SurvivalDataset(tuple(self.rows[i] for i in indices), self.feature_names)

    def with_covariates(self, X: np.ndarray, feature_names: Sequence[str]) -> "SurvivalDataset":
        """Same subjects, replaced covariate block."""
        X = np.asarray(X, dtype=float)
        rows = tuple(
            SurvivalRow(r.id, r.time, r.status,
                        tuple(None if math.isnan(v) else float(v) for v in X[i]), r.mvi)
            for i, r in enumerate(self.rows)
        )
        return SurvivalDataset(rows, tuple(feature_names))


def _parse_float(cell, lineno, column):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(lineno, column, cell) from None
    if not math.isfinite(v):
        raise ParseError(lineno, column, cell)
    return v


def load_csv(path, schema: Sequence[str] | None = None) -> SurvivalDataset:
    """Read a survival CSV.

    The header must contain ``id``, ``time`` and ``status``; every other
    column except ``mvi`` is a covariate, kept in header order. Empty
    covariate or ``mvi`` cells are recorded as absent. ``schema`` lists
    additional columns that must be present.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("id", "empty file: header row required") from None
        for col in ("id", "time", "status", *(schema or ())):
            if col not in header:
                raise SchemaError(col)
        idx = {h: i for i, h in enumerate(header)}
        features = [h for h in header if h not in RESERVED]
        rows = []
        seen = set()
        for lineno, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(lineno, "<row>", ",".join(rec))
            rec = [c.strip() for c in rec]
            rid = rec[idx["id"]]
            if rid in seen:
                raise ValidationError(f"row {lineno}: duplicate id {rid!r}")
            seen.add(rid)
            t = _parse_float(rec[idx["time"]], lineno, "time")
            if t != int(t) or t < 1:
                raise ValidationError(f"row {lineno}: time must be an integer >= 1, got {rec[idx['time']]!r}")
            s = _parse_float(rec[idx["status"]], lineno, "status")
            if s not in (0.0, 1.0):
                raise ValidationError(f"row {lineno}: status must be 0 or 1, got {rec[idx['status']]!r}")
            x = tuple(
                None if rec[idx[f]] == "" else _parse_float(rec[idx[f]], lineno, f)
                for f in features
            )
            mvi = None
            if "mvi" in idx and rec[idx["mvi"]] != "":
                mvi = _parse_float(rec[idx["mvi"]], lineno, "mvi")
            rows.append(SurvivalRow(rid, int(t), int(s), x, mvi))
    return SurvivalDataset(tuple(rows), tuple(features))


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_csv(ds: SurvivalDataset, path) -> None:
    """Write ``ds`` in the schema read by :func:`load_csv` (floats in repr form)."""
    header = ["id", "time", "status", *ds.feature_names]
    with_mvi = ds.has_mvi
    if with_mvi:
        header.append("mvi")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in ds.rows:
            rec = [r.id, str(r.time), str(r.status), *(_fmt(v) for v in r.x)]
            if with_mvi:
                rec.append(_fmt(r.mvi))
            w.writerow(rec)


def train_test_split(ds: SurvivalDataset, fraction: float, seed: int):
    """Random split with ``floor(fraction * n)`` training rows.

    Both parts keep the original row order.
    """
    n = len(ds)
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"split fraction must lie in (0, 1), got {fraction}")
    n_train = math.floor(fraction * n)
    if n_train == 0 or n_train == n:
        raise ValidationError(
            f"split fraction {fraction} of {n} rows leaves an empty train or test set"
        )
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass(frozen=True)
class ScalingParams:
    """Train-derived column means and sample standard deviations.

    ``retained_columns`` indexes the input feature list; dropped columns had
    zero variance on the training rows.
    """

    feature_names: tuple
    means: tuple
    sds: tuple
    retained_columns: tuple = field(default=())

    @property
    def dropped_columns(self) -> tuple:
        keep = set(self.retained_columns)
        return tuple(k for k in range(len(self.feature_names)) if k not in keep)

    @property
    def retained_names(self) -> tuple:
        return tuple(self.feature_names[k] for k in self.retained_columns)

    def transform(self, ds: SurvivalDataset) -> SurvivalDataset:
        if tuple(ds.feature_names) != tuple(self.feature_names):
            raise ValidationError("feature names differ from those the scaling was fitted on")
        keep = list(self.retained_columns)
        X = ds.X[:, keep]
        X = (X - np.asarray(self.means)[keep]) / np.asarray(self.sds)[keep]
        return ds.with_covariates(X, self.retained_names)

    def to_dict(self) -> dict:
        return {
            "features": list(self.feature_names),
            "means": list(self.means),
            "sds": list(self.sds),
            "retained": list(self.retained_columns),
        }

    @classmethod
    def from_dict(cls, d) -> "ScalingParams":
        return cls(tuple(d["features"]), tuple(d["means"]), tuple(d["sds"]), tuple(d["retained"]))


def fit_scaling(train: SurvivalDataset) -> ScalingParams:
    X = train.X
    if len(train) < 2:
        raise ValidationError("standardization needs at least 2 training rows")
    means = np.nanmean(X, axis=0) if X.size else np.zeros(0)
    sds = np.nanstd(X, axis=0, ddof=1) if X.size else np.zeros(0)
    retained = tuple(int(k) for k in range(X.shape[1]) if np.isfinite(sds[k]) and sds[k] > 0)
    if not retained:
        raise ValidationError("all covariate columns have zero variance on the training set")
    # sd of a dropped column is stored as 1.0 so the params stay finite
    sds = np.where(np.isfinite(sds) & (sds > 0), sds, 1.0)
    means = np.where(np.isfinite(means), means, 0.0)
    return ScalingParams(
        tuple(train.feature_names),
        tuple(float(v) for v in means),
        tuple(float(v) for v in sds),
        retained,
    )


def standardize(train: SurvivalDataset, test: SurvivalDataset):
    """Center and scale covariates with training statistics.

    Returns ``(train', test', params)``; zero-variance training columns are
    dropped from both outputs.
    """
    if tuple(train.feature_names) != tuple(test.feature_names):
        raise ValidationError("train and test feature names differ")
    params = fit_scaling(train)
    return params.transform(train), params.transform(test), params
