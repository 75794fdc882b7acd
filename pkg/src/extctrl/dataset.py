"""Individual-level and aggregate-level data model, CSV/JSON ingestion, validation.

The CSV layout is ``id,group,<covariate...>,outcome[,time,event]`` with a
header row, UTF-8, decimal point. Row order is the canonical subject order
for every weight vector produced downstream. Missing covariate values are
rejected, never imputed; multi-level categoricals must arrive pre-expanded
to 0/1 indicator columns.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    MissingColumn,
    MissingValue,
    NonNumericCovariate,
    ProportionOutOfRange,
    ResponderCountExceedsN,
    SchemaViolation,
    UnknownGroupLabel,
)


class Group(enum.Enum):
    TRIAL = 1
    EXTERNAL = 0


class OutcomeKind(enum.Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"
    TIME_TO_EVENT = "survival"


_GROUP_LABELS = {"trial": Group.TRIAL, "external": Group.EXTERNAL}

_MISSING_TOKENS = {"", "na", "nan", "null", "none", "."}


@dataclass(frozen=True)
class PatientRecord:
    """One subject: group membership, covariates, and optional outcome data."""

    id: str
    group: Group
    covariates: tuple[float, ...]
    outcome: Optional[float] = None
    time: Optional[float] = None
    event: Optional[int] = None

    def __post_init__(self):
        if (self.time is None) != (self.event is None):
            raise SchemaViolation(
                f"record {self.id!r}: time and event must be present together"
            )
        if self.time is not None and self.time < 0:
            raise SchemaViolation(f"record {self.id!r}: negative follow-up time")


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of patient records with a declared covariate order."""

    covariate_names: tuple[str, ...]
    records: tuple[PatientRecord, ...]
    outcome_kind: Optional[OutcomeKind] = None

    def __post_init__(self):
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise SchemaViolation("covariate names must be unique")
        if not any(r.group is Group.TRIAL for r in self.records):
            raise EmptyDataset("dataset contains no trial records")
        p = len(self.covariate_names)
        for r in self.records:
            if len(r.covariates) != p:
                raise SchemaViolation(
                    f"record {r.id!r}: expected {p} covariates, got {len(r.covariates)}"
                )
            if self.outcome_kind is OutcomeKind.BINARY and r.outcome is not None:
                if r.outcome not in (0.0, 1.0):
                    raise SchemaViolation(
                        f"record {r.id!r}: binary outcome must be 0 or 1, got {r.outcome}"
                    )

    def __len__(self):
        return len(self.records)

    @property
    def n_trial(self) -> int:
        return int(np.sum(self.group_mask))

    @property
    def n_external(self) -> int:
        return len(self.records) - self.n_trial

    @property
    def group_mask(self) -> np.ndarray:
        """Boolean mask, True for trial subjects, in row order."""
        return np.array([r.group is Group.TRIAL for r in self.records])

    def covariate_matrix(self, names: Optional[Sequence[str]] = None) -> np.ndarray:
        """n x p matrix of the named covariates (all, by default) in row order."""
        if names is None:
            names = self.covariate_names
        idx = []
        for name in names:
            if name not in self.covariate_names:
                raise MissingColumn(f"unknown covariate {name!r}")
            idx.append(self.covariate_names.index(name))
        return np.array([[r.covariates[j] for j in idx] for r in self.records])

    def outcomes(self) -> np.ndarray:
        vals = [r.outcome for r in self.records]
        if any(v is None for v in vals):
            raise MissingValue("outcome missing for at least one record")
        return np.array(vals, dtype=float)

    def times_events(self) -> tuple[np.ndarray, np.ndarray]:
        if any(r.time is None for r in self.records):
            raise MissingValue("time/event missing for at least one record")
        t = np.array([r.time for r in self.records], dtype=float)
        d = np.array([r.event for r in self.records], dtype=int)
        return t, d

    def restrict(self, group: Group) -> "Dataset":
        """Sub-dataset holding only one group, preserving row order."""
        kept = tuple(r for r in self.records if r.group is group)
        return Dataset(self.covariate_names, kept, self.outcome_kind)


@dataclass(frozen=True)
class AggregateSummary:
    """Published-only external data: covariate means plus an outcome summary."""

    covariate_names: tuple[str, ...]
    covariate_means: tuple[float, ...]
    n: int
    outcome_kind: OutcomeKind
    outcome_summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n <= 0:
            raise SchemaViolation("aggregate n must be positive")
        if len(self.covariate_names) != len(self.covariate_means):
            raise SchemaViolation("covariate names/means length mismatch")
        if self.outcome_kind is OutcomeKind.BINARY:
            x0 = self.outcome_summary.get("responders")
            if x0 is None or not 0 <= x0:
                raise SchemaViolation("binary aggregate outcome needs responders >= 0")
            if x0 > self.n:
                raise ResponderCountExceedsN(f"responders {x0} > n {self.n}")
        elif self.outcome_kind is OutcomeKind.CONTINUOUS:
            if self.outcome_summary.get("sd", 0.0) < 0:
                raise SchemaViolation("aggregate sd must be >= 0")
        elif self.outcome_kind is OutcomeKind.TIME_TO_EVENT:
            s = self.outcome_summary.get("survival")
            if s is not None and not 0.0 <= s <= 1.0:
                raise ProportionOutOfRange(f"survival probability {s} outside [0,1]")

    def mean_of(self, name: str) -> float:
        if name not in self.covariate_names:
            raise MissingColumn(f"aggregate has no covariate {name!r}")
        return self.covariate_means[self.covariate_names.index(name)]


@dataclass(frozen=True)
class CsvSchema:
    """Column-role mapping for `load_dataset`.

    When ``covariate_cols`` is None every column other than the named roles
    is treated as a covariate.
    """

    id_col: str = "id"
    group_col: str = "group"
    covariate_cols: Optional[tuple[str, ...]] = None
    outcome_col: Optional[str] = "outcome"
    time_col: Optional[str] = "time"
    event_col: Optional[str] = "event"
    outcome_kind: Optional[OutcomeKind] = None


def _parse_number(token: str, column: str, row: int) -> float:
    token = token.strip()
    if token.lower() in _MISSING_TOKENS:
        raise MissingValue(f"missing value in column {column!r} at row {row}", row=row)
    try:
        value = float(token)
    except ValueError:
        raise NonNumericCovariate(
            f"non-numeric value {token!r} in column {column!r} at row {row}"
        ) from None
    if not math.isfinite(value):
        raise NonNumericCovariate(
            f"non-finite value {token!r} in column {column!r} at row {row}"
        )
    return value


def _parse_optional(token: str, column: str, row: int) -> Optional[float]:
    if token is None or token.strip().lower() in _MISSING_TOKENS:
        return None
    return _parse_number(token, column, row)


def load_dataset(path, schema: Optional[CsvSchema] = None) -> Dataset:
    """Load and validate an individual-level CSV file.

    Parameters
    ----------
    path : str or Path
        CSV file with header row.
    schema : CsvSchema, optional
        Column-role mapping; defaults infer covariates from the header.

    Returns
    -------
    Dataset
        Validated dataset, row order preserved.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if any(cell.strip() for cell in row)]

    for required in (schema.id_col, schema.group_col):
        if required not in header:
            raise MissingColumn(f"{path}: required column {required!r} not found")
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")

    role_cols = {schema.id_col, schema.group_col}
    for opt in (schema.outcome_col, schema.time_col, schema.event_col):
        if opt is not None:
            role_cols.add(opt)
    if schema.covariate_cols is not None:
        cov_names = list(schema.covariate_cols)
        for name in cov_names:
            if name not in header:
                raise MissingColumn(f"{path}: covariate column {name!r} not found")
    else:
        cov_names = [h for h in header if h not in role_cols]
    if not cov_names:
        raise MissingColumn(f"{path}: no covariate columns")

    col_index = {name: header.index(name) for name in header}
    has_outcome = schema.outcome_col in header if schema.outcome_col else False
    has_time = schema.time_col in header if schema.time_col else False
    has_event = schema.event_col in header if schema.event_col else False

    records = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaViolation(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        label = row[col_index[schema.group_col]].strip().lower()
        if label not in _GROUP_LABELS:
            raise UnknownGroupLabel(f"{path}: unknown group label {label!r} at row {i}")
        covs = tuple(
            _parse_number(row[col_index[name]], name, i) for name in cov_names
        )
        outcome = (
            _parse_optional(row[col_index[schema.outcome_col]], schema.outcome_col, i)
            if has_outcome
            else None
        )
        time = (
            _parse_optional(row[col_index[schema.time_col]], schema.time_col, i)
            if has_time
            else None
        )
        event = (
            _parse_optional(row[col_index[schema.event_col]], schema.event_col, i)
            if has_event
            else None
        )
        records.append(
            PatientRecord(
                id=row[col_index[schema.id_col]].strip(),
                group=_GROUP_LABELS[label],
                covariates=covs,
                outcome=outcome,
                time=time,
                event=None if event is None else int(event),
            )
        )

    kind = schema.outcome_kind
    if kind is None:
        kind = _infer_outcome_kind(records)
    return Dataset(tuple(cov_names), tuple(records), kind)


def _infer_outcome_kind(records) -> Optional[OutcomeKind]:
    if any(r.time is not None for r in records):
        return OutcomeKind.TIME_TO_EVENT
    outcomes = [r.outcome for r in records if r.outcome is not None]
    if not outcomes:
        return None
    if all(v in (0.0, 1.0) for v in outcomes):
        return OutcomeKind.BINARY
    return OutcomeKind.CONTINUOUS


def save_dataset(data: Dataset, path) -> None:
    """Write a Dataset back to the canonical CSV layout (round-trip safe)."""
    path = Path(path)
    has_outcome = any(r.outcome is not None for r in data.records)
    has_time = any(r.time is not None for r in data.records)
    header = ["id", "group"] + list(data.covariate_names)
    if has_outcome:
        header.append("outcome")
    if has_time:
        header += ["time", "event"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in data.records:
            row = [r.id, "trial" if r.group is Group.TRIAL else "external"]
            row += [repr(v) for v in r.covariates]
            if has_outcome:
                row.append("" if r.outcome is None else repr(r.outcome))
            if has_time:
                row.append("" if r.time is None else repr(r.time))
                row.append("" if r.event is None else str(r.event))
            writer.writerow(row)


def load_aggregate(path) -> AggregateSummary:
    """Load and validate an aggregate-only external summary from JSON.

    Expected shape::

        {"n": 272,
         "covariates": {"age": 34.5, "severe": 0.75},
         "binary_covariates": ["severe"],          # optional, bounds-checked
         "outcome": {"kind": "binary", "responders": 90}}

    Continuous outcomes carry ``mean``/``sd``; survival outcomes carry
    ``horizon``/``survival``.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON ({exc})") from None
    for key in ("n", "covariates", "outcome"):
        if key not in payload:
            raise SchemaViolation(f"{path}: missing key {key!r}")
    n = payload["n"]
    if not isinstance(n, int) or n <= 0:
        raise SchemaViolation(f"{path}: n must be a positive integer")
    covs = payload["covariates"]
    if not isinstance(covs, dict) or not covs:
        raise SchemaViolation(f"{path}: covariates must be a non-empty object")
    names = tuple(covs.keys())
    means = []
    for name in names:
        v = covs[name]
        if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
            raise SchemaViolation(f"{path}: covariate {name!r} is not a finite number")
        means.append(float(v))
    for name in payload.get("binary_covariates", []):
        if name not in covs:
            raise SchemaViolation(f"{path}: binary covariate {name!r} not in covariates")
        if not 0.0 <= float(covs[name]) <= 1.0:
            raise ProportionOutOfRange(
                f"{path}: proportion {covs[name]} for {name!r} outside [0,1]"
            )

    outcome = payload["outcome"]
    kind_token = outcome.get("kind")
    try:
        kind = OutcomeKind(kind_token)
    except ValueError:
        raise SchemaViolation(f"{path}: unknown outcome kind {kind_token!r}") from None
    summary = {k: v for k, v in outcome.items() if k != "kind"}
    if kind is OutcomeKind.BINARY and "responders" not in summary:
        raise SchemaViolation(f"{path}: binary outcome needs 'responders'")
    if kind is OutcomeKind.CONTINUOUS and "mean" not in summary:
        raise SchemaViolation(f"{path}: continuous outcome needs 'mean'")
    return AggregateSummary(
        covariate_names=names,
        covariate_means=tuple(means),
        n=n,
        outcome_kind=kind,
        outcome_summary=summary,
    )
