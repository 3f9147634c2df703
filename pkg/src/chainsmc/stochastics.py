"""Random number streams, sampling distributions, and empirical datasets.

Reproducibility contract: every random draw in a run is made through an
RngStream derived from (master_seed, stream_index).  Streams with distinct
indices are statistically independent and each is fully determined by the
pair, so runs can be replayed exactly and trace i is the same whether traces
are generated sequentially or in parallel.
"""

from __future__ import annotations

import csv
import hashlib
import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from datetime import date, datetime
from functools import cached_property
from itertools import accumulate
from typing import Mapping, Sequence

from .errors import (
    BadParameterError,
    DatasetParseError,
    EmptyFileError,
    EmptySupportError,
    NegativeValueError,
)
from .expr import Expr, eval_expr

_SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF

#: Accepted dataset units mapped to their factor into seconds.
UNITS = {"seconds": 1.0, "minutes": 60.0, "milliseconds": 0.001}

_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()


# ---------------------------------------------------------------------------
# Streams
# ---------------------------------------------------------------------------

class RngStream:
    """A deterministic random stream identified by (master_seed, index).

    The underlying generator is seeded with a SHA-256 digest of the pair, so
    streams for different indices under the same master seed do not overlap
    and the mapping is stable across platforms and Python versions.  Master
    seeds are reduced to 64 bits.
    """

    __slots__ = ("master_seed", "stream_index", "_rand")

    def __init__(self, master_seed: int, stream_index: int):
        self.master_seed = int(master_seed) & _SEED_MASK
        self.stream_index = int(stream_index)
        digest = hashlib.sha256(
            f"chainsmc:{self.master_seed}:{self.stream_index}".encode()
        ).digest()
        self._rand = random.Random(int.from_bytes(digest, "big"))

    def random(self) -> float:
        """Uniform draw in [0, 1)."""
        return self._rand.random()

    def uniform(self, low: float, high: float) -> float:
        """Uniform draw in [low, high]; exact when the interval is a point."""
        if low == high:
            return low
        return self._rand.uniform(low, high)

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return self._rand.randrange(n)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index})"


def rng_stream(master_seed: int, stream_index: int) -> RngStream:
    return RngStream(master_seed, stream_index)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """An empirical sample of non-negative durations, held in seconds.

    ``samples`` is the ordered sequence of (timestamp, value) pairs where
    timestamps are epoch seconds; ordering follows the source file.
    ``null_count`` records rows dropped by a tolerant load.
    """

    name: str
    unit: str
    samples: tuple[tuple[float, float], ...]
    source: str = ""
    null_count: int = 0

    def __post_init__(self):
        if self.unit not in UNITS:
            raise BadParameterError(f"unknown unit {self.unit!r}; expected one of {sorted(UNITS)}")
        if not self.samples:
            raise EmptySupportError(f"dataset {self.name!r} has no samples")
        prev_ts = None
        for ts, value in self.samples:
            if not math.isfinite(value) or value < 0:
                raise BadParameterError(f"dataset {self.name!r} holds bad value {value!r}")
            if prev_ts is not None and ts < prev_ts:
                raise BadParameterError(f"dataset {self.name!r} timestamps out of order")
            prev_ts = ts

    @classmethod
    def from_values(cls, name: str, values: Sequence[float], unit: str = "seconds") -> "Dataset":
        """Build a dataset from bare values with synthetic daily timestamps."""
        factor = UNITS.get(unit)
        if factor is None:
            raise BadParameterError(f"unknown unit {unit!r}")
        samples = tuple((i * 86400.0, float(v) * factor) for i, v in enumerate(values))
        return cls(name=name, unit=unit, samples=samples)

    @cached_property
    def values(self) -> tuple[float, ...]:
        """Values only, in seconds, preserving source order."""
        return tuple(v for _, v in self.samples)

    def __len__(self):
        return len(self.samples)


def _parse_timestamp(text: str) -> float:
    """Epoch seconds from an integer/float literal or an ISO date/datetime."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        d = date.fromisoformat(text)
        return (d.toordinal() - _EPOCH_ORDINAL) * 86400.0
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
        epoch = datetime(1970, 1, 1, tzinfo=dt.tzinfo)
        return (dt - epoch).total_seconds()
    except ValueError:
        raise ValueError(f"bad timestamp {text!r}") from None


_NULL_TOKENS = {"", "null", "na", "nan", "none"}


def load_dataset(path: str, unit: str = "seconds",
                 name: str | None = None, tolerant: bool = False) -> Dataset:
    """Load a two-column CSV of (timestamp, duration) rows.

    Timestamps are ISO dates/datetimes or epoch seconds; durations are
    converted from ``unit`` into seconds.  A leading header row is skipped.
    In strict mode (the default) null durations raise DatasetParseError; a
    tolerant load drops them and counts them in ``null_count``.  Negative
    durations and malformed rows are always fatal, with 1-based row numbers.
    """
    factor = UNITS.get(unit)
    if factor is None:
        raise BadParameterError(f"unknown unit {unit!r}; expected one of {sorted(UNITS)}")
    samples: list[tuple[float, float]] = []
    null_count = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise DatasetParseError(row_no, f"expected 2 columns, got {len(row)}")
            ts_text, val_text = row[0].strip(), row[1].strip()
            if row_no == 1:
                # Header detection: a first row whose fields parse as neither
                # timestamp nor number is a header, not data.
                try:
                    _parse_timestamp(ts_text)
                except ValueError:
                    try:
                        float(val_text)
                    except ValueError:
                        continue
            try:
                ts = _parse_timestamp(ts_text)
            except ValueError as exc:
                raise DatasetParseError(row_no, str(exc)) from None
            if val_text.lower() in _NULL_TOKENS:
                if tolerant:
                    null_count += 1
                    continue
                raise DatasetParseError(row_no, "null value")
            try:
                value = float(val_text)
            except ValueError:
                raise DatasetParseError(row_no, f"bad value {val_text!r}") from None
            if math.isnan(value):
                if tolerant:
                    null_count += 1
                    continue
                raise DatasetParseError(row_no, "null value")
            if not math.isfinite(value):
                raise DatasetParseError(row_no, f"value {val_text!r} is not finite")
            if value < 0:
                raise NegativeValueError(row_no, value)
            if samples and ts < samples[-1][0]:
                raise DatasetParseError(row_no, "timestamp out of order")
            samples.append((ts, value * factor))
    if not samples:
        raise EmptyFileError(f"no data rows in {path}")
    return Dataset(
        name=name if name is not None else _stem(path),
        unit=unit,
        samples=tuple(samples),
        source=str(path),
        null_count=null_count,
    )


def _stem(path: str) -> str:
    base = str(path).rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


@dataclass(frozen=True)
class ReliabilityPolicy:
    """Thresholds a dataset must meet before a model run may use it."""

    max_gap_seconds: float = 7 * 86400.0
    min_rows: int = 100


@dataclass(frozen=True)
class ValidationReport:
    reliable: bool
    row_count: int
    null_count: int
    max_gap_seconds: float
    first_timestamp: float
    last_timestamp: float
    messages: tuple[str, ...] = ()


def validate_dataset(dataset: Dataset,
                     policy: ReliabilityPolicy = ReliabilityPolicy()) -> ValidationReport:
    """Judge a dataset against a reliability policy.

    A dataset is reliable when it has no null rows, at least ``min_rows``
    rows, and no timestamp gap wider than ``max_gap_seconds``.
    """
    timestamps = [ts for ts, _ in dataset.samples]
    max_gap = 0.0
    for a, b in zip(timestamps, timestamps[1:]):
        max_gap = max(max_gap, b - a)
    messages = []
    if dataset.null_count > 0:
        messages.append(f"{dataset.null_count} null rows dropped")
    if len(dataset) < policy.min_rows:
        messages.append(f"only {len(dataset)} rows, need {policy.min_rows}")
    if max_gap > policy.max_gap_seconds:
        messages.append(
            f"largest gap {max_gap / 86400.0:.1f} days exceeds "
            f"{policy.max_gap_seconds / 86400.0:.1f} days"
        )
    return ValidationReport(
        reliable=not messages,
        row_count=len(dataset),
        null_count=dataset.null_count,
        max_gap_seconds=max_gap,
        first_timestamp=timestamps[0],
        last_timestamp=timestamps[-1],
        messages=tuple(messages),
    )


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

class Distribution:
    """Base class for samplable distributions over non-negative reals."""

    __slots__ = ()


@dataclass(frozen=True)
class Uniform(Distribution):
    low: float
    high: float

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise BadParameterError("uniform bounds must be finite")
        if self.low > self.high:
            raise BadParameterError(f"uniform bounds out of order: [{self.low}, {self.high}]")


@dataclass(frozen=True)
class Bernoulli(Distribution):
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise BadParameterError(f"Bernoulli probability {self.p} outside [0, 1]")


@dataclass(frozen=True)
class DiscreteFinite(Distribution):
    """Finite support with non-negative weights (not necessarily normalized)."""

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.values:
            raise EmptySupportError("discrete distribution with no values")
        if len(self.values) != len(self.weights):
            raise BadParameterError("values and weights differ in length")
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise BadParameterError("weights must be finite and non-negative")
        if sum(self.weights) <= 0.0:
            raise EmptySupportError("all weights are zero")

    @cached_property
    def _cumulative(self) -> tuple[float, ...]:
        return tuple(accumulate(self.weights))


@dataclass(frozen=True)
class Empirical(Distribution):
    """Uniform resampling of a dataset's values (index-uniform)."""

    dataset: Dataset


@dataclass(frozen=True)
class StateBernoulli(Distribution):
    """Bernoulli whose success probability is an expression over the current
    model state, clamped into [0, 1] at draw time."""

    probability: Expr


def sample(dist: Distribution, rng: RngStream,
           env: Mapping[str, object] | None = None) -> float:
    """Draw one value as a float.  ``env`` is required for StateBernoulli."""
    t = type(dist)
    if t is Uniform:
        return rng.uniform(dist.low, dist.high)
    if t is Bernoulli:
        return 1.0 if rng.random() < dist.p else 0.0
    if t is DiscreteFinite:
        cum = dist._cumulative
        r = rng.random() * cum[-1]
        return dist.values[bisect_right(cum, r)]
    if t is Empirical:
        values = dist.dataset.values
        return values[rng.integers(len(values))]
    if t is StateBernoulli:
        p = eval_expr(dist.probability, env if env is not None else {})
        p = min(1.0, max(0.0, p))
        return 1.0 if rng.random() < p else 0.0
    raise BadParameterError(f"not a distribution: {dist!r}")
