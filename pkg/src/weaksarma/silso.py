"""Readers for monthly sunspot-number files and the log-difference transform.

The monthly SILSO export is semicolon-delimited with columns
(year; month; decimal date; monthly mean; std dev; n obs; provisional flag);
a mean of -1 marks a missing month. A plain one-column numeric format is also
accepted for generic series.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .exceptions import MissingDataError, SilsoParseError

DEFAULT_RANGE = ((2010, 1), (2018, 12))


@dataclass(frozen=True)
class MonthlySeries:
    """Monthly observations with their calendar labels."""

    years: np.ndarray
    months: np.ndarray
    values: np.ndarray

    @property
    def n(self):
        return self.values.size

    def label(self, i):
        return f"{self.years[i]:04d}-{self.months[i]:02d}"


def _in_range(year, month, start, end):
    return start <= (year, month) <= end


def ingest_silso(path, start=DEFAULT_RANGE[0], end=DEFAULT_RANGE[1]):
    """Parse a semicolon-delimited monthly sunspot file into a MonthlySeries.

    Rows outside [start, end] (inclusive, as (year, month) pairs) are skipped.

    Raises
    ------
    SilsoParseError
        On malformed rows, with the offending line number.
    MissingDataError
        When a selected month carries the -1 missing-value sentinel.
    """
    years, months, values = [], [], []
    n_rows = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(";")]
            if len(parts) < 4:
                raise SilsoParseError(
                    f"expected at least 4 semicolon-separated fields, got {len(parts)}",
                    lineno)
            try:
                year = int(parts[0])
                month = int(parts[1])
                mean = float(parts[3])
            except ValueError as exc:
                raise SilsoParseError(str(exc), lineno) from None
            if not 1 <= month <= 12:
                raise SilsoParseError(f"month out of range: {month}", lineno)
            n_rows += 1
            if not _in_range(year, month, tuple(start), tuple(end)):
                continue
            if mean == -1.0:
                raise MissingDataError(
                    f"missing monthly value ({year:04d}-{month:02d}, line {lineno})")
            years.append(year)
            months.append(month)
            values.append(mean)
    if n_rows == 0:
        raise SilsoParseError("file contains no data rows")
    if not values:
        raise SilsoParseError(
            f"no rows inside the requested range {start}..{end}")
    return MonthlySeries(years=np.asarray(years), months=np.asarray(months),
                         values=np.asarray(values, dtype=float))


def read_plain(path):
    """Read a one-value-per-line numeric series."""
    values = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line.split(",")[0]))
            except ValueError as exc:
                raise SilsoParseError(str(exc), lineno) from None
    if not values:
        raise SilsoParseError("file contains no data rows")
    return np.asarray(values, dtype=float)


def transform_logdiff_center(series, labels=None):
    """Mean-corrected log differences: X_t = log y_t - log y_{t-1} - mean.

    Accepts a MonthlySeries or a plain array; the output is one observation
    shorter and has sample mean zero to machine precision.
    """
    if isinstance(series, MonthlySeries):
        values = series.values
        labels = [series.label(i) for i in range(series.n)]
    else:
        values = np.asarray(series, dtype=float)
    if values.size < 2:
        raise ValueError("need at least two observations to difference")
    bad = np.flatnonzero(values <= 0.0)
    if bad.size:
        where = labels[bad[0]] if labels is not None else f"index {bad[0]}"
        raise ValueError(
            f"log transform needs strictly positive values; offending entry at {where}")
    z = np.diff(np.log(values))
    return z - z.mean()


def file_digest(path):
    """Hex SHA-256 of a file, for report provenance."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()
