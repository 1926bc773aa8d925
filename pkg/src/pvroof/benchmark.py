"""Accuracy metrics (ME, MAE, RMSE, MAPE), timing and report tables."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import dataclass

import numpy as np

from ._validation import check_paired
from .exceptions import ParseError

QUANTITIES = ("tilt", "azimuth", "surface", "capacity")
UNITS = {"tilt": "deg", "azimuth": "deg", "surface": "m2", "capacity": "kWp"}


@dataclass(frozen=True)
class MetricReport:
    me: float
    mae: float
    rmse: float
    mape: float | None
    n: int
    runtime_per_item: float | None = None
    circular: bool = False


def angular_difference(pred, truth):
    """``pred - truth`` wrapped to (-180, 180]."""
    d = np.mod(np.asarray(pred, dtype=float) - np.asarray(truth, dtype=float), 360.0)
    return np.where(d > 180.0, d - 360.0, d)


def compute_metrics(pred, truth, circular=False, mape=False, runtime_per_item=None) -> MetricReport:
    """Error statistics of ``pred`` against ``truth``.

    With ``circular`` each difference is wrapped to (-180, 180] first
    (azimuths). MAPE is in percent and requires non-zero truth values.
    """
    pred, truth = check_paired(pred, truth)
    err = angular_difference(pred, truth) if circular else pred - truth
    abs_err = np.abs(err)
    mape_value = None
    if mape:
        zero = np.flatnonzero(truth == 0)
        if len(zero):
            raise ValueError(f"MAPE undefined: truth value is 0 at index {int(zero[0])}")
        mape_value = float(100.0 * np.mean(abs_err / np.abs(truth)))
    return MetricReport(
        me=float(np.mean(err)),
        mae=float(np.mean(abs_err)),
        rmse=float(math.sqrt(np.mean(err * err))),
        mape=mape_value,
        n=len(err),
        runtime_per_item=runtime_per_item,
        circular=circular,
    )


def timed(run, n_items=1, repetitions=3):
    """Median wall-clock seconds per item of ``run()`` over ``repetitions``.

    ``run`` processes a batch of ``n_items``. Outputs of successive runs
    must compare equal; a mismatch raises ``AssertionError``.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    times, first = [], None
    for i in range(repetitions):
        t0 = time.perf_counter()
        out = run()
        times.append(time.perf_counter() - t0)
        if i == 0:
            first = out
        elif not _same(first, out):
            raise AssertionError(f"non-deterministic output on repetition {i}")
    return statistics.median(times) / max(n_items, 1)


def _same(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)
    return a == b


@dataclass(frozen=True)
class BenchmarkReport:
    quantity: str
    rows: tuple[tuple[str, MetricReport], ...]

    HEADER = ("method", "n", "me", "mae", "rmse", "mape", "runtime")

    def _cells(self):
        for name, r in self.rows:
            yield [
                name, str(r.n), f"{r.me:.6g}", f"{r.mae:.6g}", f"{r.rmse:.6g}",
                "-" if r.mape is None else f"{r.mape:.6g}",
                "-" if r.runtime_per_item is None else f"{r.runtime_per_item:.3g}",
            ]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        w.writerows(self._cells())
        return buf.getvalue()

    def to_text(self):
        unit = UNITS.get(self.quantity, "")
        circular = any(r.circular for _, r in self.rows) or self.quantity == "azimuth"
        lines = [f"# {self.quantity} [{unit}]" + (" (errors wrapped to (-180, 180])" if circular else "")]
        table = [list(self.HEADER)] + list(self._cells())
        widths = [max(len(row[i]) for row in table) for i in range(len(self.HEADER))]
        for row in table:
            lines.append("  ".join(c.ljust(wd) if i == 0 else c.rjust(wd) for i, (c, wd) in enumerate(zip(row, widths))))
        return "\n".join(lines) + "\n"


def benchmark_report(entries, quantity="tilt") -> BenchmarkReport:
    """One metrics row per ``(method, pred, truth[, runtime])`` entry.

    Azimuth tables use circular errors; surface and capacity tables also
    report MAPE.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    rows = []
    for entry in entries:
        name, pred, truth, *rest = entry
        rows.append((name, compute_metrics(
            pred, truth,
            circular=quantity == "azimuth",
            mape=quantity in ("surface", "capacity"),
            runtime_per_item=rest[0] if rest else None,
        )))
    return BenchmarkReport(quantity, tuple(rows))


def read_values_csv(source):
    """Read an ``id,value`` CSV into an ordered ``{id: float}`` dict.

    Empty values (e.g. undefined azimuths) are read as NaN.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["id", "value"]:
        raise ParseError("expected header 'id,value'", line=1)
    out = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) < 2:
            raise ParseError("expected 2 columns", line=line)
        key = row[0].strip()
        if key in out:
            raise ParseError(f"duplicate id {key!r}", line=line)
        if not row[1].strip():
            out[key] = math.nan
            continue
        try:
            out[key] = float(row[1])
        except ValueError:
            raise ParseError(f"non-numeric value {row[1]!r}", line=line) from None
    return out
