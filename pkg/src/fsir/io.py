"""Long-format CSV reading and writing for longitudinal datasets.

One row per observation with header ``subject_id,time,value,response``; the
response is repeated on every row of a subject.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .data import LongitudinalDataset
from .exceptions import InconsistentResponse, OutOfInterval, ParseError

HEADER = ["subject_id", "time", "value", "response"]


def _number(text, line, name):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(line, f"{name} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ParseError(line, f"{name} must be finite")
    return v


def ingest_csv(path, interval=None):
    """Read a long-format CSV into a :class:`LongitudinalDataset`.

    Subjects keep their order of first appearance; observations are sorted
    by time within each subject.

    Parameters
    ----------
    path : str or path-like
    interval : tuple of float, optional
        Time domain; inferred from the observed times when omitted.

    Raises
    ------
    ParseError
        Wrong header or a malformed row (with its line number).
    InconsistentResponse
        A subject whose rows disagree on the response.
    OutOfInterval
        A time outside ``interval``.
    """
    subjects = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HEADER:
            raise ParseError(1, f"expected header {','.join(HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(line, f"expected 4 fields, got {len(row)}")
            sid = row[0].strip()
            if not sid:
                raise ParseError(line, "empty subject_id")
            t = _number(row[1], line, "time")
            x = _number(row[2], line, "value")
            y = _number(row[3], line, "response")
            rec = subjects.setdefault(sid, {"t": [], "x": [], "y": y})
            if rec["y"] != y:
                raise InconsistentResponse(
                    f"subject {sid!r} has responses {rec['y']} and {y} (line {line})"
                )
            rec["t"].append(t)
            rec["x"].append(x)
    if not subjects:
        raise ParseError(2, "no data rows")
    if interval is None:
        allt = [t for rec in subjects.values() for t in rec["t"]]
        interval = (min(allt), max(allt))
    a, b = interval
    for sid, rec in subjects.items():
        if min(rec["t"]) < a or max(rec["t"]) > b:
            raise OutOfInterval(f"subject {sid!r} has times outside [{a}, {b}]")
    return LongitudinalDataset(
        times=[np.array(r["t"]) for r in subjects.values()],
        values=[np.array(r["x"]) for r in subjects.values()],
        response=np.array([r["y"] for r in subjects.values()]),
        interval=(a, b),
        ids=list(subjects),
    )


def write_csv(data, path):
    """Write a dataset in long format with round-trip float precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for sid, t, x, y in zip(data.ids, data.times, data.values, data.response):
            for tj, xj in zip(t, x):
                w.writerow([sid, repr(float(tj)), repr(float(xj)), repr(float(y))])
