"""CSV readers and writers for samples, pmfs, softmax tables and score tables.

Readers raise :class:`InputFormatError` with 1-based row numbers (the
header is row 1) and 0-based column indices.
"""

import csv
from pathlib import Path

import numpy as np

from .distributions import DiscretePmf
from .exceptions import InputFormatError

FLOAT_FMT = "%.17g"


def _fmt(x):
    return FLOAT_FMT % x


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _read_table(path):
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputFormatError(f"{path}: cannot read ({exc.strerror})") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise InputFormatError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], rows[1:]


def _parse_rows(path, header, rows):
    out = np.empty((len(rows), len(header)))
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise InputFormatError(
                f"{path}: row {r} has {len(row)} fields, header has {len(header)}"
            )
        for c, field in enumerate(row):
            try:
                value = float(field)
            except ValueError:
                raise InputFormatError(
                    f"{path}: row {r}, column {c} ({header[c]}): cannot parse {field!r}"
                ) from None
            if not np.isfinite(value):
                raise InputFormatError(
                    f"{path}: row {r}, column {c} ({header[c]}): non-finite value"
                )
            out[r - 2, c] = value
    return out


def write_sample_csv(path, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = [f"f{j}" for j in range(X.shape[1])]
    write_csv(path, header, (list(map(float, row)) for row in X))


def read_sample_csv(path):
    header, rows = _read_table(path)
    expected = [f"f{j}" for j in range(len(header))]
    if header != expected:
        raise InputFormatError(f"{path}: header must be f0,f1,..., got {','.join(header)}")
    if not rows:
        raise InputFormatError(f"{path}: no observations")
    return _parse_rows(path, header, rows)


def write_pmf_csv(path, pmf):
    write_csv(path, ["support", "weight"], zip(map(float, pmf.support), map(float, pmf.weights)))


def read_pmf_csv(path):
    header, rows = _read_table(path)
    if header != ["support", "weight"]:
        raise InputFormatError(f"{path}: header must be support,weight")
    table = _parse_rows(path, header, rows)
    try:
        return DiscretePmf(table[:, 0], table[:, 1])
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from exc


def read_softmax_csv(path, tol=1e-6):
    """Read ``p0,...,p{k-1},label`` rows; returns ``(probs, labels)``.

    Rows whose probabilities are negative or do not sum to one within
    ``tol`` are reported together by row number.
    """
    header, rows = _read_table(path)
    k = len(header) - 1
    if k < 2 or header != [f"p{j}" for j in range(k)] + ["label"]:
        raise InputFormatError(f"{path}: header must be p0,...,p{{k-1}},label")
    if not rows:
        raise InputFormatError(f"{path}: no rows")
    table = _parse_rows(path, header, rows)
    probs, labels = table[:, :k], table[:, k]
    bad_label = np.flatnonzero(~np.isin(labels, (0.0, 1.0)))
    if bad_label.size:
        raise InputFormatError(
            f"{path}: label must be 0 or 1 in rows {_row_list(bad_label)}"
        )
    bad = np.flatnonzero((probs < -tol).any(axis=1) | (np.abs(probs.sum(axis=1) - 1.0) > tol))
    if bad.size:
        raise InputFormatError(
            f"{path}: rows violate the probability simplex: {_row_list(bad)}"
        )
    return probs, labels.astype(int)


def write_softmax_csv(path, probs, labels):
    k = probs.shape[1]
    header = [f"p{j}" for j in range(k)] + ["label"]
    write_csv(path, header, ([*map(float, p), int(lab)] for p, lab in zip(probs, labels)))


def read_scores_csv(path):
    header, rows = _read_table(path)
    if header != ["score", "label"]:
        raise InputFormatError(f"{path}: header must be score,label")
    table = _parse_rows(path, header, rows)
    return table[:, 0], table[:, 1].astype(int)


def _row_list(idx, limit=20):
    # +2: 1-based numbering and the header row
    shown = ", ".join(str(i + 2) for i in idx[:limit])
    return shown + (f" (and {idx.size - limit} more)" if idx.size > limit else "")
