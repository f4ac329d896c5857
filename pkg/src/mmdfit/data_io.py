"""CSV ingestion and design-matrix preprocessing for the command line tools."""
from __future__ import annotations

import csv
import warnings

import numpy as np

from .errors import InputError

_MISSING = ("", "NA")


def load_csv(path, response_column: str | None = None):
    """Read a numeric CSV (UTF-8, header row, "NA"/empty cells are missing).

    Rows containing any missing cell are dropped with a count warning.
    Returns (y, x, x_names): y is the response column when response_column is
    given (None otherwise), x the remaining columns as a 2-d float array.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        dropped = 0
        # header is file row 1, so data rows start at 2
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(header):
                raise InputError(
                    f"{path}: row {lineno} has {len(cells)} cells, expected {len(header)}"
                )
            vals = []
            missing = False
            for name, cell in zip(header, cells):
                cell = cell.strip()
                if cell in _MISSING:
                    missing = True
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise InputError(
                        f"{path}: could not parse {cell!r} at row {lineno}, "
                        f"column {name!r}"
                    ) from None
            if missing:
                dropped += 1
            else:
                rows.append(vals)

    if dropped:
        warnings.warn(f"dropped {dropped} row(s) with missing values", stacklevel=2)
    if not rows:
        raise InputError(f"{path}: no complete data rows")
    data = np.asarray(rows, dtype=float)

    if response_column is None:
        return None, data, list(header)
    if response_column not in header:
        raise InputError(
            f"{path}: no column named {response_column!r}; "
            f"columns are {', '.join(header)}"
        )
    idx = header.index(response_column)
    y = data[:, idx]
    keep = [j for j in range(len(header)) if j != idx]
    return y, data[:, keep], [header[j] for j in keep]


def orthogonal_poly(x, degree: int) -> np.ndarray:
    """Orthogonal polynomial basis of a single column, constant term dropped.

    Centers the column, forms the Vandermonde matrix up to the degree, QR-
    factorizes it, rescales Q by the diagonal of R and normalizes each of the
    remaining columns to unit length.
    """
    x = np.ravel(np.asarray(x, dtype=float))
    if degree < 1:
        raise InputError("the polynomial degree must be at least 1")
    if len(np.unique(x)) <= degree:
        raise InputError(
            f"degree {degree} needs more than {degree} distinct values in the column"
        )
    xc = x - x.mean()
    v = np.vander(xc, degree + 1, increasing=True)
    q, r = np.linalg.qr(v)
    z = q * np.diag(r)
    z = z[:, 1:]
    return z / np.linalg.norm(z, axis=0)


def expand_poly(x, names, degree: int):
    """Per-column orthogonal polynomial expansion of a design matrix.

    Returns the expanded matrix and the matching feature names, blocks kept in
    the original column order.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    blocks = []
    out_names = []
    for j, name in enumerate(names):
        blocks.append(orthogonal_poly(x[:, j], degree))
        out_names.extend(f"poly({name}, {degree}){k}" for k in range(1, degree + 1))
    return np.column_stack(blocks), out_names
