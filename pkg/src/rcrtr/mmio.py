"""MatrixMarket coordinate files and plain-text vectors.

Only ``matrix coordinate real general`` (plus ``integer``/``pattern`` values)
is accepted.  Duplicate coordinates are summed.  Parse failures raise
:class:`ParseError` with a 1-based line number.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = ["ParseError", "load_matrix_market", "save_matrix_market", "load_vector", "save_vector"]


class ParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


def load_matrix_market(path) -> sp.csr_matrix:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise ParseError(path, 1, "missing '%%MatrixMarket' header")
    obj, fmt, field, symmetry = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise ParseError(path, 1, f"unsupported format '{obj} {fmt}'")
    if field not in ("real", "integer", "pattern") or symmetry != "general":
        raise ParseError(path, 1, f"unsupported field/symmetry '{field} {symmetry}'")

    lineno = 1
    size = None
    for lineno in range(2, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if line and not line.startswith("%"):
            size = line.split()
            break
    if size is None:
        raise ParseError(path, lineno, "missing size line")
    try:
        m, n, nnz = (int(t) for t in size)
    except ValueError:
        raise ParseError(path, lineno, f"bad size line {' '.join(size)!r}") from None

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.ones(nnz)
    ntok = 2 if field == "pattern" else 3
    k = 0
    for j in range(lineno + 1, len(lines) + 1):
        line = lines[j - 1].strip()
        if not line or line.startswith("%"):
            continue
        tok = line.split()
        if len(tok) != ntok:
            raise ParseError(path, j, f"expected {ntok} fields, got {len(tok)}")
        if k >= nnz:
            raise ParseError(path, j, f"more than the declared {nnz} entries")
        try:
            i_, c_ = int(tok[0]), int(tok[1])
            if ntok == 3:
                vals[k] = float(tok[2])
        except ValueError:
            raise ParseError(path, j, f"bad entry {line!r}") from None
        if not (1 <= i_ <= m and 1 <= c_ <= n):
            raise ParseError(path, j, f"index ({i_}, {c_}) out of bounds for {m}x{n}")
        rows[k], cols[k] = i_ - 1, c_ - 1
        k += 1
    if k != nnz:
        raise ParseError(path, len(lines), f"declared {nnz} entries, found {k}")
    A = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
    A.sum_duplicates()
    return A


def save_matrix_market(path, A) -> None:
    A = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def load_vector(path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                raise ParseError(path, lineno, f"not a number: {line!r}") from None
    return np.array(out)


def save_vector(path, v) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{float(x)!r}\n" for x in np.asarray(v, dtype=float).ravel())
