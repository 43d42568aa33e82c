"""``dvec`` files: per vector a u32 dimension then that many f64, little-endian."""
from __future__ import annotations

import numpy as np


class DvecError(ValueError):
    pass


def write_dvec(path, vectors) -> None:
    X = np.atleast_2d(np.asarray(vectors, dtype="<f8"))
    with open(path, "wb") as fh:
        for row in X:
            fh.write(np.uint32(row.size).astype("<u4").tobytes())
            fh.write(row.tobytes())


def read_dvec(path) -> np.ndarray:
    """Read all vectors; they must share one dimension. Ids are row positions."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.zeros((0, 0))
    if raw.size < 4:
        raise DvecError("truncated header")
    d = int(raw[:4].view("<u4")[0])
    stride = 4 + 8 * d
    if raw.size % stride:
        raise DvecError("file size is not a multiple of the record size")
    recs = raw.reshape(-1, stride)
    dims = recs[:, :4].copy().view("<u4").ravel()
    if np.any(dims != d):
        raise DvecError("mixed dimensions")
    return recs[:, 4:].copy().view("<f8").astype(np.float64)
