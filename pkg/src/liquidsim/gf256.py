"""GF(256) arithmetic tables and the multiply-accumulate kernel.

Field is GF(2^8) with polynomial 0x11D, generator 2.  The hot path is
matmul(G, X): multiply a coefficient matrix into a byte matrix, used by
encode and decode.  A numba-compiled kernel is used when numba imports
(about 7x faster on one core); the numpy fallback computes identical bytes.
"""

from __future__ import annotations

import numpy as np

EXP = np.zeros(512, dtype=np.uint8)
LOG = np.zeros(256, dtype=np.int32)
_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= 0x11D
EXP[255:510] = EXP[:255]

# full 256x256 product table; 64 KiB, fits in L2
MUL = np.zeros((256, 256), dtype=np.uint8)
_nz = np.arange(1, 256)
MUL[1:, 1:] = EXP[LOG[_nz][:, None] + LOG[_nz][None, :]]

INV = np.zeros(256, dtype=np.uint8)
INV[1:] = EXP[255 - LOG[_nz]]


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("no inverse of 0 in GF(256)")
    return int(INV[a])


def _matmul_numpy(G: np.ndarray, X: np.ndarray) -> np.ndarray:
    out = np.zeros((G.shape[0], X.shape[1]), dtype=np.uint8)
    for i in range(G.shape[0]):
        acc = out[i]
        for j in range(G.shape[1]):
            c = G[i, j]
            if c:
                acc ^= MUL[c][X[j]]
    return out


try:
    import numba

    @numba.njit(cache=True)
    def _matmul_numba(G, X, MUL_):  # pragma: no cover - exercised via matmul
        m, k = G.shape
        L = X.shape[1]
        out = np.zeros((m, L), dtype=np.uint8)
        for i in range(m):
            o = out[i]
            for j in range(k):
                c = G[i, j]
                if c:
                    lut = MUL_[c]
                    row = X[j]
                    for t in range(L):
                        o[t] ^= lut[row[t]]
        return out

    def matmul(G: np.ndarray, X: np.ndarray) -> np.ndarray:
        return _matmul_numba(np.ascontiguousarray(G), np.ascontiguousarray(X), MUL)

except ImportError:  # pragma: no cover
    matmul = _matmul_numpy


def inv_matrix(A: np.ndarray) -> np.ndarray:
    """Inverse of a square GF(256) matrix by Gauss-Jordan."""
    k = A.shape[0]
    a = A.astype(np.uint8).copy()
    e = np.eye(k, dtype=np.uint8)
    for col in range(k):
        piv = col + int(np.argmax(a[col:, col] != 0))
        if a[piv, col] == 0:
            raise np.linalg.LinAlgError("singular matrix over GF(256)")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            e[[col, piv]] = e[[piv, col]]
        pinv = INV[a[col, col]]
        a[col] = MUL[pinv][a[col]]
        e[col] = MUL[pinv][e[col]]
        for row in range(k):
            if row != col and a[row, col]:
                c = a[row, col]
                a[row] ^= MUL[c][a[col]]
                e[row] ^= MUL[c][e[col]]
    return e


def solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A @ S = B over GF(256); A is (k,k), B is (k,L).

    The solution is unique over a field, so inverting the small A and
    multiplying through the wide B is byte-identical to eliminating on B
    directly, and far cheaper when L >> k.
    """
    return matmul(inv_matrix(A), B.astype(np.uint8))
