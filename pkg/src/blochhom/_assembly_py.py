"""Pure numpy version of the assembly kernel."""
import numpy as np

_BLOCK_ENTRIES = 1 << 22


def toeplitz_form(L, R, ahat, n_c, index):
    P, d = L.shape
    stride = n_c ** np.arange(d - 1, -1, -1, dtype=np.int64)
    out = np.empty((P, P), dtype=np.complex128)
    rows = max(1, _BLOCK_ENTRIES // (P * d * d))
    for start in range(0, P, rows):
        stop = min(P, start + rows)
        flat = ((index[start:stop, None, :] - index[None, :, :]) % n_c) @ stride
        out[start:stop] = np.einsum("pi,pqij,qj->pq", L[start:stop], ahat[flat], R,
                                    optimize=True)
    return out
