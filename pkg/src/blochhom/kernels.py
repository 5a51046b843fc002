"""Hot assembly kernel, compiled when available.

``toeplitz_form(L, R, ahat, n_c, index)`` returns the P x P matrix with entries
``L[p] . ahat[(index[p] - index[q]) mod n_c] . R[q]``, where ``ahat`` is the
flattened (row-major, FFT order) table of d x d Fourier coefficient matrices.
Every fiber matrix and every derivative of one is built from this product.

The compiled extension is used unless it failed to build or the environment
variable ``BLOCHHOM_PURE_PYTHON`` is set to a non-empty value other than "0".
"""
import os

import numpy as np

from . import _assembly_py

BACKEND = "python"
_impl = _assembly_py.toeplitz_form

if os.environ.get("BLOCHHOM_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _assembly
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "compiled"
        _impl = _assembly.toeplitz_form


def toeplitz_form(L, R, ahat, n_c, index):
    L = np.ascontiguousarray(L, dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)
    ahat = np.ascontiguousarray(ahat, dtype=np.complex128)
    index = np.ascontiguousarray(index, dtype=np.int64)
    return _impl(L, R, ahat, int(n_c), index)


def python_toeplitz_form(L, R, ahat, n_c, index):
    """The numpy fallback, always available (used by the benchmark and tests)."""
    return _assembly_py.toeplitz_form(
        np.asarray(L, dtype=np.float64), np.asarray(R, dtype=np.float64),
        np.asarray(ahat, dtype=np.complex128), int(n_c), np.asarray(index, dtype=np.int64))
