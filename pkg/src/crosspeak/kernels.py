"""Eigensolver backend selection.

At import time the compiled Jacobi kernel is preferred; the numpy
implementation is the fallback and can be forced with the environment
variable ``CROSSPEAK_PURE_PY=1``.  Both backends share the ``eigh_stack``
contract (ascending eigenvalues, orthonormal column eigenvectors).
"""

import os

import numpy as np

from . import _kernels_py

# the compiled kernel handles d <= 8 but only beats the LAPACK path on
# the small matrices that dominate sweeps; benchmarks/bench_kernels.py
# puts the crossover between 4x4 and 5x5
_COMPILED_PREFERRED_DIM = 4

if os.environ.get("CROSSPEAK_PURE_PY", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def eigh_stack(h, compute_vectors=True):
    """Eigendecompose a stack (n, d, d) of Hermitian matrices."""
    h = np.asarray(h)
    if _impl is not _kernels_py and h.shape[-1] > _COMPILED_PREFERRED_DIM:
        return _kernels_py.eigh_stack(h, compute_vectors)
    return _impl.eigh_stack(h, compute_vectors)


def eigh(h, compute_vectors=True):
    """Eigendecompose a single Hermitian matrix (d, d)."""
    h = np.asarray(h)
    vals, vecs = eigh_stack(h[None, :, :], compute_vectors)
    return (vals[0], vecs[0]) if compute_vectors else (vals[0], None)
