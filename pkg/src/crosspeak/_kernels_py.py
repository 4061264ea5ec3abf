"""Pure-numpy twin of the compiled eigensolver kernel.

Same interface as ``crosspeak._kernels``; used when the extension is not
built or when ``CROSSPEAK_PURE_PY`` is set.  LAPACK via numpy handles the
stacked case natively.
"""

import numpy as np


def eigh_stack(h, compute_vectors=True):
    """Eigendecompose a stack (n, d, d) of Hermitian matrices.

    Returns (vals, vecs): ascending eigenvalues (n, d) and column
    eigenvectors (n, d, d), vecs None when compute_vectors is False.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 3 or h.shape[1] != h.shape[2]:
        raise ValueError("expected a stack of square matrices")
    if compute_vectors:
        vals, vecs = np.linalg.eigh(h)
        return vals, vecs
    return np.linalg.eigvalsh(h), None
