"""Combining-kernel backend selection.

The compiled Cython kernel is used when its extension module imported
successfully; otherwise (or when CFOTA_PURE_PYTHON is set in the
environment) the numpy reference implementation takes over.  Both
expose the same combine_terms contract and agree to rounding error.
"""

from __future__ import annotations

import os

import numpy as np

from . import _ref

_impl = _ref.combine_terms
BACKEND = "python"

if not os.environ.get("CFOTA_PURE_PYTHON"):
    try:
        from . import _fast

        _impl = _fast.combine_terms
        BACKEND = "compiled"
    except ImportError:
        pass


def _prep(a, dtype):
    return np.ascontiguousarray(a, dtype=dtype)


def combine_terms(h, h_hat, z, x, mask, inv_c, alpha, n_eff, backend=None):
    """Four receive components per slot; see _ref for the contract.

    ``backend`` forces "python" or "compiled" for cross-checks; the
    default is the module-level selection.
    """
    if backend is None:
        impl = _impl
    elif backend == "python":
        impl = _ref.combine_terms
    elif backend == "compiled":
        if BACKEND != "compiled":
            raise RuntimeError("compiled kernel is not available")
        impl = _fast.combine_terms
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return impl(
        _prep(h, np.complex128),
        _prep(h_hat, np.complex128),
        _prep(z, np.complex128),
        _prep(x, np.complex128),
        _prep(mask, np.float64),
        _prep(inv_c, np.float64),
        float(alpha),
        int(n_eff),
    )
