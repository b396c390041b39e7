"""Hot kernels with a compiled implementation and a numpy fallback.

The compiled extension is used when it is importable, unless the
environment variable ``CVRSP_PURE_PYTHON`` is set to a non-empty value.
``BACKEND`` names the implementation that was selected.
"""

import os

from . import _chain_py

if os.environ.get("CVRSP_PURE_PYTHON"):
    _chain_c = None
else:
    try:
        from . import _chain as _chain_c
    except ImportError:
        _chain_c = None

if _chain_c is not None:
    chain_covariances = _chain_c.chain_covariances
    BACKEND = "cython"
else:
    chain_covariances = _chain_py.chain_covariances
    BACKEND = "numpy"

chain_covariances_py = _chain_py.chain_covariances
chain_covariances_c = None if _chain_c is None else _chain_c.chain_covariances

__all__ = ["chain_covariances", "chain_covariances_py", "chain_covariances_c", "BACKEND"]
