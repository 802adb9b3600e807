"""Selection between the numba-compiled kernels and the pure-numpy fallback.

Set ``AGGSIR_DISABLE_NUMBA=1`` before import to force the numpy path.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}


def _numba_requested() -> bool:
    return os.environ.get("AGGSIR_DISABLE_NUMBA", "").strip().lower() in _FALSY


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
    "error_model": "numpy",
}


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
