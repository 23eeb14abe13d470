"""Numba backend selection.

The hot numeric kernels in :mod:`mousetrail.kernels` exist twice: a numba
``@njit`` version and a pure-numpy fallback with identical semantics.  The
backend is picked once at import time:

* ``MOUSETRAIL_NO_NUMBA=1`` (or ``true``/``yes``) forces the numpy fallback;
* otherwise numba is used when it imports cleanly.

Both paths consume identical pre-drawn random streams, so results are
bit-equal regardless of backend.  ``benchmarks/bench_kernels.py`` compares
their throughput.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

_ENV_FLAG = "MOUSETRAIL_NO_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def _probe_numba() -> bool:
    try:
        import numba  # noqa: F401
    except Exception as exc:  # pragma: no cover - depends on environment
        logger.warning("numba unavailable (%s); using numpy kernels", exc)
        return False
    return True


NUMBA_ENABLED: bool = (not _env_disabled()) and _probe_numba()


def backend_name() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if NUMBA_ENABLED else "numpy"
