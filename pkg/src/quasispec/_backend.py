"""Selection between the numba-compiled kernels and the pure-numpy path.

The numpy path is used when ``QUASISPEC_DISABLE_NUMBA`` is set to a truthy
value or when numba cannot be imported.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}


def _env_disabled():
    return os.environ.get("QUASISPEC_DISABLE_NUMBA", "").strip().lower() not in _FALSY


try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _env_disabled()


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
