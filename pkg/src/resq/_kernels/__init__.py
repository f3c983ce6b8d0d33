"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment variable
``RESQ_DISABLE_NUMBA`` is unset or falsy ("", "0", "false", "no"). Both paths
expose the same functions:

``taubin_circle(x, y) -> (xc, yc, r, degeneracy)``
``delay_scan(f_rel, zr, zi, tau0, dtau, count) -> ndarray``
``notch_residuals(p, f, zr, zi, f_ref, jac) -> (res, J | None)``
``pseudo_voigt(x, center, fwhm, eta, amplitude, background, jac) -> (val, J | None)``
``best_split(y, start, stop, min_len) -> (index, gain)``
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

ENV_FLAG = "RESQ_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false", "no")


def get_backend(name: str):
    """Return the kernel module ``"numpy"`` or ``"numba"`` regardless of the env flag."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if numba_disabled():
        return _numpy
    try:
        from . import _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        log.warning("numba unavailable; using numpy kernels")
        return _numpy
    return _numba


backend = _select()
BACKEND = backend.NAME

taubin_circle = backend.taubin_circle
delay_scan = backend.delay_scan
notch_residuals = backend.notch_residuals
pseudo_voigt = backend.pseudo_voigt
best_split = backend.best_split
