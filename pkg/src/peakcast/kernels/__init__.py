"""Backend selection for the recurrence kernels.

The compiled Cython backend is preferred when it imported cleanly; the
numpy backend is the fallback. PEAKCAST_BACKEND=python|cython forces a
choice (forcing "cython" raises if the extension is unavailable).

Both backends implement:

    lstm_layer_forward(x_seq, w, u, b) -> (h_seq, c_seq, tanhc_seq, gates)
    lstm_layer_backward(x_seq, w, u, gates, c_seq, tanhc_seq, h_seq, dh_seq)
        -> (dx_seq, dw, du, db)

with float64 C-contiguous arrays, time-major (T, B, *) layout and packed
gate order forget | input | output | candidate.
"""

import os

from . import _lstm_np

try:
    from . import _lstm_cy
except ImportError:
    _lstm_cy = None


def available_backends():
    """Names of the backends that imported successfully."""
    names = ["python"]
    if _lstm_cy is not None:
        names.insert(0, "cython")
    return names


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "python":
        return _lstm_np
    if name == "cython":
        if _lstm_cy is None:
            raise ImportError("compiled kernel not available; reinstall with "
                              "a C compiler or use PEAKCAST_BACKEND=python")
        return _lstm_cy
    raise ValueError(f"unknown backend {name!r} (expected python or cython)")


def _select():
    forced = os.environ.get("PEAKCAST_BACKEND")
    if forced:
        return get_backend(forced)
    return _lstm_cy if _lstm_cy is not None else _lstm_np


_impl = _select()
BACKEND = _impl.BACKEND_NAME
lstm_layer_forward = _impl.lstm_layer_forward
lstm_layer_backward = _impl.lstm_layer_backward
