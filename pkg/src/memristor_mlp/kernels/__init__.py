"""Hot loops, compiled when the extension is available.

``BACKEND`` is ``"cython"`` or ``"python"``. Set ``MEMRISTOR_MLP_PURE_PYTHON=1``
before import to force the numpy fallback.
"""

import os

from . import _fallback

if os.environ.get("MEMRISTOR_MLP_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

interp_uniform = _impl.interp_uniform
train_two_layer = _impl.train_two_layer

__all__ = ["BACKEND", "interp_uniform", "train_two_layer"]
