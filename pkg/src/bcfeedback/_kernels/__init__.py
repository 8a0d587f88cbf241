"""Hot quantization kernels with a compiled core and a numpy fallback.

The compiled module is used when it imports; set ``BCFEEDBACK_BACKEND=python``
to force the fallback. Both expose ``best_codeword`` and ``fresh_best_codewords``.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("BCFEEDBACK_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

best_codeword = _impl.best_codeword
fresh_best_codewords = _impl.fresh_best_codewords

__all__ = ["BACKEND", "best_codeword", "fresh_best_codewords"]
