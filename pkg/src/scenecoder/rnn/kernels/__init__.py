"""Recurrent layer kernels with a compiled fast path.

The Cython extension is preferred when it compiled successfully; the
pure-numpy module is a drop-in fallback. Set SCENECODER_KERNELS=python
to force the fallback (used by the benchmark and parity tests).
"""

from __future__ import annotations

import os

from . import pyref

_FORCED = os.environ.get("SCENECODER_KERNELS", "").lower()

if _FORCED not in ("", "python", "fast"):
    raise RuntimeError(f"SCENECODER_KERNELS must be 'python' or 'fast', got {_FORCED!r}")

_impl = pyref
if _FORCED != "python":
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        if _FORCED == "fast":
            raise

BACKEND: str = _impl.BACKEND

simple_forward = _impl.simple_forward
simple_backward = _impl.simple_backward
gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward

FORWARD = {"simple": simple_forward, "gru": gru_forward, "lstm": lstm_forward}
BACKWARD = {"simple": simple_backward, "gru": gru_backward, "lstm": lstm_backward}
