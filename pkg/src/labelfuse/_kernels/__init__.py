"""Inference kernels with a compiled fast path and a NumPy fallback.

Importing this package picks the compiled Cython backend when it is built,
otherwise the NumPy one. Set ``LABELFUSE_KERNELS=python`` or ``=compiled``
to force a choice; forcing the compiled backend raises if the extension is
unavailable. Both backends expose the same three functions and agree
numerically to within 1e-10, so results do not depend on the selection
beyond that tolerance.
"""

from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("LABELFUSE_KERNELS", "").strip().lower()

if _requested in ("python", "py", "numpy"):
    _impl = _pykernels
elif _requested in ("", "compiled", "c", "cython"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested:
            raise ImportError(
                "LABELFUSE_KERNELS=compiled but the extension is not built; "
                "reinstall with a C toolchain or unset the variable"
            ) from None
        _impl = _pykernels
else:
    raise ValueError(f"unknown LABELFUSE_KERNELS value: {_requested!r}")

BACKEND = _impl.NAME
digamma = _impl.digamma
label_mass = _impl.label_mass
posterior_step = _impl.posterior_step

__all__ = ["BACKEND", "digamma", "label_mass", "posterior_step"]
