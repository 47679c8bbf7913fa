"""Pick the compiled kernel when it is importable, else the numpy fallback.

Set ``SEQVO_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _lk_py

BACKEND = "python"
lk_refine = _lk_py.lk_refine

if os.environ.get("SEQVO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _lk  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        lk_refine = _lk.lk_refine


def get_kernel(name=None):
    """Return the refinement kernel called ``name`` (``"cython"``/``"python"``), or the active one."""
    if name is None:
        return lk_refine
    if name == "python":
        return _lk_py.lk_refine
    if name == "cython":
        from . import _lk  # type: ignore[attr-defined]

        return _lk.lk_refine
    raise ValueError(f"unknown flow backend '{name}'")
