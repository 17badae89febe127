"""Simulation kernel with two interchangeable backends.

``_fast`` is a compiled (Cython) extension; ``_ref`` is the pure-Python
reference it is required to match bit for bit.  The compiled backend is
used when importable; set ``TUBEGAS_KERNEL=ref`` (or ``fast``) to force a
backend, e.g. for the parity tests or when debugging kernel internals.
"""

from __future__ import annotations

import importlib
import os

_CHOICE = os.environ.get("TUBEGAS_KERNEL", "").strip().lower()
if _CHOICE not in ("", "fast", "ref"):
    raise ImportError(
        f"TUBEGAS_KERNEL={_CHOICE!r}: expected 'fast', 'ref' or unset"
    )

if _CHOICE == "ref":
    from . import _ref as _impl

    BACKEND = "ref"
elif _CHOICE == "fast":
    from . import _fast as _impl  # type: ignore[no-redef]

    BACKEND = "fast"
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]

        BACKEND = "fast"
    except ImportError:
        from . import _ref as _impl  # type: ignore[no-redef]

        BACKEND = "ref"

Kernel = _impl.Kernel
EPS_STEP = _impl.EPS_STEP
GRAZE = _impl.GRAZE
BUDGET_CELLS = _impl.BUDGET_CELLS
BUDGET_COLL = _impl.BUDGET_COLL
FAMILY_STRIP = _impl.FAMILY_STRIP
FAMILY_ROUGH = _impl.FAMILY_ROUGH


def available_backends() -> dict[str, object]:
    """Map of backend name -> kernel module, for every importable backend."""
    out: dict[str, object] = {}
    for name in ("fast", "ref"):
        try:
            out[name] = importlib.import_module(f"{__name__}._{name}")
        except ImportError:
            pass
    return out


__all__ = [
    "BACKEND",
    "BUDGET_CELLS",
    "BUDGET_COLL",
    "EPS_STEP",
    "FAMILY_ROUGH",
    "FAMILY_STRIP",
    "GRAZE",
    "Kernel",
    "available_backends",
]
