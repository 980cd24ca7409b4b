"""Selection between the compiled and the numpy Fock kernels.

The compiled extension is used when it imports; setting the environment
variable ``BOSECOUNT_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os
from types import SimpleNamespace

from . import _fock_py

try:
    from . import _fock_ext
except ImportError:  # extension not built
    _fock_ext = None

IMPLEMENTATIONS = {"python": _fock_py}
if _fock_ext is not None:
    IMPLEMENTATIONS["compiled"] = _fock_ext

DEFAULT = "python" if os.environ.get("BOSECOUNT_PURE_PYTHON") == "1" or _fock_ext is None else "compiled"


def get_impl(name=None):
    """Kernel module by name (``"compiled"`` or ``"python"``), default if None."""
    name = DEFAULT if name is None else name
    try:
        mod = IMPLEMENTATIONS[name]
    except KeyError:
        raise ValueError(f"kernel implementation {name!r} unavailable; have {sorted(IMPLEMENTATIONS)}") from None
    return SimpleNamespace(name=name, apply_two_mode=mod.apply_two_mode, detector_probs=mod.detector_probs)


def compiled_available() -> bool:
    return _fock_ext is not None
