"""Hot-kernel backend selection.

Imports the compiled extension when available, otherwise the pure-numpy
fallback. Set ``COARSEPDE_DISABLE_EXT=1`` to force the fallback. Both
backends are bit-identical by construction (see pure.py / _core.pyx).
"""

import os

from . import pure

if os.environ.get("COARSEPDE_DISABLE_EXT", "") == "1":
    _impl = pure
    HAVE_EXT = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        _impl = pure
        HAVE_EXT = False

BACKEND = "compiled" if HAVE_EXT else "numpy"

box_counts = _impl.box_counts
box_moments = _impl.box_moments
em_step = _impl.em_step
burgers_rhs = _impl.burgers_rhs
