"""Selects the compiled Monte Carlo core, falling back to pure numpy.

Set ``BAYESMPC_DISABLE_EXTENSION=1`` in the environment to force the numpy
fallback (used by the benchmark and by byte-exact golden tests).
"""

from __future__ import annotations

import os

if os.environ.get("BAYESMPC_DISABLE_EXTENSION"):
    from . import _mckernels_py as impl

    USING_EXTENSION = False
else:
    try:
        from . import _mckernels as impl  # type: ignore[no-redef]

        USING_EXTENSION = True
    except ImportError:
        from . import _mckernels_py as impl  # type: ignore[no-redef]

        USING_EXTENSION = False


def implementation_name() -> str:
    return "compiled" if USING_EXTENSION else "python"
