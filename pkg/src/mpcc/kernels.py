"""Hot-kernel dispatch.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback in ``_pykernels`` is used. Setting ``MPCC_PURE_PYTHON=1``
forces the fallback.
"""

import os

if os.environ.get("MPCC_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import (BACKEND, ball_multipliers, fisher_yates,
                             shrink_step, signed_levels)
else:
    try:
        from ._ckernels import (BACKEND, ball_multipliers, fisher_yates,
                                shrink_step, signed_levels)
    except ImportError:
        from ._pykernels import (BACKEND, ball_multipliers, fisher_yates,
                                 shrink_step, signed_levels)

__all__ = ["BACKEND", "ball_multipliers", "fisher_yates", "shrink_step",
           "signed_levels"]
