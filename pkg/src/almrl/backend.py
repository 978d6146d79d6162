"""Kernel backend selection.

The compiled extension (``almrl._kernels``) is preferred; the pure-Python
fallback (``almrl._kernels_py``) is used when the extension is unavailable.
Set ``ALMRL_BACKEND=python`` or ``ALMRL_BACKEND=compiled`` to force a choice.
"""

from __future__ import annotations

import os

_forced = os.environ.get("ALMRL_BACKEND", "").strip().lower()

if _forced == "python":
    from almrl import _kernels_py as kernels
elif _forced == "compiled":
    from almrl import _kernels as kernels  # type: ignore[no-redef]
elif _forced:
    raise RuntimeError(
        f"ALMRL_BACKEND={_forced!r} is not recognized; use 'python' or 'compiled'"
    )
else:
    try:
        from almrl import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from almrl import _kernels_py as kernels

BACKEND_NAME: str = kernels.BACKEND_NAME

X_MAX: float = kernels.X_MAX
MODE_LINEAR: int = kernels.MODE_LINEAR
MODE_DEADBAND: int = kernels.MODE_DEADBAND

simulate_episode_arrays = kernels.simulate_episode_arrays
reward_from_states = kernels.reward_from_states
update_sums = kernels.update_sums
simulate_linear_batch = kernels.simulate_linear_batch
